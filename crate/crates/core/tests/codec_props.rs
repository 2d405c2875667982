use meshmac::builder::{build_frame, compute_fcs, BufferDescriptor, NavRegister, SequenceState, StationRole};
use meshmac::codec::{decode, encode, serialize_tx, CodecError};
use meshmac::frame::{FcFlags, Frame, FrameKind};
use proptest::prelude::*;

mod common;
use common::{any_frame, frame_of};

/// Reflected CRC-32 computed one bit at a time.
fn crc32_bitwise(data: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in data {
        crc ^= u32::from(b);
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

fn check_roundtrip(f: &Frame) -> Result<(), TestCaseError> {
    let bytes = encode(f).unwrap();
    prop_assert_eq!(&decode(&bytes).unwrap(), f);
    prop_assert_eq!(serialize_tx(f).unwrap().len(), 8 * bytes.len());
    Ok(())
}

macro_rules! roundtrip_kind {
    ($name:ident, $kind:expr) => {
        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn $name(f in frame_of($kind)) {
                check_roundtrip(&f)?;
            }
        }
    };
}

roundtrip_kind!(roundtrip_data, FrameKind::Data);
roundtrip_kind!(roundtrip_ack, FrameKind::Ack);
roundtrip_kind!(roundtrip_cts, FrameKind::Cts);
roundtrip_kind!(roundtrip_rts, FrameKind::Rts);
roundtrip_kind!(roundtrip_ps_poll, FrameKind::PsPoll);
roundtrip_kind!(roundtrip_cfp_end, FrameKind::CfpEnd);
roundtrip_kind!(roundtrip_mgmt, FrameKind::MgmtGeneric);
roundtrip_kind!(roundtrip_mgmt_multihop, FrameKind::MgmtMultihopAction);

proptest! {
    #[test]
    fn fcs_matches_bitwise_reference(data in proptest::collection::vec(any::<u8>(), 0..512)) {
        prop_assert_eq!(compute_fcs(&data), crc32_bitwise(&data));
    }

    #[test]
    fn first_tx_bits_are_fch_low_byte_lsb_first(f in any_frame()) {
        let bits = serialize_tx(&f).unwrap();
        let low = f.fch.pack().to_le_bytes()[0];
        let naive: Vec<bool> = (0..8).map(|i| (low >> i) & 1 == 1).collect();
        prop_assert_eq!(&bits.bits()[..8], &naive[..]);
        prop_assert_eq!(bits.to_bytes().unwrap(), encode(&f).unwrap());
    }

    #[test]
    fn any_single_byte_corruption_fails(f in any_frame(), pos in any::<prop::sample::Index>(), x in 1u8..=255) {
        let mut bytes = encode(&f).unwrap();
        let i = pos.index(bytes.len());
        bytes[i] ^= x;
        let bad_fcs = matches!(decode(&bytes), Err(CodecError::BadFcs { .. }));
        prop_assert!(bad_fcs);
    }
}

#[test]
fn crc_check_value() {
    assert_eq!(crc32_bitwise(b"123456789"), 0xCBF4_3926);
    assert_eq!(compute_fcs(b"123456789"), crc32_bitwise(b"123456789"));
}

#[test]
fn every_bit_flip_of_fixture_fails_fcs() {
    let buf = BufferDescriptor {
        ra: Some("02:00:00:00:00:02".parse().unwrap()),
        ta: Some("02:00:00:00:00:01".parse().unwrap()),
        da: Some("02:00:00:00:00:02".parse().unwrap()),
        sa: Some("02:00:00:00:00:01".parse().unwrap()),
        payload: b"fixture payload".to_vec(),
        ..BufferDescriptor::default()
    };
    let f = build_frame(
        FrameKind::Data,
        &buf,
        StationRole::MeshPoint,
        NavRegister(122),
        SequenceState::default(),
        FcFlags::mesh_data(),
    )
    .unwrap()
    .into_frame();
    let bytes = encode(&f).unwrap();
    for bit in 0..bytes.len() * 8 {
        let mut b = bytes.clone();
        b[bit / 8] ^= 1 << (bit % 8);
        assert!(matches!(decode(&b), Err(CodecError::BadFcs { .. })), "bit {bit}");
    }
}
