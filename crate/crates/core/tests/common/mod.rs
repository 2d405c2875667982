#![allow(dead_code)]

//! Frame strategies shared by the property and acceptance tests.

use meshmac::builder::{build_frame, BufferDescriptor, NavRegister, SequenceState, StationRole};
use meshmac::frame::{FcFlags, Frame, FrameKind, MacAddress, MeshHeader, MGMT_SUBTYPE_MULTIHOP_ACTION};
use proptest::prelude::*;

pub fn mac() -> impl Strategy<Value = MacAddress> {
    any::<[u8; 6]>().prop_map(MacAddress)
}

prop_compose! {
    pub fn buffer()(
        addrs in proptest::array::uniform5(mac()),
        payload in proptest::collection::vec(any::<u8>(), 0..300),
        mgmt in (0u8..16).prop_filter("multihop action has its own kind", |s| *s != MGMT_SUBTYPE_MULTIHOP_ACTION),
        ttl in any::<u8>(),
        mesh_seq in any::<u32>(),
        ext in proptest::collection::vec(mac(), 0..=3),
    ) -> BufferDescriptor {
        BufferDescriptor {
            buff_ptr: 0,
            da: Some(addrs[0]),
            sa: Some(addrs[1]),
            bssid: Some(addrs[2]),
            ra: Some(addrs[3]),
            ta: Some(addrs[4]),
            payload,
            mgmt_subtype: mgmt,
            mesh_header: MeshHeader::new(ttl, mesh_seq, ext).unwrap(),
        }
    }
}

pub fn flags() -> impl Strategy<Value = FcFlags> {
    any::<[bool; 6]>().prop_map(|b| FcFlags {
        to_ds: b[0],
        from_ds: b[1],
        more_fragments: false,
        retry: b[2],
        power_mgmt: b[3],
        more_data: b[4],
        wep: false,
        order: b[5],
    })
}

pub fn frame_of(kind: FrameKind) -> impl Strategy<Value = Frame> {
    (buffer(), any::<u16>(), 0u16..4096, flags()).prop_map(move |(buf, nav, seq, flags)| {
        let state = SequenceState::default().with_counter(seq);
        build_frame(kind, &buf, StationRole::MeshPoint, NavRegister(nav), state, flags).unwrap().into_frame()
    })
}

pub fn any_frame() -> impl Strategy<Value = Frame> {
    proptest::sample::select(FrameKind::ENCODABLE.to_vec()).prop_flat_map(frame_of)
}
