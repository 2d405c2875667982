//! Byte-level frame encoding and decoding, the hex dump format, and the
//! transmit serializer (field multiplexer feeding a 32-bit shift register
//! that drives TX_LINE).
//!
//! Multi-byte fields are little-endian, addresses go out in octet order,
//! and bits leave the shift register least-significant first.

use std::fmt::Write as _;

use thiserror::Error;

use crate::builder::compute_fcs;
use crate::frame::{mesh_header_length, FieldLayout, Frame, FrameControlField, FrameError, MacAddress, MeshHeader};

/// Smallest encodable frame (CTS / ACK).
pub const MIN_FRAME_LEN: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("frame invariant violated: {0}")]
    InvariantViolation(String),
    #[error("{len} bytes is too short, need at least {need}")]
    TooShort { len: usize, need: usize },
    #[error("frame check sequence mismatch: computed {computed:#010x}, carried {carried:#010x}")]
    BadFcs { computed: u32, carried: u32 },
    #[error("unknown frame type {frame_type:02b} subtype {subtype:04b}")]
    UnknownSubtype { frame_type: u8, subtype: u8 },
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("invalid hex input: {0}")]
    BadHex(String),
    #[error("mux select {0} is reserved")]
    ReservedSelect(u8),
    #[error("invalid shift register word: {0}")]
    BadWord(String),
}

impl From<FrameError> for CodecError {
    fn from(e: FrameError) -> Self {
        CodecError::InvariantViolation(e.to_string())
    }
}

fn put_mesh_header(out: &mut Vec<u8>, mh: &MeshHeader) {
    out.push(mh.flags);
    out.push(mh.ttl);
    out.extend_from_slice(&mh.mesh_seq.to_le_bytes());
    for a in &mh.addr_ext {
        out.extend_from_slice(&a.0);
    }
}

/// Header and body bytes in wire order, without the check sequence and
/// without structural validation.
pub fn contents(f: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + f.body.len());
    out.extend_from_slice(&f.fch.pack().to_le_bytes());
    out.extend_from_slice(&f.did.to_le_bytes());
    for a in [f.addr1, f.addr2, f.addr3].into_iter().flatten() {
        out.extend_from_slice(&a.0);
    }
    if let Some(sc) = f.seq_ctl {
        out.extend_from_slice(&sc.to_le_bytes());
    }
    if let Some(a4) = f.addr4 {
        out.extend_from_slice(&a4.0);
    }
    if let Some(mh) = &f.mesh_header {
        put_mesh_header(&mut out, mh);
    }
    out.extend_from_slice(&f.body);
    out
}

/// Recomputes and stores the frame's check sequence.
pub fn seal(f: &mut Frame) {
    f.fcs = compute_fcs(&contents(f));
}

pub fn encode(f: &Frame) -> Result<Vec<u8>, CodecError> {
    f.validate()?;
    let mut out = contents(f);
    let computed = compute_fcs(&out);
    if computed != f.fcs {
        return Err(CodecError::InvariantViolation(format!(
            "stored fcs {:#010x} does not cover the frame contents ({computed:#010x})",
            f.fcs
        )));
    }
    out.extend_from_slice(&f.fcs.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take(2).try_into().unwrap())
    }

    fn mac(&mut self) -> MacAddress {
        MacAddress(self.take(6).try_into().unwrap())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Frame, CodecError> {
    if bytes.len() < MIN_FRAME_LEN {
        return Err(CodecError::TooShort { len: bytes.len(), need: MIN_FRAME_LEN });
    }
    // The check sequence is verified before anything else is interpreted,
    // so any corruption surfaces as BadFcs rather than a parse error.
    let (covered, trailer) = bytes.split_at(bytes.len() - 4);
    let carried = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = compute_fcs(covered);
    if computed != carried {
        return Err(CodecError::BadFcs { computed, carried });
    }

    let mut r = Reader { bytes: covered, pos: 0 };
    let fch = FrameControlField::unpack(r.u16());
    let kind = fch.kind().ok_or(CodecError::UnknownSubtype { frame_type: fch.frame_type, subtype: fch.subtype })?;
    if fch.protocol_version != 0 {
        return Err(CodecError::Malformed(format!("protocol version {}", fch.protocol_version)));
    }
    let layout = FieldLayout::of(kind)?;
    let mut need = layout.fixed_len();
    if layout.mesh_header {
        need += 6;
    }
    if bytes.len() < need {
        return Err(CodecError::TooShort { len: bytes.len(), need });
    }
    if !layout.body && bytes.len() != need {
        return Err(CodecError::Malformed(format!("{kind} frame is {} bytes, expected {need}", bytes.len())));
    }

    let did = r.u16();
    let mut addrs = [None; 4];
    for slot in addrs.iter_mut().take(layout.addresses.min(3)) {
        *slot = Some(r.mac());
    }
    let seq_ctl = layout.seq_ctl.then(|| r.u16());
    if layout.addresses == 4 {
        addrs[3] = Some(r.mac());
    }
    let mesh_header = if layout.mesh_header {
        let flags = covered[r.pos];
        if flags & !0b11 != 0 {
            return Err(CodecError::Malformed(format!("mesh flags {flags:#04x} set reserved bits")));
        }
        let len = mesh_header_length(flags);
        if covered.len() < r.pos + len {
            return Err(CodecError::TooShort { len: bytes.len(), need: need - 6 + len });
        }
        let raw = r.take(len);
        let mesh_seq = u32::from_le_bytes(raw[2..6].try_into().unwrap());
        let addr_ext = raw[6..].chunks(6).map(|c| MacAddress(c.try_into().unwrap())).collect();
        Some(MeshHeader { flags, ttl: raw[1], mesh_seq, addr_ext })
    } else {
        None
    };
    let body = covered[r.pos..].to_vec();

    Ok(Frame {
        fch,
        did,
        addr1: addrs[0],
        addr2: addrs[1],
        addr3: addrs[2],
        addr4: addrs[3],
        seq_ctl,
        mesh_header,
        body,
        fcs: carried,
    })
}

/// Lowercase, space-separated hex bytes.
pub fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Parses hex bytes; whitespace between digits is ignored.
pub fn from_hex(text: &str) -> Result<Vec<u8>, CodecError> {
    let digits: Vec<u8> = text.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
    if !digits.len().is_multiple_of(2) {
        return Err(CodecError::BadHex("odd number of hex digits".into()));
    }
    digits
        .chunks(2)
        .map(|pair| {
            let s = std::str::from_utf8(pair).map_err(|_| CodecError::BadHex("non-ascii input".into()))?;
            u8::from_str_radix(s, 16).map_err(|_| CodecError::BadHex(format!("{s:?} is not a hex byte")))
        })
        .collect()
}

/// Multiplexer select line (4 bits). Values 9..=15 are reserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MuxSelect {
    Fch = 0,
    Did = 1,
    Addr1 = 2,
    Addr2 = 3,
    Addr3 = 4,
    Addr4 = 5,
    Fcs = 6,
    Data = 7,
    SeqCtl = 8,
}

impl TryFrom<u8> for MuxSelect {
    type Error = CodecError;

    fn try_from(sel: u8) -> Result<Self, Self::Error> {
        use MuxSelect::*;
        Ok(match sel {
            0 => Fch,
            1 => Did,
            2 => Addr1,
            3 => Addr2,
            4 => Addr3,
            5 => Addr4,
            6 => Fcs,
            7 => Data,
            8 => SeqCtl,
            _ => return Err(CodecError::ReservedSelect(sel)),
        })
    }
}

/// One load of the 32-bit shift register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxWord {
    bits: u32,
    valid_bits: u8,
}

impl TxWord {
    pub fn new(bits: u32, valid_bits: u8) -> Result<Self, CodecError> {
        if !(1..=32).contains(&valid_bits) {
            return Err(CodecError::BadWord(format!("{valid_bits} valid bits")));
        }
        if valid_bits < 32 && bits >> valid_bits != 0 {
            return Err(CodecError::BadWord(format!("{bits:#x} has bits above {valid_bits}")));
        }
        Ok(TxWord { bits, valid_bits })
    }

    /// Loads up to four bytes, first byte in the low-order position.
    pub fn load(chunk: &[u8]) -> Result<Self, CodecError> {
        if chunk.is_empty() || chunk.len() > 4 {
            return Err(CodecError::BadWord(format!("{}-byte load", chunk.len())));
        }
        let mut le = [0u8; 4];
        le[..chunk.len()].copy_from_slice(chunk);
        TxWord::new(u32::from_le_bytes(le), (chunk.len() * 8) as u8)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn valid_bits(&self) -> u8 {
        self.valid_bits
    }

    /// Shifts the register out, least-significant bit first.
    pub fn shift_out(self) -> impl Iterator<Item = bool> {
        (0..self.valid_bits).map(move |i| self.bits >> i & 1 == 1)
    }
}

/// Bits in the order they appear on TX_LINE.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitstream {
    bits: Vec<bool>,
}

impl Bitstream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Regroups the bits into bytes, LSB first. `None` unless the length is
    /// a whole number of bytes.
    pub fn to_bytes(&self) -> Option<Vec<u8>> {
        if !self.bits.len().is_multiple_of(8) {
            return None;
        }
        Some(
            self.bits
                .chunks(8)
                .map(|byte| byte.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b as u8) << i))
                .collect(),
        )
    }
}

impl FromIterator<bool> for Bitstream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bitstream { bits: iter.into_iter().collect() }
    }
}

/// Mux inputs in transmission order with the bytes each one presents.
/// The mesh header travels on the DATA input ahead of the body.
pub fn mux_plan(f: &Frame) -> Result<Vec<(MuxSelect, Vec<u8>)>, CodecError> {
    let wire = encode(f)?;
    let mut plan =
        vec![(MuxSelect::Fch, f.fch.pack().to_le_bytes().to_vec()), (MuxSelect::Did, f.did.to_le_bytes().to_vec())];
    for (sel, addr) in [(MuxSelect::Addr1, f.addr1), (MuxSelect::Addr2, f.addr2), (MuxSelect::Addr3, f.addr3)] {
        if let Some(a) = addr {
            plan.push((sel, a.0.to_vec()));
        }
    }
    if let Some(sc) = f.seq_ctl {
        plan.push((MuxSelect::SeqCtl, sc.to_le_bytes().to_vec()));
    }
    if let Some(a4) = f.addr4 {
        plan.push((MuxSelect::Addr4, a4.0.to_vec()));
    }
    let mut data = Vec::new();
    if let Some(mh) = &f.mesh_header {
        put_mesh_header(&mut data, mh);
    }
    data.extend_from_slice(&f.body);
    if !data.is_empty() {
        plan.push((MuxSelect::Data, data));
    }
    plan.push((MuxSelect::Fcs, f.fcs.to_le_bytes().to_vec()));
    debug_assert_eq!(plan.iter().map(|(_, b)| b.len()).sum::<usize>(), wire.len());
    Ok(plan)
}

/// Sequence of (select, word) loads presented to the shift register.
pub fn register_loads(f: &Frame) -> Result<Vec<(MuxSelect, TxWord)>, CodecError> {
    let mut loads = Vec::new();
    for (sel, bytes) in mux_plan(f)? {
        for chunk in bytes.chunks(4) {
            loads.push((sel, TxWord::load(chunk)?));
        }
    }
    Ok(loads)
}

pub fn serialize_tx(f: &Frame) -> Result<Bitstream, CodecError> {
    Ok(register_loads(f)?.into_iter().flat_map(|(_, w)| w.shift_out()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_frame, BufferDescriptor, NavRegister, SequenceState, StationRole};
    use crate::frame::{FcFlags, FrameKind};

    fn mac(b: u8) -> MacAddress {
        MacAddress([b; 6])
    }

    fn frame(kind: FrameKind, payload: Vec<u8>) -> Frame {
        let buf = BufferDescriptor {
            ra: Some(mac(1)),
            ta: Some(mac(2)),
            da: Some(mac(3)),
            sa: Some(mac(4)),
            bssid: Some(mac(5)),
            payload,
            ..BufferDescriptor::default()
        };
        build_frame(kind, &buf, StationRole::MeshPoint, NavRegister(300), SequenceState::default(), FcFlags::default())
            .unwrap()
            .into_frame()
    }

    #[test]
    fn control_frame_sizes() {
        assert_eq!(encode(&frame(FrameKind::Ack, vec![])).unwrap().len(), 14);
        assert_eq!(encode(&frame(FrameKind::Cts, vec![])).unwrap().len(), 14);
        assert_eq!(encode(&frame(FrameKind::PsPoll, vec![])).unwrap().len(), 14);
        assert_eq!(encode(&frame(FrameKind::Rts, vec![])).unwrap().len(), 20);
        assert_eq!(encode(&frame(FrameKind::CfpEnd, vec![])).unwrap().len(), 20);
    }

    #[test]
    fn data_frame_size_matches_field_table() {
        // FC, DID, A1, A2, A3, SeqCtl, A4, mesh header (AE=0), FCS
        let widths = [2, 2, 6, 6, 6, 2, 6, 6, 4];
        let expected: usize = widths.iter().sum();
        assert_eq!(expected, 40);
        assert_eq!(encode(&frame(FrameKind::Data, vec![])).unwrap().len(), expected);
        assert_eq!(encode(&frame(FrameKind::Data, vec![0; 10])).unwrap().len(), expected + 10);
    }

    #[test]
    fn decode_roundtrip_each_kind() {
        for kind in FrameKind::ENCODABLE {
            let f = frame(kind, vec![9, 8, 7]);
            let bytes = encode(&f).unwrap();
            assert_eq!(decode(&bytes).unwrap(), f, "{kind}");
        }
    }

    #[test]
    fn short_input() {
        assert_eq!(decode(&[1, 2, 3]), Err(CodecError::TooShort { len: 3, need: MIN_FRAME_LEN }));
    }

    #[test]
    fn every_single_bit_flip_is_caught() {
        let f = frame(FrameKind::Data, b"fixture payload".to_vec());
        let bytes = encode(&f).unwrap();
        for bit in 0..bytes.len() * 8 {
            let mut corrupt = bytes.clone();
            corrupt[bit / 8] ^= 1 << (bit % 8);
            assert!(matches!(decode(&corrupt), Err(CodecError::BadFcs { .. })), "bit {bit}");
        }
    }

    #[test]
    fn trailing_bytes_on_control_frame() {
        let f = frame(FrameKind::Ack, vec![]);
        let mut c = contents(&f);
        c.push(0);
        let fcs = compute_fcs(&c);
        c.extend_from_slice(&fcs.to_le_bytes());
        assert!(matches!(decode(&c), Err(CodecError::Malformed(_))));
    }

    #[test]
    fn unknown_wire_subtype() {
        let mut c = vec![0b0000_0100, 0, 0, 0];
        c.extend_from_slice(&[1; 6]);
        let fcs = compute_fcs(&c);
        c.extend_from_slice(&fcs.to_le_bytes());
        assert_eq!(decode(&c), Err(CodecError::UnknownSubtype { frame_type: 1, subtype: 0 }));
    }

    #[test]
    fn encode_rejects_bad_shapes() {
        let mut f = frame(FrameKind::Ack, vec![]);
        f.addr2 = Some(mac(2));
        assert!(matches!(encode(&f), Err(CodecError::InvariantViolation(_))));
        let mut f = frame(FrameKind::Ack, vec![]);
        f.fcs ^= 1;
        assert!(matches!(encode(&f), Err(CodecError::InvariantViolation(_))));
    }

    #[test]
    fn hex_format() {
        assert_eq!(to_hex(&[0x0a, 0xff, 0x00]), "0a ff 00");
        assert_eq!(from_hex("0a ff 00").unwrap(), vec![0x0a, 0xff, 0x00]);
        assert_eq!(from_hex("0AFF\n00").unwrap(), vec![0x0a, 0xff, 0x00]);
        assert!(from_hex("0a f").is_err());
        assert!(from_hex("zz").is_err());
        assert_eq!(from_hex("").unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn mux_select_reserved_values() {
        for sel in 0..=8u8 {
            assert_eq!(MuxSelect::try_from(sel).unwrap() as u8, sel);
        }
        for sel in 9..=15u8 {
            assert_eq!(MuxSelect::try_from(sel), Err(CodecError::ReservedSelect(sel)));
        }
    }

    #[test]
    fn tx_word_invariants() {
        assert!(TxWord::new(0, 0).is_err());
        assert!(TxWord::new(0, 33).is_err());
        assert!(TxWord::new(0x100, 8).is_err());
        assert!(TxWord::new(u32::MAX, 32).is_ok());
        let w = TxWord::load(&[0b0000_0101]).unwrap();
        assert_eq!(w.shift_out().collect::<Vec<_>>(), vec![true, false, true, false, false, false, false, false]);
    }

    #[test]
    fn ack_bitstream() {
        let f = frame(FrameKind::Ack, vec![]);
        let bits = serialize_tx(&f).unwrap();
        assert_eq!(bits.len(), 112);
        assert_eq!(bits.to_bytes().unwrap(), encode(&f).unwrap());
    }

    #[test]
    fn mux_order_puts_fcs_last() {
        let f = frame(FrameKind::Data, vec![1, 2]);
        let order: Vec<MuxSelect> = mux_plan(&f).unwrap().into_iter().map(|(s, _)| s).collect();
        use MuxSelect::*;
        assert_eq!(order, vec![Fch, Did, Addr1, Addr2, Addr3, SeqCtl, Addr4, Data, Fcs]);
    }
}
