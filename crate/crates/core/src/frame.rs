//! Frame vocabulary shared by every other module: frame kinds, the 6-bit
//! subtype codes the transmission controller speaks, the frame control
//! field, the mesh header, and the `Frame` value itself.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("{0:?} is reserved and has no wire format")]
    ReservedKind(FrameKind),
    #[error("{0:?} has no transmitter subtype code")]
    NoSubtypeCode(FrameKind),
    #[error("unknown subtype code {0}")]
    UnknownSubtype(SubtypeCode),
    #[error("subtype code {0:#x} does not fit in 6 bits")]
    CodeOutOfRange(u8),
    #[error("invalid subtype code literal {0:?}")]
    BadCodeLiteral(String),
    #[error("invalid MAC address {0:?}")]
    BadMacAddress(String),
    #[error("mesh header carries {0} extension addresses, at most 3 allowed")]
    TooManyExtensionAddresses(usize),
    #[error("frame invariant violated: {0}")]
    Invariant(String),
}

/// Every frame kind the transmitter knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    Data,
    Ack,
    Cts,
    Rts,
    PsPoll,
    CfpEnd,
    MgmtGeneric,
    MgmtMultihopAction,
    /// Request-to-switch; named by 802.11s but without a defined format.
    Rtx,
    /// Clear-to-switch; see `Rtx`.
    Ctx,
}

/// 2-bit frame type values of the frame control field.
pub const TYPE_MANAGEMENT: u8 = 0b00;
pub const TYPE_CONTROL: u8 = 0b01;
pub const TYPE_DATA: u8 = 0b10;

pub const MGMT_SUBTYPE_PROBE_REQUEST: u8 = 0b0100;
pub const MGMT_SUBTYPE_ACTION: u8 = 0b1101;
pub const MGMT_SUBTYPE_MULTIHOP_ACTION: u8 = 0b1111;

impl FrameKind {
    pub const ALL: [FrameKind; 10] = [
        FrameKind::Data,
        FrameKind::Ack,
        FrameKind::Cts,
        FrameKind::Rts,
        FrameKind::PsPoll,
        FrameKind::CfpEnd,
        FrameKind::MgmtGeneric,
        FrameKind::MgmtMultihopAction,
        FrameKind::Rtx,
        FrameKind::Ctx,
    ];

    /// Kinds that carry a transmitter subtype code.
    pub const CODED: [FrameKind; 6] =
        [FrameKind::Ack, FrameKind::Data, FrameKind::Cts, FrameKind::Rts, FrameKind::PsPoll, FrameKind::CfpEnd];

    /// Kinds with a wire format.
    pub const ENCODABLE: [FrameKind; 8] = [
        FrameKind::Data,
        FrameKind::Ack,
        FrameKind::Cts,
        FrameKind::Rts,
        FrameKind::PsPoll,
        FrameKind::CfpEnd,
        FrameKind::MgmtGeneric,
        FrameKind::MgmtMultihopAction,
    ];

    pub fn is_reserved(self) -> bool {
        matches!(self, FrameKind::Rtx | FrameKind::Ctx)
    }

    pub fn is_control(self) -> bool {
        matches!(
            self,
            FrameKind::Ack
                | FrameKind::Cts
                | FrameKind::Rts
                | FrameKind::PsPoll
                | FrameKind::CfpEnd
                | FrameKind::Rtx
                | FrameKind::Ctx
        )
    }

    pub fn is_management(self) -> bool {
        matches!(self, FrameKind::MgmtGeneric | FrameKind::MgmtMultihopAction)
    }

    /// (type, subtype) pair written into the frame control field.
    ///
    /// `MgmtGeneric` stands for every management subtype other than
    /// Multihop Action; this returns Action as its default subtype.
    pub fn wire_type(self) -> Result<(u8, u8), FrameError> {
        Ok(match self {
            FrameKind::Data => (TYPE_DATA, 0b0000),
            FrameKind::PsPoll => (TYPE_CONTROL, 0b1010),
            FrameKind::Rts => (TYPE_CONTROL, 0b1011),
            FrameKind::Cts => (TYPE_CONTROL, 0b1100),
            FrameKind::Ack => (TYPE_CONTROL, 0b1101),
            FrameKind::CfpEnd => (TYPE_CONTROL, 0b1110),
            FrameKind::MgmtGeneric => (TYPE_MANAGEMENT, MGMT_SUBTYPE_ACTION),
            FrameKind::MgmtMultihopAction => (TYPE_MANAGEMENT, MGMT_SUBTYPE_MULTIHOP_ACTION),
            FrameKind::Rtx | FrameKind::Ctx => return Err(FrameError::ReservedKind(self)),
        })
    }

    /// Inverse of [`FrameKind::wire_type`]; `None` for pairs with no kind.
    pub fn from_wire(frame_type: u8, subtype: u8) -> Option<FrameKind> {
        match (frame_type, subtype) {
            (TYPE_DATA, 0b0000) => Some(FrameKind::Data),
            (TYPE_CONTROL, 0b1010) => Some(FrameKind::PsPoll),
            (TYPE_CONTROL, 0b1011) => Some(FrameKind::Rts),
            (TYPE_CONTROL, 0b1100) => Some(FrameKind::Cts),
            (TYPE_CONTROL, 0b1101) => Some(FrameKind::Ack),
            (TYPE_CONTROL, 0b1110) => Some(FrameKind::CfpEnd),
            (TYPE_MANAGEMENT, MGMT_SUBTYPE_MULTIHOP_ACTION) => Some(FrameKind::MgmtMultihopAction),
            (TYPE_MANAGEMENT, s) if s < 16 => Some(FrameKind::MgmtGeneric),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Data => "data",
            FrameKind::Ack => "ack",
            FrameKind::Cts => "cts",
            FrameKind::Rts => "rts",
            FrameKind::PsPoll => "ps-poll",
            FrameKind::CfpEnd => "cfp-end",
            FrameKind::MgmtGeneric => "mgmt",
            FrameKind::MgmtMultihopAction => "mgmt-multihop-action",
            FrameKind::Rtx => "rtx",
            FrameKind::Ctx => "ctx",
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrameKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        FrameKind::ALL
            .into_iter()
            .find(|k| k.name() == lower || (lower == "pspoll" && *k == FrameKind::PsPoll))
            .ok_or_else(|| format!("unknown frame kind {s:?}"))
    }
}

/// A 6-bit transmitter subtype code, printed most-significant bit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubtypeCode(u8);

impl SubtypeCode {
    pub const fn new(code: u8) -> Result<Self, FrameError> {
        if code < 64 {
            Ok(SubtypeCode(code))
        } else {
            Err(FrameError::CodeOutOfRange(code))
        }
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    /// Parses a literal such as `"101011"`.
    pub fn from_bits(bits: &str) -> Result<Self, FrameError> {
        if bits.len() != 6 || !bits.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(FrameError::BadCodeLiteral(bits.to_string()));
        }
        let v = u8::from_str_radix(bits, 2).map_err(|_| FrameError::BadCodeLiteral(bits.into()))?;
        SubtypeCode::new(v)
    }
}

impl fmt::Display for SubtypeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06b}", self.0)
    }
}

impl Serialize for SubtypeCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SubtypeCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SubtypeCode::from_bits(&s).map_err(serde::de::Error::custom)
    }
}

/// Lookup between coded frame kinds and their subtype codes.
///
/// The controller and the conformance suite take a table rather than the
/// constants directly so that a deliberately corrupted table can be run
/// through the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubtypeTable {
    entries: [(FrameKind, SubtypeCode); 6],
}

impl SubtypeTable {
    // Data, Ack, Rts and PsPoll coincide with the type/subtype bits of the
    // frame control field read LSB first; Cts and CfpEnd do not.
    pub const STANDARD: SubtypeTable = SubtypeTable {
        entries: [
            (FrameKind::Ack, SubtypeCode(0b101011)),
            (FrameKind::Data, SubtypeCode(0b010000)),
            (FrameKind::Cts, SubtypeCode(0b010011)),
            (FrameKind::Rts, SubtypeCode(0b101101)),
            (FrameKind::PsPoll, SubtypeCode(0b100101)),
            (FrameKind::CfpEnd, SubtypeCode(0b010110)),
        ],
    };

    /// Returns a copy with `kind` mapped to `code`.
    pub fn with_entry(mut self, kind: FrameKind, code: SubtypeCode) -> Result<Self, FrameError> {
        let slot = self.entries.iter_mut().find(|(k, _)| *k == kind).ok_or(FrameError::NoSubtypeCode(kind))?;
        slot.1 = code;
        Ok(self)
    }

    pub fn entries(&self) -> &[(FrameKind, SubtypeCode)] {
        &self.entries
    }

    pub fn code(&self, kind: FrameKind) -> Result<SubtypeCode, FrameError> {
        if kind.is_reserved() {
            return Err(FrameError::ReservedKind(kind));
        }
        self.entries.iter().find(|(k, _)| *k == kind).map(|(_, c)| *c).ok_or(FrameError::NoSubtypeCode(kind))
    }

    pub fn classify(&self, code: SubtypeCode) -> Result<FrameKind, FrameError> {
        self.entries.iter().find(|(_, c)| *c == code).map(|(k, _)| *k).ok_or(FrameError::UnknownSubtype(code))
    }
}

impl Default for SubtypeTable {
    fn default() -> Self {
        SubtypeTable::STANDARD
    }
}

/// Subtype code for `kind` from the standard table.
pub fn subtype_code(kind: FrameKind) -> Result<SubtypeCode, FrameError> {
    SubtypeTable::STANDARD.code(kind)
}

/// Frame kind for `code` from the standard table.
pub fn classify(code: SubtypeCode) -> Result<FrameKind, FrameError> {
    SubtypeTable::STANDARD.classify(code)
}

/// Single-bit flags of the frame control field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FcFlags {
    pub to_ds: bool,
    pub from_ds: bool,
    pub more_fragments: bool,
    pub retry: bool,
    pub power_mgmt: bool,
    pub more_data: bool,
    pub wep: bool,
    pub order: bool,
}

impl FcFlags {
    /// Flags of a four-address mesh data frame.
    pub fn mesh_data() -> Self {
        FcFlags { to_ds: true, from_ds: true, ..FcFlags::default() }
    }

    fn bits(&self) -> u8 {
        [
            self.to_ds,
            self.from_ds,
            self.more_fragments,
            self.retry,
            self.power_mgmt,
            self.more_data,
            self.wep,
            self.order,
        ]
        .iter()
        .enumerate()
        .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i))
    }

    fn from_bits(bits: u8) -> Self {
        let bit = |i: u8| bits & (1 << i) != 0;
        FcFlags {
            to_ds: bit(0),
            from_ds: bit(1),
            more_fragments: bit(2),
            retry: bit(3),
            power_mgmt: bit(4),
            more_data: bit(5),
            wep: bit(6),
            order: bit(7),
        }
    }
}

/// The 16-bit frame control field.
///
/// Packed layout, bit 0 first: version (2), type (2), subtype (4), then
/// to_ds, from_ds, more_fragments, retry, power_mgmt, more_data, wep, order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameControlField {
    pub protocol_version: u8,
    pub frame_type: u8,
    pub subtype: u8,
    pub flags: FcFlags,
}

impl FrameControlField {
    pub fn new(frame_type: u8, subtype: u8, flags: FcFlags) -> Self {
        FrameControlField { protocol_version: 0, frame_type: frame_type & 0b11, subtype: subtype & 0xF, flags }
    }

    pub fn pack(&self) -> u16 {
        u16::from(self.protocol_version & 0b11)
            | u16::from(self.frame_type & 0b11) << 2
            | u16::from(self.subtype & 0xF) << 4
            | u16::from(self.flags.bits()) << 8
    }

    pub fn unpack(word: u16) -> Self {
        FrameControlField {
            protocol_version: (word & 0b11) as u8,
            frame_type: ((word >> 2) & 0b11) as u8,
            subtype: ((word >> 4) & 0xF) as u8,
            flags: FcFlags::from_bits((word >> 8) as u8),
        }
    }

    pub fn kind(&self) -> Option<FrameKind> {
        FrameKind::from_wire(self.frame_type, self.subtype)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddress(pub [u8; 6]);

impl MacAddress {
    pub const ZERO: MacAddress = MacAddress([0; 6]);
    /// All-ones wildcard / broadcast address.
    pub const WILDCARD: MacAddress = MacAddress([0xFF; 6]);

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(f, "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", o[0], o[1], o[2], o[3], o[4], o[5])
    }
}

impl fmt::Debug for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacAddress({self})")
    }
}

impl FromStr for MacAddress {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FrameError::BadMacAddress(s.to_string());
        let parts: Vec<&str> = s.split([':', '-']).collect();
        if parts.len() != 6 {
            return Err(bad());
        }
        let mut out = [0u8; 6];
        for (slot, part) in out.iter_mut().zip(parts) {
            if part.len() != 2 {
                return Err(bad());
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| bad())?;
        }
        Ok(MacAddress(out))
    }
}

impl Serialize for MacAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Packed mesh header length for a mesh flags byte.
pub fn mesh_header_length(flags: u8) -> usize {
    6 + 6 * usize::from(flags & 0b11)
}

/// Mesh header carried at the front of a mesh data frame body.
///
/// Only the low two bits of `flags` (address extension mode) are defined;
/// the rest are reserved and zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshHeader {
    pub flags: u8,
    pub ttl: u8,
    pub mesh_seq: u32,
    pub addr_ext: Vec<MacAddress>,
}

pub const DEFAULT_MESH_TTL: u8 = 31;

impl MeshHeader {
    pub fn new(ttl: u8, mesh_seq: u32, addr_ext: Vec<MacAddress>) -> Result<Self, FrameError> {
        if addr_ext.len() > 3 {
            return Err(FrameError::TooManyExtensionAddresses(addr_ext.len()));
        }
        Ok(MeshHeader { flags: addr_ext.len() as u8, ttl, mesh_seq, addr_ext })
    }

    /// Address extension mode.
    pub fn ae(&self) -> u8 {
        self.flags & 0b11
    }

    pub fn packed_len(&self) -> usize {
        mesh_header_length(self.flags)
    }

    /// Decrements the TTL; returns false (leaving it at zero) once exhausted.
    pub fn decrement_ttl(&mut self) -> bool {
        match self.ttl.checked_sub(1) {
            Some(t) => {
                self.ttl = t;
                true
            }
            None => false,
        }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if self.flags & !0b11 != 0 {
            return Err(FrameError::Invariant(format!("mesh flags {:#04x} set reserved bits", self.flags)));
        }
        if usize::from(self.ae()) != self.addr_ext.len() {
            return Err(FrameError::Invariant(format!(
                "address extension mode {} but {} extension addresses",
                self.ae(),
                self.addr_ext.len()
            )));
        }
        Ok(())
    }
}

impl Default for MeshHeader {
    fn default() -> Self {
        MeshHeader { flags: 0, ttl: DEFAULT_MESH_TTL, mesh_seq: 0, addr_ext: Vec::new() }
    }
}

/// Which optional fields a frame kind carries on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldLayout {
    /// Number of leading address fields (addr1..addrN), 1 to 4.
    pub addresses: usize,
    pub seq_ctl: bool,
    pub mesh_header: bool,
    pub body: bool,
}

impl FieldLayout {
    pub fn of(kind: FrameKind) -> Result<FieldLayout, FrameError> {
        let l = |addresses, seq_ctl, mesh_header, body| FieldLayout { addresses, seq_ctl, mesh_header, body };
        Ok(match kind {
            FrameKind::Data => l(4, true, true, true),
            FrameKind::MgmtGeneric | FrameKind::MgmtMultihopAction => l(3, true, false, true),
            FrameKind::Rts | FrameKind::CfpEnd => l(2, false, false, false),
            FrameKind::Cts | FrameKind::Ack | FrameKind::PsPoll => l(1, false, false, false),
            FrameKind::Rtx | FrameKind::Ctx => return Err(FrameError::ReservedKind(kind)),
        })
    }

    /// Encoded size excluding mesh header and body.
    pub fn fixed_len(&self) -> usize {
        2 + 2 + 6 * self.addresses + if self.seq_ctl { 2 } else { 0 } + 4
    }
}

/// A MAC frame. Which optional fields are present depends on the kind
/// named by `fch`; see [`FieldLayout`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub fch: FrameControlField,
    pub did: u16,
    pub addr1: Option<MacAddress>,
    pub addr2: Option<MacAddress>,
    pub addr3: Option<MacAddress>,
    pub addr4: Option<MacAddress>,
    pub seq_ctl: Option<u16>,
    pub mesh_header: Option<MeshHeader>,
    pub body: Vec<u8>,
    pub fcs: u32,
}

impl Frame {
    pub fn kind(&self) -> Option<FrameKind> {
        self.fch.kind()
    }

    pub fn addresses(&self) -> [Option<MacAddress>; 4] {
        [self.addr1, self.addr2, self.addr3, self.addr4]
    }

    /// Checks presence of fields against the kind's layout.
    pub fn validate(&self) -> Result<FieldLayout, FrameError> {
        let kind = self.kind().ok_or_else(|| {
            FrameError::Invariant(format!(
                "type {:02b} subtype {:04b} names no frame kind",
                self.fch.frame_type, self.fch.subtype
            ))
        })?;
        if self.fch.protocol_version != 0 {
            return Err(FrameError::Invariant("protocol version must be 0".into()));
        }
        let layout = FieldLayout::of(kind)?;
        for (i, addr) in self.addresses().iter().enumerate() {
            let expected = i < layout.addresses;
            if addr.is_some() != expected {
                return Err(FrameError::Invariant(format!(
                    "{kind} frame must {}carry addr{}",
                    if expected { "" } else { "not " },
                    i + 1
                )));
            }
        }
        if self.seq_ctl.is_some() != layout.seq_ctl {
            return Err(FrameError::Invariant(format!("sequence control presence wrong for {kind}")));
        }
        match (&self.mesh_header, layout.mesh_header) {
            (Some(mh), true) => mh.validate()?,
            (None, false) => {}
            _ => return Err(FrameError::Invariant(format!("mesh header presence wrong for {kind}"))),
        }
        if !layout.body && !self.body.is_empty() {
            return Err(FrameError::Invariant(format!("{kind} frames carry no body")));
        }
        Ok(layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_subtype_codes() {
        assert_eq!(subtype_code(FrameKind::Ack).unwrap().to_string(), "101011");
        assert_eq!(subtype_code(FrameKind::Data).unwrap().to_string(), "010000");
        assert_eq!(subtype_code(FrameKind::Rts).unwrap().to_string(), "101101");
        assert_eq!(classify(SubtypeCode::from_bits("010011").unwrap()), Ok(FrameKind::Cts));
        assert_eq!(classify(SubtypeCode::from_bits("100101").unwrap()), Ok(FrameKind::PsPoll));
        assert_eq!(classify(SubtypeCode::from_bits("010110").unwrap()), Ok(FrameKind::CfpEnd));
    }

    #[test]
    fn classify_unknown() {
        let code = SubtypeCode::from_bits("111111").unwrap();
        assert_eq!(classify(code), Err(FrameError::UnknownSubtype(code)));
    }

    #[test]
    fn reserved_and_uncoded_kinds() {
        assert_eq!(subtype_code(FrameKind::Rtx), Err(FrameError::ReservedKind(FrameKind::Rtx)));
        assert_eq!(subtype_code(FrameKind::Ctx), Err(FrameError::ReservedKind(FrameKind::Ctx)));
        assert_eq!(subtype_code(FrameKind::MgmtGeneric), Err(FrameError::NoSubtypeCode(FrameKind::MgmtGeneric)));
        assert!(FrameKind::Rtx.wire_type().is_err());
    }

    #[test]
    fn code_range() {
        assert!(SubtypeCode::new(63).is_ok());
        assert_eq!(SubtypeCode::new(64), Err(FrameError::CodeOutOfRange(64)));
        assert!(SubtypeCode::from_bits("10101").is_err());
        assert!(SubtypeCode::from_bits("10102x").is_err());
    }

    #[test]
    fn bijection_over_all_codes() {
        for v in 0..64 {
            let code = SubtypeCode::new(v).unwrap();
            if let Ok(kind) = classify(code) {
                assert_eq!(subtype_code(kind), Ok(code));
            }
        }
        for kind in FrameKind::CODED {
            assert_eq!(classify(subtype_code(kind).unwrap()), Ok(kind));
        }
    }

    #[test]
    fn fch_pack_is_16_bits_for_every_flag_combination() {
        for t in 0..4u8 {
            for s in 0..16u8 {
                for flags in 0..=255u8 {
                    let fc = FrameControlField::new(t, s, FcFlags::from_bits(flags));
                    let word = fc.pack();
                    assert_eq!(word & 0b11, 0);
                    assert_eq!(FrameControlField::unpack(word), fc);
                }
            }
        }
    }

    #[test]
    fn wire_roundtrip() {
        for kind in FrameKind::ENCODABLE {
            let (t, s) = kind.wire_type().unwrap();
            assert_eq!(FrameKind::from_wire(t, s), Some(kind));
        }
        assert_eq!(FrameKind::from_wire(TYPE_CONTROL, 0), None);
        assert_eq!(FrameKind::from_wire(0b11, 0), None);
    }

    #[test]
    fn mesh_header_lengths() {
        assert_eq!(mesh_header_length(0), 6);
        assert_eq!(mesh_header_length(1), 12);
        assert_eq!(mesh_header_length(3), 24);
        for flags in 0..=255u8 {
            assert!([6, 12, 18, 24].contains(&mesh_header_length(flags)));
        }
    }

    #[test]
    fn ttl_never_wraps() {
        let mut mh = MeshHeader::new(1, 0, vec![]).unwrap();
        assert!(mh.decrement_ttl());
        assert_eq!(mh.ttl, 0);
        assert!(!mh.decrement_ttl());
        assert_eq!(mh.ttl, 0);
    }

    #[test]
    fn mesh_header_extension_limit() {
        let a = MacAddress([1; 6]);
        assert_eq!(MeshHeader::new(5, 1, vec![a; 3]).unwrap().packed_len(), 24);
        assert_eq!(MeshHeader::new(5, 1, vec![a; 4]), Err(FrameError::TooManyExtensionAddresses(4)));
    }

    #[test]
    fn mac_parse_display() {
        let m: MacAddress = "11:22:33:44:55:66".parse().unwrap();
        assert_eq!(m.to_string(), "11:22:33:44:55:66");
        assert_eq!("ff-ff-ff-ff-ff-ff".parse::<MacAddress>().unwrap(), MacAddress::WILDCARD);
        assert!("11:22:33".parse::<MacAddress>().is_err());
        assert!("11:22:33:44:55:zz".parse::<MacAddress>().is_err());
    }

    #[test]
    fn kind_names_parse() {
        for kind in FrameKind::ALL {
            assert_eq!(kind.name().parse::<FrameKind>(), Ok(kind));
        }
    }
}
