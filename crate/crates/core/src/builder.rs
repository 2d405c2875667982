//! Frame computing: builds each header field from the frame kind, the NAV
//! register, the buffer descriptor and the sequence state, then seals the
//! frame with its CRC-32 check sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec;
use crate::frame::{
    FcFlags, Frame, FrameControlField, FrameError, FrameKind, MacAddress, MeshHeader, MGMT_SUBTYPE_MULTIHOP_ACTION,
    MGMT_SUBTYPE_PROBE_REQUEST,
};

pub const MAX_MSDU_LEN: usize = 2304;
pub const DEFAULT_FRAG_THRESHOLD: usize = 2304;
/// Smallest accepted fragmentation threshold; keeps the fragment number
/// inside its 4-bit field for any MSDU up to `MAX_MSDU_LEN`.
pub const MIN_FRAG_THRESHOLD: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("buffer descriptor lacks {0} required by a {1} frame")]
    MissingAddress(&'static str, FrameKind),
    #[error("payload of {0} bytes exceeds the {MAX_MSDU_LEN}-byte MSDU limit")]
    PayloadTooLarge(usize),
    #[error("fragmentation threshold {0} outside {MIN_FRAG_THRESHOLD}..={MAX_MSDU_LEN}")]
    InvalidThreshold(usize),
    #[error("management subtype {0:#06b} is not a generic management subtype")]
    InvalidMgmtSubtype(u8),
}

/// Remaining network allocation vector time in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NavRegister(pub u16);

impl NavRegister {
    pub fn value(self) -> u16 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// How the station participates in the network; drives the BSSID rule for
/// generic management frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationRole {
    /// An AP, or a STA associated with one.
    Associated,
    IbssMember,
    /// Mesh point sending single-hop management frames.
    #[default]
    MeshPoint,
}

/// What the buffer hands the frame builder for one MSDU or response.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferDescriptor {
    pub buff_ptr: u32,
    pub da: Option<MacAddress>,
    pub sa: Option<MacAddress>,
    pub bssid: Option<MacAddress>,
    pub ra: Option<MacAddress>,
    pub ta: Option<MacAddress>,
    pub payload: Vec<u8>,
    /// Management subtype used for `MgmtGeneric` frames.
    pub mgmt_subtype: u8,
    pub mesh_header: MeshHeader,
}

impl BufferDescriptor {
    pub fn validate(&self) -> Result<(), BuildError> {
        if self.payload.len() > MAX_MSDU_LEN {
            return Err(BuildError::PayloadTooLarge(self.payload.len()));
        }
        Ok(())
    }
}

/// Sequence and fragment counters threaded through successive builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceState {
    /// Sequence number of the most recent MSDU (12 bits).
    pub seq_counter: u16,
    /// Fragment number within the current MSDU (4 bits).
    pub frag_counter: u8,
    pub frag_threshold: usize,
}

impl SequenceState {
    pub fn new(frag_threshold: usize) -> Result<Self, BuildError> {
        if !(MIN_FRAG_THRESHOLD..=MAX_MSDU_LEN).contains(&frag_threshold) {
            return Err(BuildError::InvalidThreshold(frag_threshold));
        }
        Ok(SequenceState { seq_counter: 0, frag_counter: 0, frag_threshold })
    }

    pub fn with_counter(mut self, seq_counter: u16) -> Self {
        self.seq_counter = seq_counter & 0x0FFF;
        self
    }

    pub fn seq_ctl(&self) -> u16 {
        pack_seq_ctl(self.seq_counter, self.frag_counter)
    }
}

impl Default for SequenceState {
    fn default() -> Self {
        SequenceState { seq_counter: 0, frag_counter: 0, frag_threshold: DEFAULT_FRAG_THRESHOLD }
    }
}

pub fn pack_seq_ctl(seq: u16, frag: u8) -> u16 {
    (seq & 0x0FFF) << 4 | u16::from(frag & 0xF)
}

/// (sequence number, fragment number)
pub fn unpack_seq_ctl(seq_ctl: u16) -> (u16, u8) {
    (seq_ctl >> 4, (seq_ctl & 0xF) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceStep {
    pub seq_ctl: u16,
    pub fragment: bool,
    pub state: SequenceState,
}

pub fn fragment_count(msdu_len: usize, frag_threshold: usize) -> usize {
    msdu_len.div_ceil(frag_threshold).max(1)
}

/// Starts a new MSDU: advances the sequence number and resets the fragment
/// number. `fragment` reports whether the MSDU exceeds the threshold.
pub fn sequence_control(state: SequenceState, msdu_len: usize) -> SequenceStep {
    let next = SequenceState {
        seq_counter: (state.seq_counter + 1) % 4096,
        frag_counter: 0,
        frag_threshold: state.frag_threshold,
    };
    SequenceStep { seq_ctl: next.seq_ctl(), fragment: msdu_len > state.frag_threshold, state: next }
}

/// Advances to the next fragment of the current MSDU.
pub fn next_fragment(state: SequenceState) -> SequenceStep {
    let next = SequenceState { frag_counter: (state.frag_counter + 1) & 0xF, ..state };
    SequenceStep { seq_ctl: next.seq_ctl(), fragment: true, state: next }
}

pub fn build_fch(kind: FrameKind, flags: FcFlags) -> Result<FrameControlField, FrameError> {
    let (frame_type, subtype) = kind.wire_type()?;
    Ok(FrameControlField::new(frame_type, subtype, flags))
}

pub fn compute_did(kind: FrameKind, nav: NavRegister) -> u16 {
    match kind {
        FrameKind::PsPoll => nav.0 | 0b11,
        FrameKind::CfpEnd => 0x0001,
        _ => nav.0 & !1,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AddressSet {
    pub addr1: Option<MacAddress>,
    pub addr2: Option<MacAddress>,
    pub addr3: Option<MacAddress>,
    pub addr4: Option<MacAddress>,
}

pub fn generate_addresses(
    kind: FrameKind,
    buf: &BufferDescriptor,
    role: StationRole,
) -> Result<AddressSet, BuildError> {
    let need = |addr: Option<MacAddress>, name: &'static str| addr.ok_or(BuildError::MissingAddress(name, kind));
    let set = match kind {
        FrameKind::Data => AddressSet {
            addr1: Some(need(buf.ra, "ra")?),
            addr2: Some(need(buf.ta, "ta")?),
            addr3: Some(need(buf.da, "da")?),
            addr4: Some(need(buf.sa, "sa")?),
        },
        FrameKind::MgmtGeneric => {
            let bssid = if buf.mgmt_subtype == MGMT_SUBTYPE_PROBE_REQUEST {
                buf.bssid.unwrap_or(MacAddress::WILDCARD)
            } else {
                match role {
                    StationRole::Associated | StationRole::IbssMember => need(buf.bssid, "bssid")?,
                    StationRole::MeshPoint => MacAddress::ZERO,
                }
            };
            AddressSet {
                addr1: Some(need(buf.da, "da")?),
                addr2: Some(need(buf.sa, "sa")?),
                addr3: Some(bssid),
                addr4: None,
            }
        }
        FrameKind::MgmtMultihopAction => AddressSet {
            addr1: Some(need(buf.ra, "ra")?),
            addr2: Some(need(buf.ta, "ta")?),
            addr3: Some(need(buf.da, "da")?),
            addr4: None,
        },
        FrameKind::Rts => {
            AddressSet { addr1: Some(need(buf.ra, "ra")?), addr2: Some(need(buf.ta, "ta")?), ..AddressSet::default() }
        }
        FrameKind::CfpEnd => AddressSet {
            addr1: Some(need(buf.ra, "ra")?),
            addr2: Some(need(buf.bssid, "bssid")?),
            ..AddressSet::default()
        },
        FrameKind::Cts | FrameKind::Ack | FrameKind::PsPoll => {
            AddressSet { addr1: Some(need(buf.ra, "ra")?), ..AddressSet::default() }
        }
        FrameKind::Rtx | FrameKind::Ctx => return Err(FrameError::ReservedKind(kind).into()),
    };
    Ok(set)
}

/// IEEE 802.11 frame check sequence (reflected CRC-32, polynomial
/// 0x04C11DB7, initial value and final XOR all-ones).
pub fn compute_fcs(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

/// Result of one build: normally a single frame, or one frame per fragment
/// when the MSDU exceeds the fragmentation threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltFrame {
    pub frames: Vec<Frame>,
    pub sequence: SequenceState,
}

impl BuiltFrame {
    pub fn frame(&self) -> &Frame {
        &self.frames[0]
    }

    pub fn into_frame(mut self) -> Frame {
        self.frames.swap_remove(0)
    }

    /// Whether the FRAGMENT signal was raised.
    pub fn fragment(&self) -> bool {
        self.frames.len() > 1
    }
}

pub fn build_frame(
    kind: FrameKind,
    buf: &BufferDescriptor,
    role: StationRole,
    nav: NavRegister,
    state: SequenceState,
    flags: FcFlags,
) -> Result<BuiltFrame, BuildError> {
    buf.validate()?;
    let mut fch = build_fch(kind, flags)?;
    if kind == FrameKind::MgmtGeneric {
        if buf.mgmt_subtype > 0xF || buf.mgmt_subtype == MGMT_SUBTYPE_MULTIHOP_ACTION {
            return Err(BuildError::InvalidMgmtSubtype(buf.mgmt_subtype));
        }
        fch.subtype = buf.mgmt_subtype;
    }
    let did = compute_did(kind, nav);
    let addrs = generate_addresses(kind, buf, role)?;

    let template = Frame {
        fch,
        did,
        addr1: addrs.addr1,
        addr2: addrs.addr2,
        addr3: addrs.addr3,
        addr4: addrs.addr4,
        seq_ctl: None,
        mesh_header: None,
        body: Vec::new(),
        fcs: 0,
    };

    let (frames, sequence) = match kind {
        FrameKind::Data => {
            buf.mesh_header.validate()?;
            let step = sequence_control(state, buf.payload.len());
            let chunks: Vec<&[u8]> =
                if buf.payload.is_empty() { vec![&[]] } else { buf.payload.chunks(state.frag_threshold).collect() };
            let last = chunks.len() - 1;
            let mut seq = step;
            let mut frames = Vec::with_capacity(chunks.len());
            for (i, chunk) in chunks.into_iter().enumerate() {
                if i > 0 {
                    seq = next_fragment(seq.state);
                }
                let mut f = template.clone();
                f.fch.flags.more_fragments = flags.more_fragments || i < last;
                f.seq_ctl = Some(seq.seq_ctl);
                f.mesh_header = Some(buf.mesh_header.clone());
                f.body = chunk.to_vec();
                frames.push(f);
            }
            (frames, seq.state)
        }
        FrameKind::MgmtGeneric | FrameKind::MgmtMultihopAction => {
            let mut f = template;
            // Sequence numbers are generated for data frames only.
            f.seq_ctl = Some(0);
            f.body = buf.payload.clone();
            (vec![f], state)
        }
        _ => (vec![template], state),
    };

    let frames = frames
        .into_iter()
        .map(|mut f| {
            codec::seal(&mut f);
            f
        })
        .collect();
    Ok(BuiltFrame { frames, sequence })
}
