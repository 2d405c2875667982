//! Deterministic discrete-event medium connecting transmitter instances.
//!
//! All nodes share one channel unless a pair is listed as hidden. Airtime
//! is `bits / bitrate`, propagation is instantaneous, and two transmissions
//! whose intervals overlap are both corrupted. A transmission occupies the
//! half-open interval `[start, end)` but is sensed only after its first
//! instant, so senders that start in the same microsecond collide.
//!
//! Events are ordered by `(time, node id, insertion order)`.

use std::collections::{BTreeMap, HashSet, VecDeque};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::access::{
    AccessError, AccessMode, AccessOutcome, AllocationControl, BackoffParams, NavTimer, SlotResult, DEFAULT_CW_MAX,
    DEFAULT_CW_MIN, DEFAULT_RETRY_THRESHOLD, DEFAULT_SLOT_TIME, RNG_NAME,
};
use crate::builder::{build_frame, BufferDescriptor, NavRegister, SequenceState, StationRole, DEFAULT_FRAG_THRESHOLD};
use crate::codec::MIN_FRAME_LEN as MIN_CONTROL_LEN;
use crate::codec::{self, Bitstream};
use crate::frame::{FcFlags, FieldLayout, Frame, FrameKind, MacAddress, MeshHeader, DEFAULT_MESH_TTL};
use crate::trace::{Signal, Trace, TraceRecord, TraceValue};
use crate::txctl::{ActionSignal, StimulusEvent, TimeoutKind, TxControl, TxState};

pub const DEFAULT_BITRATE: u64 = 1_000_000;
pub const DEFAULT_SIFS: u64 = 10;
pub const DEFAULT_DIFS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumParams {
    /// Bits per second.
    pub bitrate: u64,
    pub sifs: u64,
    pub difs: u64,
    /// Overrides the default of twice SIFS plus a CTS airtime.
    pub cts_timeout: Option<u64>,
    /// Overrides the default of twice SIFS plus an ACK airtime.
    pub ack_timeout: Option<u64>,
}

impl Default for MediumParams {
    fn default() -> Self {
        MediumParams {
            bitrate: DEFAULT_BITRATE,
            sifs: DEFAULT_SIFS,
            difs: DEFAULT_DIFS,
            cts_timeout: None,
            ack_timeout: None,
        }
    }
}

impl MediumParams {
    /// Microseconds needed to send `bytes`, rounded up.
    pub fn airtime(&self, bytes: usize) -> u64 {
        (bytes as u64 * 8 * 1_000_000).div_ceil(self.bitrate)
    }

    fn bit_offset(&self, bit: usize) -> u64 {
        bit as u64 * 1_000_000 / self.bitrate
    }

    pub fn cts_timeout(&self) -> u64 {
        self.cts_timeout.unwrap_or(2 * (self.sifs + self.airtime(MIN_CONTROL_LEN)))
    }

    pub fn ack_timeout(&self) -> u64 {
        self.ack_timeout.unwrap_or(2 * (self.sifs + self.airtime(MIN_CONTROL_LEN)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccessParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub slot_time: u64,
    pub threshold: u32,
}

impl Default for AccessParams {
    fn default() -> Self {
        AccessParams {
            cw_min: DEFAULT_CW_MIN,
            cw_max: DEFAULT_CW_MAX,
            slot_time: DEFAULT_SLOT_TIME,
            threshold: DEFAULT_RETRY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficItem {
    /// Arrival time of the MSDU in microseconds.
    pub at: u64,
    /// Destination node id.
    pub dest: u32,
    /// Payload length in bytes; byte `i` carries `i mod 256`.
    #[serde(default)]
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: u32,
    pub mac: MacAddress,
    #[serde(default)]
    pub role: StationRole,
    /// A silent node hears nothing and therefore never answers.
    #[serde(default)]
    pub silent: bool,
    #[serde(default)]
    pub traffic: Vec<TrafficItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    /// Last simulated microsecond at which events are processed.
    pub horizon: u64,
    #[serde(default)]
    pub medium: MediumParams,
    #[serde(default)]
    pub access: AccessParams,
    pub nodes: Vec<NodeConfig>,
    /// Node pairs that can neither sense nor hear each other.
    #[serde(default)]
    pub hidden: Vec<[u32; 2]>,
    #[serde(default = "yes")]
    pub trace_tx_line: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("bitrate must be positive")]
    ZeroBitrate,
    #[error("duplicate node id {0}")]
    DuplicateId(u32),
    #[error("duplicate MAC address {0}")]
    DuplicateMac(MacAddress),
    #[error("node {node}: traffic at {at} is after the horizon {horizon}")]
    TrafficAfterHorizon { node: u32, at: u64, horizon: u64 },
    #[error("node {node}: unknown destination {dest}")]
    UnknownDest { node: u32, dest: u32 },
    #[error("node {0}: traffic addressed to itself")]
    SelfDest(u32),
    #[error("node {node}: payload of {len} bytes exceeds the fragmentation threshold {max}")]
    PayloadTooLarge { node: u32, len: usize, max: usize },
    #[error("hidden pair names unknown node {0}")]
    UnknownHidden(u32),
    #[error(transparent)]
    Access(#[from] AccessError),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        if self.medium.bitrate == 0 {
            return Err(ConfigError::ZeroBitrate);
        }
        self.backoff_params(0).validate()?;
        let mut ids = HashSet::new();
        let mut macs = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(ConfigError::DuplicateId(n.id));
            }
            if !macs.insert(n.mac) {
                return Err(ConfigError::DuplicateMac(n.mac));
            }
        }
        for n in &self.nodes {
            for t in &n.traffic {
                if t.at > self.horizon {
                    return Err(ConfigError::TrafficAfterHorizon { node: n.id, at: t.at, horizon: self.horizon });
                }
                if t.dest == n.id {
                    return Err(ConfigError::SelfDest(n.id));
                }
                if !ids.contains(&t.dest) {
                    return Err(ConfigError::UnknownDest { node: n.id, dest: t.dest });
                }
                if t.len > DEFAULT_FRAG_THRESHOLD {
                    return Err(ConfigError::PayloadTooLarge { node: n.id, len: t.len, max: DEFAULT_FRAG_THRESHOLD });
                }
            }
        }
        for id in self.hidden.iter().flatten() {
            if !ids.contains(id) {
                return Err(ConfigError::UnknownHidden(*id));
            }
        }
        Ok(())
    }

    /// Backoff parameters for one node. Each node's generator seed mixes the
    /// scenario seed with the node id.
    pub fn backoff_params(&self, node: u32) -> BackoffParams {
        BackoffParams {
            cw_min: self.access.cw_min,
            cw_max: self.access.cw_max,
            slot_time: self.access.slot_time,
            seed: node_seed(self.seed, node),
        }
    }
}

pub fn node_seed(seed: u64, node: u32) -> u64 {
    seed ^ (u64::from(node) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub sender: u32,
    pub kind: FrameKind,
    pub start: u64,
    pub end: u64,
    pub bytes: usize,
    pub retry: bool,
    pub corrupted: bool,
    #[serde(skip)]
    bits: Bitstream,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: u32,
    pub mac: MacAddress,
    pub offered: u64,
    pub delivered: u64,
    pub failed: u64,
    pub in_flight: u64,
    pub retries: u64,
    pub collisions: u64,
    pub deferrals: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub rng: String,
    pub horizon: u64,
    pub end_time: u64,
    pub nodes: Vec<NodeReport>,
    pub transmissions: Vec<Transmission>,
    pub trace: Trace,
}

impl SimReport {
    pub fn node(&self, id: u32) -> Option<&NodeReport> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Advanced(Vec<TraceRecord>),
    Complete,
}

#[derive(Debug, Clone)]
enum Event {
    Traffic(TrafficItem),
    FrameDone,
    AccessCheck { mode: AccessMode, epoch: u64 },
    BackoffTick { epoch: u64 },
    TxBit { tx: usize, bit: usize },
    TxEnd { tx: usize },
    Timeout { kind: TimeoutKind, epoch: u64 },
    NavExpire,
}

#[derive(Debug, Clone)]
struct Msdu {
    dest: MacAddress,
    payload: Vec<u8>,
}

#[derive(Debug, Clone)]
enum Exchange {
    None,
    Originator { msdu: Msdu, rts: Option<Frame>, data: Option<Frame> },
    Responder { rx: Frame },
}

#[derive(Debug)]
struct Node {
    cfg: NodeConfig,
    scope: String,
    ctl: TxControl,
    alloc: AllocationControl,
    nav: NavTimer,
    seq: SequenceState,
    mesh_seq: u32,
    queue: VecDeque<Msdu>,
    exchange: Exchange,
    pending: Option<Frame>,
    retrying: bool,
    epoch: u64,
    stats: NodeReport,
}

impl Node {
    fn offered(&self) -> u64 {
        self.cfg.traffic.len() as u64
    }
}

pub struct Simulator {
    config: SimConfig,
    now: u64,
    seq: u64,
    queue: BTreeMap<(u64, u32, u64), Event>,
    nodes: Vec<Node>,
    transmissions: Vec<Transmission>,
    active: Vec<usize>,
    hidden: HashSet<(u32, u32)>,
    trace: Trace,
}

fn payload_bytes(len: usize) -> Vec<u8> {
    (0..len).map(|i| i as u8).collect()
}

fn data_len(payload: usize) -> usize {
    FieldLayout { addresses: 4, seq_ctl: true, mesh_header: true, body: true }.fixed_len()
        + MeshHeader::default().packed_len()
        + payload
}

fn did_of(v: u64) -> NavRegister {
    NavRegister(v.min(u64::from(u16::MAX)) as u16)
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Simulator, ConfigError> {
        config.validate()?;
        let mut nodes: Vec<Node> = config
            .nodes
            .iter()
            .map(|n| {
                let scope = format!("node{}", n.id);
                Node {
                    cfg: n.clone(),
                    ctl: TxControl::new(scope.clone()),
                    scope,
                    alloc: AllocationControl::new(config.backoff_params(n.id), config.access.threshold),
                    nav: NavTimer::default(),
                    seq: SequenceState::default(),
                    mesh_seq: 0,
                    queue: VecDeque::new(),
                    exchange: Exchange::None,
                    pending: None,
                    retrying: false,
                    epoch: 0,
                    stats: NodeReport { id: n.id, mac: n.mac, ..NodeReport::default() },
                }
            })
            .collect();
        nodes.sort_by_key(|n| n.cfg.id);
        let hidden = config.hidden.iter().flat_map(|[a, b]| [(*a, *b), (*b, *a)]).collect();
        let mut trace = Trace::new();
        trace.set_metadata("rng", RNG_NAME);
        trace.set_metadata("seed", &config.seed.to_string());
        trace.set_metadata("bitrate", &config.medium.bitrate.to_string());
        trace.set_metadata("sifs", &config.medium.sifs.to_string());
        trace.set_metadata("difs", &config.medium.difs.to_string());
        trace.set_metadata("slot", &config.access.slot_time.to_string());
        trace.set_metadata("threshold", &config.access.threshold.to_string());
        let mut sim = Simulator {
            config,
            now: 0,
            seq: 0,
            queue: BTreeMap::new(),
            nodes,
            transmissions: vec![],
            active: vec![],
            hidden,
            trace,
        };
        for i in 0..sim.nodes.len() {
            let traffic = sim.nodes[i].cfg.traffic.clone();
            for t in traffic {
                sim.schedule(t.at, i, Event::Traffic(t));
            }
        }
        Ok(sim)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn transmissions(&self) -> &[Transmission] {
        &self.transmissions
    }

    pub fn state(&self, id: u32) -> Option<TxState> {
        self.index(id).map(|i| self.nodes[i].ctl.state())
    }

    fn index(&self, id: u32) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.cfg.id).ok()
    }

    fn hears(&self, a: u32, b: u32) -> bool {
        a != b && !self.hidden.contains(&(a, b))
    }

    /// Whether `id` senses another node's transmission at `now`.
    pub fn carrier_sense(&self, id: u32, now: u64) -> bool {
        self.transmissions.iter().any(|t| self.hears(id, t.sender) && t.start < now && now < t.end)
    }

    fn schedule(&mut self, time: u64, node: usize, ev: Event) {
        let id = self.nodes[node].cfg.id;
        self.queue.insert((time, id, self.seq), ev);
        self.seq += 1;
    }

    fn record(&mut self, node: usize, sig: Signal, v: TraceValue) {
        let scope = &self.nodes[node].scope;
        if let Err(e) = self.trace.record_signal(self.now, scope, sig, v) {
            warn!("{scope}: {e}");
        }
    }

    /// Processes the earliest pending event.
    pub fn step(&mut self) -> Step {
        let Some((&key, _)) = self.queue.first_key_value() else {
            return Step::Complete;
        };
        if key.0 > self.config.horizon {
            return Step::Complete;
        }
        let ev = self.queue.remove(&key).expect("key present");
        let before = self.trace.len();
        self.now = key.0;
        let node = self.index(key.1).expect("event for known node");
        self.dispatch(node, ev);
        Step::Advanced(self.trace.records()[before..].to_vec())
    }

    pub fn run_to_end(mut self) -> SimReport {
        while let Step::Advanced(_) = self.step() {}
        self.report()
    }

    pub fn report(&self) -> SimReport {
        SimReport {
            seed: self.config.seed,
            rng: RNG_NAME.to_string(),
            horizon: self.config.horizon,
            end_time: self.now,
            nodes: self
                .nodes
                .iter()
                .map(|n| {
                    let mut r = n.stats.clone();
                    r.offered = n.offered();
                    r.in_flight = r.offered - r.delivered - r.failed;
                    r
                })
                .collect(),
            transmissions: self.transmissions.clone(),
            trace: self.trace.clone(),
        }
    }

    fn dispatch(&mut self, i: usize, ev: Event) {
        match ev {
            Event::Traffic(t) => {
                let dest = self.nodes[self.index(t.dest).expect("validated")].cfg.mac;
                self.nodes[i].queue.push_back(Msdu { dest, payload: payload_bytes(t.len) });
                self.start_next(i);
            }
            Event::FrameDone => self.stimulus(i, StimulusEvent::FrameDone),
            Event::AccessCheck { mode, epoch } if epoch == self.nodes[i].epoch => self.access_check(i, mode),
            Event::BackoffTick { epoch } if epoch == self.nodes[i].epoch => self.backoff_tick(i),
            Event::Timeout { kind, epoch } if epoch == self.nodes[i].epoch => {
                self.stimulus(i, StimulusEvent::Timeout(kind))
            }
            Event::AccessCheck { .. } | Event::BackoffTick { .. } | Event::Timeout { .. } => {}
            Event::TxBit { tx, bit } => self.tx_bit(i, tx, bit),
            Event::TxEnd { tx } => self.tx_end(i, tx),
            Event::NavExpire => {
                if self.nodes[i].nav.expires_at == self.now {
                    self.record(i, Signal::NavReg, TraceValue::bits(16, 0));
                }
            }
        }
    }

    fn start_next(&mut self, i: usize) {
        let node = &mut self.nodes[i];
        if node.ctl.state() != TxState::Idle || !matches!(node.exchange, Exchange::None) {
            return;
        }
        let Some(msdu) = node.queue.pop_front() else {
            return;
        };
        node.alloc.reset();
        let buf = BufferDescriptor {
            ra: Some(msdu.dest),
            ta: Some(node.cfg.mac),
            da: Some(msdu.dest),
            sa: Some(node.cfg.mac),
            payload: msdu.payload.clone(),
            ..BufferDescriptor::default()
        };
        node.exchange = Exchange::Originator { msdu, rts: None, data: None };
        self.stimulus(i, StimulusEvent::Msdurdy(Box::new(buf)));
    }

    fn stimulus(&mut self, i: usize, ev: StimulusEvent) {
        let now = self.now;
        let node = &mut self.nodes[i];
        let actions = match node.ctl.handle(now, &ev, &mut self.trace) {
            Ok(a) => a,
            Err(e) => {
                debug!("{}: {e}", node.scope);
                return;
            }
        };
        node.epoch += 1;
        for action in actions {
            match action {
                ActionSignal::EnBuildFrame(code) => match self.nodes[i].ctl.table().classify(code) {
                    Ok(kind) => self.build(i, kind),
                    Err(e) => warn!("{}: {e}", self.nodes[i].scope),
                },
                ActionSignal::EnMedium => {
                    let gap = match self.nodes[i].ctl.state() {
                        TxState::WaitingMedium(FrameKind::Rts) => self.config.medium.difs,
                        _ => self.config.medium.sifs,
                    };
                    let epoch = self.nodes[i].epoch;
                    self.schedule(now + gap, i, Event::AccessCheck { mode: AccessMode::Initial, epoch });
                }
                ActionSignal::EnRetry => {
                    let node = &mut self.nodes[i];
                    node.retrying = true;
                    if let Exchange::Originator { rts: Some(rts), .. } = &node.exchange {
                        let mut rts = rts.clone();
                        rts.fch.flags.retry = true;
                        codec::seal(&mut rts);
                        node.pending = Some(rts);
                    }
                    let epoch = node.epoch;
                    self.schedule(
                        now + self.config.medium.difs,
                        i,
                        Event::AccessCheck { mode: AccessMode::Retry, epoch },
                    );
                }
                ActionSignal::Transmitted => self.start_tx(i),
                ActionSignal::ResetAll => {}
            }
        }
        self.after_transition(i);
    }

    fn after_transition(&mut self, i: usize) {
        let now = self.now;
        let m = self.config.medium;
        let node = &mut self.nodes[i];
        let originator = matches!(node.exchange, Exchange::Originator { .. });
        match node.ctl.state() {
            TxState::Done | TxState::Failed => {
                if originator {
                    if node.ctl.state() == TxState::Done {
                        node.stats.delivered += 1;
                    } else {
                        node.stats.failed += 1;
                    }
                }
                node.ctl.reset(now, &mut self.trace);
                self.finish_exchange(i);
            }
            TxState::Idle => self.finish_exchange(i),
            TxState::WaitCts => {
                let epoch = node.epoch;
                self.schedule(now + m.cts_timeout(), i, Event::Timeout { kind: TimeoutKind::Cts, epoch });
            }
            TxState::WaitAck => {
                let epoch = node.epoch;
                self.schedule(now + m.ack_timeout(), i, Event::Timeout { kind: TimeoutKind::Ack, epoch });
            }
            TxState::WaitData => {
                let did = node.pending.as_ref().map_or(0, |f| u64::from(f.did));
                let epoch = node.epoch;
                self.schedule(now + did + m.sifs, i, Event::Timeout { kind: TimeoutKind::Data, epoch });
            }
            _ => {}
        }
    }

    fn finish_exchange(&mut self, i: usize) {
        let node = &mut self.nodes[i];
        node.exchange = Exchange::None;
        node.pending = None;
        node.retrying = false;
        node.alloc.reset();
        self.end_backoff(i);
        self.start_next(i);
    }

    fn build(&mut self, i: usize, kind: FrameKind) {
        let m = self.config.medium;
        let ctl_air = m.airtime(MIN_CONTROL_LEN);
        let node = &mut self.nodes[i];
        let mac = node.cfg.mac;
        let role = node.cfg.role;
        let (buf, nav, flags) = match (&node.exchange, kind) {
            (Exchange::Originator { msdu, .. }, FrameKind::Rts) => {
                let nav = 3 * m.sifs + 2 * ctl_air + m.airtime(data_len(msdu.payload.len()));
                let buf = BufferDescriptor { ra: Some(msdu.dest), ta: Some(mac), ..BufferDescriptor::default() };
                (buf, nav, FcFlags::default())
            }
            (Exchange::Originator { data: Some(data), .. }, FrameKind::Data) => {
                let mut data = data.clone();
                data.fch.flags.retry = true;
                codec::seal(&mut data);
                node.pending = Some(data);
                self.schedule(self.now, i, Event::FrameDone);
                return;
            }
            (Exchange::Originator { msdu, .. }, FrameKind::Data) => {
                let header = MeshHeader { ttl: DEFAULT_MESH_TTL, mesh_seq: node.mesh_seq, ..MeshHeader::default() };
                let buf = BufferDescriptor {
                    ra: Some(msdu.dest),
                    ta: Some(mac),
                    da: Some(msdu.dest),
                    sa: Some(mac),
                    payload: msdu.payload.clone(),
                    mesh_header: header,
                    ..BufferDescriptor::default()
                };
                (buf, m.sifs + ctl_air, FcFlags::mesh_data())
            }
            (Exchange::Responder { rx }, FrameKind::Cts | FrameKind::Ack) => {
                let buf = BufferDescriptor { ra: rx.addr2, ..BufferDescriptor::default() };
                let nav = u64::from(rx.did).saturating_sub(m.sifs + ctl_air);
                (buf, nav, FcFlags::default())
            }
            _ => {
                warn!("{}: no exchange context for building {kind}", node.scope);
                return;
            }
        };
        match build_frame(kind, &buf, role, did_of(nav), node.seq, flags) {
            Ok(built) => {
                let frame = built.frame().clone();
                if kind == FrameKind::Data {
                    node.seq = built.sequence;
                    node.mesh_seq = node.mesh_seq.wrapping_add(1);
                }
                if let Exchange::Originator { rts, data, .. } = &mut node.exchange {
                    match kind {
                        FrameKind::Rts => *rts = Some(frame.clone()),
                        FrameKind::Data => *data = Some(frame.clone()),
                        _ => {}
                    }
                }
                node.pending = Some(frame);
                self.schedule(self.now, i, Event::FrameDone);
            }
            Err(e) => warn!("{}: build {kind} failed: {e}", node.scope),
        }
    }

    fn medium_state(&self, i: usize) -> (NavRegister, bool) {
        let node = &self.nodes[i];
        (node.nav.register(self.now), self.carrier_sense(node.cfg.id, self.now))
    }

    fn access_check(&mut self, i: usize, mode: AccessMode) {
        if !matches!(self.nodes[i].ctl.state(), TxState::WaitingMedium(_)) {
            return;
        }
        let (nav, cs) = self.medium_state(i);
        let outcome = self.nodes[i].alloc.request(mode, nav, cs);
        self.apply_outcome(i, outcome, true);
    }

    fn backoff_tick(&mut self, i: usize) {
        if !matches!(self.nodes[i].ctl.state(), TxState::WaitingMedium(_)) {
            return;
        }
        let (nav, cs) = self.medium_state(i);
        match self.nodes[i].alloc.tick(nav, cs) {
            SlotResult::Counting(left) => {
                self.record(i, Signal::StartCount, true.into());
                self.record(i, Signal::BackoffVal, TraceValue::bits(10, left.into()));
                self.schedule_tick(i);
            }
            SlotResult::Frozen(_) => {
                self.record(i, Signal::StartCount, false.into());
                self.schedule_tick(i);
            }
            SlotResult::Done(outcome) => self.apply_outcome(i, outcome, false),
            SlotResult::Idle => {}
        }
    }

    /// Drops the backoff signals that are currently high.
    fn end_backoff(&mut self, i: usize) {
        for (sig, low) in [
            (Signal::EnBackoff, TraceValue::Bit(false)),
            (Signal::StartCount, TraceValue::Bit(false)),
            (Signal::BackoffVal, TraceValue::bits(10, 0)),
        ] {
            if self.trace.current(&self.nodes[i].scope, sig).is_some_and(|v| v.is_high()) {
                self.record(i, sig, low);
            }
        }
    }

    fn schedule_tick(&mut self, i: usize) {
        let at = self.now + self.config.access.slot_time;
        let epoch = self.nodes[i].epoch;
        self.schedule(at, i, Event::BackoffTick { epoch });
    }

    fn apply_outcome(&mut self, i: usize, outcome: AccessOutcome, fresh: bool) {
        match outcome {
            AccessOutcome::Granted | AccessOutcome::Denied(_) => {
                self.end_backoff(i);
                let granted = outcome == AccessOutcome::Granted;
                self.stimulus(i, StimulusEvent::AccessGranted(granted));
            }
            AccessOutcome::Wait(b) => {
                self.nodes[i].stats.deferrals += 1;
                self.record(i, Signal::EnBackoff, true.into());
                self.record(i, Signal::BackoffVal, TraceValue::bits(10, b.into()));
                self.record(i, Signal::StartCount, true.into());
                if b == 0 && fresh {
                    self.backoff_tick(i);
                } else {
                    self.schedule_tick(i);
                }
            }
        }
    }

    fn start_tx(&mut self, i: usize) {
        let Some(frame) = self.nodes[i].pending.clone() else {
            warn!("{}: granted with nothing to send", self.nodes[i].scope);
            return;
        };
        let bits = match codec::serialize_tx(&frame) {
            Ok(b) => b,
            Err(e) => {
                warn!("{}: {e}", self.nodes[i].scope);
                return;
            }
        };
        let kind = frame.kind().expect("built frames have a kind");
        let sender = self.nodes[i].cfg.id;
        let bytes = bits.len() / 8;
        let start = self.now;
        let end = start + self.config.medium.airtime(bytes);
        let retry = self.nodes[i].retrying && kind == FrameKind::Rts;
        if retry {
            self.nodes[i].stats.retries += 1;
            self.nodes[i].retrying = false;
        }
        let mut corrupted = false;
        for &a in &self.active {
            if self.transmissions[a].end > start {
                self.transmissions[a].corrupted = true;
                corrupted = true;
            }
        }
        let tx = self.transmissions.len();
        self.transmissions.push(Transmission { sender, kind, start, end, bytes, retry, corrupted, bits });
        self.active.push(tx);
        for j in 0..self.nodes.len() {
            if self.hears(self.nodes[j].cfg.id, sender) {
                self.record(j, Signal::CarrierSense, true.into());
            }
        }
        if self.config.trace_tx_line {
            self.tx_bit(i, tx, 0);
        }
        self.schedule(end, i, Event::TxEnd { tx });
    }

    fn tx_bit(&mut self, i: usize, tx: usize, bit: usize) {
        let t = &self.transmissions[tx];
        let value = t.bits.bits()[bit];
        let start = t.start;
        // Next bit whose value differs; the line holds its level in between.
        let next = t.bits.bits()[bit..].iter().position(|&b| b != value).map(|k| bit + k);
        self.record(i, Signal::TxLine, value.into());
        if let Some(n) = next {
            self.schedule(start + self.config.medium.bit_offset(n), i, Event::TxBit { tx, bit: n });
        }
    }

    fn tx_end(&mut self, i: usize, tx: usize) {
        self.active.retain(|&a| a != tx);
        let t = self.transmissions[tx].clone();
        if self.config.trace_tx_line {
            self.record(i, Signal::TxLine, false.into());
        }
        if t.corrupted {
            self.nodes[i].stats.collisions += 1;
        }
        for j in 0..self.nodes.len() {
            let id = self.nodes[j].cfg.id;
            if self.hears(id, t.sender) && !self.carrier_sense_at_end(id) {
                self.record(j, Signal::CarrierSense, false.into());
            }
        }
        self.stimulus(i, StimulusEvent::TransmitComplete);
        if t.corrupted {
            return;
        }
        let frame = match t.bits.to_bytes().map(|b| codec::decode(&b)) {
            Some(Ok(f)) => f,
            other => {
                warn!("undecodable transmission from node {}: {other:?}", t.sender);
                return;
            }
        };
        for j in 0..self.nodes.len() {
            let id = self.nodes[j].cfg.id;
            if !self.hears(id, t.sender) || self.nodes[j].cfg.silent {
                continue;
            }
            if frame.addr1 == Some(self.nodes[j].cfg.mac) {
                self.receive(j, &frame);
            } else if t.kind != FrameKind::PsPoll {
                self.overhear(j, frame.did);
            }
        }
    }

    /// Carrier state just after a transmission ends, counting only those
    /// still in the air.
    fn carrier_sense_at_end(&self, id: u32) -> bool {
        self.active.iter().any(|&a| self.hears(id, self.transmissions[a].sender))
    }

    fn receive(&mut self, j: usize, frame: &Frame) {
        let ev = match frame.kind() {
            Some(FrameKind::Rts) => StimulusEvent::RecRts(frame.addr2.unwrap_or(MacAddress::ZERO)),
            Some(FrameKind::Cts) => StimulusEvent::RecCts,
            Some(FrameKind::Data) => StimulusEvent::RecData(Box::new(frame.clone())),
            Some(FrameKind::Ack) => StimulusEvent::RecAck,
            _ => return,
        };
        let node = &mut self.nodes[j];
        let idle = node.ctl.state() == TxState::Idle && matches!(node.exchange, Exchange::None);
        let responding = matches!(ev, StimulusEvent::RecRts(_) | StimulusEvent::RecData(_));
        if responding && idle {
            node.alloc.reset();
            node.exchange = Exchange::Responder { rx: frame.clone() };
        } else if let (StimulusEvent::RecData(_), Exchange::Responder { rx }) = (&ev, &mut node.exchange) {
            if node.ctl.state() == TxState::WaitData {
                *rx = frame.clone();
            }
        }
        self.stimulus(j, ev);
    }

    fn overhear(&mut self, j: usize, did: u16) {
        let now = self.now;
        let node = &mut self.nodes[j];
        let nav = crate::access::update_nav(node.nav, did, now);
        if nav == node.nav {
            return;
        }
        node.nav = nav;
        let reg = nav.register(now);
        self.record(j, Signal::NavReg, TraceValue::bits(16, reg.value().into()));
        self.schedule(nav.expires_at, j, Event::NavExpire);
    }
}

/// Runs a scenario to its horizon or to quiescence.
pub fn run(config: SimConfig) -> Result<SimReport, ConfigError> {
    Ok(Simulator::new(config)?.run_to_end())
}
