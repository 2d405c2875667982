//! Transmission control: the reactive state machine that arbitrates frame
//! building, medium access and frame transmission.
//!
//! Four stimulus paths drive it. `msdurdy` sends an RTS and waits for CTS;
//! `rec_cts` sends the DATA frame and waits for ACK; `rec_rts` answers with
//! CTS and waits for DATA; `rec_data` answers with ACK. Each one runs the
//! same handshake: en_buildframe, frame_done, en_medium, access_granted,
//! transmitted, transmit_complete, then every latched signal is reset.

use std::fmt;

use log::debug;
use thiserror::Error;

use crate::builder::BufferDescriptor;
use crate::frame::{Frame, FrameError, FrameKind, MacAddress, SubtypeCode, SubtypeTable};
use crate::trace::{Signal, Trace, TraceValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeoutKind {
    Cts,
    Ack,
    /// Responder gave up waiting for DATA after sending CTS.
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StimulusEvent {
    Msdurdy(Box<BufferDescriptor>),
    RecRts(MacAddress),
    RecCts,
    RecData(Box<Frame>),
    RecAck,
    FrameDone,
    AccessGranted(bool),
    TransmitComplete,
    Timeout(TimeoutKind),
}

impl StimulusEvent {
    pub fn name(&self) -> &'static str {
        match self {
            StimulusEvent::Msdurdy(_) => "msdurdy",
            StimulusEvent::RecRts(_) => "rec_rts",
            StimulusEvent::RecCts => "rec_cts",
            StimulusEvent::RecData(_) => "rec_data",
            StimulusEvent::RecAck => "rec_ack",
            StimulusEvent::FrameDone => "frame_done",
            StimulusEvent::AccessGranted(true) => "access_granted",
            StimulusEvent::AccessGranted(false) => "access_denied",
            StimulusEvent::TransmitComplete => "transmit_complete",
            StimulusEvent::Timeout(TimeoutKind::Cts) => "cts_timeout",
            StimulusEvent::Timeout(TimeoutKind::Ack) => "ack_timeout",
            StimulusEvent::Timeout(TimeoutKind::Data) => "data_timeout",
        }
    }

    /// Trace signal mirroring this stimulus, with the value it takes.
    fn signal(&self) -> Option<(Signal, bool)> {
        Some(match self {
            StimulusEvent::Msdurdy(_) => (Signal::Msdurdy, true),
            StimulusEvent::RecRts(_) => (Signal::RecRts, true),
            StimulusEvent::RecCts => (Signal::RecCts, true),
            StimulusEvent::RecData(_) => (Signal::RecData, true),
            StimulusEvent::RecAck => (Signal::RecAck, true),
            StimulusEvent::FrameDone => (Signal::FrameDone, true),
            StimulusEvent::AccessGranted(g) => (Signal::AccessGranted, *g),
            StimulusEvent::TransmitComplete => (Signal::TransmitComplete, true),
            StimulusEvent::Timeout(_) => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionSignal {
    EnBuildFrame(SubtypeCode),
    EnMedium,
    EnRetry,
    Transmitted,
    ResetAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxState {
    Idle,
    Building(FrameKind),
    WaitingMedium(FrameKind),
    Transmitting(FrameKind),
    WaitCts,
    WaitData,
    WaitAck,
    Failed,
    Done,
}

impl TxState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TxState::Failed | TxState::Done)
    }
}

impl fmt::Display for TxState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TxState::Building(k) => write!(f, "building({k})"),
            TxState::WaitingMedium(k) => write!(f, "waiting-medium({k})"),
            TxState::Transmitting(k) => write!(f, "transmitting({k})"),
            other => write!(f, "{}", format!("{other:?}").to_ascii_lowercase()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("event {event} not accepted in state {state}")]
    UnexpectedEvent { state: TxState, event: &'static str },
    #[error(transparent)]
    Subtype(#[from] FrameError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub state: TxState,
    pub actions: Vec<ActionSignal>,
}

/// Where a transmitted frame of each kind leaves the controller.
fn after_transmit(kind: FrameKind) -> TxState {
    match kind {
        FrameKind::Rts => TxState::WaitCts,
        FrameKind::Data => TxState::WaitAck,
        FrameKind::Cts => TxState::WaitData,
        _ => TxState::Done,
    }
}

pub fn handle_event(state: TxState, ev: &StimulusEvent) -> Result<Transition, TxError> {
    handle_event_with(&SubtypeTable::STANDARD, state, ev)
}

pub fn handle_event_with(table: &SubtypeTable, state: TxState, ev: &StimulusEvent) -> Result<Transition, TxError> {
    use StimulusEvent as E;
    use TxState as S;

    let build = |kind: FrameKind| -> Result<Transition, TxError> {
        Ok(Transition { state: S::Building(kind), actions: vec![ActionSignal::EnBuildFrame(table.code(kind)?)] })
    };
    let go = |state: TxState, actions: Vec<ActionSignal>| Ok(Transition { state, actions });

    match (state, ev) {
        (S::Idle, E::Msdurdy(_)) => build(FrameKind::Rts),
        (S::Idle, E::RecRts(_)) => build(FrameKind::Cts),
        (S::WaitCts, E::RecCts) => build(FrameKind::Data),
        (S::Idle | S::WaitData, E::RecData(_)) => build(FrameKind::Ack),
        (S::Building(k), E::FrameDone) => go(S::WaitingMedium(k), vec![ActionSignal::EnMedium]),
        (S::WaitingMedium(k), E::AccessGranted(true)) => go(S::Transmitting(k), vec![ActionSignal::Transmitted]),
        (S::WaitingMedium(_), E::AccessGranted(false)) => go(S::Failed, vec![]),
        (S::Transmitting(k), E::TransmitComplete) => go(after_transmit(k), vec![ActionSignal::ResetAll]),
        (S::WaitAck, E::RecAck) => go(S::Done, vec![]),
        (S::WaitCts, E::Timeout(TimeoutKind::Cts)) | (S::WaitAck, E::Timeout(TimeoutKind::Ack)) => {
            go(S::WaitingMedium(FrameKind::Rts), vec![ActionSignal::EnRetry])
        }
        (S::WaitData, E::Timeout(TimeoutKind::Data)) => go(S::Idle, vec![]),
        _ => Err(TxError::UnexpectedEvent { state, event: ev.name() }),
    }
}

pub fn reset(_state: TxState) -> TxState {
    TxState::Idle
}

/// Signals the controller holds high until the next reset.
const LATCHED: [Signal; 13] = [
    Signal::Msdurdy,
    Signal::RecData,
    Signal::RecCts,
    Signal::RecRts,
    Signal::RecAck,
    Signal::EnBuildframe,
    Signal::FrameDone,
    Signal::EnMedium,
    Signal::AccessGranted,
    Signal::Transmitted,
    Signal::TransmitComplete,
    Signal::EnRetry,
    Signal::FrameSubtype,
];

/// A controller instance that mirrors every accepted stimulus and emitted
/// action into a trace under its scope.
#[derive(Debug, Clone)]
pub struct TxControl {
    state: TxState,
    table: SubtypeTable,
    scope: String,
}

impl TxControl {
    pub fn new(scope: impl Into<String>) -> Self {
        TxControl::with_table(scope, SubtypeTable::STANDARD)
    }

    pub fn with_table(scope: impl Into<String>, table: SubtypeTable) -> Self {
        TxControl { state: TxState::Idle, table, scope: scope.into() }
    }

    pub fn state(&self) -> TxState {
        self.state
    }

    pub fn scope(&self) -> &str {
        &self.scope
    }

    pub fn table(&self) -> &SubtypeTable {
        &self.table
    }

    /// Applies one stimulus at time `t`. Rejected events leave the state and
    /// the trace untouched.
    pub fn handle(&mut self, t: u64, ev: &StimulusEvent, trace: &mut Trace) -> Result<Vec<ActionSignal>, TxError> {
        let tr = match handle_event_with(&self.table, self.state, ev) {
            Ok(tr) => tr,
            Err(e) => {
                debug!("{}: {e}", self.scope);
                return Err(e);
            }
        };
        if let Some((sig, v)) = ev.signal() {
            self.mirror(trace, t, sig, TraceValue::Bit(v));
        }
        for action in &tr.actions {
            match *action {
                ActionSignal::EnBuildFrame(code) => {
                    self.mirror(trace, t, Signal::FrameSubtype, TraceValue::bits(6, code.value().into()));
                    self.mirror(trace, t, Signal::EnBuildframe, true.into());
                }
                ActionSignal::EnMedium => self.mirror(trace, t, Signal::EnMedium, true.into()),
                ActionSignal::EnRetry => self.mirror(trace, t, Signal::EnRetry, true.into()),
                ActionSignal::Transmitted => self.mirror(trace, t, Signal::Transmitted, true.into()),
                ActionSignal::ResetAll => self.clear_latched(t, trace),
            }
        }
        self.state = tr.state;
        Ok(tr.actions)
    }

    /// Returns to Idle and drops every latched signal.
    pub fn reset(&mut self, t: u64, trace: &mut Trace) {
        self.state = reset(self.state);
        self.clear_latched(t, trace);
    }

    fn clear_latched(&self, t: u64, trace: &mut Trace) {
        for sig in LATCHED {
            let low = if sig.width() == 1 { TraceValue::Bit(false) } else { TraceValue::bits(sig.width(), 0) };
            if trace.current(&self.scope, sig).is_some_and(|v| v.is_high()) {
                self.mirror(trace, t, sig, low);
            }
        }
    }

    fn mirror(&self, trace: &mut Trace, t: u64, sig: Signal, v: TraceValue) {
        if let Err(e) = trace.record_signal(t, &self.scope, sig, v) {
            debug!("{}: trace record dropped: {e}", self.scope);
        }
    }
}
