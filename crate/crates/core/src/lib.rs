//! IEEE 802.11s mesh MAC transmitter model: frame construction, wire codec,
//! transmission control, collision avoidance and a discrete-event medium.

pub mod access;
pub mod builder;
pub mod codec;
pub mod conformance;
pub mod frame;
pub mod sim;
pub mod trace;
pub mod txctl;

pub use access::{AccessMode, AccessOutcome, AllocationControl, BackoffParams, RetryCounter};
pub use builder::{build_frame, BufferDescriptor, BuiltFrame, NavRegister, SequenceState, StationRole};
pub use codec::{decode, encode, CodecError};
pub use frame::{Frame, FrameKind, MacAddress, SubtypeCode, SubtypeTable};
pub use trace::{Signal, Trace, TraceRecord, TraceValue};
pub use txctl::{handle_event, ActionSignal, StimulusEvent, TxControl, TxState};
