//! Edge-triggered signal traces and their value-change text and JSON forms.
//!
//! A trace stores one record per change of a `(scope, signal)` pair.
//! The text form follows the VCD layout:
//!
//! ```text
//! $comment key=value $end          one line per metadata entry
//! $timescale 1us $end
//! $scope module <scope> $end
//! $var wire <width> <id> <signal> $end
//! $upscope $end
//! $enddefinitions $end
//! #<time>
//! 0<id> | 1<id> | b<bits> <id>
//! ```
//!
//! Scopes are declared in order of first appearance, signals within a scope
//! in registry order, and identifiers are assigned in declaration order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("unknown signal {0:?}")]
    UnknownSignal(String),
    #[error("record at t={time} precedes the last record at t={last}")]
    OutOfOrder { time: u64, last: u64 },
    #[error("value of width {got} recorded on {signal} (width {want})")]
    WidthMismatch { signal: Signal, want: u8, got: u8 },
    #[error("invalid scope name {0:?}")]
    BadScope(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("json: {0}")]
    Json(String),
}

macro_rules! signals {
    ($($variant:ident => $name:literal, $width:literal;)*) => {
        /// The fixed signal registry.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Signal {
            $($variant,)*
        }

        impl Signal {
            pub const ALL: &'static [Signal] = &[$(Signal::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Signal::$variant => $name,)*
                }
            }

            pub fn width(self) -> u8 {
                match self {
                    $(Signal::$variant => $width,)*
                }
            }
        }
    };
}

signals! {
    Msdurdy => "msdurdy", 1;
    RecData => "rec_data", 1;
    RecCts => "rec_cts", 1;
    RecRts => "rec_rts", 1;
    RecAck => "rec_ack", 1;
    EnBuildframe => "en_buildframe", 1;
    FrameSubtype => "frame_subtype", 6;
    FrameDone => "frame_done", 1;
    EnMedium => "en_medium", 1;
    AccessGranted => "access_granted", 1;
    Transmitted => "transmitted", 1;
    TransmitComplete => "transmit_complete", 1;
    EnRetry => "en_retry", 1;
    EnBackoff => "en_backoff", 1;
    StartCount => "start_count", 1;
    BackoffVal => "backoff_val", 10;
    CarrierSense => "carrier_sense", 1;
    NavReg => "nav_reg", 16;
    TxLine => "tx_line", 1;
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Signal {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Signal::ALL.iter().copied().find(|sig| sig.name() == s).ok_or_else(|| TraceError::UnknownSignal(s.to_string()))
    }
}

impl Serialize for Signal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceValue {
    Bit(bool),
    Bits { width: u8, value: u64 },
}

impl TraceValue {
    pub fn bits(width: u8, value: u64) -> Self {
        let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
        TraceValue::Bits { width, value: value & mask }
    }

    pub fn width(self) -> u8 {
        match self {
            TraceValue::Bit(_) => 1,
            TraceValue::Bits { width, .. } => width,
        }
    }

    pub fn as_u64(self) -> u64 {
        match self {
            TraceValue::Bit(b) => b as u64,
            TraceValue::Bits { value, .. } => value,
        }
    }

    pub fn is_high(self) -> bool {
        self.as_u64() != 0
    }
}

impl From<bool> for TraceValue {
    fn from(b: bool) -> Self {
        TraceValue::Bit(b)
    }
}

impl fmt::Display for TraceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TraceValue::Bit(b) => write!(f, "{}", b as u8),
            TraceValue::Bits { width, value } => write!(f, "{value:0w$b}", w = width as usize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: u64,
    pub scope: String,
    pub signal: Signal,
    pub value: TraceValue,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "TraceData", into = "TraceData")]
pub struct Trace {
    metadata: BTreeMap<String, String>,
    records: Vec<TraceRecord>,
    last: HashMap<(String, Signal), TraceValue>,
}

#[derive(Serialize, Deserialize)]
struct TraceData {
    metadata: BTreeMap<String, String>,
    records: Vec<TraceRecord>,
}

impl From<TraceData> for Trace {
    fn from(d: TraceData) -> Self {
        let mut t = Trace::from_records(d.records);
        t.metadata = d.metadata;
        t
    }
}

impl From<Trace> for TraceData {
    fn from(t: Trace) -> Self {
        TraceData { metadata: t.metadata, records: t.records }
    }
}

impl PartialEq for Trace {
    fn eq(&self, other: &Self) -> bool {
        self.metadata == other.metadata && self.records == other.records
    }
}

impl Eq for Trace {}

fn valid_scope(scope: &str) -> bool {
    !scope.is_empty() && scope.bytes().all(|b| b.is_ascii_graphic() && b != b'$')
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    /// Rebuilds a trace by replaying records; unchanged values collapse and
    /// invalid records are dropped.
    pub fn from_records(records: impl IntoIterator<Item = TraceRecord>) -> Self {
        let mut t = Trace::new();
        for r in records {
            let _ = t.record_signal(r.time, &r.scope, r.signal, r.value);
        }
        t
    }

    pub fn set_metadata(&mut self, key: &str, value: &str) {
        let clean = |s: &str| s.replace(['\n', '\r'], " ").replace("$end", "end");
        self.metadata.insert(clean(key).replace('=', "_"), clean(value));
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records `value` on a signal named by string. Returns whether a record
    /// was stored (false when the value did not change).
    pub fn record(
        &mut self,
        time: u64,
        scope: &str,
        signal: &str,
        value: impl Into<TraceValue>,
    ) -> Result<bool, TraceError> {
        let signal: Signal = signal.parse()?;
        self.record_signal(time, scope, signal, value)
    }

    pub fn record_signal(
        &mut self,
        time: u64,
        scope: &str,
        signal: Signal,
        value: impl Into<TraceValue>,
    ) -> Result<bool, TraceError> {
        let value = value.into();
        if !valid_scope(scope) {
            return Err(TraceError::BadScope(scope.to_string()));
        }
        if value.width() != signal.width() {
            return Err(TraceError::WidthMismatch { signal, want: signal.width(), got: value.width() });
        }
        if let Some(last) = self.records.last() {
            if time < last.time {
                return Err(TraceError::OutOfOrder { time, last: last.time });
            }
        }
        let key = (scope.to_string(), signal);
        if self.last.get(&key) == Some(&value) {
            return Ok(false);
        }
        self.last.insert(key, value);
        self.records.push(TraceRecord { time, scope: scope.to_string(), signal, value });
        Ok(true)
    }

    /// Current value of a signal, if it was ever recorded.
    pub fn current(&self, scope: &str, signal: Signal) -> Option<TraceValue> {
        self.last.get(&(scope.to_string(), signal)).copied()
    }

    pub fn scopes(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.scope.as_str()) {
                seen.push(&r.scope);
            }
        }
        seen
    }

    /// Rising and falling transitions in one scope, in record order.
    pub fn edges(&self, scope: &str) -> Vec<EdgeEvent> {
        let mut prev: HashMap<Signal, bool> = HashMap::new();
        let mut out = Vec::new();
        for (index, r) in self.records.iter().enumerate().filter(|(_, r)| r.scope == scope) {
            let high = r.value.is_high();
            let was = prev.insert(r.signal, high).unwrap_or(false);
            if high != was {
                out.push(EdgeEvent { index, time: r.time, edge: Edge { signal: r.signal, rising: high } });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub signal: Signal,
    pub rising: bool,
}

impl Edge {
    pub fn rise(signal: Signal) -> Self {
        Edge { signal, rising: true }
    }

    pub fn fall(signal: Signal) -> Self {
        Edge { signal, rising: false }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.signal, if self.rising { "+" } else { "-" })
    }
}

/// Parses `name+` / `name-` (also `name↑` / `name↓`); a bare name is a
/// rising edge.
impl FromStr for Edge {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, rising) = if let Some(n) = s.strip_suffix('+').or_else(|| s.strip_suffix('↑')) {
            (n, true)
        } else if let Some(n) = s.strip_suffix('-').or_else(|| s.strip_suffix('↓')) {
            (n, false)
        } else {
            (s, true)
        };
        Ok(Edge { signal: name.parse()?, rising })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeEvent {
    /// Index of the record in the trace.
    pub index: usize,
    pub time: u64,
    pub edge: Edge,
}

/// True iff the listed edges occur in `scope` in the given relative order.
pub fn assert_order(trace: &Trace, scope: &str, order: &[Edge]) -> bool {
    let mut wanted = order.iter().peekable();
    for ev in trace.edges(scope) {
        match wanted.peek() {
            None => break,
            Some(&&e) if e == ev.edge => {
                wanted.next();
            }
            _ => {}
        }
    }
    wanted.peek().is_none()
}

fn vcd_id(mut n: usize) -> String {
    let mut id = String::new();
    loop {
        id.push((b'!' + (n % 94) as u8) as char);
        n /= 94;
        if n == 0 {
            break id;
        }
        n -= 1;
    }
}

pub fn export_waveform(trace: &Trace) -> String {
    let mut out = String::new();
    for (k, v) in trace.metadata() {
        writeln!(out, "$comment {k}={v} $end").unwrap();
    }
    out.push_str("$timescale 1us $end\n");

    let mut ids: HashMap<(&str, Signal), String> = HashMap::new();
    for scope in trace.scopes() {
        writeln!(out, "$scope module {scope} $end").unwrap();
        for &sig in Signal::ALL {
            if trace.records().iter().any(|r| r.scope == scope && r.signal == sig) {
                let id = vcd_id(ids.len());
                writeln!(out, "$var wire {} {id} {sig} $end", sig.width()).unwrap();
                ids.insert((scope, sig), id);
            }
        }
        out.push_str("$upscope $end\n");
    }
    out.push_str("$enddefinitions $end\n");

    let mut now = None;
    for r in trace.records() {
        if now != Some(r.time) {
            writeln!(out, "#{}", r.time).unwrap();
            now = Some(r.time);
        }
        let id = &ids[&(r.scope.as_str(), r.signal)];
        match r.value {
            TraceValue::Bit(b) => writeln!(out, "{}{id}", b as u8).unwrap(),
            v @ TraceValue::Bits { .. } => writeln!(out, "b{v} {id}").unwrap(),
        }
    }
    out
}

pub fn parse_waveform(text: &str) -> Result<Trace, TraceError> {
    let mut trace = Trace::new();
    let mut vars: HashMap<String, (String, Signal)> = HashMap::new();
    let mut scope: Option<String> = None;
    let mut time: Option<u64> = None;
    let mut in_body = false;

    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |msg: String| TraceError::Parse { line: i + 1, msg };
        if line.is_empty() {
            continue;
        }
        if !in_body {
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["$comment", rest @ .., "$end"] => {
                    let body = rest.join(" ");
                    if let Some((k, v)) = body.split_once('=') {
                        trace.set_metadata(k, v);
                    }
                }
                ["$timescale", "1us", "$end"] => {}
                ["$timescale", ..] => return Err(err(format!("unsupported timescale {line:?}"))),
                ["$scope", "module", name, "$end"] => scope = Some(name.to_string()),
                ["$upscope", "$end"] => scope = None,
                ["$var", "wire", width, id, name, "$end"] => {
                    let sc = scope.clone().ok_or_else(|| err("$var outside a scope".into()))?;
                    let sig: Signal = name.parse()?;
                    if width.parse::<u8>().ok() != Some(sig.width()) {
                        return Err(err(format!("{sig} declared with width {width}")));
                    }
                    vars.insert(id.to_string(), (sc, sig));
                }
                ["$enddefinitions", "$end"] => in_body = true,
                _ => return Err(err(format!("unexpected header line {line:?}"))),
            }
            continue;
        }

        if let Some(t) = line.strip_prefix('#') {
            time = Some(t.parse().map_err(|_| err(format!("bad time {t:?}")))?);
            continue;
        }
        let t = time.ok_or_else(|| err("value change before any timestamp".into()))?;
        let (value_text, id) = if let Some(rest) = line.strip_prefix('b') {
            rest.split_once(' ').ok_or_else(|| err("vector change without identifier".into()))?
        } else {
            line.split_at(1)
        };
        let (sc, sig) = vars.get(id.trim()).ok_or_else(|| err(format!("undeclared identifier {id:?}")))?.clone();
        let value = if line.starts_with('b') {
            let v = u64::from_str_radix(value_text, 2).map_err(|_| err(format!("bad vector {value_text:?}")))?;
            TraceValue::bits(sig.width(), v)
        } else {
            match value_text {
                "0" => TraceValue::Bit(false),
                "1" => TraceValue::Bit(true),
                other => return Err(err(format!("bad scalar value {other:?}"))),
            }
        };
        trace.record_signal(t, &sc, sig, value).map_err(|e| err(e.to_string()))?;
    }
    if !in_body {
        return Err(TraceError::Parse { line: text.lines().count(), msg: "missing $enddefinitions".into() });
    }
    Ok(trace)
}

/// JSON array of records.
pub fn export_json(trace: &Trace) -> String {
    serde_json::to_string_pretty(trace.records()).expect("trace records serialize")
}

pub fn parse_json(text: &str) -> Result<Trace, TraceError> {
    let records: Vec<TraceRecord> = serde_json::from_str(text).map_err(|e| TraceError::Json(e.to_string()))?;
    let mut trace = Trace::new();
    for r in records {
        trace.record_signal(r.time, &r.scope, r.signal, r.value)?;
    }
    Ok(trace)
}
