//! Allocation control: carrier-sense and NAV admission, the retry counter,
//! and binary exponential backoff.
//!
//! Backoff draws use ChaCha8 seeded through `rand_core`'s `seed_from_u64`;
//! a draw is `next_u64() % (cw + 1)`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::NavRegister;

pub const DEFAULT_CW_MIN: u32 = 15;
pub const DEFAULT_CW_MAX: u32 = 1023;
pub const DEFAULT_SLOT_TIME: u64 = 20;
pub const DEFAULT_RETRY_THRESHOLD: u32 = 10;

/// Name recorded in trace metadata for the backoff generator.
pub const RNG_NAME: &str = "chacha8/seed_from_u64";

pub type BackoffRng = ChaCha8Rng;

pub fn backoff_rng(seed: u64) -> BackoffRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccessError {
    #[error("contention window {0} is not of the form 2^k - 1")]
    NotPowerOfTwoMinusOne(u32),
    #[error("cw_min {min} exceeds cw_max {max}")]
    WindowOrder { min: u32, max: u32 },
    #[error("slot time must be positive")]
    ZeroSlot,
}

/// Counts access attempts for the frame in progress (dot11rst_threshold
/// bounds it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryCounter {
    pub attempts: u32,
    pub threshold: u32,
}

impl RetryCounter {
    pub fn new(threshold: u32) -> Self {
        RetryCounter { attempts: 0, threshold }
    }

    pub fn increment(self) -> Self {
        RetryCounter { attempts: self.attempts + 1, ..self }
    }

    pub fn exhausted(&self) -> bool {
        self.attempts > self.threshold
    }

    pub fn reset(self) -> Self {
        RetryCounter { attempts: 0, ..self }
    }
}

impl Default for RetryCounter {
    fn default() -> Self {
        RetryCounter::new(DEFAULT_RETRY_THRESHOLD)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffParams {
    pub cw_min: u32,
    pub cw_max: u32,
    /// Slot time in simulated microseconds.
    pub slot_time: u64,
    pub seed: u64,
}

impl BackoffParams {
    pub fn validate(&self) -> Result<(), AccessError> {
        for cw in [self.cw_min, self.cw_max] {
            if !(cw as u64 + 1).is_power_of_two() {
                return Err(AccessError::NotPowerOfTwoMinusOne(cw));
            }
        }
        if self.cw_min > self.cw_max {
            return Err(AccessError::WindowOrder { min: self.cw_min, max: self.cw_max });
        }
        if self.slot_time == 0 {
            return Err(AccessError::ZeroSlot);
        }
        Ok(())
    }
}

impl Default for BackoffParams {
    fn default() -> Self {
        BackoffParams { cw_min: DEFAULT_CW_MIN, cw_max: DEFAULT_CW_MAX, slot_time: DEFAULT_SLOT_TIME, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessMode {
    /// Activated by en_medium.
    Initial,
    /// Activated by en_retry.
    Retry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenyReason {
    RetryExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessOutcome {
    Granted,
    Denied(DenyReason),
    /// Defer for this many backoff slots.
    Wait(u32),
}

/// Contention window after `exponent` doublings:
/// `min(cw_max, 2^exponent * (cw_min + 1) - 1)`.
pub fn contention_window(exponent: u32, bp: &BackoffParams) -> u32 {
    let base = u64::from(bp.cw_min) + 1;
    let cw = if exponent >= 32 { u64::MAX } else { (base << exponent) - 1 };
    cw.min(u64::from(bp.cw_max)) as u32
}

/// Uniform draw on `[0, contention_window(attempts)]`.
pub fn backoff_val(attempts: u32, bp: &BackoffParams, rng: &mut BackoffRng) -> u32 {
    let cw = contention_window(attempts, bp);
    (rng.next_u64() % (u64::from(cw) + 1)) as u32
}

/// One activation of the collision avoidance entity.
///
/// Retry mode counts an attempt up front. A busy medium (NAV non-zero or
/// carrier sensed) counts another. Once the count passes the threshold the
/// request is denied. A free medium grants an initial request at once; any
/// other path backs off with a window indexed by the attempts that came
/// before this one.
pub fn request_access(
    mode: AccessMode,
    nav: NavRegister,
    carrier_sense: bool,
    rc: RetryCounter,
    bp: &BackoffParams,
    rng: &mut BackoffRng,
) -> (AccessOutcome, RetryCounter) {
    let mut rc = rc;
    if mode == AccessMode::Retry {
        rc = rc.increment();
        if rc.exhausted() {
            return (AccessOutcome::Denied(DenyReason::RetryExhausted), rc);
        }
    }
    let busy = !nav.is_zero() || carrier_sense;
    if busy {
        rc = rc.increment();
        if rc.exhausted() {
            return (AccessOutcome::Denied(DenyReason::RetryExhausted), rc);
        }
    } else if mode == AccessMode::Initial {
        return (AccessOutcome::Granted, rc);
    }
    let b = backoff_val(rc.attempts - 1, bp, rng);
    (AccessOutcome::Wait(b), rc)
}

/// Virtual carrier sense state: the time at which the NAV expires.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavTimer {
    pub expires_at: u64,
}

impl NavTimer {
    pub fn remaining(&self, now: u64) -> u64 {
        self.expires_at.saturating_sub(now)
    }

    pub fn register(&self, now: u64) -> NavRegister {
        NavRegister(self.remaining(now).min(u64::from(u16::MAX)) as u16)
    }
}

/// Extends the NAV to cover an overheard duration if that reaches further
/// than the current reservation.
pub fn update_nav(nav: NavTimer, overheard_did: u16, now: u64) -> NavTimer {
    NavTimer { expires_at: nav.expires_at.max(now + u64::from(overheard_did)) }
}

/// Result of one slot boundary while backing off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotResult {
    /// Medium idle, countdown advanced; slots left.
    Counting(u32),
    /// Medium busy, countdown held.
    Frozen(u32),
    /// Countdown finished or restarted with a new outcome.
    Done(AccessOutcome),
    /// No backoff in progress.
    Idle,
}

/// Slot-clocked allocation control for one transmitter: wraps
/// [`request_access`] and runs the backoff countdown, which freezes while
/// the medium is busy.
#[derive(Debug, Clone)]
pub struct AllocationControl {
    counter: RetryCounter,
    params: BackoffParams,
    rng: BackoffRng,
    countdown: Option<u32>,
}

impl AllocationControl {
    pub fn new(params: BackoffParams, threshold: u32) -> Self {
        AllocationControl {
            counter: RetryCounter::new(threshold),
            params,
            rng: backoff_rng(params.seed),
            countdown: None,
        }
    }

    pub fn params(&self) -> &BackoffParams {
        &self.params
    }

    pub fn counter(&self) -> RetryCounter {
        self.counter
    }

    pub fn set_attempts(&mut self, attempts: u32) {
        self.counter.attempts = attempts;
    }

    pub fn remaining(&self) -> Option<u32> {
        self.countdown
    }

    pub fn request(&mut self, mode: AccessMode, nav: NavRegister, carrier_sense: bool) -> AccessOutcome {
        let (outcome, rc) = request_access(mode, nav, carrier_sense, self.counter, &self.params, &mut self.rng);
        self.counter = rc;
        self.countdown = match outcome {
            AccessOutcome::Wait(b) => Some(b),
            _ => None,
        };
        outcome
    }

    /// Advances one slot boundary. Reaching zero on an idle medium grants
    /// access; a countdown already at zero that meets a busy medium
    /// re-enters [`request_access`].
    pub fn tick(&mut self, nav: NavRegister, carrier_sense: bool) -> SlotResult {
        let Some(remaining) = self.countdown else {
            return SlotResult::Idle;
        };
        let busy = !nav.is_zero() || carrier_sense;
        if busy {
            if remaining == 0 {
                return SlotResult::Done(self.request(AccessMode::Initial, nav, carrier_sense));
            }
            return SlotResult::Frozen(remaining);
        }
        let left = remaining.saturating_sub(1);
        if left == 0 {
            self.countdown = None;
            SlotResult::Done(AccessOutcome::Granted)
        } else {
            self.countdown = Some(left);
            SlotResult::Counting(left)
        }
    }

    pub fn reset(&mut self) {
        self.counter = self.counter.reset();
        self.countdown = None;
    }
}
