//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use meshmac::access::{
    backoff_rng, backoff_val, contention_window, AccessMode, AccessOutcome, AllocationControl, BackoffParams,
    DenyReason, SlotResult,
};
use meshmac::builder::{build_frame, compute_did, BufferDescriptor, NavRegister, SequenceState, StationRole};
use meshmac::codec::{decode, encode, serialize_tx, CodecError};
use meshmac::conformance::{drive_path, handshake_order, Path};
use meshmac::frame::{classify, subtype_code, FcFlags, FrameKind, MacAddress, SubtypeCode, SubtypeTable};
use meshmac::sim::{run, AccessParams, MediumParams, NodeConfig, SimConfig, SimReport, TrafficItem};
use meshmac::trace::{assert_order, export_waveform, Edge, Signal};
use meshmac::txctl::{StimulusEvent, TimeoutKind};
use proptest::test_runner::{Config, TestRunner};
use statrs::distribution::{ChiSquared, ContinuousCDF};

mod common;

// Tolerances and pinned values.
const RETRY_THRESHOLD: u32 = 10;
const ROUNDTRIP_CASES: u32 = 1000;
const CHI_SQUARE_DRAWS: u64 = 100_000;
const CHI_SQUARE_MIN_P: f64 = 0.01;
const CW_AT_ONE: u32 = 31;
const CW_MAX: u32 = 1023;
const SLOT: u64 = 20;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1_subtypes() -> Outcome {
    let expected = [
        (FrameKind::Ack, "101011"),
        (FrameKind::Data, "010000"),
        (FrameKind::Cts, "010011"),
        (FrameKind::Rts, "101101"),
        (FrameKind::PsPoll, "100101"),
        (FrameKind::CfpEnd, "010110"),
    ];
    for (kind, bits) in expected {
        let got = subtype_code(kind).map_err(|e| e.to_string())?;
        ensure(got.to_string() == bits, || format!("{kind}: {got} != {bits}"))?;
    }
    let mut hits = 0;
    for v in 0..64u8 {
        let code = SubtypeCode::new(v).unwrap();
        if let Ok(kind) = classify(code) {
            hits += 1;
            ensure(subtype_code(kind) == Ok(code), || format!("classify/subtype_code disagree at {code}"))?;
        }
    }
    ensure(hits == 6, || format!("{hits} codes classify, want 6"))?;
    Ok("six codes exact, bijective with classify".into())
}

fn mac(n: u8) -> MacAddress {
    MacAddress([2, 0, 0, 0, 0, n])
}

fn two_node(silent: bool) -> SimConfig {
    SimConfig {
        seed: 42,
        horizon: 1_000_000,
        medium: MediumParams::default(),
        access: AccessParams { threshold: RETRY_THRESHOLD, ..AccessParams::default() },
        nodes: vec![
            NodeConfig {
                id: 0,
                mac: mac(1),
                role: StationRole::MeshPoint,
                silent: false,
                traffic: vec![TrafficItem { at: 0, dest: 1, len: 64 }],
            },
            NodeConfig { id: 1, mac: mac(2), role: StationRole::MeshPoint, silent, traffic: vec![] },
        ],
        hidden: vec![],
        trace_tx_line: true,
    }
}

fn handshake_edges(report: &SimReport, scope: &str) -> Vec<Edge> {
    let set = [
        Signal::EnBuildframe,
        Signal::FrameDone,
        Signal::EnMedium,
        Signal::AccessGranted,
        Signal::Transmitted,
        Signal::TransmitComplete,
    ];
    report
        .trace
        .edges(scope)
        .into_iter()
        .map(|e| e.edge)
        .filter(|e| set.contains(&e.signal) && (e.rising || e.signal == Signal::EnBuildframe))
        .collect()
}

fn criterion_2_fsm_traces() -> Outcome {
    // Isolated controllers, one per stimulus path.
    for path in [Path::RecData, Path::RecCts, Path::RecRts, Path::Msdurdy] {
        let (_, trace) = drive_path(&SubtypeTable::STANDARD, path)?;
        let mut order = vec![Edge::rise(path.trigger())];
        order.extend(handshake_order());
        ensure(assert_order(&trace, "tx", &order), || format!("{path:?}: order violated"))?;
        let exact: Vec<Edge> = trace
            .edges("tx")
            .into_iter()
            .map(|e| e.edge)
            .filter(|e| {
                e.signal != path.trigger()
                    && e.signal != Signal::FrameSubtype
                    && (e.rising || e.signal == Signal::EnBuildframe)
            })
            .collect();
        ensure(exact == handshake_order(), || format!("{path:?}: edges not exact"))?;
    }

    // The same orderings inside a simulated exchange.
    let report = run(two_node(false)).map_err(|e| e.to_string())?;
    let twice: Vec<Edge> = handshake_order().into_iter().chain(handshake_order()).collect();
    for scope in ["node0", "node1"] {
        let got = handshake_edges(&report, scope);
        ensure(got == twice, || format!("{scope}: handshake edges {got:?}"))?;
    }
    let with = |trigger: Signal| {
        let mut v = vec![Edge::rise(trigger)];
        v.extend(handshake_order());
        v
    };
    let sender: Vec<Edge> = with(Signal::Msdurdy).into_iter().chain(with(Signal::RecCts)).collect();
    let responder: Vec<Edge> = with(Signal::RecRts).into_iter().chain(with(Signal::RecData)).collect();
    ensure(assert_order(&report.trace, "node0", &sender), || "node0 msdurdy/rec_cts order".into())?;
    ensure(assert_order(&report.trace, "node1", &responder), || "node1 rec_rts/rec_data order".into())?;

    // Missing ACK raises en_retry.
    let (mut ctl, mut trace) = drive_path(&SubtypeTable::STANDARD, Path::RecCts)?;
    ctl.handle(100, &StimulusEvent::Timeout(TimeoutKind::Ack), &mut trace).map_err(|e| e.to_string())?;
    ensure(assert_order(&trace, "tx", &[Edge::rise(Signal::TransmitComplete), Edge::rise(Signal::EnRetry)]), || {
        "en_retry not raised after missing ACK".into()
    })?;
    Ok("4 paths exact in isolation and in simulation; missing ACK raises en_retry".into())
}

fn criterion_3_did() -> Outcome {
    for nav in 0..=u16::MAX {
        let n = NavRegister(nav);
        let p = compute_did(FrameKind::PsPoll, n);
        ensure(p & 0b11 == 0b11 && p >> 2 == nav >> 2, || format!("ps-poll nav={nav}"))?;
        ensure(compute_did(FrameKind::CfpEnd, n) == 1, || format!("cfp-end nav={nav}"))?;
        for kind in [FrameKind::Data, FrameKind::Ack, FrameKind::Cts, FrameKind::Rts] {
            let d = compute_did(kind, n);
            ensure(d & 1 == 0 && d >> 1 == nav >> 1, || format!("{kind} nav={nav}"))?;
        }
    }
    Ok("65536 NAV values".into())
}

fn criterion_4_collision_avoidance() -> Outcome {
    let params = |seed| BackoffParams { seed, ..BackoffParams::default() };

    // (a) carrier busy, NAV clear: access_granted never rises.
    let mut ac = AllocationControl::new(params(1), RETRY_THRESHOLD);
    let first = ac.request(AccessMode::Initial, NavRegister(0), true);
    ensure(matches!(first, AccessOutcome::Wait(_)), || format!("(a) busy request gave {first:?}"))?;
    for _ in 0..10_000 {
        match ac.tick(NavRegister(0), true) {
            SlotResult::Done(AccessOutcome::Granted) => return Err("(a) granted while busy".into()),
            SlotResult::Done(AccessOutcome::Denied(_)) => break,
            _ => {}
        }
    }

    // (b) the eleventh busy attempt passes threshold 10.
    let mut ac = AllocationControl::new(params(2), RETRY_THRESHOLD);
    let outcomes: Vec<AccessOutcome> =
        (0..=RETRY_THRESHOLD).map(|_| ac.request(AccessMode::Initial, NavRegister(0), true)).collect();
    ensure(outcomes[..RETRY_THRESHOLD as usize].iter().all(|o| matches!(o, AccessOutcome::Wait(_))), || {
        format!("(b) early denial {outcomes:?}")
    })?;
    ensure(outcomes[RETRY_THRESHOLD as usize] == AccessOutcome::Denied(DenyReason::RetryExhausted), || {
        format!("(b) final outcome {:?}", outcomes.last())
    })?;

    // (c) in the simulated clock: each uninterrupted backoff ends in a
    // grant exactly backoff_val slots after it started.
    let mut cfg = two_node(false);
    cfg.nodes.push(NodeConfig {
        id: 2,
        mac: mac(3),
        role: StationRole::MeshPoint,
        silent: false,
        traffic: vec![TrafficItem { at: 0, dest: 1, len: 64 }],
    });
    let mut checked = 0;
    for seed in 0..20 {
        cfg.seed = seed;
        let report = run(cfg.clone()).map_err(|e| e.to_string())?;
        for scope in ["node0", "node2"] {
            let recs: Vec<_> = report.trace.records().iter().filter(|r| r.scope == scope).collect();
            let mut start: Option<(u64, u64)> = None;
            let mut paused_at: Option<u64> = None;
            for r in recs {
                match (r.signal, r.value.is_high()) {
                    (Signal::EnBackoff, true) => {
                        start = None;
                        paused_at = None;
                    }
                    (Signal::BackoffVal, _) if start.is_none() => start = Some((r.time, r.value.as_u64())),
                    (Signal::StartCount, false) => paused_at = paused_at.or(Some(r.time)),
                    (Signal::AccessGranted, true) => {
                        // start_count also drops in the grant instant itself.
                        let frozen = paused_at.is_some_and(|t| t < r.time);
                        if let (Some((t0, b)), false) = (start, frozen) {
                            ensure(r.time - t0 == b * SLOT, || {
                                format!("(c) seed {seed} {scope}: backoff {b} from {t0} granted at {}", r.time)
                            })?;
                            checked += 1;
                        }
                        start = None;
                    }
                    _ => {}
                }
            }
        }
    }
    ensure(checked >= 20, || format!("(c) only {checked} uninterrupted backoffs observed"))?;
    Ok(format!(
        "(a) never granted while busy, (b) denied on attempt 11, (c) {checked} grants at exactly backoff_val slots"
    ))
}

fn criterion_5_codec() -> Outcome {
    for kind in FrameKind::ENCODABLE {
        let mut runner =
            TestRunner::new(Config { cases: ROUNDTRIP_CASES, failure_persistence: None, ..Config::default() });
        runner
            .run(&common::frame_of(kind), |f| {
                let bytes = encode(&f).unwrap();
                proptest::prop_assert_eq!(&decode(&bytes).unwrap(), &f);
                proptest::prop_assert_eq!(serialize_tx(&f).unwrap().len(), 8 * bytes.len());
                Ok(())
            })
            .map_err(|e| format!("{kind}: {e}"))?;
    }
    let buf = BufferDescriptor {
        ra: Some(mac(2)),
        ta: Some(mac(1)),
        da: Some(mac(2)),
        sa: Some(mac(1)),
        payload: b"acceptance fixture".to_vec(),
        ..BufferDescriptor::default()
    };
    let fixture = build_frame(
        FrameKind::Data,
        &buf,
        StationRole::MeshPoint,
        NavRegister(122),
        SequenceState::default(),
        FcFlags::mesh_data(),
    )
    .map_err(|e| e.to_string())?
    .into_frame();
    let bytes = encode(&fixture).map_err(|e| e.to_string())?;
    for bit in 0..bytes.len() * 8 {
        let mut b = bytes.clone();
        b[bit / 8] ^= 1 << (bit % 8);
        ensure(matches!(decode(&b), Err(CodecError::BadFcs { .. })), || format!("bit {bit} flip not caught"))?;
    }
    Ok(format!(
        "{ROUNDTRIP_CASES} frames x {} kinds; {} single-bit flips caught",
        FrameKind::ENCODABLE.len(),
        bytes.len() * 8
    ))
}

fn criterion_6_end_to_end() -> Outcome {
    let a = run(two_node(false)).map_err(|e| e.to_string())?;
    let b = run(two_node(false)).map_err(|e| e.to_string())?;
    ensure(export_waveform(&a.trace) == export_waveform(&b.trace), || "waveforms differ across runs".into())?;
    let n0 = a.node(0).ok_or("node 0 missing")?;
    ensure(n0.delivered == 1 && n0.retries == 0, || {
        format!("clean: delivered {} retries {}", n0.delivered, n0.retries)
    })?;

    let s = run(two_node(true)).map_err(|e| e.to_string())?;
    let n0 = s.node(0).ok_or("node 0 missing")?;
    let retried = s.transmissions.iter().filter(|t| t.retry).count();
    ensure(n0.retries == 10 && retried == 10, || format!("silent: retries {} (flagged {retried})", n0.retries))?;
    ensure(n0.failed == 1 && n0.delivered == 0, || format!("silent: failed {} delivered {}", n0.failed, n0.delivered))?;
    let last_tx = s.transmissions.last().map_or(0, |t| t.end);
    ensure(s.end_time >= last_tx, || "transmission after failure".into())?;
    Ok("waveforms byte-identical; clean 1 delivered/0 retries; silent 10 retries then failure".into())
}

fn criterion_7_backoff_stats() -> Outcome {
    let bp = BackoffParams::default();
    let mut rng = backoff_rng(2024);
    let mut counts = vec![0u64; CW_AT_ONE as usize + 1];
    for _ in 0..CHI_SQUARE_DRAWS {
        let v = backoff_val(1, &bp, &mut rng);
        ensure(v <= CW_AT_ONE, || format!("draw {v} outside [0,{CW_AT_ONE}]"))?;
        counts[v as usize] += 1;
    }
    let expected = CHI_SQUARE_DRAWS as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat);
    ensure(p > CHI_SQUARE_MIN_P, || format!("chi2 {stat:.2} p {p:.4}"))?;
    ensure(contention_window(1, &bp) == CW_AT_ONE, || "CW(1) != 31".into())?;
    for k in 1..10 {
        let (prev, cur) = (contention_window(k - 1, &bp), contention_window(k, &bp));
        ensure(cur == ((prev + 1) * 2 - 1).min(CW_MAX), || format!("CW({k}) = {cur}"))?;
    }
    ensure(contention_window(64, &bp) == CW_MAX, || "CW does not clamp".into())?;
    Ok(format!("chi2 {stat:.2}, p {p:.3}; CW doubles to {CW_MAX}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 subtype conformance", criterion_1_subtypes),
        ("2 FSM trace conformance", criterion_2_fsm_traces),
        ("3 Duration/ID conformance", criterion_3_did),
        ("4 collision avoidance", criterion_4_collision_avoidance),
        ("5 codec properties", criterion_5_codec),
        ("6 end-to-end determinism", criterion_6_end_to_end),
        ("7 backoff statistics", criterion_7_backoff_stats),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {}/{} passed in {:.2?}", criteria.len() - failed, criteria.len(), started.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
