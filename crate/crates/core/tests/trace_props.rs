use meshmac::trace::{
    assert_order, export_json, export_waveform, parse_json, parse_waveform, Edge, Signal, Trace, TraceValue,
};
use proptest::prelude::*;

fn value_for(signal: Signal, raw: u64) -> TraceValue {
    match signal.width() {
        1 => TraceValue::Bit(raw & 1 == 1),
        w => TraceValue::bits(w, raw & ((1u64 << w) - 1)),
    }
}

prop_compose! {
    fn trace()(steps in proptest::collection::vec((0u64..5, 0usize..3, proptest::sample::select(Signal::ALL.to_vec()), any::<u64>()), 0..60)) -> Trace {
        let mut t = Trace::new();
        t.set_metadata("seed", "9");
        let mut now = 0;
        for (dt, scope, sig, raw) in steps {
            now += dt;
            t.record_signal(now, &format!("n{scope}"), sig, value_for(sig, raw)).unwrap();
        }
        t
    }
}

proptest! {
    #[test]
    fn waveform_export_parse_export_is_idempotent(t in trace()) {
        let text = export_waveform(&t);
        let back = parse_waveform(&text).unwrap();
        prop_assert_eq!(export_waveform(&back), text);
        prop_assert_eq!(back, t);
    }

    #[test]
    fn json_round_trip(t in trace()) {
        let back = parse_json(&export_json(&t)).unwrap();
        prop_assert_eq!(back.records(), t.records());
    }

    #[test]
    fn satisfied_orders_stay_satisfied_under_subsequence(t in trace(), mask in any::<u64>()) {
        // Every observed edge sequence satisfies itself; dropping any subset
        // of entries must keep it satisfied.
        let edges: Vec<Edge> = t.edges("n0").into_iter().map(|e| e.edge).take(64).collect();
        prop_assert!(assert_order(&t, "n0", &edges));
        let sub: Vec<Edge> = edges.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| *e).collect();
        prop_assert!(assert_order(&t, "n0", &sub));
    }
}

#[test]
fn empty_trace_exports_header_only() {
    let text = export_waveform(&Trace::new());
    assert!(text.ends_with("$enddefinitions $end\n"));
    assert!(!text.contains('#'));
}

#[test]
fn one_change_gives_one_change_line() {
    let mut t = Trace::new();
    t.record(3, "dut", "en_medium", true).unwrap();
    let text = export_waveform(&t);
    let body = text.split("$enddefinitions $end\n").nth(1).unwrap();
    assert_eq!(body.lines().filter(|l| !l.starts_with('#')).count(), 1);
}
