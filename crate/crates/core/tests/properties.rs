use std::collections::BTreeSet;

use proptest::prelude::*;
use serde_json::json;

use swarmci::config::{parse_taskspec, IntRange, ScalingMode};
use swarmci::planner::{expand_axis, ScalePoint};
use swarmci::publisher::redact;
use swarmci::results::{
    compute_speedup, detect_regressions, BuildEntry, BuildSeries, ChangeKind, MetricRow,
    ResultTable,
};

/// Brute force: every `lo + k*step` (or `lo * 2^k`) up to `hi`, plus `hi`.
fn axis_oracle(lo: u32, hi: u32, step: Option<u32>) -> Vec<u32> {
    let mut set = BTreeSet::new();
    for v in lo..=hi {
        let hit = match step {
            Some(s) => (v - lo).is_multiple_of(s),
            None => v % lo == 0 && (v / lo).is_power_of_two(),
        };
        if hit {
            set.insert(v);
        }
    }
    set.insert(hi);
    set.into_iter().collect()
}

fn point() -> impl Strategy<Value = ScalePoint> {
    (1u32..=64, 1u32..=64).prop_map(|(n, p)| ScalePoint::new(n, p).unwrap())
}

fn metric_name() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("elapsed".to_string()),
        Just("cycles".to_string()),
        "[a-z][a-z0-9_.]{0,10}",
        "[a-z]{1,4} [a-z]{1,4}",
        "q,\"[a-z]{1,3}\"",
    ]
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e12f64..1e12,
        0.0f64..1.0,
        Just(0.0),
        Just(1e-300),
        Just(f64::MAX),
        (1u32..100000).prop_map(f64::from),
    ]
}

fn table() -> impl Strategy<Value = ResultTable> {
    let build = "[0-9]{1,6}|local-[0-9]{10}";
    (
        build,
        prop::collection::vec((point(), metric_name(), value()), 0..24),
    )
        .prop_map(|(b, rows)| {
            let mut seen = BTreeSet::new();
            let rows = rows
                .into_iter()
                .filter(|(p, m, _)| seen.insert((*p, m.clone())))
                .map(|(p, m, v)| MetricRow::new(p, m, v))
                .collect();
            ResultTable::new(b, rows).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn csv_write_is_deterministic_and_roundtrips(t in table()) {
        let a = t.to_csv();
        let b = t.clone().to_csv();
        prop_assert_eq!(&a, &b);
        prop_assert!(!a.contains('\r'));
        let back = ResultTable::from_csv(t.build_num(), &a).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.to_csv(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn linear_axis_matches_oracle(lo in 1u32..=256, span in 0u32..=255, step in 1u32..=40) {
        let hi = (lo + span).min(256);
        let got = expand_axis(IntRange { min: lo, max: hi }, ScalingMode::Linear { step }).unwrap();
        prop_assert_eq!(got, axis_oracle(lo, hi, Some(step)));
    }

    #[test]
    fn config_roundtrips(
        name in "[a-z][a-z0-9_-]{0,15}",
        n in (1u32..=64, 0u32..=64),
        p in (1u32..=64, 0u32..=64),
        mode in prop_oneof![Just("log"), Just("log2"), Just("linear")],
        step in 1u32..=8,
        repeats in 1u32..=5,
        parser in prop::option::of("[a-z]{1,8}\\.sh"),
    ) {
        let mut scal = json!({
            "script": "run.sh",
            "num_of_nodes": [n.0, n.0 + n.1],
            "proc_per_node": [p.0, p.0 + p.1],
            "mode": mode,
            "repeats": repeats,
        });
        if mode == "linear" {
            scal["step"] = json!(step);
        }
        let mut doc = json!({
            "task_conf": {"task_name": name, "exec_target": "simulated", "scalability_test": scal},
            "docker_conf": {"docker_img_tag": "img:1", "docker_username": "u"},
            "exec_env_conf": {"seed": 3},
        });
        if let Some(parser) = parser {
            doc["task_conf"]["output_parser"] = json!(parser);
        }
        let spec = parse_taskspec(doc.to_string().as_bytes()).unwrap();
        let again = parse_taskspec(spec.to_json().to_string().as_bytes()).unwrap();
        prop_assert_eq!(again, spec);
    }

    #[test]
    fn config_parser_never_panics(raw in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_taskspec(&raw);
    }

    #[test]
    fn config_parser_never_panics_on_json_shapes(
        nodes in prop::collection::vec(-3i64..40, 0..4),
        mode in "[a-z0-9]{0,5}",
        name in ".{0,6}",
    ) {
        let doc = json!({
            "task_conf": {"task_name": name, "exec_target": "simulated",
                "scalability_test": {"script": "s", "num_of_nodes": nodes, "proc_per_node": [1, 2], "mode": mode}},
            "docker_conf": {"docker_img_tag": "i"},
        });
        let _ = parse_taskspec(doc.to_string().as_bytes());
    }

    #[test]
    fn speedup_is_scale_invariant(
        values in prop::collection::vec(0.001f64..1e6, 1..12),
        c in 1e-3f64..1e3,
    ) {
        let rows = |k: f64| -> Vec<MetricRow> {
            values
                .iter()
                .enumerate()
                .map(|(i, v)| MetricRow::new(ScalePoint::new(1, i as u32 + 1).unwrap(), "elapsed", v * k))
                .collect()
        };
        let base = ScalePoint::new(1, 1).unwrap();
        let a = compute_speedup(&ResultTable::new("1", rows(1.0)).unwrap(), "elapsed", base).unwrap();
        let b = compute_speedup(&ResultTable::new("1", rows(c)).unwrap(), "elapsed", base).unwrap();
        prop_assert_eq!(a.len(), values.len());
        for ((pa, sa), (pb, sb)) in a.iter().zip(&b) {
            prop_assert_eq!(pa, pb);
            prop_assert!((sa - sb).abs() <= 1e-9 * sa.abs().max(1.0));
        }
        prop_assert_eq!(a[0].1, 1.0);
    }

    #[test]
    fn single_step_change_is_found(
        base in 1.0f64..1000.0,
        noise in prop::collection::vec(0.97f64..1.03, 4..30),
        at in any::<prop::sample::Index>(),
        factor in prop_oneof![0.3f64..0.8, 1.3f64..3.0],
    ) {
        let step_at = 1 + at.index(noise.len() - 1);
        let mut series = BuildSeries::new();
        let point = ScalePoint::new(2, 5).unwrap();
        for (i, n) in noise.iter().enumerate() {
            let v = base * n * if i >= step_at { factor } else { 1.0 };
            let build = (i + 1).to_string();
            series.push(BuildEntry {
                build_num: build.clone(),
                commit_id: format!("c{i}"),
                table: ResultTable::new(build, vec![MetricRow::new(point, "elapsed", v)]).unwrap(),
            }).unwrap();
        }
        let flags = detect_regressions(&series, "elapsed", point, 10.0).unwrap();
        prop_assert_eq!(flags.len(), 1);
        prop_assert_eq!(&flags[0].to_build, &(step_at + 1).to_string());
        let want = if factor < 1.0 { ChangeKind::Improvement } else { ChangeKind::Degradation };
        prop_assert_eq!(flags[0].kind, want);
    }

    #[test]
    fn redact_removes_every_secret(
        parts in prop::collection::vec(".{0,8}", 1..6),
        secrets in prop::collection::vec("[a-c*]{1,4}", 1..4),
    ) {
        let mut text = String::new();
        for (i, part) in parts.iter().enumerate() {
            text.push_str(part);
            text.push_str(&secrets[i % secrets.len()]);
        }
        let s: Vec<&str> = secrets.iter().map(String::as_str).collect();
        let once = redact(&text, &s);
        for secret in &s {
            if !secret.chars().all(|c| c == '*') {
                prop_assert!(!once.contains(secret), "{secret:?} left in {once:?}");
            }
        }
        prop_assert_eq!(redact(&once, &s), once.clone());
    }

    #[test]
    fn redact_without_matches_is_identity(text in "[d-z ]{0,40}", secret in "[a-c]{1,5}") {
        prop_assert_eq!(redact(&text, &[&secret]), text);
    }
}

#[test]
fn log_axis_matches_oracle_exhaustively() {
    for hi in 1..=256u32 {
        for lo in 1..=hi {
            let got = expand_axis(IntRange { min: lo, max: hi }, ScalingMode::Log2).unwrap();
            assert_eq!(got, axis_oracle(lo, hi, None), "lo={lo} hi={hi}");
        }
    }
}
