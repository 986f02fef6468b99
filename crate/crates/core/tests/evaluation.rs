mod common;

use rand::seq::SliceRandom;
use rand::Rng;

use common::{metrics_oracle, rng, tiny_dataset};
use tagformer::eval::{confusion, evaluate, metrics, run_ablation, AblationConfig, MetricsReport};
use tagformer::features::Source;
use tagformer::model::{GraphormerConfig, ModelKind};
use tagformer::train::{split_by_year, Partition, SamplingConfig, SplitBoundaries, TrainConfig};

fn random_case(seed: u64, n: usize, c: usize) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng(seed);
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
    let preds = labels
        .iter()
        .map(|&l| {
            if r.random_bool(0.4) {
                l
            } else {
                r.random_range(0..c)
            }
        })
        .collect();
    (preds, labels)
}

fn check_against_oracle(report: &MetricsReport, preds: &[usize], labels: &[usize], c: usize) {
    let (acc, per_class) = metrics_oracle(preds, labels, c);
    assert_eq!(report.accuracy, acc);
    let mean = |f: fn(&(f64, f64, f64)) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    assert!((report.macro_precision - mean(|x| x.0)).abs() < 1e-12);
    assert!((report.macro_recall - mean(|x| x.1)).abs() < 1e-12);
    assert!((report.macro_f1 - mean(|x| x.2)).abs() < 1e-12);
    for (k, (got, want)) in report.per_class.iter().zip(&per_class).enumerate() {
        assert!((got.precision - want.0).abs() < 1e-12, "class {k}");
        assert!((got.recall - want.1).abs() < 1e-12, "class {k}");
        assert!((got.f1 - want.2).abs() < 1e-12, "class {k}");
        assert!(got.f1.is_finite());
    }
}

#[test]
fn confusion_matches_tally() {
    let (preds, labels) = random_case(1, 1000, 7);
    let cm = confusion(&preds, &labels, 7).unwrap();
    let mut tally = [[0u64; 7]; 7];
    for (&p, &l) in preds.iter().zip(&labels) {
        tally[l][p] += 1;
    }
    for t in 0..7 {
        for p in 0..7 {
            assert_eq!(cm.get(t, p), tally[t][p]);
        }
    }
    assert_eq!(cm.total(), 1000);
    assert_eq!(
        cm.trace(),
        preds.iter().zip(&labels).filter(|(p, l)| p == l).count() as u64
    );
}

#[test]
fn perfect_predictions() {
    let labels = [0, 1, 2, 2, 1, 0, 3];
    let cm = confusion(&labels, &labels, 4).unwrap();
    for t in 0..4 {
        for p in 0..4 {
            assert_eq!(cm.get(t, p) > 0, t == p);
        }
    }
    let m = metrics(&cm);
    assert_eq!(
        (m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1),
        (1.0, 1.0, 1.0, 1.0)
    );
}

#[test]
fn bad_inputs_are_errors() {
    assert!(confusion(&[], &[], 3).is_err());
    assert!(confusion(&[0, 1], &[0], 3).is_err());
    let msg = confusion(&[0, 3], &[0, 1], 3).unwrap_err().to_string();
    assert!(msg.contains("sample 1"), "{msg}");
}

#[test]
fn zero_denominator_counts_as_zero() {
    // Only class 0 is ever predicted; class 1 precision is undefined.
    let m = evaluate(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
    assert_eq!(m.per_class[0].precision, 0.5);
    assert_eq!(m.per_class[1].precision, 0.0);
    assert_eq!(m.macro_precision, 0.25);
    assert_eq!(m.per_class[1].f1, 0.0);
    assert_eq!(m.macro_recall, 0.5);

    // A class absent from both sides still counts in the macro mean.
    let m = evaluate(&[0, 1], &[0, 1], 3).unwrap();
    assert!((m.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(m.per_class[2].support, 0);
}

#[test]
fn metrics_match_loop_oracle() {
    for (seed, c, n) in [(2, 2, 50), (3, 5, 400), (4, 40, 1000), (5, 40, 30)] {
        let (preds, labels) = random_case(seed, n, c);
        let report = evaluate(&preds, &labels, c).unwrap();
        check_against_oracle(&report, &preds, &labels, c);
        let all = [
            report.accuracy,
            report.macro_precision,
            report.macro_recall,
            report.macro_f1,
        ];
        assert!(all.iter().all(|v| (0.0..=1.0).contains(v)));
        let support: u64 = report.per_class.iter().map(|k| k.support).sum();
        assert_eq!(support, n as u64);
    }
}

#[test]
fn macro_metrics_survive_class_relabeling() {
    let c = 9;
    let (preds, labels) = random_case(6, 500, c);
    let mut perm: Vec<usize> = (0..c).collect();
    perm.shuffle(&mut rng(7));
    let relabel = |v: &[usize]| v.iter().map(|&x| perm[x]).collect::<Vec<_>>();
    let a = evaluate(&preds, &labels, c).unwrap();
    let b = evaluate(&relabel(&preds), &relabel(&labels), c).unwrap();
    assert_eq!(a.accuracy, b.accuracy);
    assert!((a.macro_precision - b.macro_precision).abs() < 1e-12);
    assert!((a.macro_recall - b.macro_recall).abs() < 1e-12);
    assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
    for k in 0..c {
        assert_eq!(a.per_class[k], b.per_class[perm[k]]);
    }
}

#[test]
fn report_json_shape() {
    let m = evaluate(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
    let v: serde_json::Value = serde_json::to_value(&m).unwrap();
    for key in [
        "accuracy",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "per_class",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let back: MetricsReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, m);
}

#[test]
fn ablation_names_parse_against_bindings() {
    let cfg = AblationConfig::default();
    let specs: Vec<_> = cfg
        .configurations
        .iter()
        .map(|n| cfg.parse(n).unwrap())
        .collect();
    assert_eq!(specs.len(), 5);
    assert_eq!(specs[3].kind, ModelKind::NodeMlp);
    assert_eq!(specs[3].sources, Source::ALL);
    assert_eq!(specs[4].kind, ModelKind::Graphormer);
    assert_eq!(specs[2].sources, vec![Source::Expl]);
    let err = cfg.parse("Graphormer + Q").unwrap_err().to_string();
    assert!(
        err.contains("\"Q\"") && err.contains("Graphormer, E, P, TA"),
        "{err}"
    );
    assert!(cfg.parse("Graphormer").is_err());

    let mut rebound = cfg.clone();
    rebound.bindings.insert("TA".into(), vec![Source::Text]);
    assert_eq!(
        rebound.parse("Graphormer + TA").unwrap().sources,
        vec![Source::Text]
    );
}

#[test]
fn ablation_emits_sorted_rows() {
    let data = tiny_dataset(120, 3, 8);
    let split = split_by_year(&data.labels, &data.years, &SplitBoundaries::default()).unwrap();
    let model = GraphormerConfig {
        num_layers: 1,
        num_heads: 2,
        d_model: 8,
        d_ffn: 16,
        max_spd: 3,
        max_degree_bucket: 8,
        ..GraphormerConfig::default()
    };
    let train = TrainConfig {
        epochs: 2,
        batch_size: 16,
        seed: 1,
        ..TrainConfig::default()
    };
    let sampling = SamplingConfig {
        hops: 1,
        max_nodes: 6,
    };
    let table = run_ablation(
        &data,
        &split,
        &model,
        &train,
        sampling,
        &AblationConfig::default(),
        Partition::Test,
    )
    .unwrap();
    let names: Vec<&str> = table.rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "Graphormer + E",
            "Graphormer + P",
            "Graphormer + TA",
            "Graphormer + TA + P + E",
            "TA + P + E"
        ]
    );
    assert_eq!(table.split, Partition::Test);
    let text = table.render();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().next().unwrap().starts_with("configuration"));

    let again = run_ablation(
        &data,
        &split,
        &model,
        &train,
        sampling,
        &AblationConfig::default(),
        Partition::Test,
    )
    .unwrap();
    assert_eq!(table, again);

    let bad = AblationConfig {
        configurations: vec!["Graphormer + nope".into()],
        ..AblationConfig::default()
    };
    assert!(run_ablation(
        &data,
        &split,
        &model,
        &train,
        sampling,
        &bad,
        Partition::Val
    )
    .is_err());
}
