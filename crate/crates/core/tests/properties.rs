use std::collections::BTreeMap;

use proptest::prelude::*;

use uwbfp::calibration::{fit_pair, CalibrationModel, LinearRangingEq, ModelKind};
use uwbfp::eval::{emit_report, parse_report, ErrorReport, PointError, ReportFormat};
use uwbfp::fingerprint::{cell_vertex, vertex_to_label, CellLabel, GridSpec};
use uwbfp::learners::{knn_train, soft_vote, ClassProbabilities, TrainingSet, VoteWeights};
use uwbfp::preprocess::{correct_range, mad_filter, CorrectionPolicy, MadParams, SampleSeries};
use uwbfp::simulator::{
    read_measurements, simulate_campaign, write_measurements, Campaign, NoiseConfig,
};
use uwbfp::{distance, trilaterate, AnchorLayout, PointMm, RangeTriple};

fn in_area() -> impl Strategy<Value = PointMm> {
    (0.0..=1000.0f64, 0.0..=2000.0f64).prop_map(|(x, y)| PointMm::new(x, y))
}

fn distribution() -> impl Strategy<Value = ClassProbabilities> {
    prop::collection::btree_map(0u32..10, 1usize..20, 1..6).prop_map(|m| {
        let counts: BTreeMap<CellLabel, usize> =
            m.into_iter().map(|(k, v)| (CellLabel(k), v)).collect();
        ClassProbabilities::from_counts(&counts)
    })
}

proptest! {
    #[test]
    fn distance_is_a_metric(p in in_area(), q in in_area(), r in in_area()) {
        prop_assert_eq!(distance(p, q), distance(q, p));
        prop_assert!(distance(p, r) <= distance(p, q) + distance(q, r) + 1e-9);
        prop_assert_eq!(distance(p, p), 0.0);
    }

    #[test]
    fn trilateration_commutes_with_translation(p in in_area(), dx in -5000.0..5000.0f64, dy in -5000.0..5000.0f64) {
        let anchors = AnchorLayout::default();
        let moved = anchors.translate(dx, dy);
        let est = trilaterate(&moved, &moved.ranges_from(p.translate(dx, dy))).unwrap();
        prop_assert!(distance(est, p.translate(dx, dy)) < 1e-6);
    }

    #[test]
    fn mad_filter_keeps_a_nonempty_ordered_subset(values in prop::collection::vec(1.0..5000.0f64, 1..60)) {
        let kept = mad_filter(&SampleSeries::new(values.clone()).unwrap(), MadParams::default()).unwrap();
        prop_assert!(!kept.is_empty());
        // Survivors appear in the input in the same relative order.
        let mut it = values.iter();
        for v in kept.values() {
            prop_assert!(it.any(|x| x == v));
        }
    }

    #[test]
    fn correction_never_inflates(d in 1.0..5000.0f64, ratio in 0.5..=1.0f64) {
        let policy = CorrectionPolicy::with_ratio(ratio).unwrap();
        let c = correct_range(d, &policy);
        prop_assert!(c <= d);
        if d <= CorrectionPolicy::DEFAULT_THRESHOLD {
            prop_assert_eq!(c, d);
        }
        prop_assert_eq!(correct_range(d, &CorrectionPolicy::none()), d);
    }

    #[test]
    fn fit_pair_recovers_line(a in 0.5..2.0f64, b in -200.0..200.0f64, t1 in 500.0..2000.0f64, gap in 10.0..1000.0f64) {
        let t2 = t1 + gap;
        let eq = fit_pair(t1, a * t1 + b, t2, a * t2 + b).unwrap();
        prop_assert!((eq.a - a).abs() < 1e-9 * a);
        prop_assert!((eq.b - b).abs() < 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn model_text_round_trip(a in 0.5..2.0f64, b in -200.0..200.0f64, k in 0usize..4) {
        let m = CalibrationModel::uniform(ModelKind::ALL[k], LinearRangingEq::new(a, b).unwrap());
        prop_assert_eq!(CalibrationModel::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn every_area_point_lands_in_its_cell(p in in_area()) {
        let spec = GridSpec::default();
        let label = vertex_to_label(&spec, p).unwrap();
        let v = cell_vertex(&spec, label).unwrap();
        prop_assert!(v.x <= p.x && p.x <= v.x + spec.spacing());
        prop_assert!(v.y <= p.y && p.y <= v.y + spec.spacing());
        prop_assert_eq!(vertex_to_label(&spec, v).unwrap(), label);
    }

    #[test]
    fn one_nn_returns_training_label(points in prop::collection::btree_set((0u32..200, 0u32..200, 0u32..200), 1..40)) {
        let rows: Vec<(RangeTriple, CellLabel)> = points
            .iter()
            .enumerate()
            .map(|(i, &(a, b, c))| (RangeTriple::from_array([a as f64, b as f64, c as f64]), CellLabel(i as u32)))
            .collect();
        let knn = knn_train(&TrainingSet::new(rows.clone()).unwrap(), 1).unwrap();
        for (r, l) in &rows {
            prop_assert_eq!(knn.predict(r), *l);
        }
    }

    #[test]
    fn soft_vote_ignores_common_weight_scale(pk in distribution(), pt in distribution(), wk in 0.1..10.0f64, wt in 0.1..10.0f64, c in 1u32..16) {
        let c = c as f64;
        let base = VoteWeights::new(wk, wt).unwrap();
        let scaled = VoteWeights::new(wk * c, wt * c).unwrap();
        // Power-of-two scales are exact in binary floating point.
        if c.log2().fract() == 0.0 {
            prop_assert_eq!(soft_vote(&pk, &pt, base), soft_vote(&pk, &pt, scaled));
        }
        let label = soft_vote(&pk, &pt, base);
        prop_assert!(pk.mass(label) > 0.0 || pt.mass(label) > 0.0);
    }

    #[test]
    fn report_round_trip(rows in prop::collection::vec((0u32..=40, 0u32..=80, 0.0..2000.0f64, 0.0..500.0f64), 0..8)) {
        let report = ErrorReport {
            points: rows
                .iter()
                .map(|&(x, y, avg, extra)| PointError {
                    point: PointMm::new(x as f64 * 25.0, y as f64 * 25.0),
                    avg_error: avg,
                    max_error: avg + extra,
                })
                .collect(),
            metadata: BTreeMap::from([("seed".to_string(), "1".to_string())]),
        };
        let text = emit_report(&report, ReportFormat::Delimited);
        prop_assert_eq!(parse_report(&text).unwrap(), report.rounded());
    }

    #[test]
    fn measurement_files_round_trip(seed in any::<u64>(), reps in 1usize..5) {
        let campaign = Campaign {
            locations: vec![PointMm::new(100.0, 100.0), PointMm::new(900.0, 1900.0)],
            reps,
            anchors: AnchorLayout::default(),
            noise: NoiseConfig { seed, p_outlier: 0.2, ..NoiseConfig::default() },
        };
        let rows = simulate_campaign(&campaign);
        prop_assert_eq!(rows.len(), 2 * reps);
        prop_assert_eq!(read_measurements(&write_measurements(&rows)).unwrap(), rows.clone());
        prop_assert_eq!(simulate_campaign(&campaign), rows);
    }
}
