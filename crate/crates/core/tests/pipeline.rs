use uwbfp::calibration::ModelKind;
use uwbfp::eval::{run_baseline, run_ml, LearnerParams, PipelineConfig};
use uwbfp::fingerprint::GridSpec;
use uwbfp::learners::{ClassifierKind, ForestParams};
use uwbfp::preprocess::CorrectionPolicy;
use uwbfp::simulator::{simulate_campaign, Campaign, NoiseConfig};
use uwbfp::{AnchorLayout, PointMm};

fn small_forest() -> LearnerParams {
    LearnerParams {
        forest: ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        },
        ..LearnerParams::default()
    }
}

#[test]
fn reports_satisfy_error_ordering_for_every_classifier_and_model() {
    let anchors = AnchorLayout::default();
    let spec = GridSpec::default();
    for kind in ModelKind::ALL {
        for classifier in [
            ClassifierKind::Knn,
            ClassifierKind::Tree,
            ClassifierKind::Forest,
            ClassifierKind::SoftVote,
        ] {
            let cfg = PipelineConfig {
                model_kind: Some(kind),
                classifier,
                n_trials: 20,
                seed: 4,
                learners: small_forest(),
                ..PipelineConfig::default()
            };
            let r = run_ml(&cfg, &anchors, &spec).unwrap();
            r.validate().unwrap();
            assert_eq!(r.points.len(), 6);
            for p in &r.points {
                assert!(p.max_error.is_finite(), "{kind} {classifier}: {p:?}");
            }
        }
    }
}

#[test]
fn noiseless_vertex_points_are_exact_for_every_classifier() {
    let anchors = AnchorLayout::default();
    let spec = GridSpec::default();
    let vertices = vec![
        PointMm::new(250.0, 1500.0),
        PointMm::new(750.0, 500.0),
        PointMm::new(0.0, 0.0),
    ];
    for classifier in [
        ClassifierKind::Knn,
        ClassifierKind::Tree,
        ClassifierKind::SoftVote,
    ] {
        let cfg = PipelineConfig {
            classifier,
            noise: NoiseConfig::noiseless(),
            correction: CorrectionPolicy::none(),
            test_points: vertices.clone(),
            n_trials: 3,
            ..PipelineConfig::default()
        };
        let r = run_ml(&cfg, &anchors, &spec).unwrap();
        for p in &r.points {
            assert_eq!(p.avg_error, 0.0, "{classifier}: {p:?}");
        }
    }
}

#[test]
fn more_trials_stay_within_five_standard_errors() {
    // The maximum bounds the standard deviation, which gives a conservative
    // standard-error bound without access to per-trial errors.
    let anchors = AnchorLayout::default();
    let few = PipelineConfig {
        n_trials: 100,
        seed: 21,
        ..PipelineConfig::baseline()
    };
    let many = PipelineConfig {
        n_trials: 400,
        ..few.clone()
    };
    let a = run_baseline(&few, &anchors).unwrap();
    let b = run_baseline(&many, &anchors).unwrap();
    for (p, q) in a.points.iter().zip(&b.points) {
        let bound = 5.0 * q.max_error / (few.n_trials as f64).sqrt();
        assert!((p.avg_error - q.avg_error).abs() <= bound, "{p:?} vs {q:?}");
    }
}

#[test]
fn seeds_change_reports_and_campaigns() {
    let anchors = AnchorLayout::default();
    let r1 = run_baseline(
        &PipelineConfig {
            n_trials: 30,
            seed: 1,
            ..PipelineConfig::baseline()
        },
        &anchors,
    )
    .unwrap();
    let r2 = run_baseline(
        &PipelineConfig {
            n_trials: 30,
            seed: 2,
            ..PipelineConfig::baseline()
        },
        &anchors,
    )
    .unwrap();
    assert_ne!(r1.points, r2.points);

    let mut c = Campaign {
        locations: vec![PointMm::new(100.0, 100.0)],
        reps: 10,
        anchors,
        noise: NoiseConfig::default(),
    };
    let a = simulate_campaign(&c);
    c.noise.seed = 1;
    assert_ne!(a, simulate_campaign(&c));
}

#[test]
fn correction_ratio_matching_inflation_beats_raw_baseline() {
    let anchors = AnchorLayout::default();
    let raw = run_baseline(
        &PipelineConfig {
            seed: 9,
            n_trials: 200,
            ..PipelineConfig::baseline()
        },
        &anchors,
    )
    .unwrap();
    let corrected = run_baseline(
        &PipelineConfig {
            seed: 9,
            n_trials: 200,
            correction: CorrectionPolicy::with_ratio(0.9).unwrap(),
            ..PipelineConfig::baseline()
        },
        &anchors,
    )
    .unwrap();
    let mean = |r: &uwbfp::eval::ErrorReport| {
        r.points.iter().map(|p| p.avg_error).sum::<f64>() / r.points.len() as f64
    };
    assert!(
        mean(&corrected) < mean(&raw),
        "{} vs {}",
        mean(&corrected),
        mean(&raw)
    );
}
