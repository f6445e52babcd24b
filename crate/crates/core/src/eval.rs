//! Experiment runner: trilateration baseline and fingerprint pipelines,
//! per-point average / maximum localization error, report emission and
//! baseline comparison.
//!
//! Seeds: all randomness derives from [`PipelineConfig::seed`] through
//! [`derive_seed`] with a fixed purpose tag per stream (test trials,
//! observation campaign, set selection, forest, augmentation). Test-trial
//! measurements are shared between the baseline and learning pipelines of
//! the same seed, so both see identical data. Trials run in parallel but
//! are aggregated in trial order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::calibration::{
    fit_model, ModelFit, ModelKind, ObservationData, DEFAULT_N_SELECT, DEFAULT_REFERENCE_POINTS,
};
use crate::error::{Error, Result};
use crate::fingerprint::{build_db, FingerprintDb, GridSpec};
use crate::geometry::{distance, trilaterate, Anchor, AnchorLayout, PointMm, RangeTriple};
use crate::learners::{
    forest_train, knn_train, localize, soft_vote, tree_train, ClassifierKind, ForestClassifier,
    ForestParams, KnnClassifier, TrainingSet, TreeClassifier, TreeParams, VoteWeights,
};
use crate::preprocess::{
    correct_range, correct_triple, mad_filter, CorrectionPolicy, MadParams, SampleSeries,
};
use crate::simulator::{
    derive_seed, group_by_location, simulate_campaign, simulate_triple, Campaign, Measurement,
    NoiseConfig,
};

/// The six evaluation positions: four interior, two on the short edges.
pub const DEFAULT_TEST_POINTS: [PointMm; 6] = [
    PointMm::new(250.0, 1500.0),
    PointMm::new(250.0, 500.0),
    PointMm::new(500.0, 0.0),
    PointMm::new(500.0, 2000.0),
    PointMm::new(750.0, 1500.0),
    PointMm::new(750.0, 500.0),
];

pub const DEFAULT_N_TRIALS: usize = 400;
pub const DEFAULT_OBSERVATION_REPS: usize = 300;

/// Purpose tags passed to [`derive_seed`] for each random stream.
pub const SEED_TEST: u64 = 1;
pub const SEED_OBSERVATION: u64 = 2;
pub const SEED_SELECTION: u64 = 3;
pub const SEED_FOREST: u64 = 4;
pub const SEED_AUGMENT: u64 = 5;
/// Stand-alone measurement campaigns written to file.
pub const SEED_CAMPAIGN: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    pub reference_points: [PointMm; 4],
    pub n_select: usize,
    pub observation_reps: usize,
    pub mad: MadParams,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            reference_points: DEFAULT_REFERENCE_POINTS,
            n_select: DEFAULT_N_SELECT,
            observation_reps: DEFAULT_OBSERVATION_REPS,
            mad: MadParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerParams {
    pub k: usize,
    pub tree: TreeParams,
    pub forest: ForestParams,
    /// Noisy copies of every fingerprint added to the training set.
    pub augment: usize,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            k: 1,
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            augment: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `None` selects the trilateration baseline.
    pub model_kind: Option<ModelKind>,
    pub correction: CorrectionPolicy,
    pub classifier: ClassifierKind,
    pub vote_weights: VoteWeights,
    pub n_trials: usize,
    pub test_points: Vec<PointMm>,
    pub seed: u64,
    /// Measurement model; its own `seed` field is ignored in favour of
    /// streams derived from `seed`.
    pub noise: NoiseConfig,
    pub calibration: CalibrationSettings,
    pub learners: LearnerParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            model_kind: Some(ModelKind::Four),
            correction: CorrectionPolicy::default(),
            classifier: ClassifierKind::SoftVote,
            vote_weights: VoteWeights::default(),
            n_trials: DEFAULT_N_TRIALS,
            test_points: DEFAULT_TEST_POINTS.to_vec(),
            seed: 0,
            noise: NoiseConfig::default(),
            calibration: CalibrationSettings::default(),
            learners: LearnerParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn baseline() -> Self {
        Self {
            model_kind: None,
            correction: CorrectionPolicy::none(),
            ..Self::default()
        }
    }

    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidParameter(
                "n_trials must be at least 1".into(),
            ));
        }
        if let Some(p) = self.test_points.iter().find(|p| !spec.contains(**p)) {
            return Err(Error::OutOfArea { x: p.x, y: p.y });
        }
        self.correction.validate()?;
        self.noise.validate()?;
        self.calibration.mad.validate()?;
        if self.calibration.observation_reps == 0 || self.calibration.n_select == 0 {
            return Err(Error::InvalidParameter(
                "observation_reps and n_select must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Canonical `key = value` listing of every setting, used for hashing.
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, val: String| v.push((k.to_string(), val));
        put(
            "model",
            self.model_kind.map_or("none".into(), |k| k.to_string()),
        );
        put(
            "correction.threshold",
            self.correction.threshold.to_string(),
        );
        put("correction.ratio", self.correction.ratio.to_string());
        put("classifier", self.classifier.to_string());
        put("vote.weights", self.vote_weights.to_string());
        put("n_trials", self.n_trials.to_string());
        put(
            "test_points",
            self.test_points
                .iter()
                .map(|p| format!("{},{}", p.x, p.y))
                .collect::<Vec<_>>()
                .join(";"),
        );
        put("seed", self.seed.to_string());
        let n = &self.noise;
        put(
            "noise",
            format!(
                "{},{},{},{},{},{}",
                n.slope, n.offset, n.sigma, n.inflation_threshold, n.inflation_factor, n.p_outlier
            ),
        );
        let c = &self.calibration;
        put(
            "calibration.reference_points",
            c.reference_points
                .iter()
                .map(|p| format!("{},{}", p.x, p.y))
                .collect::<Vec<_>>()
                .join(";"),
        );
        put("calibration.n_select", c.n_select.to_string());
        put(
            "calibration.observation_reps",
            c.observation_reps.to_string(),
        );
        put("mad", format!("{},{}", c.mad.k, c.mad.scale));
        let l = &self.learners;
        put("knn.k", l.k.to_string());
        put(
            "tree",
            format!(
                "{},{}",
                l.tree.max_depth.map_or("none".into(), |d| d.to_string()),
                l.tree.min_leaf
            ),
        );
        put(
            "forest",
            format!(
                "{},{},{},{},{}",
                l.forest.n_trees,
                l.forest.features_per_split,
                l.forest.bootstrap,
                l.forest
                    .tree
                    .max_depth
                    .map_or("none".into(), |d| d.to_string()),
                l.forest.tree.min_leaf
            ),
        );
        put("augment", l.augment.to_string());
        v
    }

    pub fn config_hash(&self, anchors: &AnchorLayout, spec: &GridSpec) -> String {
        let mut text = String::new();
        for (k, v) in self.describe() {
            let _ = writeln!(text, "{k}={v}");
        }
        for a in Anchor::ALL {
            let p = anchors.get(a);
            let _ = writeln!(text, "anchor.{}={},{}", a.name(), p.x, p.y);
        }
        let _ = writeln!(
            text,
            "grid={},{},{}",
            spec.width(),
            spec.height(),
            spec.spacing()
        );
        Sha256::digest(text.as_bytes())[..8]
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    fn trial_noise(&self) -> NoiseConfig {
        NoiseConfig {
            seed: derive_seed(self.seed, SEED_TEST),
            ..self.noise
        }
    }
}

/// Average and maximum error at one test point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointError {
    pub point: PointMm,
    pub avg_error: f64,
    /// NaN when not reported (reference tables that list averages only).
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub points: Vec<PointError>,
    pub metadata: BTreeMap<String, String>,
}

impl ErrorReport {
    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            if p.avg_error.is_nan()
                || p.avg_error < 0.0
                || (!p.max_error.is_nan() && p.max_error < p.avg_error)
            {
                return Err(Error::InvalidParameter(format!(
                    "report point {} violates 0 <= avg <= max ({}, {})",
                    p.point, p.avg_error, p.max_error
                )));
            }
        }
        Ok(())
    }

    pub fn test_points(&self) -> Vec<PointMm> {
        self.points.iter().map(|p| p.point).collect()
    }

    pub fn get(&self, point: PointMm) -> Option<&PointError> {
        self.points.iter().find(|p| p.point == point)
    }

    /// Values as they appear after a delimited round trip.
    pub fn rounded(&self) -> Self {
        let r5 = |v: f64| {
            if v.is_nan() {
                v
            } else {
                format!("{v:.5}").parse().unwrap()
            }
        };
        Self {
            points: self
                .points
                .iter()
                .map(|p| PointError {
                    point: p.point,
                    avg_error: r5(p.avg_error),
                    max_error: r5(p.max_error),
                })
                .collect(),
            metadata: self.metadata.clone(),
        }
    }
}

/// Fixed-order aggregation of per-trial errors; `None` marks a failed trial.
fn aggregate(point: PointMm, errors: &[Option<f64>]) -> Result<(PointError, usize)> {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut ok = 0usize;
    for e in errors.iter().flatten() {
        sum += e;
        max = max.max(*e);
        ok += 1;
    }
    if ok == 0 {
        return Err(Error::InsufficientData(format!(
            "every trial failed at {point}"
        )));
    }
    Ok((
        PointError {
            point,
            avg_error: sum / ok as f64,
            max_error: max,
        },
        errors.len() - ok,
    ))
}

fn run_trials(
    cfg: &PipelineConfig,
    anchors: &AnchorLayout,
    estimate: impl Fn(&RangeTriple) -> Result<PointMm> + Sync,
) -> Result<(Vec<PointError>, usize)> {
    let noise = cfg.trial_noise();
    let mut points = Vec::with_capacity(cfg.test_points.len());
    let mut failed = 0;
    for (pi, &truth) in cfg.test_points.iter().enumerate() {
        let errors: Vec<Option<f64>> = (0..cfg.n_trials)
            .into_par_iter()
            .map(|t| {
                let measured = simulate_triple(anchors, truth, &noise, pi as u64, t as u64);
                let corrected = correct_triple(&measured, &cfg.correction);
                estimate(&corrected).ok().map(|p| distance(p, truth))
            })
            .collect();
        let (pe, f) = aggregate(truth, &errors)?;
        points.push(pe);
        failed += f;
    }
    Ok((points, failed))
}

fn base_metadata(
    cfg: &PipelineConfig,
    anchors: &AnchorLayout,
    spec: &GridSpec,
    pipeline: &str,
) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("pipeline".into(), pipeline.into());
    m.insert("seed".into(), cfg.seed.to_string());
    m.insert("config_hash".into(), cfg.config_hash(anchors, spec));
    m.insert("n_trials".into(), cfg.n_trials.to_string());
    m.insert("correction_ratio".into(), cfg.correction.ratio.to_string());
    m
}

/// Trilateration on corrected simulated ranges at every test point.
/// Trials where the solver fails are excluded and counted.
pub fn run_baseline(cfg: &PipelineConfig, anchors: &AnchorLayout) -> Result<ErrorReport> {
    let spec = GridSpec::default();
    run_baseline_in(cfg, anchors, &spec)
}

/// [`run_baseline`] with an explicit area for validation and hashing.
pub fn run_baseline_in(
    cfg: &PipelineConfig,
    anchors: &AnchorLayout,
    spec: &GridSpec,
) -> Result<ErrorReport> {
    if cfg.model_kind.is_some() {
        return Err(Error::InvalidParameter(
            "baseline run requires model = none".into(),
        ));
    }
    cfg.validate(spec)?;
    let (points, failed) = run_trials(cfg, anchors, |r| trilaterate(anchors, r))?;
    let mut metadata = base_metadata(cfg, anchors, spec, "baseline");
    metadata.insert("failed_trials".into(), failed.to_string());
    Ok(ErrorReport { points, metadata })
}

/// Fitted classifier used by the learning pipeline.
#[derive(Debug, Clone)]
pub enum Localizer {
    Knn(KnnClassifier),
    Tree(TreeClassifier),
    Forest(ForestClassifier),
    Vote {
        knn: KnnClassifier,
        tree: TreeClassifier,
        weights: VoteWeights,
    },
}

impl Localizer {
    pub fn train(
        kind: ClassifierKind,
        train: &TrainingSet,
        params: &LearnerParams,
        weights: VoteWeights,
        seed: u64,
    ) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::Knn => Localizer::Knn(knn_train(train, params.k)?),
            ClassifierKind::Tree => Localizer::Tree(tree_train(train, params.tree)?),
            ClassifierKind::Forest => Localizer::Forest(forest_train(
                train,
                params.forest,
                derive_seed(seed, SEED_FOREST),
            )?),
            ClassifierKind::SoftVote => Localizer::Vote {
                knn: knn_train(train, params.k)?,
                tree: tree_train(train, params.tree)?,
                weights,
            },
        })
    }

    pub fn classify(&self, query: &RangeTriple) -> crate::fingerprint::CellLabel {
        match self {
            Localizer::Knn(k) => k.predict(query),
            Localizer::Tree(t) => t.predict(query),
            Localizer::Forest(f) => f.predict(query),
            Localizer::Vote { knn, tree, weights } => soft_vote(
                &knn.predict_proba(query),
                tree.predict_proba(query),
                *weights,
            ),
        }
    }
}

/// Cleans raw reference-point measurements: per point and anchor, MAD
/// filtering first, then the correction policy on the survivors.
pub fn prepare_observations(
    rows: &[Measurement],
    reference_points: &[PointMm; 4],
    mad: MadParams,
    correction: &CorrectionPolicy,
) -> Result<ObservationData> {
    let groups = group_by_location(rows);
    let mut series: Vec<[SampleSeries; 3]> = Vec::with_capacity(4);
    for rp in reference_points {
        let (_, triples) = groups
            .iter()
            .find(|(p, _)| p == rp)
            .ok_or(Error::MissingReferencePoint { x: rp.x, y: rp.y })?;
        let per_anchor: Result<Vec<SampleSeries>> = Anchor::ALL
            .iter()
            .map(|&anc| {
                let raw = SampleSeries::new(triples.iter().map(|t| t.get(anc)).collect())?;
                Ok(mad_filter(&raw, mad)?.map(|v| correct_range(v, correction)))
            })
            .collect();
        let [a, b, c]: [SampleSeries; 3] = per_anchor?.try_into().expect("three anchors");
        series.push([a, b, c]);
    }
    let series: [[SampleSeries; 3]; 4] = series.try_into().expect("four reference points");
    ObservationData::new(*reference_points, series)
}

/// Everything the learning pipeline builds before running test trials.
#[derive(Debug, Clone)]
pub struct MlSetup {
    pub fit: ModelFit,
    pub db: FingerprintDb,
    pub localizer: Localizer,
}

/// Observation campaign, calibration fit, fingerprint database and
/// classifier training.
pub fn prepare_ml(
    cfg: &PipelineConfig,
    anchors: &AnchorLayout,
    spec: &GridSpec,
) -> Result<MlSetup> {
    let kind = cfg
        .model_kind
        .ok_or_else(|| Error::InvalidParameter("learning pipeline requires a model kind".into()))?;
    cfg.validate(spec)?;
    let cal = &cfg.calibration;
    let campaign = Campaign {
        locations: cal.reference_points.to_vec(),
        reps: cal.observation_reps,
        anchors: *anchors,
        noise: NoiseConfig {
            seed: derive_seed(cfg.seed, SEED_OBSERVATION),
            ..cfg.noise
        },
    };
    let rows = simulate_campaign(&campaign);
    let obs = prepare_observations(&rows, &cal.reference_points, cal.mad, &cfg.correction)?;
    let fit = fit_model(
        kind,
        &obs,
        anchors,
        cal.n_select,
        derive_seed(cfg.seed, SEED_SELECTION),
    )?;
    let db = build_db(&fit.model, spec, anchors)?;
    let rows = db.augmented_rows(
        cfg.learners.augment,
        cfg.noise.sigma,
        derive_seed(cfg.seed, SEED_AUGMENT),
    );
    let train = TrainingSet::new(rows)?;
    let localizer = Localizer::train(
        cfg.classifier,
        &train,
        &cfg.learners,
        cfg.vote_weights,
        cfg.seed,
    )?;
    Ok(MlSetup { fit, db, localizer })
}

/// Test trials against an already prepared learning pipeline.
pub fn run_ml_with(
    cfg: &PipelineConfig,
    anchors: &AnchorLayout,
    spec: &GridSpec,
    setup: &MlSetup,
) -> Result<ErrorReport> {
    let (points, failed) = run_trials(cfg, anchors, |r| {
        localize(setup.localizer.classify(r), spec)
    })?;
    let mut metadata = base_metadata(cfg, anchors, spec, "ml");
    metadata.insert("model".into(), setup.fit.model.kind.to_string());
    metadata.insert("classifier".into(), cfg.classifier.to_string());
    if cfg.classifier == ClassifierKind::SoftVote {
        metadata.insert("vote_weights".into(), cfg.vote_weights.to_string());
    }
    for anc in Anchor::ALL {
        let eq = setup.fit.model.equation(anc);
        metadata.insert(
            format!("eq_{}", anc.name().to_ascii_lowercase()),
            format!("{},{}", eq.a, eq.b),
        );
    }
    metadata.insert(
        "calibration_sets".into(),
        setup.fit.sets_selected.to_string(),
    );
    metadata.insert(
        "calibration_sets_skipped".into(),
        setup.fit.sets_skipped.to_string(),
    );
    metadata.insert("failed_trials".into(), failed.to_string());
    Ok(ErrorReport { points, metadata })
}

/// Fit, build, train, then classify and localize every test trial.
pub fn run_ml(
    cfg: &PipelineConfig,
    anchors: &AnchorLayout,
    spec: &GridSpec,
) -> Result<ErrorReport> {
    let setup = prepare_ml(cfg, anchors, spec)?;
    run_ml_with(cfg, anchors, spec, &setup)
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

/// Baseline report plus candidates evaluated on the same test points.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub baseline: ErrorReport,
    pub candidates: Vec<ErrorReport>,
}

/// Percentage by which `value` improves on `baseline`.
pub fn reduction_pct(baseline: f64, value: f64) -> f64 {
    if baseline == value {
        0.0
    } else {
        (baseline - value) / baseline * 100.0
    }
}

/// The first report is the baseline; each later one is compared to it. A
/// single report is compared with itself.
pub fn compare(reports: &[ErrorReport]) -> Result<ComparisonTable> {
    let (baseline, rest) = reports.split_first().ok_or(Error::MismatchedTestPoints)?;
    let candidates = if rest.is_empty() {
        vec![baseline.clone()]
    } else {
        rest.to_vec()
    };
    let expected = baseline.test_points();
    if candidates.iter().any(|r| r.test_points() != expected) {
        return Err(Error::MismatchedTestPoints);
    }
    Ok(ComparisonTable {
        baseline: baseline.clone(),
        candidates,
    })
}

impl ComparisonTable {
    /// `(point, candidate avg, baseline avg, reduction %)` for one candidate.
    pub fn rows(&self, candidate: usize) -> Vec<(PointError, f64, f64)> {
        self.candidates[candidate]
            .points
            .iter()
            .zip(&self.baseline.points)
            .map(|(c, b)| (*c, b.avg_error, reduction_pct(b.avg_error, c.avg_error)))
            .collect()
    }

    pub fn to_delimited(&self) -> String {
        let mut out = String::new();
        for i in 0..self.candidates.len() {
            let _ = writeln!(out, "# candidate = {i}");
            if let Some(label) = self.candidates[i].metadata.get("source") {
                let _ = writeln!(out, "# source = {label}");
            }
            out.push_str(COMPARISON_HEADER);
            out.push('\n');
            for (p, base, red) in self.rows(i) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.2}",
                    p.point.x,
                    p.point.y,
                    fmt5(p.avg_error),
                    fmt5(p.max_error),
                    fmt5(base),
                    red
                );
            }
        }
        out
    }

    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        for i in 0..self.candidates.len() {
            let _ = writeln!(
                out,
                "{:<14}{:>16}{:>16}{:>14}",
                "Point", "Average error", "Baseline avg", "Reduction"
            );
            for (p, base, red) in self.rows(i) {
                let _ = writeln!(
                    out,
                    "{:<14}{:>16}{:>16}{:>13.2}%",
                    p.point.to_string(),
                    fmt5(p.avg_error),
                    fmt5(base),
                    red
                );
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Report documents
// ---------------------------------------------------------------------------

pub const REPORT_HEADER: &str = "point_x,point_y,avg_error_mm,max_error_mm";
pub const COMPARISON_HEADER: &str =
    "point_x,point_y,avg_error_mm,max_error_mm,baseline_avg_mm,reduction_pct";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TextTable,
    Delimited,
}

/// Five-decimal fixed formatting; `NA` for values not reported.
pub fn fmt5(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:.5}")
    }
}

pub fn emit_report(report: &ErrorReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Delimited => {
            for (k, v) in &report.metadata {
                let _ = writeln!(out, "# {k} = {v}");
            }
            out.push_str(REPORT_HEADER);
            out.push('\n');
            for p in &report.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    p.point.x,
                    p.point.y,
                    fmt5(p.avg_error),
                    fmt5(p.max_error)
                );
            }
        }
        ReportFormat::TextTable => {
            let _ = writeln!(
                out,
                "{:<14}{:>16}{:>16}",
                "Point", "Average error", "Maximum error"
            );
            for p in &report.points {
                let _ = writeln!(
                    out,
                    "{:<14}{:>16}{:>16}",
                    p.point.to_string(),
                    fmt5(p.avg_error),
                    fmt5(p.max_error)
                );
            }
        }
    }
    out
}

/// Parses a delimited report, including `# key = value` metadata lines.
pub fn parse_report(text: &str) -> Result<ErrorReport> {
    let mut report = ErrorReport::default();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                report
                    .metadata
                    .insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !saw_header {
            if line != REPORT_HEADER {
                return Err(Error::parse(
                    line_no,
                    format!("expected header '{REPORT_HEADER}'"),
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str| -> Result<f64> {
            if s == "NA" {
                return Ok(f64::NAN);
            }
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("invalid number '{s}'")))
        };
        let point = PointMm::new(num(fields[0])?, num(fields[1])?);
        if !point.is_finite() {
            return Err(Error::parse(line_no, "test point must be finite"));
        }
        let pe = PointError {
            point,
            avg_error: num(fields[2])?,
            max_error: num(fields[3])?,
        };
        if pe.avg_error.is_nan() {
            return Err(Error::parse(line_no, "average error is required"));
        }
        report.points.push(pe);
    }
    if !saw_header {
        return Err(Error::parse(1, "missing report header"));
    }
    report
        .validate()
        .map_err(|e| Error::parse(0, e.to_string()))?;
    Ok(report)
}

/// Reference error tables measured on physical hardware, in the delimited
/// report format. Names are listed in [`REFERENCE_FIXTURES`].
pub fn reference_fixture(name: &str) -> Option<&'static str> {
    REFERENCE_FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
}

macro_rules! fixture {
    ($name:literal) => {
        (
            $name,
            include_str!(concat!("../fixtures/reference/", $name, ".csv")),
        )
    };
}

pub const REFERENCE_FIXTURES: &[(&str, &str)] = &[
    fixture!("baseline_raw"),
    fixture!("baseline_ratio_100"),
    fixture!("baseline_ratio_90"),
    fixture!("baseline_ratio_85"),
    fixture!("baseline_ratio_80"),
    fixture!("ml_ratio_100"),
    fixture!("ml_ratio_90"),
    fixture!("ml_ratio_85"),
    fixture!("ml_ratio_80"),
    fixture!("model_one_tree"),
    fixture!("model_one_forest"),
    fixture!("model_one_knn"),
    fixture!("model_one_vote"),
    fixture!("model_two_vote"),
    fixture!("model_three_vote"),
    fixture!("model_four_knn"),
    fixture!("model_four_vote"),
];
