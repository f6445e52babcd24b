//! Flat `section.key = value` run configuration.
//!
//! Every key has a default; files and flags override them. The resolved
//! mapping is echoed into report metadata so a report records exactly how
//! it was produced.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use uwbfp::calibration::{ModelKind, DEFAULT_N_SELECT, DEFAULT_REFERENCE_POINTS};
use uwbfp::eval::{
    CalibrationSettings, LearnerParams, PipelineConfig, DEFAULT_N_TRIALS, DEFAULT_OBSERVATION_REPS,
    DEFAULT_TEST_POINTS,
};
use uwbfp::fingerprint::GridSpec;
use uwbfp::learners::{ClassifierKind, ForestParams, TreeParams, VoteWeights};
use uwbfp::preprocess::{CorrectionPolicy, MadParams};
use uwbfp::simulator::NoiseConfig;
use uwbfp::{AnchorLayout, PointMm};

use crate::error::CliError;

pub const DEFAULT_CAMPAIGN_REPS: usize = 500;

fn points_text(points: &[PointMm]) -> String {
    points
        .iter()
        .map(|p| format!("{},{}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(";")
}

fn point_text(p: PointMm) -> String {
    format!("{},{}", p.x, p.y)
}

/// Every accepted key with its default value.
fn defaults() -> Vec<(&'static str, String)> {
    let noise = NoiseConfig::default();
    let grid = GridSpec::default();
    let anchors = AnchorLayout::default();
    let correction = CorrectionPolicy::default();
    let mad = MadParams::default();
    let forest = ForestParams::default();
    let mut locations = DEFAULT_REFERENCE_POINTS.to_vec();
    locations.extend(DEFAULT_TEST_POINTS);
    vec![
        ("run.seed", "0".into()),
        ("grid.width", grid.width().to_string()),
        ("grid.height", grid.height().to_string()),
        ("grid.spacing", grid.spacing().to_string()),
        ("anchors.a", point_text(anchors.a())),
        ("anchors.b", point_text(anchors.b())),
        ("anchors.c", point_text(anchors.c())),
        ("noise.slope", noise.slope.to_string()),
        ("noise.offset", noise.offset.to_string()),
        ("noise.sigma", noise.sigma.to_string()),
        (
            "noise.inflation_threshold",
            noise.inflation_threshold.to_string(),
        ),
        ("noise.inflation_factor", noise.inflation_factor.to_string()),
        ("noise.p_outlier", noise.p_outlier.to_string()),
        ("correction.threshold", correction.threshold.to_string()),
        ("correction.ratio", correction.ratio.to_string()),
        ("correction.baseline_ratio", "1".into()),
        ("mad.k", mad.k.to_string()),
        ("mad.scale", mad.scale.to_string()),
        ("model.kind", ModelKind::Four.to_string()),
        (
            "calibration.reference_points",
            points_text(&DEFAULT_REFERENCE_POINTS),
        ),
        ("calibration.n_select", DEFAULT_N_SELECT.to_string()),
        (
            "calibration.observation_reps",
            DEFAULT_OBSERVATION_REPS.to_string(),
        ),
        ("classifier.kind", ClassifierKind::SoftVote.to_string()),
        ("classifier.weights", VoteWeights::default().to_string()),
        ("classifier.k", "1".into()),
        ("classifier.augment", "0".into()),
        ("tree.max_depth", "none".into()),
        ("tree.min_leaf", "1".into()),
        ("forest.n_trees", forest.n_trees.to_string()),
        (
            "forest.features_per_split",
            forest.features_per_split.to_string(),
        ),
        ("forest.bootstrap", forest.bootstrap.to_string()),
        ("campaign.reps", DEFAULT_CAMPAIGN_REPS.to_string()),
        ("campaign.locations", points_text(&locations)),
        ("eval.n_trials", DEFAULT_N_TRIALS.to_string()),
        ("eval.test_points", points_text(&DEFAULT_TEST_POINTS)),
        ("eval.pipelines", "both".into()),
        ("paths.measurements", String::new()),
        ("paths.calibration", String::new()),
        ("paths.out", String::new()),
    ]
}

/// Which pipelines `evaluate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipelines {
    Both,
    Baseline,
    Ml,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
    /// Where each non-default value came from, for diagnostics.
    origin: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: defaults().into_iter().collect(),
            origin: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let origin = format!("line {}", idx + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Config {
                origin: origin.clone(),
                msg: "expected 'section.key = value'".into(),
            })?;
            let key = key.trim();
            if cfg.origin.contains_key(key) {
                return Err(CliError::Config {
                    origin,
                    msg: format!("duplicate key '{key}'"),
                });
            }
            cfg.set(key, value.trim(), origin)?;
        }
        Ok(cfg)
    }

    /// Overrides `key`, rejecting unknown keys.
    pub fn set(&mut self, key: &str, value: &str, origin: String) -> Result<(), CliError> {
        let (&k, slot) = self
            .values
            .iter_mut()
            .find(|(k, _)| **k == key)
            .ok_or_else(|| CliError::Config {
                origin: origin.clone(),
                msg: format!("unknown key '{key}'"),
            })?;
        *slot = value.to_string();
        self.origin.insert(k, origin);
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.origin.contains_key(key)
    }

    /// The fully resolved mapping, in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.values.iter().map(|(k, v)| (*k, v.as_str()))
    }

    fn error(&self, key: &str, msg: impl Into<String>) -> CliError {
        let origin = self
            .origin
            .get(key)
            .cloned()
            .unwrap_or_else(|| "default".into());
        CliError::Config {
            origin: format!("{key}, {origin}"),
            msg: msg.into(),
        }
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| self.error(key, format!("invalid value '{v}'")))
    }

    fn point(&self, key: &str) -> Result<PointMm, CliError> {
        parse_point(self.get(key))
            .ok_or_else(|| self.error(key, format!("expected 'x,y', got '{}'", self.get(key))))
    }

    fn points(&self, key: &str) -> Result<Vec<PointMm>, CliError> {
        let v = self.get(key);
        if v.trim().is_empty() {
            return Ok(Vec::new());
        }
        v.split(';')
            .map(|p| {
                parse_point(p)
                    .ok_or_else(|| self.error(key, format!("expected 'x,y;x,y;...', got '{v}'")))
            })
            .collect()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    fn check<T>(&self, key: &str, r: uwbfp::Result<T>) -> Result<T, CliError> {
        r.map_err(|e| self.error(key, e.to_string()))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let seed: u64 = self.typed("run.seed")?;
        let spec = self.check(
            "grid.spacing",
            GridSpec::new(
                self.typed("grid.width")?,
                self.typed("grid.height")?,
                self.typed("grid.spacing")?,
            ),
        )?;
        let anchors = self.check(
            "anchors.a",
            AnchorLayout::new(
                self.point("anchors.a")?,
                self.point("anchors.b")?,
                self.point("anchors.c")?,
            ),
        )?;
        let noise = NoiseConfig {
            slope: self.typed("noise.slope")?,
            offset: self.typed("noise.offset")?,
            sigma: self.typed("noise.sigma")?,
            inflation_threshold: self.typed("noise.inflation_threshold")?,
            inflation_factor: self.typed("noise.inflation_factor")?,
            p_outlier: self.typed("noise.p_outlier")?,
            seed,
        };
        self.check("noise.sigma", noise.validate())?;
        let threshold: f64 = self.typed("correction.threshold")?;
        let correction = self.check(
            "correction.ratio",
            CorrectionPolicy::new(threshold, self.typed("correction.ratio")?),
        )?;
        let baseline_correction = self.check(
            "correction.baseline_ratio",
            CorrectionPolicy::new(threshold, self.typed("correction.baseline_ratio")?),
        )?;
        let mad = MadParams {
            k: self.typed("mad.k")?,
            scale: self.typed("mad.scale")?,
        };
        self.check("mad.k", mad.validate())?;

        let model_kind = match self.get("model.kind") {
            "none" => None,
            other => Some(other.parse::<ModelKind>().map_err(|_| {
                self.error(
                    "model.kind",
                    format!("expected one, two, three, four or none, got '{other}'"),
                )
            })?),
        };
        if model_kind.is_none() {
            for key in ["classifier.kind", "classifier.weights"] {
                if self.is_set(key) {
                    return Err(self.error(
                        key,
                        "contradicts model.kind = none (the baseline uses no classifier)",
                    ));
                }
            }
        }

        let reference_points: Vec<PointMm> = self.points("calibration.reference_points")?;
        let reference_points: [PointMm; 4] = reference_points.try_into().map_err(|_| {
            self.error(
                "calibration.reference_points",
                "exactly four points required",
            )
        })?;
        let max_depth = match self.get("tree.max_depth") {
            "none" => None,
            _ => Some(self.typed("tree.max_depth")?),
        };
        let tree = TreeParams {
            max_depth,
            min_leaf: self.typed("tree.min_leaf")?,
        };
        let pipeline = PipelineConfig {
            model_kind,
            correction,
            classifier: self.typed("classifier.kind")?,
            vote_weights: self.typed("classifier.weights")?,
            n_trials: self.typed("eval.n_trials")?,
            test_points: self.points("eval.test_points")?,
            seed,
            noise,
            calibration: CalibrationSettings {
                reference_points,
                n_select: self.typed("calibration.n_select")?,
                observation_reps: self.typed("calibration.observation_reps")?,
                mad,
            },
            learners: LearnerParams {
                k: self.typed("classifier.k")?,
                tree,
                forest: ForestParams {
                    n_trees: self.typed("forest.n_trees")?,
                    features_per_split: self.typed("forest.features_per_split")?,
                    bootstrap: self.typed("forest.bootstrap")?,
                    tree,
                },
                augment: self.typed("classifier.augment")?,
            },
        };
        self.check("eval.test_points", pipeline.validate(&spec))?;

        let pipelines = match (self.get("eval.pipelines"), model_kind) {
            ("both", Some(_)) => Pipelines::Both,
            ("both" | "baseline", None) | ("baseline", Some(_)) => Pipelines::Baseline,
            ("ml", Some(_)) => Pipelines::Ml,
            ("ml", None) => {
                return Err(self.error("eval.pipelines", "ml requires a model kind other than none"))
            }
            (other, _) => {
                return Err(self.error(
                    "eval.pipelines",
                    format!("expected both, baseline or ml, got '{other}'"),
                ))
            }
        };

        let campaign_reps: usize = self.typed("campaign.reps")?;
        if campaign_reps == 0 {
            return Err(self.error("campaign.reps", "must be at least 1"));
        }
        let campaign_locations = self.points("campaign.locations")?;
        if let Some(p) = campaign_locations.iter().find(|p| !spec.contains(**p)) {
            return Err(self.error("campaign.locations", format!("{p} is outside the area")));
        }

        Ok(Resolved {
            spec,
            anchors,
            pipeline,
            baseline_correction,
            pipelines,
            campaign_reps,
            campaign_locations,
            measurements: self.path("paths.measurements"),
            calibration: self.path("paths.calibration"),
            out: self.path("paths.out"),
        })
    }
}

fn parse_point(s: &str) -> Option<PointMm> {
    let (x, y) = s.trim().split_once(',')?;
    let p = PointMm::new(x.trim().parse().ok()?, y.trim().parse().ok()?);
    p.is_finite().then_some(p)
}

/// Typed settings ready for the library.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: GridSpec,
    pub anchors: AnchorLayout,
    pub pipeline: PipelineConfig,
    pub baseline_correction: CorrectionPolicy,
    pub pipelines: Pipelines,
    pub campaign_reps: usize,
    pub campaign_locations: Vec<PointMm>,
    pub measurements: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub out: Option<PathBuf>,
}
