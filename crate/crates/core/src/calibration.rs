//! Affine true-to-measured ranging equations and the four ways of
//! assembling them from reference-point observations.
//!
//! Every equation has the form `measured = a * true + b`. A single equation
//! comes from two points ([`fit_pair`]); a [`CalibrationModel`] holds one
//! equation per anchor, obtained by averaging the per-set parameters of
//! `n_select` randomly chosen measurement sets ([`fit_model`]).

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{distance, Anchor, AnchorLayout, PointMm};
use crate::preprocess::SampleSeries;

/// The four reference points at the corners of the inner 800 x 1800 mm box.
pub const DEFAULT_REFERENCE_POINTS: [PointMm; 4] = [
    PointMm::new(100.0, 100.0),
    PointMm::new(900.0, 100.0),
    PointMm::new(100.0, 1900.0),
    PointMm::new(900.0, 1900.0),
];

pub const DEFAULT_N_SELECT: usize = 60;

/// `measured = a * true + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRangingEq {
    pub a: f64,
    pub b: f64,
}

impl LinearRangingEq {
    pub const IDENTITY: LinearRangingEq = LinearRangingEq { a: 1.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "equation parameters must be finite (a={a}, b={b})"
            )));
        }
        if a <= 0.0 {
            return Err(Error::NonPositiveSlope(a));
        }
        Ok(Self { a, b })
    }

    pub fn predict(&self, true_distance: f64) -> f64 {
        self.a * true_distance + self.b
    }
}

/// Solves `meas1 = a*true1 + b`, `meas2 = a*true2 + b`.
pub fn fit_pair(true1: f64, meas1: f64, true2: f64, meas2: f64) -> Result<LinearRangingEq> {
    if ![true1, meas1, true2, meas2]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
    {
        return Err(Error::NonFiniteRange);
    }
    if true1 == true2 {
        return Err(Error::DegeneratePair(true1));
    }
    let a = (meas2 - meas1) / (true2 - true1);
    let b = meas1 - a * true1;
    LinearRangingEq::new(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    One,
    Two,
    Three,
    Four,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::One,
        ModelKind::Two,
        ModelKind::Three,
        ModelKind::Four,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::One => "one",
            ModelKind::Two => "two",
            ModelKind::Three => "three",
            ModelKind::Four => "four",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "one" | "1" => Ok(ModelKind::One),
            "two" | "2" => Ok(ModelKind::Two),
            "three" | "3" => Ok(ModelKind::Three),
            "four" | "4" => Ok(ModelKind::Four),
            other => Err(Error::InvalidParameter(format!(
                "unknown model kind '{other}'"
            ))),
        }
    }
}

/// One point pair used to fit an equation: distances to `source` measured at
/// reference points `first` and `second` (zero-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSpec {
    pub source: Anchor,
    pub first: usize,
    pub second: usize,
}

const fn pair(source: Anchor, first: usize, second: usize) -> PairSpec {
    PairSpec {
        source,
        first,
        second,
    }
}

// Diagonal pairs: points 1 & 4 and points 2 & 3.
const ONE_A: [PairSpec; 1] = [pair(Anchor::A, 0, 3)];
const ONE_B: [PairSpec; 1] = [pair(Anchor::A, 1, 2)];
const ONE_C: [PairSpec; 1] = [pair(Anchor::A, 0, 3)];
const TWO_B: [PairSpec; 1] = [pair(Anchor::B, 1, 2)];
const TWO_C: [PairSpec; 1] = [pair(Anchor::C, 0, 3)];
// Three-sided: one hub point against each of the other three.
const THREE_A: [PairSpec; 3] = [
    pair(Anchor::A, 0, 1),
    pair(Anchor::A, 0, 2),
    pair(Anchor::A, 0, 3),
];
const THREE_B: [PairSpec; 3] = [
    pair(Anchor::B, 2, 0),
    pair(Anchor::B, 2, 1),
    pair(Anchor::B, 2, 3),
];
const THREE_C: [PairSpec; 3] = [
    pair(Anchor::C, 3, 0),
    pair(Anchor::C, 3, 1),
    pair(Anchor::C, 3, 2),
];

/// The point pairs whose fits are averaged into the equation for `target`.
pub fn pairing_rule(kind: ModelKind, target: Anchor) -> &'static [PairSpec] {
    use Anchor::*;
    use ModelKind::*;
    match (kind, target) {
        (One, A) | (Two, A) => &ONE_A,
        (One, B) => &ONE_B,
        (One, C) => &ONE_C,
        (Two, B) => &TWO_B,
        (Two, C) | (Four, C) => &TWO_C,
        (Three, A) | (Four, A) => &THREE_A,
        (Three, B) | (Four, B) => &THREE_B,
        (Three, C) => &THREE_C,
    }
}

/// Per-anchor equations assembled under one model variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationModel {
    pub kind: ModelKind,
    pub eq_a: LinearRangingEq,
    pub eq_b: LinearRangingEq,
    pub eq_c: LinearRangingEq,
}

impl CalibrationModel {
    pub fn identity(kind: ModelKind) -> Self {
        Self::uniform(kind, LinearRangingEq::IDENTITY)
    }

    pub fn uniform(kind: ModelKind, eq: LinearRangingEq) -> Self {
        Self {
            kind,
            eq_a: eq,
            eq_b: eq,
            eq_c: eq,
        }
    }

    pub fn equation(&self, anchor: Anchor) -> LinearRangingEq {
        match anchor {
            Anchor::A => self.eq_a,
            Anchor::B => self.eq_b,
            Anchor::C => self.eq_c,
        }
    }

    /// Serializes as a `kind,<name>` header and one `anchor,a,b` line per
    /// anchor, with round-trip exact decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!("kind,{}\n", self.kind);
        for anchor in Anchor::ALL {
            let eq = self.equation(anchor);
            out.push_str(&format!("{},{},{}\n", anchor.name(), eq.a, eq.b));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut eqs: [Option<LinearRangingEq>; 3] = [None; 3];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if kind.is_none() {
                match fields.as_slice() {
                    ["kind", name] => {
                        kind = Some(
                            name.parse()
                                .map_err(|e: Error| Error::parse(line_no, e.to_string()))?,
                        )
                    }
                    _ => return Err(Error::parse(line_no, "expected header 'kind,<name>'")),
                }
                continue;
            }
            let [name, a, b] = fields.as_slice() else {
                return Err(Error::parse(line_no, "expected 'anchor,a,b'"));
            };
            let anchor = Anchor::from_name(name)
                .ok_or_else(|| Error::parse(line_no, format!("unknown anchor '{name}'")))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(line_no, format!("invalid number '{s}'")))
            };
            let eq = LinearRangingEq::new(num(a)?, num(b)?)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
            if eqs[anchor.index()].replace(eq).is_some() {
                return Err(Error::parse(line_no, format!("duplicate anchor '{name}'")));
            }
        }
        let kind = kind.ok_or_else(|| Error::parse(1, "missing 'kind' header"))?;
        let missing =
            |a: Anchor| Error::parse(0, format!("missing equation for anchor {}", a.name()));
        Ok(Self {
            kind,
            eq_a: eqs[0].ok_or_else(|| missing(Anchor::A))?,
            eq_b: eqs[1].ok_or_else(|| missing(Anchor::B))?,
            eq_c: eqs[2].ok_or_else(|| missing(Anchor::C))?,
        })
    }
}

/// Expected measured distance at `true_distance` for the given anchor.
pub fn predict_measured(model: &CalibrationModel, anchor: Anchor, true_distance: f64) -> f64 {
    model.equation(anchor).predict(true_distance)
}

/// Cleaned measurements at the four reference points, indexed
/// `[point][anchor]`. Index `j` across all twelve series forms one
/// measurement set.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationData {
    pub reference_points: [PointMm; 4],
    pub series: [[SampleSeries; 3]; 4],
}

impl ObservationData {
    pub fn new(reference_points: [PointMm; 4], series: [[SampleSeries; 3]; 4]) -> Result<Self> {
        if !reference_points.iter().all(PointMm::is_finite) {
            return Err(Error::NonFinitePoint);
        }
        Ok(Self {
            reference_points,
            series,
        })
    }

    /// Number of complete measurement sets (shortest series length).
    pub fn available_sets(&self) -> usize {
        self.series
            .iter()
            .flat_map(|row| row.iter().map(SampleSeries::len))
            .min()
            .unwrap_or(0)
    }

    fn measured(&self, point: usize, anchor: Anchor, set: usize) -> f64 {
        self.series[point][anchor.index()].values()[set]
    }
}

/// Result of [`fit_model`] with bookkeeping on how many sets contributed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub model: CalibrationModel,
    /// Sets drawn (after clamping to availability).
    pub sets_selected: usize,
    /// Sets skipped because some pair fit had a non-positive slope.
    pub sets_skipped: usize,
}

/// Equation for one anchor from one measurement set.
fn fit_anchor_for_set(
    kind: ModelKind,
    target: Anchor,
    obs: &ObservationData,
    anchors: &AnchorLayout,
    set: usize,
) -> Result<LinearRangingEq> {
    let rule = pairing_rule(kind, target);
    let (mut sum_a, mut sum_b) = (0.0, 0.0);
    for p in rule {
        let anchor_pos = anchors.get(p.source);
        let t1 = distance(obs.reference_points[p.first], anchor_pos);
        let t2 = distance(obs.reference_points[p.second], anchor_pos);
        let eq = fit_pair(
            t1,
            obs.measured(p.first, p.source, set),
            t2,
            obs.measured(p.second, p.source, set),
        )?;
        sum_a += eq.a;
        sum_b += eq.b;
    }
    let n = rule.len() as f64;
    LinearRangingEq::new(sum_a / n, sum_b / n)
}

/// Fits a calibration model of the given kind.
///
/// Draws `n_select` distinct set indices (clamped to the available count)
/// with a ChaCha8 stream seeded from `seed`, fits every anchor's equation
/// per set and returns the per-anchor parameter means, summed in selection
/// order. Sets with a non-positive slope are skipped.
pub fn fit_model(
    kind: ModelKind,
    obs: &ObservationData,
    anchors: &AnchorLayout,
    n_select: usize,
    seed: u64,
) -> Result<ModelFit> {
    if n_select == 0 {
        return Err(Error::InvalidParameter(
            "n_select must be at least 1".into(),
        ));
    }
    let available = obs.available_sets();
    if available == 0 {
        return Err(Error::InsufficientData(
            "no complete measurement sets".into(),
        ));
    }
    let n = if n_select > available {
        log::warn!(
            "only {available} measurement sets available, selecting all instead of {n_select}"
        );
        available
    } else {
        n_select
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selection = rand::seq::index::sample(&mut rng, available, n).into_vec();

    let mut sums = [(0.0f64, 0.0f64); 3];
    let mut used = 0usize;
    let mut skipped = 0usize;
    for &set in &selection {
        let per_anchor: Result<Vec<LinearRangingEq>> = Anchor::ALL
            .iter()
            .map(|&t| fit_anchor_for_set(kind, t, obs, anchors, set))
            .collect();
        match per_anchor {
            Ok(eqs) => {
                for (s, eq) in sums.iter_mut().zip(&eqs) {
                    s.0 += eq.a;
                    s.1 += eq.b;
                }
                used += 1;
            }
            Err(Error::NonPositiveSlope(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} of {n} measurement sets with non-positive slope");
    }
    if used == 0 {
        return Err(Error::InsufficientData(format!(
            "all {n} selected sets produced non-positive slopes"
        )));
    }
    let mean = |i: usize| LinearRangingEq::new(sums[i].0 / used as f64, sums[i].1 / used as f64);
    Ok(ModelFit {
        model: CalibrationModel {
            kind,
            eq_a: mean(0)?,
            eq_b: mean(1)?,
            eq_c: mean(2)?,
        },
        sets_selected: n,
        sets_skipped: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Observation data where every set measures `eq(anchor)` of the true
    /// distance exactly.
    fn linear_world(
        anchors: &AnchorLayout,
        sets: usize,
        eq: impl Fn(Anchor) -> LinearRangingEq,
    ) -> ObservationData {
        let series = DEFAULT_REFERENCE_POINTS.map(|p| {
            Anchor::ALL.map(|anc| {
                let m = eq(anc).predict(distance(p, anchors.get(anc)));
                SampleSeries::new(vec![m; sets]).unwrap()
            })
        });
        ObservationData::new(DEFAULT_REFERENCE_POINTS, series).unwrap()
    }

    #[test]
    fn fit_pair_examples() {
        let eq = fit_pair(100.0, 110.0, 900.0, 930.0).unwrap();
        // a = (930 - 110) / (900 - 100), b = 110 - a * 100
        let a = (930.0 - 110.0) / (900.0 - 100.0);
        assert_eq!(eq.a, a);
        assert_eq!(eq.b, 110.0 - a * 100.0);
        assert!((eq.a - 1.025).abs() < 1e-12 && (eq.b - 7.5).abs() < 1e-9);

        assert_eq!(
            fit_pair(100.0, 100.0, 900.0, 900.0).unwrap(),
            LinearRangingEq::IDENTITY
        );
        assert_eq!(
            fit_pair(500.0, 510.0, 500.0, 520.0),
            Err(Error::DegeneratePair(500.0))
        );
        assert!(matches!(
            fit_pair(100.0, 900.0, 900.0, 100.0),
            Err(Error::NonPositiveSlope(_))
        ));
    }

    #[test]
    fn predict_examples() {
        let m = CalibrationModel::identity(ModelKind::Two);
        for anc in Anchor::ALL {
            assert_eq!(predict_measured(&m, anc, 1234.5), 1234.5);
        }
        assert!((LinearRangingEq::new(1.025, 7.5).unwrap().predict(400.0) - 417.5).abs() < 1e-9);
        let m = CalibrationModel::uniform(ModelKind::One, LinearRangingEq::new(1.1, 50.0).unwrap());
        assert!((predict_measured(&m, Anchor::C, 1000.0) - 1150.0).abs() < 1e-9);
    }

    #[test]
    fn identity_world_gives_identity_equations() {
        let anchors = AnchorLayout::default();
        let obs = linear_world(&anchors, 100, |_| LinearRangingEq::IDENTITY);
        for kind in ModelKind::ALL {
            let fit = fit_model(kind, &obs, &anchors, 60, 7).unwrap();
            assert_eq!(fit.model, CalibrationModel::identity(kind), "{kind}");
            assert_eq!(fit.sets_selected, 60);
        }
    }

    #[test]
    fn model_one_linear_world() {
        let anchors = AnchorLayout::default();
        let truth = LinearRangingEq::new(1.1, 50.0).unwrap();
        let obs = linear_world(&anchors, 80, |_| truth);
        let m = fit_model(ModelKind::One, &obs, &anchors, 60, 1)
            .unwrap()
            .model;
        for eq in [m.eq_a, m.eq_b, m.eq_c] {
            assert!((eq.a - 1.1).abs() < 1e-12 && (eq.b - 50.0).abs() < 1e-9);
        }
        assert_eq!(m.eq_a, m.eq_c);
    }

    #[test]
    fn model_two_uses_each_anchor_own_data() {
        let anchors = AnchorLayout::default();
        let per_anchor = |a: Anchor| match a {
            Anchor::A => LinearRangingEq::new(1.05, 10.0).unwrap(),
            Anchor::B => LinearRangingEq::new(1.00, 30.0).unwrap(),
            Anchor::C => LinearRangingEq::new(1.20, -5.0).unwrap(),
        };
        let obs = linear_world(&anchors, 10, per_anchor);
        let one = fit_model(ModelKind::One, &obs, &anchors, 5, 3)
            .unwrap()
            .model;
        let two = fit_model(ModelKind::Two, &obs, &anchors, 5, 3)
            .unwrap()
            .model;

        // direct pair oracle for anchor C under each rule
        let r1 = DEFAULT_REFERENCE_POINTS[0];
        let r4 = DEFAULT_REFERENCE_POINTS[3];
        let (ta1, ta4) = (distance(r1, anchors.a()), distance(r4, anchors.a()));
        let (tc1, tc4) = (distance(r1, anchors.c()), distance(r4, anchors.c()));
        let expect_one = fit_pair(
            ta1,
            per_anchor(Anchor::A).predict(ta1),
            ta4,
            per_anchor(Anchor::A).predict(ta4),
        )
        .unwrap();
        let expect_two = fit_pair(
            tc1,
            per_anchor(Anchor::C).predict(tc1),
            tc4,
            per_anchor(Anchor::C).predict(tc4),
        )
        .unwrap();
        assert!((one.eq_c.a - expect_one.a).abs() < 1e-12);
        assert!((two.eq_c.a - expect_two.a).abs() < 1e-12);
        assert!((two.eq_c.b - expect_two.b).abs() < 1e-9);
        assert!((one.eq_c.a - two.eq_c.a).abs() > 0.1);
    }

    #[test]
    fn pairing_rules_match_model_definitions() {
        assert_eq!(
            pairing_rule(ModelKind::One, Anchor::C),
            pairing_rule(ModelKind::One, Anchor::A)
        );
        assert_eq!(
            pairing_rule(ModelKind::Four, Anchor::A),
            pairing_rule(ModelKind::Three, Anchor::A)
        );
        assert_eq!(
            pairing_rule(ModelKind::Four, Anchor::B),
            pairing_rule(ModelKind::Three, Anchor::B)
        );
        assert_eq!(
            pairing_rule(ModelKind::Four, Anchor::C),
            pairing_rule(ModelKind::Two, Anchor::C)
        );
        for t in Anchor::ALL {
            for p in pairing_rule(ModelKind::Three, t) {
                assert_eq!(p.source, t);
            }
        }
    }

    #[test]
    fn single_selection_is_one_pair_fit() {
        let anchors = AnchorLayout::default();
        // distinct values per set so the chosen set matters
        let series = DEFAULT_REFERENCE_POINTS.map(|p| {
            Anchor::ALL.map(|anc| {
                let t = distance(p, anchors.get(anc));
                SampleSeries::new((0..20).map(|j| 1.02 * t + 5.0 + j as f64).collect()).unwrap()
            })
        });
        let obs = ObservationData::new(DEFAULT_REFERENCE_POINTS, series).unwrap();
        let fit = fit_model(ModelKind::Two, &obs, &anchors, 1, 99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let set = rand::seq::index::sample(&mut rng, 20, 1).index(0);
        let p = pairing_rule(ModelKind::Two, Anchor::B)[0];
        let tb = |i: usize| distance(DEFAULT_REFERENCE_POINTS[i], anchors.b());
        let expect = fit_pair(
            tb(p.first),
            obs.series[p.first][1].values()[set],
            tb(p.second),
            obs.series[p.second][1].values()[set],
        )
        .unwrap();
        assert_eq!(fit.model.eq_b, expect);
    }

    #[test]
    fn clamps_selection_and_errors_when_empty() {
        let anchors = AnchorLayout::default();
        let obs = linear_world(&anchors, 10, |_| LinearRangingEq::IDENTITY);
        let fit = fit_model(ModelKind::Three, &obs, &anchors, 60, 0).unwrap();
        assert_eq!(fit.sets_selected, 10);
        assert!(fit_model(ModelKind::Three, &obs, &anchors, 0, 0).is_err());
    }

    #[test]
    fn bad_sets_are_skipped() {
        let anchors = AnchorLayout::default();
        let mut obs = linear_world(&anchors, 4, |_| LinearRangingEq::IDENTITY);
        // make set 0 invert anchor A between points 1 and 4
        let mut v = obs.series[0][0].values().to_vec();
        v[0] = 5000.0;
        obs.series[0][0] = SampleSeries::new(v).unwrap();
        let fit = fit_model(ModelKind::Two, &obs, &anchors, 4, 0).unwrap();
        assert_eq!(fit.sets_skipped, 1);
        assert_eq!(fit.model, CalibrationModel::identity(ModelKind::Two));
    }

    #[test]
    fn text_round_trip() {
        let m = CalibrationModel {
            kind: ModelKind::Four,
            eq_a: LinearRangingEq::new(1.0000000000000002, 20.123456789012345).unwrap(),
            eq_b: LinearRangingEq::new(0.987654321, -3.5).unwrap(),
            eq_c: LinearRangingEq::new(1.1, 1e-7).unwrap(),
        };
        let text = m.to_text();
        assert!(text.starts_with("kind,four\n"));
        assert_eq!(CalibrationModel::from_text(&text).unwrap(), m);
        assert!(CalibrationModel::from_text("kind,four\nA,1,0\nB,1,0\n").is_err());
        assert!(CalibrationModel::from_text("A,1,0\n").is_err());
    }
}
