//! Synthetic TOA range measurements standing in for UWB hardware.
//!
//! A measurement is `slope * d + offset + N(0, sigma)`, multiplied by
//! `inflation_factor` when that value exceeds `inflation_threshold`, and
//! clamped to at least 1 mm.
//!
//! # Random streams
//!
//! Every draw comes from a ChaCha8 generator (`rand_chacha`) whose 64-bit
//! seed is derived by chaining SplitMix64 finalizers over
//! `(seed, location_index, rep, anchor_index)`; see [`substream_seed`].
//! Campaign output therefore does not depend on evaluation order or on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fingerprint::{parse_numbers, GridSpec};
use crate::geometry::{Anchor, AnchorLayout, PointMm, RangeTriple};

/// Smallest range the simulator reports, in mm.
pub const MIN_RANGE_MM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub slope: f64,
    pub offset: f64,
    pub sigma: f64,
    pub inflation_threshold: f64,
    pub inflation_factor: f64,
    /// Probability of replacing a draw with a gross outlier.
    pub p_outlier: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            slope: 1.0,
            offset: 20.0,
            sigma: 30.0,
            inflation_threshold: 1000.0,
            inflation_factor: 1.0 / 0.9,
            p_outlier: 0.0,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    /// Noiseless identity measurements: every range equals the true distance.
    pub fn noiseless() -> Self {
        Self {
            slope: 1.0,
            offset: 0.0,
            sigma: 0.0,
            inflation_threshold: 1000.0,
            inflation_factor: 1.0,
            p_outlier: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.slope,
            self.offset,
            self.sigma,
            self.inflation_threshold,
            self.inflation_factor,
            self.p_outlier,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "noise parameters must be finite".into(),
            ));
        }
        if self.sigma < 0.0 || self.inflation_factor < 1.0 || self.slope <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise needs sigma >= 0, inflation_factor >= 1, slope > 0 (got {}, {}, {})",
                self.sigma, self.inflation_factor, self.slope
            )));
        }
        if !(0.0..=1.0).contains(&self.p_outlier) {
            return Err(Error::InvalidParameter(format!(
                "p_outlier must be in [0, 1], got {}",
                self.p_outlier
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream for one `(location, rep, anchor)` draw.
pub fn substream_seed(seed: u64, location_index: u64, rep: u64, anchor_index: u64) -> u64 {
    let mut h = splitmix64(seed);
    for part in [location_index, rep, anchor_index] {
        h = splitmix64(h ^ part);
    }
    h
}

/// Derives an independent top-level seed for a named purpose.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ purpose.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn substream(seed: u64, location_index: u64, rep: u64, anchor_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, location_index, rep, anchor_index))
}

/// One simulated range for a true distance.
///
/// Draw order: one standard normal, then (only when `p_outlier > 0`) a
/// uniform for the outlier decision and, if taken, a uniform factor in
/// `[1.5, 3)` that replaces the result with `base * factor`.
pub fn simulate_range<R: Rng + ?Sized>(true_d: f64, cfg: &NoiseConfig, stream: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(stream);
    let base = cfg.slope * true_d + cfg.offset + cfg.sigma * z;
    if cfg.p_outlier > 0.0 && stream.random::<f64>() < cfg.p_outlier {
        return (base * stream.random_range(1.5..3.0)).max(MIN_RANGE_MM);
    }
    let measured = if base > cfg.inflation_threshold {
        base * cfg.inflation_factor
    } else {
        base
    };
    measured.max(MIN_RANGE_MM)
}

/// Ranges for one target position using the `(location, rep)` substreams.
pub fn simulate_triple(
    anchors: &AnchorLayout,
    target: PointMm,
    cfg: &NoiseConfig,
    location_index: u64,
    rep: u64,
) -> RangeTriple {
    let truth = anchors.ranges_from(target);
    RangeTriple::from_array(Anchor::ALL.map(|anc| {
        let mut rng = substream(cfg.seed, location_index, rep, anc.index() as u64);
        simulate_range(truth.get(anc), cfg, &mut rng)
    }))
}

/// One row of a measurement file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub location: PointMm,
    pub ranges: RangeTriple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub locations: Vec<PointMm>,
    pub reps: usize,
    pub anchors: AnchorLayout,
    pub noise: NoiseConfig,
}

impl Campaign {
    pub fn validate(&self, area: &GridSpec) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidParameter(
                "campaign needs at least one repetition".into(),
            ));
        }
        if let Some(p) = self.locations.iter().find(|p| !area.contains(**p)) {
            return Err(Error::OutOfArea { x: p.x, y: p.y });
        }
        self.noise.validate()
    }
}

/// `reps` rows per location, location-major.
pub fn simulate_campaign(c: &Campaign) -> Vec<Measurement> {
    let reps = c.reps;
    (0..c.locations.len() * reps)
        .into_par_iter()
        .map(|i| {
            let (loc, rep) = (i / reps, i % reps);
            let location = c.locations[loc];
            Measurement {
                location,
                ranges: simulate_triple(&c.anchors, location, &c.noise, loc as u64, rep as u64),
            }
        })
        .collect()
}

pub const MEASUREMENT_HEADER: &str = "loc_x,loc_y,d_a,d_b,d_c";

pub fn write_measurements(rows: &[Measurement]) -> String {
    let mut out = String::with_capacity(rows.len() * 64);
    out.push_str(MEASUREMENT_HEADER);
    out.push('\n');
    for m in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            m.location.x, m.location.y, m.ranges.d_a, m.ranges.d_b, m.ranges.d_c
        ));
    }
    out
}

/// Parses a measurement file; errors carry 1-based line numbers.
pub fn read_measurements(text: &str) -> Result<Vec<Measurement>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.join(",") != MEASUREMENT_HEADER {
                return Err(Error::parse(
                    line_no,
                    format!("expected header '{MEASUREMENT_HEADER}'"),
                ));
            }
            saw_header = true;
            continue;
        }
        let v = parse_numbers(line_no, line, 5)?;
        let ranges =
            RangeTriple::new(v[2], v[3], v[4]).map_err(|e| Error::parse(line_no, e.to_string()))?;
        rows.push(Measurement {
            location: PointMm::new(v[0], v[1]),
            ranges,
        });
    }
    if !saw_header {
        return Err(Error::parse(1, "missing header"));
    }
    Ok(rows)
}

/// Groups rows by exact location, in order of first appearance.
pub fn group_by_location(rows: &[Measurement]) -> Vec<(PointMm, Vec<RangeTriple>)> {
    let mut groups: Vec<(PointMm, Vec<RangeTriple>)> = Vec::new();
    for m in rows {
        match groups.iter_mut().find(|(p, _)| *p == m.location) {
            Some((_, v)) => v.push(m.ranges),
            None => groups.push((m.location, vec![m.ranges])),
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{correct_range, CorrectionPolicy};

    #[test]
    fn noiseless_identity() {
        let cfg = NoiseConfig {
            inflation_factor: 1.0,
            ..NoiseConfig::noiseless()
        };
        let mut rng = substream(1, 0, 0, 0);
        assert_eq!(simulate_range(700.0, &cfg, &mut rng), 700.0);
    }

    #[test]
    fn pure_inflation() {
        let cfg = NoiseConfig {
            inflation_factor: 10.0 / 9.0,
            ..NoiseConfig::noiseless()
        };
        let mut rng = substream(1, 0, 0, 0);
        let v = simulate_range(1800.0, &cfg, &mut rng);
        assert!((v - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn fresh_streams_repeat() {
        let cfg = NoiseConfig::default();
        let a = simulate_range(1234.0, &cfg, &mut substream(42, 3, 7, 1));
        let b = simulate_range(1234.0, &cfg, &mut substream(42, 3, 7, 1));
        assert_eq!(a.to_bits(), b.to_bits());
        let c = simulate_range(1234.0, &cfg, &mut substream(42, 3, 7, 2));
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_mean_matches_affine_model() {
        let cfg = NoiseConfig::default();
        let n = 10_000;
        let d = 600.0;
        let mean: f64 = (0..n)
            .map(|i| simulate_range(d, &cfg, &mut substream(5, 0, i, 0)))
            .sum::<f64>()
            / n as f64;
        let expected = cfg.slope * d + cfg.offset;
        assert!(
            (mean - expected).abs() <= 3.0 * cfg.sigma / (n as f64).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn correction_undoes_inflation() {
        let cfg = NoiseConfig {
            inflation_factor: 1.0 / 0.9,
            offset: 15.0,
            ..NoiseConfig::noiseless()
        };
        let policy = CorrectionPolicy::with_ratio(0.9).unwrap();
        for d in [50.0, 900.0, 985.0, 986.0, 1000.0, 1500.0, 2236.0] {
            let m = simulate_range(d, &cfg, &mut substream(0, 0, 0, 0));
            let back = correct_range(m, &policy);
            let expect = d + 15.0;
            assert!(((back - expect) / expect).abs() < 1e-9, "{d}: {back}");
        }
    }

    #[test]
    fn outliers_are_injected() {
        let cfg = NoiseConfig {
            p_outlier: 1.0,
            ..NoiseConfig::noiseless()
        };
        let v = simulate_range(400.0, &cfg, &mut substream(0, 0, 0, 0));
        assert!((600.0..1200.0).contains(&v));
    }

    fn campaign(seed: u64, locations: usize, reps: usize) -> Campaign {
        Campaign {
            locations: (0..locations)
                .map(|i| PointMm::new(50.0 + 90.0 * i as f64, 100.0 + 150.0 * i as f64))
                .collect(),
            reps,
            anchors: AnchorLayout::default(),
            noise: NoiseConfig {
                seed,
                ..NoiseConfig::default()
            },
        }
    }

    #[test]
    fn campaign_shape_and_seed_dependence() {
        let c = campaign(1, 10, 500);
        c.validate(&GridSpec::default()).unwrap();
        let rows = simulate_campaign(&c);
        assert_eq!(rows.len(), 5000);
        assert_eq!(rows[500].location, c.locations[1]);
        assert_eq!(rows, simulate_campaign(&c));
        assert_ne!(rows, simulate_campaign(&campaign(2, 10, 500)));
    }

    #[test]
    fn noiseless_campaign_is_exact() {
        let mut c = campaign(1, 3, 4);
        c.noise = NoiseConfig::noiseless();
        for m in simulate_campaign(&c) {
            assert_eq!(m.ranges, c.anchors.ranges_from(m.location));
        }
    }

    #[test]
    fn campaign_validation() {
        let mut c = campaign(1, 1, 0);
        assert!(c.validate(&GridSpec::default()).is_err());
        c.reps = 1;
        c.locations.push(PointMm::new(-5.0, 0.0));
        assert!(matches!(
            c.validate(&GridSpec::default()),
            Err(Error::OutOfArea { .. })
        ));
    }

    #[test]
    fn measurement_file_round_trip() {
        let rows = simulate_campaign(&campaign(9, 2, 3));
        let text = write_measurements(&rows);
        assert!(text.starts_with("loc_x,loc_y,d_a,d_b,d_c\n"));
        assert_eq!(read_measurements(&text).unwrap(), rows);
        let groups = group_by_location(&rows);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[1].1.len(), 3);
    }

    #[test]
    fn measurement_parse_errors_have_lines() {
        let err = read_measurements("loc_x,loc_y,d_a,d_b,d_c\n1,2,3,4,5\n1,2,x,4,5\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 3,
                msg: "invalid number 'x'".into()
            }
        );
        assert!(read_measurements("1,2,3,4,5\n").is_err());
        assert!(matches!(
            read_measurements("loc_x,loc_y,d_a,d_b,d_c\n1,2,-3,4,5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
