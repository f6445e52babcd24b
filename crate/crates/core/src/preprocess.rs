//! Cleanup of repeated range measurements: median-absolute-deviation
//! outlier removal and the fixed-ratio scale-down of long ranges.

use crate::error::{Error, Result};
use crate::geometry::RangeTriple;

/// Consistency constant turning the MAD into a standard-deviation estimate
/// for normally distributed data.
pub const MAD_NORMAL_SCALE: f64 = 1.4826;

/// Default number of scaled MADs a value may sit away from the median.
pub const MAD_DEFAULT_K: f64 = 3.0;

/// Repeated measurements of one anchor distance at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    values: Vec<f64>,
}

impl SampleSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !values.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::NonFiniteRange);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Median of a non-empty slice; the mean of the two central values for even
/// lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Unscaled median absolute deviation around `center`.
pub fn mad(values: &[f64], center: f64) -> Option<f64> {
    let dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    median(&dev)
}

/// Parameters of the MAD rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadParams {
    pub k: f64,
    pub scale: f64,
}

impl Default for MadParams {
    fn default() -> Self {
        Self {
            k: MAD_DEFAULT_K,
            scale: MAD_NORMAL_SCALE,
        }
    }
}

impl MadParams {
    pub fn validate(&self) -> Result<()> {
        // k * scale >= 1 keeps at least the central value(s) of every series
        if !(self.k.is_finite() && self.scale.is_finite() && self.k > 0.0 && self.scale > 0.0)
            || self.k * self.scale < 1.0
        {
            return Err(Error::InvalidParameter(format!(
                "MAD rule needs finite k, scale > 0 with k*scale >= 1 (got k={}, scale={})",
                self.k, self.scale
            )));
        }
        Ok(())
    }
}

/// Keeps the values within `k * scale * MAD` of the median, in their
/// original order. With a zero MAD only values equal to the median survive.
pub fn mad_filter(series: &SampleSeries, params: MadParams) -> Result<SampleSeries> {
    params.validate()?;
    let values = series.values();
    let med = median(values).ok_or(Error::EmptySeries)?;
    let spread = mad(values, med).ok_or(Error::EmptySeries)?;
    let cutoff = params.k * params.scale * spread;
    let kept: Vec<f64> = values
        .iter()
        .copied()
        .filter(|v| (v - med).abs() <= cutoff)
        .collect();
    debug_assert!(!kept.is_empty());
    SampleSeries::new(kept)
}

/// Scale-down applied to measurements above a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionPolicy {
    pub threshold: f64,
    pub ratio: f64,
}

impl CorrectionPolicy {
    pub const DEFAULT_THRESHOLD: f64 = 1000.0;
    /// Ratios examined in the original hardware study.
    pub const STUDIED_RATIOS: [f64; 4] = [1.0, 0.9, 0.85, 0.8];

    pub fn new(threshold: f64, ratio: f64) -> Result<Self> {
        let p = Self { threshold, ratio };
        p.validate()?;
        Ok(p)
    }

    pub fn with_ratio(ratio: f64) -> Result<Self> {
        Self::new(Self::DEFAULT_THRESHOLD, ratio)
    }

    /// The identity policy (ratio 1.0).
    pub fn none() -> Self {
        Self {
            threshold: Self::DEFAULT_THRESHOLD,
            ratio: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "correction ratio must be in (0, 1], got {}",
                self.ratio
            )));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "correction threshold must be positive, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

impl Default for CorrectionPolicy {
    fn default() -> Self {
        Self {
            threshold: Self::DEFAULT_THRESHOLD,
            ratio: 0.9,
        }
    }
}

/// `measured * ratio` when strictly above the threshold, else `measured`.
pub fn correct_range(measured: f64, policy: &CorrectionPolicy) -> f64 {
    if measured > policy.threshold {
        measured * policy.ratio
    } else {
        measured
    }
}

pub fn correct_triple(ranges: &RangeTriple, policy: &CorrectionPolicy) -> RangeTriple {
    ranges.map(|d| correct_range(d, policy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> SampleSeries {
        SampleSeries::new(v.to_vec()).unwrap()
    }

    // Order-statistic oracle: the value whose rank range covers `pos`,
    // found by counting rather than sorting.
    fn order_stat(v: &[f64], pos: usize) -> f64 {
        v.iter()
            .copied()
            .find(|&c| {
                let below = v.iter().filter(|&&x| x < c).count();
                let equal = v.iter().filter(|&&x| x == c).count();
                below <= pos && pos < below + equal
            })
            .unwrap()
    }

    fn brute_median(v: &[f64]) -> f64 {
        let n = v.len();
        (order_stat(v, (n - 1) / 2) + order_stat(v, n / 2)) / 2.0
    }

    #[test]
    fn single_value_survives() {
        let out = mad_filter(&series(&[100.0]), MadParams::default()).unwrap();
        assert_eq!(out.values(), &[100.0]);
    }

    #[test]
    fn gross_outlier_removed() {
        let v = [98.0, 99.0, 100.0, 101.0, 102.0, 500.0];
        let med = brute_median(&v);
        assert_eq!(med, 100.5);
        let dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
        assert_eq!(brute_median(&dev), 1.5);
        let out = mad_filter(&series(&v), MadParams::default()).unwrap();
        assert_eq!(out.values(), &[98.0, 99.0, 100.0, 101.0, 102.0]);
    }

    #[test]
    fn zero_mad_keeps_only_median_values() {
        let out = mad_filter(
            &series(&[10.0, 10.0, 10.0, 10.0, 25.0]),
            MadParams::default(),
        )
        .unwrap();
        assert_eq!(out.values(), &[10.0, 10.0, 10.0, 10.0]);
    }

    #[test]
    fn unscaled_reading_is_stricter() {
        let v = [90.0, 100.0, 101.0, 102.0, 110.0, 80.0, 120.0];
        let scaled = mad_filter(&series(&v), MadParams::default()).unwrap();
        let raw = mad_filter(&series(&v), MadParams { k: 3.0, scale: 1.0 }).unwrap();
        assert!(raw.len() <= scaled.len());
    }

    #[test]
    fn empty_and_bad_params() {
        assert_eq!(SampleSeries::new(vec![]), Err(Error::EmptySeries));
        assert!(mad_filter(&series(&[1.0]), MadParams { k: 0.5, scale: 1.0 }).is_err());
    }

    #[test]
    fn correction_examples() {
        let p90 = CorrectionPolicy::with_ratio(0.9).unwrap();
        assert_eq!(correct_range(800.0, &p90), 800.0);
        assert_eq!(correct_range(1200.0, &p90), 1200.0 * 0.9);
        assert!((correct_range(1200.0, &p90) - 1080.0).abs() < 1e-9);
        let p80 = CorrectionPolicy::with_ratio(0.8).unwrap();
        assert_eq!(correct_range(1000.0, &p80), 1000.0);
    }

    #[test]
    fn triple_correction() {
        let p85 = CorrectionPolicy::with_ratio(0.85).unwrap();
        let t = correct_triple(&RangeTriple::new(500.0, 1500.0, 999.0).unwrap(), &p85);
        assert_eq!(t.d_a, 500.0);
        assert!((t.d_b - 1275.0).abs() < 1e-9);
        assert_eq!(t.d_c, 999.0);

        let p90 = CorrectionPolicy::with_ratio(0.9).unwrap();
        let t = correct_triple(&RangeTriple::new(1001.0, 1001.0, 1001.0).unwrap(), &p90);
        for v in t.as_array() {
            assert!((v - 900.9).abs() < 1e-9);
        }

        let orig = RangeTriple::new(123.0, 4567.0, 1000.5).unwrap();
        assert_eq!(correct_triple(&orig, &CorrectionPolicy::none()), orig);
    }

    #[test]
    fn policy_validation() {
        assert!(CorrectionPolicy::with_ratio(0.0).is_err());
        assert!(CorrectionPolicy::with_ratio(1.1).is_err());
        assert!(CorrectionPolicy::new(-1.0, 0.9).is_err());
        for r in CorrectionPolicy::STUDIED_RATIOS {
            assert!(CorrectionPolicy::with_ratio(r).is_ok());
        }
    }
}
