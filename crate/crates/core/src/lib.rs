//! UWB range-fingerprint indoor localization.
//!
//! A 1000 x 2000 mm area is covered by three ranging anchors. Raw ranges are
//! cleaned (MAD filter, over-range correction), an affine ranging model is
//! fitted per anchor from four reference points, a 25 mm fingerprint grid is
//! synthesized from the model, and a classifier maps a measured range triple
//! to a grid cell. A trilateration baseline, a seeded measurement simulator
//! and an experiment runner complete the pipeline.

pub mod calibration;
pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod geometry;
pub mod learners;
pub mod preprocess;
pub mod simulator;

pub use error::{Error, Result};
pub use geometry::{distance, trilaterate, Anchor, AnchorLayout, PointMm, RangeTriple};
