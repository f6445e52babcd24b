//! Planar coordinates, anchor layouts and the closed-form trilateration
//! solver used as the no-learning baseline.
//!
//! All lengths are millimeters.

use std::fmt;

use crate::error::{Error, Result};

/// A 2-D location in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMm {
    pub x: f64,
    pub y: f64,
}

impl PointMm {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// True when the point lies inside the `[0, width] x [0, height]` rectangle.
    pub fn in_area(&self, width: f64, height: f64) -> bool {
        self.is_finite() && (0.0..=width).contains(&self.x) && (0.0..=height).contains(&self.y)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for PointMm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Euclidean distance between two points.
pub fn distance(p: PointMm, q: PointMm) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Which of the three anchors a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Anchor {
    A,
    B,
    C,
}

impl Anchor {
    pub const ALL: [Anchor; 3] = [Anchor::A, Anchor::B, Anchor::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Anchor::A => "A",
            Anchor::B => "B",
            Anchor::C => "C",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.trim() {
            "A" | "a" => Some(Anchor::A),
            "B" | "b" => Some(Anchor::B),
            "C" | "c" => Some(Anchor::C),
            _ => None,
        }
    }
}

/// Minimum triangle area (mm²) for three anchors to count as non-collinear.
pub const MIN_ANCHOR_AREA: f64 = 1e-6;

/// Three non-collinear anchor positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorLayout {
    a: PointMm,
    b: PointMm,
    c: PointMm,
}

impl AnchorLayout {
    pub fn new(a: PointMm, b: PointMm, c: PointMm) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::NonFinitePoint);
        }
        let layout = Self { a, b, c };
        if layout.triangle_area() <= MIN_ANCHOR_AREA {
            return Err(Error::CollinearAnchors);
        }
        Ok(layout)
    }

    pub fn a(&self) -> PointMm {
        self.a
    }

    pub fn b(&self) -> PointMm {
        self.b
    }

    pub fn c(&self) -> PointMm {
        self.c
    }

    pub fn get(&self, anchor: Anchor) -> PointMm {
        match anchor {
            Anchor::A => self.a,
            Anchor::B => self.b,
            Anchor::C => self.c,
        }
    }

    pub fn triangle_area(&self) -> f64 {
        0.5 * ((self.b.x - self.a.x) * (self.c.y - self.a.y)
            - (self.c.x - self.a.x) * (self.b.y - self.a.y))
            .abs()
    }

    /// Exact distances from `p` to the three anchors.
    pub fn ranges_from(&self, p: PointMm) -> RangeTriple {
        RangeTriple {
            d_a: distance(p, self.a),
            d_b: distance(p, self.b),
            d_c: distance(p, self.c),
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            a: self.a.translate(dx, dy),
            b: self.b.translate(dx, dy),
            c: self.c.translate(dx, dy),
        }
    }
}

impl Default for AnchorLayout {
    /// Two anchors on the left long side and one on the bottom-right corner
    /// of the 1000 x 2000 mm area.
    fn default() -> Self {
        Self {
            a: PointMm::new(0.0, 0.0),
            b: PointMm::new(0.0, 2000.0),
            c: PointMm::new(1000.0, 0.0),
        }
    }
}

/// One measurement instance: the distances to anchors A, B and C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeTriple {
    pub d_a: f64,
    pub d_b: f64,
    pub d_c: f64,
}

impl RangeTriple {
    /// Builds a triple, rejecting non-finite or non-positive components.
    pub fn new(d_a: f64, d_b: f64, d_c: f64) -> Result<Self> {
        let t = Self { d_a, d_b, d_c };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::NonFiniteRange)
        }
    }

    pub fn get(&self, anchor: Anchor) -> f64 {
        match anchor {
            Anchor::A => self.d_a,
            Anchor::B => self.d_b,
            Anchor::C => self.d_c,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.d_a, self.d_b, self.d_c]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            d_a: v[0],
            d_b: v[1],
            d_c: v[2],
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            d_a: f(self.d_a),
            d_b: f(self.d_b),
            d_c: f(self.d_c),
        }
    }

    /// Squared Euclidean distance in fingerprint space.
    pub fn dist2(&self, other: &RangeTriple) -> f64 {
        let da = self.d_a - other.d_a;
        let db = self.d_b - other.d_b;
        let dc = self.d_c - other.d_c;
        da * da + db * db + dc * dc
    }
}

/// Position from three ranges.
///
/// Subtracting the circle of anchor A from those of B and C gives a 2x2
/// linear system in (x, y), solved here by Cramer's rule. Consistent ranges
/// recover the true point; inconsistent ones give the linearized
/// least-squares intersection. The result is not clamped to any area.
pub fn trilaterate(anchors: &AnchorLayout, ranges: &RangeTriple) -> Result<PointMm> {
    ranges.validate()?;
    let (a, b, c) = (anchors.a, anchors.b, anchors.c);

    // Work relative to A so the system stays well scaled under translation.
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let ra2 = ranges.d_a * ranges.d_a;

    let m11 = 2.0 * bx;
    let m12 = 2.0 * by;
    let m21 = 2.0 * cx;
    let m22 = 2.0 * cy;
    let r1 = ra2 - ranges.d_b * ranges.d_b + bx * bx + by * by;
    let r2 = ra2 - ranges.d_c * ranges.d_c + cx * cx + cy * cy;

    let det = m11 * m22 - m12 * m21;
    // det is 8x the triangle area
    if det.abs() <= 8.0 * MIN_ANCHOR_AREA {
        return Err(Error::CollinearAnchors);
    }
    let x = (r1 * m22 - m12 * r2) / det;
    let y = (m11 * r2 - r1 * m21) / det;
    let p = PointMm::new(a.x + x, a.y + y);
    if !p.is_finite() {
        return Err(Error::NonFiniteRange);
    }
    Ok(p)
}
