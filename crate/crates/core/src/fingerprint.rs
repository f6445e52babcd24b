//! Square-grid partition of the test area and the synthetic fingerprint
//! database derived from a calibration model.
//!
//! Cells are labeled row-major with x varying fastest; a label stands for
//! the lower-left vertex of its cell.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::calibration::{predict_measured, CalibrationModel};
use crate::error::{Error, Result};
use crate::geometry::{Anchor, AnchorLayout, PointMm, RangeTriple};

/// Index of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellLabel(pub u32);

impl CellLabel {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    width: f64,
    height: f64,
    spacing: f64,
    cols: u32,
    rows: u32,
}

fn whole_multiple(len: f64, spacing: f64) -> Option<u32> {
    let n = (len / spacing).round();
    (n >= 1.0 && n <= u32::MAX as f64 && n * spacing == len).then_some(n as u32)
}

impl GridSpec {
    pub fn new(width: f64, height: f64, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid dimensions must be finite and positive (width={width}, height={height}, spacing={spacing})"
            )));
        }
        let (Some(cols), Some(rows)) = (
            whole_multiple(width, spacing),
            whole_multiple(height, spacing),
        ) else {
            return Err(Error::InvalidParameter(format!(
                "width {width} and height {height} must be positive multiples of spacing {spacing}"
            )));
        };
        if (cols as u64) * (rows as u64) > u32::MAX as u64 {
            return Err(Error::InvalidParameter("grid has too many cells".into()));
        }
        Ok(Self {
            width,
            height,
            spacing,
            cols,
            rows,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cell_count(&self) -> u32 {
        self.cols * self.rows
    }

    pub fn labels(&self) -> impl Iterator<Item = CellLabel> {
        (0..self.cell_count()).map(CellLabel)
    }

    pub fn contains(&self, p: PointMm) -> bool {
        p.in_area(self.width, self.height)
    }
}

impl Default for GridSpec {
    /// 1000 x 2000 mm at 25 mm spacing: 40 columns, 80 rows, 3200 cells.
    fn default() -> Self {
        Self {
            width: 1000.0,
            height: 2000.0,
            spacing: 25.0,
            cols: 40,
            rows: 80,
        }
    }
}

/// Lower-left vertex of a cell.
pub fn cell_vertex(spec: &GridSpec, label: CellLabel) -> Result<PointMm> {
    if label.0 >= spec.cell_count() {
        return Err(Error::LabelOutOfRange {
            label: label.0,
            count: spec.cell_count(),
        });
    }
    let col = label.0 % spec.cols;
    let row = label.0 / spec.cols;
    Ok(PointMm::new(
        col as f64 * spec.spacing,
        row as f64 * spec.spacing,
    ))
}

/// Label of the cell containing `p`. Points on the far edges snap to the
/// last column/row.
pub fn vertex_to_label(spec: &GridSpec, p: PointMm) -> Result<CellLabel> {
    if !spec.contains(p) {
        return Err(Error::OutOfArea { x: p.x, y: p.y });
    }
    let col = ((p.x / spec.spacing).floor() as u32).min(spec.cols - 1);
    let row = ((p.y / spec.spacing).floor() as u32).min(spec.rows - 1);
    Ok(CellLabel(row * spec.cols + col))
}

/// One predicted fingerprint per grid cell.
///
/// Entries are finite but may be zero or negative: a vertex can coincide
/// with an anchor, and a fitted intercept can push short predictions
/// below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDb {
    spec: GridSpec,
    entries: Vec<RangeTriple>,
}

impl FingerprintDb {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: CellLabel) -> Option<&RangeTriple> {
        self.entries.get(label.index())
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellLabel, &RangeTriple)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, f)| (CellLabel(i as u32), f))
    }

    /// `(fingerprint, label)` rows, one per cell.
    pub fn rows(&self) -> Vec<(RangeTriple, CellLabel)> {
        self.iter().map(|(l, f)| (*f, l)).collect()
    }

    /// The cell rows plus `copies` noisy copies of every fingerprint, each
    /// component perturbed by N(0, sigma). Copies are drawn from a ChaCha8
    /// stream seeded with `seed`, cell by cell in label order.
    pub fn augmented_rows(
        &self,
        copies: usize,
        sigma: f64,
        seed: u64,
    ) -> Vec<(RangeTriple, CellLabel)> {
        let mut rows = self.rows();
        if copies == 0 {
            return rows;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (label, fp) in self.iter() {
            for _ in 0..copies {
                let noisy = fp.map(|d| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    d + sigma * z
                });
                rows.push((noisy, label));
            }
        }
        rows
    }

    /// Writes the `spacing,width,height` header and one
    /// `label,x,y,fa,fb,fc` line per cell in label order.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{},{},{}\n",
            self.spec.spacing, self.spec.width, self.spec.height
        );
        for (label, fp) in self.iter() {
            let v = cell_vertex(&self.spec, label).expect("label from own grid");
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                label.0, v.x, v.y, fp.d_a, fp.d_b, fp.d_c
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty database file"))?;
        let h = parse_numbers(hline, header, 3)?;
        let spec =
            GridSpec::new(h[1], h[2], h[0]).map_err(|e| Error::parse(hline, e.to_string()))?;
        let mut entries = Vec::with_capacity(spec.cell_count() as usize);
        for (line_no, line) in lines {
            let v = parse_numbers(line_no, line, 6)?;
            let expected = entries.len();
            if v[0] != expected as f64 {
                return Err(Error::parse(
                    line_no,
                    format!("expected label {expected}, found {}", v[0]),
                ));
            }
            let label = CellLabel(expected as u32);
            let vertex =
                cell_vertex(&spec, label).map_err(|e| Error::parse(line_no, e.to_string()))?;
            if vertex.x != v[1] || vertex.y != v[2] {
                return Err(Error::parse(line_no, "vertex does not match label"));
            }
            entries.push(RangeTriple::from_array([v[3], v[4], v[5]]));
        }
        if entries.len() != spec.cell_count() as usize {
            return Err(Error::parse(
                0,
                format!(
                    "expected {} cells, found {}",
                    spec.cell_count(),
                    entries.len()
                ),
            ));
        }
        Ok(Self { spec, entries })
    }
}

pub(crate) fn parse_numbers(line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(Error::parse(
            line_no,
            format!("expected {expected} fields, found {}", fields.len()),
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("invalid number '{f}'")))
        })
        .collect()
}

/// Predicted measured distances from every cell vertex to the anchors.
pub fn build_db(
    model: &CalibrationModel,
    spec: &GridSpec,
    anchors: &AnchorLayout,
) -> Result<FingerprintDb> {
    let entries: Result<Vec<RangeTriple>> = (0..spec.cell_count())
        .into_par_iter()
        .map(|i| {
            let v = cell_vertex(spec, CellLabel(i))?;
            let truth = anchors.ranges_from(v);
            let fp = RangeTriple::from_array(
                Anchor::ALL.map(|anc| predict_measured(model, anc, truth.get(anc))),
            );
            if !fp.as_array().iter().all(|d| d.is_finite()) {
                return Err(Error::NonFiniteRange);
            }
            Ok(fp)
        })
        .collect();
    Ok(FingerprintDb {
        spec: *spec,
        entries: entries?,
    })
}
