//! Weave-level domain types shared by the encoder, decoder and evaluator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary weave pattern: one row per weft, one column per warp.
///
/// A cell value of 1 means the weft lies on top of the warp at that crossing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryPattern {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

impl BinaryPattern {
    pub fn new(rows: usize, cols: usize, cells: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "pattern dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if cells.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "pattern has {} cells, expected {rows}x{cols}",
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().find(|&&c| c > 1) {
            return Err(Error::InvalidInput(format!("pattern cell value {bad} is not 0 or 1")));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(f(r, c));
            }
        }
        Self::new(rows, cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        assert!(value <= 1, "pattern cells are 0 or 1");
        self.cells[row * self.cols + col] = value;
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            cells: self.cells.iter().map(|c| 1 - c).collect(),
        }
    }

    /// Columns in reverse order (the pattern seen in a left-right mirror).
    pub fn reverse_cols(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, self.cols - 1 - c)).expect("same shape")
    }

    pub fn reverse_rows(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self.get(self.rows - 1 - r, c)).expect("same shape")
    }
}

/// A crossing point in image coordinates with its top-yarn state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossPoint {
    pub x: f64,
    pub y: f64,
    /// 1 = weft on top, 0 = warp on top.
    pub v: u8,
}

impl CrossPoint {
    pub fn new(x: f64, y: f64, v: u8) -> Self {
        Self { x, y, v }
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    /// Nearest pixel, rounding halves away from zero.
    pub fn pixel(&self) -> (i64, i64) {
        (self.x.round() as i64, self.y.round() as i64)
    }
}

pub type CrossPointSet = Vec<CrossPoint>;

/// Index of the crossing nearest to `(x, y)`; ties go to the lower index.
pub fn nearest_crossing(points: &[CrossPoint], x: f64, y: f64) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.distance(x, y)))
        .fold(None, |best, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        })
}

/// Checks the annotation invariants: inside the image and at least 2 px apart.
pub fn validate_crossings(points: &[CrossPoint], width: usize, height: usize) -> Result<()> {
    for p in points {
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= (width - 1) as f64 && p.y <= (height - 1) as f64) {
            return Err(Error::InvalidInput(format!(
                "crossing ({}, {}) lies outside the {width}x{height} image",
                p.x, p.y
            )));
        }
        if p.v > 1 {
            return Err(Error::InvalidInput(format!("crossing value {} is not 0 or 1", p.v)));
        }
    }
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.distance(b.x, b.y) < 2.0 {
                return Err(Error::InvalidInput(format!(
                    "crossings ({}, {}) and ({}, {}) are closer than 2 px",
                    a.x, a.y, b.x, b.y
                )));
            }
        }
    }
    Ok(())
}

/// Warp column positions and weft row positions; grid points are their product.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct YarnGrid {
    pub warp_x: Vec<f64>,
    pub weft_y: Vec<f64>,
}

impl YarnGrid {
    pub fn new(warp_x: Vec<f64>, weft_y: Vec<f64>) -> Result<Self> {
        let grid = Self { warp_x, weft_y };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in [("warp_x", &self.warp_x), ("weft_y", &self.weft_y)] {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} holds a non-finite position")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!("{name} is not strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.warp_x.is_empty() || self.weft_y.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.warp_x.len() * self.weft_y.len()
    }

    /// Grid points in row-major order (weft index outer, warp index inner).
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        self.weft_y.iter().enumerate().flat_map(move |(i, &y)| {
            self.warp_x.iter().enumerate().map(move |(j, &x)| (i, j, x, y))
        })
    }

    pub fn mirror_horizontal(&self, width: usize) -> Self {
        Self {
            warp_x: self.warp_x.iter().rev().map(|x| (width - 1) as f64 - x).collect(),
            weft_y: self.weft_y.clone(),
        }
    }

    pub fn mirror_vertical(&self, height: usize) -> Self {
        Self {
            warp_x: self.warp_x.clone(),
            weft_y: self.weft_y.iter().rev().map(|y| (height - 1) as f64 - y).collect(),
        }
    }
}

/// Representative gray levels of the two yarn families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepColors {
    pub warp: f64,
    pub weft: f64,
}

impl RepColors {
    pub fn new(warp: f64, weft: f64) -> Result<Self> {
        if warp == weft || !warp.is_finite() || !weft.is_finite() {
            return Err(Error::DegenerateColors);
        }
        Ok(Self { warp, weft })
    }

    /// 1 when `intensity` is strictly closer to the weft color; ties give 0.
    pub fn classify(&self, intensity: f64) -> u8 {
        u8::from((intensity - self.weft).abs() < (intensity - self.warp).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_rejects_bad_cells() {
        assert!(BinaryPattern::new(2, 2, vec![0, 1, 2, 0]).is_err());
        assert!(BinaryPattern::new(0, 2, vec![]).is_err());
        assert!(BinaryPattern::new(2, 2, vec![0, 1, 1]).is_err());
    }

    #[test]
    fn classify_tie_goes_to_zero() {
        let c = RepColors::new(0.2, 0.8).unwrap();
        assert_eq!(c.classify(0.5), 0);
        assert_eq!(c.classify(0.51), 1);
        assert_eq!(c.classify(0.1), 0);
        assert!(RepColors::new(0.4, 0.4).is_err());
    }

    #[test]
    fn grid_must_increase() {
        assert!(YarnGrid::new(vec![1.0, 1.0], vec![2.0]).is_err());
        let g = YarnGrid::new(vec![10.0, 30.0], vec![5.0]).unwrap();
        assert_eq!(g.mirror_horizontal(50).warp_x, vec![19.0, 39.0]);
        assert_eq!(g.points().count(), 2);
    }

    #[test]
    fn crossing_validation() {
        let pts = vec![CrossPoint::new(1.0, 1.0, 1), CrossPoint::new(2.5, 1.0, 0)];
        assert!(validate_crossings(&pts, 10, 10).is_err());
        let pts = vec![CrossPoint::new(1.0, 1.0, 1), CrossPoint::new(3.0, 1.0, 0)];
        assert!(validate_crossings(&pts, 10, 10).is_ok());
        assert!(validate_crossings(&[CrossPoint::new(10.0, 0.0, 1)], 10, 10).is_err());
    }

    #[test]
    fn nearest_prefers_lower_index_on_ties() {
        let pts = vec![CrossPoint::new(0.0, 0.0, 1), CrossPoint::new(2.0, 0.0, 0)];
        assert_eq!(nearest_crossing(&pts, 1.0, 0.0).unwrap().0, 0);
        assert_eq!(nearest_crossing(&pts, 1.5, 0.0).unwrap().0, 1);
        assert!(nearest_crossing(&[], 0.0, 0.0).is_none());
    }
}
