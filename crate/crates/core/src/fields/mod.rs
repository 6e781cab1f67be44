//! Node-grid scalar fields on the unit square.
//!
//! A [`Grid`] with `n` nodes per side covers `[0, 1]^2` including the boundary
//! rows and columns; node `(i, j)` sits at `x = j h`, `y = i h` with
//! `h = 1 / (n - 1)`. Values are stored row-major.

mod dataset;

pub use dataset::{load_sampleset, save_sampleset, Manifest, SampleSet, FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per side, got {n}"
            )));
        }
        Ok(Grid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    /// Coordinate of node index `k` along either axis. Exact at both ends.
    pub fn coord(&self, k: usize) -> f64 {
        k as f64 / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }
}

/// Boundary ring policy used by [`pad`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PadMode {
    Zero,
    Constant(f64),
    Wrap,
}

/// A square array of samples with uniform spacing `h`.
///
/// Fields built from a [`Grid`] have `side == n`. Padding and interior
/// extraction keep the spacing and change the side by two.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    side: usize,
    h: f64,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField2D {
            side: grid.n(),
            h: grid.h(),
            values: vec![c; grid.len()],
        }
    }

    /// Evaluates `f(x, y)` at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            let y = grid.coord(i);
            for j in 0..n {
                values.push(f(grid.coord(j), y));
            }
        }
        ScalarField2D {
            side: n,
            h: grid.h(),
            values,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::from_raw(grid.n(), grid.h(), values)
    }

    /// Builds a field of arbitrary side and spacing, checking length and finiteness.
    pub fn from_raw(side: usize, h: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != side * side {
            return Err(Error::Shape(format!(
                "{} values for a {side}x{side} field",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(ScalarField2D { side, h, values })
    }

    pub(crate) fn from_raw_unchecked(side: usize, h: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), side * side);
        ScalarField2D { side, h, values }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.side + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.side + j] = v;
    }

    /// True when this is a node field of `grid`.
    pub fn is_on(&self, grid: Grid) -> bool {
        self.side == grid.n() && self.h == grid.h()
    }

    pub fn check_on(&self, grid: Grid) -> Result<()> {
        if self.is_on(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: grid.n(),
                found: self.side,
            })
        }
    }

    pub fn check_same_shape(&self, other: &ScalarField2D) -> Result<()> {
        if self.side == other.side && self.h == other.h {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.side,
                found: other.side,
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// The `(side - 2)^2` block without the outer ring.
    pub fn interior(&self) -> ScalarField2D {
        let s = self.side;
        assert!(s >= 3, "interior of a {s}x{s} field is empty");
        let k = s - 2;
        let mut values = Vec::with_capacity(k * k);
        for i in 1..s - 1 {
            values.extend_from_slice(&self.values[i * s + 1..i * s + s - 1]);
        }
        ScalarField2D {
            side: k,
            h: self.h,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField2D {
        ScalarField2D {
            side: self.side,
            h: self.h,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> ScalarField2D {
        self.map(|v| alpha * v)
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Surrounds `field` with a one-node ring chosen by `mode`.
pub fn pad(field: &ScalarField2D, mode: PadMode) -> ScalarField2D {
    let n = field.side;
    let p = n + 2;
    let ring = match mode {
        PadMode::Zero => 0.0,
        PadMode::Constant(c) => c,
        PadMode::Wrap => 0.0,
    };
    let mut values = vec![ring; p * p];
    for i in 0..n {
        values[(i + 1) * p + 1..(i + 1) * p + 1 + n]
            .copy_from_slice(&field.values[i * n..(i + 1) * n]);
    }
    if let PadMode::Wrap = mode {
        for q in 0..p {
            let src_j = (q + n - 1) % n;
            values[q] = field.values[(n - 1) * n + src_j];
            values[(p - 1) * p + q] = field.values[src_j];
        }
        for i in 0..n {
            values[(i + 1) * p] = field.values[i * n + n - 1];
            values[(i + 1) * p + p - 1] = field.values[i * n];
        }
    }
    ScalarField2D {
        side: p,
        h: field.h,
        values,
    }
}

/// `||pred - truth||_1 / ||truth||_1`, summed over every node.
pub fn relative_l1(pred: &ScalarField2D, truth: &ScalarField2D) -> Result<f64> {
    pred.check_same_shape(truth)?;
    let denom = truth.l1_norm();
    if denom == 0.0 {
        return Err(Error::Degenerate("truth has zero L1 norm".into()));
    }
    let num: f64 = pred
        .values
        .iter()
        .zip(&truth.values)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(num / denom)
}

/// Median of per-sample errors; the lower of the two middle values for even counts.
pub fn median_over_samples(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("median of an empty list".into()));
    }
    if let Some(k) = errors.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[(sorted.len() - 1) / 2])
}
