//! Numeric kernels shared by feature extraction and learning.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{KlrfError, Result};

/// Singular values below `RANK_CUTOFF * sigma_max` are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(KlrfError::DimensionMismatch {
                what: format!("{rows}x{cols} matrix values"),
                expected: rows * cols,
                found: values.len(),
            });
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(KlrfError::DimensionMismatch {
                    what: format!("column {j}"),
                    expected: rows,
                    found: c.len(),
                });
            }
            for (i, v) in c.iter().enumerate() {
                m.values[i * cols + j] = *v;
            }
        }
        Ok(m)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.values
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Minimum-norm minimizer of `‖A·w − b‖²` via the SVD pseudoinverse.
pub fn least_squares_min_norm(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows == 0 || a.cols == 0 {
        return Err(KlrfError::InvalidInput("least squares needs a nonempty matrix".into()));
    }
    if b.len() != a.rows {
        return Err(KlrfError::DimensionMismatch {
            what: "right-hand side".into(),
            expected: a.rows,
            found: b.len(),
        });
    }
    if a.values.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(KlrfError::InvalidInput("least squares input is not finite".into()));
    }

    let svd = DMatrix::from_row_slice(a.rows, a.cols, &a.values).svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = RANK_CUTOFF * sigma_max;

    let mut w = vec![0.0; a.cols];
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let coef: f64 = (0..a.rows).map(|i| u[(i, k)] * b[i]).sum::<f64>() / s;
        for (j, wj) in w.iter_mut().enumerate() {
            *wj += coef * v_t[(k, j)];
        }
    }
    Ok(w)
}

/// Magnitudes of the `k` lowest-frequency DFT coefficients of `series`,
/// zero-padded to at least `k` samples. Direct O(n·k) evaluation.
pub fn dft_low_magnitudes(series: &[f64], k: usize) -> Vec<f64> {
    let n = series.len().max(k);
    if n == 0 {
        return Vec::new();
    }
    (0..k)
        .map(|f| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in series.iter().enumerate() {
                // reduce the phase index first so large t·f stays exact
                let phase = 2.0 * PI * ((f * t) % n) as f64 / n as f64;
                re += x * phase.cos();
                im -= x * phase.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// `Σ p ln p` over the normalized histogram; 0 for an empty histogram.
pub fn shannon_term(hist: &[f64]) -> f64 {
    let total: f64 = hist.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    hist.iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            p * p.ln()
        })
        .sum()
}

/// Sum of per-coordinate population variances; 0 for an empty set.
pub fn variance_trace<V: AsRef<[f64]>>(vectors: &[V]) -> f64 {
    let n = vectors.len();
    if n == 0 {
        return 0.0;
    }
    let d = vectors[0].as_ref().len();
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.as_ref()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut acc = 0.0;
    for v in vectors {
        for (m, x) in mean.iter().zip(v.as_ref()) {
            let dx = x - m;
            acc += dx * dx;
        }
    }
    acc / n as f64
}

/// `exp(−dist² / (2σ²))`.
pub fn gaussian_kernel(dist: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(KlrfError::InvalidInput(format!(
            "kernel bandwidth must be positive, got {sigma}"
        )));
    }
    Ok((-(dist * dist) / (2.0 * sigma * sigma)).exp())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Median of a nonempty slice (mean of the middle pair for even lengths).
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}
