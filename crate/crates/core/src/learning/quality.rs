//! Split quality functions. All are maximized over candidate splits.
//!
//! * `q_switch`: inverse of one plus the size-weighted usefulness variance.
//! * `q_appearance`: size-weighted Shannon term of the class histograms.
//! * `q_kinematic`: Shannon-like term on weighted class histograms, every
//!   cell normalized by the node's total weight.
//! * `q_view`: inverse of one plus the size-weighted kinematic variance trace.

use crate::error::{KlrfError, Result};
use crate::numeric::{shannon_term, variance_trace};

fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// `[1 + Σ_m |D_m|/|D| · var(U in D_m)]⁻¹` over the usefulness scores of each child.
pub fn q_switch(left: &[f64], right: &[f64]) -> f64 {
    let n = (left.len() + right.len()) as f64;
    if n == 0.0 {
        return 1.0;
    }
    let spread: f64 = [left, right]
        .iter()
        .map(|child| child.len() as f64 / n * population_variance(child))
        .sum();
    1.0 / (1.0 + spread)
}

fn histogram(labels: &[usize], num_classes: usize) -> Vec<f64> {
    let mut h = vec![0.0; num_classes];
    for &y in labels {
        h[y] += 1.0;
    }
    h
}

/// `Σ_m |D_m| · Σ_y p log p` over the class labels of each child.
pub fn q_appearance(left: &[usize], right: &[usize], num_classes: usize) -> f64 {
    [left, right]
        .iter()
        .map(|child| child.len() as f64 * shannon_term(&histogram(child, num_classes)))
        .sum()
}

/// `Σ_m Σ_y n_w(y, D_m) · log(n_w(y, D_m) / W)` with `W` the total weight of
/// the node. `left` and `right` are positions into the aligned `labels` and
/// `weights` arrays, which describe the whole node.
pub fn q_kinematic(
    left: &[usize],
    right: &[usize],
    labels: &[usize],
    weights: &[f64],
    num_classes: usize,
) -> Result<f64> {
    if labels.len() != weights.len() {
        return Err(KlrfError::DimensionMismatch {
            what: "sample weights".into(),
            expected: labels.len(),
            found: weights.len(),
        });
    }
    if let Some(&p) = left.iter().chain(right).find(|&&p| p >= labels.len()) {
        return Err(KlrfError::InvalidInput(format!("position {p} outside the node")));
    }
    let total: f64 = weights.iter().sum();
    Ok(weighted_cells(left, right, labels, weights, num_classes, total))
}

pub(crate) fn weighted_cells(
    left: &[usize],
    right: &[usize],
    labels: &[usize],
    weights: &[f64],
    num_classes: usize,
    total: f64,
) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    let mut cells = vec![0.0; num_classes];
    for child in [left, right] {
        cells.iter_mut().for_each(|c| *c = 0.0);
        for &p in child {
            cells[labels[p]] += weights[p];
        }
        q += cells
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| c * (c / total).ln())
            .sum::<f64>();
    }
    q
}

/// `[1 + Σ_m |D_m|/|D| · tr var(K in D_m)]⁻¹`.
pub fn q_view<V: AsRef<[f64]>>(left: &[V], right: &[V]) -> f64 {
    let n = (left.len() + right.len()) as f64;
    if n == 0.0 {
        return 1.0;
    }
    let spread = left.len() as f64 / n * variance_trace(left) + right.len() as f64 / n * variance_trace(right);
    1.0 / (1.0 + spread)
}
