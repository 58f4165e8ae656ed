//! Kinematic consistency filter: smooths a query's class distribution over
//! its augmented variants, weighting each variant by how close its predicted
//! kinematic vector lies to the query's.

use crate::error::{KlrfError, Result};
use crate::model::{ClassDistribution, KcfBandwidth};
use crate::numeric::{euclidean, gaussian_kernel, median};

/// Lower bound on the bandwidth, so a group of identical estimates still has
/// a well-defined kernel.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// Bandwidth for one group: the fixed value, or the median pairwise distance
/// of the group's kinematic estimates.
pub fn group_bandwidth(estimates: &[&[f64]], rule: KcfBandwidth) -> f64 {
    match rule {
        KcfBandwidth::Fixed(s) => s.max(SIGMA_FLOOR),
        KcfBandwidth::Median => {
            let mut d = Vec::with_capacity(estimates.len() * estimates.len().saturating_sub(1) / 2);
            for i in 0..estimates.len() {
                for j in i + 1..estimates.len() {
                    d.push(euclidean(estimates[i], estimates[j]));
                }
            }
            median(&mut d).unwrap_or(0.0).max(SIGMA_FLOOR)
        }
    }
}

/// `P*(y|V) = Σ_J P(y|J)·g(‖K̂(V) − K̂(J)‖) / Σ_J g(‖K̂(V) − K̂(J)‖)` over the
/// group `S(V)`, which must contain the query itself.
pub fn kcf(query: &[f64], group: &[(ClassDistribution, Vec<f64>)], bandwidth: KcfBandwidth) -> Result<ClassDistribution> {
    let first = group
        .first()
        .ok_or_else(|| KlrfError::InvalidInput("consistency filter needs a nonempty group".into()))?;
    let classes = first.0.num_classes();
    let estimates: Vec<&[f64]> = group.iter().map(|(_, k)| k.as_slice()).collect();
    for (d, k) in group {
        if d.num_classes() != classes {
            return Err(KlrfError::DimensionMismatch {
                what: "group distribution classes".into(),
                expected: classes,
                found: d.num_classes(),
            });
        }
        if k.len() != query.len() {
            return Err(KlrfError::DimensionMismatch {
                what: "group kinematic estimate".into(),
                expected: query.len(),
                found: k.len(),
            });
        }
    }
    let sigma = group_bandwidth(&estimates, bandwidth);
    let mut acc = vec![0.0; classes];
    let mut total = 0.0;
    for (d, k) in group {
        let g = gaussian_kernel(euclidean(query, k), sigma)?;
        total += g;
        for (a, p) in acc.iter_mut().zip(&d.probs) {
            *a += g * p;
        }
    }
    if !(total > 0.0) {
        // every member is far outside the kernel's numeric range
        return ClassDistribution::mean(group.iter().map(|(d, _)| d))
            .ok_or_else(|| KlrfError::Invariant("empty group".into()));
    }
    Ok(ClassDistribution::from_counts(&acc))
}
