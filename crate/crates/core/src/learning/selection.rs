//! Per-node choice among the quality functions and the node-bound objectives
//! that the tree grower evaluates on every candidate.

use serde::{Deserialize, Serialize};

use crate::error::{KlrfError, Result};
use crate::forest::tree::GAIN_TOLERANCE;
use crate::forest::{NodeObjective, NodeView, QualityChoice, QualitySelector};
use crate::learning::quality::weighted_cells;
use crate::model::{ClassDistribution, KlrfConfig};
use crate::numeric::{least_squares_min_norm, Matrix};

/// Node state that drives the choice of quality function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeContext {
    pub node_size: usize,
    pub total_training_count: usize,
    /// Fraction of node samples with positive usefulness.
    pub delta: f64,
    /// Per-node uniform draw in (0, 1].
    pub zeta: f64,
    /// Per-node uniform draw in [0, 1) deciding the view-clustering switch.
    pub xi: f64,
    pub cross_view: bool,
}

/// Picks the quality function for a node.
///
/// In cross-view mode the view-clustering term wins with probability
/// `qv_switch_prob`. Otherwise nodes larger than `eta_fraction · N` use the
/// switching term while they hold both useful and non-useful samples; all
/// other nodes use the appearance term when `ζ > Δ` and the kinematic-layout
/// term when `ζ ≤ Δ`.
pub fn select_quality(ctx: &NodeContext, config: &KlrfConfig) -> QualityChoice {
    if ctx.cross_view && ctx.xi < config.qv_switch_prob {
        return QualityChoice::ViewClustering;
    }
    let eta = config.eta_fraction * ctx.total_training_count as f64;
    let mixed = ctx.delta > 0.0 && ctx.delta < 1.0;
    if ctx.node_size as f64 > eta && mixed {
        return QualityChoice::Switch;
    }
    if ctx.zeta > ctx.delta {
        QualityChoice::Appearance
    } else {
        QualityChoice::KinematicLayout
    }
}

/// Least-squares weights closing the gap between the node's appearance-based
/// and kinematic-based class distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapWeights {
    /// Minimum-norm solution of `‖A·w − b‖²`.
    pub raw: Vec<f64>,
    /// `max(w_i, ε)`.
    pub clamped: Vec<f64>,
}

/// Column `i` of `A` is sample `i`'s appearance posterior; `b` is the mean of
/// the kinematic posteriors. Weights below `epsilon` are raised to it.
pub fn gap_weights(
    appearance_posteriors: &[&ClassDistribution],
    kinematic_posteriors: &[&ClassDistribution],
    epsilon: f64,
) -> Result<GapWeights> {
    let n = appearance_posteriors.len();
    if n == 0 || kinematic_posteriors.len() != n {
        return Err(KlrfError::DimensionMismatch {
            what: "kinematic posteriors".into(),
            expected: n,
            found: kinematic_posteriors.len(),
        });
    }
    let classes = appearance_posteriors[0].num_classes();
    let columns: Vec<&[f64]> = appearance_posteriors.iter().map(|d| d.probs.as_slice()).collect();
    let a = Matrix::from_columns(&columns)?;
    let mut b = vec![0.0; classes];
    for d in kinematic_posteriors {
        if d.num_classes() != classes {
            return Err(KlrfError::DimensionMismatch {
                what: "kinematic posterior classes".into(),
                expected: classes,
                found: d.num_classes(),
            });
        }
        for (acc, p) in b.iter_mut().zip(&d.probs) {
            *acc += p;
        }
    }
    b.iter_mut().for_each(|v| *v /= n as f64);
    let raw = least_squares_min_norm(&a, &b)?;
    let clamped = raw.iter().map(|&w| w.max(epsilon)).collect();
    Ok(GapWeights { raw, clamped })
}

pub(crate) struct EntropyObjective {
    labels: Vec<usize>,
    num_classes: usize,
}

impl EntropyObjective {
    pub(crate) fn new(node: &NodeView<'_>, num_classes: usize) -> Self {
        EntropyObjective {
            labels: node.members.iter().map(|&m| node.samples[m].label_index).collect(),
            num_classes,
        }
    }
}

impl NodeObjective for EntropyObjective {
    fn choice(&self) -> QualityChoice {
        QualityChoice::Appearance
    }

    fn score(&self, left: &[usize], right: &[usize]) -> f64 {
        let mut q = 0.0;
        let mut counts = vec![0usize; self.num_classes];
        for child in [left, right] {
            if child.is_empty() {
                continue;
            }
            counts.iter_mut().for_each(|c| *c = 0);
            for &p in child {
                counts[self.labels[p]] += 1;
            }
            let n = child.len() as f64;
            q += counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| c as f64 * (c as f64 / n).ln())
                .sum::<f64>();
        }
        q
    }
}

struct SwitchObjective {
    usefulness: Vec<f64>,
}

impl NodeObjective for SwitchObjective {
    fn choice(&self) -> QualityChoice {
        QualityChoice::Switch
    }

    fn score(&self, left: &[usize], right: &[usize]) -> f64 {
        let n = (left.len() + right.len()) as f64;
        let mut spread = 0.0;
        for child in [left, right] {
            if child.is_empty() {
                continue;
            }
            let m = child.len() as f64;
            let mean = child.iter().map(|&p| self.usefulness[p]).sum::<f64>() / m;
            let var = child
                .iter()
                .map(|&p| (self.usefulness[p] - mean).powi(2))
                .sum::<f64>()
                / m;
            spread += m / n * var;
        }
        1.0 / (1.0 + spread)
    }
}

struct KinematicObjective {
    labels: Vec<usize>,
    weights: Vec<f64>,
    total: f64,
    num_classes: usize,
}

impl NodeObjective for KinematicObjective {
    fn choice(&self) -> QualityChoice {
        QualityChoice::KinematicLayout
    }

    fn score(&self, left: &[usize], right: &[usize]) -> f64 {
        weighted_cells(left, right, &self.labels, &self.weights, self.num_classes, self.total)
    }

    /// The kinematic-layout term never exceeds its value on the all-left
    /// reference split, so the stopping test uses the weighted information
    /// gain of the chosen split instead.
    fn accepts(&self, _best: f64, left: &[usize], right: &[usize], all: &[usize]) -> bool {
        let conditional = |children: [&[usize]; 2]| {
            let mut q = 0.0;
            let mut cells = vec![0.0; self.num_classes];
            for child in children {
                cells.iter_mut().for_each(|c| *c = 0.0);
                let mut mass = 0.0;
                for &p in child {
                    cells[self.labels[p]] += self.weights[p];
                    mass += self.weights[p];
                }
                if mass > 0.0 {
                    q += cells.iter().filter(|&&c| c > 0.0).map(|&c| c * (c / mass).ln()).sum::<f64>();
                }
            }
            q
        };
        let reference = conditional([all, &[]]);
        conditional([left, right]) - reference > GAIN_TOLERANCE * reference.abs().max(1.0)
    }
}

/// Kinematic vectors of the node, centered on the node mean, so that
/// `Σ_m |D_m| tr var(D_m) = Σ‖x‖² − Σ_m ‖S_m‖² / |D_m|` is well conditioned.
struct ViewObjective {
    centered: Vec<f64>,
    dim: usize,
    sum_sq: f64,
    total: Vec<f64>,
}

impl ViewObjective {
    fn new(node: &NodeView<'_>) -> Self {
        let n = node.members.len();
        let dim = node.samples[node.members[0]].kinematic.len();
        let mut mean = vec![0.0; dim];
        for &m in node.members {
            for (a, v) in mean.iter_mut().zip(&node.samples[m].kinematic) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= n as f64);
        let mut centered = Vec::with_capacity(n * dim);
        for &m in node.members {
            centered.extend(node.samples[m].kinematic.iter().zip(&mean).map(|(v, mu)| v - mu));
        }
        let sum_sq = centered.iter().map(|v| v * v).sum();
        let mut total = vec![0.0; dim];
        for row in centered.chunks_exact(dim.max(1)) {
            for (a, v) in total.iter_mut().zip(row) {
                *a += v;
            }
        }
        ViewObjective { centered, dim, sum_sq, total }
    }

    fn child_sum(&self, child: &[usize]) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for &p in child {
            let row = &self.centered[p * self.dim..(p + 1) * self.dim];
            for (a, v) in s.iter_mut().zip(row) {
                *a += v;
            }
        }
        s
    }
}

impl NodeObjective for ViewObjective {
    fn choice(&self) -> QualityChoice {
        QualityChoice::ViewClustering
    }

    fn score(&self, left: &[usize], right: &[usize]) -> f64 {
        let n = left.len() + right.len();
        if n == 0 || self.dim == 0 {
            return 1.0;
        }
        let (small, large) = if left.len() <= right.len() { (left, right) } else { (right, left) };
        let s_small = self.child_sum(small);
        let norm_sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let mut explained = 0.0;
        if !small.is_empty() {
            explained += norm_sq(&s_small) / small.len() as f64;
        }
        if !large.is_empty() {
            let s_large: Vec<f64> = self.total.iter().zip(&s_small).map(|(t, s)| t - s).collect();
            explained += norm_sq(&s_large) / large.len() as f64;
        }
        let spread = ((self.sum_sq - explained) / n as f64).max(0.0);
        1.0 / (1.0 + spread)
    }
}

/// Standard classification forest: the appearance (entropy) term everywhere.
#[derive(Clone, Copy, Debug, Default)]
pub struct AppearanceSelector;

impl QualitySelector for AppearanceSelector {
    fn objective<'a>(&'a self, node: &NodeView<'a>) -> Box<dyn NodeObjective + 'a> {
        let classes = node
            .members
            .iter()
            .map(|&m| node.samples[m].label_index)
            .max()
            .unwrap_or(0)
            + 1;
        Box::new(EntropyObjective::new(node, classes))
    }
}

/// Switches among the four quality functions per node. Samples must carry
/// usefulness scores and both reference posteriors.
#[derive(Clone, Debug)]
pub struct KlrfSelector {
    pub num_classes: usize,
    pub config: KlrfConfig,
}

impl KlrfSelector {
    pub fn context(&self, node: &NodeView<'_>) -> NodeContext {
        let useful = node
            .members
            .iter()
            .filter(|&&m| node.samples[m].usefulness.unwrap_or(0.0) > 0.0)
            .count();
        NodeContext {
            node_size: node.members.len(),
            total_training_count: node.samples.len(),
            delta: useful as f64 / node.members.len() as f64,
            zeta: node.zeta,
            xi: node.xi,
            cross_view: self.config.cross_view_mode,
        }
    }
}

impl QualitySelector for KlrfSelector {
    fn objective<'a>(&'a self, node: &NodeView<'a>) -> Box<dyn NodeObjective + 'a> {
        let ctx = self.context(node);
        match select_quality(&ctx, &self.config) {
            QualityChoice::Appearance => Box::new(EntropyObjective::new(node, self.num_classes)),
            QualityChoice::Switch => Box::new(SwitchObjective {
                usefulness: node
                    .members
                    .iter()
                    .map(|&m| node.samples[m].usefulness.unwrap_or(0.0))
                    .collect(),
            }),
            QualityChoice::ViewClustering => Box::new(ViewObjective::new(node)),
            QualityChoice::KinematicLayout => {
                let post = |m: usize, k: bool| {
                    let s = &node.samples[m];
                    if k { &s.kinematic_posterior } else { &s.appearance_posterior }
                        .as_ref()
                        .expect("posteriors are cached before the final forest is grown")
                };
                let a: Vec<&ClassDistribution> = node.members.iter().map(|&m| post(m, false)).collect();
                let b: Vec<&ClassDistribution> = node.members.iter().map(|&m| post(m, true)).collect();
                let weights = gap_weights(&a, &b, self.config.weight_clamp_epsilon)
                    .map(|g| g.clamped)
                    .unwrap_or_else(|_| vec![1.0; node.members.len()]);
                Box::new(KinematicObjective {
                    labels: node.members.iter().map(|&m| node.samples[m].label_index).collect(),
                    total: weights.iter().sum(),
                    weights,
                    num_classes: self.num_classes,
                })
            }
        }
    }
}
