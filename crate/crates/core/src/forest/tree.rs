//! Single-tree growth with pluggable per-node quality functions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ClassDistribution, KlrfConfig, Sample};

/// Gains at or below `GAIN_TOLERANCE · max(1, |Q(Ψ⁰)|)` count as no gain.
pub const GAIN_TOLERANCE: f64 = 1e-12;

/// Which per-sample vector the split functions threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSpace {
    Appearance,
    Kinematic,
}

impl FeatureSpace {
    pub fn of<'a>(&self, sample: &'a Sample) -> &'a [f64] {
        match self {
            FeatureSpace::Appearance => &sample.appearance,
            FeatureSpace::Kinematic => &sample.kinematic,
        }
    }
}

/// Quality function used at a split node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QualityChoice {
    /// Usefulness-compactness term Q_s.
    Switch,
    /// Class-entropy term Q_c.
    Appearance,
    /// Weighted kinematic-layout term Q_k.
    KinematicLayout,
    /// Kinematic cluster-compactness term Q_v.
    ViewClustering,
}

impl QualityChoice {
    pub const ALL: [QualityChoice; 4] = [
        QualityChoice::Switch,
        QualityChoice::Appearance,
        QualityChoice::KinematicLayout,
        QualityChoice::ViewClustering,
    ];

    pub fn short_name(&self) -> &'static str {
        match self {
            QualityChoice::Switch => "Q_s",
            QualityChoice::Appearance => "Q_c",
            QualityChoice::KinematicLayout => "Q_k",
            QualityChoice::ViewClustering => "Q_v",
        }
    }
}

/// Sends a sample left when `x[gamma] < tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFunction {
    pub gamma: usize,
    pub tau: f64,
}

impl SplitFunction {
    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.gamma] < self.tau
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub class_hist: ClassDistribution,
    /// Mean kinematic vector of the members; empty when not stored.
    pub mean_kinematic: Vec<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        split: SplitFunction,
        quality: QualityChoice,
        left: u32,
        right: u32,
    },
    Leaf(Leaf),
}

/// Binary tree stored as an arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &Leaf {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Split { split, left, right, .. } => {
                    i = if split.goes_left(x) { *left } else { *right } as usize;
                }
                Node::Leaf(leaf) => return leaf,
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            _ => None,
        })
    }

    pub fn split_choices(&self) -> impl Iterator<Item = QualityChoice> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { quality, .. } => Some(*quality),
            _ => None,
        })
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match &self.nodes[i] {
                Node::Split { left, right, .. } => {
                    stack.push((*left as usize, d + 1));
                    stack.push((*right as usize, d + 1));
                }
                Node::Leaf(_) => best = best.max(d),
            }
        }
        best
    }
}

/// What a quality selector sees at a node.
pub struct NodeView<'a> {
    pub samples: &'a [Sample],
    /// Indices into `samples`; bootstrap duplicates appear repeatedly.
    pub members: &'a [usize],
    /// Size of the training set the tree is grown from.
    pub total: usize,
    /// Per-node uniform draw in (0, 1].
    pub zeta: f64,
    /// Second per-node uniform draw in [0, 1).
    pub xi: f64,
}

/// A quality function bound to one node. Positions index the node's member list.
pub trait NodeObjective {
    fn choice(&self) -> QualityChoice;

    fn score(&self, left: &[usize], right: &[usize]) -> f64;

    /// Whether the best two-sided candidate improves on the all-left
    /// reference split `Ψ⁰`, i.e. `Q(Ψ*) − Q(Ψ⁰) > 0`.
    fn accepts(&self, best: f64, _left: &[usize], _right: &[usize], all: &[usize]) -> bool {
        let reference = self.score(all, &[]);
        best - reference > GAIN_TOLERANCE * reference.abs().max(1.0)
    }
}

/// Chooses the quality function for each node.
pub trait QualitySelector: Sync {
    fn objective<'a>(&'a self, node: &NodeView<'a>) -> Box<dyn NodeObjective + 'a>;
}

/// `count` random splits: feature uniform over indices, threshold uniform in
/// the members' range of that feature.
pub fn generate_candidates<R: Rng + ?Sized>(
    samples: &[Sample],
    members: &[usize],
    space: FeatureSpace,
    count: usize,
    rng: &mut R,
) -> Vec<SplitFunction> {
    let dim = members.first().map_or(0, |&m| space.of(&samples[m]).len());
    if dim == 0 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let gamma = rng.gen_range(0..dim);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &m in members {
                let v = space.of(&samples[m])[gamma];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let tau = lo + (hi - lo) * rng.gen::<f64>();
            SplitFunction { gamma, tau }
        })
        .collect()
}

/// Splits member positions `0..members.len()` into left and right.
pub fn partition_positions(
    samples: &[Sample],
    members: &[usize],
    space: FeatureSpace,
    split: &SplitFunction,
    left: &mut Vec<usize>,
    right: &mut Vec<usize>,
) {
    left.clear();
    right.clear();
    for (pos, &m) in members.iter().enumerate() {
        if split.goes_left(space.of(&samples[m])) {
            left.push(pos);
        } else {
            right.push(pos);
        }
    }
}

/// Partition of a sample list: `(left, right)` with left = `{x[γ] < τ}`.
pub fn partition<'a>(
    samples: &'a [Sample],
    space: FeatureSpace,
    split: &SplitFunction,
) -> (Vec<&'a Sample>, Vec<&'a Sample>) {
    samples.iter().partition(|s| split.goes_left(space.of(s)))
}

fn make_leaf(samples: &[Sample], members: &[usize], num_classes: usize, store_kinematic: bool) -> Leaf {
    let mut counts = vec![0.0; num_classes];
    for &m in members {
        counts[samples[m].label_index] += 1.0;
    }
    let mut mean_kinematic = Vec::new();
    if store_kinematic {
        let dim = samples[members[0]].kinematic.len();
        if dim > 0 && members.iter().all(|&m| samples[m].kinematic.len() == dim) {
            mean_kinematic = vec![0.0; dim];
            for &m in members {
                for (a, v) in mean_kinematic.iter_mut().zip(&samples[m].kinematic) {
                    *a += v;
                }
            }
            let n = members.len() as f64;
            for a in &mut mean_kinematic {
                *a /= n;
            }
        }
    }
    Leaf {
        class_hist: ClassDistribution::from_counts(&counts),
        mean_kinematic,
        count: members.len(),
    }
}

/// Grows one tree over `members` (indices into `samples`, repeats allowed).
///
/// A node becomes a leaf when it holds at most `min_samples_leaf` members,
/// is pure, or its best two-sided candidate has no gain over the all-left
/// reference split. Nodes are expanded depth-first, left child first, so the
/// random stream is consumed in a fixed order.
#[allow(clippy::too_many_arguments)]
pub fn grow_tree(
    samples: &[Sample],
    members: Vec<usize>,
    space: FeatureSpace,
    num_classes: usize,
    selector: &dyn QualitySelector,
    config: &KlrfConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    assert!(!members.is_empty(), "grow_tree needs at least one sample");
    let total = members.len();
    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut stack = vec![(0usize, members)];
    let (mut left_buf, mut right_buf) = (Vec::new(), Vec::new());
    let (mut best_left, mut best_right) = (Vec::new(), Vec::new());

    while let Some((slot, members)) = stack.pop() {
        let first_label = samples[members[0]].label_index;
        if members.len() <= config.min_samples_leaf
            || members.iter().all(|&m| samples[m].label_index == first_label)
        {
            nodes[slot] = Some(Node::Leaf(make_leaf(samples, &members, num_classes, config.leaf_kinematics)));
            continue;
        }

        let zeta = 1.0 - rng.gen::<f64>();
        let xi = rng.gen::<f64>();
        let view = NodeView { samples, members: &members, total, zeta, xi };
        let objective = selector.objective(&view);
        let candidates = generate_candidates(samples, &members, space, config.candidates_per_node, rng);

        let mut best: Option<(f64, SplitFunction)> = None;
        for cand in &candidates {
            partition_positions(samples, &members, space, cand, &mut left_buf, &mut right_buf);
            // one-sided candidates score like the reference split
            if left_buf.is_empty() || right_buf.is_empty() {
                continue;
            }
            let q = objective.score(&left_buf, &right_buf);
            if best.map_or(true, |(b, _)| q > b) {
                best = Some((q, *cand));
                std::mem::swap(&mut best_left, &mut left_buf);
                std::mem::swap(&mut best_right, &mut right_buf);
            }
        }

        let accepted = best.filter(|(q, _)| {
            let all: Vec<usize> = (0..members.len()).collect();
            objective.accepts(*q, &best_left, &best_right, &all)
        });
        let Some((_, split)) = accepted else {
            nodes[slot] = Some(Node::Leaf(make_leaf(samples, &members, num_classes, config.leaf_kinematics)));
            continue;
        };

        let left_members: Vec<usize> = best_left.iter().map(|&p| members[p]).collect();
        let right_members: Vec<usize> = best_right.iter().map(|&p| members[p]).collect();
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(None);
        nodes.push(None);
        nodes[slot] = Some(Node::Split {
            split,
            quality: objective.choice(),
            left: l as u32,
            right: r as u32,
        });
        stack.push((r, right_members));
        stack.push((l, left_members));
    }

    Tree {
        nodes: nodes.into_iter().map(|n| n.expect("every node slot is filled")).collect(),
    }
}
