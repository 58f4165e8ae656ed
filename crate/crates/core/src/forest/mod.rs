//! Bagged binary forests: bootstrap bookkeeping, parallel training,
//! inference and out-of-bag posteriors.

pub mod tree;

pub use tree::{
    generate_candidates, grow_tree, partition, partition_positions, FeatureSpace, Leaf, Node,
    NodeObjective, NodeView, QualityChoice, QualitySelector, SplitFunction, Tree,
};

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KlrfError, Result};
use crate::model::{ClassDistribution, KlrfConfig, LabelMap, Sample};

/// Stream salts keep the final forest and the two reference forests on
/// independent random streams derived from one seed.
pub mod streams {
    pub const MAIN: u64 = 0;
    pub const REFERENCE_APPEARANCE: u64 = 1;
    pub const REFERENCE_KINEMATIC: u64 = 2;
    pub const AUGMENTATION: u64 = 3;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic random stream for item `index` of stream family `salt`.
pub fn derived_rng(seed: u64, salt: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(salt)));
    rng.set_stream(index);
    rng
}

/// Bit-packed bootstrap membership of one tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    len: usize,
    words: Vec<u64>,
}

impl Membership {
    pub fn new(len: usize) -> Self {
        Membership { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    /// False for indices outside the training set.
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Result of routing one input through the forest.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub distribution: ClassDistribution,
    /// Averaged leaf kinematic vectors; empty when the leaves store none.
    pub kinematic: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub config: KlrfConfig,
    pub labels: LabelMap,
    pub space: FeatureSpace,
    pub feature_dim: usize,
    pub kinematic_dim: usize,
    pub membership: Vec<Membership>,
}

/// Groups sample indices by augmentation group, in first-appearance order.
/// Samples with an empty group id form singleton groups.
pub fn bootstrap_groups(samples: &[Sample]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        if s.augmentation_group.is_empty() {
            groups.push(vec![i]);
            continue;
        }
        match index.get(s.augmentation_group.as_str()) {
            Some(&g) => groups[g].push(i),
            None => {
                index.insert(&s.augmentation_group, groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Draws as many groups as exist, with replacement, and returns the members
/// of every drawn group. With singleton groups this is plain size-N bagging.
pub fn bootstrap<R: Rng + ?Sized>(groups: &[Vec<usize>], rng: &mut R) -> Vec<usize> {
    let mut members = Vec::new();
    for _ in 0..groups.len() {
        members.extend_from_slice(&groups[rng.gen_range(0..groups.len())]);
    }
    members
}

/// Trains `num_trees` trees, each on its own bootstrap drawn from the
/// stream `(config.seed, salt, tree index)`.
pub fn train_forest(
    samples: &[Sample],
    labels: &LabelMap,
    space: FeatureSpace,
    selector: &dyn QualitySelector,
    config: &KlrfConfig,
    num_trees: usize,
    salt: u64,
) -> Result<Forest> {
    config.validate()?;
    if samples.len() < 2 {
        return Err(KlrfError::InvalidInput(format!(
            "need at least two training samples, found {}",
            samples.len()
        )));
    }
    let mut present = vec![false; labels.len()];
    for s in samples {
        if s.label_index >= labels.len() {
            return Err(KlrfError::Invariant(format!(
                "label index {} outside label map of size {}",
                s.label_index,
                labels.len()
            )));
        }
        present[s.label_index] = true;
    }
    let classes = present.iter().filter(|p| **p).count();
    if classes < 2 {
        return Err(KlrfError::SingleClass(classes));
    }
    let feature_dim = space.of(&samples[0]).len();
    if feature_dim == 0 {
        return Err(match space {
            FeatureSpace::Kinematic => KlrfError::MissingKinematics { id: samples[0].id.clone() },
            FeatureSpace::Appearance => KlrfError::MissingAppearance { id: samples[0].id.clone() },
        });
    }
    for s in samples {
        let found = space.of(s).len();
        if found != feature_dim {
            return Err(KlrfError::DimensionMismatch {
                what: format!("{space:?} vector of {}", s.id),
                expected: feature_dim,
                found,
            });
        }
    }
    let kinematic_dim = samples[0].kinematic.len();

    let groups = bootstrap_groups(samples);
    let n = samples.len();
    let grown: Vec<(Tree, Membership)> = (0..num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = derived_rng(config.seed, salt, t as u64);
            let members = if config.full_bag {
                (0..n).collect()
            } else {
                bootstrap(&groups, &mut rng)
            };
            let mut membership = Membership::new(n);
            for &m in &members {
                membership.insert(m);
            }
            let tree = grow_tree(samples, members, space, labels.len(), selector, config, &mut rng);
            (tree, membership)
        })
        .collect();
    let (trees, membership) = grown.into_iter().unzip();

    Ok(Forest {
        trees,
        config: config.clone(),
        labels: labels.clone(),
        space,
        feature_dim,
        kinematic_dim,
        membership,
    })
}

impl Forest {
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(KlrfError::DimensionMismatch {
                what: format!("{:?} feature vector", self.space),
                expected: self.feature_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn average<'a>(&self, leaves: impl Iterator<Item = &'a Leaf>) -> Option<Prediction> {
        let mut probs = vec![0.0; self.num_classes()];
        let mut kin: Vec<f64> = Vec::new();
        let mut with_kin = true;
        let mut n = 0usize;
        for leaf in leaves {
            for (p, q) in probs.iter_mut().zip(&leaf.class_hist.probs) {
                *p += q;
            }
            if leaf.mean_kinematic.is_empty() {
                with_kin = false;
            } else if with_kin {
                if kin.is_empty() {
                    kin = vec![0.0; leaf.mean_kinematic.len()];
                }
                for (a, v) in kin.iter_mut().zip(&leaf.mean_kinematic) {
                    *a += v;
                }
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let kinematic = if with_kin {
            kin.iter().map(|v| v / n as f64).collect()
        } else {
            Vec::new()
        };
        Some(Prediction {
            distribution: ClassDistribution::from_counts(&probs),
            kinematic,
        })
    }

    /// Averages the leaf responses of every tree.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_dim(x)?;
        self.average(self.trees.iter().map(|t| t.leaf_for(x)))
            .ok_or_else(|| KlrfError::Invariant("forest has no trees".into()))
    }

    /// Averages only the trees whose bootstrap excluded training sample
    /// `index`; `None` when every tree saw it.
    pub fn oob_posterior(&self, x: &[f64], index: usize) -> Result<Option<ClassDistribution>> {
        self.check_dim(x)?;
        Ok(self
            .average(
                self.trees
                    .iter()
                    .zip(&self.membership)
                    .filter(|(_, m)| !m.contains(index))
                    .map(|(t, _)| t.leaf_for(x)),
            )
            .map(|p| p.distribution))
    }

    /// OOB posterior when available, full-forest posterior otherwise.
    pub fn oob_or_full(&self, x: &[f64], index: usize) -> Result<ClassDistribution> {
        match self.oob_posterior(x, index)? {
            Some(d) => Ok(d),
            None => Ok(self.predict(x)?.distribution),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::AppearanceSelector;

    fn sample(x: f64, label: usize) -> Sample {
        Sample::new(vec![x, 0.0], vec![x], label)
    }

    fn labels2() -> LabelMap {
        LabelMap::from_names(["a", "b"])
    }

    fn cfg() -> KlrfConfig {
        KlrfConfig { num_trees: 1, full_bag: true, ..KlrfConfig::default() }
    }

    #[test]
    fn single_sample_is_one_hot_leaf() {
        let s = vec![sample(1.0, 1)];
        let mut rng = derived_rng(0, 0, 0);
        let t = grow_tree(&s, vec![0], FeatureSpace::Appearance, 2, &AppearanceSelector, &cfg(), &mut rng);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaf_for(&[0.0, 0.0]).class_hist.probs, vec![0.0, 1.0]);
    }

    #[test]
    fn two_samples_two_classes_split_into_pure_leaves() {
        let s = vec![sample(0.0, 0), sample(1.0, 1)];
        let mut rng = derived_rng(3, 0, 0);
        let t = grow_tree(&s, vec![0, 1], FeatureSpace::Appearance, 2, &AppearanceSelector, &cfg(), &mut rng);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.leaf_for(&s[0].appearance).class_hist.probs, vec![1.0, 0.0]);
        assert_eq!(t.leaf_for(&s[1].appearance).class_hist.probs, vec![0.0, 1.0]);
    }

    #[test]
    fn pure_node_is_single_leaf() {
        let s: Vec<Sample> = (0..10).map(|i| sample(i as f64, 1)).collect();
        let mut rng = derived_rng(0, 0, 0);
        let t = grow_tree(&s, (0..10).collect(), FeatureSpace::Appearance, 2, &AppearanceSelector, &cfg(), &mut rng);
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn constant_features_yield_leaf() {
        let s: Vec<Sample> = (0..6).map(|i| sample(2.0, i % 2)).collect();
        let mut rng = derived_rng(0, 0, 0);
        let t = grow_tree(&s, (0..6).collect(), FeatureSpace::Appearance, 2, &AppearanceSelector, &cfg(), &mut rng);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaf_for(&[2.0, 0.0]).class_hist.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn candidates_on_constant_feature_are_one_sided() {
        let s: Vec<Sample> = (0..5).map(|i| Sample::new(vec![1.0, i as f64], vec![], 0)).collect();
        let members: Vec<usize> = (0..5).collect();
        let mut rng = derived_rng(9, 0, 0);
        let cands = generate_candidates(&s, &members, FeatureSpace::Appearance, 100, &mut rng);
        assert_eq!(cands.len(), 100);
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for c in cands.iter().filter(|c| c.gamma == 0) {
            partition_positions(&s, &members, FeatureSpace::Appearance, c, &mut l, &mut r);
            assert!(l.is_empty() || r.is_empty());
        }
        let again = generate_candidates(&s, &members, FeatureSpace::Appearance, 100, &mut derived_rng(9, 0, 0));
        assert_eq!(cands, again);
    }

    #[test]
    fn partition_examples() {
        let s: Vec<Sample> = [1.0, 2.0, 3.0].iter().map(|&x| sample(x, 0)).collect();
        let (l, r) = partition(&s, FeatureSpace::Appearance, &SplitFunction { gamma: 0, tau: 2.5 });
        assert_eq!(l.iter().map(|s| s.appearance[0]).collect::<Vec<_>>(), vec![1.0, 2.0]);
        assert_eq!(r.len(), 1);
        let (l, r) = partition(&s, FeatureSpace::Appearance, &SplitFunction { gamma: 0, tau: 0.0 });
        assert_eq!((l.len(), r.len()), (0, 3));
        let (l, r) = partition(&s, FeatureSpace::Appearance, &SplitFunction { gamma: 0, tau: 9.0 });
        assert_eq!((l.len(), r.len()), (3, 0));
    }

    #[test]
    fn single_class_is_rejected() {
        let s: Vec<Sample> = (0..4).map(|i| sample(i as f64, 0)).collect();
        let err = train_forest(&s, &labels2(), FeatureSpace::Appearance, &AppearanceSelector, &cfg(), 1, 0);
        assert!(matches!(err, Err(KlrfError::SingleClass(1))));
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let s = vec![sample(0.0, 0), sample(1.0, 1)];
        let f = train_forest(&s, &labels2(), FeatureSpace::Appearance, &AppearanceSelector, &cfg(), 1, 0).unwrap();
        assert!(f.predict(&[0.0]).is_err());
    }

    #[test]
    fn oob_all_or_nothing() {
        let s: Vec<Sample> = (0..8).map(|i| sample(i as f64, i % 2)).collect();
        let f = train_forest(&s, &labels2(), FeatureSpace::Appearance, &AppearanceSelector, &cfg(), 1, 0).unwrap();
        // full bag: every tree saw every sample
        assert_eq!(f.oob_posterior(&s[0].appearance, 0).unwrap(), None);
        let mut g = f.clone();
        g.membership = vec![Membership::new(8)];
        assert_eq!(
            g.oob_posterior(&s[0].appearance, 0).unwrap().unwrap(),
            g.predict(&s[0].appearance).unwrap().distribution
        );
    }

    #[test]
    fn membership_bits() {
        let mut m = Membership::new(130);
        m.insert(0);
        m.insert(129);
        m.insert(129);
        assert!(m.contains(0) && m.contains(129) && !m.contains(64));
        assert_eq!(m.count(), 2);
    }

    #[test]
    fn group_bootstrap_keeps_groups_together() {
        let mut s: Vec<Sample> = (0..9).map(|i| sample(i as f64, i % 2)).collect();
        for (i, x) in s.iter_mut().enumerate() {
            x.augmentation_group = format!("g{}", i / 3);
        }
        let groups = bootstrap_groups(&s);
        assert_eq!(groups, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]]);
        let members = bootstrap(&groups, &mut derived_rng(1, 0, 0));
        assert_eq!(members.len(), 9);
        for chunk in members.chunks(3) {
            assert_eq!(chunk[1], chunk[0] + 1);
            assert_eq!(chunk[2], chunk[0] + 2);
        }
    }
}
