//! Domain types shared by every stage: sequences, scene geometry, samples,
//! label maps and the training configuration.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{KlrfError, Result};

/// Tolerance on unit-length plane normals and on distribution sums.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// A point or direction in camera space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Skeleton joints are plain camera-space points.
pub type Joint3 = Vec3;

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// All joints of one frame. `t` is 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub t: usize,
    pub joints: Vec<Joint3>,
}

/// A scene plane in Hessian normal form: `{x : normal · x = offset}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutPlane {
    pub normal: Vec3,
    pub offset: f64,
    pub label: String,
}

impl LayoutPlane {
    /// Builds a plane from any nonzero normal, rescaling to unit length.
    pub fn from_normal(normal: Vec3, offset: f64, label: impl Into<String>) -> Result<Self> {
        let n = normal.norm();
        if !(n.is_finite() && n > 0.0) || !offset.is_finite() {
            return Err(KlrfError::InvalidInput(format!(
                "plane normal must be finite and nonzero, got {normal:?}"
            )));
        }
        Ok(LayoutPlane {
            normal: normal * (1.0 / n),
            offset: offset / n,
            label: label.into(),
        })
    }

    /// Signed distance of `p` along the normal.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// A row-major depth map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl DepthFrame {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// One labelled clip. Skeleton frames and planes are privileged: training
/// sequences carry them, test sequences may not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub id: String,
    pub subject: String,
    pub view: String,
    pub label: String,
    pub frames: Vec<SkeletonFrame>,
    pub planes: Vec<LayoutPlane>,
    pub appearance_frames: Option<Vec<Vec<f64>>>,
    pub depth_frames: Option<Vec<DepthFrame>>,
    pub augmentation_group: String,
}

impl ActionSequence {
    /// Sequence length T, taken from whichever per-frame stream is present.
    pub fn len(&self) -> usize {
        if !self.frames.is_empty() {
            self.frames.len()
        } else if let Some(a) = &self.appearance_frames {
            a.len()
        } else if let Some(d) = &self.depth_frames {
            d.len()
        } else {
            0
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_privileged(&self) -> bool {
        !self.frames.is_empty() && !self.planes.is_empty()
    }

    pub fn joint_count(&self) -> Option<usize> {
        self.frames.first().map(|f| f.joints.len())
    }

    /// Copy with skeletons and planes removed, as seen at test time.
    pub fn strip_privileged(&self) -> ActionSequence {
        ActionSequence {
            frames: Vec::new(),
            planes: Vec::new(),
            ..self.clone()
        }
    }
}

/// A probability vector over the label set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub probs: Vec<f64>,
}

impl ClassDistribution {
    /// Validates and wraps an already-normalized vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let d = ClassDistribution { probs };
        d.check()?;
        Ok(d)
    }

    pub fn uniform(num_classes: usize) -> Self {
        ClassDistribution {
            probs: vec![1.0 / num_classes as f64; num_classes],
        }
    }

    pub fn one_hot(num_classes: usize, class: usize) -> Self {
        let mut probs = vec![0.0; num_classes];
        probs[class] = 1.0;
        ClassDistribution { probs }
    }

    /// Normalizes nonnegative counts. An all-zero histogram maps to uniform.
    pub fn from_counts(counts: &[f64]) -> Self {
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Self::uniform(counts.len());
        }
        ClassDistribution {
            probs: counts.iter().map(|c| c / total).collect(),
        }
    }

    /// Averages equally-sized distributions with uniform weight.
    pub fn mean<'a>(dists: impl IntoIterator<Item = &'a ClassDistribution>) -> Option<Self> {
        let mut acc: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for d in dists {
            if acc.is_empty() {
                acc = vec![0.0; d.probs.len()];
            }
            for (a, p) in acc.iter_mut().zip(&d.probs) {
                *a += p;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        Some(Self::from_counts(&acc))
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.probs[class]
    }

    /// Index of the largest probability; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn check(&self) -> Result<()> {
        if self.probs.is_empty() {
            return Err(KlrfError::Invariant("empty class distribution".into()));
        }
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(KlrfError::Invariant(format!(
                "class distribution has negative or non-finite entries: {:?}",
                self.probs
            )));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > UNIT_TOLERANCE {
            return Err(KlrfError::Invariant(format!(
                "class distribution sums to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Lexicographically sorted class names; the position is the label index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut names: Vec<String> = names.into_iter().map(|s| s.as_ref().to_owned()).collect();
        names.sort();
        names.dedup();
        LabelMap { names }
    }

    pub fn from_sequences(sequences: &[ActionSequence]) -> Self {
        Self::from_names(sequences.iter().map(|s| s.label.as_str()))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Per-sequence training/test unit: sequence-level appearance and
/// kinematic-layout vectors plus label and training-time annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub view: String,
    pub appearance: Vec<f64>,
    /// Empty on test samples.
    pub kinematic: Vec<f64>,
    pub label_index: usize,
    pub usefulness: Option<f64>,
    pub augmentation_group: String,
    pub appearance_posterior: Option<ClassDistribution>,
    pub kinematic_posterior: Option<ClassDistribution>,
}

impl Sample {
    /// Minimal sample, mostly useful in tests.
    pub fn new(appearance: Vec<f64>, kinematic: Vec<f64>, label_index: usize) -> Self {
        Sample {
            id: String::new(),
            view: String::new(),
            appearance,
            kinematic,
            label_index,
            usefulness: None,
            augmentation_group: String::new(),
            appearance_posterior: None,
            kinematic_posterior: None,
        }
    }

    pub fn strip_privileged(&self) -> Sample {
        Sample {
            kinematic: Vec::new(),
            usefulness: None,
            appearance_posterior: None,
            kinematic_posterior: None,
            ..self.clone()
        }
    }
}

/// Bandwidth rule for the kinematic consistency filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KcfBandwidth {
    /// Median pairwise distance of the kinematic estimates within a group.
    Median,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub enabled: bool,
    pub translations: usize,
    pub rotations: usize,
    pub rotation_max_deg: f64,
    pub temporal_offsets: usize,
    /// Compose all three kinds as a product instead of independently.
    pub product: bool,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            enabled: false,
            translations: 10,
            rotations: 5,
            rotation_max_deg: 60.0,
            temporal_offsets: 10,
            product: false,
        }
    }
}

/// Every tunable of training and inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KlrfConfig {
    pub num_trees: usize,
    /// Tree count of the two reference forests; `None` reuses `num_trees`.
    pub reference_trees: Option<usize>,
    pub eta_fraction: f64,
    pub candidates_per_node: usize,
    pub min_samples_leaf: usize,
    pub qv_switch_prob: f64,
    pub kcf_bandwidth: KcfBandwidth,
    pub weight_clamp_epsilon: f64,
    pub pyramid_levels: usize,
    pub fourier_coeffs_per_segment: usize,
    pub augmentation: AugmentationConfig,
    pub seed: u64,
    pub cross_view_mode: bool,
    /// Store mean kinematic vectors in leaves (needed for the consistency filter).
    pub leaf_kinematics: bool,
    /// Grow every tree on the full training set instead of a bootstrap.
    pub full_bag: bool,
}

impl Default for KlrfConfig {
    fn default() -> Self {
        KlrfConfig {
            num_trees: 500,
            reference_trees: None,
            eta_fraction: 0.1,
            candidates_per_node: 100,
            min_samples_leaf: 1,
            qv_switch_prob: 0.5,
            kcf_bandwidth: KcfBandwidth::Median,
            weight_clamp_epsilon: 1e-6,
            pyramid_levels: 3,
            fourier_coeffs_per_segment: 4,
            augmentation: AugmentationConfig::default(),
            seed: 0,
            cross_view_mode: false,
            leaf_kinematics: true,
            full_bag: false,
        }
    }
}

impl KlrfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(KlrfError::Config(m.to_owned()));
        if self.num_trees == 0 {
            return bad("num_trees must be at least 1");
        }
        if self.reference_trees == Some(0) {
            return bad("reference_trees must be at least 1");
        }
        if !(self.eta_fraction > 0.0 && self.eta_fraction < 1.0) {
            return bad("eta_fraction must lie in (0, 1)");
        }
        if self.candidates_per_node == 0 {
            return bad("candidates_per_node must be at least 1");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.qv_switch_prob) {
            return bad("qv_switch_prob must lie in [0, 1]");
        }
        if let KcfBandwidth::Fixed(s) = self.kcf_bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return bad("kcf_bandwidth must be positive");
            }
        }
        if !(self.weight_clamp_epsilon > 0.0) {
            return bad("weight_clamp_epsilon must be positive");
        }
        if self.pyramid_levels == 0 || self.fourier_coeffs_per_segment == 0 {
            return bad("pyramid_levels and fourier_coeffs_per_segment must be at least 1");
        }
        if !(0.0..=180.0).contains(&self.augmentation.rotation_max_deg) {
            return bad("rotation_max_deg must lie in [0, 180]");
        }
        Ok(())
    }

    pub fn reference_tree_count(&self) -> usize {
        self.reference_trees.unwrap_or(self.num_trees)
    }
}

/// One problem found by [`validate_dataset`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EmptyDataset,
    EmptySequence { id: String },
    DuplicateId { id: String },
    TooFewJoints { id: String, found: usize },
    JointCountMismatch { id: String, expected: usize, found: usize },
    AppearanceDimMismatch { id: String, expected: usize, found: usize },
    FrameCountMismatch { id: String, stream: &'static str, expected: usize, found: usize },
    NonUnitNormal { id: String, plane: String, norm: f64 },
    PlaneLayoutMismatch { id: String },
    NonFinite { id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDataset => write!(f, "dataset contains no sequences"),
            Violation::EmptySequence { id } => write!(f, "{id}: sequence has no frames"),
            Violation::DuplicateId { id } => write!(f, "{id}: duplicate sequence id"),
            Violation::TooFewJoints { id, found } => {
                write!(f, "{id}: skeleton has {found} joints, need at least 2")
            }
            Violation::JointCountMismatch { id, expected, found } => {
                write!(f, "{id}: joint-count mismatch, expected {expected}, found {found}")
            }
            Violation::AppearanceDimMismatch { id, expected, found } => write!(
                f,
                "{id}: appearance dimension mismatch, expected {expected}, found {found}"
            ),
            Violation::FrameCountMismatch { id, stream, expected, found } => write!(
                f,
                "{id}: {stream} has {found} frames, expected {expected}"
            ),
            Violation::NonUnitNormal { id, plane, norm } => {
                write!(f, "{id}: plane '{plane}' has non-unit normal (norm {norm})")
            }
            Violation::PlaneLayoutMismatch { id } => {
                write!(f, "{id}: plane labels differ from the rest of the dataset")
            }
            Violation::NonFinite { id } => write!(f, "{id}: non-finite coordinate or value"),
        }
    }
}

/// Checks the cross-sequence consistency needed for training. An empty
/// report means the dataset is trainable.
pub fn validate_dataset(sequences: &[ActionSequence]) -> Vec<Violation> {
    let mut report = Vec::new();
    if sequences.is_empty() {
        report.push(Violation::EmptyDataset);
        return report;
    }
    let mut seen = HashSet::new();
    let mut joint_count: Option<usize> = None;
    let mut appearance_dim: Option<usize> = None;
    let mut plane_labels: Option<Vec<&str>> = None;

    for seq in sequences {
        let id = seq.id.clone();
        if !seen.insert(seq.id.as_str()) {
            report.push(Violation::DuplicateId { id: id.clone() });
        }
        let t = seq.len();
        if t == 0 {
            report.push(Violation::EmptySequence { id: id.clone() });
            continue;
        }

        let mut finite = true;
        for frame in &seq.frames {
            let p = frame.joints.len();
            if p < 2 {
                report.push(Violation::TooFewJoints { id: id.clone(), found: p });
            }
            match joint_count {
                None => joint_count = Some(p),
                Some(expected) if expected != p => {
                    report.push(Violation::JointCountMismatch { id: id.clone(), expected, found: p });
                }
                _ => {}
            }
            finite &= frame.joints.iter().all(|j| j.is_finite());
        }

        if let Some(app) = &seq.appearance_frames {
            if !seq.frames.is_empty() && app.len() != t {
                report.push(Violation::FrameCountMismatch {
                    id: id.clone(),
                    stream: "appearance",
                    expected: t,
                    found: app.len(),
                });
            }
            for row in app {
                match appearance_dim {
                    None => appearance_dim = Some(row.len()),
                    Some(expected) if expected != row.len() => {
                        report.push(Violation::AppearanceDimMismatch {
                            id: id.clone(),
                            expected,
                            found: row.len(),
                        });
                        break;
                    }
                    _ => {}
                }
                finite &= row.iter().all(|v| v.is_finite());
            }
        }
        if let Some(depth) = &seq.depth_frames {
            if depth.len() != t {
                report.push(Violation::FrameCountMismatch {
                    id: id.clone(),
                    stream: "depth",
                    expected: t,
                    found: depth.len(),
                });
            }
            finite &= depth.iter().all(|d| d.values.iter().all(|v| v.is_finite()));
        }

        for plane in &seq.planes {
            let norm = plane.normal.norm();
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                report.push(Violation::NonUnitNormal {
                    id: id.clone(),
                    plane: plane.label.clone(),
                    norm,
                });
            }
            finite &= plane.normal.is_finite() && plane.offset.is_finite();
        }
        if !seq.planes.is_empty() {
            let labels: Vec<&str> = seq.planes.iter().map(|p| p.label.as_str()).collect();
            match &plane_labels {
                None => plane_labels = Some(labels),
                Some(expected) if *expected != labels => {
                    report.push(Violation::PlaneLayoutMismatch { id: id.clone() });
                }
                _ => {}
            }
        }
        if !finite {
            report.push(Violation::NonFinite { id });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sequence(id: &str, joints: usize) -> ActionSequence {
        ActionSequence {
            id: id.into(),
            subject: "s1".into(),
            view: "0".into(),
            label: "a".into(),
            frames: vec![SkeletonFrame {
                t: 1,
                joints: (0..joints).map(|j| Vec3::new(j as f64, 0.0, 1.0)).collect(),
            }],
            planes: vec![LayoutPlane {
                normal: Vec3::new(0.0, 0.0, 1.0),
                offset: 0.0,
                label: "floor".into(),
            }],
            appearance_frames: Some(vec![vec![0.5, 0.25]]),
            depth_frames: None,
            augmentation_group: id.into(),
        }
    }

    #[test]
    fn well_formed_sequence_has_empty_report() {
        assert!(validate_dataset(&[sequence("a", 15)]).is_empty());
    }

    #[test]
    fn joint_count_mismatch_is_reported() {
        let report = validate_dataset(&[sequence("a", 15), sequence("b", 14)]);
        assert!(report.contains(&Violation::JointCountMismatch {
            id: "b".into(),
            expected: 15,
            found: 14
        }));
    }

    #[test]
    fn non_unit_normal_is_reported() {
        let mut s = sequence("a", 3);
        s.planes[0].normal = Vec3::new(0.0, 0.0, 2.0);
        let report = validate_dataset(&[s]);
        assert!(matches!(report.as_slice(), [Violation::NonUnitNormal { norm, .. }] if *norm == 2.0));
    }

    #[test]
    fn duplicate_ids_and_appearance_dims() {
        let a = sequence("a", 3);
        let mut b = sequence("a", 3);
        b.appearance_frames = Some(vec![vec![1.0, 2.0, 3.0]]);
        let report = validate_dataset(&[a, b]);
        assert!(report.contains(&Violation::DuplicateId { id: "a".into() }));
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::AppearanceDimMismatch { expected: 2, found: 3, .. })));
    }

    #[test]
    fn label_map_is_lexicographic() {
        let m = LabelMap::from_names(["sit", "lie", "stand", "lie"]);
        assert_eq!(m.names(), &["lie", "sit", "stand"]);
        assert_eq!(m.index_of("stand"), Some(2));
        assert_eq!(m.index_of("walk"), None);
    }

    #[test]
    fn class_distribution_checks() {
        assert!(ClassDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(ClassDistribution::new(vec![0.6, 0.5]).is_err());
        assert!(ClassDistribution::new(vec![1.5, -0.5]).is_err());
        let d = ClassDistribution::from_counts(&[3.0, 1.0]);
        assert_eq!(d.probs, vec![0.75, 0.25]);
        assert_eq!(d.argmax(), 0);
        assert!(ClassDistribution::from_counts(&[0.0, 0.0]).check().is_ok());
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = KlrfConfig::default();
        assert_eq!(c.num_trees, 500);
        assert_eq!(c.eta_fraction, 0.1);
        assert_eq!(
            (c.augmentation.translations, c.augmentation.rotations, c.augmentation.temporal_offsets),
            (10, 5, 10)
        );
        assert!(c.validate().is_ok());
        let bad = KlrfConfig { eta_fraction: 1.0, ..KlrfConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn plane_from_normal_rescales() {
        let p = LayoutPlane::from_normal(Vec3::new(0.0, 0.0, 2.0), 4.0, "floor").unwrap();
        assert_eq!(p.normal, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(p.offset, 2.0);
    }
}
