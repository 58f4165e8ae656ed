//! Privileged-information training: reference forests, usefulness scores,
//! per-node quality switching and the consistency filter used at test time.

pub mod kcf;
pub mod quality;
pub mod selection;

pub use kcf::{group_bandwidth, kcf};
pub use quality::{q_appearance, q_kinematic, q_switch, q_view};
pub use selection::{gap_weights, select_quality, AppearanceSelector, GapWeights, KlrfSelector, NodeContext};

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KlrfError, Result};
use crate::features::{appearance_vector, assemble_features, augment};
use crate::forest::{derived_rng, streams, train_forest, FeatureSpace, Forest, Prediction};
use crate::model::{validate_dataset, ActionSequence, ClassDistribution, KlrfConfig, LabelMap, Sample};

/// `U(V) = F_K(y*|V) − F_A(y*|V)`.
pub fn usefulness_score(label: usize, appearance: &ClassDistribution, kinematic: &ClassDistribution) -> f64 {
    kinematic.prob(label) - appearance.prob(label)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceForests {
    /// Trained on A(V) with the class-entropy term only.
    pub appearance: Forest,
    /// Trained on K(V) with the class-entropy term only.
    pub kinematic: Forest,
}

impl ReferenceForests {
    /// Posteriors of training sample `index`: out-of-bag where possible.
    pub fn posteriors(&self, sample: &Sample, index: usize) -> Result<(ClassDistribution, ClassDistribution)> {
        Ok((
            self.appearance.oob_or_full(&sample.appearance, index)?,
            self.kinematic.oob_or_full(&sample.kinematic, index)?,
        ))
    }
}

/// Trains the appearance and kinematic reference forests on their own
/// random streams. Leaves store no kinematic means.
pub fn pretrain_reference_forests(samples: &[Sample], labels: &LabelMap, config: &KlrfConfig) -> Result<ReferenceForests> {
    if let Some(s) = samples.iter().find(|s| s.kinematic.is_empty()) {
        return Err(KlrfError::MissingKinematics { id: s.id.clone() });
    }
    let cfg = KlrfConfig { leaf_kinematics: false, ..config.clone() };
    let trees = config.reference_tree_count();
    let appearance = train_forest(
        samples,
        labels,
        FeatureSpace::Appearance,
        &AppearanceSelector,
        &cfg,
        trees,
        streams::REFERENCE_APPEARANCE,
    )?;
    let kinematic = train_forest(
        samples,
        labels,
        FeatureSpace::Kinematic,
        &AppearanceSelector,
        &cfg,
        trees,
        streams::REFERENCE_KINEMATIC,
    )?;
    Ok(ReferenceForests { appearance, kinematic })
}

/// Stores both reference posteriors and the usefulness score on every sample.
pub fn annotate_samples(samples: &mut [Sample], refs: &ReferenceForests) -> Result<()> {
    let posteriors: Vec<(ClassDistribution, ClassDistribution)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| refs.posteriors(s, i))
        .collect::<Result<_>>()?;
    for (s, (fa, fk)) in samples.iter_mut().zip(posteriors) {
        s.usefulness = Some(usefulness_score(s.label_index, &fa, &fk));
        s.appearance_posterior = Some(fa);
        s.kinematic_posterior = Some(fk);
    }
    Ok(())
}

/// Assembles samples for training sequences, expanding each into its
/// augmented variants when augmentation is enabled. Variants inherit the
/// original's augmentation group, which defaults to the sequence id.
pub fn prepare_samples(sequences: &[ActionSequence], labels: &LabelMap, config: &KlrfConfig) -> Result<Vec<Sample>> {
    let expanded: Vec<Vec<ActionSequence>> = sequences
        .iter()
        .enumerate()
        .map(|(i, seq)| {
            let mut seq = seq.clone();
            if seq.augmentation_group.is_empty() {
                seq.augmentation_group = seq.id.clone();
            }
            if config.augmentation.enabled {
                let mut rng = derived_rng(config.seed, streams::AUGMENTATION, i as u64);
                augment(&seq, &config.augmentation, &mut rng)
            } else {
                vec![seq]
            }
        })
        .collect();
    expanded
        .par_iter()
        .flatten()
        .map(|seq| assemble_features(seq, labels, config))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingMode {
    Klrf,
    /// Class-entropy term at every node.
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsefulnessRecord {
    pub id: String,
    pub label_index: usize,
    pub usefulness: f64,
}

/// A trained forest plus the artifacts of its training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub mode: TrainingMode,
    pub forest: Forest,
    pub reference: Option<ReferenceForests>,
    pub usefulness: Vec<UsefulnessRecord>,
}

impl TrainedModel {
    pub fn config(&self) -> &KlrfConfig {
        &self.forest.config
    }

    pub fn labels(&self) -> &LabelMap {
        &self.forest.labels
    }

    /// Predicts from the appearance stream alone; privileged fields of
    /// `seq` are never read.
    pub fn predict_sequence(&self, seq: &ActionSequence) -> Result<Prediction> {
        self.forest.predict(&appearance_vector(seq, self.config())?)
    }

    pub fn without_reference(mut self) -> Self {
        self.reference = None;
        self
    }
}

/// Wall-clock per training stage. Kept out of the model so that model bytes
/// depend only on data, config and seed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub stages: Vec<(&'static str, Duration)>,
}

impl StageTimings {
    fn record<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.stages.push((name, start.elapsed()));
        Ok(out)
    }
}

fn check_trainable(sequences: &[ActionSequence], config: &KlrfConfig) -> Result<LabelMap> {
    config.validate()?;
    let violations = validate_dataset(sequences);
    if !violations.is_empty() {
        return Err(KlrfError::InvalidDataset(violations.iter().map(|v| v.to_string()).collect()));
    }
    let labels = LabelMap::from_sequences(sequences);
    if labels.len() < 2 {
        return Err(KlrfError::SingleClass(labels.len()));
    }
    Ok(labels)
}

/// Full pipeline from sequences: features and augmentation, reference
/// forests, usefulness, then the switching forest over appearance features.
pub fn train_klrf(sequences: &[ActionSequence], config: &KlrfConfig) -> Result<(TrainedModel, StageTimings)> {
    let labels = check_trainable(sequences, config)?;
    if let Some(s) = sequences.iter().find(|s| !s.has_privileged()) {
        return Err(KlrfError::MissingKinematics { id: s.id.clone() });
    }
    let mut timings = StageTimings::default();
    let samples = timings.record("features", || prepare_samples(sequences, &labels, config))?;
    let (model, rest) = train_klrf_samples(samples, &labels, config)?;
    timings.stages.extend(rest.stages);
    Ok((model, timings))
}

/// The pipeline from assembled samples onward.
pub fn train_klrf_samples(mut samples: Vec<Sample>, labels: &LabelMap, config: &KlrfConfig) -> Result<(TrainedModel, StageTimings)> {
    config.validate()?;
    let mut timings = StageTimings::default();
    let refs = timings.record("reference forests", || pretrain_reference_forests(&samples, labels, config))?;
    timings.record("usefulness", || annotate_samples(&mut samples, &refs))?;
    let mut forest_config = config.clone();
    if !forest_config.cross_view_mode {
        forest_config.qv_switch_prob = 0.0;
    }
    let selector = KlrfSelector { num_classes: labels.len(), config: forest_config.clone() };
    let forest = timings.record("forest", || {
        train_forest(
            &samples,
            labels,
            FeatureSpace::Appearance,
            &selector,
            &forest_config,
            config.num_trees,
            streams::MAIN,
        )
    })?;
    let usefulness = samples
        .iter()
        .map(|s| UsefulnessRecord {
            id: s.id.clone(),
            label_index: s.label_index,
            usefulness: s.usefulness.unwrap_or(0.0),
        })
        .collect();
    let model = TrainedModel { mode: TrainingMode::Klrf, forest, reference: Some(refs), usefulness };
    Ok((model, timings))
}

/// Class-entropy forest on the same samples and random stream as
/// [`train_klrf`].
pub fn train_baseline(sequences: &[ActionSequence], config: &KlrfConfig) -> Result<(TrainedModel, StageTimings)> {
    let labels = check_trainable(sequences, config)?;
    let mut timings = StageTimings::default();
    let samples = timings.record("features", || prepare_samples(sequences, &labels, config))?;
    let (model, rest) = train_baseline_samples(&samples, &labels, config)?;
    timings.stages.extend(rest.stages);
    Ok((model, timings))
}

pub fn train_baseline_samples(samples: &[Sample], labels: &LabelMap, config: &KlrfConfig) -> Result<(TrainedModel, StageTimings)> {
    let mut timings = StageTimings::default();
    let leaf_kinematics = config.leaf_kinematics && samples.iter().all(|s| !s.kinematic.is_empty());
    let cfg = KlrfConfig { leaf_kinematics, ..config.clone() };
    let forest = timings.record("forest", || {
        train_forest(samples, labels, FeatureSpace::Appearance, &AppearanceSelector, &cfg, config.num_trees, streams::MAIN)
    })?;
    let model = TrainedModel { mode: TrainingMode::Baseline, forest, reference: None, usefulness: Vec::new() };
    Ok((model, timings))
}
