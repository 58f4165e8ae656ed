//! Test-set evaluation, the consistency-filtered variant, and run reports.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KlrfError, Result};
use crate::features::augment::temporal_shift;
use crate::learning::{kcf, TrainedModel, TrainingMode, UsefulnessRecord};
use crate::model::{ActionSequence, ClassDistribution, KlrfConfig, LabelMap};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Smooth each prediction over its augmentation group with the
    /// kinematic consistency filter.
    pub kcf: bool,
    /// Cyclic temporal offsets `1..=n` of every test sequence joined to its
    /// group when filtering. Zero keeps groups as given.
    pub temporal_offsets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequencePrediction {
    pub id: String,
    pub view: String,
    pub label: String,
    pub predicted: String,
    pub distribution: ClassDistribution,
}

/// Per-class and aggregate scores. `mean_accuracy` is the mean of the
/// row-normalized confusion diagonal over classes with test samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: TrainingMode,
    pub seed: u64,
    pub kcf: bool,
    pub class_names: Vec<String>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub mean_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub per_view_accuracy: BTreeMap<String, f64>,
    pub config: KlrfConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

/// Confusion matrix (true × predicted) over label indices.
pub fn confusion_matrix(pairs: &[(usize, usize)], num_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; num_classes]; num_classes];
    for &(y, p) in pairs {
        m[y][p] += 1;
    }
    m
}

/// Row-normalized diagonal; `None` for classes without samples.
pub fn per_class_accuracy(confusion: &[Vec<usize>]) -> Vec<Option<f64>> {
    confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: usize = row.iter().sum();
            (n > 0).then(|| row[i] as f64 / n as f64)
        })
        .collect()
}

fn mean_present(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let present: Vec<f64> = values.flatten().collect();
    if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    }
}

pub fn mean_accuracy(confusion: &[Vec<usize>]) -> f64 {
    mean_present(per_class_accuracy(confusion).into_iter())
}

/// Macro precision over predicted columns that received any prediction.
pub fn macro_precision(confusion: &[Vec<usize>]) -> f64 {
    mean_present((0..confusion.len()).map(|j| {
        let n: usize = confusion.iter().map(|row| row[j]).sum();
        (n > 0).then(|| confusion[j][j] as f64 / n as f64)
    }))
}

fn label_of(labels: &LabelMap, seq: &ActionSequence) -> Result<usize> {
    labels.index_of(&seq.label).ok_or_else(|| KlrfError::UnknownClass {
        name: seq.label.clone(),
        context: format!("test sequence {}", seq.id),
    })
}

/// Predicts every sequence from appearance only, optionally filtered.
pub fn predict_all(model: &TrainedModel, sequences: &[ActionSequence], options: &EvalOptions) -> Result<Vec<ClassDistribution>> {
    if !options.kcf {
        return sequences
            .par_iter()
            .map(|s| model.predict_sequence(s).map(|p| p.distribution))
            .collect();
    }
    let expanded: Vec<Vec<ActionSequence>> = sequences
        .iter()
        .map(|s| {
            let mut v = vec![s.clone()];
            v.extend((1..=options.temporal_offsets).map(|o| temporal_shift(s, o)));
            v
        })
        .collect();
    let predictions: Vec<Vec<(ClassDistribution, Vec<f64>)>> = expanded
        .par_iter()
        .map(|vs| {
            vs.iter()
                .map(|s| {
                    let p = model.predict_sequence(s)?;
                    if p.kinematic.is_empty() {
                        return Err(KlrfError::InvalidInput(
                            "consistency filter needs a model whose leaves store kinematic vectors".into(),
                        ));
                    }
                    Ok((p.distribution, p.kinematic))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, s) in sequences.iter().enumerate() {
        let key = if s.augmentation_group.is_empty() { s.id.as_str() } else { s.augmentation_group.as_str() };
        groups.entry(key).or_default().push(i);
    }
    let bandwidth = model.config().kcf_bandwidth;
    sequences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let key = if s.augmentation_group.is_empty() { s.id.as_str() } else { s.augmentation_group.as_str() };
            let members: Vec<(ClassDistribution, Vec<f64>)> =
                groups[key].iter().flat_map(|&j| predictions[j].iter().cloned()).collect();
            kcf(&predictions[i][0].1, &members, bandwidth)
        })
        .collect()
}

/// Scores `sequences` and assembles the run report.
pub fn evaluate(
    model: &TrainedModel,
    sequences: &[ActionSequence],
    options: &EvalOptions,
) -> Result<(RunReport, Vec<SequencePrediction>)> {
    let labels = model.labels();
    let truth: Vec<usize> = sequences.iter().map(|s| label_of(labels, s)).collect::<Result<_>>()?;
    let dists = predict_all(model, sequences, options)?;
    let pairs: Vec<(usize, usize)> = truth.iter().zip(&dists).map(|(&y, d)| (y, d.argmax())).collect();
    let confusion = confusion_matrix(&pairs, labels.len());

    let mut by_view: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (s, &pair) in sequences.iter().zip(&pairs) {
        by_view.entry(s.view.clone()).or_default().push(pair);
    }
    let per_view_accuracy = by_view
        .into_iter()
        .map(|(v, p)| (v, mean_accuracy(&confusion_matrix(&p, labels.len()))))
        .collect();

    let per_class = per_class_accuracy(&confusion);
    let report = RunReport {
        mode: model.mode,
        seed: model.config().seed,
        kcf: options.kcf,
        class_names: labels.names().to_vec(),
        mean_accuracy: mean_present(per_class.iter().copied()),
        recall: mean_present(per_class.iter().copied()),
        precision: macro_precision(&confusion),
        per_class_accuracy: per_class,
        confusion,
        per_view_accuracy,
        config: model.config().clone(),
        wall_clock_secs: None,
    };
    let predictions = sequences
        .iter()
        .zip(dists)
        .map(|(s, d)| SequencePrediction {
            id: s.id.clone(),
            view: s.view.clone(),
            label: s.label.clone(),
            predicted: labels.name(d.argmax()).to_owned(),
            distribution: d,
        })
        .collect();
    Ok((report, predictions))
}

/// Per-class summary of usefulness scores over `bins` equal-width bins on [−1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsefulnessSummary {
    pub class_name: String,
    pub count: usize,
    pub mean: f64,
    pub histogram: Vec<usize>,
}

pub fn usefulness_summary(records: &[UsefulnessRecord], labels: &LabelMap, bins: usize) -> Vec<UsefulnessSummary> {
    let bins = bins.max(1);
    let mut out: Vec<UsefulnessSummary> = labels
        .names()
        .iter()
        .map(|n| UsefulnessSummary { class_name: n.clone(), count: 0, mean: 0.0, histogram: vec![0; bins] })
        .collect();
    for r in records {
        let s = &mut out[r.label_index];
        s.count += 1;
        s.mean += r.usefulness;
        let b = (((r.usefulness + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
        s.histogram[b] += 1;
    }
    for s in &mut out {
        if s.count > 0 {
            s.mean /= s.count as f64;
        }
    }
    out
}
