//! Sequence-level feature assembly: per-frame cues pooled by the Fourier
//! temporal pyramid into the appearance vector A(V) and the kinematic-layout
//! vector K(V).

pub mod augment;
pub mod cues;
pub mod fourier;

pub use augment::augment;
pub use cues::{depth_cue_fallback, layout_cue, skeleton_cue};
pub use fourier::{encoded_len, fourier_encode, CueKind, CueMatrix};

use crate::error::{KlrfError, Result};
use crate::model::{ActionSequence, KlrfConfig, LabelMap, Sample};

/// Per-frame appearance cue: ingested vectors if present, otherwise the
/// fallback depth descriptor.
pub fn appearance_cues(seq: &ActionSequence) -> Result<CueMatrix> {
    if let Some(rows) = &seq.appearance_frames {
        if !rows.is_empty() {
            return CueMatrix::from_rows(CueKind::Depth, rows.clone());
        }
    }
    if let Some(depth) = &seq.depth_frames {
        if !depth.is_empty() {
            let rows = depth.iter().map(depth_cue_fallback).collect::<Result<Vec<_>>>()?;
            return CueMatrix::from_rows(CueKind::Depth, rows);
        }
    }
    Err(KlrfError::MissingAppearance { id: seq.id.clone() })
}

pub fn layout_cues(seq: &ActionSequence) -> Result<CueMatrix> {
    let rows = seq
        .frames
        .iter()
        .map(|f| layout_cue(f, &seq.planes))
        .collect::<Result<Vec<_>>>()?;
    CueMatrix::from_rows(CueKind::Layout, rows)
}

pub fn skeleton_cues(seq: &ActionSequence) -> Result<CueMatrix> {
    let first = seq
        .frames
        .first()
        .ok_or_else(|| KlrfError::MissingKinematics { id: seq.id.clone() })?;
    let rows = seq
        .frames
        .iter()
        .enumerate()
        .map(|(t, f)| skeleton_cue(f, &seq.frames[t.saturating_sub(1)], first))
        .collect::<Result<Vec<_>>>()?;
    CueMatrix::from_rows(CueKind::Skeleton, rows)
}

/// A(V): encoded appearance. Needs no privileged data.
pub fn appearance_vector(seq: &ActionSequence, config: &KlrfConfig) -> Result<Vec<f64>> {
    fourier_encode(
        &appearance_cues(seq)?,
        config.pyramid_levels,
        config.fourier_coeffs_per_segment,
    )
}

/// K(V): encoded layout cue followed by encoded skeleton cue. Empty when the
/// sequence carries no skeleton or no planes.
pub fn kinematic_vector(seq: &ActionSequence, config: &KlrfConfig) -> Result<Vec<f64>> {
    if !seq.has_privileged() {
        return Ok(Vec::new());
    }
    let (levels, k) = (config.pyramid_levels, config.fourier_coeffs_per_segment);
    let mut out = fourier_encode(&layout_cues(seq)?, levels, k)?;
    out.extend(fourier_encode(&skeleton_cues(seq)?, levels, k)?);
    Ok(out)
}

/// Builds the sample for one sequence.
pub fn assemble_features(seq: &ActionSequence, labels: &LabelMap, config: &KlrfConfig) -> Result<Sample> {
    let label_index = labels.index_of(&seq.label).ok_or_else(|| KlrfError::UnknownClass {
        name: seq.label.clone(),
        context: format!("sequence {}", seq.id),
    })?;
    Ok(Sample {
        id: seq.id.clone(),
        view: seq.view.clone(),
        appearance: appearance_vector(seq, config)?,
        kinematic: kinematic_vector(seq, config)?,
        label_index,
        usefulness: None,
        augmentation_group: seq.augmentation_group.clone(),
        appearance_posterior: None,
        kinematic_posterior: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LayoutPlane, SkeletonFrame, Vec3};

    fn seq(t: usize, joints: usize, planes: usize) -> ActionSequence {
        ActionSequence {
            id: "x".into(),
            subject: "s".into(),
            view: "0".into(),
            label: "a".into(),
            frames: (0..t)
                .map(|i| SkeletonFrame {
                    t: i + 1,
                    joints: (0..joints)
                        .map(|j| Vec3::new(j as f64, 0.1 * i as f64, 1.0 + j as f64))
                        .collect(),
                })
                .collect(),
            planes: (0..planes)
                .map(|l| LayoutPlane::from_normal(Vec3::new(0.0, 0.0, 1.0), l as f64, format!("p{l}")).unwrap())
                .collect(),
            appearance_frames: Some((0..t).map(|i| vec![i as f64, 1.0]).collect()),
            depth_frames: None,
            augmentation_group: "x".into(),
        }
    }

    #[test]
    fn single_frame_sequence_is_finite() {
        let labels = LabelMap::from_names(["a"]);
        let s = assemble_features(&seq(1, 3, 2), &labels, &KlrfConfig::default()).unwrap();
        assert!(s.appearance.iter().chain(&s.kinematic).all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_formula() {
        let cfg = KlrfConfig::default();
        let k = kinematic_vector(&seq(20, 15, 5), &cfg).unwrap();
        let layout = 3 * 15 * 5 * 4 * 7;
        assert_eq!(layout, 6300);
        assert_eq!(k.len(), layout + cues::skeleton_cue_len(15) * 4 * 7);
    }

    #[test]
    fn in_plane_translation_keeps_layout_block() {
        let cfg = KlrfConfig::default();
        let a = seq(6, 3, 2);
        let b = augment::translate_joints(&a, Vec3::new(2.5, -1.0, 0.0));
        let la = fourier_encode(&layout_cues(&a).unwrap(), 3, 4).unwrap();
        let lb = fourier_encode(&layout_cues(&b).unwrap(), 3, 4).unwrap();
        assert_eq!(la, lb);
        let _ = kinematic_vector(&b, &cfg).unwrap();
    }

    #[test]
    fn stripped_sequence_has_empty_kinematics() {
        let labels = LabelMap::from_names(["a"]);
        let s = assemble_features(&seq(4, 3, 2).strip_privileged(), &labels, &KlrfConfig::default()).unwrap();
        assert!(s.kinematic.is_empty());
        assert!(!s.appearance.is_empty());
    }

    #[test]
    fn missing_appearance_is_rejected() {
        let mut s = seq(3, 2, 1);
        s.appearance_frames = None;
        let labels = LabelMap::from_names(["a"]);
        let err = assemble_features(&s, &labels, &KlrfConfig::default()).unwrap_err();
        assert!(matches!(err, KlrfError::MissingAppearance { .. }));
        assert!(err.to_string().contains("appearance_frames"));
    }

    #[test]
    fn unknown_label_is_rejected() {
        let labels = LabelMap::from_names(["b"]);
        assert!(matches!(
            assemble_features(&seq(3, 2, 1), &labels, &KlrfConfig::default()),
            Err(KlrfError::UnknownClass { .. })
        ));
    }
}
