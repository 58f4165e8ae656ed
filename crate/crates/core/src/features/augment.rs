//! Synthetic variants of a training sequence: rigid rotations of the whole
//! scene, small joint translations and cyclic temporal offsets.

use std::f64::consts::PI;

use rand::Rng;

use crate::model::{ActionSequence, AugmentationConfig, LayoutPlane, SkeletonFrame, Vec3};

/// Translation magnitude per axis, as a fraction of the joint bounding-box diagonal.
pub const TRANSLATION_SCALE: f64 = 0.05;

/// 3×3 rotation matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    /// Rodrigues rotation by `angle` radians about unit `axis`.
    pub fn about_axis(axis: Vec3, angle: f64) -> Self {
        let a = axis * (1.0 / axis.norm());
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation([
            [t * a.x * a.x + c, t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y],
            [t * a.x * a.y + s * a.z, t * a.y * a.y + c, t * a.y * a.z - s * a.x],
            [t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c],
        ])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

/// Rigid rotation of every joint and plane about `center`.
pub fn rotate_scene(seq: &ActionSequence, rotation: &Rotation, center: Vec3) -> ActionSequence {
    let mut out = seq.clone();
    for frame in &mut out.frames {
        for j in &mut frame.joints {
            *j = rotation.apply(*j - center) + center;
        }
    }
    out.planes = seq
        .planes
        .iter()
        .map(|p| {
            let normal = rotation.apply(p.normal);
            let on_plane = rotation.apply(p.normal * p.offset - center) + center;
            LayoutPlane {
                normal,
                offset: normal.dot(on_plane),
                label: p.label.clone(),
            }
        })
        .collect();
    out
}

/// Shifts joints only; planes stay put.
pub fn translate_joints(seq: &ActionSequence, shift: Vec3) -> ActionSequence {
    let mut out = seq.clone();
    for frame in &mut out.frames {
        for j in &mut frame.joints {
            *j = *j + shift;
        }
    }
    out
}

/// Starts the sequence at frame `offset`, wrapping around cyclically.
pub fn temporal_shift(seq: &ActionSequence, offset: usize) -> ActionSequence {
    let mut out = seq.clone();
    let t = seq.len();
    if t == 0 {
        return out;
    }
    let offset = offset.min(t - 1);
    let n = out.frames.len();
    out.frames.rotate_left(offset.min(n.saturating_sub(1)));
    for (i, f) in out.frames.iter_mut().enumerate() {
        f.t = i + 1;
    }
    if let Some(a) = &mut out.appearance_frames {
        if !a.is_empty() {
            let n = a.len();
            a.rotate_left(offset.min(n - 1));
        }
    }
    if let Some(d) = &mut out.depth_frames {
        if !d.is_empty() {
            let n = d.len();
            d.rotate_left(offset.min(n - 1));
        }
    }
    out
}

/// Mean of all joints over all frames.
pub fn scene_centroid(frames: &[SkeletonFrame]) -> Vec3 {
    let mut sum = Vec3::default();
    let mut n = 0usize;
    for j in frames.iter().flat_map(|f| &f.joints) {
        sum = sum + *j;
        n += 1;
    }
    if n == 0 {
        sum
    } else {
        sum * (1.0 / n as f64)
    }
}

fn bounding_diagonal(frames: &[SkeletonFrame]) -> f64 {
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for j in frames.iter().flat_map(|f| &f.joints) {
        lo = Vec3::new(lo.x.min(j.x), lo.y.min(j.y), lo.z.min(j.z));
        hi = Vec3::new(hi.x.max(j.x), hi.y.max(j.y), hi.z.max(j.z));
    }
    let d = (hi - lo).norm();
    if d.is_finite() {
        d
    } else {
        0.0
    }
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn variant(base: &ActionSequence, mut seq: ActionSequence, tag: String) -> ActionSequence {
    seq.id = format!("{}#{tag}", base.id);
    seq.augmentation_group = base.augmentation_group.clone();
    seq.label = base.label.clone();
    seq
}

/// Returns the original sequence followed by its synthetic variants.
///
/// Independent mode yields `translations + rotations + temporal_offsets`
/// variants; product mode yields every combination. Rotation and translation
/// need skeleton frames and are skipped without them.
pub fn augment<R: Rng + ?Sized>(
    seq: &ActionSequence,
    config: &AugmentationConfig,
    rng: &mut R,
) -> Vec<ActionSequence> {
    let mut out = vec![seq.clone()];
    let geometric = !seq.frames.is_empty();
    let scale = TRANSLATION_SCALE * bounding_diagonal(&seq.frames);
    let center = scene_centroid(&seq.frames);
    let max_angle = config.rotation_max_deg.to_radians();

    let shifts: Vec<Vec3> = if geometric {
        (0..config.translations)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-1.0..=1.0),
                    rng.gen_range(-1.0..=1.0),
                    rng.gen_range(-1.0..=1.0),
                ) * scale
            })
            .collect()
    } else {
        Vec::new()
    };
    let rotations: Vec<Rotation> = if geometric {
        (0..config.rotations)
            .map(|_| {
                let axis = random_unit(rng);
                let angle = rng.gen_range(0.0..=1.0) * max_angle;
                Rotation::about_axis(axis, angle)
            })
            .collect()
    } else {
        Vec::new()
    };
    let offsets: Vec<usize> = (0..config.temporal_offsets).collect();

    if config.product {
        let shifts = if shifts.is_empty() { vec![Vec3::default()] } else { shifts };
        let rotations = if rotations.is_empty() {
            vec![Rotation::about_axis(Vec3::new(0.0, 0.0, 1.0), 0.0)]
        } else {
            rotations
        };
        let offsets = if offsets.is_empty() { vec![0] } else { offsets };
        for (i, s) in shifts.iter().enumerate() {
            for (j, r) in rotations.iter().enumerate() {
                for &o in &offsets {
                    let v = temporal_shift(&rotate_scene(&translate_joints(seq, *s), r, center), o);
                    out.push(variant(seq, v, format!("t{i}r{j}o{o}")));
                }
            }
        }
        return out;
    }

    for (i, s) in shifts.iter().enumerate() {
        out.push(variant(seq, translate_joints(seq, *s), format!("t{i}")));
    }
    for (j, r) in rotations.iter().enumerate() {
        out.push(variant(seq, rotate_scene(seq, r, center), format!("r{j}")));
    }
    for &o in &offsets {
        out.push(variant(seq, temporal_shift(seq, o), format!("o{o}")));
    }
    out
}
