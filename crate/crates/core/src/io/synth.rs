//! Synthetic benchmark with a known split between classes that are separable
//! only through scene-layout geometry and classes separable only through the
//! temporal content of the appearance stream.
//!
//! * Kinematic classes hold distinct static poses relative to a "bed" and a
//!   "floor" plane. Their appearance is one shared signal plus
//!   `σ_a · (λ · class pattern + white noise)`, so at `σ_a = 0` they look
//!   identical.
//! * Appearance classes share one pose and differ in the dominant temporal
//!   frequency of their appearance signal.
//!
//! Views rotate the skeleton about the vertical axis and mix appearance
//! channel pairs by the same angle. Train and test subjects are disjoint.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{KlrfError, Result};
use crate::features::augment::{rotate_scene, Rotation};
use crate::forest::derived_rng;
use crate::model::{ActionSequence, LayoutPlane, SkeletonFrame, Vec3};

mod salt {
    pub const PATTERN: u64 = 101;
    pub const SUBJECT: u64 = 102;
    pub const SEQUENCE: u64 = 103;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_classes: usize,
    /// Per split: this many training and this many test sequences per class.
    pub sequences_per_class: usize,
    pub frames_per_sequence: usize,
    pub kinematic_classes: Vec<usize>,
    pub appearance_classes: Vec<usize>,
    /// σ_a: scale of appearance noise and of the kinematic classes' appearance pattern.
    pub appearance_noise: f64,
    /// σ_k: per-frame joint jitter and subject variability.
    pub kinematic_noise: f64,
    /// λ: strength of the kinematic classes' appearance pattern relative to noise.
    pub class_signal: f64,
    pub appearance_dim: usize,
    /// Test views in degrees about the vertical axis.
    pub views: Vec<f64>,
    pub train_view: f64,
    pub subjects_per_split: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 6,
            sequences_per_class: 50,
            frames_per_sequence: 20,
            kinematic_classes: vec![0, 1, 2],
            appearance_classes: vec![3, 4, 5],
            appearance_noise: 1.0,
            kinematic_noise: 0.03,
            class_signal: 0.15,
            appearance_dim: 8,
            views: vec![0.0],
            train_view: 0.0,
            subjects_per_split: 5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KlrfError::Config(m));
        let mut all: Vec<usize> = self.kinematic_classes.iter().chain(&self.appearance_classes).copied().collect();
        all.sort_unstable();
        if all != (0..self.num_classes).collect::<Vec<_>>() {
            return bad("kinematic_classes and appearance_classes must partition 0..num_classes".into());
        }
        if self.num_classes < 2 || self.sequences_per_class == 0 || self.frames_per_sequence == 0 {
            return bad("need ≥ 2 classes, ≥ 1 sequence per class and ≥ 1 frame".into());
        }
        if self.appearance_dim < 2 || self.subjects_per_split == 0 {
            return bad("appearance_dim must be ≥ 2 and subjects_per_split ≥ 1".into());
        }
        for (name, v) in [
            ("appearance_noise", self.appearance_noise),
            ("kinematic_noise", self.kinematic_noise),
            ("class_signal", self.class_signal),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and ≥ 0"));
            }
        }
        if self.views.is_empty() || self.views.iter().chain([&self.train_view]).any(|v| !v.is_finite()) {
            return bad("views must be a nonempty list of finite angles".into());
        }
        Ok(())
    }

    pub fn class_name(&self, class: usize) -> String {
        match self.kinematic_classes.iter().position(|&c| c == class) {
            Some(r) => format!("static_{r}"),
            None => {
                let q = self.appearance_classes.iter().position(|&c| c == class).unwrap_or(0);
                format!("dynamic_{q}")
            }
        }
    }
}

/// Generated splits. `tests` holds one test set per configured view.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub train: Vec<ActionSequence>,
    pub tests: Vec<(f64, Vec<ActionSequence>)>,
}

pub const PLANE_LABELS: [&str; 2] = ["bed", "floor"];

fn planes() -> Vec<LayoutPlane> {
    let up = Vec3::new(0.0, 0.0, 1.0);
    vec![
        LayoutPlane { normal: up, offset: 0.5, label: PLANE_LABELS[0].into() },
        LayoutPlane { normal: up, offset: 0.0, label: PLANE_LABELS[1].into() },
    ]
}

/// (head, body) positions of a class's pose.
fn pose(config: &SynthConfig, class: usize) -> [Vec3; 2] {
    match config.kinematic_classes.iter().position(|&c| c == class) {
        Some(r) => {
            let r = r as f64;
            let body = 0.55 + 0.25 * r;
            let reach = (0.7 - 0.35 * r).max(0.0);
            [Vec3::new(reach, 0.0, body + 0.15 + 0.25 * r), Vec3::new(0.0, 0.0, body)]
        }
        None => [Vec3::new(0.2, 0.0, 0.9), Vec3::new(0.0, 0.0, 0.3)],
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

struct Subject {
    scale: f64,
    shift: Vec3,
}

fn subject(config: &SynthConfig, index: usize) -> Subject {
    let mut rng = derived_rng(config.seed, salt::SUBJECT, index as u64);
    let s = config.kinematic_noise;
    Subject {
        scale: 1.0 + s * normal(&mut rng),
        shift: Vec3::new(3.0 * s * normal(&mut rng), 3.0 * s * normal(&mut rng), 0.0),
    }
}

fn class_pattern(config: &SynthConfig, class: usize) -> Vec<f64> {
    let mut rng = derived_rng(config.seed, salt::PATTERN, class as u64);
    (0..config.appearance_dim).map(|_| normal(&mut rng)).collect()
}

/// Rotates appearance channel pairs `(2j, 2j+1)` by `angle` radians.
fn mix_channels(row: &mut [f64], angle: f64) {
    let (s, c) = angle.sin_cos();
    for pair in row.chunks_exact_mut(2) {
        let (a, b) = (pair[0], pair[1]);
        pair[0] = c * a - s * b;
        pair[1] = s * a + c * b;
    }
}

/// Applies a view change to a view-0 sequence.
pub fn view_variant(seq: &ActionSequence, degrees: f64) -> ActionSequence {
    let angle = degrees.to_radians();
    let mut out = rotate_scene(seq, &Rotation::about_axis(Vec3::new(0.0, 0.0, 1.0), angle), Vec3::default());
    if let Some(rows) = &mut out.appearance_frames {
        for row in rows {
            mix_channels(row, angle);
        }
    }
    out.view = format!("{degrees}");
    out
}

fn sequence(config: &SynthConfig, class: usize, split: usize, index: usize) -> ActionSequence {
    let subject_index = split * config.subjects_per_split + index % config.subjects_per_split;
    let who = subject(config, subject_index);
    let stream = ((split * config.num_classes + class) * config.sequences_per_class + index) as u64;
    let mut rng = derived_rng(config.seed, salt::SEQUENCE, stream);
    let t_len = config.frames_per_sequence;
    let phase = rng.gen_range(0.0..2.0 * PI);
    let sk = config.kinematic_noise;
    let proto = pose(config, class);

    let frames = (0..t_len)
        .map(|t| SkeletonFrame {
            t: t + 1,
            joints: proto
                .iter()
                .map(|p| {
                    let jitter = Vec3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * sk;
                    *p * who.scale + who.shift + jitter
                })
                .collect(),
        })
        .collect();

    let kinematic_rank = config.kinematic_classes.iter().position(|&c| c == class);
    let pattern = kinematic_rank.map(|_| class_pattern(config, class));
    let freq = match kinematic_rank {
        Some(_) => 1.0,
        None => 2.0 + config.appearance_classes.iter().position(|&c| c == class).unwrap_or(0) as f64,
    };
    let sa = config.appearance_noise;
    let appearance = (0..t_len)
        .map(|t| {
            (0..config.appearance_dim)
                .map(|j| {
                    let arg = 2.0 * PI * freq * t as f64 / t_len as f64 + phase + j as f64 * PI / 4.0;
                    let class_term = pattern.as_ref().map_or(0.0, |p| config.class_signal * p[j]);
                    arg.sin() + sa * (class_term + normal(&mut rng))
                })
                .collect()
        })
        .collect();

    let split_name = if split == 0 { "train" } else { "test" };
    let id = format!("{split_name}_{}_{index:03}", config.class_name(class));
    ActionSequence {
        id: id.clone(),
        subject: format!("subject_{subject_index:02}"),
        view: "0".into(),
        label: config.class_name(class),
        frames,
        planes: planes(),
        appearance_frames: Some(appearance),
        depth_frames: None,
        augmentation_group: id,
    }
}

/// Pure function of `config` (including its seed).
pub fn synth_generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let split = |s: usize| -> Vec<ActionSequence> {
        (0..config.num_classes)
            .flat_map(|c| (0..config.sequences_per_class).map(move |i| (c, i)))
            .map(|(c, i)| sequence(config, c, s, i))
            .collect()
    };
    let train = split(0).iter().map(|s| view_variant(s, config.train_view)).collect();
    let base = split(1);
    let tests = config
        .views
        .iter()
        .map(|&deg| (deg, base.iter().map(|s| view_variant(s, deg)).collect()))
        .collect();
    Ok(SynthData { train, tests })
}
