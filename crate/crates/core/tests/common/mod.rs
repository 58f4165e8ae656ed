//! Independent reference implementations used as test oracles. None of these
//! call into the crate's numeric code.

#![allow(dead_code)]

use klrf::model::{ActionSequence, LayoutPlane, SkeletonFrame, Vec3};
use rand::Rng;

/// Row-major `rows × cols` matrix times vector.
pub fn mat_vec(a: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(w).map(|(x, y)| x * y).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn residual(a: &[Vec<f64>], w: &[f64], b: &[f64]) -> f64 {
    mat_vec(a, w).iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Orthonormal basis of the row space of `a` by modified Gram–Schmidt.
pub fn row_space_basis(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in a {
        let mut v = row.clone();
        // two passes keep the basis orthogonal to rounding level
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        let scale = row.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
        if norm > 1e-9 * scale {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Minimum-norm least squares by steepest descent on `‖Aw − b‖²` with exact
/// line search, followed by removal of the null-space component.
pub fn projected_gradient_lsq(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let cols = a[0].len();
    let mut w = vec![0.0; cols];
    for _ in 0..2_000_000 {
        let r: Vec<f64> = mat_vec(a, &w).iter().zip(b).map(|(x, y)| x - y).collect();
        let g: Vec<f64> = (0..cols).map(|j| a.iter().zip(&r).map(|(row, ri)| row[j] * ri).sum()).collect();
        let gg = dot(&g, &g);
        if gg < 1e-30 {
            break;
        }
        let ag = mat_vec(a, &g);
        let step = gg / dot(&ag, &ag);
        w.iter_mut().zip(&g).for_each(|(x, gi)| *x -= step * gi);
    }
    let basis = row_space_basis(a);
    let mut projected = vec![0.0; cols];
    for q in &basis {
        let c = dot(&w, q);
        projected.iter_mut().zip(q).for_each(|(x, y)| *x += c * y);
    }
    projected
}

/// Direct complex DFT magnitudes of frequencies `0..k`, zero-padded to `k`.
pub fn brute_dft(series: &[f64], k: usize) -> Vec<f64> {
    let n = series.len().max(k);
    (0..k)
        .map(|f| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (t, x) in series.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (f as f64) * (t as f64) / n as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Foot of the perpendicular from `p` found by coarse-to-fine search over
/// points of the plane `{x : n·x = offset}`; returns `p − foot`.
pub fn sampled_plane_displacement(p: [f64; 3], normal: [f64; 3], offset: f64) -> [f64; 3] {
    let n = normal;
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let unit = |v: [f64; 3]| {
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / l, v[1] / l, v[2] / l]
    };
    let u = unit(cross(n, helper));
    let v = unit(cross(n, u));
    let origin = [n[0] * offset, n[1] * offset, n[2] * offset];
    let point = |s: f64, t: f64| [0, 1, 2].map(|i| origin[i] + s * u[i] + t * v[i]);
    let dist2 = |x: [f64; 3]| (0..3).map(|i| (p[i] - x[i]).powi(2)).sum::<f64>();

    let (mut cs, mut ct, mut half) = (0.0, 0.0, 100.0);
    while half > 1e-13 {
        let mut best = (f64::INFINITY, cs, ct);
        for i in -10..=10 {
            for j in -10..=10 {
                let (s, t) = (cs + half * i as f64 / 10.0, ct + half * j as f64 / 10.0);
                let d = dist2(point(s, t));
                if d < best.0 {
                    best = (d, s, t);
                }
            }
        }
        (cs, ct) = (best.1, best.2);
        half /= 4.0;
    }
    let foot = point(cs, ct);
    [0, 1, 2].map(|i| p[i] - foot[i])
}

/// Fraction of `n` items never drawn in `n` uniform draws with replacement,
/// averaged over `trials`.
pub fn simulated_oob_fraction<R: Rng>(n: usize, trials: usize, rng: &mut R) -> f64 {
    let mut total = 0.0;
    for _ in 0..trials {
        let mut seen = vec![false; n];
        for _ in 0..n {
            seen[rng.gen_range(0..n)] = true;
        }
        total += seen.iter().filter(|s| !**s).count() as f64 / n as f64;
    }
    total / trials as f64
}

/// Random probability vector with `classes` entries.
pub fn random_distribution<R: Rng>(classes: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// A small well-formed sequence with `joints` joints, one floor plane and a
/// two-channel appearance stream.
pub fn toy_sequence(id: &str, label: &str, frames: usize, joints: usize) -> ActionSequence {
    ActionSequence {
        id: id.into(),
        subject: "s0".into(),
        view: "0".into(),
        label: label.into(),
        frames: (0..frames)
            .map(|t| SkeletonFrame {
                t: t + 1,
                joints: (0..joints)
                    .map(|j| Vec3::new(0.1 * j as f64, 0.05 * t as f64, 0.5 + 0.2 * j as f64))
                    .collect(),
            })
            .collect(),
        planes: vec![LayoutPlane::from_normal(Vec3::new(0.0, 0.0, 1.0), 0.0, "floor").unwrap()],
        appearance_frames: Some((0..frames).map(|t| vec![(t as f64).sin(), (t as f64 * 0.5).cos()]).collect()),
        depth_frames: None,
        augmentation_group: id.into(),
    }
}
