//! Per-frame cues: joint-to-plane displacements, skeleton pairwise/motion/offset
//! differences and the fallback depth descriptor.

use crate::error::{KlrfError, Result};
use crate::model::{DepthFrame, LayoutPlane, SkeletonFrame, Vec3};

/// Side length of the fallback depth grid.
pub const DEPTH_GRID: usize = 16;

/// Length of the layout cue for `joints` joints and `planes` planes.
pub fn layout_cue_len(joints: usize, planes: usize) -> usize {
    3 * joints * planes
}

/// Length of the skeleton cue for `joints` joints.
pub fn skeleton_cue_len(joints: usize) -> usize {
    3 * (joints * joints.saturating_sub(1) / 2 + 2 * joints)
}

/// Perpendicular displacement from the plane to `p`: `p − proj(p)`.
pub fn plane_displacement(p: Vec3, plane: &LayoutPlane) -> Vec3 {
    plane.normal * plane.signed_distance(p)
}

/// Displacements of every joint to every plane, joint-major:
/// `[d_11 … d_1L, d_21 … d_PL]`.
pub fn layout_cue(frame: &SkeletonFrame, planes: &[LayoutPlane]) -> Result<Vec<f64>> {
    if planes.is_empty() {
        return Err(KlrfError::InvalidInput("layout cue needs at least one plane".into()));
    }
    if frame.joints.is_empty() {
        return Err(KlrfError::InvalidInput("layout cue needs at least one joint".into()));
    }
    let mut out = Vec::with_capacity(layout_cue_len(frame.joints.len(), planes.len()));
    for &joint in &frame.joints {
        for plane in planes {
            out.extend_from_slice(&plane_displacement(joint, plane).to_array());
        }
    }
    Ok(out)
}

/// `[d^P; d^M; d^O]`: unordered pairwise differences `p_p − p_q` (p < q),
/// per-joint motion from the previous frame and offset from the first frame.
pub fn skeleton_cue(
    frame: &SkeletonFrame,
    previous: &SkeletonFrame,
    first: &SkeletonFrame,
) -> Result<Vec<f64>> {
    let p = frame.joints.len();
    for other in [previous, first] {
        if other.joints.len() != p {
            return Err(KlrfError::DimensionMismatch {
                what: "skeleton joint count".into(),
                expected: p,
                found: other.joints.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(skeleton_cue_len(p));
    for a in 0..p {
        for b in a + 1..p {
            out.extend_from_slice(&(frame.joints[a] - frame.joints[b]).to_array());
        }
    }
    for (cur, prev) in frame.joints.iter().zip(&previous.joints) {
        out.extend_from_slice(&(*cur - *prev).to_array());
    }
    for (cur, init) in frame.joints.iter().zip(&first.joints) {
        out.extend_from_slice(&(*cur - *init).to_array());
    }
    Ok(out)
}

/// 16×16 block-averaged depth grid, min-max normalized to [0, 1].
/// Constant frames map to all zeros.
pub fn depth_cue_fallback(frame: &DepthFrame) -> Result<Vec<f64>> {
    let (w, h) = (frame.width, frame.height);
    if w == 0 || h == 0 {
        return Err(KlrfError::InvalidInput("depth frame has zero area".into()));
    }
    if frame.values.len() != w * h {
        return Err(KlrfError::DimensionMismatch {
            what: format!("{w}x{h} depth frame"),
            expected: w * h,
            found: frame.values.len(),
        });
    }
    // cell i covers [floor(i·n/16), floor((i+1)·n/16)), widened to one pixel when empty
    let bounds = |i: usize, n: usize| {
        let lo = (i * n / DEPTH_GRID).min(n - 1);
        let hi = ((i + 1) * n / DEPTH_GRID).max(lo + 1).min(n);
        (lo, hi)
    };
    let mut grid = Vec::with_capacity(DEPTH_GRID * DEPTH_GRID);
    for gr in 0..DEPTH_GRID {
        let (r0, r1) = bounds(gr, h);
        for gc in 0..DEPTH_GRID {
            let (c0, c1) = bounds(gc, w);
            let mut sum = 0.0;
            for r in r0..r1 {
                sum += frame.values[r * w + c0..r * w + c1].iter().sum::<f64>();
            }
            grid.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return Ok(vec![0.0; grid.len()]);
    }
    Ok(grid.into_iter().map(|v| (v - lo) / range).collect())
}
