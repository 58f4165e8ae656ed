//! Temporal pyramid of low-frequency Fourier magnitudes.

use serde::{Deserialize, Serialize};

use crate::error::{KlrfError, Result};
use crate::numeric::dft_low_magnitudes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CueKind {
    Depth,
    Layout,
    Skeleton,
}

/// T × d per-frame cue values, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CueMatrix {
    pub kind: CueKind,
    pub frames: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl CueMatrix {
    pub fn from_rows(kind: CueKind, rows: Vec<Vec<f64>>) -> Result<Self> {
        let frames = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(frames * dim);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(KlrfError::DimensionMismatch {
                    what: format!("{kind:?} cue at frame {t}"),
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend(row);
        }
        Ok(CueMatrix { kind, frames, dim, values })
    }

    pub fn column(&self, j: usize, start: usize, end: usize) -> Vec<f64> {
        (start..end).map(|t| self.values[t * self.dim + j]).collect()
    }
}

/// Output length of [`fourier_encode`].
pub fn encoded_len(dim: usize, levels: usize, k: usize) -> usize {
    dim * k * ((1usize << levels) - 1)
}

/// Frame ranges of the `segments` contiguous pieces of `frames` frames; the
/// remainder goes to the last segment. Short sequences yield empty leading segments.
pub fn segment_bounds(frames: usize, segments: usize) -> Vec<(usize, usize)> {
    let len = frames / segments;
    (0..segments)
        .map(|s| {
            let start = s * len;
            let end = if s + 1 == segments { frames } else { start + len };
            (start, end)
        })
        .collect()
}

/// Encodes a cue matrix as `levels` pyramid levels (level i has 2^(i−1)
/// segments), each segment contributing the `k` lowest DFT magnitudes of every
/// cue dimension. Order: level, segment, dimension, frequency.
pub fn fourier_encode(cue: &CueMatrix, levels: usize, k: usize) -> Result<Vec<f64>> {
    if cue.frames == 0 {
        return Err(KlrfError::InvalidInput("cannot encode an empty cue sequence".into()));
    }
    if levels == 0 || k == 0 {
        return Err(KlrfError::Config("pyramid levels and coefficient count must be ≥ 1".into()));
    }
    let mut out = Vec::with_capacity(encoded_len(cue.dim, levels, k));
    for level in 0..levels {
        for (start, end) in segment_bounds(cue.frames, 1 << level) {
            for j in 0..cue.dim {
                if start == end {
                    out.extend(dft_low_magnitudes(&[0.0], k));
                } else {
                    out.extend(dft_low_magnitudes(&cue.column(j, start, end), k));
                }
            }
        }
    }
    Ok(out)
}
