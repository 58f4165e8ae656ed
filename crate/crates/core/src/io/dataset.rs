//! Dataset manifests and line-delimited sequence files.
//!
//! A manifest is a JSON document listing sequence files relative to its own
//! directory. Each sequence file holds one JSON record per line: a header
//! record followed by one record per frame.
//!
//! ```text
//! {"id":"s01_a","subject":"s01","view":"0","label":"sit","augmentation_group":"s01_a","planes":[{"label":"floor","normal":[0,0,1],"offset":0}]}
//! {"t":1,"joints":[[0.1,0.2,1.7],[0.1,0.2,1.1]],"appearance":[0.3,0.1]}
//! {"t":2,"joints":[[0.1,0.2,1.6],[0.1,0.2,1.0]],"appearance":[0.2,0.4]}
//! ```
//!
//! `joints`, `appearance` and `depth` are each optional per dataset, but a
//! stream present on one frame must be present on all frames of that file.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KlrfError, Result};
use crate::model::{validate_dataset, ActionSequence, DepthFrame, LayoutPlane, SkeletonFrame, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub joint_count: usize,
    pub plane_labels: Vec<String>,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appearance_dim: Option<usize>,
    /// Paths relative to the manifest's directory.
    pub sequences: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub sequences: Vec<ActionSequence>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlaneRecord {
    label: String,
    normal: [f64; 3],
    offset: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    id: String,
    #[serde(default)]
    subject: String,
    #[serde(default)]
    view: String,
    label: String,
    #[serde(default)]
    augmentation_group: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    planes: Vec<PlaneRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joints: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    appearance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth: Option<DepthFrame>,
}

fn format_err(path: &Path, message: impl Into<String>) -> KlrfError {
    KlrfError::DatasetFormat { path: path.to_path_buf(), message: message.into() }
}

/// Reads one sequence file and checks it against the manifest.
pub fn read_sequence(path: &Path, manifest: &DatasetManifest) -> Result<ActionSequence> {
    let file = fs::File::open(path).map_err(|e| KlrfError::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let parse_err = |line: usize, e: serde_json::Error| KlrfError::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    };

    let (line, header) = lines.next().ok_or_else(|| format_err(path, "file is empty"))?;
    let header = header.map_err(|e| KlrfError::io(path, e))?;
    let header: HeaderRecord = serde_json::from_str(&header).map_err(|e| parse_err(line, e))?;
    if !manifest.class_names.iter().any(|c| *c == header.label) {
        return Err(KlrfError::UnknownClass {
            name: header.label,
            context: path.display().to_string(),
        });
    }

    let planes = if header.planes.is_empty() {
        Vec::new()
    } else {
        let mut ordered = Vec::with_capacity(manifest.plane_labels.len());
        for label in &manifest.plane_labels {
            let rec = header
                .planes
                .iter()
                .find(|p| &p.label == label)
                .ok_or_else(|| format_err(path, format!("missing plane '{label}'")))?;
            ordered.push(LayoutPlane {
                normal: Vec3::from(rec.normal),
                offset: rec.offset,
                label: rec.label.clone(),
            });
        }
        if header.planes.len() != ordered.len() {
            return Err(KlrfError::DimensionMismatch {
                what: format!("plane count in {}", path.display()),
                expected: manifest.plane_labels.len(),
                found: header.planes.len(),
            });
        }
        ordered
    };

    let (mut frames, mut appearance, mut depth) = (Vec::new(), Vec::new(), Vec::new());
    let mut streams: Option<(bool, bool, bool)> = None;
    for (line, text) in lines {
        let text = text.map_err(|e| KlrfError::io(path, e))?;
        let rec: FrameRecord = serde_json::from_str(&text).map_err(|e| parse_err(line, e))?;
        let present = (rec.joints.is_some(), rec.appearance.is_some(), rec.depth.is_some());
        if *streams.get_or_insert(present) != present {
            return Err(format_err(path, format!("line {line}: frame streams differ from the first frame")));
        }
        if let Some(joints) = rec.joints {
            if joints.len() != manifest.joint_count {
                return Err(KlrfError::DimensionMismatch {
                    what: format!("joint count at {}:{line}", path.display()),
                    expected: manifest.joint_count,
                    found: joints.len(),
                });
            }
            frames.push(SkeletonFrame { t: rec.t, joints: joints.into_iter().map(Vec3::from).collect() });
        }
        if let Some(a) = rec.appearance {
            if let Some(dim) = manifest.appearance_dim {
                if a.len() != dim {
                    return Err(KlrfError::DimensionMismatch {
                        what: format!("appearance vector at {}:{line}", path.display()),
                        expected: dim,
                        found: a.len(),
                    });
                }
            }
            appearance.push(a);
        }
        if let Some(d) = rec.depth {
            if d.values.len() != d.width * d.height {
                return Err(format_err(path, format!("line {line}: depth grid size does not match width·height")));
            }
            depth.push(d);
        }
    }
    if streams.is_none() {
        return Err(format_err(path, "sequence has no frames"));
    }

    Ok(ActionSequence {
        id: header.id,
        subject: header.subject,
        view: header.view,
        label: header.label,
        frames,
        planes,
        appearance_frames: (!appearance.is_empty()).then_some(appearance),
        depth_frames: (!depth.is_empty()).then_some(depth),
        augmentation_group: header.augmentation_group,
    })
}

/// Writes one sequence file.
pub fn write_sequence(path: &Path, seq: &ActionSequence) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| KlrfError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = HeaderRecord {
        id: seq.id.clone(),
        subject: seq.subject.clone(),
        view: seq.view.clone(),
        label: seq.label.clone(),
        augmentation_group: seq.augmentation_group.clone(),
        planes: seq
            .planes
            .iter()
            .map(|p| PlaneRecord { label: p.label.clone(), normal: p.normal.to_array(), offset: p.offset })
            .collect(),
    };
    let ser = |e: serde_json::Error| KlrfError::Serialization(e.to_string());
    let io = |e| KlrfError::io(path, e);
    writeln!(out, "{}", serde_json::to_string(&header).map_err(ser)?).map_err(io)?;
    for t in 0..seq.len() {
        let rec = FrameRecord {
            t: seq.frames.get(t).map_or(t + 1, |f| f.t),
            joints: seq.frames.get(t).map(|f| f.joints.iter().map(|j| j.to_array()).collect()),
            appearance: seq.appearance_frames.as_ref().and_then(|a| a.get(t).cloned()),
            depth: seq.depth_frames.as_ref().and_then(|d| d.get(t).cloned()),
        };
        writeln!(out, "{}", serde_json::to_string(&rec).map_err(ser)?).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Loads a manifest and all its sequences (in parallel), then validates the
/// whole dataset.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| KlrfError::io(manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| KlrfError::Parse {
        path: manifest_path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let sequences = manifest
        .sequences
        .par_iter()
        .map(|rel| read_sequence(&base.join(rel), &manifest))
        .collect::<Result<Vec<_>>>()?;
    let violations = validate_dataset(&sequences);
    if !violations.is_empty() {
        return Err(KlrfError::InvalidDataset(violations.iter().map(|v| v.to_string()).collect()));
    }
    Ok(Dataset { manifest, sequences })
}

/// Writes `dir/<manifest_name>` and one file per sequence under
/// `dir/sequences/`. Returns the manifest path.
pub fn save_dataset(dir: &Path, manifest_name: &str, dataset: &Dataset) -> Result<PathBuf> {
    let seq_dir = dir.join("sequences");
    fs::create_dir_all(&seq_dir).map_err(|e| KlrfError::io(&seq_dir, e))?;
    let mut manifest = dataset.manifest.clone();
    manifest.sequences = dataset
        .sequences
        .iter()
        .map(|s| format!("sequences/{}.jsonl", file_stem(&s.id)))
        .collect();
    dataset
        .sequences
        .par_iter()
        .zip(&manifest.sequences)
        .try_for_each(|(s, rel)| write_sequence(&dir.join(rel), s))?;
    let path = dir.join(manifest_name);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| KlrfError::Serialization(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| KlrfError::io(&path, e))?;
    Ok(path)
}

impl Dataset {
    /// Manifest fields derived from the sequences themselves.
    pub fn from_sequences(name: impl Into<String>, sequences: Vec<ActionSequence>) -> Self {
        let mut class_names: Vec<String> = sequences.iter().map(|s| s.label.clone()).collect();
        class_names.sort();
        class_names.dedup();
        let joint_count = sequences.iter().find_map(|s| s.joint_count()).unwrap_or(0);
        let plane_labels = sequences
            .iter()
            .find(|s| !s.planes.is_empty())
            .map(|s| s.planes.iter().map(|p| p.label.clone()).collect())
            .unwrap_or_default();
        let appearance_dim = sequences
            .iter()
            .find_map(|s| s.appearance_frames.as_ref().and_then(|a| a.first()).map(Vec::len));
        Dataset {
            manifest: DatasetManifest {
                name: name.into(),
                joint_count,
                plane_labels,
                class_names,
                appearance_dim,
                sequences: Vec::new(),
            },
            sequences,
        }
    }
}
