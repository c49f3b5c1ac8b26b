//! Directory archive for datasets: a JSON manifest plus one binary file per
//! subject and trial kind.
//!
//! The binary layout is fixed so archives round trip bit-exactly:
//! magic `EEGA`, then `version`, `n_trials`, `n_channels`, `n_samples` as
//! little-endian u32, then one little-endian i32 label per trial (`-1` means
//! unlabeled), then all samples as little-endian f32 in trial-major,
//! channel-major order. Samples are stored at f32 precision and widened to
//! f64 in memory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, SubjectRecord, TaskKind, Trial, TrialKind};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EEGA";
const VERSION: u32 = 1;
const SCHEMA_VERSION: u32 = 1;
const MANIFEST_NAME: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
    task_kind: TaskKind,
    fs: f64,
    channel_names: Vec<String>,
    label_map: BTreeMap<u32, String>,
    subjects: Vec<ManifestSubject>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestSubject {
    id: u32,
    trials_file: String,
    resting_file: String,
}

fn archive_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Archive {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Serializes one homogeneous trial list into the binary layout.
fn encode_trials(trials: &[Trial], n_channels: usize, path: &Path) -> Result<Vec<u8>> {
    let n_samples = trials.first().map_or(0, Trial::n_samples);
    for trial in trials {
        if trial.n_samples() != n_samples || trial.n_channels() != n_channels {
            return Err(archive_err(
                path,
                format!(
                    "trials must share one shape per file: expected {n_channels}x{n_samples}, got {}x{}",
                    trial.n_channels(),
                    trial.n_samples()
                ),
            ));
        }
    }
    let mut buf = Vec::with_capacity(20 + trials.len() * (4 + n_channels * n_samples * 4));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(trials.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(n_channels as u32).to_le_bytes());
    buf.extend_from_slice(&(n_samples as u32).to_le_bytes());
    for trial in trials {
        let label = match trial.label {
            None => -1_i32,
            Some(l) => i32::try_from(l).map_err(|_| {
                archive_err(path, format!("label {l} does not fit the i32 label field"))
            })?,
        };
        buf.extend_from_slice(&label.to_le_bytes());
    }
    for trial in trials {
        for row in trial.data.rows() {
            for &v in row {
                let narrow = v as f32;
                if !narrow.is_finite() {
                    return Err(archive_err(
                        path,
                        format!("sample value {v} is not representable as finite f32"),
                    ));
                }
                buf.extend_from_slice(&narrow.to_le_bytes());
            }
        }
    }
    Ok(buf)
}

fn read_u32(buf: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(buf[offset..offset + 4].try_into().unwrap())
}

/// Parses one binary trial file back into trials.
fn decode_trials(
    buf: &[u8],
    path: &Path,
    fs: f64,
    subject: u32,
    kind: TrialKind,
) -> Result<Vec<Trial>> {
    if buf.len() < 20 {
        return Err(archive_err(path, "file shorter than the fixed header"));
    }
    if &buf[0..4] != MAGIC {
        return Err(archive_err(path, "bad magic bytes, expected \"EEGA\""));
    }
    let version = read_u32(buf, 4);
    if version != VERSION {
        return Err(archive_err(
            path,
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let n_trials = read_u32(buf, 8) as usize;
    let n_channels = read_u32(buf, 12) as usize;
    let n_samples = read_u32(buf, 16) as usize;
    let expected = 20 + n_trials * 4 + n_trials * n_channels * n_samples * 4;
    if buf.len() != expected {
        return Err(archive_err(
            path,
            format!(
                "declared counts need {expected} bytes but file holds {}",
                buf.len()
            ),
        ));
    }
    let mut labels = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let raw = i32::from_le_bytes(buf[20 + i * 4..24 + i * 4].try_into().unwrap());
        labels.push(match raw {
            -1 => None,
            l if l >= 0 => Some(l as u32),
            l => {
                return Err(archive_err(path, format!("invalid label value {l}")));
            }
        });
    }
    let mut trials = Vec::with_capacity(n_trials);
    let mut offset = 20 + n_trials * 4;
    for label in labels {
        let mut data = Array2::<f64>::zeros((n_channels, n_samples));
        for ch in 0..n_channels {
            for s in 0..n_samples {
                let v = f32::from_le_bytes(buf[offset..offset + 4].try_into().unwrap());
                if !v.is_finite() {
                    return Err(archive_err(path, format!("non-finite sample value {v}")));
                }
                data[[ch, s]] = f64::from(v);
                offset += 4;
            }
        }
        trials.push(Trial::new(data, fs, label, subject, kind)?);
    }
    Ok(trials)
}

/// Writes a dataset to `dir` in the archive format.
///
/// Two saves of the same dataset produce byte-identical files: the manifest
/// has a fixed key order and the binary layout is fully determined by the
/// data.
pub fn save_archive(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut subjects = Vec::with_capacity(dataset.subjects.len());
    for record in &dataset.subjects {
        let trials_file = format!("s{:03}_trials.bin", record.subject);
        let resting_file = format!("s{:03}_resting.bin", record.subject);
        let trials_path = dir.join(&trials_file);
        let resting_path = dir.join(&resting_file);
        fs::write(
            &trials_path,
            encode_trials(&record.trials, record.n_channels(), &trials_path)?,
        )?;
        fs::write(
            &resting_path,
            encode_trials(&record.resting, record.n_channels(), &resting_path)?,
        )?;
        subjects.push(ManifestSubject {
            id: record.subject,
            trials_file,
            resting_file,
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        task_kind: dataset.task_kind,
        fs: dataset.fs(),
        channel_names: dataset.channel_names().to_vec(),
        label_map: dataset.label_map.clone(),
        subjects,
    };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    fs::write(dir.join(MANIFEST_NAME), text)?;
    Ok(())
}

/// Loads a dataset from an archive directory written by [`save_archive`].
///
/// Values come back bit-identical to the stored f32 samples, widened to f64,
/// with trial order preserved.
pub fn load_archive(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = fs::read(&manifest_path)
        .map_err(|e| archive_err(&manifest_path, format!("cannot read manifest: {e}")))?;
    let manifest: Manifest = serde_json::from_slice(&text)
        .map_err(|e| archive_err(&manifest_path, format!("invalid manifest: {e}")))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(archive_err(
            &manifest_path,
            format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                manifest.schema_version
            ),
        ));
    }
    let mut subjects = Vec::with_capacity(manifest.subjects.len());
    for entry in &manifest.subjects {
        let load_file = |name: &str, kind: TrialKind| -> Result<Vec<Trial>> {
            let path: PathBuf = dir.join(name);
            let buf = fs::read(&path)
                .map_err(|e| archive_err(&path, format!("cannot read trial file: {e}")))?;
            let trials = decode_trials(&buf, &path, manifest.fs, entry.id, kind)?;
            for trial in &trials {
                if trial.n_channels() != manifest.channel_names.len() {
                    return Err(archive_err(
                        &path,
                        format!(
                            "file declares {} channels but manifest names {}",
                            trial.n_channels(),
                            manifest.channel_names.len()
                        ),
                    ));
                }
            }
            Ok(trials)
        };
        let trials = load_file(&entry.trials_file, TrialKind::Task)?;
        let resting = load_file(&entry.resting_file, TrialKind::Resting)?;
        subjects.push(SubjectRecord::new(
            entry.id,
            trials,
            resting,
            manifest.channel_names.clone(),
        )?);
    }
    Dataset::new(subjects, manifest.label_map, manifest.task_kind)
}
