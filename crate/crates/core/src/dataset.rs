//! On-disk grid format: one JSON manifest per zone plus one raw
//! little-endian `f32` blob per impulse response.
//!
//! ```text
//! <grid-dir>/manifest.json
//! <grid-dir>/ir_m000_s000.f32
//! ...
//! ```
//!
//! Entries whose `file` ends in `.wav` are decoded (PCM16 or float32, mono)
//! and mapped into the native representation. Saving always writes the
//! native format. Samples are held as `f64` in memory and stored as `f32`,
//! so the first save of a simulated grid quantises; after that the
//! round trip is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ir::{GridError, ImpulseResponse, IrError, IrGrid, Point3, Zone};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },
    #[error("missing blob {0}")]
    MissingBlob(PathBuf),
    #[error("checksum mismatch for {path}: manifest {expected}, file {found}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("wav decode error in {path}: {reason}")]
    Wav { path: PathBuf, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub zone: Zone,
    pub sample_rate_hz: f64,
    pub sound_speed_mps: f64,
    pub n_samples: usize,
    pub mics: Vec<Point3>,
    pub speakers: Vec<Point3>,
    pub irs: Vec<ManifestEntry>,
    /// Set when the grid was SICER-corrected from this sound speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_from_mps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub mic: usize,
    pub speaker: usize,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

fn blob_name(mic: usize, speaker: usize) -> String {
    format!("ir_m{mic:03}_s{speaker:03}.f32")
}

fn encode_f32(samples: &[f64]) -> Vec<u8> {
    samples
        .iter()
        .flat_map(|&x| (x as f32).to_le_bytes())
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `grid` into `dir` (created if absent).
pub fn save_grid(grid: &IrGrid, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let l = grid.num_speakers();
    let mut entries = Vec::with_capacity(grid.irs().len());
    for (i, ir) in grid.irs().iter().enumerate() {
        let (mic, speaker) = (i / l, i % l);
        let file = blob_name(mic, speaker);
        let bytes = encode_f32(ir.samples());
        let path = dir.join(&file);
        fs::write(&path, &bytes).map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            mic,
            speaker,
            file,
            sha256: Some(sha256_hex(&bytes)),
            label: ir.label().to_string(),
        });
    }
    let manifest = Manifest {
        zone: grid.zone(),
        sample_rate_hz: grid.sample_rate_hz(),
        sound_speed_mps: grid.sound_speed_mps(),
        n_samples: grid.ir_len(),
        mics: grid.mic_positions().to_vec(),
        speakers: grid.speaker_positions().to_vec(),
        irs: entries,
        corrected_from_mps: grid.corrected_from_mps(),
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(())
}

/// Read a grid previously written by [`save_grid`] (or a hand-written
/// manifest following the same schema).
pub fn load_grid(dir: impl AsRef<Path>) -> Result<IrGrid, DatasetError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
    let malformed = |reason: String| DatasetError::MalformedManifest {
        path: manifest_path.clone(),
        reason,
    };
    let m: Manifest = serde_json::from_slice(&text).map_err(|e| malformed(e.to_string()))?;

    let (k, l) = (m.mics.len(), m.speakers.len());
    if k == 0 || l == 0 {
        return Err(malformed(format!("empty geometry (K={k}, L={l})")));
    }
    if m.irs.len() != k * l {
        return Err(malformed(format!(
            "{} IR entries for K={k} mics and L={l} speakers",
            m.irs.len()
        )));
    }
    if m.n_samples == 0 {
        return Err(malformed("n_samples must be at least 1".into()));
    }

    let mut slots: Vec<Option<ImpulseResponse>> = vec![None; k * l];
    for entry in &m.irs {
        if entry.mic >= k || entry.speaker >= l {
            return Err(malformed(format!(
                "entry ({}, {}) outside K={k} x L={l}",
                entry.mic, entry.speaker
            )));
        }
        let slot = &mut slots[entry.mic * l + entry.speaker];
        if slot.is_some() {
            return Err(malformed(format!(
                "duplicate entry ({}, {})",
                entry.mic, entry.speaker
            )));
        }
        let path = dir.join(&entry.file);
        if !path.is_file() {
            return Err(DatasetError::MissingBlob(path));
        }
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if let Some(expected) = &entry.sha256 {
            let found = sha256_hex(&bytes);
            if !found.eq_ignore_ascii_case(expected) {
                return Err(DatasetError::ChecksumMismatch {
                    path,
                    expected: expected.clone(),
                    found,
                });
            }
        }
        let samples = if entry.file.to_ascii_lowercase().ends_with(".wav") {
            let (samples, fs_wav) = decode_wav(&bytes, &path)?;
            if fs_wav != m.sample_rate_hz {
                return Err(malformed(format!(
                    "{} has sample rate {fs_wav} Hz, manifest says {} Hz",
                    entry.file, m.sample_rate_hz
                )));
            }
            samples
        } else {
            decode_f32(&bytes)
        };
        if samples.len() != m.n_samples {
            return Err(malformed(format!(
                "{} holds {} samples, manifest says {}",
                entry.file,
                samples.len(),
                m.n_samples
            )));
        }
        *slot = Some(ImpulseResponse::new(
            samples,
            m.sample_rate_hz,
            m.sound_speed_mps,
            entry.label.clone(),
        )?);
    }
    let irs = slots.into_iter().map(|s| s.expect("every slot filled")).collect();
    Ok(IrGrid::from_flat(m.zone, irs, m.mics, m.speakers)?.with_corrected_from(m.corrected_from_mps))
}

fn decode_f32(bytes: &[u8]) -> Vec<f64> {
    // A trailing partial value makes the count disagree with n_samples.
    let mut out: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if !bytes.len().is_multiple_of(4) {
        out.push(f64::NAN);
    }
    out
}

fn decode_wav(bytes: &[u8], path: &Path) -> Result<(Vec<f64>, f64), DatasetError> {
    let wav_err = |reason: String| DatasetError::Wav {
        path: path.to_path_buf(),
        reason,
    };
    let reader =
        hound::WavReader::new(std::io::Cursor::new(bytes)).map_err(|e| wav_err(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(format!("expected mono, found {} channels", spec.channels)));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<Vec<_>, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<Vec<_>, _>>(),
        (fmt, bits) => {
            return Err(wav_err(format!("unsupported format {fmt:?} {bits}-bit")));
        }
    }
    .map_err(|e| wav_err(e.to_string()))?;
    Ok((samples, spec.sample_rate as f64))
}

/// Read a mono PCM16 / float32 WAV file as `(samples, sample_rate_hz)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, f64), DatasetError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_wav(&bytes, path)
}
