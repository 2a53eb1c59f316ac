//! Impulse responses and per-zone IR grids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cartesian position in metres.
pub type Point3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrError {
    #[error("impulse response has no samples")]
    Empty,
    #[error("impulse response sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),
    #[error("sound speed must be positive and finite, got {0}")]
    BadSoundSpeed(f64),
}

/// A sampled impulse response valid at one sound speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    sound_speed_mps: f64,
    label: String,
}

impl ImpulseResponse {
    pub fn new(
        samples: Vec<f64>,
        sample_rate_hz: f64,
        sound_speed_mps: f64,
        label: impl Into<String>,
    ) -> Result<Self, IrError> {
        if samples.is_empty() {
            return Err(IrError::Empty);
        }
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(IrError::NonFinite { index });
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(IrError::BadSampleRate(sample_rate_hz));
        }
        if !(sound_speed_mps.is_finite() && sound_speed_mps > 0.0) {
            return Err(IrError::BadSoundSpeed(sound_speed_mps));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            sound_speed_mps,
            label: label.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn sound_speed_mps(&self) -> f64 {
        self.sound_speed_mps
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    /// Same metadata, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self, IrError> {
        Self::new(samples, self.sample_rate_hz, self.sound_speed_mps, self.label.clone())
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Bright,
    Dark,
}

impl std::fmt::Display for Zone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Zone::Bright => f.write_str("bright"),
            Zone::Dark => f.write_str("dark"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid is empty (K={mics}, L={speakers})")]
    EmptyGrid { mics: usize, speakers: usize },
    #[error("IR ({mic},{speaker}) has sample rate {found} Hz, expected {expected} Hz")]
    MixedSampleRate {
        mic: usize,
        speaker: usize,
        expected: f64,
        found: f64,
    },
    #[error("IR ({mic},{speaker}) has length {found}, expected {expected}")]
    MixedLength {
        mic: usize,
        speaker: usize,
        expected: usize,
        found: usize,
    },
    #[error("IR ({mic},{speaker}) has sound speed {found} m/s, expected {expected} m/s")]
    MixedSoundSpeed {
        mic: usize,
        speaker: usize,
        expected: f64,
        found: f64,
    },
    #[error("{what}: expected {expected} entries, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// K×L impulse responses for one zone (k = microphone, l = loudspeaker).
#[derive(Debug, Clone, PartialEq)]
pub struct IrGrid {
    zone: Zone,
    /// Row-major, index `k * L + l`.
    irs: Vec<ImpulseResponse>,
    mic_positions: Vec<Point3>,
    speaker_positions: Vec<Point3>,
    /// Sound speed of the measured grid this one was SICER-corrected from.
    corrected_from_mps: Option<f64>,
}

impl IrGrid {
    /// Build a grid from `irs[k][l]`, checking every grid invariant.
    pub fn new(
        zone: Zone,
        irs: Vec<Vec<ImpulseResponse>>,
        mic_positions: Vec<Point3>,
        speaker_positions: Vec<Point3>,
    ) -> Result<Self, GridError> {
        let k = irs.len();
        let l = irs.first().map_or(0, Vec::len);
        if k == 0 || l == 0 {
            return Err(GridError::EmptyGrid { mics: k, speakers: l });
        }
        if let Some(row) = irs.iter().find(|row| row.len() != l) {
            return Err(GridError::ShapeMismatch {
                what: "loudspeakers per microphone row",
                expected: l,
                found: row.len(),
            });
        }
        let grid = Self {
            zone,
            irs: irs.into_iter().flatten().collect(),
            mic_positions,
            speaker_positions,
            corrected_from_mps: None,
        };
        validate_grid(&grid)?;
        Ok(grid)
    }

    /// Build from a row-major flat IR list of length `mics.len() * speakers.len()`.
    pub fn from_flat(
        zone: Zone,
        irs: Vec<ImpulseResponse>,
        mic_positions: Vec<Point3>,
        speaker_positions: Vec<Point3>,
    ) -> Result<Self, GridError> {
        let grid = Self {
            zone,
            irs,
            mic_positions,
            speaker_positions,
            corrected_from_mps: None,
        };
        validate_grid(&grid)?;
        Ok(grid)
    }

    pub fn zone(&self) -> Zone {
        self.zone
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn num_speakers(&self) -> usize {
        self.speaker_positions.len()
    }

    pub fn ir(&self, mic: usize, speaker: usize) -> &ImpulseResponse {
        &self.irs[mic * self.num_speakers() + speaker]
    }

    /// All IRs, row-major by microphone.
    pub fn irs(&self) -> &[ImpulseResponse] {
        &self.irs
    }

    pub fn mic_positions(&self) -> &[Point3] {
        &self.mic_positions
    }

    pub fn speaker_positions(&self) -> &[Point3] {
        &self.speaker_positions
    }

    pub fn ir_len(&self) -> usize {
        self.irs[0].len()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.irs[0].sample_rate_hz()
    }

    pub fn sound_speed_mps(&self) -> f64 {
        self.irs[0].sound_speed_mps()
    }

    pub fn corrected_from_mps(&self) -> Option<f64> {
        self.corrected_from_mps
    }

    pub fn is_corrected(&self) -> bool {
        self.corrected_from_mps.is_some()
    }

    pub fn with_corrected_from(mut self, c_old: Option<f64>) -> Self {
        self.corrected_from_mps = c_old;
        self
    }

    /// Replace every IR, keeping geometry. `f` receives `(k, l, ir)`.
    pub fn try_map<E, F>(&self, f: F) -> Result<Self, E>
    where
        E: Send,
        E: From<GridError>,
        F: Fn(usize, usize, &ImpulseResponse) -> Result<ImpulseResponse, E> + Sync + Send,
    {
        let l = self.num_speakers();
        let mapped = crate::par::map_range(self.irs.len(), |i| f(i / l, i % l, &self.irs[i]));
        let irs = mapped.into_iter().collect::<Result<Vec<_>, E>>()?;
        Ok(Self::from_flat(
            self.zone,
            irs,
            self.mic_positions.clone(),
            self.speaker_positions.clone(),
        )?)
    }
}

/// Check every [`IrGrid`] invariant.
pub fn validate_grid(grid: &IrGrid) -> Result<(), GridError> {
    let k = grid.mic_positions.len();
    let l = grid.speaker_positions.len();
    if k == 0 || l == 0 || grid.irs.is_empty() {
        return Err(GridError::EmptyGrid { mics: k, speakers: l });
    }
    if grid.irs.len() != k * l {
        return Err(GridError::ShapeMismatch {
            what: "impulse responses (K*L)",
            expected: k * l,
            found: grid.irs.len(),
        });
    }
    let first = &grid.irs[0];
    for (i, ir) in grid.irs.iter().enumerate() {
        let (mic, speaker) = (i / l, i % l);
        if ir.len() != first.len() {
            return Err(GridError::MixedLength {
                mic,
                speaker,
                expected: first.len(),
                found: ir.len(),
            });
        }
        if ir.sample_rate_hz() != first.sample_rate_hz() {
            return Err(GridError::MixedSampleRate {
                mic,
                speaker,
                expected: first.sample_rate_hz(),
                found: ir.sample_rate_hz(),
            });
        }
        if ir.sound_speed_mps() != first.sound_speed_mps() {
            return Err(GridError::MixedSoundSpeed {
                mic,
                speaker,
                expected: first.sound_speed_mps(),
                found: ir.sound_speed_mps(),
            });
        }
    }
    Ok(())
}
