//! Sound-speed correction of impulse responses by sinc interpolation,
//! time-axis compression/expansion and resampling (SICER).
//!
//! For a scaling factor `beta = c_old / c_new` an IR `h` of length `N` maps
//! to `h'` of length `M` with
//!
//! ```text
//! h'(m) = (1/beta) * sum_n h(n) * sinc(m/beta - n),   m = 0..M-1
//! ```
//!
//! i.e. `h' = (1/beta) S^T h` where column `m` of `S` is
//! [`sinc_kernel_row`]`(m, beta, N)`. When `beta < 1` the IR is compressed and
//! its spectrum stretched, so content near Nyquist must be removed first
//! ([`antialias_prefilter`]).

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atmo::{scaling_factor, AtmoError};
use crate::dsp;
use crate::ir::{GridError, ImpulseResponse, IrError, IrGrid};

/// Kaiser design attenuation for the anti-alias prefilter, dB. The
/// guaranteed stopband floor is 60 dB; the design target carries margin.
const PREFILTER_ATTEN_DB: f64 = 70.0;
/// Auto cutoff as a fraction of `beta * f_nyquist`.
const AUTO_CUTOFF: f64 = 0.95;
/// Discarded-tail energy above this fraction of the total triggers a warning.
const TAIL_WARN_FRACTION: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SicerError {
    #[error("beta must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("output length must be at least 1")]
    InvalidOutputLen,
    #[error("anti-alias cutoff fraction must lie in (0, 1], got {0}")]
    InvalidCutoff(f64),
    #[error("window half-width must be at least 1")]
    InvalidWindow,
    #[error(transparent)]
    Speed(#[from] AtmoError),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("IR (mic {mic}, speaker {speaker}): {source}")]
    Element {
        mic: usize,
        speaker: usize,
        #[source]
        source: Box<SicerError>,
    },
}

/// Anti-alias prefilter policy. Serialised as `"off"`, `"auto"` or the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Antialias {
    Off,
    /// Lowpass at `0.95 * beta * f_nyquist`, only when `beta < 1`.
    #[default]
    Auto,
    /// Always lowpass at this fraction of Nyquist.
    Explicit(f64),
}

impl fmt::Display for Antialias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Antialias::Off => f.write_str("off"),
            Antialias::Auto => f.write_str("auto"),
            Antialias::Explicit(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Antialias {
    type Err = SicerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(Antialias::Off),
            "auto" => Ok(Antialias::Auto),
            other => {
                let x: f64 = other.parse().map_err(|_| SicerError::InvalidCutoff(f64::NAN))?;
                let mode = Antialias::Explicit(x);
                mode.validate()?;
                Ok(mode)
            }
        }
    }
}

impl TryFrom<String> for Antialias {
    type Error = SicerError;
    fn try_from(s: String) -> Result<Self, SicerError> {
        s.parse()
    }
}

impl From<Antialias> for String {
    fn from(a: Antialias) -> String {
        a.to_string()
    }
}

impl Antialias {
    fn validate(&self) -> Result<(), SicerError> {
        match *self {
            Antialias::Explicit(x) if !(x > 0.0 && x <= 1.0) => Err(SicerError::InvalidCutoff(x)),
            _ => Ok(()),
        }
    }
}

/// How the sinc sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SincKernel {
    /// Full `O(N*M)` evaluation of the model.
    #[default]
    Dense,
    /// Kaiser-windowed sinc truncated to `half_width` input samples on each
    /// side of the evaluation point.
    Windowed { half_width: usize, kaiser_beta: f64 },
}

impl SincKernel {
    pub const DEFAULT_HALF_WIDTH: usize = 64;
    pub const DEFAULT_KAISER_BETA: f64 = 9.0;

    pub fn windowed() -> Self {
        SincKernel::Windowed {
            half_width: Self::DEFAULT_HALF_WIDTH,
            kaiser_beta: Self::DEFAULT_KAISER_BETA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SicerSpec {
    pub beta: f64,
    pub output_len: usize,
    pub antialias: Antialias,
    pub kernel: SincKernel,
}

impl SicerSpec {
    pub fn new(beta: f64, output_len: usize) -> Self {
        Self {
            beta,
            output_len,
            antialias: Antialias::Auto,
            kernel: SincKernel::Dense,
        }
    }

    pub fn antialias(mut self, mode: Antialias) -> Self {
        self.antialias = mode;
        self
    }

    pub fn kernel(mut self, kernel: SincKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn validate(&self) -> Result<(), SicerError> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(SicerError::InvalidBeta(self.beta));
        }
        if self.output_len == 0 {
            return Err(SicerError::InvalidOutputLen);
        }
        if let SincKernel::Windowed { half_width: 0, .. } = self.kernel {
            return Err(SicerError::InvalidWindow);
        }
        self.antialias.validate()
    }
}

/// Fill `row[n] = sinc(x - n)`.
///
/// Uses `sin(pi (x - n)) = (-1)^(r - n) sin(pi (x - r))` with `r = round(x)`,
/// so only one sine is evaluated per row and the argument stays small.
fn fill_sinc_row(x: f64, row: &mut [f64]) {
    let r = x.round();
    let frac = x - r;
    if frac == 0.0 {
        row.iter_mut().for_each(|v| *v = 0.0);
        if r >= 0.0 && (r as usize) < row.len() {
            row[r as usize] = 1.0;
        }
        return;
    }
    let s = (std::f64::consts::PI * frac).sin();
    let r_odd = (r as i64).rem_euclid(2) == 1;
    for (n, v) in row.iter_mut().enumerate() {
        let d = x - n as f64;
        *v = if d.abs() < 1e-8 {
            1.0
        } else {
            let sign = if r_odd ^ (n % 2 == 1) { -1.0 } else { 1.0 };
            sign * s / (std::f64::consts::PI * d)
        };
    }
}

/// Row `s(m)` of the resampling operator: `sinc(m/beta - n)` for `n = 0..n_len`.
pub fn sinc_kernel_row(m: usize, beta: f64, n_len: usize) -> Vec<f64> {
    assert!(beta > 0.0 && n_len >= 1, "sinc_kernel_row: beta > 0, n_len >= 1");
    let mut row = vec![0.0; n_len];
    fill_sinc_row(m as f64 / beta, &mut row);
    row
}

/// The `N x M` resampling matrix `S = [s(0), ..., s(M-1)]`.
pub fn resampling_matrix(beta: f64, n_len: usize, m_len: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n_len, m_len);
    for m in 0..m_len {
        s.set_column(m, &nalgebra::DVector::from_vec(sinc_kernel_row(m, beta, n_len)));
    }
    s
}

fn dense_sample(h: &[f64], x: f64, row: &mut [f64]) -> f64 {
    fill_sinc_row(x, row);
    row.iter().zip(h).map(|(s, v)| s * v).sum()
}

fn windowed_sample(h: &[f64], x: f64, half_width: usize, kaiser_beta: f64) -> f64 {
    let w = half_width as f64;
    let lo = (x - w).ceil().max(0.0) as usize;
    let hi_f = (x + w).floor();
    if hi_f < 0.0 || lo >= h.len() {
        return 0.0;
    }
    let hi = (hi_f as usize).min(h.len() - 1);
    let i0 = dsp::bessel_i0(kaiser_beta);
    (lo..=hi)
        .map(|n| {
            let d = x - n as f64;
            let r = d / w;
            let win = dsp::bessel_i0(kaiser_beta * (1.0 - r * r).max(0.0).sqrt()) / i0;
            h[n] * dsp::sinc(d) * win
        })
        .sum()
}

/// Lowpass `h` ahead of compression. Pass-through for `beta >= 1`.
pub fn antialias_prefilter(h: &ImpulseResponse, beta: f64) -> ImpulseResponse {
    if beta >= 1.0 {
        return h.clone();
    }
    lowpass(h, AUTO_CUTOFF * beta, (1.0 - AUTO_CUTOFF) * beta)
}

fn lowpass(h: &ImpulseResponse, cutoff: f64, half_transition: f64) -> ImpulseResponse {
    let taps = dsp::kaiser_lowpass(cutoff, half_transition, PREFILTER_ATTEN_DB);
    h.with_samples(dsp::filter_zero_phase(h.samples(), &taps))
        .expect("filtering finite samples stays finite")
}

fn prefilter(h: &ImpulseResponse, spec: &SicerSpec) -> ImpulseResponse {
    match spec.antialias {
        Antialias::Off => h.clone(),
        Antialias::Auto => antialias_prefilter(h, spec.beta),
        Antialias::Explicit(f) => lowpass(h, f, f * (1.0 - AUTO_CUTOFF) / AUTO_CUTOFF),
    }
}

/// Result of a correction together with what was lost to truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct SicerOutcome {
    pub ir: ImpulseResponse,
    /// Energy of samples beyond `output_len` that the stretched IR would
    /// still occupy, as a fraction of the untruncated total.
    pub discarded_tail_fraction: f64,
    /// Output energy over input energy (measured, not enforced).
    pub energy_ratio: f64,
}

/// Apply SICER to a single IR.
pub fn sicer_apply(h: &ImpulseResponse, spec: &SicerSpec) -> Result<ImpulseResponse, SicerError> {
    Ok(sicer_apply_detailed(h, spec)?.ir)
}

/// [`sicer_apply`], also reporting truncation loss and energy ratio.
pub fn sicer_apply_detailed(
    h: &ImpulseResponse,
    spec: &SicerSpec,
) -> Result<SicerOutcome, SicerError> {
    spec.validate()?;
    let c_new = h.sound_speed_mps() / spec.beta;
    correct(h, spec, c_new)
}

fn correct(h: &ImpulseResponse, spec: &SicerSpec, c_new: f64) -> Result<SicerOutcome, SicerError> {
    let filtered = prefilter(h, spec);
    let src = filtered.samples();
    let n = src.len();
    let beta = spec.beta;
    let inv_beta = 1.0 / beta;

    // The stretched IR occupies roughly beta*(N-1) samples; evaluate any
    // part of that beyond M to quantify the truncation.
    let extent = ((beta * (n as f64 - 1.0)).ceil() as usize + 1).max(spec.output_len);
    let sample = |m: usize, row: &mut Vec<f64>| -> f64 {
        let x = m as f64 * inv_beta;
        inv_beta
            * match spec.kernel {
                SincKernel::Dense => dense_sample(src, x, row),
                SincKernel::Windowed {
                    half_width,
                    kaiser_beta,
                } => windowed_sample(src, x, half_width, kaiser_beta),
            }
    };

    let mut row = vec![0.0; n];
    let out: Vec<f64> = (0..spec.output_len).map(|m| sample(m, &mut row)).collect();
    let tail: f64 = (spec.output_len..extent)
        .map(|m| sample(m, &mut row).powi(2))
        .sum();

    let kept = dsp::energy(&out);
    let discarded_tail_fraction = if kept + tail > 0.0 { tail / (kept + tail) } else { 0.0 };
    if discarded_tail_fraction > TAIL_WARN_FRACTION {
        warn!(
            "SICER truncation discards {:.1} dB of IR energy ({})",
            dsp::db10(discarded_tail_fraction),
            h.label()
        );
    }
    let input_energy = h.energy();
    let energy_ratio = if input_energy > 0.0 { kept / input_energy } else { 1.0 };
    debug!("SICER beta={beta:.6}: output/input energy ratio {energy_ratio:.6}");

    let ir = ImpulseResponse::new(out, h.sample_rate_hz(), c_new, h.label().to_string())?;
    Ok(SicerOutcome {
        ir,
        discarded_tail_fraction,
        energy_ratio,
    })
}

/// Correct every IR of `grid` to sound speed `c_new`, keeping the IR length.
pub fn sicer_grid(grid: &IrGrid, c_new: f64, antialias: Antialias) -> Result<IrGrid, SicerError> {
    sicer_grid_with(grid, c_new, antialias, SincKernel::Dense, None)
}

/// [`sicer_grid`] with an explicit kernel and optional output length.
pub fn sicer_grid_with(
    grid: &IrGrid,
    c_new: f64,
    antialias: Antialias,
    kernel: SincKernel,
    output_len: Option<usize>,
) -> Result<IrGrid, SicerError> {
    let beta = scaling_factor(grid.sound_speed_mps(), c_new)?;
    let spec = SicerSpec {
        beta,
        output_len: output_len.unwrap_or(grid.ir_len()),
        antialias,
        kernel,
    };
    spec.validate()?;
    let corrected = grid.try_map(|mic, speaker, ir| {
        correct(ir, &spec, c_new)
            .map(|o| o.ir)
            .map_err(|e| SicerError::Element {
                mic,
                speaker,
                source: Box::new(e),
            })
    })?;
    let origin = grid.corrected_from_mps().unwrap_or(grid.sound_speed_mps());
    Ok(corrected.with_corrected_from(Some(origin)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Zone;
    use std::f64::consts::PI;

    fn ir(samples: Vec<f64>) -> ImpulseResponse {
        ImpulseResponse::new(samples, 8000.0, 343.0, "t").unwrap()
    }

    fn impulse(n: usize, at: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        v
    }

    #[test]
    fn kernel_row_examples() {
        assert_eq!(sinc_kernel_row(3, 1.0, 5), vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(sinc_kernel_row(0, 2.0, 3), vec![1.0, 0.0, 0.0]);
        let r = sinc_kernel_row(1, 2.0, 2);
        assert!((r[0] - 2.0 / PI).abs() < 1e-15);
        assert!((r[1] - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn kernel_row_matches_direct_sinc() {
        for &beta in &[0.37, 0.97, 1.03, 2.5] {
            for m in [0usize, 1, 7, 100, 999] {
                let row = sinc_kernel_row(m, beta, 300);
                for (n, v) in row.iter().enumerate() {
                    let d = dsp::sinc(m as f64 / beta - n as f64);
                    assert!((v - d).abs() < 1e-12, "beta={beta} m={m} n={n}");
                }
            }
        }
    }

    #[test]
    fn unit_beta_is_identity() {
        let h: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let out = sicer_apply(&ir(h.clone()), &SicerSpec::new(1.0, 50).antialias(Antialias::Off))
            .unwrap();
        assert_eq!(out.samples(), h.as_slice());
    }

    #[test]
    fn stretched_impulse_closed_form() {
        let spec = SicerSpec::new(2.0, 40).antialias(Antialias::Off);
        let out = sicer_apply(&ir(impulse(16, 10)), &spec).unwrap();
        assert_eq!(out.len(), 40);
        assert!((out.samples()[20] - 0.5).abs() < 1e-15);
        for m in (0..40).step_by(2).filter(|&m| m != 20) {
            assert_eq!(out.samples()[m], 0.0, "m={m}");
        }
        for m in (1..40).step_by(2) {
            let expect = 0.5 * dsp::sinc(m as f64 / 2.0 - 10.0);
            assert!((out.samples()[m] - expect).abs() < 1e-15);
        }
        assert!((out.sound_speed_mps() - 171.5).abs() < 1e-12);
    }

    #[test]
    fn prefilter_passes_through_when_stretching() {
        let h = ir((0..64).map(|i| ((i * 37 % 11) as f64) - 5.0).collect());
        assert_eq!(antialias_prefilter(&h, 1.03), h);
        assert_eq!(antialias_prefilter(&h, 1.0), h);
    }

    #[test]
    fn antialias_parsing() {
        assert_eq!("auto".parse::<Antialias>().unwrap(), Antialias::Auto);
        assert_eq!("off".parse::<Antialias>().unwrap(), Antialias::Off);
        assert_eq!("0.8".parse::<Antialias>().unwrap(), Antialias::Explicit(0.8));
        assert!("1.5".parse::<Antialias>().is_err());
        assert!("0".parse::<Antialias>().is_err());
        assert!("fast".parse::<Antialias>().is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let h = ir(vec![1.0; 4]);
        assert!(matches!(
            sicer_apply(&h, &SicerSpec::new(0.0, 4)),
            Err(SicerError::InvalidBeta(_))
        ));
        assert!(matches!(
            sicer_apply(&h, &SicerSpec::new(1.0, 0)),
            Err(SicerError::InvalidOutputLen)
        ));
    }

    #[test]
    fn truncation_is_reported() {
        // Energy concentrated near the end gets pushed past M when stretched.
        let h = ir(impulse(100, 95));
        let o = sicer_apply_detailed(&h, &SicerSpec::new(1.2, 100).antialias(Antialias::Off))
            .unwrap();
        assert!(o.discarded_tail_fraction > 0.5);
        let early = ir(impulse(100, 10));
        let o = sicer_apply_detailed(&early, &SicerSpec::new(1.03, 100).antialias(Antialias::Off))
            .unwrap();
        assert!(o.discarded_tail_fraction < 1e-3);
    }

    #[test]
    fn grid_correction_is_elementwise() {
        let mk = |seed: usize| ir((0..32).map(|i| ((i + seed) as f64 * 0.91).cos()).collect());
        let g = IrGrid::new(
            Zone::Bright,
            vec![vec![mk(0), mk(1)], vec![mk(2), mk(3)]],
            vec![[0.0; 3], [1.0; 3]],
            vec![[2.0; 3], [3.0; 3]],
        )
        .unwrap();
        let out = sicer_grid(&g, 333.0, Antialias::Auto).unwrap();
        assert_eq!(out.sound_speed_mps(), 333.0);
        let spec = SicerSpec::new(343.0 / 333.0, 32);
        for k in 0..2 {
            for l in 0..2 {
                let single = sicer_apply(g.ir(k, l), &spec).unwrap();
                assert_eq!(out.ir(k, l).samples(), single.samples());
            }
        }
        assert_eq!(out.corrected_from_mps(), Some(343.0));
        let same = sicer_grid(&g, 343.0, Antialias::Off).unwrap();
        assert_eq!(same.irs(), g.irs());
    }
}
