//! Zone reproduction and the evaluation metrics: acoustic contrast (AC) and
//! normalised signal distortion power (nSDP), in the time and frequency domain.
//!
//! Results are reported in dB. A zero numerator is encoded as `-300 dB`, a
//! zero denominator (with a non-zero numerator) as `+300 dB`, so every value
//! stays finite and CSV-friendly.

use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::dsp;
use crate::ir::IrGrid;
use crate::par;
use crate::vast::signal::desired_per_mic;
use crate::vast::{ControlFilterBank, DesignConfig, VastError};

pub const SENTINEL_DB: f64 = 300.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("desired signal has zero energy")]
    ZeroDesired,
    #[error("FFT length {fft_len} shorter than signal length {signal_len}")]
    FftTooShort { fft_len: usize, signal_len: usize },
    #[error(transparent)]
    Vast(#[from] VastError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `10 log10(num / den)` with the sentinel convention.
pub fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        -SENTINEL_DB
    } else if den <= 0.0 {
        SENTINEL_DB
    } else {
        dsp::db10(num / den).clamp(-SENTINEL_DB, SENTINEL_DB)
    }
}

/// `y_k = Σ_l h_{k,l} * w_l`, optionally convolved with `excitation`.
pub fn reproduce_zone(
    grid: &IrGrid,
    bank: &ControlFilterBank,
    excitation: Option<&[f64]>,
) -> Result<Vec<Vec<f64>>, MetricsError> {
    if grid.num_speakers() != bank.num_speakers() {
        return Err(MetricsError::DimensionMismatch(format!(
            "grid has {} loudspeakers, filters have {}",
            grid.num_speakers(),
            bank.num_speakers()
        )));
    }
    if excitation.is_some_and(|e| e.is_empty()) {
        return Err(MetricsError::DimensionMismatch("empty excitation".into()));
    }
    let len = grid.ir_len() + bank.filter_len() - 1;
    Ok(par::map_range(grid.num_mics(), |k| {
        let mut y = vec![0.0; len];
        for l in 0..grid.num_speakers() {
            dsp::convolve_add(&mut y, grid.ir(k, l).samples(), bank.filter(l));
        }
        match excitation {
            Some(e) => dsp::convolve(&y, e),
            None => y,
        }
    }))
}

fn total_energy(x: &[Vec<f64>]) -> f64 {
    x.iter().map(|s| dsp::energy(s)).sum()
}

fn check_pairs(y: &[Vec<f64>], d: &[Vec<f64>]) -> Result<(), MetricsError> {
    if y.len() != d.len() || y.iter().zip(d).any(|(a, b)| a.len() != b.len()) {
        return Err(MetricsError::DimensionMismatch(
            "bright-zone and desired signals differ in shape".into(),
        ));
    }
    Ok(())
}

/// `(TD AC, TD nSDP)` in dB.
pub fn td_metrics(
    y_bz: &[Vec<f64>],
    y_dz: &[Vec<f64>],
    d: &[Vec<f64>],
) -> Result<(f64, f64), MetricsError> {
    check_pairs(y_bz, d)?;
    if y_bz.is_empty() || y_dz.is_empty() {
        return Err(MetricsError::DimensionMismatch("empty zone".into()));
    }
    let (k_b, k_d) = (y_bz.len() as f64, y_dz.len() as f64);
    let ac = ratio_db(k_d * total_energy(y_bz), k_b * total_energy(y_dz));
    let d_energy = total_energy(d);
    if d_energy == 0.0 {
        return Err(MetricsError::ZeroDesired);
    }
    let err: f64 = y_bz
        .iter()
        .zip(d)
        .flat_map(|(y, d)| y.iter().zip(d).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    Ok((ac, ratio_db(err, d_energy)))
}

/// Smallest power of two `>= n`.
pub fn default_fft_len(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

fn spectra(x: &[Vec<f64>], fft_len: usize) -> Vec<Vec<Complex<f64>>> {
    let fft = FftPlanner::new().plan_fft_forward(fft_len);
    par::map_slice(x, |s| {
        let mut buf: Vec<Complex<f64>> = s.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(fft_len, Complex::new(0.0, 0.0));
        fft.process(&mut buf);
        buf.truncate(fft_len / 2 + 1);
        buf
    })
}

fn bin_power(spec: &[Vec<Complex<f64>>], bins: usize) -> Vec<f64> {
    let mut p = vec![0.0; bins];
    for s in spec {
        for (acc, z) in p.iter_mut().zip(s) {
            *acc += z.norm_sqr();
        }
    }
    p
}

/// Per-bin `(FD AC, FD nSDP)` in dB over bins `0..=fft_len/2`.
pub fn fd_metrics(
    y_bz: &[Vec<f64>],
    y_dz: &[Vec<f64>],
    d: &[Vec<f64>],
    fft_len: usize,
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    check_pairs(y_bz, d)?;
    if y_bz.is_empty() || y_dz.is_empty() {
        return Err(MetricsError::DimensionMismatch("empty zone".into()));
    }
    let signal_len = y_bz.iter().chain(y_dz).map(Vec::len).max().unwrap_or(0);
    if fft_len < signal_len || fft_len == 0 {
        return Err(MetricsError::FftTooShort { fft_len, signal_len });
    }
    let bins = fft_len / 2 + 1;
    let (k_b, k_d) = (y_bz.len() as f64, y_dz.len() as f64);
    let yb = spectra(y_bz, fft_len);
    let yd = spectra(y_dz, fft_len);
    let ds = spectra(d, fft_len);

    let pb = bin_power(&yb, bins);
    let pd = bin_power(&yd, bins);
    let pdes = bin_power(&ds, bins);
    let mut perr = vec![0.0; bins];
    for (y, dd) in yb.iter().zip(&ds) {
        for ((acc, a), b) in perr.iter_mut().zip(y).zip(dd) {
            *acc += (a - b).norm_sqr();
        }
    }
    let ac = pb.iter().zip(&pd).map(|(&b, &d)| ratio_db(k_d * b, k_b * d)).collect();
    let nsdp = perr.iter().zip(&pdes).map(|(&e, &d)| ratio_db(e, d)).collect();
    Ok((ac, nsdp))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub td_ac_db: f64,
    pub td_nsdp_db: f64,
    pub fd_ac_db: Vec<f64>,
    pub fd_nsdp_db: Vec<f64>,
    pub fft_len: usize,
    pub freqs_hz: Vec<f64>,
}

impl EvaluationReport {
    /// `metric,domain,freq_hz,value_db`; time-domain rows leave `freq_hz` empty.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "metric,domain,freq_hz,value_db")?;
        writeln!(out, "ac,td,,{:.9}", self.td_ac_db)?;
        writeln!(out, "nsdp,td,,{:.9}", self.td_nsdp_db)?;
        for (metric, values) in [("ac", &self.fd_ac_db), ("nsdp", &self.fd_nsdp_db)] {
            for (f, v) in self.freqs_hz.iter().zip(values) {
                writeln!(out, "{metric},fd,{f:.6},{v:.9}")?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// Bin centre frequencies `f_s · i / fft_len` for `i` in `0..=fft_len/2`.
pub fn bin_frequencies(fs: f64, fft_len: usize) -> Vec<f64> {
    (0..=fft_len / 2).map(|i| fs * i as f64 / fft_len as f64).collect()
}

/// Reproduces both zones with `bank` and scores them against the desired
/// signal built from `bright` (virtual source and delay from the filter's
/// provenance). The excitation, when given, is applied to `y` and `d` alike.
pub fn evaluate(
    bright: &IrGrid,
    dark: &IrGrid,
    bank: &ControlFilterBank,
    excitation: Option<&[f64]>,
    fft_len: Option<usize>,
) -> Result<EvaluationReport, MetricsError> {
    if bright.ir_len() != dark.ir_len() || bright.sample_rate_hz() != dark.sample_rate_hz() {
        return Err(MetricsError::DimensionMismatch(
            "bright and dark grids differ in IR length or sample rate".into(),
        ));
    }
    let p = &bank.provenance;
    let mut cfg = DesignConfig::new(bank.filter_len(), p.mu, 1, p.virtual_source_index);
    cfg.modeling_delay = p.modeling_delay;
    let mut d = desired_per_mic(bright, &cfg)?;
    if let Some(e) = excitation {
        d = d.iter().map(|x| dsp::convolve(x, e)).collect();
    }
    let y_bz = reproduce_zone(bright, bank, excitation)?;
    let y_dz = reproduce_zone(dark, bank, excitation)?;
    let (td_ac_db, td_nsdp_db) = td_metrics(&y_bz, &y_dz, &d)?;
    let fft_len = fft_len.unwrap_or_else(|| default_fft_len(y_bz[0].len()));
    let (fd_ac_db, fd_nsdp_db) = fd_metrics(&y_bz, &y_dz, &d, fft_len)?;
    Ok(EvaluationReport {
        td_ac_db,
        td_nsdp_db,
        fd_ac_db,
        fd_nsdp_db,
        fft_len,
        freqs_hz: bin_frequencies(bright.sample_rate_hz(), fft_len),
    })
}
