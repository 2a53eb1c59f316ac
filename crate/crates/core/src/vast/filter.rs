//! VAST filters, the quadratic cost and the on-disk filter format.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::correlation::{correlations, CorrelationSet};
use super::gevd::{gevd, VastBasis};
use super::{DesignConfig, VastError};
use crate::ir::IrGrid;

const MAGIC: &[u8; 8] = b"SZCFILT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rank_v: usize,
    pub mu: f64,
    /// 1-based.
    pub virtual_source_index: usize,
    #[serde(default)]
    pub modeling_delay: usize,
    #[serde(default)]
    pub bright_id: String,
    #[serde(default)]
    pub dark_id: String,
    /// Sound speed the design grids are tagged with.
    #[serde(default)]
    pub sound_speed_mps: Option<f64>,
    /// True when the design grids were speed-corrected.
    #[serde(default)]
    pub corrected: bool,
    #[serde(default)]
    pub corrected_from_mps: Option<f64>,
    #[serde(default)]
    pub regularization: f64,
}

impl Provenance {
    fn bare(cfg: &DesignConfig, rank_v: usize, regularization: f64) -> Self {
        Self {
            rank_v,
            mu: cfg.mu,
            virtual_source_index: cfg.virtual_source_index,
            modeling_delay: cfg.modeling_delay,
            bright_id: String::new(),
            dark_id: String::new(),
            sound_speed_mps: None,
            corrected: false,
            corrected_from_mps: None,
            regularization,
        }
    }

    fn with_grids(mut self, bright: &IrGrid, dark: &IrGrid) -> Self {
        self.bright_id = grid_id(bright);
        self.dark_id = grid_id(dark);
        self.sound_speed_mps = Some(bright.sound_speed_mps());
        self.corrected = bright.is_corrected() || dark.is_corrected();
        self.corrected_from_mps = bright.corrected_from_mps().or(dark.corrected_from_mps());
        self
    }
}

/// Short content hash of a grid's samples and shape.
pub fn grid_id(grid: &IrGrid) -> String {
    let mut h = Sha256::new();
    for n in [grid.num_mics(), grid.num_speakers(), grid.ir_len()] {
        h.update((n as u64).to_le_bytes());
    }
    h.update(grid.sample_rate_hz().to_le_bytes());
    for ir in grid.irs() {
        for x in ir.samples() {
            h.update(x.to_le_bytes());
        }
    }
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlFilterBank {
    w: Vec<f64>,
    l: usize,
    j: usize,
    pub provenance: Provenance,
}

impl ControlFilterBank {
    pub fn new(w: Vec<f64>, l: usize, j: usize, provenance: Provenance) -> Result<Self, VastError> {
        if w.len() != l * j || l == 0 || j == 0 {
            return Err(VastError::DimensionMismatch { expected: l * j, found: w.len() });
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(VastError::Format("non-finite filter coefficient".into()));
        }
        Ok(Self { w, l, j, provenance })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn num_speakers(&self) -> usize {
        self.l
    }

    pub fn filter_len(&self) -> usize {
        self.j
    }

    /// `w_l`, 0-based.
    pub fn filter(&self, l: usize) -> &[f64] {
        &self.w[l * self.j..(l + 1) * self.j]
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { w: self.w.iter().map(|x| alpha * x).collect(), ..self.clone() }
    }
}

fn check_denominator(v: usize, lambda: f64, mu: f64, scale: f64) -> Result<f64, VastError> {
    let den = lambda + mu;
    // also rejects NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(den > 1e-14 * scale) {
        return Err(VastError::SingularDenominator { v, value: den });
    }
    Ok(den)
}

/// Running sum over eigenpairs, snapshotting `w` after each requested rank.
/// `ranks` must be ascending.
fn accumulate(
    corr: &CorrelationSet,
    basis: &VastBasis,
    mu: f64,
    ranks: &[usize],
) -> Result<Vec<DVector<f64>>, VastError> {
    let lj = corr.r_b_vector.len();
    if basis.eigenvectors.nrows() != lj {
        return Err(VastError::DimensionMismatch { expected: lj, found: basis.eigenvectors.nrows() });
    }
    let max_rank = ranks.last().copied().unwrap_or(0);
    if ranks.first() == Some(&0) || max_rank > basis.rank() {
        return Err(VastError::RankTooLarge { rank: max_rank.max(ranks[0]), max: basis.rank() });
    }
    if ranks.windows(2).any(|p| p[0] > p[1]) {
        return Err(VastError::InvalidConfig("ranks must be ascending".into()));
    }
    let scale = basis.eigenvalues.first().map_or(0.0, |l| l.abs()).max(mu).max(f64::MIN_POSITIVE);
    let mut w = DVector::zeros(lj);
    let mut out = Vec::with_capacity(ranks.len());
    let mut next = ranks.iter().peekable();
    for v in 0..max_rank {
        let u = basis.eigenvectors.column(v);
        let den = check_denominator(v + 1, basis.eigenvalues[v], mu, scale)?;
        w.axpy(u.dot(&corr.r_b_vector) / den, &u, 1.0);
        while next.peek() == Some(&&(v + 1)) {
            out.push(w.clone());
            next.next();
        }
    }
    Ok(out)
}

/// `w = Σ_{v≤V} (u_vᵀ r_b) / (λ_v + μ) u_v` with `V = cfg.rank_v`.
pub fn vast_filter(
    corr: &CorrelationSet,
    basis: &VastBasis,
    cfg: &DesignConfig,
) -> Result<ControlFilterBank, VastError> {
    let w = accumulate(corr, basis, cfg.mu, &[cfg.rank_v])?.remove(0);
    ControlFilterBank::new(
        w.data.into(),
        corr.dims.l,
        corr.dims.j,
        Provenance::bare(cfg, cfg.rank_v, basis.regularization_used),
    )
}

/// Filters for several ranks from one pass over the basis. Equal, bit for
/// bit, to calling [`vast_filter`] per rank.
/// `cfg.rank_v` is ignored.
pub fn vast_filter_sweep(
    corr: &CorrelationSet,
    basis: &VastBasis,
    cfg: &DesignConfig,
    ranks: &[usize],
) -> Result<Vec<ControlFilterBank>, VastError> {
    let ws = accumulate(corr, basis, cfg.mu, ranks)?;
    ws.into_iter()
        .zip(ranks)
        .map(|(w, &v)| {
            ControlFilterBank::new(
                w.data.into(),
                corr.dims.l,
                corr.dims.j,
                Provenance::bare(cfg, v, basis.regularization_used),
            )
        })
        .collect()
}

fn quad(corr: &CorrelationSet, w: &[f64], mu: f64) -> Result<(DVector<f64>, f64), VastError> {
    let lj = corr.r_b_vector.len();
    if w.len() != lj {
        return Err(VastError::DimensionMismatch { expected: lj, found: w.len() });
    }
    let w = DVector::from_column_slice(w);
    let zeta = w.dot(&(&corr.r_b_matrix * &w)) - 2.0 * w.dot(&corr.r_b_vector)
        + corr.sigma_d_sq
        + mu * w.dot(&(&corr.r_d_matrix * &w));
    Ok((w, zeta))
}

/// `ζ(w) = wᵀR_bw − 2wᵀr_b + σ_d² + μ wᵀR_dw`.
pub fn cost(corr: &CorrelationSet, w: &[f64], mu: f64) -> Result<f64, VastError> {
    Ok(quad(corr, w, mu)?.1)
}

/// `ζ(w)` with `R_d + δI` in place of `R_d`, the cost the VAST basis solves.
pub fn cost_regularized(
    corr: &CorrelationSet,
    w: &[f64],
    mu: f64,
    delta: f64,
) -> Result<f64, VastError> {
    let (w, zeta) = quad(corr, w, mu)?;
    Ok(zeta + mu * delta * w.norm_squared())
}

/// `σ_d² − Σ_{v≤V} (u_vᵀ r_b)² / (λ_v + μ)`.
pub fn cost_closed_form(
    corr: &CorrelationSet,
    basis: &VastBasis,
    mu: f64,
    v: usize,
) -> Result<f64, VastError> {
    if v == 0 || v > basis.rank() {
        return Err(VastError::RankTooLarge { rank: v, max: basis.rank() });
    }
    let mut zeta = corr.sigma_d_sq;
    for i in 0..v {
        let p = basis.eigenvectors.column(i).dot(&corr.r_b_vector);
        zeta -= p * p / (basis.eigenvalues[i] + mu);
    }
    Ok(zeta)
}

/// Correlations plus the full generalised eigenbasis, shared across ranks.
#[derive(Debug, Clone)]
pub struct Design {
    pub cfg: DesignConfig,
    pub corr: CorrelationSet,
    pub basis: VastBasis,
    provenance: Provenance,
}

impl Design {
    pub fn new(bright: &IrGrid, dark: &IrGrid, cfg: &DesignConfig) -> Result<Self, VastError> {
        let corr = correlations(bright, dark, cfg)?;
        let basis = gevd(&corr, corr.dims.lj())?;
        let provenance = Provenance::bare(cfg, cfg.rank_v, basis.regularization_used)
            .with_grids(bright, dark);
        Ok(Self { cfg: *cfg, corr, basis, provenance })
    }

    pub fn lj(&self) -> usize {
        self.corr.dims.lj()
    }

    pub fn filter(&self, rank: usize) -> Result<ControlFilterBank, VastError> {
        Ok(self.filters(&[rank])?.remove(0))
    }

    /// Ascending ranks.
    pub fn filters(&self, ranks: &[usize]) -> Result<Vec<ControlFilterBank>, VastError> {
        let mut banks = vast_filter_sweep(&self.corr, &self.basis, &self.cfg, ranks)?;
        for b in &mut banks {
            b.provenance = Provenance { rank_v: b.provenance.rank_v, ..self.provenance.clone() };
        }
        Ok(banks)
    }
}

/// `correlations → gevd(rank_v) → vast_filter`.
pub fn design(
    bright: &IrGrid,
    dark: &IrGrid,
    cfg: &DesignConfig,
) -> Result<ControlFilterBank, VastError> {
    let corr = correlations(bright, dark, cfg)?;
    let basis = gevd(&corr, cfg.rank_v)?;
    let mut bank = vast_filter(&corr, &basis, cfg)?;
    bank.provenance = bank.provenance.with_grids(bright, dark);
    Ok(bank)
}

#[derive(Serialize, Deserialize)]
struct Header {
    num_speakers: usize,
    filter_len_j: usize,
    provenance: Provenance,
}

/// `MAGIC`, header length (u64 LE), JSON header, then `LJ` f64 LE coefficients.
pub fn write_filters(path: impl AsRef<Path>, bank: &ControlFilterBank) -> Result<(), VastError> {
    let header = serde_json::to_vec(&Header {
        num_speakers: bank.l,
        filter_len_j: bank.j,
        provenance: bank.provenance.clone(),
    })
    .map_err(|e| VastError::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + header.len() + 8 * bank.w.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for x in &bank.w {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_filters(path: impl AsRef<Path>) -> Result<ControlFilterBank, VastError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 16 || &buf[..8] != MAGIC {
        return Err(VastError::Format("missing magic".into()));
    }
    let hlen = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let body = buf
        .get(16..16usize.saturating_add(hlen))
        .ok_or_else(|| VastError::Format("truncated header".into()))?;
    let header: Header =
        serde_json::from_slice(body).map_err(|e| VastError::Format(e.to_string()))?;
    let blob = &buf[16 + hlen..];
    let lj = header.num_speakers * header.filter_len_j;
    if blob.len() != 8 * lj {
        return Err(VastError::Format(format!(
            "expected {} coefficient bytes, found {}",
            8 * lj,
            blob.len()
        )));
    }
    let w = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ControlFilterBank::new(w, header.num_speakers, header.filter_len_j, header.provenance)
}
