//! Correlation quantities of the quadratic design cost.
//!
//! `R_b = H_bᵀH_b`, `R_d = H_dᵀH_d`, `r_b = H_bᵀd`, `sigma_d² = ‖d‖²`.
//!
//! The stacked matrices are never formed. Block `(l, l')` of `HᵀH` is
//! Toeplitz, `[HᵀH]_{(l,i),(l',j)} = Σ_k c_{k,l,l'}(i - j)` with the
//! cross-correlation `c(τ) = Σ_m h_{k,l}(m) h_{k,l'}(m + τ)`, so each block is
//! built from `2J - 1` lags.

use nalgebra::{DMatrix, DVector};

use super::signal::{desired_per_mic, stack_zone_matrix};
use super::{DesignConfig, VastError};
use crate::ir::IrGrid;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub l: usize,
    pub j: usize,
    pub k_b: usize,
    pub k_d: usize,
    pub n: usize,
}

impl Dims {
    pub fn lj(&self) -> usize {
        self.l * self.j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSet {
    pub r_b_matrix: DMatrix<f64>,
    pub r_d_matrix: DMatrix<f64>,
    pub r_b_vector: DVector<f64>,
    pub sigma_d_sq: f64,
    pub dims: Dims,
}

/// `Σ_m a(m) b(m + τ)` for `τ` in `-(J-1)..=J-1`, indexed `τ + J - 1`.
fn cross_correlation(a: &[f64], b: &[f64], j: usize, out: &mut [f64]) {
    let n_a = a.len() as isize;
    let n_b = b.len() as isize;
    for (slot, tau) in out.iter_mut().zip(-(j as isize - 1)..=(j as isize - 1)) {
        let lo = 0.max(-tau);
        let hi = n_a.min(n_b - tau);
        let mut acc = 0.0;
        for m in lo..hi {
            acc += a[m as usize] * b[(m + tau) as usize];
        }
        *slot += acc;
    }
}

/// `HᵀH` for one zone, assembled blockwise with a fixed reduction order.
pub fn gram_matrix(grid: &IrGrid, j: usize) -> DMatrix<f64> {
    let l_count = grid.num_speakers();
    let pairs: Vec<(usize, usize)> = (0..l_count)
        .flat_map(|a| (a..l_count).map(move |b| (a, b)))
        .collect();
    let lags = par::map_slice(&pairs, |&(a, b)| {
        let mut c = vec![0.0; 2 * j - 1];
        for k in 0..grid.num_mics() {
            cross_correlation(grid.ir(k, a).samples(), grid.ir(k, b).samples(), j, &mut c);
        }
        c
    });
    let lj = l_count * j;
    let mut r = DMatrix::zeros(lj, lj);
    for (&(a, b), c) in pairs.iter().zip(&lags) {
        for i in 0..j {
            for jj in 0..j {
                let v = c[i + j - 1 - jj];
                r[(a * j + i, b * j + jj)] = v;
                r[(b * j + jj, a * j + i)] = v;
            }
        }
    }
    symmetrize(&mut r);
    r
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn check_compatible(bright: &IrGrid, dark: &IrGrid) -> Result<(), VastError> {
    let mismatch = |what: &str, b: String, d: String| {
        Err(VastError::GridMismatch(format!("{what}: bright {b}, dark {d}")))
    };
    if bright.sample_rate_hz() != dark.sample_rate_hz() {
        return mismatch(
            "sample rate",
            bright.sample_rate_hz().to_string(),
            dark.sample_rate_hz().to_string(),
        );
    }
    if bright.ir_len() != dark.ir_len() {
        return mismatch("IR length", bright.ir_len().to_string(), dark.ir_len().to_string());
    }
    if bright.num_speakers() != dark.num_speakers() {
        return mismatch(
            "loudspeaker count",
            bright.num_speakers().to_string(),
            dark.num_speakers().to_string(),
        );
    }
    Ok(())
}

/// Blockwise assembly of every correlation quantity.
pub fn correlations(
    bright: &IrGrid,
    dark: &IrGrid,
    cfg: &DesignConfig,
) -> Result<CorrelationSet, VastError> {
    check_compatible(bright, dark)?;
    cfg.validate(bright.num_speakers())?;
    let j = cfg.filter_len_j;
    let l_count = bright.num_speakers();
    let d = desired_per_mic(bright, cfg)?;

    let r_b_vector = {
        let blocks = par::map_range(l_count, |l| {
            let mut block = vec![0.0; 2 * j - 1];
            for (k, dk) in d.iter().enumerate() {
                cross_correlation(bright.ir(k, l).samples(), dk, j, &mut block);
            }
            // r_b[l*J + i] = Σ_k Σ_m h_{k,l}(m) d_k(m + i)
            block[j - 1..].to_vec()
        });
        DVector::from_iterator(l_count * j, blocks.into_iter().flatten())
    };

    Ok(CorrelationSet {
        r_b_matrix: gram_matrix(bright, j),
        r_d_matrix: gram_matrix(dark, j),
        r_b_vector,
        sigma_d_sq: d.iter().flatten().map(|x| x * x).sum(),
        dims: Dims {
            l: l_count,
            j,
            k_b: bright.num_mics(),
            k_d: dark.num_mics(),
            n: bright.ir_len(),
        },
    })
}

/// Reference path: the same quantities from the materialised stacked matrices.
pub fn correlations_dense(
    bright: &IrGrid,
    dark: &IrGrid,
    cfg: &DesignConfig,
) -> Result<CorrelationSet, VastError> {
    check_compatible(bright, dark)?;
    cfg.validate(bright.num_speakers())?;
    let j = cfg.filter_len_j;
    let h_b = stack_zone_matrix(bright, j);
    let h_d = stack_zone_matrix(dark, j);
    let d = DVector::from_vec(desired_per_mic(bright, cfg)?.concat());
    Ok(CorrelationSet {
        r_b_matrix: h_b.transpose() * &h_b,
        r_d_matrix: h_d.transpose() * &h_d,
        r_b_vector: h_b.transpose() * &d,
        sigma_d_sq: d.norm_squared(),
        dims: Dims {
            l: bright.num_speakers(),
            j,
            k_b: bright.num_mics(),
            k_d: dark.num_mics(),
            n: bright.ir_len(),
        },
    })
}
