//! Time-domain signal model: convolution matrices, stacked zone matrices and
//! the desired bright-zone signal.

use nalgebra::DMatrix;

use super::{DesignConfig, VastError};
use crate::ir::IrGrid;

/// `(N+J-1) x J` Toeplitz matrix with `H * w == h * w` (full convolution).
pub fn convolution_matrix(h: &[f64], j: usize) -> DMatrix<f64> {
    assert!(!h.is_empty() && j >= 1);
    let rows = h.len() + j - 1;
    DMatrix::from_fn(rows, j, |r, c| {
        if r >= c && r - c < h.len() {
            h[r - c]
        } else {
            0.0
        }
    })
}

/// `K(N+J-1) x LJ` matrix whose block `(k, l)` is the convolution matrix of
/// `h_{k,l}`. Materialises the full system; intended for small instances
/// and as the reference for the blockwise correlation path.
pub fn stack_zone_matrix(grid: &IrGrid, j: usize) -> DMatrix<f64> {
    let (k_count, l_count) = (grid.num_mics(), grid.num_speakers());
    let rows = grid.ir_len() + j - 1;
    let mut out = DMatrix::zeros(k_count * rows, l_count * j);
    for k in 0..k_count {
        for l in 0..l_count {
            let block = convolution_matrix(grid.ir(k, l).samples(), j);
            out.view_mut((k * rows, l * j), (rows, j)).copy_from(&block);
        }
    }
    out
}

/// Per-microphone desired signals: the virtual loudspeaker's IR delayed by
/// `modeling_delay` and zero-padded to `N+J-1`.
pub fn desired_per_mic(bright: &IrGrid, cfg: &DesignConfig) -> Result<Vec<Vec<f64>>, VastError> {
    let l = bright.num_speakers();
    let v = cfg.virtual_source_index;
    if v == 0 || v > l {
        return Err(VastError::IndexOutOfRange { index: v, speakers: l });
    }
    let rows = bright.ir_len() + cfg.filter_len_j - 1;
    Ok((0..bright.num_mics())
        .map(|k| {
            let mut d = vec![0.0; rows];
            for (slot, &x) in d
                .iter_mut()
                .skip(cfg.modeling_delay)
                .zip(bright.ir(k, v - 1).samples())
            {
                *slot = x;
            }
            d
        })
        .collect())
}

/// Concatenated desired signal `d = [d_1; ...; d_Kb]`.
pub fn desired_signal(bright: &IrGrid, cfg: &DesignConfig) -> Result<Vec<f64>, VastError> {
    Ok(desired_per_mic(bright, cfg)?.concat())
}
