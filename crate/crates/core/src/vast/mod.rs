//! Time-domain VAST control filter design.

pub mod correlation;
pub mod filter;
pub mod gevd;
pub mod signal;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use correlation::{correlations, correlations_dense, gram_matrix, CorrelationSet, Dims};
pub use filter::{
    cost, cost_closed_form, cost_regularized, design, read_filters, vast_filter, vast_filter_sweep,
    write_filters, ControlFilterBank, Design, Provenance,
};
pub use gevd::{diagonalization_residuals, gevd, VastBasis};
pub use signal::{convolution_matrix, desired_signal, stack_zone_matrix};

#[derive(Debug, Error)]
pub enum VastError {
    #[error("bright/dark grid mismatch: {0}")]
    GridMismatch(String),
    #[error("virtual source index {index} outside 1..={speakers}")]
    IndexOutOfRange { index: usize, speakers: usize },
    #[error("rank {rank} outside 1..={max}")]
    RankTooLarge { rank: usize, max: usize },
    #[error("invalid design config: {0}")]
    InvalidConfig(String),
    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),
    #[error("lambda_{v} + mu = {value:e} is not safely positive")]
    SingularDenominator { v: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed filter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub filter_len_j: usize,
    pub mu: f64,
    pub rank_v: usize,
    /// 1-based.
    pub virtual_source_index: usize,
    /// Samples.
    #[serde(default)]
    pub modeling_delay: usize,
}

impl DesignConfig {
    pub fn new(filter_len_j: usize, mu: f64, rank_v: usize, virtual_source_index: usize) -> Self {
        Self { filter_len_j, mu, rank_v, virtual_source_index, modeling_delay: 0 }
    }

    /// Checks the config against a grid with `speakers` loudspeakers.
    pub fn validate(&self, speakers: usize) -> Result<(), VastError> {
        if self.filter_len_j == 0 {
            return Err(VastError::InvalidConfig("filter length J must be >= 1".into()));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(VastError::InvalidConfig(format!("mu must be finite and >= 0, got {}", self.mu)));
        }
        let max = speakers * self.filter_len_j;
        if self.rank_v == 0 || self.rank_v > max {
            return Err(VastError::RankTooLarge { rank: self.rank_v, max });
        }
        if self.virtual_source_index == 0 || self.virtual_source_index > speakers {
            return Err(VastError::IndexOutOfRange { index: self.virtual_source_index, speakers });
        }
        Ok(())
    }

    pub fn with_rank(mut self, rank_v: usize) -> Self {
        self.rank_v = rank_v;
        self
    }
}
