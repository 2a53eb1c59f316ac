//! Sound zone control filter design that stays robust when the speed of
//! sound drifts.
//!
//! The pipeline simulates room impulse responses ([`room`]), rescales them
//! to a new sound speed ([`sicer`]), designs VAST control filters
//! ([`vast`]) and scores them ([`metrics`]). [`experiment`] ties the stages
//! into the GT / NC / SICER comparison.

pub mod atmo;
pub mod dataset;
pub mod dsp;
pub mod experiment;
pub mod ir;
pub mod metrics;
pub mod par;
pub mod room;
pub mod sicer;
pub mod vast;

use thiserror::Error;

/// Any error the library can return, for callers that do not care which stage failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Atmo(#[from] atmo::AtmoError),
    #[error(transparent)]
    Ir(#[from] ir::IrError),
    #[error(transparent)]
    Grid(#[from] ir::GridError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Room(#[from] room::RoomError),
    #[error(transparent)]
    Sicer(#[from] sicer::SicerError),
    #[error(transparent)]
    Vast(#[from] vast::VastError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Experiment(#[from] experiment::ExperimentError),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Vast(e) => vast_numerical(e),
            Error::Experiment(experiment::ExperimentError::Design { source, .. }) => vast_numerical(source),
            Error::Metrics(metrics::MetricsError::Vast(e)) => vast_numerical(e),
            _ => false,
        }
    }
}

fn vast_numerical(e: &vast::VastError) -> bool {
    matches!(
        e,
        vast::VastError::DecompositionFailure(_) | vast::VastError::SingularDenominator { .. }
    )
}
