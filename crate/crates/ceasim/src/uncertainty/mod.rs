//! Sensitivity and uncertainty analyses: deterministic bounds, correlated
//! probabilistic sampling, acceptability curves, value of information, and
//! population heterogeneity.

mod dsa;
mod heterogeneity;
mod psa;

pub use dsa::{run_dsa, Bound, DsaEntry, DsaResult, DsaRow, DsaSpec};
pub use heterogeneity::{
    update_heterogeneity, HeterogeneityResult, HeterogeneityRow, PopulationTable,
};
pub use psa::{
    ceac, evpi, export_psa, import_psa, psa_summary, run_psa, sample_psa, CeacResult, DrawTable,
    Marginal, PsaDraw, PsaResult, PsaSpec, PsaSummary,
};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::engine::RunError;
use crate::params::ParamError;

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("bounds for `{parameter}` are reversed: {low} > {high}")]
    BadBounds { parameter: String, low: f64, high: f64 },
    #[error("distribution for `{parameter}`: {message}")]
    BadMarginal { parameter: String, message: String },
    #[error("correlation: {0}")]
    BadCorrelation(String),
    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("at least one draw is required")]
    ZeroDraws,
    #[error("draw {index}: {message}")]
    Draw { index: usize, message: String },
    #[error("population row {row}: {message}")]
    BadPopulationRow { row: usize, message: String },
    #[error("population table has no rows")]
    EmptyPopulation,
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
