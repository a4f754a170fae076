//! Benchmark harness: synthetic streams, offline comparator, regret and
//! projection accounting, rate fitting, and CSV traces.

use thiserror::Error;

use crate::domains::DomainError;
use crate::universal::UniversalError;

pub mod comparator;
pub mod config;
pub mod rate;
pub mod stream;
pub mod trace;

pub use comparator::{minimize, ComparatorResult, PrefixObjective};
pub use config::{AlgoChoice, FamilyChoice, RunConfig};
pub use rate::{fit_rate, RateFit, RATE_CHECKPOINTS};
pub use stream::{
    generate_stream, FamilyKind, GeneratedStream, ProblemFamily, RoundLoss, StreamCertificates,
    TargetDrift,
};
pub use trace::{csv_string, execute, write_csv, ExperimentOutcome, RoundRecord, CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("family is infeasible under the stated assumptions: {0}")]
    InfeasibleFamily(String),
    #[error("comparator did not reach its certificate (best value {best_value})")]
    ComparatorNonConvergence { best_value: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Universal(#[from] UniversalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// CLI exit code: 2 for configuration problems, 3 for runtime
    /// (oracle/projection/comparator) failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::InfeasibleFamily(_) => 2,
            _ => 3,
        }
    }
}
