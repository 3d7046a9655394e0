use thiserror::Error;

use crate::types::PartType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { what: &'static str, min_eigenvalue: f64 },

    #[error("{what} is singular or not positive definite (condition number {condition:e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("clutter density must be positive, got {0}")]
    NonPositiveClutter(f64),

    #[error("cost entry {index} is not finite ({value})")]
    NonFiniteCost { index: usize, value: f64 },

    #[error("the assignment program has no feasible solution")]
    Infeasible,

    #[error("enumeration would visit {assignments} target assignments (limit {limit})")]
    OracleTooLarge { assignments: u128, limit: u128 },

    #[error("no distance model for part pair ({0}, {1})")]
    MissingDistanceModel(PartType, PartType),

    #[error("prior has no neighbours to fit")]
    EmptyNeighbours,

    #[error("need at least two samples to fit a distance model, got {0}")]
    TooFewSamples(usize),

    #[error("detections from frames {expected} and {found} passed to one step")]
    MixedFrames { expected: u32, found: u32 },

    #[error("frame {found} does not follow frame {previous}")]
    UnorderedFrames { previous: u32, found: u32 },

    #[error("match threshold must be positive, got {0}")]
    BadThreshold(f64),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
