use thiserror::Error;

use crate::User;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("effective channel of user {} vanishes", .0.index())]
    DegenerateChannel(User),

    #[error("feasible-point construction not applicable: {0}")]
    ConditionsUnmet(String),

    #[error("escape system has full column rank, no feasible direction")]
    NullspaceEmpty,

    #[error("escape step failed to decrease the objective")]
    NoDecrease,

    #[error("quadratic equality constraint is infeasible")]
    Infeasible,

    #[error("direct channels are collinear, zero forcing undefined")]
    CollinearChannels,

    #[error("sum-rate pipeline requires equal noise powers (got {0:e} and {1:e})")]
    UnequalNoise(f64, f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Stable snake_case tag for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DegenerateChannel(_) => "degenerate_channel",
            Error::ConditionsUnmet(_) => "conditions_unmet",
            Error::NullspaceEmpty => "nullspace_empty",
            Error::NoDecrease => "no_decrease",
            Error::Infeasible => "infeasible",
            Error::CollinearChannels => "collinear_channels",
            Error::UnequalNoise(..) => "unequal_noise",
            Error::Numerical(_) => "numerical",
        }
    }
}
