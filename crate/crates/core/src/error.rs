use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown cell `{cell}`")]
    UnknownCell { cell: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// β_f is zero or at least one half, so no coding rate can both be
    /// needed and recover the packet.
    #[error("flow `{flow}` has degenerate symbol error probability {beta} (need 0 < beta < 0.5)")]
    DegenerateChannel { flow: String, beta: f64 },

    /// Even at the most aggressive rates the cell cannot fit its flows.
    #[error("cell `{cell}` is infeasible: minimum load exceeds period by {deficit} s")]
    Infeasible { cell: String, deficit: f64 },

    #[error("rate parameter x = {x} does not exceed beta = {beta}; the bound is vacuous")]
    NoRecovery { x: f64, beta: f64 },

    #[error("invalid dimensions: k = {k}, n = {n}")]
    InvalidDimensions { k: u64, n: u64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("problem too large for exhaustive evaluation: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
