use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid cutoff ({n1}, {n2}): {reason}")]
    InvalidCutoff { n1: usize, n2: usize, reason: String },

    #[error(
        "cutoff too small for mode {mode}: Poisson tail mass {tail:.3e} beyond N = {cutoff} \
         (need < 1e-8)"
    )]
    CutoffTooSmall { mode: usize, cutoff: usize, tail: f64 },

    #[error("step-size convergence failure at gt = {time}: change {change:.3e}; retry with dt <= {suggested_dt:.3e}")]
    StepSize {
        time: f64,
        change: f64,
        suggested_dt: f64,
    },

    #[error("trace drift {drift:.3e} exceeded tolerance; retry with dt <= {suggested_dt:.3e}")]
    TraceDrift { drift: f64, suggested_dt: f64 },

    #[error("oracle refused: (N1+1)(N2+1) = {size} exceeds the limit of {limit}")]
    OracleTooLarge { size: usize, limit: usize },

    #[error("unknown observable '{0}'")]
    UnknownObservable(String),

    #[error("degenerate denominator: <N{mode}> = {value:.3e}")]
    DegenerateDenominator { mode: usize, value: f64 },

    #[error("inversion node: |<sigma3>| = {0:.3e}")]
    InversionNode(f64),

    #[error("secular solver disagrees with the oracle beyond tolerance: {0}")]
    OracleMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OracleTooLarge { .. } => 3,
            Error::StepSize { .. }
            | Error::TraceDrift { .. }
            | Error::DegenerateDenominator { .. }
            | Error::InversionNode(_)
            | Error::OracleMismatch(_) => 4,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
