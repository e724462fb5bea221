use thiserror::Error;

/// Errors produced by the lattice, pricing and inversion routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("cannot parse date `{value}` at line {line} with format `{format}`")]
    DateParse {
        line: u64,
        value: String,
        format: String,
    },

    #[error("insufficient data: need at least {needed}, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("ordering violated at {at}: keys must be strictly increasing")]
    Ordering { at: String },

    #[error("invalid value {value} for {what}")]
    InvalidValue { what: String, value: f64 },

    #[error("yield {yield_value} at maturity {maturity} outside sanity range [-0.5, 1.0]")]
    SanityRange { maturity: f64, yield_value: f64 },

    #[error("maturity {maturity} outside quoted range [{min}, {max}]; no extrapolation")]
    Extrapolation { maturity: f64, min: f64, max: f64 },

    #[error("division by zero: zero value on {date}")]
    DivisionByZero { date: String },

    #[error("degenerate probability {p}: must lie strictly inside (0, 1)")]
    DegenerateProbability { p: f64 },

    #[error("calibration infeasible: down factor 1 + d*delta = {down_factor} is not positive")]
    CalibrationInfeasible { down_factor: f64 },

    #[error("lattice index out of range: n={n}, k={k}, n_steps={n_steps}")]
    Index { n: usize, k: usize, n_steps: usize },

    #[error("risk-neutral probability {value} outside [0, 1]{}", node_suffix(.node))]
    ProbabilityRange {
        value: f64,
        node: Option<(usize, usize)>,
    },

    #[error("path enumeration limited to 20 steps, got {0}")]
    OracleSize(usize),

    #[error("target price {target} outside attainable bracket [{low}, {high}]")]
    UnattainablePrice { target: f64, low: f64, high: f64 },

    #[error("bond price does not depend on the risk-neutral probability (c2 = 1)")]
    NonIdentifiable,

    #[error("implied sigma is indeterminate when p equals the risk-neutral probability")]
    IndeterminateSigma,

    #[error("negative discriminant {0} in implied probability")]
    NumericDomain(f64),

    #[error("no quadratic root reproduces the risk-neutral probability (minus={minus}, plus={plus})")]
    WrongBranch { minus: f64, plus: f64 },

    #[error("bisection did not converge after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: u32, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn node_suffix(node: &Option<(usize, usize)>) -> String {
    match node {
        Some((n, k)) => format!(" at node (n={n}, k={k})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
