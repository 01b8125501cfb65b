use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Every failure the laboratory can report.
///
/// Variant names double as the module error names shown by the command line,
/// see [`Error::name`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("point lies on the singular line x = 1/2")]
    SingularInput,
    #[error("orbit hits the singular line at iterate {step}")]
    SingularOrbit { step: usize },
    #[error("precision exhausted: {needed} bits needed, {available} available")]
    PrecisionExhausted { needed: usize, available: usize },
    #[error("preimage at word position {index} lands on the singular line")]
    SingularPreimage { index: usize },
    #[error("2^{n} preimages exceed the cap of {cap}")]
    CardinalityOverflow { n: u32, cap: usize },
    #[error("x = {x} lies outside the branch domain")]
    OutsideDomain { x: f64 },
    #[error("x = {x} sits on a vertical asymptote")]
    AtAsymptote { x: f64 },
    #[error("quadrature did not reach tolerance {tol:e} at depth {depth}")]
    QuadratureFailure { tol: f64, depth: u32 },
    #[error("bisection failed: no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("pull-back stage {step} enters the strip around x = 1/2")]
    StripViolation { step: usize },
    #[error("arc is not monotone in both coordinates")]
    NonMonotoneArc,
    #[error("only {found} complete wraps, {needed} requested")]
    InsufficientWraps { found: usize, needed: usize },
    #[error("degenerate rectangle")]
    DegenerateRectangle,
    #[error("only {usable} points above the noise floor, at least {needed} needed")]
    InsufficientSignal { usable: usize, needed: usize },
    #[error("witness failed: no grid point of A reached B at time {n}")]
    WitnessFailed { n: usize },
    #[error("invalid branch word: {0}")]
    InvalidWord(&'static str),
}

impl Error {
    /// Stable name of the error kind.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SingularInput => "SingularInput",
            Error::SingularOrbit { .. } => "SingularOrbit",
            Error::PrecisionExhausted { .. } => "PrecisionExhausted",
            Error::SingularPreimage { .. } => "SingularPreimage",
            Error::CardinalityOverflow { .. } => "CardinalityOverflow",
            Error::OutsideDomain { .. } => "OutsideDomain",
            Error::AtAsymptote { .. } => "AtAsymptote",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::NoBracket { .. } => "NoBracket",
            Error::StripViolation { .. } => "StripViolation",
            Error::NonMonotoneArc => "NonMonotoneArc",
            Error::InsufficientWraps { .. } => "InsufficientWraps",
            Error::DegenerateRectangle => "DegenerateRectangle",
            Error::InsufficientSignal { .. } => "InsufficientSignal",
            Error::WitnessFailed { .. } => "WitnessFailed",
            Error::InvalidWord(_) => "InvalidWord",
        }
    }

    /// True for malformed input, false for failures found while computing.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::InvalidWord(_) | Error::DegenerateRectangle)
    }
}
