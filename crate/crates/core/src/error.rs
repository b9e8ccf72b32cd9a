use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("singular basis")]
    SingularBasis,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("enumeration budget exceeded ({candidates} candidates, budget {budget})")]
    BudgetExceeded { candidates: u128, budget: u64 },
    #[error("atom not on Λ(search): atom {index}")]
    AtomNotOnModelSet { index: usize },
    #[error("atom {index} lifts outside the declared window")]
    AtomOutsideWindow { index: usize },
    #[error("injectivity violation at atom {index}")]
    InjectivityViolation { index: usize },
    #[error("comb has no integer lattice coordinates")]
    MissingRefs,
    #[error("duplicate atom position at index {index}")]
    DuplicatePosition { index: usize },
    #[error("not Hermitian: discrepancy {discrepancy:e}")]
    NotHermitian { discrepancy: f64 },
    #[error("evaluation region too small: {0}")]
    RegionTooSmall(String),
    #[error("zero-volume region")]
    ZeroVolume,
    #[error("increase truncation radius (tail bound {tail:e} > tolerance {tol:e})")]
    Truncation { tail: f64, tol: f64 },
    #[error("test point {index} is not on the period lattice")]
    OffLattice { index: usize },
    #[error("cutoff plateau does not contain the window")]
    PlateauTooSmall,
    #[error("profile has no decay envelope: {0}")]
    NoDecay(String),
    #[error("eigen budget exceeded: {got} points (max {max})")]
    TooManyPoints { got: usize, max: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn invalid<T>(msg: &str) -> Result<T> {
    Err(Error::InvalidArgument(String::from(msg)))
}
