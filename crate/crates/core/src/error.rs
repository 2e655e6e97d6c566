use crate::state::{Party, RegId};

/// Errors shared by all simulator layers.
///
/// Validation failures carry enough context to identify the offending
/// register or quantity without holding a reference into the state.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("register {0} appears more than once")]
    DuplicateLabel(RegId),
    #[error("register {0} is not part of this state")]
    UnknownLabel(RegId),
    #[error("gate expects {expected} target(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("state norm {0} differs from 1 by more than 1e-9")]
    NotNormalized(f64),
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NonHermitian(f64),
    #[error("trace {0} differs from 1 by more than 1e-9")]
    NonUnitTrace(f64),
    #[error("eigenvalue {0:.3e} is below the numerical-noise floor")]
    NegativeEigenvalue(f64),
    #[error("matrix dimension {got} does not match {expected} labels")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("subsystem parts overlap on register {0}")]
    OverlappingParts(RegId),
    #[error("operation would exceed the {cap}-qubit cap (requested {requested})")]
    SizeCap { requested: usize, cap: usize },
    #[error("register {id} is owned by {party:?}, expected Alice")]
    NotOwnedByAlice { id: RegId, party: Party },
    #[error("register {id} is owned by {party:?}, expected Bob")]
    NotOwnedByBob { id: RegId, party: Party },
    #[error("message state needs exactly one Alice register; others must be Reference")]
    InvalidMessageShape,
    #[error("erasure probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("channel-use budget of {0} is exhausted")]
    BudgetExhausted(u64),
    #[error("expected uses per success diverges at p = 1")]
    PEqualsOne,
    #[error("gave up after {0} retransmissions of one register")]
    RetransmitCapExceeded(u32),
    #[error("no ebit available and generation is disabled")]
    NoEbitAvailable,
    #[error("ebit supply yields {0} ebits per use, cannot cover a deficit")]
    InfeasibleSupply(f64),
    #[error("trace is missing {0}")]
    IncompleteTrace(&'static str),
    #[error("inequality (iv) needs a designated subset E of part B")]
    MissingE,
    #[error("trace distance {0} exceeds the 1/(2e) validity window")]
    OutOfValidityWindow(f64),
    #[error("audit requires per-use snapshots, none were recorded")]
    SnapshotsMissing,
    #[error("per-step information value {0} is outside [0, 2]")]
    InfoOutOfRange(f64),
    #[error("tail estimate needs at least one trace")]
    TooFewTraces,
    #[error("grid value {0} is outside the open interval (0, 1)")]
    GridOutOfRange(f64),
    #[error("claimed factor has overlap {0} with the live state, expected 1")]
    FactorMismatch(f64),
    #[error("config field {field}: {reason}")]
    Config { field: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
