use thiserror::Error;

/// Everything that can go wrong constructing model data or running an
/// estimator. Shape mismatches between already-validated values (for example
/// a k=2 kernel paired with a k=3 law) are treated as programming errors and
/// panic instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} must have {expected} entries, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} is not symmetric at ({a},{b}): |v(a,b) - v(b,a)| = {deviation:e} exceeds {tolerance:e}")]
    Asymmetric {
        what: &'static str,
        a: usize,
        b: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("{what} entry ({a},{b}) is {value}, expected a finite value >= 0")]
    BadEntry {
        what: &'static str,
        a: usize,
        b: usize,
        value: f64,
    },

    #[error("type law does not sum to 1: total is {total} (tolerance 1e-12)")]
    NotProbability { total: f64 },

    #[error("kernel has no strictly positive entry")]
    ZeroKernel,

    #[error("{0}")]
    Invalid(String),

    #[error("target measure puts mass on a null cell of the reference: first offending cell ({a},{b})")]
    NotAbsolutelyContinuous { a: usize, b: usize },

    #[error("no witness set: the target is absolutely continuous with respect to the reference")]
    NoWitnessSet,

    #[error("connection schedule has no value for n = {n}")]
    ScheduleMissing { n: u64 },

    #[error("connection schedule value a({n}) = {value} is outside (0, 1]")]
    ScheduleRange { n: u64, value: f64 },

    #[error("tilt is degenerate: p({a},{b}) = 1 but g({a},{b}) = {g} != 0")]
    DegenerateTilt { a: usize, b: usize, g: f64 },

    #[error("graph has an edge between classes ({a},{b}) whose connection probability is 0")]
    ImpossibleEdge { a: usize, b: usize },

    #[error("enumeration needs about {required:e} lattice visits, budget is {budget:e}")]
    BudgetExceeded { required: f64, budget: f64 },

    #[error("graph text is malformed at line {line}: {message}")]
    ParseGraph { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
