use thiserror::Error;

use crate::radial_ode::Classification;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight constraint violated: need {rule} (got a={a}, b={b}, d={d})")]
    ConstraintAB {
        a: f64,
        b: f64,
        d: u32,
        rule: &'static str,
    },

    #[error("constraint a < a_c = (d-2)/2 violated: a={a}, a_c={a_c}")]
    ConstraintAC { a: f64, a_c: f64 },

    #[error("critical exponent p={p} outside the open range (2, {p_star})")]
    SubcriticalRange { p: f64, p_star: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-positive sample {value} at flat index {index}")]
    NonPositiveSample { index: usize, value: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("region ({lo}, {hi}) not inside grid support ({min}, {max})")]
    RegionOutsideGrid { lo: f64, hi: f64, min: f64, max: f64 },

    #[error("degenerate denominator in Rayleigh quotient")]
    DegenerateDenominator,

    #[error("unsupported angular representation: {0}")]
    UnsupportedAngularRep(String),

    #[error("alpha={alpha} exceeds the symmetry threshold {threshold}")]
    RegimeViolation { alpha: f64, threshold: f64 },

    #[error("intrinsic dimension out of range: {0}")]
    RangeViolation(String),

    #[error("field is not superharmonic: L w = {value} at flat index {index}")]
    NotSuperharmonic { index: usize, value: f64 },

    #[error("bad exponent t={0}: need t < -1")]
    BadExponent(f64),

    #[error("field does not have finite energy (tail exponent {0})")]
    NotFiniteEnergy(f64),

    #[error("integrator step failure at s={s} (step {step})")]
    StepFailure { s: f64, step: f64 },

    #[error("profile is not decaying (classified {0:?})")]
    NotDecaying(Classification),

    #[error("eigenvalue did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("no sign change of the k=1 eigenvalue over the admissible alpha range")]
    NoSignChange,

    #[error("scan produced no rows")]
    EmptyScan,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
