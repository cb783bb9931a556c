use core::fmt;

/// Errors reported by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not agree.
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A scalar argument is outside its admissible range.
    InvalidArgument(&'static str),
    /// Requested Hermite degree exceeds the stable recurrence range.
    DegreeTooLarge { requested: usize, max: usize },
    /// A matrix row that must be nonzero is zero.
    ZeroRow(usize),
    /// Observations carry no signal for the given coordinate.
    DegenerateTarget { row: usize },
    /// An iterative procedure ran out of iterations.
    NonConvergence { iterations: usize, residual: f64 },
    /// Loss or parameters became non-finite.
    Divergence { iteration: usize },
    /// A matrix expected to be positive semidefinite is not.
    NotPsd { min_eigenvalue: f64 },
    /// A matrix violates the diagonal constraints.
    Infeasible { violation: f64 },
    /// Exhaustive search would exceed its budget.
    BudgetExceeded { vars: usize, max: usize },
    /// A 3SAT instance or clause is malformed.
    MalformedInstance(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { op, expected, found } => write!(
                f,
                "{op}: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DegreeTooLarge { requested, max } => {
                write!(f, "hermite degree {requested} exceeds maximum {max}")
            }
            Error::ZeroRow(i) => write!(f, "row {i} is zero"),
            Error::DegenerateTarget { row } => {
                write!(f, "observations carry no signal in coordinate {row}")
            }
            Error::NonConvergence { iterations, residual } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:e})")
            }
            Error::Divergence { iteration } => write!(f, "non-finite values at iteration {iteration}"),
            Error::NotPsd { min_eigenvalue } => {
                write!(f, "matrix is not PSD (min eigenvalue {min_eigenvalue:e})")
            }
            Error::Infeasible { violation } => {
                write!(f, "diagonal constraint violated by {violation:e}")
            }
            Error::BudgetExceeded { vars, max } => {
                write!(f, "{vars} variables exceed exhaustive budget of {max}")
            }
            Error::MalformedInstance(msg) => write!(f, "malformed instance: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
