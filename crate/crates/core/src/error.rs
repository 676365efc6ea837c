use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A parameter violated a documented precondition.
    InvalidParameter(String),
    /// Two inputs that must agree on a length or modulus did not.
    LengthMismatch { expected: usize, found: usize },
    /// The flat filter could not be certified within the widening budget.
    FilterUncertified {
        n: u64,
        buckets: u64,
        sharpness: u32,
    },
    /// The derandomization's initial condition `Σ h_0 < 1` does not hold.
    InitialCondition {
        total: f64,
        /// Smallest admissible repetition count (or oversampling constant)
        /// that would satisfy it, when one exists in the search range.
        suggestion: Option<f64>,
    },
    /// Sample-and-verify forging ran out of attempts.
    BudgetExhausted { attempts: usize },
    /// The schedule does not satisfy the bucket-noise condition.
    ScheduleNotCertified { worst_sum: f64, threshold: f64 },
    /// A sample outside the permitted sample set was requested.
    MissingSample(u64),
    /// The 1-sparse decoder found no consistent dominant frequency.
    NoDominantFrequency,
    /// A number-theoretic routine hit a hard limit.
    NumberTheory(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::FilterUncertified { n, buckets, sharpness } => write!(
                f,
                "no certified flat filter for n={n}, B={buckets}, F={sharpness} within the widening budget"
            ),
            Error::InitialCondition { total, suggestion } => {
                write!(f, "initial condition fails: estimator total {total:e} >= 1")?;
                if let Some(s) = suggestion {
                    write!(f, " (smallest passing value: {s})")?;
                }
                Ok(())
            }
            Error::BudgetExhausted { attempts } => {
                write!(f, "no certified schedule after {attempts} attempts; increase d")
            }
            Error::ScheduleNotCertified { worst_sum, threshold } => write!(
                f,
                "schedule not certified: worst pair sum {worst_sum} exceeds {threshold}"
            ),
            Error::MissingSample(i) => write!(f, "sample {i} is not in the permitted sample set"),
            Error::NoDominantFrequency => f.write_str("no dominant frequency in the measurements"),
            Error::NumberTheory(msg) => write!(f, "number theory: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
