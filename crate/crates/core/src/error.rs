use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates an operation's precondition.
    InvalidParameter(String),
    /// An explicit eigenvalue list decreases at `index` (1-based mode index).
    NonMonotoneSpectrum { index: usize },
    /// A site pairing would leave the trailing mode without a partner.
    OrphanedMode { n_max: usize },
    /// Intervals handed to a cut-off family overlap.
    OverlappingIntervals { first: usize, second: usize },
    /// An anchor does not lie strictly inside its interval.
    AnchorOutside { index: usize },
    /// A shift orbit leaves the stored truncation at iteration `step`.
    OrbitExitsTruncation { mode: usize, step: usize },
    /// The truncation is too small for the requested construction.
    TruncationTooSmall { needed: usize, available: usize },
    /// A quantity that must be positive came out zero (e.g. an empty window).
    EmptyWindow(String),
    /// The adaptive integrator could not make progress.
    StepUnderflow { t: f64, h: f64 },
    /// The adaptive integrator rejected too many consecutive steps.
    StepRejectionCascade { t: f64, h: f64, rejections: usize },
    /// The residual bound of the kick construction failed; `minimal_n0` is the
    /// smallest starting level for which every level in range passes.
    KickResidual { failing_n: usize, minimal_n0: Option<usize> },
    /// Planar state drifted from the prescribed drive.
    Desynchronized { t: f64, drift: f64 },
    /// Sum of interval lengths reached the full circle.
    IntervalBudget { total: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NonMonotoneSpectrum { index } => {
                write!(f, "eigenvalue list decreases at index {index}")
            }
            Error::OrphanedMode { n_max } => {
                write!(f, "truncation {n_max} leaves an unpaired trailing mode")
            }
            Error::OverlappingIntervals { first, second } => {
                write!(f, "intervals {first} and {second} overlap")
            }
            Error::AnchorOutside { index } => {
                write!(f, "anchor {index} is not interior to its interval")
            }
            Error::OrbitExitsTruncation { mode, step } => {
                write!(f, "orbit of mode {mode} leaves the truncation at step {step}")
            }
            Error::TruncationTooSmall { needed, available } => {
                write!(f, "need {needed} modes, only {available} stored")
            }
            Error::EmptyWindow(what) => write!(f, "empty window: {what}"),
            Error::StepUnderflow { t, h } => write!(f, "step size underflow at t={t} (h={h})"),
            Error::StepRejectionCascade { t, h, rejections } => write!(
                f,
                "{rejections} consecutive step rejections at t={t} (h={h})"
            ),
            Error::KickResidual { failing_n, minimal_n0 } => match minimal_n0 {
                Some(n0) => write!(
                    f,
                    "kick residual bound fails at level {failing_n}; minimal admissible n0 is {n0}"
                ),
                None => write!(f, "kick residual bound fails at level {failing_n}; no admissible n0 in range"),
            },
            Error::Desynchronized { t, drift } => {
                write!(f, "planar state drifted from the drive by {drift} at t={t}")
            }
            Error::IntervalBudget { total } => {
                write!(f, "interval lengths sum to {total}, not below 2*pi")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
