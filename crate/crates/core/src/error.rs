use crate::liegroup::FrameTag;

/// Errors raised by the navigation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not a rotation (orthogonality error {orth:.3e}, det {det:.12})")]
    NotRotation { orth: f64, det: f64 },
    #[error("frame mismatch: expected {expected:?}, got {actual:?}")]
    FrameMismatch { expected: FrameTag, actual: FrameTag },
    #[error("frame {0:?} has no state-independent group-affine input split")]
    NotGroupAffine(FrameTag),
    #[error("non-monotonic time at epoch {epoch}: t = {t} is not after {prev}")]
    NonMonotonicTime { epoch: usize, t: f64, prev: f64 },
    #[error("GNSS fix at t = {fix_t} is not aligned with filter time {state_t} (slop {slop})")]
    Misaligned { fix_t: f64, state_t: f64, slop: f64 },
    #[error("innovation covariance is singular or ill-conditioned (condition estimate {0:.3e})")]
    SingularInnovationCov(f64),
    #[error("quadrature did not converge: error estimate {estimate:.3e} > tolerance {tol:.3e}")]
    QuadratureNotConverged { estimate: f64, tol: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_epoch(self, epoch: usize) -> Self {
        match self {
            e @ Error::NonMonotonicTime { .. } => e,
            e => Error::AtEpoch { epoch, source: Box::new(e) },
        }
    }
}
