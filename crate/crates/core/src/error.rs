use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (relative asymmetry {0:.3e} exceeds 1e-9)")]
    Asymmetric(f64),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("covariance matrix is not positive-definite")]
    NotPositiveDefinite,

    #[error("covariance matrix is unphysical (minimum symplectic eigenvalue {0} < 1/2)")]
    Unphysical(f64),

    #[error("singular single-mode covariance matrix (determinant {0:.3e})")]
    SingularCovariance(f64),

    #[error("mode {0} is not valid for this operation")]
    InvalidMode(crate::gaussian::ModeLabel),

    #[error("parameter {name} out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("photon distribution requires a zero-mean state (|mean| = {0:.3e})")]
    NonZeroMean(f64),

    #[error("negative probability {value:.3e} at index {index} (unphysical input state)")]
    NegativeProbability { index: usize, value: f64 },

    #[error("phase bin {0} is empty")]
    EmptyBin(usize),

    #[error("degenerate calibration: vacuum trace variance {variance:.3e} does not exceed electronic noise {v_el:.3e}")]
    DegenerateCalibration { variance: f64, v_el: f64 },

    #[error("trace phases are not uniform over [0, 2pi): |mean exp(2i theta)| = {modulus:.3e} exceeds {bound:.3e}")]
    NonUniformPhases { modulus: f64, bound: f64 },

    #[error("mode {mode} is required by the {scheme} scheme but was not provided")]
    MissingMode {
        mode: crate::gaussian::ModeLabel,
        scheme: crate::tomography::Scheme,
    },

    #[error("unknown {what}: {value}")]
    UnknownName { what: &'static str, value: String },

    #[error("format version mismatch: file declares {found}, this build expects {expected}")]
    FormatVersion { found: String, expected: u32 },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
