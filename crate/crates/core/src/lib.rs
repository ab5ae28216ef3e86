//! Toolkit for two-mode Gaussian states of light: synthesis of realistic
//! below-threshold OPO covariance matrices, synthetic single-homodyne
//! acquisition, tomographic reconstruction of the full 4x4 covariance matrix
//! through six auxiliary modes, and the complete entanglement and
//! photon-number characterization computed from it.
//!
//! Conventions: quadratures x = (a† + a)/√2, y = i(a† − a)/√2, vacuum
//! variance 1/2, mode ordering R = (x₁, y₁, x₂, y₂).

pub mod entanglement;
pub mod fock;
pub mod gaussian;
pub mod homodyne;
pub mod io;
pub mod opo;
pub mod tomography;

mod error;

pub use error::{Error, Result};
pub use gaussian::{CovarianceMatrix, ModeLabel, SingleModeCM};
