//! Synthesis of the covariance matrix of a realistic below-threshold OPO
//! output: a two-mode thermal core, optional local squeezings, the
//! entangling two-mode squeeze, an optional polarization mixing and an
//! overall loss channel.
//!
//! Every map is applied at the CM level as σ → S σ Sᵀ (loss as an affine
//! map), in the operator order of the generative model: thermal core first,
//! then local squeeze, two-mode squeeze, mixing, and loss last.

use nalgebra::{Matrix2, Matrix4};

use crate::gaussian::{rotation, CovarianceMatrix, VACUUM_VARIANCE};
use crate::{Error, Result};

/// Generative parameters of the OPO output state.
///
/// Complex parameters are carried as (magnitude, phase) pairs: the two-mode
/// squeezing ζ = squeeze_r·e^{i·squeeze_phase}, the local squeezings
/// ξ_k = local_r·e^{i·local_phase}, and the mixing β = mix_angle·e^{i·mix_phase}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpoParams {
    /// Mean thermal photons of mode a.
    pub n_th1: f64,
    /// Mean thermal photons of mode b.
    pub n_th2: f64,
    pub squeeze_r: f64,
    pub squeeze_phase: f64,
    pub local_r1: f64,
    pub local_phase1: f64,
    pub local_r2: f64,
    pub local_phase2: f64,
    pub mix_angle: f64,
    pub mix_phase: f64,
    /// Overall channel transmission in (0, 1].
    pub eta_channel: f64,
}

impl Default for OpoParams {
    fn default() -> Self {
        Self {
            n_th1: 0.0,
            n_th2: 0.0,
            squeeze_r: 0.0,
            squeeze_phase: 0.0,
            local_r1: 0.0,
            local_phase1: 0.0,
            local_r2: 0.0,
            local_phase2: 0.0,
            mix_angle: 0.0,
            mix_phase: 0.0,
            eta_channel: 1.0,
        }
    }
}

impl OpoParams {
    /// Reference configuration: n̄₁ = 0.67, n̄₂ = 0.18 thermal photons and
    /// n̄_s = 0.87 entangling photons (r = asinh √(n̄_s/2)), all phases zero,
    /// no local squeezing, no mixing, unit channel transmission.
    pub fn reference() -> Self {
        Self {
            n_th1: 0.67,
            n_th2: 0.18,
            squeeze_r: (0.87f64 / 2.0).sqrt().asinh(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_th1.is_finite() || self.n_th1 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "n_th1",
                value: self.n_th1,
            });
        }
        if !self.n_th2.is_finite() || self.n_th2 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "n_th2",
                value: self.n_th2,
            });
        }
        for (name, v) in [
            ("squeeze_r", self.squeeze_r),
            ("local_r1", self.local_r1),
            ("local_r2", self.local_r2),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        if !self.eta_channel.is_finite() || self.eta_channel <= 0.0 || self.eta_channel > 1.0 {
            return Err(Error::InvalidParameter {
                name: "eta_channel",
                value: self.eta_channel,
            });
        }
        Ok(())
    }
}

/// CM of a two-mode thermal state: diag((2n̄₁+1)/2, ·, (2n̄₂+1)/2, ·).
pub fn thermal_cm(n_th1: f64, n_th2: f64) -> Result<CovarianceMatrix> {
    for (name, v) in [("n_th1", n_th1), ("n_th2", n_th2)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter { name, value: v });
        }
    }
    let t1 = (2.0 * n_th1 + 1.0) * VACUUM_VARIANCE;
    let t2 = (2.0 * n_th2 + 1.0) * VACUUM_VARIANCE;
    Ok(CovarianceMatrix::from_symmetric_unchecked(
        Matrix4::from_diagonal(&nalgebra::Vector4::new(t1, t1, t2, t2)),
    ))
}

/// Symplectic matrix of the two-mode squeezing S(ζ), ζ = r e^{iφ}.
///
/// For φ = 0 the x quadratures mix with +sinh r and the y quadratures with
/// −sinh r.
pub fn two_mode_squeeze_symplectic(r: f64, phi: f64) -> Matrix4<f64> {
    let (ch, sh) = (r.cosh(), r.sinh());
    let (sp, cp) = phi.sin_cos();
    let k = Matrix2::new(cp, sp, sp, -cp) * sh;
    let mut s = Matrix4::identity() * ch;
    s.fixed_view_mut::<2, 2>(0, 2).copy_from(&k);
    s.fixed_view_mut::<2, 2>(2, 0).copy_from(&k);
    s
}

/// Symplectic matrix of a single-mode squeeze S(ξ), ξ = r e^{iφ}:
/// diag(eʳ, e⁻ʳ) conjugated by a rotation of φ/2.
pub fn local_squeeze_symplectic(r: f64, phi: f64) -> Matrix2<f64> {
    let rot_half = rotation(phi / 2.0);
    let d = Matrix2::new(r.exp(), 0.0, 0.0, (-r).exp());
    rot_half * d * rot_half.transpose()
}

/// Symplectic matrix of the passive mixing U(β), β = angle·e^{iφ}.
pub fn mixing_symplectic(angle: f64, phi: f64) -> Matrix4<f64> {
    let (s, c) = angle.sin_cos();
    let r = rotation(phi);
    let mut u = Matrix4::identity() * c;
    u.fixed_view_mut::<2, 2>(0, 2).copy_from(&(r * s));
    u.fixed_view_mut::<2, 2>(2, 0).copy_from(&(r.transpose() * -s));
    u
}

pub fn apply_two_mode_squeeze(sigma: &CovarianceMatrix, r: f64, phi: f64) -> CovarianceMatrix {
    sigma.transformed(&two_mode_squeeze_symplectic(r, phi))
}

pub fn apply_local_squeeze(
    sigma: &CovarianceMatrix,
    xi1: (f64, f64),
    xi2: (f64, f64),
) -> CovarianceMatrix {
    let s1 = local_squeeze_symplectic(xi1.0, xi1.1);
    let s2 = local_squeeze_symplectic(xi2.0, xi2.1);
    let mut s = Matrix4::zeros();
    s.fixed_view_mut::<2, 2>(0, 0).copy_from(&s1);
    s.fixed_view_mut::<2, 2>(2, 2).copy_from(&s2);
    sigma.transformed(&s)
}

pub fn apply_mixing(sigma: &CovarianceMatrix, angle: f64, phi: f64) -> CovarianceMatrix {
    sigma.transformed(&mixing_symplectic(angle, phi))
}

/// Gaussian loss channel with transmission η applied symmetrically to both
/// modes: σ → η σ + (1−η)/2 I. Maps physical states to physical states.
pub fn apply_loss(sigma: &CovarianceMatrix, eta: f64) -> Result<CovarianceMatrix> {
    if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
        });
    }
    Ok(CovarianceMatrix::from_symmetric_unchecked(
        sigma.matrix() * eta + Matrix4::identity() * ((1.0 - eta) * VACUUM_VARIANCE),
    ))
}

/// Full generative model: thermal core, local squeeze, two-mode squeeze,
/// mixing, loss. Zero mean throughout.
pub fn build_opo_state(params: &OpoParams) -> Result<CovarianceMatrix> {
    params.validate()?;
    let mut sigma = thermal_cm(params.n_th1, params.n_th2)?;
    sigma = apply_local_squeeze(
        &sigma,
        (params.local_r1, params.local_phase1),
        (params.local_r2, params.local_phase2),
    );
    sigma = apply_two_mode_squeeze(&sigma, params.squeeze_r, params.squeeze_phase);
    sigma = apply_mixing(&sigma, params.mix_angle, params.mix_phase);
    apply_loss(&sigma, params.eta_channel)
}
