//! Linear-algebra kernel for Gaussian states: covariance matrices over the
//! quadrature ordering R = (x₁, y₁, x₂, y₂), symplectic eigenvalues, partial
//! transposition, marginals, auxiliary-mode combinations and Wigner
//! evaluation.
//!
//! All variances are dimensionless with vacuum variance 1/2.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, Vector2};

use crate::{Error, Result};

/// Vacuum quadrature variance in the convention used throughout this crate.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Relative asymmetry tolerated by [`CovarianceMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Slack on the Heisenberg bound nu_minus >= 1/2 used by physicality checks.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Labels of the two output modes and the four auxiliary combinations
/// c = (a+b)/√2, d = (a−b)/√2, e = (ia+b)/√2, f = (ia−b)/√2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeLabel {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl ModeLabel {
    pub const ALL: [ModeLabel; 6] = [
        ModeLabel::A,
        ModeLabel::B,
        ModeLabel::C,
        ModeLabel::D,
        ModeLabel::E,
        ModeLabel::F,
    ];

    /// True for the output modes a, b whose single-mode CMs are blocks of σ.
    pub fn is_output(self) -> bool {
        matches!(self, ModeLabel::A | ModeLabel::B)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModeLabel::A => "a",
            ModeLabel::B => "b",
            ModeLabel::C => "c",
            ModeLabel::D => "d",
            ModeLabel::E => "e",
            ModeLabel::F => "f",
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(ModeLabel::A),
            "b" => Ok(ModeLabel::B),
            "c" => Ok(ModeLabel::C),
            "d" => Ok(ModeLabel::D),
            "e" => Ok(ModeLabel::E),
            "f" => Ok(ModeLabel::F),
            _ => Err(Error::UnknownName {
                what: "mode label",
                value: s.to_string(),
            }),
        }
    }
}

/// 4x4 covariance matrix of a zero-mean two-mode Gaussian state.
///
/// Symmetric by construction; positive-definiteness is required only by the
/// operations that need it, so tomographic estimates that land slightly
/// outside the physical cone can still be represented and inspected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix {
    m: Matrix4<f64>,
}

impl CovarianceMatrix {
    /// Validates and symmetrizes a candidate covariance matrix.
    ///
    /// Rejects non-finite entries and asymmetry above [`SYMMETRY_TOL`]
    /// relative to the largest absolute entry; below that the input is
    /// replaced by (M + Mᵀ)/2 so σ = σᵀ holds exactly.
    pub fn new(entries: Matrix4<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut asym = 0.0f64;
        for i in 0..4 {
            for j in (i + 1)..4 {
                asym = asym.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        let rel = asym / scale;
        if rel > SYMMETRY_TOL {
            return Err(Error::Asymmetric(rel));
        }
        Ok(Self {
            m: (entries + entries.transpose()) * 0.5,
        })
    }

    /// Builds σ from its 2x2 blocks A, B, C; A and B are symmetrized.
    pub fn from_blocks(a: Matrix2<f64>, b: Matrix2<f64>, c: Matrix2<f64>) -> Result<Self> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&c);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&c.transpose());
        Self::new(m)
    }

    /// Covariance matrix of the two-mode vacuum, I/2.
    pub fn vacuum() -> Self {
        Self {
            m: Matrix4::identity() * VACUUM_VARIANCE,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    /// Block A: covariance of mode a's quadratures (x₁, y₁).
    pub fn block_a(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(0, 0).into_owned()
    }

    /// Block B: covariance of mode b's quadratures (x₂, y₂).
    pub fn block_b(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(2, 2).into_owned()
    }

    /// Block C: cross covariances between the two modes.
    pub fn block_c(&self) -> Matrix2<f64> {
        self.m.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    /// σ transformed by a symplectic map, S σ Sᵀ.
    pub fn transformed(&self, s: &Matrix4<f64>) -> Self {
        Self {
            m: symmetrize4(&(s * self.m * s.transpose())),
        }
    }

    pub(crate) fn from_symmetric_unchecked(m: Matrix4<f64>) -> Self {
        Self { m: symmetrize4(&m) }
    }
}

fn symmetrize4(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// The symplectic form Ω = J ⊕ J with J = [[0, 1], [-1, 0]].
pub fn symplectic_form() -> Matrix4<f64> {
    let mut o = Matrix4::zeros();
    o[(0, 1)] = 1.0;
    o[(1, 0)] = -1.0;
    o[(2, 3)] = 1.0;
    o[(3, 2)] = -1.0;
    o
}

/// Quadrature rotation by θ; θ = π/2 gives [[0, -1], [1, 0]], the map of
/// mode a onto ia used by the auxiliary modes e and f.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Symplectic eigenvalues (ν₋, ν₊) of a positive-definite two-mode CM via
/// the closed form 2ν∓² = Δ ∓ √(Δ² − 4 det σ), Δ = det A + det B + 2 det C.
pub fn symplectic_eigenvalues(sigma: &CovarianceMatrix) -> Result<(f64, f64)> {
    if sigma.m.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let delta = sigma.block_a().determinant()
        + sigma.block_b().determinant()
        + 2.0 * sigma.block_c().determinant();
    let det = sigma.determinant();
    // Delta^2 - 4 det cancels to rounding noise for (near-)degenerate
    // eigenvalue pairs; noise below a few ulps of the operands must read
    // as exact degeneracy or boundary states lose ~1e-8 of accuracy.
    let raw = delta * delta - 4.0 * det;
    let noise_floor = 4e-14 * (delta * delta + 4.0 * det.abs());
    let disc = if raw <= noise_floor { 0.0 } else { raw.sqrt() };
    let lo = ((delta - disc) * 0.5).max(0.0).sqrt();
    let hi = ((delta + disc) * 0.5).max(0.0).sqrt();
    Ok((lo, hi))
}

/// Symplectic eigenvalues via the generic route: moduli of the eigenvalues
/// of iΩσ. Independent of [`symplectic_eigenvalues`]; kept as a cross-check.
pub fn symplectic_eigenvalues_generic(sigma: &CovarianceMatrix) -> Result<(f64, f64)> {
    if sigma.m.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let ev = (symplectic_form() * sigma.m).complex_eigenvalues();
    let mut mods: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
    mods.sort_by(|a, b| a.total_cmp(b));
    Ok((mods[0], mods[3]))
}

/// True iff σ satisfies the uncertainty relation ν₋ ≥ 1/2 (within
/// [`PHYSICALITY_TOL`]). Non-positive-definite matrices are not physical.
pub fn is_physical(sigma: &CovarianceMatrix) -> bool {
    match symplectic_eigenvalues(sigma) {
        Ok((lo, _)) => lo >= VACUUM_VARIANCE - PHYSICALITY_TOL,
        Err(_) => false,
    }
}

fn require_physical(sigma: &CovarianceMatrix) -> Result<()> {
    let (lo, _) = symplectic_eigenvalues(sigma)?;
    if lo < VACUUM_VARIANCE - PHYSICALITY_TOL {
        return Err(Error::Unphysical(lo));
    }
    Ok(())
}

/// State purity μ = (4 √det σ)⁻¹; equals 1 for pure states.
pub fn purity(sigma: &CovarianceMatrix) -> Result<f64> {
    require_physical(sigma)?;
    Ok(1.0 / (4.0 * sigma.determinant().sqrt()))
}

/// Partial transposition at the CM level, Δ σ Δ with Δ = Diag[1, 1, 1, −1].
/// Involutive.
pub fn partial_transpose(sigma: &CovarianceMatrix) -> CovarianceMatrix {
    let mut m = sigma.m;
    for k in 0..4 {
        m[(3, k)] = -m[(3, k)];
        m[(k, 3)] = -m[(k, 3)];
    }
    CovarianceMatrix { m }
}

/// Single-mode covariance matrix with means, for one optical mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleModeCM {
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
    pub mean_x: f64,
    pub mean_y: f64,
}

impl SingleModeCM {
    pub fn zero_mean(var_x: f64, var_y: f64, cov_xy: f64) -> Self {
        Self {
            var_x,
            var_y,
            cov_xy,
            mean_x: 0.0,
            mean_y: 0.0,
        }
    }

    pub fn vacuum() -> Self {
        Self::zero_mean(VACUUM_VARIANCE, VACUUM_VARIANCE, 0.0)
    }

    pub fn from_matrix(m: &Matrix2<f64>, mean: Vector2<f64>) -> Self {
        Self {
            var_x: m[(0, 0)],
            var_y: m[(1, 1)],
            cov_xy: 0.5 * (m[(0, 1)] + m[(1, 0)]),
            mean_x: mean[0],
            mean_y: mean[1],
        }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.var_x, self.cov_xy, self.cov_xy, self.var_y)
    }

    pub fn mean(&self) -> Vector2<f64> {
        Vector2::new(self.mean_x, self.mean_y)
    }

    pub fn det(&self) -> f64 {
        self.var_x * self.var_y - self.cov_xy * self.cov_xy
    }

    /// var_x > 0, var_y > 0 and det ≥ 1/4 within [`PHYSICALITY_TOL`].
    pub fn is_physical(&self) -> bool {
        self.var_x > 0.0 && self.var_y > 0.0 && self.det() >= 0.25 - PHYSICALITY_TOL
    }

    /// Variance of x(θ) = x cos θ + y sin θ.
    pub fn quadrature_variance(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.var_x * c * c + self.var_y * s * s + 2.0 * self.cov_xy * s * c
    }

    /// Mean of x(θ).
    pub fn quadrature_mean(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.mean_x * c + self.mean_y * s
    }

    /// Second moments ⟨z²⟩, ⟨t²⟩ of z = (x+y)/√2 and t = (x−y)/√2,
    /// including the mean contribution, so that
    /// (⟨z²⟩ − ⟨t²⟩)/2 = cov_xy + mean_x mean_y.
    pub fn rotated_second_moments(&self) -> (f64, f64) {
        let base = 0.5 * (self.var_x + self.var_y);
        let z = base + self.cov_xy + 0.5 * (self.mean_x + self.mean_y).powi(2);
        let t = base - self.cov_xy + 0.5 * (self.mean_x - self.mean_y).powi(2);
        (z, t)
    }

    /// This CM with quadratures rotated by θ (means rotate along).
    pub fn rotated(&self, theta: f64) -> Self {
        let r = rotation(theta);
        Self::from_matrix(&(r * self.matrix() * r.transpose()), r * self.mean())
    }

    /// Wigner function W(x, y) evaluated on the given points.
    ///
    /// W(r) = exp(−(r−μ)ᵀ Σ⁻¹ (r−μ)/2) / (2π √det Σ); normalized to 1.
    pub fn wigner(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        let det = self.det();
        if det <= 1e-300 {
            return Err(Error::SingularCovariance(det));
        }
        let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
        // inverse of [[vx, c], [c, vy]]
        let (ivx, ivy, ic) = (self.var_y / det, self.var_x / det, -self.cov_xy / det);
        Ok(points
            .iter()
            .map(|&(x, y)| {
                let dx = x - self.mean_x;
                let dy = y - self.mean_y;
                let q = ivx * dx * dx + 2.0 * ic * dx * dy + ivy * dy * dy;
                norm * (-0.5 * q).exp()
            })
            .collect())
    }
}

/// Block read-off for the output modes: A for mode a, B for mode b, with
/// zero means. Errors on auxiliary-mode labels.
pub fn marginal(sigma: &CovarianceMatrix, mode: ModeLabel) -> Result<SingleModeCM> {
    let block = match mode {
        ModeLabel::A => sigma.block_a(),
        ModeLabel::B => sigma.block_b(),
        other => return Err(Error::InvalidMode(other)),
    };
    Ok(SingleModeCM::from_matrix(&block, Vector2::zeros()))
}

/// Single-mode CM of an auxiliary combination mode:
/// σ_c = (A + B + C + Cᵀ)/2, σ_d = (A + B − C − Cᵀ)/2; for e and f, mode a
/// is first rotated by π/2 (A → RARᵀ, C → RC) and the c/d formulas applied.
pub fn combine_modes(sigma: &CovarianceMatrix, mode: ModeLabel) -> Result<SingleModeCM> {
    let (a, c, plus) = match mode {
        ModeLabel::C => (sigma.block_a(), sigma.block_c(), true),
        ModeLabel::D => (sigma.block_a(), sigma.block_c(), false),
        ModeLabel::E | ModeLabel::F => {
            let r = rotation(std::f64::consts::FRAC_PI_2);
            (
                r * sigma.block_a() * r.transpose(),
                r * sigma.block_c(),
                mode == ModeLabel::E,
            )
        }
        other => return Err(Error::InvalidMode(other)),
    };
    let b = sigma.block_b();
    let cross = c + c.transpose();
    let m = if plus {
        (a + b + cross) * 0.5
    } else {
        (a + b - cross) * 0.5
    };
    Ok(SingleModeCM::from_matrix(&m, Vector2::zeros()))
}

/// Single-mode CM of any of the six modes.
pub fn mode_cm(sigma: &CovarianceMatrix, mode: ModeLabel) -> SingleModeCM {
    if mode.is_output() {
        marginal(sigma, mode).expect("output mode")
    } else {
        combine_modes(sigma, mode).expect("auxiliary mode")
    }
}
