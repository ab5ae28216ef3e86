//! Photon-number statistics of Gaussian states: mean photon numbers, the
//! noise reduction factor, and single-mode / joint photon distributions.
//!
//! Distributions are extracted from the generating function of p(n): for a
//! zero-mean state, Σₙ p(n) zⁿ = 2/√P(z) with P a quadratic polynomial in z
//! built from the covariance matrix (and 4/√Q(z,w) with Q biquadratic for
//! the joint case). The Taylor coefficients follow from a stable three-term
//! recursion; thermal, squeezed-vacuum and twin-beam closed forms are
//! reproduced to better than 1e-9.

use nalgebra::Matrix4;

use crate::gaussian::{
    self, CovarianceMatrix, SingleModeCM, PHYSICALITY_TOL, VACUUM_VARIANCE,
};
use crate::{Error, Result};

/// Probabilities below this are treated as floating-point noise and clamped
/// to zero; anything more negative signals an unphysical input.
const NEGATIVITY_TOL: f64 = 1e-12;

/// Truncated mass above this fraction raises the truncation warning.
const DEFICIT_WARNING: f64 = 0.01;

/// Mean photon number ⟨N⟩ = (var_x + var_y − 1)/2 + (mean_x² + mean_y²)/2.
pub fn mean_photon(m: &SingleModeCM) -> f64 {
    (m.var_x + m.var_y - 1.0) / 2.0 + (m.mean_x * m.mean_x + m.mean_y * m.mean_y) / 2.0
}

/// Noise reduction factor R = Var(N_a − N_b)/(N̄_a + N̄_b) for a zero-mean
/// state; R < 1 marks nonclassical photon-number correlations.
///
/// Var(N) = (σ₁₁² + σ₂₂² + 2σ₁₂²)/2 − 1/4 per mode and
/// Cov(N_a, N_b) = (σ₁₃² + σ₁₄² + σ₂₃² + σ₂₄²)/2.
pub fn noise_reduction_factor(sigma: &CovarianceMatrix) -> Result<f64> {
    let m = sigma.matrix();
    let var_na = (m[(0, 0)].powi(2) + m[(1, 1)].powi(2) + 2.0 * m[(0, 1)].powi(2)) / 2.0 - 0.25;
    let var_nb = (m[(2, 2)].powi(2) + m[(3, 3)].powi(2) + 2.0 * m[(2, 3)].powi(2)) / 2.0 - 0.25;
    let cov = (m[(0, 2)].powi(2) + m[(0, 3)].powi(2) + m[(1, 2)].powi(2) + m[(1, 3)].powi(2)) / 2.0;
    let total = mean_photon(&gaussian::marginal(sigma, gaussian::ModeLabel::A)?)
        + mean_photon(&gaussian::marginal(sigma, gaussian::ModeLabel::B)?);
    if total <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "mean_photon_total",
            value: total,
        });
    }
    Ok((var_na + var_nb - 2.0 * cov) / total)
}

/// Photon-number distribution of one mode, p(n) for n = 0..=n_max.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeDistribution {
    pub probabilities: Vec<f64>,
    /// 1 − Σ p(n): probability mass beyond the truncation.
    pub truncation_deficit: f64,
    pub truncation_warning: bool,
}

impl SingleModeDistribution {
    pub fn n_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn total_mass(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Joint photon-number distribution p(n, m), row-major over n, m = 0..=n_max.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    probabilities: Vec<f64>,
    n_max: usize,
    pub truncation_deficit: f64,
    pub truncation_warning: bool,
}

impl JointDistribution {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn prob(&self, n: usize, m: usize) -> f64 {
        self.probabilities[n * (self.n_max + 1) + m]
    }

    pub fn total_mass(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Marginal over m, one entry per n.
    pub fn marginal_a(&self) -> Vec<f64> {
        (0..=self.n_max)
            .map(|n| (0..=self.n_max).map(|m| self.prob(n, m)).sum())
            .collect()
    }

    /// Marginal over n, one entry per m.
    pub fn marginal_b(&self) -> Vec<f64> {
        (0..=self.n_max)
            .map(|m| (0..=self.n_max).map(|n| self.prob(n, m)).sum())
            .collect()
    }

    fn moments(&self) -> (f64, f64, f64, f64, f64) {
        let (mut en, mut em, mut enn, mut emm, mut enm) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for n in 0..=self.n_max {
            for m in 0..=self.n_max {
                let p = self.prob(n, m);
                let (nf, mf) = (n as f64, m as f64);
                en += nf * p;
                em += mf * p;
                enn += nf * nf * p;
                emm += mf * mf * p;
                enm += nf * mf * p;
            }
        }
        (en, em, enn, emm, enm)
    }

    pub fn mean_a(&self) -> f64 {
        self.moments().0
    }

    pub fn mean_b(&self) -> f64 {
        self.moments().1
    }

    /// R recomputed from the truncated distribution's moments.
    pub fn noise_reduction_factor(&self) -> Result<f64> {
        let (en, em, enn, emm, enm) = self.moments();
        let total = en + em;
        if total <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "mean_photon_total",
                value: total,
            });
        }
        let var_diff = (enn - en * en) + (emm - em * em) - 2.0 * (enm - en * em);
        Ok(var_diff / total)
    }
}

fn require_zero_mean(m: &SingleModeCM) -> Result<()> {
    let mag = m.mean_x.abs().max(m.mean_y.abs());
    if mag > 1e-9 {
        return Err(Error::NonZeroMean(mag));
    }
    Ok(())
}

fn finish(probabilities: Vec<f64>) -> Result<(Vec<f64>, f64, bool)> {
    let mut cleaned = probabilities;
    for (i, p) in cleaned.iter_mut().enumerate() {
        if *p < 0.0 {
            if *p < -NEGATIVITY_TOL {
                return Err(Error::NegativeProbability {
                    index: i,
                    value: *p,
                });
            }
            *p = 0.0;
        }
    }
    let mass: f64 = cleaned.iter().sum();
    let deficit = 1.0 - mass;
    Ok((cleaned, deficit, deficit > DEFICIT_WARNING))
}

/// p(n) of the Gaussian zero-mean state with single-mode CM `m`.
///
/// Thermal states give the geometric law, squeezed vacuum has exactly
/// vanishing odd terms, and squeezed thermal states show the even-odd
/// structure through depressed odd terms.
pub fn single_mode_distribution(m: &SingleModeCM, n_max: usize) -> Result<SingleModeDistribution> {
    require_zero_mean(m)?;
    if !m.is_physical() {
        return Err(Error::Unphysical(m.det()));
    }
    // P(z) = (1+z)^2 + 2S(1-z^2) + 4D(1-z)^2, S = vx+vy, D = det m
    let s = m.var_x + m.var_y;
    let d = m.det();
    let gamma = 1.0 + 2.0 * s + 4.0 * d;
    let beta = 2.0 - 8.0 * d;
    let alpha = 1.0 - 2.0 * s + 4.0 * d;
    let mut g = vec![0.0; n_max + 1];
    g[0] = 2.0 / gamma.sqrt();
    for n in 0..n_max {
        let prev = if n >= 1 { g[n - 1] } else { 0.0 };
        g[n + 1] =
            -(beta * (2 * n + 1) as f64 * g[n] + 2.0 * alpha * n as f64 * prev)
                / (2.0 * gamma * (n + 1) as f64);
    }
    let (probabilities, truncation_deficit, truncation_warning) = finish(g)?;
    Ok(SingleModeDistribution {
        probabilities,
        truncation_deficit,
        truncation_warning,
    })
}

/// Biquadratic coefficients q[i][j] of Q(z, w) = det(D + 2 K̃ σ) with
/// D = diag(1+z, 1+z, 1+w, 1+w), K̃ = diag(1−z, 1−z, 1−w, 1−w), via exact
/// interpolation on the nodes {−1, 0, 1}².
fn joint_poly_coeffs(sigma: &CovarianceMatrix) -> [[f64; 3]; 3] {
    let q_at = |z: f64, w: f64| -> f64 {
        let mut m = Matrix4::zeros();
        let dvals = [1.0 + z, 1.0 + z, 1.0 + w, 1.0 + w];
        let kvals = [1.0 - z, 1.0 - z, 1.0 - w, 1.0 - w];
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = 2.0 * kvals[i] * sigma.entry(i, j);
            }
            m[(i, i)] += dvals[i];
        }
        m.determinant()
    };
    let nodes = [-1.0, 0.0, 1.0];
    let mut by_w = [[0.0; 3]; 3]; // z-coefficient i at w-node k
    for (k, &w) in nodes.iter().enumerate() {
        let (fm, f0, fp) = (q_at(-1.0, w), q_at(0.0, w), q_at(1.0, w));
        by_w[0][k] = f0;
        by_w[1][k] = (fp - fm) / 2.0;
        by_w[2][k] = (fp + fm) / 2.0 - f0;
    }
    let mut q = [[0.0; 3]; 3];
    for i in 0..3 {
        let (fm, f0, fp) = (by_w[i][0], by_w[i][1], by_w[i][2]);
        q[i][0] = f0;
        q[i][1] = (fp - fm) / 2.0;
        q[i][2] = (fp + fm) / 2.0 - f0;
    }
    q
}

/// Joint distribution p(n, m) of a zero-mean two-mode Gaussian state.
///
/// Marginals agree with [`single_mode_distribution`] of the corresponding
/// block within the truncation deficit.
pub fn joint_distribution(sigma: &CovarianceMatrix, n_max: usize) -> Result<JointDistribution> {
    let (lo, _) = gaussian::symplectic_eigenvalues(sigma)?;
    if lo < VACUUM_VARIANCE - PHYSICALITY_TOL {
        return Err(Error::Unphysical(lo));
    }
    let q = joint_poly_coeffs(sigma);
    let dim = n_max + 1;
    let mut g = vec![0.0f64; dim * dim];
    let idx = |n: usize, m: usize| n * dim + m;
    g[0] = 4.0 / q[0][0].sqrt();
    // first row from the w-direction recursion
    for m in 0..n_max {
        let mut acc = 0.0;
        for j in 1..3usize {
            if m + 1 >= j {
                acc += (2 * (m + 1 - j) + j) as f64 * q[0][j] * g[idx(0, m + 1 - j)];
            }
        }
        g[idx(0, m + 1)] = -acc / (2.0 * (m + 1) as f64 * q[0][0]);
    }
    // remaining rows from the z-direction recursion
    for n in 0..n_max {
        for m in 0..dim {
            let mut acc = 0.0;
            for i in 0..3usize {
                for j in 0..3usize {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    if n + 1 < i || m < j {
                        continue;
                    }
                    acc += (2 * (n + 1 - i) + i) as f64 * q[i][j] * g[idx(n + 1 - i, m - j)];
                }
            }
            g[idx(n + 1, m)] = -acc / (2.0 * (n + 1) as f64 * q[0][0]);
        }
    }
    let (probabilities, truncation_deficit, truncation_warning) = finish(g)?;
    Ok(JointDistribution {
        probabilities,
        n_max,
        truncation_deficit,
        truncation_warning,
    })
}
