//! Moment estimation from homodyne traces and assembly of the full 4x4
//! covariance matrix with per-entry error bars.
//!
//! First and second quadrature moments are obtained from unbiased kernel
//! averages over the whole phase-ramped data set: 2x·cos(θ−φ) for ⟨x_φ⟩ and
//! x²(1 + 2cos 2(θ−φ)) for ⟨x_φ²⟩, followed by an affine compensation of
//! detection efficiency and electronic noise. The ten independent CM
//! entries come from the six measured modes (or five, using the linear
//! relations among them), with statistical errors from the kernel spread
//! and an optional phase-jitter contribution for the entries built from the
//! phase-sensitive e/f moments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;
use rayon::prelude::*;

use crate::gaussian::{self, CovarianceMatrix, ModeLabel, SingleModeCM};
use crate::homodyne::{HomodyneTrace, NoiseModel, TraceMode};
use crate::{Error, Result};

/// Provenance of an estimate's uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateSource {
    Statistical,
    PhaseJitter,
    Combined,
}

impl fmt::Display for EstimateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimateSource::Statistical => "statistical",
            EstimateSource::PhaseJitter => "phase-jitter",
            EstimateSource::Combined => "combined",
        })
    }
}

/// A scalar estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub source: EstimateSource,
}

impl Estimate {
    fn statistical(value: f64, stderr: f64) -> Self {
        Self {
            value,
            stderr,
            source: EstimateSource::Statistical,
        }
    }
}

/// Which set of measured modes feeds the CM assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// All six modes a, b, c, d, e, f.
    Six,
    /// Mode f replaced by the linear relations among the others.
    FiveDropF,
    /// Mode e replaced by the linear relations among the others.
    FiveDropE,
}

impl Scheme {
    pub fn required_modes(self) -> &'static [ModeLabel] {
        use ModeLabel::*;
        match self {
            Scheme::Six => &[A, B, C, D, E, F],
            Scheme::FiveDropF => &[A, B, C, D, E],
            Scheme::FiveDropE => &[A, B, C, D, F],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Six => "six",
            Scheme::FiveDropF => "five-drop-f",
            Scheme::FiveDropE => "five-drop-e",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "six" => Ok(Scheme::Six),
            "five-drop-f" => Ok(Scheme::FiveDropF),
            "five-drop-e" => Ok(Scheme::FiveDropE),
            _ => Err(Error::UnknownName {
                what: "scheme",
                value: s.to_string(),
            }),
        }
    }
}

/// Neumaier compensated accumulator; chunk sums are combined in index
/// order so parallel reduction is schedule independent.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

const CHUNK: usize = 1 << 16;

/// Sums of the four kernel streams (k1, k1², k2, k2²) over all samples.
fn kernel_sums(trace: &HomodyneTrace, phi: f64) -> [f64; 4] {
    let thetas = trace.thetas();
    let values = trace.values();
    let partials: Vec<[Compensated; 4]> = thetas
        .par_chunks(CHUNK)
        .zip(values.par_chunks(CHUNK))
        .map(|(ts, xs)| {
            let mut acc = [Compensated::default(); 4];
            for (&t, &x) in ts.iter().zip(xs) {
                let c = (t - phi).cos();
                let k1 = 2.0 * x * c;
                // cos 2u = 2 cos^2 u - 1
                let k2 = x * x * (4.0 * c * c - 1.0);
                acc[0].add(k1);
                acc[1].add(k1 * k1);
                acc[2].add(k2);
                acc[3].add(k2 * k2);
            }
            acc
        })
        .collect();
    let mut total = [Compensated::default(); 4];
    for part in partials {
        for (tot, p) in total.iter_mut().zip(part) {
            tot.add(p.value());
        }
    }
    [
        total[0].value(),
        total[1].value(),
        total[2].value(),
        total[3].value(),
    ]
}

/// Kernel estimates of ⟨x_φ⟩ and ⟨x_φ²⟩ with efficiency and electronic
/// noise compensated: ⟨x_φ²⟩ = (raw − (1−η)/2 − v_el)/η, ⟨x_φ⟩ = raw/√η.
/// Standard errors are the kernel sample spread over √N, compensated by
/// the same factors.
pub fn estimate_moments(
    trace: &HomodyneTrace,
    phi: f64,
    noise: &NoiseModel,
) -> Result<(Estimate, Estimate)> {
    let n = trace.len();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            value: n as f64,
        });
    }
    let eta = noise.eta;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
        });
    }
    let [s1, s1sq, s2, s2sq] = kernel_sums(trace, phi);
    let nf = n as f64;
    let raw_mean = s1 / nf;
    let raw_sec = s2 / nf;
    let se_mean = ((s1sq / nf - raw_mean * raw_mean).max(0.0) / (nf - 1.0)).sqrt();
    let se_sec = ((s2sq / nf - raw_sec * raw_sec).max(0.0) / (nf - 1.0)).sqrt();
    let mean = Estimate::statistical(raw_mean / eta.sqrt(), se_mean / eta.sqrt());
    let sec = Estimate::statistical(
        (raw_sec - (1.0 - eta) * 0.5 - noise.v_el) / eta,
        se_sec / eta,
    );
    Ok((mean, sec))
}

/// Phase-uniformity diagnostic: |mean of exp(2iθ)| must stay below 3/√N
/// for the kernel estimators to be unbiased.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityCheck {
    pub modulus: f64,
    pub bound: f64,
}

impl UniformityCheck {
    pub fn pass(&self) -> bool {
        self.modulus < self.bound
    }
}

pub fn phase_uniformity(trace: &HomodyneTrace) -> UniformityCheck {
    let n = trace.len() as f64;
    let (mut re, mut im) = (Compensated::default(), Compensated::default());
    for &t in trace.thetas() {
        re.add((2.0 * t).cos());
        im.add((2.0 * t).sin());
    }
    let modulus = (re.value() / n).hypot(im.value() / n);
    UniformityCheck {
        modulus,
        bound: 3.0 / n.sqrt(),
    }
}

/// Rescales a trace so the vacuum run has variance exactly 1/2 after
/// electronic-noise subtraction; the amplitude scale is stored in the
/// returned trace's metadata.
pub fn calibrate(trace: &HomodyneTrace, vacuum: &HomodyneTrace) -> Result<HomodyneTrace> {
    if (trace.meta.eta - vacuum.meta.eta).abs() > 1e-12
        || (trace.meta.v_el - vacuum.meta.v_el).abs() > 1e-12
    {
        return Err(Error::InvalidParameter {
            name: "calibration_noise_mismatch",
            value: trace.meta.eta - vacuum.meta.eta,
        });
    }
    Ok(trace.scaled(calibration_scale(vacuum)?))
}

/// Amplitude scale derived from a vacuum run: √((1/2 + v_el)/Var(vacuum)).
pub fn calibration_scale(vacuum: &HomodyneTrace) -> Result<f64> {
    let v_raw = vacuum.sample_variance();
    let v_el = vacuum.meta.v_el;
    if v_raw <= v_el {
        return Err(Error::DegenerateCalibration {
            variance: v_raw,
            v_el,
        });
    }
    Ok(((0.5 + v_el) / v_raw).sqrt())
}

/// Excess kurtosis of one phase bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinKurtosis {
    pub theta_center: f64,
    pub n: usize,
    pub excess: f64,
    pub pass: bool,
}

/// Gaussianity check over the phase bins of one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct KurtosisReport {
    pub bins: Vec<BinKurtosis>,
    pub threshold_factor: f64,
    pub max_abs_excess: f64,
    pub pass: bool,
}

/// Excess kurtosis per phase bin with acceptance |κ| < 5√(24/N_bin).
pub fn kurtosis_check(trace: &HomodyneTrace, n_phase_bins: usize) -> Result<KurtosisReport> {
    if n_phase_bins == 0 {
        return Err(Error::InvalidParameter {
            name: "n_phase_bins",
            value: 0.0,
        });
    }
    let tau = std::f64::consts::TAU;
    let mut binned: Vec<Vec<f64>> = vec![Vec::new(); n_phase_bins];
    for (&t, &x) in trace.thetas().iter().zip(trace.values()) {
        let frac = (t.rem_euclid(tau)) / tau;
        let b = ((frac * n_phase_bins as f64) as usize).min(n_phase_bins - 1);
        binned[b].push(x);
    }
    let mut bins = Vec::with_capacity(n_phase_bins);
    let mut max_abs: f64 = 0.0;
    let mut pass = true;
    for (b, xs) in binned.iter().enumerate() {
        if xs.is_empty() {
            return Err(Error::EmptyBin(b));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let excess = m4 / (m2 * m2) - 3.0;
        let threshold = 5.0 * (24.0 / n).sqrt();
        let ok = excess.abs() < threshold;
        pass &= ok;
        max_abs = max_abs.max(excess.abs());
        bins.push(BinKurtosis {
            theta_center: (b as f64 + 0.5) * tau / n_phase_bins as f64,
            n: xs.len(),
            excess,
            pass: ok,
        });
    }
    Ok(KurtosisReport {
        bins,
        threshold_factor: 5.0,
        max_abs_excess: max_abs,
        pass,
    })
}

/// Compensated first and second moments of one mode at the four phases
/// used by the reconstruction: x (φ=0), y (φ=π/2), z (φ=π/4), t (φ=−π/4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMoments {
    pub mode: ModeLabel,
    pub mean_x: Estimate,
    pub mean_y: Estimate,
    pub sec_x: Estimate,
    pub sec_y: Estimate,
    pub sec_z: Estimate,
    pub sec_t: Estimate,
}

/// Runs the kernel estimators at the four reconstruction phases.
pub fn mode_moments(trace: &HomodyneTrace, noise: &NoiseModel) -> Result<ModeMoments> {
    let mode = match trace.meta.mode {
        TraceMode::Mode(m) => m,
        TraceMode::Vacuum => {
            return Err(Error::UnknownName {
                what: "trace mode for moment extraction",
                value: "vacuum".to_string(),
            })
        }
    };
    let q = std::f64::consts::FRAC_PI_4;
    let (mean_x, sec_x) = estimate_moments(trace, 0.0, noise)?;
    let (mean_y, sec_y) = estimate_moments(trace, 2.0 * q, noise)?;
    let (_, sec_z) = estimate_moments(trace, q, noise)?;
    let (_, sec_t) = estimate_moments(trace, -q, noise)?;
    Ok(ModeMoments {
        mode,
        mean_x,
        mean_y,
        sec_x,
        sec_y,
        sec_z,
        sec_t,
    })
}

/// Single-mode CM with per-parameter estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleModeEstimate {
    pub cm: SingleModeCM,
    pub var_x: Estimate,
    pub var_y: Estimate,
    pub cov_xy: Estimate,
    pub mean_x: Estimate,
    pub mean_y: Estimate,
}

/// var from second moment minus squared mean; cov from the ±π/4 moments,
/// σ₁₂ = (⟨z²⟩ − ⟨t²⟩)/2 − ⟨x⟩⟨y⟩.
pub fn single_mode_from_moments(m: &ModeMoments) -> SingleModeEstimate {
    let var = |sec: Estimate, mean: Estimate| -> Estimate {
        Estimate::statistical(
            sec.value - mean.value * mean.value,
            (sec.stderr.powi(2) + (2.0 * mean.value * mean.stderr).powi(2)).sqrt(),
        )
    };
    let var_x = var(m.sec_x, m.mean_x);
    let var_y = var(m.sec_y, m.mean_y);
    let cov_val = 0.5 * (m.sec_z.value - m.sec_t.value) - m.mean_x.value * m.mean_y.value;
    let cov_err = (0.25 * (m.sec_z.stderr.powi(2) + m.sec_t.stderr.powi(2))
        + (m.mean_x.value * m.mean_y.stderr).powi(2)
        + (m.mean_y.value * m.mean_x.stderr).powi(2))
    .sqrt();
    SingleModeEstimate {
        cm: SingleModeCM {
            var_x: var_x.value,
            var_y: var_y.value,
            cov_xy: cov_val,
            mean_x: m.mean_x.value,
            mean_y: m.mean_y.value,
        },
        var_x,
        var_y,
        cov_xy: Estimate::statistical(cov_val, cov_err),
        mean_x: m.mean_x,
        mean_y: m.mean_y,
    }
}

/// Full single-mode reconstruction from one calibrated trace.
pub fn reconstruct_single_mode(
    trace: &HomodyneTrace,
    noise: &NoiseModel,
) -> Result<SingleModeEstimate> {
    Ok(single_mode_from_moments(&mode_moments(trace, noise)?))
}

/// Per-mode Gaussianity summary carried inside a reconstructed CM.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianitySummary {
    pub mode: ModeLabel,
    pub max_abs_excess: f64,
    pub pass: bool,
}

/// A tomographically assembled covariance matrix with entry errors.
///
/// `cm` always satisfies the symmetry contract; when the assembled matrix
/// violates the uncertainty relation it is returned as-is with
/// `physical = false`, never silently repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedCM {
    pub cm: CovarianceMatrix,
    pub entry_errors: Matrix4<f64>,
    pub entry_sources: [[EstimateSource; 4]; 4],
    pub scheme: Scheme,
    pub mode_inventory: Vec<ModeLabel>,
    pub gaussianity: Vec<GaussianitySummary>,
    pub calibration_scale: f64,
    pub physical: bool,
}

/// |dV/dφ| of a reconstructed mode at phase φ, the sensitivity used for the
/// phase-jitter error contribution.
fn variance_slope(cm: &SingleModeCM, phi: f64) -> f64 {
    ((cm.var_y - cm.var_x) * (2.0 * phi).sin() + 2.0 * cm.cov_xy * (2.0 * phi).cos()).abs()
}

fn quad(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Assembles the 4x4 covariance matrix from per-mode moments.
///
/// Blocks A and B come from the single-mode reconstructions of a and b;
/// σ₁₃ and σ₂₄ from the x/y moments of c and d; σ₁₄ and σ₂₃ from e and f,
/// or from the substitution identities ⟨x_f²⟩ = ⟨y_a²⟩ + ⟨x_b²⟩ − ⟨x_e²⟩ and
/// ⟨y_f²⟩ = ⟨x_a²⟩ + ⟨y_b²⟩ − ⟨y_e²⟩ (and their e-eliminating analogues)
/// in the five-mode schemes. When `jitter_rms` > 0, σ₁₄ and σ₂₃ carry an
/// additional error |dV/dφ|·δθ from each phase-sensitive moment involved;
/// σ₁₃ and σ₂₄ are built from extremal variances and stay statistical.
pub fn assemble_cm(
    moments: &BTreeMap<ModeLabel, ModeMoments>,
    scheme: Scheme,
    jitter_rms: f64,
) -> Result<ReconstructedCM> {
    for &mode in scheme.required_modes() {
        if !moments.contains_key(&mode) {
            return Err(Error::MissingMode { mode, scheme });
        }
    }
    let get = |m: ModeLabel| moments.get(&m).unwrap();
    let est_a = single_mode_from_moments(get(ModeLabel::A));
    let est_b = single_mode_from_moments(get(ModeLabel::B));
    let (ma, mb) = (get(ModeLabel::A), get(ModeLabel::B));
    let (mc, md) = (get(ModeLabel::C), get(ModeLabel::D));

    let mut m = Matrix4::zeros();
    let mut errs = Matrix4::zeros();
    let mut sources = [[EstimateSource::Statistical; 4]; 4];

    let set = |mat: &mut Matrix4<f64>, i: usize, j: usize, v: f64| {
        mat[(i, j)] = v;
        mat[(j, i)] = v;
    };
    set(&mut m, 0, 0, est_a.var_x.value);
    set(&mut m, 1, 1, est_a.var_y.value);
    set(&mut m, 0, 1, est_a.cov_xy.value);
    set(&mut m, 2, 2, est_b.var_x.value);
    set(&mut m, 3, 3, est_b.var_y.value);
    set(&mut m, 2, 3, est_b.cov_xy.value);
    set(&mut errs, 0, 0, est_a.var_x.stderr);
    set(&mut errs, 1, 1, est_a.var_y.stderr);
    set(&mut errs, 0, 1, est_a.cov_xy.stderr);
    set(&mut errs, 2, 2, est_b.var_x.stderr);
    set(&mut errs, 3, 3, est_b.var_y.stderr);
    set(&mut errs, 2, 3, est_b.cov_xy.stderr);

    // cross-block entries from differences of auxiliary-mode moments
    let diff_entry = |p: &Estimate, q: &Estimate, m1: &Estimate, m2: &Estimate| -> Estimate {
        Estimate::statistical(
            0.5 * (p.value - q.value) - m1.value * m2.value,
            (0.25 * (p.stderr.powi(2) + q.stderr.powi(2))
                + (m1.value * m2.stderr).powi(2)
                + (m2.value * m1.stderr).powi(2))
            .sqrt(),
        )
    };
    let s13 = diff_entry(&mc.sec_x, &md.sec_x, &ma.mean_x, &mb.mean_x);
    let s24 = diff_entry(&mc.sec_y, &md.sec_y, &ma.mean_y, &mb.mean_y);
    set(&mut m, 0, 2, s13.value);
    set(&mut errs, 0, 2, s13.stderr);
    set(&mut m, 1, 3, s24.value);
    set(&mut errs, 1, 3, s24.stderr);

    // sigma_14 and sigma_23, scheme dependent
    let half_pi = std::f64::consts::FRAC_PI_2;
    let (s14, s23, jit14, jit23) = match scheme {
        Scheme::Six => {
            let (me, mf) = (get(ModeLabel::E), get(ModeLabel::F));
            let s14 = diff_entry(&me.sec_y, &mf.sec_y, &ma.mean_x, &mb.mean_y);
            let s23 = diff_entry(&mf.sec_x, &me.sec_x, &ma.mean_y, &mb.mean_x);
            let cm_e = single_mode_from_moments(me).cm;
            let cm_f = single_mode_from_moments(mf).cm;
            let jy = quad(&[
                0.5 * variance_slope(&cm_e, half_pi) * jitter_rms,
                0.5 * variance_slope(&cm_f, half_pi) * jitter_rms,
            ]);
            let jx = quad(&[
                0.5 * variance_slope(&cm_e, 0.0) * jitter_rms,
                0.5 * variance_slope(&cm_f, 0.0) * jitter_rms,
            ]);
            (s14, s23, jy, jx)
        }
        Scheme::FiveDropF => {
            let me = get(ModeLabel::E);
            // sigma_14 = <y_e^2> - (<x_a^2> + <y_b^2>)/2 - <x_a><y_b>
            let v14 = me.sec_y.value
                - 0.5 * (ma.sec_x.value + mb.sec_y.value)
                - ma.mean_x.value * mb.mean_y.value;
            let e14 = quad(&[
                me.sec_y.stderr,
                0.5 * ma.sec_x.stderr,
                0.5 * mb.sec_y.stderr,
                ma.mean_x.value * mb.mean_y.stderr,
                mb.mean_y.value * ma.mean_x.stderr,
            ]);
            // sigma_23 = (<y_a^2> + <x_b^2>)/2 - <x_e^2> - <y_a><x_b>
            let v23 = 0.5 * (ma.sec_y.value + mb.sec_x.value)
                - me.sec_x.value
                - ma.mean_y.value * mb.mean_x.value;
            let e23 = quad(&[
                me.sec_x.stderr,
                0.5 * ma.sec_y.stderr,
                0.5 * mb.sec_x.stderr,
                ma.mean_y.value * mb.mean_x.stderr,
                mb.mean_x.value * ma.mean_y.stderr,
            ]);
            let cm_e = single_mode_from_moments(me).cm;
            (
                Estimate::statistical(v14, e14),
                Estimate::statistical(v23, e23),
                variance_slope(&cm_e, half_pi) * jitter_rms,
                variance_slope(&cm_e, 0.0) * jitter_rms,
            )
        }
        Scheme::FiveDropE => {
            let mf = get(ModeLabel::F);
            // sigma_14 = (<x_a^2> + <y_b^2>)/2 - <y_f^2> - <x_a><y_b>
            let v14 = 0.5 * (ma.sec_x.value + mb.sec_y.value)
                - mf.sec_y.value
                - ma.mean_x.value * mb.mean_y.value;
            let e14 = quad(&[
                mf.sec_y.stderr,
                0.5 * ma.sec_x.stderr,
                0.5 * mb.sec_y.stderr,
                ma.mean_x.value * mb.mean_y.stderr,
                mb.mean_y.value * ma.mean_x.stderr,
            ]);
            // sigma_23 = <x_f^2> - (<y_a^2> + <x_b^2>)/2 - <y_a><x_b>
            let v23 = mf.sec_x.value
                - 0.5 * (ma.sec_y.value + mb.sec_x.value)
                - ma.mean_y.value * mb.mean_x.value;
            let e23 = quad(&[
                mf.sec_x.stderr,
                0.5 * ma.sec_y.stderr,
                0.5 * mb.sec_x.stderr,
                ma.mean_y.value * mb.mean_x.stderr,
                mb.mean_x.value * ma.mean_y.stderr,
            ]);
            let cm_f = single_mode_from_moments(mf).cm;
            (
                Estimate::statistical(v14, e14),
                Estimate::statistical(v23, e23),
                variance_slope(&cm_f, half_pi) * jitter_rms,
                variance_slope(&cm_f, 0.0) * jitter_rms,
            )
        }
    };
    set(&mut m, 0, 3, s14.value);
    set(&mut m, 1, 2, s23.value);
    let (e14, src14) = if jit14 > 0.0 {
        (quad(&[s14.stderr, jit14]), EstimateSource::Combined)
    } else {
        (s14.stderr, EstimateSource::Statistical)
    };
    let (e23, src23) = if jit23 > 0.0 {
        (quad(&[s23.stderr, jit23]), EstimateSource::Combined)
    } else {
        (s23.stderr, EstimateSource::Statistical)
    };
    set(&mut errs, 0, 3, e14);
    set(&mut errs, 1, 2, e23);
    sources[0][3] = src14;
    sources[3][0] = src14;
    sources[1][2] = src23;
    sources[2][1] = src23;

    let cm = CovarianceMatrix::new(m)?;
    let physical = gaussian::is_physical(&cm);
    Ok(ReconstructedCM {
        cm,
        entry_errors: errs,
        entry_sources: sources,
        scheme,
        mode_inventory: scheme.required_modes().to_vec(),
        gaussianity: Vec::new(),
        calibration_scale: 1.0,
        physical,
    })
}

/// Calibrates every trace against the vacuum run, checks phase uniformity
/// and Gaussianity, extracts moments and assembles the covariance matrix.
pub fn reconstruct_from_traces(
    traces: &BTreeMap<ModeLabel, HomodyneTrace>,
    vacuum: &HomodyneTrace,
    scheme: Scheme,
    noise: &NoiseModel,
    jitter_rms: f64,
    kurtosis_bins: usize,
) -> Result<ReconstructedCM> {
    let scale = calibration_scale(vacuum)?;
    let mut moments = BTreeMap::new();
    let mut gaussianity = Vec::new();
    for &mode in scheme.required_modes() {
        let trace = traces.get(&mode).ok_or(Error::MissingMode { mode, scheme })?;
        let calibrated = calibrate(trace, vacuum)?;
        let uniformity = phase_uniformity(&calibrated);
        if !uniformity.pass() {
            return Err(Error::NonUniformPhases {
                modulus: uniformity.modulus,
                bound: uniformity.bound,
            });
        }
        let kurt = kurtosis_check(&calibrated, kurtosis_bins)?;
        gaussianity.push(GaussianitySummary {
            mode,
            max_abs_excess: kurt.max_abs_excess,
            pass: kurt.pass,
        });
        moments.insert(mode, mode_moments(&calibrated, noise)?);
    }
    let mut rec = assemble_cm(&moments, scheme, jitter_rms)?;
    rec.gaussianity = gaussianity;
    rec.calibration_scale = scale;
    Ok(rec)
}

/// Nearest physical CM along the `t·I` direction: the smallest t ≥ 0 such
/// that σ + tI satisfies the uncertainty relation. A separate, explicit
/// operation; reconstruction never applies it implicitly.
pub fn project_to_physical(sigma: &CovarianceMatrix) -> (CovarianceMatrix, f64) {
    let with_t = |t: f64| {
        CovarianceMatrix::from_symmetric_unchecked(sigma.matrix() + Matrix4::identity() * t)
    };
    if gaussian::is_physical(sigma) {
        return (*sigma, 0.0);
    }
    let mut hi = 0.25;
    while !gaussian::is_physical(&with_t(hi)) {
        hi *= 2.0;
        if hi > 1e6 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gaussian::is_physical(&with_t(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (with_t(hi), hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::{
        self, simulate_trace, simulate_vacuum_trace, DEFAULT_RAMP_PERIOD_S,
    };
    use crate::opo::{self, OpoParams};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn synthetic_trace(mode: TraceMode, thetas: Vec<f64>, values: Vec<f64>) -> HomodyneTrace {
        HomodyneTrace::from_parts(
            crate::homodyne::TraceMeta {
                mode,
                n_samples: values.len(),
                eta: 1.0,
                v_el: 0.0,
                noise_db: None,
                ramp_period_s: DEFAULT_RAMP_PERIOD_S,
                seed: 0,
                calibration_scale: None,
            },
            thetas,
            values,
        )
    }

    #[test]
    fn second_moment_kernel_is_exact_on_the_ramp() {
        // With x_i^2 = V(theta_i) on a uniform grid the kernel average must
        // return V(phi) exactly: the integrand is a trigonometric polynomial
        // of degree four, integrated exactly by the N-point rectangle rule.
        let n = 64;
        let tau = std::f64::consts::TAU;
        let cases = [
            (0.5, 0.5, 0.0),
            (1.9747, 1.9747, 0.0),
            (3.19, 0.268, 0.0),
            (1.3, 0.7, 0.45),
            (0.9, 1.4, -0.3),
        ];
        for (vx, vy, c) in cases {
            let m = SingleModeCM::zero_mean(vx, vy, c);
            let thetas: Vec<f64> = (0..n).map(|i| i as f64 * tau / n as f64).collect();
            let values: Vec<f64> = thetas.iter().map(|&t| m.quadrature_variance(t).sqrt()).collect();
            let trace = synthetic_trace(TraceMode::Mode(ModeLabel::A), thetas, values);
            for phi in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
                let (_, sec) = estimate_moments(&trace, phi, &NoiseModel::ideal()).unwrap();
                assert_abs_diff_eq!(sec.value, m.quadrature_variance(phi), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_moments_are_half() {
        let trace = simulate_vacuum_trace(&NoiseModel::ideal(), 200_000, 21);
        let (mean, sec) = estimate_moments(&trace, 0.7, &NoiseModel::ideal()).unwrap();
        assert!(mean.value.abs() < 5.0 * mean.stderr);
        assert!((sec.value - 0.5).abs() < 5.0 * sec.stderr);
    }

    #[test]
    fn compensation_recovers_true_variance() {
        let cm = opo::build_opo_state(&OpoParams::reference()).unwrap();
        let noise = NoiseModel::reference();
        let trace = simulate_trace(&cm, ModeLabel::C, &noise, 400_000, 31).unwrap();
        let (_, sec) = estimate_moments(&trace, std::f64::consts::FRAC_PI_2, &noise).unwrap();
        let truth = gaussian::combine_modes(&cm, ModeLabel::C)
            .unwrap()
            .quadrature_variance(std::f64::consts::FRAC_PI_2);
        assert!(
            (sec.value - truth).abs() < 5.0 * sec.stderr,
            "got {} expect {} ({} se)",
            sec.value,
            truth,
            (sec.value - truth).abs() / sec.stderr
        );
        // squeezing in dB relative to shot noise, about -2.7 dB
        let db = 10.0 * (sec.value / 0.5).log10();
        assert!(db < -2.0 && db > -3.4, "squeezing {db} dB");
    }

    #[test]
    fn calibration_recovers_gain_error() {
        let noise = NoiseModel::reference();
        let vacuum = simulate_vacuum_trace(&noise, 300_000, 5);
        let scale = calibration_scale(&vacuum).unwrap();
        assert!((scale - 1.0).abs() < 3.0 / (300_000f64).sqrt());
        // inject a 2x amplitude gain; calibration must undo it
        let gained = vacuum.scaled(2.0);
        let scale2 = calibration_scale(&gained).unwrap();
        assert_relative_eq!(scale2, 0.5, max_relative = 1e-2);
        let fixed = calibrate(&gained, &gained).unwrap();
        let expect = 0.5 + noise.v_el;
        assert!((fixed.sample_variance() - expect).abs() < 5.0 * expect / (300_000f64).sqrt());
        assert_relative_eq!(fixed.meta.calibration_scale.unwrap(), 1.0, max_relative = 1e-2);
    }

    #[test]
    fn degenerate_calibration_is_an_error() {
        let noise = NoiseModel::reference();
        let vacuum = simulate_vacuum_trace(&noise, 10_000, 5).scaled(1e-3);
        assert!(matches!(
            calibration_scale(&vacuum),
            Err(Error::DegenerateCalibration { .. })
        ));
    }

    #[test]
    fn kurtosis_flags_non_gaussian_bin() {
        let n = 100_000;
        let trace = simulate_vacuum_trace(&NoiseModel::ideal(), n, 17);
        let report = kurtosis_check(&trace, 20).unwrap();
        assert!(report.pass);
        // replace the samples of one bin by a uniform distribution
        // (excess kurtosis -1.2)
        let tau = std::f64::consts::TAU;
        let mut values = trace.values().to_vec();
        let thetas = trace.thetas().to_vec();
        let mut k = 0usize;
        for (t, v) in thetas.iter().zip(values.iter_mut()) {
            if (t / tau * 20.0) as usize == 7 {
                // deterministic uniform filler on [-1, 1]
                *v = -1.0 + 2.0 * ((k as f64 * 0.618_033_988_749_894_9) % 1.0);
                k += 1;
            }
        }
        let tampered = synthetic_trace(TraceMode::Vacuum, thetas, values);
        let report = kurtosis_check(&tampered, 20).unwrap();
        assert!(!report.pass);
        assert!(!report.bins[7].pass);
        assert_relative_eq!(report.bins[7].excess, -1.2, max_relative = 0.05);
        assert!(report.bins[3].pass);
    }

    #[test]
    fn empty_bin_is_an_error() {
        let trace = synthetic_trace(
            TraceMode::Vacuum,
            vec![0.0, 0.01, 0.02],
            vec![0.1, -0.2, 0.3],
        );
        assert!(matches!(
            kurtosis_check(&trace, 8),
            Err(Error::EmptyBin(_))
        ));
    }

    #[test]
    fn uniformity_diagnostic() {
        let trace = simulate_vacuum_trace(&NoiseModel::ideal(), 50_000, 3);
        assert!(phase_uniformity(&trace).pass());
        // a quarter-period sweep biases the e^{2i theta} mean
        let quarter: Vec<f64> = (0..50_000)
            .map(|i| i as f64 * std::f64::consts::FRAC_PI_2 / 50_000.0)
            .collect();
        let bad = synthetic_trace(TraceMode::Vacuum, quarter, vec![0.0; 50_000]);
        assert!(!phase_uniformity(&bad).pass());
    }

    #[test]
    fn single_mode_reconstruction_of_a() {
        let cm = opo::build_opo_state(&OpoParams::reference()).unwrap();
        let noise = NoiseModel::reference();
        let trace = simulate_trace(&cm, ModeLabel::A, &noise, 400_000, 41).unwrap();
        let est = reconstruct_single_mode(&trace, &noise).unwrap();
        assert!((est.cm.var_x - 1.97475).abs() < 5.0 * est.var_x.stderr);
        assert!((est.cm.var_y - 1.97475).abs() < 5.0 * est.var_y.stderr);
        assert!(est.cm.cov_xy.abs() < 5.0 * est.cov_xy.stderr);
        assert!(est.cm.mean_x.abs() < 5.0 * est.mean_x.stderr);
    }

    #[test]
    fn single_mode_reconstruction_recovers_rotated_covariance() {
        // squeezed state rotated by pi/8 has a nonzero xy covariance
        let m = SingleModeCM::zero_mean(1.8, 0.3, 0.0).rotated(std::f64::consts::PI / 8.0);
        assert!(m.cov_xy.abs() > 0.1);
        let noise = NoiseModel::ideal();
        let trace = homodyne::simulate_single_mode_trace(
            &m,
            TraceMode::Mode(ModeLabel::A),
            &noise,
            400_000,
            43,
        )
        .unwrap();
        let est = reconstruct_single_mode(&trace, &noise).unwrap();
        assert!(
            (est.cm.cov_xy - m.cov_xy).abs() < 5.0 * est.cov_xy.stderr,
            "cov {} expect {} se {}",
            est.cm.cov_xy,
            m.cov_xy,
            est.cov_xy.stderr
        );
    }

    #[test]
    fn assemble_requires_scheme_modes() {
        let cm = opo::build_opo_state(&OpoParams::reference()).unwrap();
        let noise = NoiseModel::ideal();
        let mut moments = BTreeMap::new();
        for mode in [ModeLabel::A, ModeLabel::B, ModeLabel::D, ModeLabel::E, ModeLabel::F] {
            let trace = simulate_trace(&cm, mode, &noise, 10_000, 51).unwrap();
            moments.insert(mode, mode_moments(&trace, &noise).unwrap());
        }
        // mode c missing
        match assemble_cm(&moments, Scheme::Six, 0.0) {
            Err(Error::MissingMode { mode, scheme }) => {
                assert_eq!(mode, ModeLabel::C);
                assert_eq!(scheme, Scheme::Six);
            }
            other => panic!("expected MissingMode, got {other:?}"),
        }
    }

    #[test]
    fn projection_to_physical_cone() {
        let below = CovarianceMatrix::new(nalgebra::Matrix4::identity() * 0.4).unwrap();
        let (fixed, t) = project_to_physical(&below);
        assert!(gaussian::is_physical(&fixed));
        assert_relative_eq!(t, 0.1, max_relative = 1e-6);
        let vac = CovarianceMatrix::vacuum();
        let (same, t0) = project_to_physical(&vac);
        assert_eq!(t0, 0.0);
        assert_eq!(same.matrix(), vac.matrix());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("six".parse::<Scheme>().unwrap(), Scheme::Six);
        assert_eq!("five-drop-f".parse::<Scheme>().unwrap(), Scheme::FiveDropF);
        assert_eq!("five-drop-e".parse::<Scheme>().unwrap(), Scheme::FiveDropE);
        assert!("seven".parse::<Scheme>().is_err());
        assert_eq!(Scheme::FiveDropE.required_modes().len(), 5);
    }
}
