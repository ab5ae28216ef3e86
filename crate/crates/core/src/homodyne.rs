//! Synthetic single-homodyne acquisition: phase-ramped local oscillator,
//! detection efficiency and electronic noise folded into per-phase Gaussian
//! sampling, deterministic seeding, and optional LO phase jitter.
//!
//! Samples are emitted already demodulated and normalized, as (θ, x) pairs
//! with θ swept uniformly over [0, 2π) in one ramp.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::gaussian::{self, CovarianceMatrix, ModeLabel, SingleModeCM, VACUUM_VARIANCE};
use crate::{Error, Result};

/// Detection noise: quantum efficiency η and electronic-noise variance in
/// shot-noise-normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub eta: f64,
    pub v_el: f64,
}

impl NoiseModel {
    pub fn new(eta: f64, v_el: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
            });
        }
        if !v_el.is_finite() || v_el < 0.0 {
            return Err(Error::InvalidParameter {
                name: "v_el",
                value: v_el,
            });
        }
        Ok(Self { eta, v_el })
    }

    /// Unit efficiency, no electronic noise.
    pub fn ideal() -> Self {
        Self { eta: 1.0, v_el: 0.0 }
    }

    pub fn from_db(eta: f64, db_below_shot: f64) -> Result<Self> {
        Self::new(eta, electronic_variance_from_db(db_below_shot)?)
    }

    /// η = 0.88 with electronic noise 16 dB below shot noise.
    pub fn reference() -> Self {
        Self::from_db(0.88, 16.0).expect("reference noise model")
    }

    /// Total variance seen by the detector for a mode of variance `v`:
    /// η v + (1 − η)/2 + v_el.
    pub fn detected_variance(&self, v: f64) -> f64 {
        self.eta * v + (1.0 - self.eta) * VACUUM_VARIANCE + self.v_el
    }
}

/// Electronic-noise variance from its level in dB below shot noise:
/// v_el = 0.5 · 10^(−db/10).
pub fn electronic_variance_from_db(db_below_shot: f64) -> Result<f64> {
    if db_below_shot.is_nan() || db_below_shot < 0.0 {
        return Err(Error::InvalidParameter {
            name: "electronic_noise_db",
            value: db_below_shot,
        });
    }
    Ok(VACUUM_VARIANCE * 10f64.powf(-db_below_shot / 10.0))
}

/// What a trace was recorded from: one of the six modes, or the vacuum
/// reference with the signal beam blocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceMode {
    Mode(ModeLabel),
    Vacuum,
}

impl fmt::Display for TraceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceMode::Mode(m) => write!(f, "{m}"),
            TraceMode::Vacuum => f.write_str("vacuum"),
        }
    }
}

impl FromStr for TraceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "vacuum" {
            Ok(TraceMode::Vacuum)
        } else {
            Ok(TraceMode::Mode(s.parse()?))
        }
    }
}

/// Acquisition metadata carried with every trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub mode: TraceMode,
    pub n_samples: usize,
    /// Detection efficiency assumed for this acquisition.
    pub eta: f64,
    /// Electronic-noise variance in shot-noise-normalized units.
    pub v_el: f64,
    /// Electronic noise level in dB below shot noise, when known.
    pub noise_db: Option<f64>,
    /// Duration of one 2π LO ramp, seconds. Metadata only.
    pub ramp_period_s: f64,
    pub seed: u64,
    /// Amplitude scale applied by calibration, once calibrated.
    pub calibration_scale: Option<f64>,
}

pub const DEFAULT_RAMP_PERIOD_S: f64 = 0.2;

/// One homodyne acquisition run: (θ, x) samples plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneTrace {
    pub meta: TraceMeta,
    thetas: Vec<f64>,
    values: Vec<f64>,
}

impl HomodyneTrace {
    pub fn from_parts(meta: TraceMeta, thetas: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(thetas.len(), values.len());
        Self {
            meta,
            thetas,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample variance of the raw values (mean subtracted).
    pub fn sample_variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean: f64 = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    /// Returns a copy with all sample values multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= scale;
        }
        out.meta.calibration_scale = Some(scale * self.meta.calibration_scale.unwrap_or(1.0));
        out
    }
}

/// Deterministic per-purpose substream seed: FNV-1a of the stream name
/// mixed into the base seed through splitmix64.
pub fn derive_seed(base: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(base ^ h)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const CHUNK: usize = 1 << 16;

/// Chunked Gaussian sampling: chunk i draws from its own counter-derived
/// substream, so the output is independent of how chunks are scheduled.
fn gaussian_samples(n: usize, seed: u64, std_at: impl Fn(usize) -> f64 + Sync) -> Vec<f64> {
    let mut out = vec![0.0f64; n];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64 + 1);
        let base = ci * CHUNK;
        for (k, slot) in chunk.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *slot = std_at(base + k) * z;
        }
    });
    out
}

fn ramp_thetas(n: usize) -> Vec<f64> {
    let step = std::f64::consts::TAU / n as f64;
    (0..n).map(|i| i as f64 * step).collect()
}

fn check_n_samples(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            value: 0.0,
        });
    }
    Ok(())
}

/// Simulates one run on a single-mode state: x_i ~ Normal(√η μ(θ_i),
/// η V(θ_i) + (1−η)/2 + v_el) on the uniform ramp θ_i = 2π i/n.
pub fn simulate_single_mode_trace(
    m: &SingleModeCM,
    mode: TraceMode,
    noise: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<HomodyneTrace> {
    check_n_samples(n_samples)?;
    if !m.is_physical() {
        return Err(Error::Unphysical(m.det()));
    }
    let thetas = ramp_thetas(n_samples);
    let mut values = gaussian_samples(n_samples, seed, |i| {
        noise.detected_variance(m.quadrature_variance(thetas[i])).sqrt()
    });
    if m.mean_x != 0.0 || m.mean_y != 0.0 {
        let root_eta = noise.eta.sqrt();
        for (v, &th) in values.iter_mut().zip(&thetas) {
            *v += root_eta * m.quadrature_mean(th);
        }
    }
    Ok(HomodyneTrace {
        meta: TraceMeta {
            mode,
            n_samples,
            eta: noise.eta,
            v_el: noise.v_el,
            noise_db: None,
            ramp_period_s: DEFAULT_RAMP_PERIOD_S,
            seed,
            calibration_scale: None,
        },
        thetas,
        values,
    })
}

/// Simulates one run on mode `mode` of the two-mode state σ.
pub fn simulate_trace(
    sigma: &CovarianceMatrix,
    mode: ModeLabel,
    noise: &NoiseModel,
    n_samples: usize,
    seed: u64,
) -> Result<HomodyneTrace> {
    if !gaussian::is_physical(sigma) {
        let lo = gaussian::symplectic_eigenvalues(sigma).map(|(lo, _)| lo).unwrap_or(f64::NAN);
        return Err(Error::Unphysical(lo));
    }
    let m = gaussian::mode_cm(sigma, mode);
    simulate_single_mode_trace(&m, TraceMode::Mode(mode), noise, n_samples, seed)
}

/// Calibration run with the signal blocked: the vacuum state under the same
/// noise model. Its detected variance is 1/2 + v_el for any η.
pub fn simulate_vacuum_trace(noise: &NoiseModel, n_samples: usize, seed: u64) -> HomodyneTrace {
    simulate_single_mode_trace(
        &SingleModeCM::vacuum(),
        TraceMode::Vacuum,
        noise,
        n_samples,
        seed,
    )
    .expect("vacuum is physical")
}

/// Perturbs every recorded LO phase by independent Normal(0, δθ²) noise,
/// modelling finite phase stability of the ramp.
pub fn inject_phase_jitter(trace: &HomodyneTrace, delta_theta_rms: f64, seed: u64) -> HomodyneTrace {
    if delta_theta_rms == 0.0 {
        return trace.clone();
    }
    let noise = gaussian_samples(trace.len(), seed, |_| delta_theta_rms);
    let thetas = trace
        .thetas
        .iter()
        .zip(&noise)
        .map(|(&t, &d)| t + d)
        .collect();
    HomodyneTrace {
        meta: trace.meta.clone(),
        thetas,
        values: trace.values.clone(),
    }
}
