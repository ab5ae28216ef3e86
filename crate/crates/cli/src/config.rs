//! Run configuration: `key = value` lines with `#` comments, strict key
//! checking, and a stable hash of the resolved configuration that is
//! stamped into every output file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use twinbeam_core::homodyne::{electronic_variance_from_db, NoiseModel};
use twinbeam_core::opo::OpoParams;
use twinbeam_core::tomography::Scheme;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "n1",
    "n2",
    "squeeze_r",
    "squeeze_photons",
    "squeeze_phase",
    "xi1_r",
    "xi1_phase",
    "xi2_r",
    "xi2_phase",
    "mix_angle",
    "mix_phase",
    "eta_channel",
    "eta",
    "electronic_noise_db",
    "n_samples",
    "seed",
    "scheme",
    "n_max",
    "phase_jitter_rms",
    "inject_jitter_rms",
    "out_dir",
];

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub opo: OpoParams,
    pub eta: f64,
    pub electronic_noise_db: f64,
    pub n_samples: usize,
    pub seed: Option<u64>,
    pub scheme: Scheme,
    pub n_max: usize,
    /// LO phase stability fed into the reconstruction error model, radians.
    pub phase_jitter_rms: f64,
    /// Jitter injected into simulated traces; 0 disables injection.
    pub inject_jitter_rms: f64,
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            opo: OpoParams::default(),
            eta: 0.88,
            electronic_noise_db: 16.0,
            n_samples: 1_000_000,
            seed: None,
            scheme: Scheme::Six,
            n_max: 40,
            phase_jitter_rms: 0.02,
            inject_jitter_rms: 0.0,
            out_dir: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::config(msg)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::missing_input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(config_err(format!("unknown config key: {key}")));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(config_err(format!("duplicate config key: {key}")));
            }
        }
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let f64_key = |key: &str, default: f64| -> Result<f64, CliError> {
            match map.get(key) {
                None => Ok(default),
                Some(v) => v
                    .parse::<f64>()
                    .map_err(|e| config_err(format!("bad value for {key}: {e}"))),
            }
        };
        let mut cfg = RunConfig::default();
        cfg.opo.n_th1 = f64_key("n1", 0.0)?;
        cfg.opo.n_th2 = f64_key("n2", 0.0)?;
        match (map.get("squeeze_r"), map.get("squeeze_photons")) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "squeeze_r and squeeze_photons are alternatives; set only one",
                ))
            }
            (Some(_), None) => cfg.opo.squeeze_r = f64_key("squeeze_r", 0.0)?,
            (None, Some(_)) => {
                let n_s = f64_key("squeeze_photons", 0.0)?;
                if n_s < 0.0 {
                    return Err(config_err(format!("bad value for squeeze_photons: {n_s}")));
                }
                cfg.opo.squeeze_r = (n_s / 2.0).sqrt().asinh();
            }
            (None, None) => {}
        }
        cfg.opo.squeeze_phase = f64_key("squeeze_phase", 0.0)?;
        cfg.opo.local_r1 = f64_key("xi1_r", 0.0)?;
        cfg.opo.local_phase1 = f64_key("xi1_phase", 0.0)?;
        cfg.opo.local_r2 = f64_key("xi2_r", 0.0)?;
        cfg.opo.local_phase2 = f64_key("xi2_phase", 0.0)?;
        cfg.opo.mix_angle = f64_key("mix_angle", 0.0)?;
        cfg.opo.mix_phase = f64_key("mix_phase", 0.0)?;
        cfg.opo.eta_channel = f64_key("eta_channel", 1.0)?;
        cfg.opo
            .validate()
            .map_err(|e| config_err(format!("invalid parameters: {e}")))?;
        cfg.eta = f64_key("eta", 0.88)?;
        cfg.electronic_noise_db = f64_key("electronic_noise_db", 16.0)?;
        self_check_noise(cfg.eta, cfg.electronic_noise_db)?;
        if let Some(v) = map.get("n_samples") {
            cfg.n_samples = v
                .parse::<usize>()
                .map_err(|e| config_err(format!("bad value for n_samples: {e}")))?;
        }
        if cfg.n_samples == 0 {
            return Err(config_err("n_samples must be at least 1"));
        }
        if let Some(v) = map.get("seed") {
            cfg.seed = Some(
                v.parse::<u64>()
                    .map_err(|e| config_err(format!("bad value for seed: {e}")))?,
            );
        }
        if let Some(v) = map.get("scheme") {
            cfg.scheme = v
                .parse::<Scheme>()
                .map_err(|e| config_err(format!("{e}")))?;
        }
        if let Some(v) = map.get("n_max") {
            cfg.n_max = v
                .parse::<usize>()
                .map_err(|e| config_err(format!("bad value for n_max: {e}")))?;
        }
        cfg.phase_jitter_rms = f64_key("phase_jitter_rms", 0.02)?;
        cfg.inject_jitter_rms = f64_key("inject_jitter_rms", 0.0)?;
        if cfg.phase_jitter_rms < 0.0 || cfg.inject_jitter_rms < 0.0 {
            return Err(config_err("jitter rms values must be nonnegative"));
        }
        cfg.out_dir = map.get("out_dir").cloned();
        Ok(cfg)
    }

    pub fn noise_model(&self) -> Result<NoiseModel, CliError> {
        NoiseModel::from_db(self.eta, self.electronic_noise_db)
            .map_err(|e| config_err(format!("invalid noise model: {e}")))
    }

    /// Seed required for anything that simulates; no silent entropy.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| config_err("seed is required (set it in the config or pass --seed)"))
    }

    /// Canonical serialization of the resolved configuration.
    pub fn canonical(&self) -> String {
        let p = &self.opo;
        let pairs: Vec<(&str, String)> = vec![
            ("n1", p.n_th1.to_string()),
            ("n2", p.n_th2.to_string()),
            ("squeeze_r", p.squeeze_r.to_string()),
            ("squeeze_phase", p.squeeze_phase.to_string()),
            ("xi1_r", p.local_r1.to_string()),
            ("xi1_phase", p.local_phase1.to_string()),
            ("xi2_r", p.local_r2.to_string()),
            ("xi2_phase", p.local_phase2.to_string()),
            ("mix_angle", p.mix_angle.to_string()),
            ("mix_phase", p.mix_phase.to_string()),
            ("eta_channel", p.eta_channel.to_string()),
            ("eta", self.eta.to_string()),
            ("electronic_noise_db", self.electronic_noise_db.to_string()),
            ("n_samples", self.n_samples.to_string()),
            (
                "seed",
                self.seed.map(|s| s.to_string()).unwrap_or_default(),
            ),
            ("scheme", self.scheme.to_string()),
            ("n_max", self.n_max.to_string()),
            ("phase_jitter_rms", self.phase_jitter_rms.to_string()),
            ("inject_jitter_rms", self.inject_jitter_rms.to_string()),
        ];
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// FNV-1a hash of the canonical configuration, 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn self_check_noise(eta: f64, db: f64) -> Result<(), CliError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(config_err(format!("bad value for eta: {eta} (must be in (0, 1])")));
    }
    electronic_variance_from_db(db)
        .map(|_| ())
        .map_err(|e| config_err(format!("bad value for electronic_noise_db: {e}")))
}
