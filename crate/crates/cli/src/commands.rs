//! The four pipeline commands: simulate, reconstruct, analyze, and their
//! composition.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use twinbeam_core::entanglement::{duan_criterion, epr_criterion, full_report};
use twinbeam_core::fock::{joint_distribution, noise_reduction_factor, single_mode_distribution};
use twinbeam_core::gaussian::{self, ModeLabel};
use twinbeam_core::homodyne::{
    derive_seed, inject_phase_jitter, simulate_trace, simulate_vacuum_trace, HomodyneTrace,
    NoiseModel,
};
use twinbeam_core::io::{self, FORMAT_VERSION};
use twinbeam_core::opo::build_opo_state;
use twinbeam_core::tomography::{reconstruct_from_traces, ReconstructedCM, Scheme};
use twinbeam_core::Error as CoreError;

use crate::config::RunConfig;
use crate::{CliError, EXIT_MISSING_INPUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Text,
    Binary,
}

/// Lines quoted in every analysis report for context: headline values of
/// the reference experiment this pipeline models.
const CONTEXT_FOOTER: &[&str] = &[
    "context (reference experiment): nu_minus = 0.68(2), purity = 0.31(1),",
    "nu_tilde_minus = 0.24(2), log_negativity = 0.73(2), duan = 0.29(1) < 1/2,",
    "noise reduction factor R = 0.50(2)",
];

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::other(format!("cannot create output dir {}: {e}", dir.display())))
}

fn trace_file_stem(mode: &str) -> String {
    if mode == "vacuum" {
        "vacuum".to_string()
    } else {
        format!("mode_{mode}")
    }
}

fn write_trace(
    trace: &HomodyneTrace,
    dir: &Path,
    stem: &str,
    format: TraceFormat,
    hash: &str,
) -> Result<PathBuf, CliError> {
    let path = match format {
        TraceFormat::Text => dir.join(format!("{stem}.trace")),
        TraceFormat::Binary => dir.join(format!("{stem}.f64")),
    };
    match format {
        TraceFormat::Text => io::write_trace_text(trace, &path, Some(hash)),
        TraceFormat::Binary => io::write_trace_binary(trace, &path, Some(hash)),
    }
    .map_err(CliError::from_core)?;
    Ok(path)
}

fn read_trace(dir: &Path, stem: &str) -> Result<(HomodyneTrace, Option<String>), CliError> {
    let text = dir.join(format!("{stem}.trace"));
    if text.exists() {
        return io::read_trace_text(&text).map_err(CliError::from_core);
    }
    let binary = dir.join(format!("{stem}.f64"));
    if binary.exists() {
        return io::read_trace_binary(&binary).map_err(CliError::from_core);
    }
    Err(CliError {
        code: EXIT_MISSING_INPUT,
        message: format!(
            "missing trace for {stem}: neither {} nor {} exists",
            text.display(),
            binary.display()
        ),
    })
}

/// Simulates the six mode traces plus the vacuum calibration run and writes
/// them with a manifest. Deterministic for a given seed: every trace uses a
/// named substream derived from the base seed.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path, format: TraceFormat) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let sigma = build_opo_state(&cfg.opo).map_err(|e| CliError::config(e.to_string()))?;
    let noise = cfg.noise_model()?;
    ensure_out_dir(out)?;
    let hash = cfg.hash();
    let mut manifest: Vec<(String, String)> = vec![
        ("n_samples".into(), cfg.n_samples.to_string()),
        ("base_seed".into(), seed.to_string()),
        (
            "format".into(),
            match format {
                TraceFormat::Text => "text".into(),
                TraceFormat::Binary => "binary".into(),
            },
        ),
        ("inject_jitter_rms".into(), cfg.inject_jitter_rms.to_string()),
    ];
    for mode in ModeLabel::ALL {
        let mode_seed = derive_seed(seed, mode.as_str());
        let mut trace = simulate_trace(&sigma, mode, &noise, cfg.n_samples, mode_seed)
            .map_err(CliError::from_core)?;
        if cfg.inject_jitter_rms > 0.0 {
            trace = inject_phase_jitter(
                &trace,
                cfg.inject_jitter_rms,
                derive_seed(seed, &format!("jitter_{mode}")),
            );
        }
        let stem = trace_file_stem(mode.as_str());
        let path = write_trace(&trace, out, &stem, format, &hash)?;
        manifest.push((format!("trace_{mode}"), file_name(&path)));
        manifest.push((format!("seed_{mode}"), mode_seed.to_string()));
    }
    let vac_seed = derive_seed(seed, "vacuum");
    let vacuum = simulate_vacuum_trace(&noise, cfg.n_samples, vac_seed);
    let path = write_trace(&vacuum, out, "vacuum", format, &hash)?;
    manifest.push(("trace_vacuum".into(), file_name(&path)));
    manifest.push(("seed_vacuum".into(), vac_seed.to_string()));
    io::write_kv_document(
        out.join("manifest.txt"),
        "trace_manifest",
        Some(&hash),
        &manifest,
        &[],
    )
    .map_err(CliError::from_core)?;
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name().unwrap().to_string_lossy().into_owned()
}

/// Reads the traces of one run, reconstructs the covariance matrix and
/// writes it as a CM document. Returns the reconstruction so callers can
/// inspect the physicality flag.
pub fn cmd_reconstruct(
    traces_dir: &Path,
    out: &Path,
    scheme: Scheme,
    eta_override: Option<f64>,
    jitter_rms: f64,
    kurtosis_bins: usize,
) -> Result<ReconstructedCM, CliError> {
    ensure_out_dir(out)?;
    let (vacuum, vac_hash) = read_trace(traces_dir, "vacuum")?;
    let mut traces = BTreeMap::new();
    let mut hash = vac_hash;
    for &mode in scheme.required_modes() {
        let (trace, trace_hash) = read_trace(traces_dir, &trace_file_stem(mode.as_str()))?;
        if let (Some(h1), Some(h2)) = (hash.as_deref(), trace_hash.as_deref()) {
            if h1 != h2 {
                return Err(CliError {
                    code: EXIT_MISSING_INPUT,
                    message: format!(
                        "trace for mode {mode} carries config hash {h2}, expected {h1}; \
                         refusing to mix runs"
                    ),
                });
            }
        }
        hash = hash.or(trace_hash);
        traces.insert(mode, trace);
    }
    let noise = match eta_override {
        Some(eta) => NoiseModel::new(eta, vacuum.meta.v_el).map_err(CliError::from_core)?,
        None => NoiseModel::new(vacuum.meta.eta, vacuum.meta.v_el).map_err(CliError::from_core)?,
    };
    let rec = reconstruct_from_traces(&traces, &vacuum, scheme, &noise, jitter_rms, kurtosis_bins)
        .map_err(CliError::from_core)?;
    io::write_cm_document(&rec, out.join("cm_reconstructed.txt"), hash.as_deref())
        .map_err(CliError::from_core)?;
    Ok(rec)
}

/// Computes the full entanglement and photon-number characterization of a
/// CM document and emits the report plus plot-data tables. Returns whether
/// the input CM was physical.
pub fn cmd_analyze(cm_path: &Path, out: &Path, n_max: usize) -> Result<bool, CliError> {
    ensure_out_dir(out)?;
    let (rec, hash) = io::read_cm_document(cm_path).map_err(CliError::from_core)?;
    let hash = hash.as_deref();
    let sigma = rec.cm;
    let mut pairs: Vec<(String, String)> = Vec::new();
    let physical = rec.physical && gaussian::is_physical(&sigma);
    pairs.push(("physical".into(), physical.to_string()));
    if physical {
        let report = full_report(&sigma, Some(&rec.entry_errors)).map_err(CliError::from_core)?;
        pairs.extend(io::report_pairs(&report));
    } else {
        // bound-style criteria survive an unphysical estimate; the
        // symplectic-spectrum metrics do not
        for key in [
            "nu_minus",
            "nu_tilde_minus",
            "log_negativity_nats",
            "eof_ebits",
            "purity",
        ] {
            pairs.push((key.into(), "skipped".into()));
        }
        let duan = duan_criterion(&sigma);
        pairs.push(("duan_value".into(), format!("{:.14e}", duan.value)));
        pairs.push(("duan_bound".into(), format!("{:.14e}", duan.bound)));
        if let Ok(epr) = epr_criterion(&sigma) {
            pairs.push(("epr_a_given_b".into(), format!("{:.14e}", epr.a_given_b)));
            pairs.push(("epr_b_given_a".into(), format!("{:.14e}", epr.b_given_a)));
            pairs.push(("epr_bound".into(), format!("{:.14e}", epr.bound)));
        }
    }
    match noise_reduction_factor(&sigma) {
        Ok(r) => pairs.push(("noise_reduction_factor".into(), format!("{r:.14e}"))),
        Err(_) => pairs.push(("noise_reduction_factor".into(), "skipped".into())),
    }
    pairs.push(("scheme".into(), rec.scheme.to_string()));
    pairs.push(("calibration_scale".into(), rec.calibration_scale.to_string()));
    for g in &rec.gaussianity {
        pairs.push((
            format!("gauss_{}_pass", g.mode),
            g.pass.to_string(),
        ));
    }
    let footer: Vec<String> = CONTEXT_FOOTER.iter().map(|s| s.to_string()).collect();
    io::write_kv_document(
        out.join("report.txt"),
        "entanglement_report",
        hash,
        &pairs,
        &footer,
    )
    .map_err(CliError::from_core)?;

    // plot data: joint and single-mode distributions, Wigner grids and
    // variance profiles for the squeezed combinations
    if physical {
        let joint = joint_distribution(&sigma, n_max).map_err(CliError::from_core)?;
        io::write_joint_distribution_table(&joint, out.join("joint_pnm.tsv"), hash)
            .map_err(CliError::from_core)?;
    }
    for mode in [ModeLabel::A, ModeLabel::B, ModeLabel::C, ModeLabel::D] {
        let m = gaussian::mode_cm(&sigma, mode);
        if let Ok(dist) = single_mode_distribution(&m, n_max) {
            io::write_single_distribution_table(&dist, out.join(format!("pn_{mode}.tsv")), hash)
                .map_err(CliError::from_core)?;
        }
    }
    for mode in [ModeLabel::C, ModeLabel::D] {
        let m = gaussian::mode_cm(&sigma, mode);
        io::write_wigner_grid(&m, 4.0, 81, out.join(format!("wigner_{mode}.tsv")), hash)
            .map_err(CliError::from_core)?;
        io::write_variance_vs_theta(&m, 256, out.join(format!("variance_{mode}.tsv")), hash)
            .map_err(CliError::from_core)?;
    }
    Ok(physical)
}

/// simulate, reconstruct and analyze in sequence under one output
/// directory and one manifest. Returns whether the reconstructed CM was
/// physical.
pub fn cmd_pipeline(cfg: &RunConfig, out: &Path, format: TraceFormat) -> Result<bool, CliError> {
    cmd_simulate(cfg, out, format)?;
    let rec = cmd_reconstruct(
        out,
        out,
        cfg.scheme,
        None,
        cfg.phase_jitter_rms,
        100,
    )?;
    let physical = cmd_analyze(&out.join("cm_reconstructed.txt"), out, cfg.n_max)?;
    let pairs = vec![
        ("scheme".to_string(), cfg.scheme.to_string()),
        ("physical".to_string(), rec.physical.to_string()),
        ("format_note".to_string(), format!("v{FORMAT_VERSION}")),
    ];
    io::write_kv_document(
        out.join("pipeline_summary.txt"),
        "pipeline_summary",
        Some(&cfg.hash()),
        &pairs,
        &[],
    )
    .map_err(CliError::from_core)?;
    Ok(physical && rec.physical)
}

impl CliError {
    pub(crate) fn from_core(err: CoreError) -> Self {
        let code = match &err {
            CoreError::MissingMode { .. } | CoreError::FormatVersion { .. } => EXIT_MISSING_INPUT,
            CoreError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_INPUT,
            _ => crate::EXIT_FAILURE,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}
