//! File formats: homodyne trace files (text and binary with a sidecar
//! header), covariance-matrix documents, entanglement report blocks and
//! plot-data tables.
//!
//! Every document is plain text built from `key = value` lines plus
//! optional `#` comments; every file carries a format version and, when
//! produced by the CLI, the configuration hash. Trace sample lines use the
//! shortest decimal representation that round-trips f64 exactly, so text
//! and binary variants are both bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Matrix4;

use crate::entanglement::EntanglementReport;
use crate::fock::{JointDistribution, SingleModeDistribution};
use crate::gaussian::{CovarianceMatrix, ModeLabel, SingleModeCM};
use crate::homodyne::{HomodyneTrace, TraceMeta, TraceMode, DEFAULT_RAMP_PERIOD_S};
use crate::tomography::{EstimateSource, GaussianitySummary, ReconstructedCM, Scheme};
use crate::{Error, Result};

/// Version stamped into every file this crate writes.
pub const FORMAT_VERSION: u32 = 1;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// 15-significant-digit scientific form used for matrix entries.
fn sig15(v: f64) -> String {
    format!("{v:.14e}")
}

#[derive(Debug, Default, Clone)]
struct KvBlock {
    map: BTreeMap<String, (usize, String)>,
}

impl KvBlock {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn require(&self, path: &Path, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| parse_err(path, 0, format!("missing key {key}")))
    }

    fn require_f64(&self, path: &Path, key: &str) -> Result<f64> {
        let (line, raw) = self
            .map
            .get(key)
            .ok_or_else(|| parse_err(path, 0, format!("missing key {key}")))?;
        raw.parse::<f64>()
            .map_err(|e| parse_err(path, *line, format!("bad float for {key}: {e}")))
    }

    fn f64_or(&self, path: &Path, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some((line, raw)) => raw
                .parse::<f64>()
                .map_err(|e| parse_err(path, *line, format!("bad float for {key}: {e}"))),
        }
    }
}

fn check_version(path: &Path, kv: &KvBlock) -> Result<()> {
    let found = kv.require(path, "format_version")?;
    if found != FORMAT_VERSION.to_string() {
        return Err(Error::FormatVersion {
            found: found.to_string(),
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Splits a document into its leading `key = value` header and the index of
/// the first data line (first non-comment line without '=').
fn parse_header(_path: &Path, lines: &[String]) -> Result<(KvBlock, usize)> {
    let mut kv = KvBlock::default();
    for (i, line) in lines.iter().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match trimmed.split_once('=') {
            Some((k, v)) => {
                kv.map
                    .insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
            }
            None => return Ok((kv, i)),
        }
    }
    Ok((kv, lines.len()))
}

fn meta_header_pairs(meta: &TraceMeta, config_hash: Option<&str>) -> Vec<(String, String)> {
    let mut pairs = vec![
        ("format_version".to_string(), FORMAT_VERSION.to_string()),
        ("kind".to_string(), "homodyne_trace".to_string()),
        ("mode".to_string(), meta.mode.to_string()),
        ("n_samples".to_string(), meta.n_samples.to_string()),
        ("eta".to_string(), meta.eta.to_string()),
        ("v_el".to_string(), meta.v_el.to_string()),
        ("ramp_period_s".to_string(), meta.ramp_period_s.to_string()),
        ("seed".to_string(), meta.seed.to_string()),
    ];
    if let Some(db) = meta.noise_db {
        pairs.push(("noise_db".to_string(), db.to_string()));
    }
    if let Some(s) = meta.calibration_scale {
        pairs.push(("calibration_scale".to_string(), s.to_string()));
    }
    if let Some(h) = config_hash {
        pairs.push(("config_hash".to_string(), h.to_string()));
    }
    pairs
}

fn meta_from_header(path: &Path, kv: &KvBlock) -> Result<(TraceMeta, Option<String>)> {
    check_version(path, kv)?;
    let mode: TraceMode = kv.require(path, "mode")?.parse()?;
    let n_samples = kv
        .require(path, "n_samples")?
        .parse::<usize>()
        .map_err(|e| parse_err(path, 0, format!("bad n_samples: {e}")))?;
    let seed = kv
        .require(path, "seed")?
        .parse::<u64>()
        .map_err(|e| parse_err(path, 0, format!("bad seed: {e}")))?;
    let meta = TraceMeta {
        mode,
        n_samples,
        eta: kv.require_f64(path, "eta")?,
        v_el: kv.require_f64(path, "v_el")?,
        noise_db: kv.get("noise_db").map(|_| kv.require_f64(path, "noise_db")).transpose()?,
        ramp_period_s: kv.f64_or(path, "ramp_period_s", DEFAULT_RAMP_PERIOD_S)?,
        seed,
        calibration_scale: kv
            .get("calibration_scale")
            .map(|_| kv.require_f64(path, "calibration_scale"))
            .transpose()?,
    };
    Ok((meta, kv.get("config_hash").map(str::to_string)))
}

/// Writes a trace as text: header lines, then one "θ x" pair per line.
pub fn write_trace_text(
    trace: &HomodyneTrace,
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path.as_ref())?);
    for (k, v) in meta_header_pairs(&trace.meta, config_hash) {
        writeln!(w, "{k} = {v}")?;
    }
    for (&t, &x) in trace.thetas().iter().zip(trace.values()) {
        writeln!(w, "{t} {x}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a text trace; returns the trace and the config hash if present.
pub fn read_trace_text(path: impl AsRef<Path>) -> Result<(HomodyneTrace, Option<String>)> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let (kv, data_start) = parse_header(path, &lines)?;
    let (meta, hash) = meta_from_header(path, &kv)?;
    let mut thetas = Vec::with_capacity(meta.n_samples);
    let mut values = Vec::with_capacity(meta.n_samples);
    for (i, line) in lines.iter().enumerate().skip(data_start) {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_ascii_whitespace();
        let t = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| parse_err(path, i + 1, "expected \"theta x\""))?;
        let x = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| parse_err(path, i + 1, "expected \"theta x\""))?;
        thetas.push(t);
        values.push(x);
    }
    if thetas.len() != meta.n_samples {
        return Err(parse_err(
            path,
            lines.len(),
            format!("expected {} samples, found {}", meta.n_samples, thetas.len()),
        ));
    }
    Ok((HomodyneTrace::from_parts(meta, thetas, values), hash))
}

/// Sidecar header path of a binary trace data file.
pub fn binary_sidecar_path(data_path: &Path) -> std::path::PathBuf {
    let mut os = data_path.as_os_str().to_owned();
    os.push(".meta");
    os.into()
}

/// Writes the binary variant: raw little-endian f64 pairs (θ then x,
/// interleaved) plus the same header in a `.meta` sidecar.
pub fn write_trace_binary(
    trace: &HomodyneTrace,
    data_path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let data_path = data_path.as_ref();
    let mut sidecar = fs::File::create(binary_sidecar_path(data_path))?;
    for (k, v) in meta_header_pairs(&trace.meta, config_hash) {
        writeln!(sidecar, "{k} = {v}")?;
    }
    let mut w = BufWriter::new(fs::File::create(data_path)?);
    for (&t, &x) in trace.thetas().iter().zip(trace.values()) {
        w.write_all(&t.to_le_bytes())?;
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a binary trace from its data file and `.meta` sidecar.
pub fn read_trace_binary(data_path: impl AsRef<Path>) -> Result<(HomodyneTrace, Option<String>)> {
    let data_path = data_path.as_ref();
    let sidecar = binary_sidecar_path(data_path);
    let lines: Vec<String> = BufReader::new(fs::File::open(&sidecar)?)
        .lines()
        .collect::<std::io::Result<_>>()?;
    let (kv, _) = parse_header(&sidecar, &lines)?;
    let (meta, hash) = meta_from_header(&sidecar, &kv)?;
    let mut bytes = Vec::new();
    fs::File::open(data_path)?.read_to_end(&mut bytes)?;
    if bytes.len() != meta.n_samples * 16 {
        return Err(parse_err(
            data_path,
            0,
            format!(
                "expected {} bytes of sample data, found {}",
                meta.n_samples * 16,
                bytes.len()
            ),
        ));
    }
    let mut thetas = Vec::with_capacity(meta.n_samples);
    let mut values = Vec::with_capacity(meta.n_samples);
    for pair in bytes.chunks_exact(16) {
        thetas.push(f64::from_le_bytes(pair[0..8].try_into().unwrap()));
        values.push(f64::from_le_bytes(pair[8..16].try_into().unwrap()));
    }
    Ok((HomodyneTrace::from_parts(meta, thetas, values), hash))
}

/// Writes a reconstructed CM as a key-value document: entries row-major at
/// 15 significant digits, per-entry standard errors, scheme, physicality
/// flag, Gaussianity summary and calibration scale.
pub fn write_cm_document(
    rec: &ReconstructedCM,
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path.as_ref())?);
    writeln!(w, "format_version = {FORMAT_VERSION}")?;
    writeln!(w, "kind = covariance_matrix")?;
    if let Some(h) = config_hash {
        writeln!(w, "config_hash = {h}")?;
    }
    writeln!(w, "scheme = {}", rec.scheme)?;
    writeln!(
        w,
        "modes = {}",
        rec.mode_inventory
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    )?;
    writeln!(w, "calibration_scale = {}", rec.calibration_scale)?;
    writeln!(w, "physical = {}", rec.physical)?;
    for i in 0..4 {
        for j in 0..4 {
            writeln!(w, "sigma_{}{} = {}", i + 1, j + 1, sig15(rec.cm.entry(i, j)))?;
        }
    }
    for i in 0..4 {
        for j in 0..4 {
            writeln!(
                w,
                "err_{}{} = {}",
                i + 1,
                j + 1,
                sig15(rec.entry_errors[(i, j)])
            )?;
        }
    }
    writeln!(w, "source_14 = {}", rec.entry_sources[0][3])?;
    writeln!(w, "source_23 = {}", rec.entry_sources[1][2])?;
    for g in &rec.gaussianity {
        writeln!(w, "gauss_{}_max_excess = {}", g.mode, g.max_abs_excess)?;
        writeln!(w, "gauss_{}_pass = {}", g.mode, g.pass)?;
    }
    w.flush()?;
    Ok(())
}

fn source_from_str(s: &str) -> EstimateSource {
    match s {
        "phase-jitter" => EstimateSource::PhaseJitter,
        "combined" => EstimateSource::Combined,
        _ => EstimateSource::Statistical,
    }
}

/// Reads a CM document back; errors and annotations missing from the file
/// default to zero / statistical.
pub fn read_cm_document(
    path: impl AsRef<Path>,
) -> Result<(ReconstructedCM, Option<String>)> {
    let path = path.as_ref();
    let lines: Vec<String> = BufReader::new(fs::File::open(path)?)
        .lines()
        .collect::<std::io::Result<_>>()?;
    let (kv, _) = parse_header(path, &lines)?;
    check_version(path, &kv)?;
    let mut m = Matrix4::zeros();
    let mut errs = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            m[(i, j)] = kv.require_f64(path, &format!("sigma_{}{}", i + 1, j + 1))?;
            errs[(i, j)] = kv.f64_or(path, &format!("err_{}{}", i + 1, j + 1), 0.0)?;
        }
    }
    let cm = CovarianceMatrix::new(m)?;
    let scheme: Scheme = kv.get("scheme").unwrap_or("six").parse()?;
    let mut sources = [[EstimateSource::Statistical; 4]; 4];
    if let Some(s) = kv.get("source_14") {
        sources[0][3] = source_from_str(s);
        sources[3][0] = sources[0][3];
    }
    if let Some(s) = kv.get("source_23") {
        sources[1][2] = source_from_str(s);
        sources[2][1] = sources[1][2];
    }
    let mode_inventory = match kv.get("modes") {
        Some(list) => list
            .split_ascii_whitespace()
            .map(|s| s.parse::<ModeLabel>())
            .collect::<Result<Vec<_>>>()?,
        None => scheme.required_modes().to_vec(),
    };
    let mut gaussianity = Vec::new();
    for mode in ModeLabel::ALL {
        if let Some(excess) = kv.get(&format!("gauss_{mode}_max_excess")) {
            let max_abs_excess = excess
                .parse::<f64>()
                .map_err(|e| parse_err(path, 0, format!("bad gaussianity entry: {e}")))?;
            let pass = kv.get(&format!("gauss_{mode}_pass")) == Some("true");
            gaussianity.push(GaussianitySummary {
                mode,
                max_abs_excess,
                pass,
            });
        }
    }
    let physical = match kv.get("physical") {
        Some(v) => v == "true",
        None => crate::gaussian::is_physical(&cm),
    };
    Ok((
        ReconstructedCM {
            cm,
            entry_errors: errs,
            entry_sources: sources,
            scheme,
            mode_inventory,
            gaussianity,
            calibration_scale: kv.f64_or(path, "calibration_scale", 1.0)?,
            physical,
        },
        kv.get("config_hash").map(str::to_string),
    ))
}

/// Flat key-value pairs of an entanglement report, for the report document.
pub fn report_pairs(report: &EntanglementReport) -> Vec<(String, String)> {
    let mut pairs = vec![
        ("nu_minus".to_string(), sig15(report.nu_minus)),
        ("nu_tilde_minus".to_string(), sig15(report.nu_tilde_minus)),
        (
            "log_negativity_nats".to_string(),
            sig15(report.log_negativity),
        ),
        ("eof_ebits".to_string(), sig15(report.eof)),
        ("duan_value".to_string(), sig15(report.duan_value)),
        ("duan_bound".to_string(), sig15(report.duan_bound)),
        ("epr_a_given_b".to_string(), sig15(report.epr_a_given_b)),
        ("epr_b_given_a".to_string(), sig15(report.epr_b_given_a)),
        ("epr_bound".to_string(), sig15(report.epr_bound)),
        ("purity".to_string(), sig15(report.purity)),
    ];
    if let Some(e) = report.errors {
        pairs.push(("nu_minus_err".to_string(), sig15(e.nu_minus)));
        pairs.push(("nu_tilde_minus_err".to_string(), sig15(e.nu_tilde_minus)));
        pairs.push(("log_negativity_err".to_string(), sig15(e.log_negativity)));
        pairs.push(("duan_value_err".to_string(), sig15(e.duan_value)));
    }
    pairs
}

/// Writes a generic key-value document with the standard prelude.
pub fn write_kv_document(
    path: impl AsRef<Path>,
    kind: &str,
    config_hash: Option<&str>,
    pairs: &[(String, String)],
    footer_comments: &[String],
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path.as_ref())?);
    writeln!(w, "format_version = {FORMAT_VERSION}")?;
    writeln!(w, "kind = {kind}")?;
    if let Some(h) = config_hash {
        writeln!(w, "config_hash = {h}")?;
    }
    for (k, v) in pairs {
        writeln!(w, "{k} = {v}")?;
    }
    for c in footer_comments {
        writeln!(w, "# {c}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a generic key-value document into a map (version checked).
pub fn read_kv_document(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let lines: Vec<String> = BufReader::new(fs::File::open(path)?)
        .lines()
        .collect::<std::io::Result<_>>()?;
    let (kv, _) = parse_header(path, &lines)?;
    check_version(path, &kv)?;
    Ok(kv
        .map
        .into_iter()
        .map(|(k, (_, v))| (k, v))
        .collect())
}

fn table_prelude(w: &mut impl Write, kind: &str, config_hash: Option<&str>) -> Result<()> {
    writeln!(w, "# kind = {kind}")?;
    writeln!(w, "# format_version = {FORMAT_VERSION}")?;
    if let Some(h) = config_hash {
        writeln!(w, "# config_hash = {h}")?;
    }
    Ok(())
}

/// Tab-separated table `n p` of a single-mode photon distribution.
pub fn write_single_distribution_table(
    dist: &SingleModeDistribution,
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path.as_ref())?);
    table_prelude(&mut w, "photon_distribution", config_hash)?;
    writeln!(w, "# truncation_deficit = {}", dist.truncation_deficit)?;
    writeln!(w, "n\tp")?;
    for (n, p) in dist.probabilities.iter().enumerate() {
        writeln!(w, "{n}\t{p}")?;
    }
    w.flush()?;
    Ok(())
}

/// Tab-separated table `n m p` of a joint photon distribution.
pub fn write_joint_distribution_table(
    dist: &JointDistribution,
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path.as_ref())?);
    table_prelude(&mut w, "joint_photon_distribution", config_hash)?;
    writeln!(w, "# truncation_deficit = {}", dist.truncation_deficit)?;
    writeln!(w, "n\tm\tp")?;
    for n in 0..=dist.n_max() {
        for m in 0..=dist.n_max() {
            writeln!(w, "{n}\t{m}\t{}", dist.prob(n, m))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Wigner function sampled on a square grid of `n × n` points spanning
/// [−half_width, half_width]².
pub fn write_wigner_grid(
    mode: &SingleModeCM,
    half_width: f64,
    n: usize,
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let axis: Vec<f64> = (0..n)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
        .collect();
    let points: Vec<(f64, f64)> = axis
        .iter()
        .flat_map(|&x| axis.iter().map(move |&y| (x, y)))
        .collect();
    let values = mode.wigner(&points)?;
    let mut w = BufWriter::new(fs::File::create(path.as_ref())?);
    table_prelude(&mut w, "wigner_grid", config_hash)?;
    writeln!(w, "x\ty\tw")?;
    for ((x, y), v) in points.iter().zip(values) {
        writeln!(w, "{x}\t{y}\t{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Quadrature variance versus LO phase for one mode, `n` points over [0, 2π).
pub fn write_variance_vs_theta(
    mode: &SingleModeCM,
    n: usize,
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path.as_ref())?);
    table_prelude(&mut w, "variance_vs_theta", config_hash)?;
    writeln!(w, "theta\tvariance")?;
    for i in 0..n {
        let theta = std::f64::consts::TAU * i as f64 / n as f64;
        writeln!(w, "{theta}\t{}", mode.quadrature_variance(theta))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::{simulate_vacuum_trace, NoiseModel};

    #[test]
    fn text_trace_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vac.trace");
        let trace = simulate_vacuum_trace(&NoiseModel::reference(), 5000, 99);
        write_trace_text(&trace, &path, Some("deadbeef")).unwrap();
        let (back, hash) = read_trace_text(&path).unwrap();
        assert_eq!(hash.as_deref(), Some("deadbeef"));
        assert_eq!(back.values(), trace.values());
        assert_eq!(back.thetas(), trace.thetas());
        assert_eq!(back.meta, trace.meta);
    }

    #[test]
    fn binary_trace_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vac.f64");
        let trace = simulate_vacuum_trace(&NoiseModel::reference(), 5000, 7);
        write_trace_binary(&trace, &path, None).unwrap();
        let (back, hash) = read_trace_binary(&path).unwrap();
        assert_eq!(hash, None);
        assert_eq!(back.values(), trace.values());
        assert_eq!(back.thetas(), trace.thetas());
        assert_eq!(back.meta, trace.meta);
    }

    #[test]
    fn version_mismatch_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.trace");
        let trace = simulate_vacuum_trace(&NoiseModel::ideal(), 10, 1);
        write_trace_text(&trace, &path, None).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("format_version = 1", "format_version = 99");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            read_trace_text(&path),
            Err(Error::FormatVersion { .. })
        ));
    }

    #[test]
    fn cm_document_round_trips() {
        use crate::opo::{self, OpoParams};
        use crate::tomography::{assemble_cm, mode_moments, Scheme};
        use std::collections::BTreeMap;

        let cm = opo::build_opo_state(&OpoParams::reference()).unwrap();
        let noise = NoiseModel::ideal();
        let mut moments = BTreeMap::new();
        for mode in ModeLabel::ALL {
            let t = crate::homodyne::simulate_trace(&cm, mode, &noise, 20_000, 3).unwrap();
            moments.insert(mode, mode_moments(&t, &noise).unwrap());
        }
        let rec = assemble_cm(&moments, Scheme::Six, 0.02).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cm.txt");
        write_cm_document(&rec, &path, Some("cafe")).unwrap();
        let (back, hash) = read_cm_document(&path).unwrap();
        assert_eq!(hash.as_deref(), Some("cafe"));
        assert_eq!(back.scheme, rec.scheme);
        assert_eq!(back.physical, rec.physical);
        assert_eq!(back.entry_sources[0][3], rec.entry_sources[0][3]);
        for i in 0..4 {
            for j in 0..4 {
                assert!((back.cm.entry(i, j) - rec.cm.entry(i, j)).abs() < 1e-13);
                assert!((back.entry_errors[(i, j)] - rec.entry_errors[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn report_document_round_trips() {
        use crate::entanglement::full_report;
        use crate::opo::{self, OpoParams};

        let cm = opo::build_opo_state(&OpoParams::reference()).unwrap();
        let report = full_report(&cm, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.txt");
        write_kv_document(
            &path,
            "entanglement_report",
            None,
            &report_pairs(&report),
            &[],
        )
        .unwrap();
        let map = read_kv_document(&path).unwrap();
        let nu: f64 = map["nu_minus"].parse().unwrap();
        assert!((nu - report.nu_minus).abs() < 1e-13);
        assert_eq!(map["kind"], "entanglement_report");
    }

    #[test]
    fn tables_are_written() {
        use crate::fock;
        let dir = tempfile::tempdir().unwrap();
        let d = fock::single_mode_distribution(&SingleModeCM::vacuum(), 5).unwrap();
        write_single_distribution_table(&d, dir.path().join("pn.tsv"), None).unwrap();
        let j = fock::joint_distribution(&CovarianceMatrix::vacuum(), 4).unwrap();
        write_joint_distribution_table(&j, dir.path().join("pnm.tsv"), None).unwrap();
        write_wigner_grid(
            &SingleModeCM::vacuum(),
            4.0,
            21,
            dir.path().join("wig.tsv"),
            Some("ff"),
        )
        .unwrap();
        write_variance_vs_theta(&SingleModeCM::vacuum(), 32, dir.path().join("var.tsv"), None)
            .unwrap();
        let text = fs::read_to_string(dir.path().join("wig.tsv")).unwrap();
        assert!(text.contains("config_hash = ff"));
        assert_eq!(text.lines().count(), 4 + 21 * 21);
    }
}
