//! twinbeam: simulate the two-mode entangled output of a below-threshold
//! OPO, synthesize single-homodyne acquisitions, reconstruct the full
//! covariance matrix through the six auxiliary modes, and compute the
//! entanglement and photon-number characterization.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::TraceFormat;
use config::RunConfig;
use twinbeam_core::tomography::Scheme;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;
pub const EXIT_UNPHYSICAL: i32 = 4;

/// An error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn missing_input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MISSING_INPUT,
            message: message.into(),
        }
    }

    fn other(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Six,
    #[value(name = "five-drop-f")]
    FiveDropF,
    #[value(name = "five-drop-e")]
    FiveDropE,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Six => Scheme::Six,
            SchemeArg::FiveDropF => Scheme::FiveDropF,
            SchemeArg::FiveDropE => Scheme::FiveDropE,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "twinbeam",
    version,
    about = "Twin-beam OPO simulation and single-homodyne covariance-matrix tomography",
    long_about = "Simulates the two-mode entangled output of a below-threshold OPO, \
                  synthesizes phase-ramped single-homodyne acquisitions of the six \
                  measurement modes, reconstructs the full 4x4 covariance matrix with \
                  error bars, and computes the entanglement and photon-number \
                  characterization.\n\n\
                  Config file: `key = value` lines, `#` comments. Keys: n1, n2, \
                  squeeze_r | squeeze_photons, squeeze_phase, xi1_r, xi1_phase, xi2_r, \
                  xi2_phase, mix_angle, mix_phase, eta_channel, eta, \
                  electronic_noise_db, n_samples, seed, scheme, n_max, \
                  phase_jitter_rms, inject_jitter_rms, out_dir.\n\n\
                  Exit codes: 0 success; 2 configuration error; 3 missing or \
                  mismatched input; 4 completed but the covariance matrix is \
                  unphysical; 1 other failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the six mode traces plus the vacuum calibration run
    Simulate {
        /// Run configuration file
        #[arg(long)]
        config: PathBuf,
        /// Output directory for traces and manifest
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Trace file format
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Reconstruct the covariance matrix from a directory of traces
    Reconstruct {
        /// Directory holding mode_*.trace (or .f64) and vacuum.trace
        #[arg(long)]
        traces: PathBuf,
        /// Output directory for the CM document
        #[arg(long)]
        out: PathBuf,
        /// Mode set to use
        #[arg(long, value_enum, default_value = "six")]
        scheme: SchemeArg,
        /// Override the detection efficiency recorded in the traces
        #[arg(long)]
        eta: Option<f64>,
        /// LO phase stability fed into the error model, radians
        #[arg(long, default_value_t = 0.02)]
        jitter: f64,
        /// Phase bins for the Gaussianity check
        #[arg(long, default_value_t = 100)]
        kurtosis_bins: usize,
    },
    /// Analyze a covariance-matrix document
    Analyze {
        /// CM document produced by reconstruct
        #[arg(long)]
        cm: PathBuf,
        /// Output directory for the report and tables
        #[arg(long)]
        out: PathBuf,
        /// Photon-number truncation
        #[arg(long, default_value_t = 40)]
        nmax: usize,
    },
    /// simulate + reconstruct + analyze in one output directory
    Pipeline {
        /// Run configuration file
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides out_dir from the config)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config scheme
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        /// Override the config photon-number truncation
        #[arg(long)]
        nmax: Option<usize>,
        /// Trace file format
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
}

fn run() -> Result<i32, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            format,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = Some(s);
            }
            commands::cmd_simulate(&cfg, &out, trace_format(format))?;
            Ok(0)
        }
        Command::Reconstruct {
            traces,
            out,
            scheme,
            eta,
            jitter,
            kurtosis_bins,
        } => {
            let rec =
                commands::cmd_reconstruct(&traces, &out, scheme.into(), eta, jitter, kurtosis_bins)?;
            Ok(if rec.physical { 0 } else { EXIT_UNPHYSICAL })
        }
        Command::Analyze { cm, out, nmax } => {
            let physical = commands::cmd_analyze(&cm, &out, nmax)?;
            Ok(if physical { 0 } else { EXIT_UNPHYSICAL })
        }
        Command::Pipeline {
            config,
            out,
            seed,
            scheme,
            nmax,
            format,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = Some(s);
            }
            if let Some(s) = scheme {
                cfg.scheme = s.into();
            }
            if let Some(n) = nmax {
                cfg.n_max = n;
            }
            let out = out
                .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
                .ok_or_else(|| {
                    CliError::config("no output directory: pass --out or set out_dir")
                })?;
            let physical = commands::cmd_pipeline(&cfg, &out, trace_format(format))?;
            Ok(if physical { 0 } else { EXIT_UNPHYSICAL })
        }
    }
}

fn trace_format(f: FormatArg) -> TraceFormat {
    match f {
        FormatArg::Text => TraceFormat::Text,
        FormatArg::Binary => TraceFormat::Binary,
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => {
            eprintln!("twinbeam: completed with flag (exit {code})");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("twinbeam: error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
