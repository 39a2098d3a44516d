//! `optomagnon` command-line interface.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure,
//! 3 validation failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use optomagnon::config::{load_config, parse_config, Config, RunMetadata};
use optomagnon::dynamics::{build_drift_matrix, stability_analysis, Stability};
use optomagnon::spectrum::{to_decibels, uniform_grid, SpectrumEngine, SpectrumResult};
use optomagnon::steady_state::{solve_steady_state, SteadyState};
use optomagnon::sweep::{self, metadata_path, run_sweep, OutputFormat};
use optomagnon::validate::{validate, ValidationReport, DEFAULT_SEED};
use optomagnon::Error;

#[derive(Parser)]
#[command(
    name = "optomagnon",
    version,
    about = "Squeezed-light spectra of a cavity magnomechanical system"
)]
struct Cli {
    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Output format; commands that only produce JSON reject `csv`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct ConfigArg {
    /// TOML configuration file; omitted keys take the reference values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<Config, Error> {
        match &self.config {
            Some(path) => load_config(path),
            None => parse_config(""),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mean fields, effective detunings and couplings.
    Steady(ConfigArg),
    /// Drift-matrix eigenvalues (units of omega_b) and stability margin.
    Stability(ConfigArg),
    /// Output quadrature spectrum on a frequency grid.
    Spectrum {
        #[command(flatten)]
        config: ConfigArg,
        /// Lowest frequency, units of omega_b.
        #[arg(long, default_value_t = 0.01)]
        omega_min: f64,
        /// Highest frequency, units of omega_b.
        #[arg(long, default_value_t = 1.5)]
        omega_max: f64,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        /// Homodyne phase in units of pi; defaults to the configured phase.
        #[arg(long)]
        phi_pi: Option<f64>,
    },
    /// Parameter sweep described by the `[sweep]` section of the config.
    Sweep(ConfigArg),
    /// Invariant and oracle checks; exits with 3 if any fails.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() || matches!(e, Error::Io(_)) {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

#[derive(Serialize)]
struct SteadyOutput<'a> {
    #[serde(flatten)]
    steady: &'a SteadyState,
    metadata: RunMetadata,
}

#[derive(Serialize)]
struct StabilityOutput<'a> {
    #[serde(flatten)]
    stability: &'a Stability,
    metadata: RunMetadata,
}

#[derive(Serialize)]
struct SpectrumOutput<'a> {
    phi: f64,
    #[serde(flatten)]
    result: &'a SpectrumResult,
    #[serde(rename = "S_dB")]
    s_db: Vec<Option<f64>>,
    s_min_db: Option<f64>,
    bandwidth_hz: f64,
    metadata: RunMetadata,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Validation) => {
            eprintln!("validation failed");
            ExitCode::from(3)
        }
    }
}

fn json_only(cli: &Cli, command: &str) -> Result<(), Failure> {
    if cli.format == Some(Format::Csv) {
        return Err(Failure::Config(format!("`{command}` only produces JSON")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Steady(c) => {
            json_only(cli, "steady")?;
            let cfg = c.load()?;
            let ss = solve_steady_state(&cfg.params)?;
            let out = SteadyOutput {
                steady: &ss,
                metadata: cfg.metadata(),
            };
            write_output(cli.out.as_deref(), &to_json(&out), None)
        }
        Command::Stability(c) => {
            json_only(cli, "stability")?;
            let cfg = c.load()?;
            let ss = solve_steady_state(&cfg.params)?;
            let st = stability_analysis(&build_drift_matrix(&cfg.params, &ss))?;
            let out = StabilityOutput {
                stability: &st,
                metadata: cfg.metadata(),
            };
            write_output(cli.out.as_deref(), &to_json(&out), None)
        }
        Command::Spectrum {
            config,
            omega_min,
            omega_max,
            points,
            phi_pi,
        } => {
            let cfg = config.load()?;
            if *points < 1 || !(omega_min.is_finite() && omega_max.is_finite()) {
                return Err(Failure::Config(
                    "need --points >= 1 and finite bounds".into(),
                ));
            }
            if *points > 1 && !(omega_min < omega_max) {
                return Err(Failure::Config("need --omega-min < --omega-max".into()));
            }
            let mut params = cfg.params.clone();
            if let Some(p) = phi_pi {
                params.phi = p * std::f64::consts::PI;
            }
            let ss = solve_steady_state(&params)?;
            let st = stability_analysis(&build_drift_matrix(&params, &ss))?;
            if !st.stable {
                return Err(Failure::Numerical(format!(
                    "drift matrix is not Hurwitz (margin {:.3e} omega_b); no stationary spectrum",
                    st.margin
                )));
            }
            let engine = SpectrumEngine::new(&params, &ss)?;
            let result = engine.curve(&uniform_grid(*omega_min, *omega_max, *points))?;
            let metadata = RunMetadata::new(&params, &cfg.constant_overrides);
            eprintln!(
                "min S = {:.6} at omega = {:.4} omega_b, band {:?}",
                result.s_min, result.omega_at_min, result.band
            );
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut text = String::from("omega_over_omega_b,S,S_dB\n");
                    for (w, s) in result.omegas.iter().zip(&result.values) {
                        let db = to_decibels(*s)
                            .map(|d| format!("{d:.16e}"))
                            .unwrap_or_default();
                        text.push_str(&format!("{w:.16e},{s:.16e},{db}\n"));
                    }
                    write_output(cli.out.as_deref(), &text, Some(&metadata))
                }
                Format::Json => {
                    let out = SpectrumOutput {
                        phi: params.phi,
                        s_db: result.values.iter().map(|s| to_decibels(*s).ok()).collect(),
                        s_min_db: result.s_min_db().ok(),
                        bandwidth_hz: result.bandwidth_angular().hz(),
                        result: &result,
                        metadata,
                    };
                    write_output(cli.out.as_deref(), &to_json(&out), None)
                }
            }
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let spec = cfg
                .sweep
                .clone()
                .ok_or_else(|| Failure::Config("configuration has no [sweep] section".into()))?;
            let format = cli.format.map_or(spec.output.format, OutputFormat::from);
            let path = cli.out.clone().or_else(|| spec.output.path.clone());
            let result = run_sweep(&spec, &cfg.params, &cfg.constant_overrides, cli.workers)?;
            if let Some(min) = result.minimum() {
                eprintln!(
                    "{} cells, {} unstable, {} failed; min S = {:.6} at axis1 = {:.6}{}",
                    result.rows.len(),
                    result.unstable_count(),
                    result.error_count(),
                    min.s.unwrap_or(f64::NAN),
                    min.axis1,
                    min.axis2
                        .map(|v| format!(", axis2 = {v:.6}"))
                        .unwrap_or_default()
                );
            }
            match path {
                Some(p) => sweep::emit(&result, format, &p)?,
                None => {
                    if format == OutputFormat::Csv {
                        eprintln!("{}", to_json(&result.metadata));
                    }
                    write_output(None, &sweep::render(&result, format), None)?;
                }
            }
            Ok(())
        }
        Command::Validate { config, seed } => {
            json_only(cli, "validate")?;
            let cfg = config.load()?;
            let report: ValidationReport = validate(&cfg.params, *seed);
            #[derive(Serialize)]
            struct Out<'a> {
                #[serde(flatten)]
                report: &'a ValidationReport,
                metadata: RunMetadata,
            }
            let out = Out {
                report: &report,
                metadata: cfg.metadata(),
            };
            write_output(cli.out.as_deref(), &to_json(&out), None)?;
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Validation)
            }
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// Writes `text` to `path` or stdout. CSV files get a `.meta.json` companion
/// when `metadata` is given.
fn write_output(
    path: Option<&Path>,
    text: &str,
    metadata: Option<&RunMetadata>,
) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text)?;
            if let Some(meta) = metadata {
                std::fs::write(metadata_path(p), to_json(meta))?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if let Some(meta) = metadata {
                eprintln!("{}", to_json(meta));
            }
        }
    }
    Ok(())
}
