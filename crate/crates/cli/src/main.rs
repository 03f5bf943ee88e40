//! `isoball`: batch driver for the isoperimetric verification engine.
//!
//! Every run writes `<subcommand>.json` (result, verdict and the effective
//! configuration) plus any CSV tables into `--out`. Exit status is 0 when
//! every verdict passes, 2 on a failed verdict or numerical failure, and 1 on
//! a usage or configuration error; failures also write `error.json`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isoball_core::report::to_json;
use isoball_core::Error;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "isoball",
    version,
    about = "Numerical checks of the local isoperimetric inequality"
)]
struct Cli {
    /// JSON run configuration; defaults apply to omitted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel maps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized subcommands; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplier on the default quadrature grids; overrides the config.
    #[arg(long = "grid-scale", global = true)]
    grid_scale: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Isoperimetric ratio report for one field.
    Ratio,
    /// Curvature certification plus the full inequality chain.
    Verify,
    /// Dump the star-shaped domain chart.
    Chart,
    /// The interpolation curve λ(t) and its derivative.
    Lambda,
    /// Sampled curvature-ceiling certificate.
    Curvature,
    /// Second fundamental form of the boundary sphere.
    Convexity,
    /// Ratios of hyperbolic balls against their radius.
    SweepHyperbolic,
    /// Radial-function distances along a family approaching its limit.
    ProbeContinuity,
    /// Derivative-free search for a negative isoperimetric gap.
    Search,
    /// Randomized matrix-comparison property suite.
    LemmaLa,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ratio => "ratio",
            Command::Verify => "verify",
            Command::Chart => "chart",
            Command::Lambda => "lambda",
            Command::Curvature => "curvature",
            Command::Convexity => "convexity",
            Command::SweepHyperbolic => "sweep-hyperbolic",
            Command::ProbeContinuity => "probe-continuity",
            Command::Search => "search",
            Command::LemmaLa => "lemma-la",
        }
    }
}

/// Why a run did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    /// The run completed but a verdict failed; artifacts are already written.
    Verdict,
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::Json(_) => Failure::Usage(e.to_string()),
            e => Failure::Engine(e),
        }
    }
}

#[derive(Serialize)]
struct ErrorArtifact<'a> {
    subcommand: Option<&'a str>,
    kind: &'static str,
    exit_code: u8,
    message: String,
    /// Certification witness when the failure is a curvature rejection.
    witness: Option<Witness>,
    config: Option<&'a RunConfig>,
}

#[derive(Serialize)]
struct Witness {
    point: Vec<f64>,
    value: f64,
    ceiling: f64,
}

fn write_error(out: &Path, artifact: &ErrorArtifact) {
    let _ = std::fs::create_dir_all(out);
    if let Ok(text) = to_json(artifact) {
        let _ = std::fs::write(out.join("error.json"), text);
    }
}

/// `--out` as given on a command line clap could not parse.
fn out_from_raw(args: &[String]) -> PathBuf {
    for (i, a) in args.iter().enumerate() {
        if let Some(v) = a.strip_prefix("--out=") {
            return PathBuf::from(v);
        }
        if a == "--out" {
            if let Some(v) = args.get(i + 1) {
                return PathBuf::from(v);
            }
        }
    }
    PathBuf::from("out")
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.lemma.seed = cfg.seed;
    if let Some(s) = cli.grid_scale {
        cfg.iso.grid_scale = s;
    }
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            write_error(
                &out_from_raw(&args),
                &ErrorArtifact {
                    subcommand: None,
                    kind: "usage",
                    exit_code: 1,
                    message: e.kind().to_string(),
                    witness: None,
                    config: None,
                },
            );
            return ExitCode::from(1);
        }
    };
    let name = cli.command.name();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(f) => return fail(&cli.out, name, None, f),
    };
    if let Some(w) = cli.workers {
        if w == 0 {
            return fail(
                &cli.out,
                name,
                Some(&config),
                Failure::Usage("--workers must be positive".into()),
            );
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            return fail(&cli.out, name, Some(&config), Failure::Usage(e.to_string()));
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        return fail(
            &cli.out,
            name,
            Some(&config),
            Failure::Usage(format!("cannot create {}: {e}", cli.out.display())),
        );
    }
    match commands::run(cli.command, &config, &cli.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(&cli.out, name, Some(&config), f),
    }
}

fn fail(out: &Path, name: &str, config: Option<&RunConfig>, failure: Failure) -> ExitCode {
    let (kind, code, message, witness) = match failure {
        Failure::Usage(m) => ("usage", 1, m, None),
        Failure::Verdict => ("verdict_failed", 2, "one or more verdicts failed".to_string(), None),
        Failure::Engine(Error::CertificationFailed { worst, point, ceiling }) => {
            let message = Error::CertificationFailed {
                worst,
                point: point.clone(),
                ceiling,
            }
            .to_string();
            (
                "certification_failed",
                2,
                message,
                Some(Witness {
                    point,
                    value: worst,
                    ceiling,
                }),
            )
        }
        Failure::Engine(e) => ("numerical", 2, e.to_string(), None),
    };
    eprintln!("isoball {name}: {message}");
    write_error(
        out,
        &ErrorArtifact {
            subcommand: Some(name),
            kind,
            exit_code: code,
            message,
            witness,
            config,
        },
    );
    ExitCode::from(code)
}
