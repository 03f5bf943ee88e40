//! One function per subcommand. Each writes `<name>.json` and its tables.

use std::path::Path;

use isoball_core::explorer::{continuity_probe, gap_search, hyperbolic_sweep};
use isoball_core::isoperimetry::{certify, chart_field, ratio_report, verify_theorem, IsoReport};
use isoball_core::lemma::run_suite;
use isoball_core::metric::curvature::{boundary_second_fundamental_form, BoundaryShape};
use isoball_core::metric::sampling::sphere_points;
use isoball_core::metric::MetricField;
use isoball_core::report::{num, table, to_json};
use isoball_core::Error;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Command, Failure};

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    subcommand: &'a str,
    passed: bool,
    config: &'a RunConfig,
    result: T,
}

fn write(out: &Path, file: &str, text: &str) -> Result<(), Failure> {
    std::fs::write(out.join(file), text).map_err(|e| Failure::Engine(Error::Io(e)))
}

fn emit<T: Serialize>(out: &Path, cmd: Command, cfg: &RunConfig, passed: bool, result: T) -> Result<(), Failure> {
    let name = cmd.name();
    let text = to_json(&Artifact {
        subcommand: name,
        passed,
        config: cfg,
        result,
    })?;
    write(out, &format!("{name}.json"), &text)?;
    println!("{name}: {}", if passed { "PASS" } else { "FAIL" });
    if passed {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn field(cmd: Command, cfg: &RunConfig) -> Result<MetricField, Failure> {
    let spec = cfg
        .metric
        .clone()
        .ok_or_else(|| Failure::Usage(format!("`{}` needs a `metric` entry in the config", cmd.name())))?;
    Ok(MetricField::from_spec(spec)?)
}

fn report_tables(out: &Path, report: &IsoReport) -> Result<(), Failure> {
    write(out, "theta.csv", &report.theta_csv())?;
    write(out, "lambda.csv", &report.lambda_csv())
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    match cmd {
        Command::Ratio => {
            let report = ratio_report(&field(cmd, cfg)?, &cfg.iso)?;
            println!(
                "ratio {} (Euclidean ball {})",
                num(report.ratio),
                num(report.euclidean_ball_ratio)
            );
            report_tables(out, &report)?;
            let passed = report.verdicts.all_pass();
            emit(out, cmd, cfg, passed, &report)
        }
        Command::Verify => {
            let report = verify_theorem(&field(cmd, cfg)?, &cfg.iso)?;
            report_tables(out, &report)?;
            let passed = report.verdicts.all_pass();
            emit(out, cmd, cfg, passed, &report)
        }
        Command::Chart => {
            let chart = chart_field(&field(cmd, cfg)?, &cfg.iso)?;
            write(out, "chart.csv", &chart.to_csv())?;
            #[derive(Serialize)]
            struct Summary {
                n: usize,
                directions: usize,
                mean_radius: f64,
                min_f: f64,
                max_f: f64,
                max_tangency_defect: f64,
                gradient_rule: isoball_core::chart::GradientRule,
            }
            let summary = Summary {
                n: chart.dimension(),
                directions: chart.len(),
                mean_radius: chart.mean_radius(),
                min_f: chart.f.iter().copied().fold(f64::INFINITY, f64::min),
                max_f: chart.f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                max_tangency_defect: chart.max_tangency_defect(),
                gradient_rule: chart.gradient_rule,
            };
            emit(out, cmd, cfg, true, summary)
        }
        Command::Lambda => {
            let report = ratio_report(&field(cmd, cfg)?, &cfg.iso)?;
            write(out, "lambda.csv", &report.lambda_csv())?;
            let v = &report.verdicts;
            let passed = v.lambda_monotone && v.lambda_derivative && v.lambda_endpoint;
            #[derive(Serialize)]
            struct Summary<'a> {
                lambda_zero_power: f64,
                lambda_one_power: f64,
                max_lambda_prime_mismatch: f64,
                lambda_monotone: bool,
                lambda_derivative: bool,
                lambda_endpoint: bool,
                curve: &'a isoball_core::isoperimetry::LambdaCurve,
            }
            let summary = Summary {
                lambda_zero_power: report.lambda_zero_power,
                lambda_one_power: report.lambda_one_power,
                max_lambda_prime_mismatch: report.max_lambda_prime_mismatch,
                lambda_monotone: v.lambda_monotone,
                lambda_derivative: v.lambda_derivative,
                lambda_endpoint: v.lambda_endpoint,
                curve: &report.lambda,
            };
            emit(out, cmd, cfg, passed, summary)
        }
        Command::Curvature => {
            let cert = certify(&field(cmd, cfg)?, &cfg.iso);
            let passed = cert.passed;
            match emit(out, cmd, cfg, passed, &cert) {
                Err(Failure::Verdict) => Err(Failure::Engine(cert.into_result().unwrap_err())),
                r => r,
            }
        }
        Command::Convexity => {
            let f = field(cmd, cfg)?;
            let n = f.dimension();
            let shapes = sphere_points(n, cfg.convexity.points)
                .iter()
                .map(|x| boundary_second_fundamental_form(&f, x))
                .collect::<Result<Vec<BoundaryShape>, Error>>()?;
            let axes = ["x", "y", "z"];
            let mut header: Vec<String> = axes[..n].iter().map(|a| a.to_string()).collect();
            header.extend((1..n).map(|i| format!("kappa_{i}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let csv = table(
                &header,
                shapes
                    .iter()
                    .map(|s| s.point.iter().chain(&s.principal_curvatures).map(|&v| num(v)).collect()),
            );
            write(out, "convexity.csv", &csv)?;
            #[derive(Serialize)]
            struct Summary {
                samples: usize,
                min_principal_curvature: f64,
                max_principal_curvature: f64,
                strictly_convex: bool,
            }
            let all = shapes.iter().flat_map(|s| s.principal_curvatures.iter().copied());
            let summary = Summary {
                samples: shapes.len(),
                min_principal_curvature: all.clone().fold(f64::INFINITY, f64::min),
                max_principal_curvature: all.fold(f64::NEG_INFINITY, f64::max),
                strictly_convex: shapes.iter().all(|s| s.positive_definite),
            };
            let passed = summary.strictly_convex;
            emit(out, cmd, cfg, passed, summary)
        }
        Command::SweepHyperbolic => {
            let s = &cfg.sweep;
            let sweep = hyperbolic_sweep(s.k, &s.radii, s.n, s.engine_check.then_some(&cfg.iso))?;
            write(out, "sweep.csv", &sweep.to_csv())?;
            let passed = sweep.monotone_verdict
                && sweep.below_unit_verdict
                && sweep.max_engine_deviation.is_none_or(|d| d <= s.tol_engine);
            emit(out, cmd, cfg, passed, &sweep)
        }
        Command::ProbeContinuity => {
            let probe = continuity_probe(&cfg.probe.family, &cfg.probe.scales, &cfg.iso)?;
            write(out, "probe.csv", &probe.to_csv())?;
            let passed = probe.verdict;
            emit(out, cmd, cfg, passed, &probe)
        }
        Command::Search => {
            let run = gap_search(&cfg.search.family, cfg.search.budget, cfg.seed, &cfg.iso)?;
            write(out, "search.csv", &run.to_csv())?;
            if let Some(g) = run.best_gap() {
                println!("best gap {} after {} evaluations", num(g), run.budget_spent);
            }
            let passed = run.alarms.is_empty();
            emit(out, cmd, cfg, passed, &run)
        }
        Command::LemmaLa => {
            let rep = run_suite(&cfg.lemma)?;
            println!(
                "pairs {} vectors {} failures {} (det {}, weighted {}, equality branch {}/{})",
                rep.pairs,
                rep.vectors,
                rep.failures(),
                rep.det_failures,
                rep.weighted_failures,
                rep.equality_branch_hits,
                rep.equality_pairs
            );
            let passed = rep.passed();
            emit(out, cmd, cfg, passed, &rep)
        }
    }
}
