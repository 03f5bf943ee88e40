//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use isoball_core::chart::StarDomainChart;
use isoball_core::comparison::{euclidean_ball_ratio, ComparisonModel};
use isoball_core::explorer::{
    continuity_probe, gap_search, hyperbolic_sweep, random_subharmonic_conformal, ProbeFamily, SearchFamily,
};
use isoball_core::geodesic::{pullback_at, shoot_ray, NormalFrame, ShootOptions};
use isoball_core::isoperimetry::{certify, chart_field, verify_theorem, IsoConfig, IsoReport};
use isoball_core::lemma::{run_suite, SuiteConfig};
use isoball_core::linalg::Vector;
use isoball_core::metric::{MetricField, MetricSpec, TermSpec};
use isoball_core::quadrature::gauss_legendre;
use isoball_core::report::to_json;
use isoball_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIELDS: usize = 50;
const FIELD_SEED: u64 = 20_240_601;
const JACOBI_POINTS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Conformal fields of criterion 4 with their reports.
struct Sampled {
    specs: Vec<MetricSpec>,
    reports: Vec<IsoReport>,
    charts: Vec<StarDomainChart>,
    elapsed: Duration,
}

fn sampled_fields() -> isoball_core::Result<Sampled> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(FIELD_SEED);
    let cfg = IsoConfig::default();
    let mut out = Sampled {
        specs: Vec::new(),
        reports: Vec::new(),
        charts: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for _ in 0..FIELDS {
        let (_, spec) = random_subharmonic_conformal(&mut rng, 0.05);
        let field = MetricField::from_spec(spec.clone())?;
        out.reports.push(verify_theorem(&field, &cfg)?);
        out.charts.push(chart_field(&field, &cfg)?);
        out.specs.push(spec);
    }
    out.elapsed = start.elapsed();
    Ok(out)
}

fn euclidean_baseline() -> isoball_core::Result<Outcome> {
    let mut detail = Vec::new();
    let mut pass = true;
    for (n, expect, tol) in [(2, 4.0 * PI, 1e-8), (3, 36.0 * PI, 1e-6)] {
        let start = Instant::now();
        let r = verify_theorem(&MetricField::euclidean(n), &IsoConfig::default())?;
        let secs = start.elapsed().as_secs_f64();
        let err = rel(r.ratio, expect);
        pass &= err <= tol && secs < 5.0 && rel(euclidean_ball_ratio(n), expect) < 1e-15;
        detail.push(format!("n={n} rel err {err:.1e} in {secs:.2}s"));
    }
    Ok(outcome(pass, detail.join("; ")))
}

/// Constant-curvature charts for criteria 2 and 7.
fn hyperbolic_charts() -> isoball_core::Result<Vec<StarDomainChart>> {
    [2, 3]
        .iter()
        .map(|&n| chart_field(&MetricField::constant_curvature(n, -1.0)?, &IsoConfig::default()))
        .collect()
}

fn engine_fidelity(charts: &[StarDomainChart]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for chart in charts {
        let n = chart.dimension();
        let model = ComparisonModel::new(-1.0, n);
        let f_err = chart.f.iter().map(|f| (f - 1.0).abs()).fold(0.0, f64::max);
        let mut j_err = 0.0_f64;
        let mut nodes = 0;
        for s in chart.rays.iter().flatten().chain(&chart.boundary) {
            j_err = j_err.max(rel(s.jacobian, model.jacobian(s.t)));
            nodes += 1;
        }
        pass &= f_err <= 1e-10 && j_err <= 1e-8;
        detail.push(format!(
            "n={n}: {nodes} nodes, max rel J err {j_err:.1e}, max |f-1| {f_err:.1e}"
        ));
    }
    outcome(pass, detail.join("; "))
}

fn hyperbolic_note() -> isoball_core::Result<Outcome> {
    let radii = [0.2, 0.4, 0.6, 0.8, 1.0];
    let coarse = IsoConfig {
        circle_points: Some(64),
        radial_nodes: Some(16),
        ..IsoConfig::default()
    };
    let sweep = hyperbolic_sweep(-1.0, &radii, 2, Some(&coarse))?;
    let (s, c) = (1.0_f64.sinh(), 1.0_f64.cosh());
    let closed = (2.0 * PI * s).powi(2) / (2.0 * PI * (c - 1.0));
    let end_err = rel(sweep.ratios[radii.len() - 1], closed);
    let small = hyperbolic_sweep(-1.0, &[0.001], 2, None)?.ratios[0];
    let small_err = (small - 4.0 * PI).abs();
    let engine = sweep.max_engine_deviation.unwrap_or(f64::INFINITY);
    let pass =
        sweep.monotone_verdict && sweep.below_unit_verdict && end_err <= 1e-6 && small_err <= 1e-3 && engine < 1e-8;
    Ok(outcome(
        pass,
        format!(
            "ratios {:?}, end rel err {end_err:.1e} vs {closed:.6}, |I(0.001)-4pi| {small_err:.1e}, engine dev {engine:.1e}",
            sweep.ratios.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    ))
}

fn theorem_sample(s: &Sampled) -> Outcome {
    let four_pi = 4.0 * PI;
    let mut bad = Vec::new();
    let mut min_gap = f64::INFINITY;
    let mut min_rho = f64::INFINITY;
    for (i, r) in s.reports.iter().enumerate() {
        let l = &r.lambda.lambda;
        let ok = r.ratio >= four_pi - 1e-6 && r.min_rho() >= 1.0 - 1e-7 && l[l.len() - 1] >= l[0] - 1e-9;
        min_gap = min_gap.min(r.ratio - four_pi);
        min_rho = min_rho.min(r.min_rho());
        if !ok {
            bad.push(i);
        }
    }
    let secs = s.elapsed.as_secs_f64();
    outcome(
        bad.is_empty() && secs < 600.0,
        format!(
            "{} fields, min I-4pi {min_gap:.3e}, min rho {min_rho:.9}, failing {bad:?}, {secs:.1}s",
            s.reports.len()
        ),
    )
}

fn lambda_consistency(s: &Sampled) -> Outcome {
    let mut fd = 0.0_f64;
    let mut endpoint = 0.0_f64;
    for r in &s.reports {
        fd = fd.max(r.max_lambda_prime_mismatch);
        endpoint = endpoint.max(rel(r.lambda_zero_power, r.model.ratio));
    }
    outcome(
        fd <= 1e-6 && endpoint <= 1e-8,
        format!("max rel lambda' vs FD {fd:.1e}; max rel |lambda(0)^(n-1) - I(Omega_delta)| {endpoint:.1e}"),
    )
}

fn lemma_suite() -> isoball_core::Result<Outcome> {
    let rep = run_suite(&SuiteConfig::default())?;
    let pass = rep.pairs == 1000
        && rep.passed()
        && rep.det_failures == 0
        && rep.weighted_failures == 0
        && rep.equality_pairs > 0
        && rep.equality_branch_hits == rep.equality_pairs;
    Ok(outcome(
        pass,
        format!(
            "{} pairs, {} vectors, {} failures, equality branch {}/{}, worst det margin {:.1e}, worst weighted margin {:.1e}",
            rep.pairs,
            rep.vectors,
            rep.failures(),
            rep.equality_branch_hits,
            rep.equality_pairs,
            rep.worst_det_margin,
            rep.worst_weighted_margin
        ),
    ))
}

/// Smallest increment of `J_ḡ(tθ)/J_k(t)` along rays, in increasing `t`.
fn rauch_slack(chart: &StarDomainChart) -> f64 {
    let mut worst = f64::INFINITY;
    for (ray, b) in chart.rays.iter().zip(&chart.boundary) {
        let ratios: Vec<f64> = ray
            .iter()
            .chain(std::iter::once(b))
            .map(|s| s.jacobian / chart.model.jacobian(s.t))
            .collect();
        for w in ratios.windows(2) {
            worst = worst.min(w[1] - w[0]);
        }
    }
    worst
}

fn comparison_lemma(hyperbolic: &[StarDomainChart], s: &Sampled) -> isoball_core::Result<Outcome> {
    let rauch = hyperbolic
        .iter()
        .chain(&s.charts)
        .map(rauch_slack)
        .fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(FIELD_SEED + 1);
    let per_field = JACOBI_POINTS / s.specs.len();
    let mut min_eig = f64::INFINITY;
    let mut points = 0;
    for spec in &s.specs {
        let field = MetricField::from_spec(spec.clone())?;
        let frame = NormalFrame::build(&field)?;
        let model = ComparisonModel::new(field.curvature_ceiling(), 2);
        let radial = gauss_legendre(4);
        for _ in 0..per_field / 10 {
            let phi = rng.gen_range(0.0..2.0 * PI);
            let theta: Vector = [phi.cos(), phi.sin(), 0.0];
            let ray = shoot_ray(&field, &frame, &theta, &radial, &ShootOptions::default(), true)?;
            for _ in 0..10 {
                let t = rng.gen_range(0.0..1.0) * ray.exit_length;
                if t <= 0.0 {
                    continue;
                }
                let p = pullback_at(&field, &ray, t)?;
                min_eig = min_eig.min(p.gbar.sub(&model.delta_k_tensor(&p.x)).min_eigenvalue());
                points += 1;
            }
        }
    }
    Ok(outcome(
        rauch >= -1e-8 && min_eig >= -1e-7 && points >= JACOBI_POINTS,
        format!("min Rauch ratio increment {rauch:.1e}; min eig(gbar - delta^k) {min_eig:.1e} over {points} points"),
    ))
}

fn continuity() -> isoball_core::Result<Outcome> {
    let family = ProbeFamily::ConformalAmplitude {
        terms: vec![TermSpec::poly(vec![0.0, 1.0, 0.5, 0.5, 0.0, 0.25])],
    };
    let scales: Vec<f64> = (0..6).map(|j| 0.08 / f64::from(1 << j)).collect();
    let probe = continuity_probe(&family, &scales, &IsoConfig::default())?;
    let strict = probe.c1.windows(2).all(|w| w[1] < w[0]);
    Ok(outcome(
        strict && probe.verdict,
        format!(
            "C1 distances {:?}, rates {:?}",
            probe.c1.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            probe.rates.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    ))
}

fn negative_control() -> isoball_core::Result<Outcome> {
    // u = -(x² + y²)/20: Δu < 0, so K = -e^{-2u}Δu > 0
    let field = MetricField::conformal2d(vec![TermSpec::poly(vec![0.0, 0.0, 0.0, -0.05, 0.0, -0.05])])?;
    let cert = certify(&field, &IsoConfig::default());
    let json = to_json(&cert)?;
    let named = json.contains("worst_point") && json.contains("worst_value") && cert.worst_point.len() == 2;
    let rejected = matches!(
        verify_theorem(&field, &IsoConfig::default()),
        Err(Error::CertificationFailed { worst, ref point, .. }) if worst > 0.0 && point.len() == 2
    );
    Ok(outcome(
        !cert.passed && rejected && named,
        format!("worst K {:.4e} at {:?}", cert.worst_value, cert.worst_point),
    ))
}

/// Artifacts from a reduced rerun of criteria 3, 4, 6, 8 and the search.
fn artifacts() -> isoball_core::Result<Vec<String>> {
    let cfg = IsoConfig {
        circle_points: Some(64),
        radial_nodes: Some(16),
        step: 1.0 / 128.0,
        ..IsoConfig::default()
    };
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(FIELD_SEED);
    for _ in 0..3 {
        let (_, spec) = random_subharmonic_conformal(&mut rng, 0.05);
        let r = verify_theorem(&MetricField::from_spec(spec)?, &cfg)?;
        out.push(to_json(&r)?);
        out.push(r.theta_csv());
        out.push(r.lambda_csv());
    }
    out.push(hyperbolic_sweep(-1.0, &[0.5, 1.0], 2, Some(&cfg))?.to_csv());
    out.push(to_json(&run_suite(&SuiteConfig {
        pairs: 100,
        ..SuiteConfig::default()
    })?)?);
    let probe = continuity_probe(&ProbeFamily::ConstantCurvature { n: 2 }, &[0.2, 0.1], &cfg)?;
    out.push(to_json(&probe)?);
    let search = gap_search(&SearchFamily::default(), 12, 5, &cfg)?;
    out.push(to_json(&search)?);
    Ok(out)
}

fn determinism() -> isoball_core::Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(2)
        .build()
        .expect("thread pool");
    let a = pool.install(artifacts)?;
    let b = pool.install(artifacts)?;
    let bytes: usize = a.iter().map(String::len).sum();
    Ok(outcome(
        a == b,
        format!("{} artifacts, {bytes} bytes, identical: {}", a.len(), a == b),
    ))
}

fn report(index: usize, name: &str, result: isoball_core::Result<Outcome>) -> bool {
    let o = result.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    println!(
        "criterion {index:>2} [{}] {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o.pass
}

fn main() {
    let mut all = true;
    all &= report(1, "Euclidean baseline", euclidean_baseline());
    let hyperbolic = hyperbolic_charts();
    all &= report(
        2,
        "constant-curvature engine fidelity",
        hyperbolic.as_ref().map(|c| engine_fidelity(c)).map_err(clone_err),
    );
    all &= report(3, "hyperbolic ball sweep", hyperbolic_note());
    let sampled = sampled_fields();
    all &= report(
        4,
        "sampled local isoperimetric inequality",
        sampled.as_ref().map(theorem_sample).map_err(clone_err),
    );
    all &= report(
        5,
        "lambda self-consistency",
        sampled.as_ref().map(lambda_consistency).map_err(clone_err),
    );
    all &= report(6, "matrix comparison property suite", lemma_suite());
    let c7 = match (&hyperbolic, &sampled) {
        (Ok(h), Ok(s)) => comparison_lemma(h, s),
        (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
    };
    all &= report(7, "Rauch and Jacobi comparison", c7);
    all &= report(8, "radial-function continuity probe", continuity());
    all &= report(9, "positive-curvature negative control", negative_control());
    all &= report(10, "determinism", determinism());
    if !all {
        std::process::exit(1);
    }
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidArgument(e.to_string())
}
