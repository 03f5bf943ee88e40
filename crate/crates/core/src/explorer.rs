//! Batch experiments: hyperbolic radius sweeps, continuity probes of the
//! radial function, and a derivative-free search for negative isoperimetric
//! gaps over curvature-constrained conformal families.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::StarDomainChart;
use crate::comparison::{euclidean_ball_ratio, ComparisonModel};
use crate::error::{Error, Result};
use crate::isoperimetry::{certify, chart_field, ratio_report, IsoConfig};
use crate::linalg::norm;
use crate::metric::curvature::CurvatureCertificate;
use crate::metric::families::{Polynomial, ScalarJet};
use crate::metric::sampling::closed_ball_grid;
use crate::metric::{MetricField, MetricSpec, TermSpec};
use crate::report::{num, table};

// ---------------------------------------------------------------------------
// hyperbolic sweep

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub k: f64,
    pub n: usize,
    pub radii: Vec<f64>,
    /// Closed-form `I(B_{g_r})`.
    pub ratios: Vec<f64>,
    /// The same ratios through the geodesic engine, when requested.
    pub engine_ratios: Option<Vec<f64>>,
    pub max_engine_deviation: Option<f64>,
    /// Strictly increasing in `r`.
    pub monotone_verdict: bool,
    /// `I(B_{g_r}) < I(B_{g_1})` for every `r < 1` in the sweep.
    pub below_unit_verdict: bool,
    pub euclidean_ratio: f64,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        table(
            &["radius", "ratio", "engine_ratio"],
            (0..self.radii.len()).map(|i| {
                vec![
                    num(self.radii[i]),
                    num(self.ratios[i]),
                    self.engine_ratios.as_ref().map(|e| num(e[i])).unwrap_or_default(),
                ]
            }),
        )
    }
}

/// Isoperimetric ratio of the geodesic ball of radius `r` in the
/// constant-curvature-`k` space form: `|S^{n-1}| sn_k(r)^{n(n-1)} / 𝒥_k(r)^{n-1}`.
pub fn constant_curvature_ball_ratio(k: f64, n: usize, r: f64) -> f64 {
    let m = ComparisonModel::new(k, n);
    let vol = m.j_script_closed_form(r).unwrap_or_else(|| m.j_script(r));
    let sn = m.sn(r);
    m.sphere_area() * sn.powi((n * (n - 1)) as i32) / vol.powi(n as i32 - 1)
}

pub fn hyperbolic_sweep(k: f64, radii: &[f64], n: usize, engine: Option<&IsoConfig>) -> Result<SweepResult> {
    if !(k < 0.0) {
        return Err(Error::InvalidArgument("sweep needs k < 0".into()));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidArgument("radii must lie in (0, 1]".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("radii must be strictly increasing".into()));
    }
    let ratios: Vec<f64> = radii.iter().map(|&r| constant_curvature_ball_ratio(k, n, r)).collect();
    let unit = constant_curvature_ball_ratio(k, n, 1.0);
    let engine_ratios = match engine {
        Some(cfg) => {
            let out = radii
                .iter()
                .map(|&r| {
                    let cfg = IsoConfig {
                        model_k: Some(k * r * r),
                        certify: false,
                        ..cfg.clone()
                    };
                    // (Bⁿ, g_r) is homothetic to the unit ball of curvature k r²
                    let field = MetricField::constant_curvature(n, k * r * r)?;
                    Ok(ratio_report(&field, &cfg)?.ratio)
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(out)
        }
        None => None,
    };
    let max_engine_deviation = engine_ratios.as_ref().map(|e| {
        e.iter()
            .zip(&ratios)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max)
    });
    Ok(SweepResult {
        k,
        n,
        radii: radii.to_vec(),
        monotone_verdict: ratios.windows(2).all(|w| w[1] > w[0]),
        below_unit_verdict: radii.iter().zip(&ratios).all(|(&r, &i)| r >= 1.0 || i < unit),
        ratios,
        engine_ratios,
        max_engine_deviation,
        euclidean_ratio: euclidean_ball_ratio(n),
    })
}

// ---------------------------------------------------------------------------
// continuity probe

/// One-parameter families `ε ↦ g_ε` approaching a target at `ε = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeFamily {
    /// `g_ε = e^{2εu}δ` for a fixed `u` given by its terms.
    ConformalAmplitude { terms: Vec<TermSpec> },
    /// Constant curvature `k = −ε` in normal coordinates.
    ConstantCurvature { n: usize },
}

impl ProbeFamily {
    pub fn dimension(&self) -> usize {
        match self {
            ProbeFamily::ConformalAmplitude { .. } => 2,
            ProbeFamily::ConstantCurvature { n } => *n,
        }
    }

    pub fn member(&self, eps: f64) -> Result<MetricField> {
        match self {
            ProbeFamily::ConformalAmplitude { terms } => {
                let scaled = terms
                    .iter()
                    .map(|t| {
                        let mut t = t.clone();
                        match t.kind {
                            crate::metric::TermKind::Poly => t.coeffs.iter_mut().for_each(|c| *c *= eps),
                            crate::metric::TermKind::Bump => t.coeffs[0] *= eps,
                        }
                        t
                    })
                    .collect();
                MetricField::conformal2d(scaled)
            }
            ProbeFamily::ConstantCurvature { n } => MetricField::constant_curvature(*n, -eps),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub family: ProbeFamily,
    pub scales: Vec<f64>,
    /// `sup |f_ε − f_0|`
    pub c0: Vec<f64>,
    /// `max(sup |f_ε − f_0|, sup |∇f_ε − ∇f_0|)` with the spherical gradient.
    pub c1: Vec<f64>,
    /// `log₂` of consecutive C¹ distance ratios divided by `log₂` of the scale ratios.
    pub rates: Vec<f64>,
    /// Distances strictly decrease (or are both below `1e-12`).
    pub decreasing: bool,
    pub verdict: bool,
}

impl ProbeResult {
    pub fn to_csv(&self) -> String {
        table(
            &["scale", "c0_distance", "c1_distance"],
            (0..self.scales.len()).map(|i| vec![num(self.scales[i]), num(self.c0[i]), num(self.c1[i])]),
        )
    }
}

const PROBE_ZERO: f64 = 1e-12;

/// `(sup |f − f'|, sup |∇_S f − ∇_S f'|)` on a common grid; the stored
/// gradient is `∇_S f / f`.
pub fn radial_distance(a: &StarDomainChart, b: &StarDomainChart) -> Result<(f64, f64)> {
    if a.grid.layout != b.grid.layout {
        return Err(Error::InvalidArgument("charts use different grids".into()));
    }
    let n = a.dimension();
    let mut c0 = 0.0_f64;
    let mut c1 = 0.0_f64;
    for i in 0..a.len() {
        c0 = c0.max((a.f[i] - b.f[i]).abs());
        let d: Vec<f64> = (0..n)
            .map(|j| a.grad_f[i][j] * a.f[i] - b.grad_f[i][j] * b.f[i])
            .collect();
        c1 = c1.max(d.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok((c0, c1))
}

/// Radial-function distances from `g_ε` to `g_0` for decreasing `ε`.
pub fn continuity_probe(family: &ProbeFamily, scales: &[f64], config: &IsoConfig) -> Result<ProbeResult> {
    let target = chart_field(&family.member(0.0)?, config)?;
    let mut c0 = Vec::with_capacity(scales.len());
    let mut c1 = Vec::with_capacity(scales.len());
    for &eps in scales {
        let chart = chart_field(&family.member(eps)?, config)?;
        let (a, b) = radial_distance(&chart, &target)?;
        c0.push(a);
        c1.push(a.max(b));
    }
    let rates = (1..scales.len())
        .map(|j| (c1[j - 1] / c1[j]).log2() / (scales[j - 1] / scales[j]).log2())
        .collect();
    let decreasing = c1
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] <= PROBE_ZERO && w[1] <= PROBE_ZERO));
    let vanishing = scales.iter().zip(&c1).all(|(&s, &d)| s != 0.0 || d <= PROBE_ZERO);
    Ok(ProbeResult {
        family: family.clone(),
        scales: scales.to_vec(),
        c0,
        c1,
        rates,
        decreasing,
        verdict: decreasing && vanishing,
    })
}

// ---------------------------------------------------------------------------
// subharmonic conformal parameterization

/// Number of search parameters of the conformal family.
pub const CONFORMAL_PARAMS: usize = 7;

/// `u = a r² + b₁x + b₂y + c₁(x² − y²) + 2c₂xy + d₁(x³ − 3xy²) + d₂(3x²y − y³)`
/// from `p = [a, b₁, b₂, c₁, c₂, d₁, d₂]`: harmonic apart from `a r²`, so
/// `Δu = 4a` and `a ≥ 0` gives curvature `−e^{−2u}Δu ≤ 0`.
pub fn conformal_coeffs(p: &[f64]) -> Vec<f64> {
    let [a, b1, b2, c1, c2, d1, d2] = [p[0], p[1], p[2], p[3], p[4], p[5], p[6]];
    // 1, x, y, x², xy, y², x³, x²y, xy², y³
    vec![0.0, b1, b2, a + c1, 2.0 * c2, a - c1, d1, 3.0 * d2, -3.0 * d1, -d2]
}

pub fn conformal_from_params(p: &[f64]) -> MetricSpec {
    MetricSpec::conformal2d(vec![TermSpec::poly(conformal_coeffs(p))])
}

/// `max_{|α| ≤ 2} sup_B |∂^α u|`, sampled on the closed unit ball.
pub fn c2_norm(n: usize, coeffs: &[f64]) -> f64 {
    let poly = Polynomial::from_graded(n, coeffs);
    closed_ball_grid(n, 2000, 400)
        .iter()
        .map(|x| {
            let j: ScalarJet = poly.jet(x);
            let mut m = j.value.abs();
            for i in 0..n {
                m = m.max(j.grad[i].abs());
                for k in 0..n {
                    m = m.max(j.hess[i][k].abs());
                }
            }
            m
        })
        .fold(0.0, f64::max)
}

/// A random subharmonic conformal field with `|u|_{C²}` at most `bound`.
/// The `r²` weight is drawn from `[0.25, 1]` relative to the harmonic part so
/// every sample is strictly negatively curved.
pub fn random_subharmonic_conformal(rng: &mut impl Rng, bound: f64) -> (Vec<f64>, MetricSpec) {
    let mut p = [0.0; CONFORMAL_PARAMS];
    p[0] = rng.gen_range(0.25..1.0);
    for v in p.iter_mut().skip(1) {
        *v = rng.gen_range(-1.0..1.0);
    }
    let target = bound * rng.gen_range(0.5..0.98);
    let scale = target / c2_norm(2, &conformal_coeffs(&p));
    let p: Vec<f64> = p.iter().map(|v| v * scale).collect();
    let spec = conformal_from_params(&p);
    (p, spec)
}

// ---------------------------------------------------------------------------
// gap search

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchKind {
    /// No free parameters: the Euclidean disk.
    Euclidean,
    /// The seven-parameter conformal family of [`conformal_coeffs`].
    Conformal2d,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchFamily {
    pub kind: SearchKind,
    /// Parameter box half-width.
    pub box_size: f64,
    /// Keep the `r²` weight nonnegative (`Δu ≥ 0`). Off for negative controls.
    pub enforce_subharmonic: bool,
    pub restarts: usize,
    pub tol_gap: f64,
}

impl Default for SearchFamily {
    fn default() -> Self {
        SearchFamily {
            kind: SearchKind::Conformal2d,
            box_size: 0.05,
            enforce_subharmonic: true,
            restarts: 3,
            tol_gap: 1e-6,
        }
    }
}

impl SearchFamily {
    fn dim(&self) -> usize {
        match self.kind {
            SearchKind::Euclidean => 0,
            SearchKind::Conformal2d => CONFORMAL_PARAMS,
        }
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        if i == 0 && self.enforce_subharmonic {
            (0.0, self.box_size)
        } else {
            (-self.box_size, self.box_size)
        }
    }

    fn project(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(i, &v)| {
                let (lo, hi) = self.bounds(i);
                v.clamp(lo, hi)
            })
            .collect()
    }

    pub fn spec(&self, p: &[f64]) -> MetricSpec {
        match self.kind {
            SearchKind::Euclidean => MetricSpec::euclidean(2),
            SearchKind::Conformal2d => conformal_from_params(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    pub restart: usize,
    pub params: Vec<f64>,
    pub feasible: bool,
    /// Largest sampled curvature and the ceiling it was checked against.
    pub worst_curvature: f64,
    pub gap: Option<f64>,
    /// Set when the evaluation failed for a reason other than curvature.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub params: Vec<f64>,
    pub certificate: CurvatureCertificate,
}

/// Self-contained record of a feasible iterate whose gap fell below `−tol_gap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub evaluation: Evaluation,
    pub metric: MetricSpec,
    pub certificate: CurvatureCertificate,
    pub ratio: f64,
    pub euclidean_ratio: f64,
    pub family: SearchFamily,
    pub config: IsoConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRun {
    pub family: SearchFamily,
    pub budget: usize,
    pub seed: u64,
    pub evaluations: Vec<Evaluation>,
    pub best: Option<Evaluation>,
    pub rejections: Vec<Rejection>,
    pub alarms: Vec<Alarm>,
    pub budget_spent: usize,
    pub config: IsoConfig,
}

impl SearchRun {
    pub fn best_gap(&self) -> Option<f64> {
        self.best.as_ref().and_then(|e| e.gap)
    }

    pub fn to_csv(&self) -> String {
        let dim = self.family.dim();
        let mut header = vec![
            "index".to_string(),
            "restart".into(),
            "feasible".into(),
            "worst_curvature".into(),
            "gap".into(),
        ];
        header.extend((0..dim).map(|i| format!("p{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        table(
            &header,
            self.evaluations.iter().map(|e| {
                let mut row = vec![
                    e.index.to_string(),
                    e.restart.to_string(),
                    e.feasible.to_string(),
                    num(e.worst_curvature),
                    e.gap.map(num).unwrap_or_default(),
                ];
                row.extend(e.params.iter().map(|&v| num(v)));
                row
            }),
        )
    }
}

struct Evaluator<'a> {
    family: &'a SearchFamily,
    config: &'a IsoConfig,
    run: SearchRun,
}

impl Evaluator<'_> {
    fn remaining(&self) -> usize {
        self.run.budget - self.run.budget_spent
    }

    /// Evaluate a batch of points concurrently and log them in order. Returns
    /// objective values (`+∞` when rejected).
    fn eval_batch(&mut self, points: &[Vec<f64>], restart: usize) -> Vec<f64> {
        let take = points.len().min(self.remaining());
        let fam = self.family;
        let cfg = self.config;
        let results: Vec<_> = points[..take]
            .par_iter()
            .map(|p| {
                let spec = fam.spec(p);
                let field = MetricField::from_spec(spec.clone())?;
                let cert = certify(&field, cfg);
                if !cert.passed {
                    return Ok((spec, cert, None));
                }
                let report = ratio_report(&field, cfg)?;
                Ok((spec, cert, Some(report.ratio)))
            })
            .collect::<Vec<Result<(MetricSpec, CurvatureCertificate, Option<f64>)>>>();
        let reference = euclidean_ball_ratio(2);
        let mut values = Vec::with_capacity(points.len());
        for (p, r) in points.iter().zip(results) {
            let index = self.run.budget_spent;
            self.run.budget_spent += 1;
            let mut ev = Evaluation {
                index,
                restart,
                params: p.clone(),
                feasible: false,
                worst_curvature: f64::NAN,
                gap: None,
                error: None,
            };
            match r {
                Ok((spec, cert, ratio)) => {
                    ev.worst_curvature = cert.worst_value;
                    match ratio {
                        None => self.run.rejections.push(Rejection {
                            index,
                            params: p.clone(),
                            certificate: cert,
                        }),
                        Some(ratio) => {
                            ev.feasible = true;
                            let gap = ratio - reference;
                            ev.gap = Some(gap);
                            if gap < -fam.tol_gap {
                                self.run.alarms.push(Alarm {
                                    evaluation: ev.clone(),
                                    metric: spec,
                                    certificate: cert,
                                    ratio,
                                    euclidean_ratio: reference,
                                    family: fam.clone(),
                                    config: cfg.clone(),
                                });
                            }
                        }
                    }
                }
                Err(e) => ev.error = Some(e.to_string()),
            }
            let value = ev.gap.unwrap_or(f64::INFINITY);
            let better = match (&self.run.best, ev.gap) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(b), Some(g)) => g < b.gap.unwrap_or(f64::INFINITY),
            };
            if better {
                self.run.best = Some(ev.clone());
            }
            self.run.evaluations.push(ev);
            values.push(value);
        }
        values
    }
}

/// Nelder-Mead coefficients: reflection, expansion, contraction, shrink.
const NM_ALPHA: f64 = 1.0;
const NM_GAMMA: f64 = 2.0;
const NM_RHO: f64 = 0.5;
const NM_SIGMA: f64 = 0.5;

/// One simplex run from `start` with at most `limit` evaluations.
fn nelder_mead(ev: &mut Evaluator, start: Vec<f64>, restart: usize, limit: usize) {
    let fam = ev.family;
    let d = start.len();
    let stop_at = ev.run.budget_spent + limit.min(ev.remaining());
    let mut simplex = vec![start.clone()];
    for i in 0..d {
        let (lo, hi) = fam.bounds(i);
        let step = 0.25 * (hi - lo);
        let mut p = start.clone();
        p[i] = if p[i] + step <= hi { p[i] + step } else { p[i] - step };
        simplex.push(p);
    }
    let mut values = ev.eval_batch(&simplex, restart);
    if values.len() < simplex.len() {
        return;
    }
    let size_tol = 1e-6 * fam.box_size;
    while ev.run.budget_spent < stop_at {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = (0..=d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| (simplex[i][j] - simplex[0][j]).abs())
            .fold(0.0, f64::max);
        if spread < size_tol || (values[d].is_finite() && values[d] - values[0] < 1e-12) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            fam.project(
                &(0..d)
                    .map(|j| centroid[j] + t * (simplex[d][j] - centroid[j]))
                    .collect::<Vec<_>>(),
            )
        };
        let xr = along(-NM_ALPHA);
        let Some(&fr) = ev.eval_batch(std::slice::from_ref(&xr), restart).first() else {
            break;
        };
        if fr < values[0] {
            let xe = along(-NM_ALPHA * NM_GAMMA);
            let Some(&fe) = ev.eval_batch(std::slice::from_ref(&xe), restart).first() else {
                break;
            };
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, outside) = if fr < values[d] {
            (along(-NM_RHO), true)
        } else {
            (along(NM_RHO), false)
        };
        let Some(&fc) = ev.eval_batch(std::slice::from_ref(&xc), restart).first() else {
            break;
        };
        if (outside && fc <= fr) || (!outside && fc < values[d]) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        let shrunk: Vec<Vec<f64>> = simplex[1..]
            .iter()
            .map(|p| {
                fam.project(
                    &(0..d)
                        .map(|j| simplex[0][j] + NM_SIGMA * (p[j] - simplex[0][j]))
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let vals = ev.eval_batch(&shrunk, restart);
        if vals.len() < shrunk.len() {
            break;
        }
        for (i, (p, v)) in shrunk.into_iter().zip(vals).enumerate() {
            simplex[i + 1] = p;
            values[i + 1] = v;
        }
    }
}

/// Minimize `I(B_g) − I(B_δ)` over the family box with restarts. Curvature
/// infeasible samples are rejected (objective `+∞`) and logged. Deterministic
/// in `seed` and `budget`.
pub fn gap_search(family: &SearchFamily, budget: usize, seed: u64, config: &IsoConfig) -> Result<SearchRun> {
    config.validate()?;
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    if !(family.box_size > 0.0) || !(family.tol_gap > 0.0) {
        return Err(Error::InvalidArgument("box_size and tol_gap must be positive".into()));
    }
    let config = IsoConfig {
        model_k: Some(0.0),
        ..config.clone()
    };
    let mut ev = Evaluator {
        family,
        config: &config,
        run: SearchRun {
            family: family.clone(),
            budget,
            seed,
            evaluations: Vec::new(),
            best: None,
            rejections: Vec::new(),
            alarms: Vec::new(),
            budget_spent: 0,
            config: config.clone(),
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = family.dim();
    if d == 0 {
        ev.eval_batch(&[Vec::new()], 0);
    } else {
        let starts = family.restarts + 1;
        for r in 0..starts {
            if ev.remaining() == 0 {
                break;
            }
            let start: Vec<f64> = (0..d)
                .map(|i| {
                    let (lo, hi) = family.bounds(i);
                    rng.gen_range(lo..=hi)
                })
                .collect();
            let share = ev.remaining() / (starts - r);
            nelder_mead(&mut ev, start, r, share.max(d + 1));
        }
    }
    if ev.run.best.is_none() {
        return Err(Error::NoFeasibleSample);
    }
    Ok(ev.run)
}

/// Sup distance of the radial function from the mean, used by
/// tests and reports.
pub fn radial_spread(chart: &StarDomainChart) -> f64 {
    let r = chart.mean_radius();
    chart.f.iter().map(|f| (f - r).abs()).fold(0.0, f64::max)
}

/// Largest Euclidean norm of the stored boundary gradient.
pub fn max_gradient(chart: &StarDomainChart) -> f64 {
    chart
        .grad_f
        .iter()
        .map(|g| norm(chart.dimension(), g))
        .fold(0.0, f64::max)
}
