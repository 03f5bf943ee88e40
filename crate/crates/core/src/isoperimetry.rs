//! Volume, perimeter and isoperimetric ratio of a charted domain `Ω_ḡ`, the
//! boundary-Jacobian ratio `ρ(θ) = J_ḡ(f(θ)θ)/J_k(f(θ))`, and the curve
//!
//! ```text
//! λ(t) = (∫ √(ρ^{2t} + |∇ᵏf|²_k) J_k(f) f^{n-1} dθ)^{n/(n-1)} / ∫ ρ^t 𝒥_k(f) dθ
//! ```
//!
//! interpolating between `λ(0)^{n-1} = I(Ω_{δᵏ})` and a lower bound
//! `λ(1)^{n-1} ≤ I(Ω_ḡ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{GradientRule, StarDomainChart};
use crate::comparison::euclidean_ball_ratio;
use crate::error::{Error, Result};
use crate::geodesic::{radial_chart, ChartOptions, ShootOptions, DEFAULT_MAX_LENGTH, DEFAULT_STEP};
use crate::linalg::{dot, norm, Vector};
use crate::metric::curvature::{certify_nonpositive, CurvatureCertificate, TOL_CURV};
use crate::metric::sampling::closed_ball_grid;
use crate::metric::{MetricField, MetricSpec};
use crate::quadrature::{GridLayout, SphereGrid, DEFAULT_AZIMUTHAL, DEFAULT_CIRCLE, DEFAULT_POLAR, DEFAULT_RADIAL};
use crate::report::{num, table};

pub const DEFAULT_T_POINTS: usize = 33;
/// `|I(Ω_ḡ) − I(Ω_{δᵏ})|` below which the rigidity diagnostic fires.
pub const EQUALITY_TOL: f64 = 1e-7;
/// `ρ ∈ [1 − RHO_CLAMP, 1)` is read as 1 inside `λ′`.
pub const RHO_CLAMP: f64 = 1e-7;
/// Step of the centred difference that cross-checks `λ′`.
pub const LAMBDA_FD_STEP: f64 = 1e-2;

/// Run parameters for the isoperimetric pipeline. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsoConfig {
    /// Multiplier on the default sphere and radial resolutions.
    pub grid_scale: f64,
    pub circle_points: Option<usize>,
    pub polar: Option<usize>,
    pub azimuthal: Option<usize>,
    pub radial_nodes: Option<usize>,
    pub step: f64,
    pub max_length: f64,
    /// Comparison curvature; the field's claimed ceiling if absent.
    pub model_k: Option<f64>,
    pub gradient: Option<GradientRule>,
    pub t_points: usize,
    /// ε̄ for the hypothesis-bound check; the smallest admissible value if absent.
    pub epsilon_bar: Option<f64>,
    pub certify: bool,
    pub certify_interior: usize,
    pub certify_boundary: usize,
    pub tol_curvature: f64,
    pub tol_ratio: f64,
    pub tol_lambda: f64,
    pub tol_rho: f64,
    pub tol_classical: f64,
    pub tol_lambda_fd: f64,
    pub equality_tol: f64,
    pub rho_clamp: f64,
    pub lambda_fd_step: f64,
}

impl Default for IsoConfig {
    fn default() -> Self {
        IsoConfig {
            grid_scale: 1.0,
            circle_points: None,
            polar: None,
            azimuthal: None,
            radial_nodes: None,
            step: DEFAULT_STEP,
            max_length: DEFAULT_MAX_LENGTH,
            model_k: None,
            gradient: None,
            t_points: DEFAULT_T_POINTS,
            epsilon_bar: None,
            certify: true,
            certify_interior: 2000,
            certify_boundary: 400,
            tol_curvature: TOL_CURV,
            tol_ratio: 1e-8,
            tol_lambda: 1e-9,
            tol_rho: 1e-7,
            tol_classical: 1e-6,
            tol_lambda_fd: 1e-6,
            equality_tol: EQUALITY_TOL,
            rho_clamp: RHO_CLAMP,
            lambda_fd_step: LAMBDA_FD_STEP,
        }
    }
}

impl IsoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grid_scale", self.grid_scale),
            ("step", self.step),
            ("max_length", self.max_length),
            ("tol_curvature", self.tol_curvature),
            ("tol_ratio", self.tol_ratio),
            ("tol_lambda", self.tol_lambda),
            ("tol_rho", self.tol_rho),
            ("tol_classical", self.tol_classical),
            ("tol_lambda_fd", self.tol_lambda_fd),
            ("equality_tol", self.equality_tol),
            ("rho_clamp", self.rho_clamp),
            ("lambda_fd_step", self.lambda_fd_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.t_points < 2 {
            return Err(Error::InvalidArgument("t_points must be at least 2".into()));
        }
        if let Some(k) = self.model_k {
            if k > 0.0 {
                return Err(Error::InvalidArgument("model_k must be <= 0".into()));
            }
        }
        if let Some(e) = self.epsilon_bar {
            if !(e >= 0.0) {
                return Err(Error::InvalidArgument("epsilon_bar must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self, n: usize) -> Result<SphereGrid> {
        let s = |v: usize| ((v as f64 * self.grid_scale).round() as usize).max(2);
        let radial = self.radial_nodes.unwrap_or(s(DEFAULT_RADIAL));
        match n {
            2 => SphereGrid::circle(self.circle_points.unwrap_or(s(DEFAULT_CIRCLE)), radial),
            3 => SphereGrid::lat_long(
                self.polar.unwrap_or(s(DEFAULT_POLAR)),
                self.azimuthal.unwrap_or(s(DEFAULT_AZIMUTHAL)),
                radial,
            ),
            _ => Err(Error::InvalidArgument(format!("no sphere grid for n = {n}"))),
        }
    }

    pub fn chart_options(&self) -> ChartOptions {
        ChartOptions {
            shoot: ShootOptions {
                step: self.step,
                max_length: self.max_length,
            },
            model_k: self.model_k,
            gradient: self.gradient,
        }
    }
}

/// `|Ω_ḡ| = ∫_{S^{n-1}} ∫₀^{f(θ)} J_ḡ(rθ) r^{n-1} dr dθ`.
pub fn volume(chart: &StarDomainChart) -> f64 {
    let n = chart.dimension();
    let per_ray: Vec<f64> = chart
        .rays
        .par_iter()
        .zip(&chart.f)
        .map(|(samples, &f)| {
            chart
                .grid
                .radial
                .mapped(f)
                .zip(samples)
                .map(|((t, w), s)| w * s.jacobian * t.powi(n as i32 - 1))
                .sum::<f64>()
        })
        .collect();
    chart.grid.integrate(per_ray.into_iter())
}

/// `|∂Ω_ḡ| = ∫ √(1 + ∇fᵀ ḡ⁻¹ ∇f) J_ḡ(fθ) f^{n-1} dθ`, with `∇f` the gradient of
/// the radial extension at the boundary point.
pub fn perimeter(chart: &StarDomainChart) -> Result<f64> {
    let n = chart.dimension();
    let per_ray = (0..chart.len())
        .into_par_iter()
        .map(|i| {
            let b = &chart.boundary[i];
            let inv = b.gbar.inverse().ok_or_else(|| Error::NearSingular {
                point: b.x[..n].to_vec(),
                condition: f64::INFINITY,
            })?;
            let grad = &chart.grad_f[i];
            Ok((1.0 + inv.form(grad, grad)).sqrt() * b.jacobian * chart.f[i].powi(n as i32 - 1))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(chart.grid.integrate(per_ray.into_iter()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoRatio {
    /// `|∂Ω|^n / |Ω|^{n-1}`
    pub ratio: f64,
    /// The Euclidean unit ball's ratio `n^{n-1} |S^{n-1}|`.
    pub reference: f64,
}

pub fn iso_ratio(volume: f64, perimeter: f64, n: usize) -> Result<IsoRatio> {
    if !(volume > 0.0 && perimeter > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "volume and perimeter must be positive (got {volume}, {perimeter})"
        )));
    }
    Ok(IsoRatio {
        ratio: perimeter.powi(n as i32) / volume.powi(n as i32 - 1),
        reference: euclidean_ball_ratio(n),
    })
}

/// `ρ(θ_i) = J_ḡ(f θ_i) / J_k(f)`.
pub fn rho(chart: &StarDomainChart) -> Vec<f64> {
    chart
        .boundary
        .iter()
        .zip(&chart.f)
        .map(|(b, &f)| b.jacobian / chart.model.jacobian(f))
        .collect()
}

fn boundary_point(n: usize, theta: &Vector, f: f64) -> Vector {
    std::array::from_fn(|i| if i < n { f * theta[i] } else { 0.0 })
}

/// `|∇ᵏf|²_k = ∇fᵀ (δᵏ)⁻¹ ∇f` at each boundary point.
pub fn model_gradient_sq(chart: &StarDomainChart) -> Vec<f64> {
    let n = chart.dimension();
    (0..chart.len())
        .map(|i| {
            let x = boundary_point(n, &chart.grid.directions[i], chart.f[i]);
            let d = chart.model.delta_k_tensor(&x);
            // δᵏ is the identity radially and a positive multiple of it tangentially
            let inv = d.inverse().expect("δᵏ is positive definite");
            inv.form(&chart.grad_f[i], &chart.grad_f[i])
        })
        .collect()
}

/// Volume, perimeter and ratio of the same radial function under the
/// comparison metric `δᵏ`, computed with the radial rule on `J_k` and the
/// tensor `δᵏ` at the boundary (independently of `𝒥_k` and of `λ`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelQuantities {
    pub volume: f64,
    pub perimeter: f64,
    pub ratio: f64,
}

pub fn model_quantities(chart: &StarDomainChart) -> Result<ModelQuantities> {
    let n = chart.dimension();
    let model = &chart.model;
    let vol = chart.grid.integrate(chart.f.iter().map(|&f| {
        chart
            .grid
            .radial
            .mapped(f)
            .map(|(t, w)| w * model.jacobian(t) * t.powi(n as i32 - 1))
            .sum::<f64>()
    }));
    let per = chart.grid.integrate((0..chart.len()).map(|i| {
        let f = chart.f[i];
        let d = model.delta_k_tensor(&boundary_point(n, &chart.grid.directions[i], f));
        let inv = d.inverse().expect("δᵏ is positive definite");
        let g = &chart.grad_f[i];
        (1.0 + inv.form(g, g)).sqrt() * d.det().sqrt() * f.powi(n as i32 - 1)
    }));
    Ok(ModelQuantities {
        volume: vol,
        perimeter: per,
        ratio: iso_ratio(vol, per, n)?.ratio,
    })
}

/// Per-direction ingredients of `λ(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaData {
    pub n: usize,
    pub weights: Vec<f64>,
    pub rho: Vec<f64>,
    /// `|∇ᵏf|²_k`
    pub grad_k_sq: Vec<f64>,
    /// `J_k(f) f^{n-1}`
    pub jk_area: Vec<f64>,
    /// `𝒥_k(f)`
    pub jk_volume: Vec<f64>,
    pub rho_clamp: f64,
}

impl LambdaData {
    pub fn from_chart(chart: &StarDomainChart, rho_clamp: f64) -> Self {
        let n = chart.dimension();
        let m = &chart.model;
        LambdaData {
            n,
            weights: chart.grid.weights.clone(),
            rho: rho(chart),
            grad_k_sq: model_gradient_sq(chart),
            jk_area: chart.f.iter().map(|&f| m.jacobian(f) * f.powi(n as i32 - 1)).collect(),
            jk_volume: chart.f.iter().map(|&f| m.j_script(f)).collect(),
            rho_clamp,
        }
    }

    fn exponent(&self) -> f64 {
        self.n as f64 / (self.n as f64 - 1.0)
    }

    /// `A(t) = ∫ √(ρ^{2t} + |∇ᵏf|²_k) J_k(f) f^{n-1} dθ`, so the numerator of
    /// `λ` is `A^{n/(n-1)}`.
    pub fn a(&self, t: f64) -> f64 {
        (0..self.rho.len())
            .map(|i| self.weights[i] * (self.rho[i].powf(2.0 * t) + self.grad_k_sq[i]).sqrt() * self.jk_area[i])
            .sum()
    }

    /// `B(t) = ∫ ρ^t 𝒥_k(f) dθ`.
    pub fn b(&self, t: f64) -> f64 {
        (0..self.rho.len())
            .map(|i| self.weights[i] * self.rho[i].powf(t) * self.jk_volume[i])
            .sum()
    }

    pub fn lambda(&self, t: f64) -> f64 {
        self.a(t).powf(self.exponent()) / self.b(t)
    }

    fn clamped_rho(&self, i: usize) -> f64 {
        let r = self.rho[i];
        if r < 1.0 && r >= 1.0 - self.rho_clamp {
            1.0
        } else {
            r
        }
    }

    /// `C(θ_i, t) = n/(n-1) ρ^t/√(ρ^{2t} + |∇ᵏf|²_k) − (A/B) 𝒥_k(f)/(J_k(f) f^{n-1})`.
    pub fn c_values(&self, t: f64) -> Vec<f64> {
        let ratio = self.a(t) / self.b(t);
        (0..self.rho.len())
            .map(|i| {
                let rt = self.rho[i].powf(t);
                self.exponent() * rt / (rt * rt + self.grad_k_sq[i]).sqrt()
                    - ratio * self.jk_volume[i] / self.jk_area[i]
            })
            .collect()
    }

    /// `λ′(t) = A^{1/(n-1)}/B ∫ C ln(ρ) ρ^t J_k(f) f^{n-1} dθ`.
    pub fn lambda_prime(&self, t: f64) -> f64 {
        let (a, b) = (self.a(t), self.b(t));
        let c = self.c_values(t);
        let integral: f64 = (0..self.rho.len())
            .map(|i| {
                let r = self.clamped_rho(i);
                self.weights[i] * c[i] * r.ln() * r.powf(t) * self.jk_area[i]
            })
            .sum();
        a.powf(1.0 / (self.n as f64 - 1.0)) / b * integral
    }

    /// Fourth-order centred difference of `λ` (evaluated outside `[0, 1]`
    /// near the ends; `λ` is smooth in `t` on all of ℝ).
    pub fn lambda_prime_fd(&self, t: f64, delta: f64) -> f64 {
        let l = |s: f64| self.lambda(t + s * delta);
        (l(-2.0) - 8.0 * l(-1.0) + 8.0 * l(1.0) - l(2.0)) / (12.0 * delta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCurve {
    pub t: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_prime: Vec<f64>,
    pub lambda_prime_fd: Vec<f64>,
    /// `min_θ C(θ, t)`
    pub c_min: Vec<f64>,
}

pub fn uniform_t_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

pub fn lambda_curve(data: &LambdaData, t_grid: &[f64], fd_step: f64) -> LambdaCurve {
    let rows: Vec<(f64, f64, f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let c_min = data.c_values(t).into_iter().fold(f64::INFINITY, f64::min);
            (
                data.lambda(t),
                data.lambda_prime(t),
                data.lambda_prime_fd(t, fd_step),
                c_min,
            )
        })
        .collect();
    LambdaCurve {
        t: t_grid.to_vec(),
        lambda: rows.iter().map(|r| r.0).collect(),
        lambda_prime: rows.iter().map(|r| r.1).collect(),
        lambda_prime_fd: rows.iter().map(|r| r.2).collect(),
        c_min: rows.iter().map(|r| r.3).collect(),
    }
}

impl LambdaCurve {
    pub fn to_csv(&self) -> String {
        table(
            &["t", "lambda", "lambda_prime", "lambda_prime_fd", "c_min"],
            (0..self.t.len()).map(|i| {
                vec![
                    num(self.t[i]),
                    num(self.lambda[i]),
                    num(self.lambda_prime[i]),
                    num(self.lambda_prime_fd[i]),
                    num(self.c_min[i]),
                ]
            }),
        )
    }

    /// Largest relative disagreement between analytic and difference `λ′`
    /// over points with `|λ′| > floor`.
    pub fn max_derivative_mismatch(&self, floor: f64) -> f64 {
        self.lambda_prime
            .iter()
            .zip(&self.lambda_prime_fd)
            .filter(|(a, _)| a.abs() > floor)
            .map(|(a, d)| ((a - d) / a).abs())
            .fold(0.0, f64::max)
    }
}

/// Closed-form lower bound for `C` when all four hypothesis sups are ≤ ε̄:
/// `n/(n-1)/√(1+ε̄²) − ((1+ε̄)/(1−ε̄))² ((R+ε̄)/(R−ε̄))^{n-1} √(1+ε̄²)`.
pub fn c_lower_bound(n: usize, r: f64, eps: f64) -> f64 {
    let s = (1.0 + eps * eps).sqrt();
    let nn = n as f64;
    nn / (nn - 1.0) / s - ((1.0 + eps) / (1.0 - eps)).powi(2) * ((r + eps) / (r - eps)).powi(n as i32 - 1) * s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBounds {
    pub epsilon_bar: f64,
    /// `R`, the mean of `f`.
    pub radius: f64,
    /// `sup |f − R|`
    pub sup_radius_deviation: f64,
    /// `sup |∇ᵏf|_k`
    pub sup_model_gradient: f64,
    /// `sup |J_k(f)/J_k(R) − 1|`
    pub sup_jacobian_deviation: f64,
    /// `sup |𝒥_k(f)/𝒥_k(R) − 1|`
    pub sup_volume_deviation: f64,
    pub within: bool,
    pub c_lower_bound: f64,
    pub c_bound_positive: bool,
}

impl EpsilonBounds {
    /// The smallest ε̄ the chart satisfies.
    pub fn smallest_epsilon(&self) -> f64 {
        self.sup_radius_deviation
            .max(self.sup_model_gradient)
            .max(self.sup_jacobian_deviation)
            .max(self.sup_volume_deviation)
    }
}

/// Sup-norms of the four hypothesis quantities, checked against `ε̄`, and the
/// closed-form `C` bound at `ε̄` (at the smallest admissible `ε̄` when `None`).
pub fn epsilon_bound_check(chart: &StarDomainChart, epsilon_bar: Option<f64>) -> EpsilonBounds {
    let n = chart.dimension();
    let m = &chart.model;
    let r = chart.mean_radius();
    let (jr, jsr) = (m.jacobian(r), m.j_script(r));
    let sup = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let sup_radius_deviation = sup(&mut chart.f.iter().map(|f| (f - r).abs()));
    let sup_model_gradient = sup(&mut model_gradient_sq(chart).into_iter().map(f64::sqrt));
    let sup_jacobian_deviation = sup(&mut chart.f.iter().map(|&f| (m.jacobian(f) / jr - 1.0).abs()));
    let sup_volume_deviation = sup(&mut chart.f.iter().map(|&f| (m.j_script(f) / jsr - 1.0).abs()));
    let mut out = EpsilonBounds {
        epsilon_bar: 0.0,
        radius: r,
        sup_radius_deviation,
        sup_model_gradient,
        sup_jacobian_deviation,
        sup_volume_deviation,
        within: true,
        c_lower_bound: 0.0,
        c_bound_positive: false,
    };
    let eps = epsilon_bar.unwrap_or_else(|| out.smallest_epsilon());
    out.epsilon_bar = eps;
    out.within = out.smallest_epsilon() <= eps;
    out.c_lower_bound = c_lower_bound(n, r, eps);
    out.c_bound_positive = out.c_lower_bound > 0.0;
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    /// `I(Ω_ḡ) ≥ λ(1)^{n-1}`
    pub lower_bound_chain: bool,
    /// `λ` nondecreasing on the t-grid, `λ′ ≥ 0`, `λ(1) ≥ λ(0)`.
    pub lambda_monotone: bool,
    /// `I(Ω_ḡ) ≥ I(Ω_{δᵏ})`
    pub comparison: bool,
    /// For `k = 0`: `I(Ω_ḡ)` and `I(Ω_δ)` are `≥ I(B_δ)`. `None` otherwise.
    pub classical: Option<bool>,
    /// `min C > 0` over the t-grid and all directions.
    pub c_positive: bool,
    /// When the equality diagnostic fires, `ρ ≡ 1` to within `1e-6`.
    pub rigidity: bool,
    /// `ρ ≥ 1 − tol_rho` at every direction.
    pub rho_lower_bound: bool,
    /// Analytic `λ′` matches the difference quotient.
    pub lambda_derivative: bool,
    /// `λ(0)^{n-1}` matches the independent `I(Ω_{δᵏ})`.
    pub lambda_endpoint: bool,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        self.lower_bound_chain
            && self.lambda_monotone
            && self.comparison
            && self.classical.unwrap_or(true)
            && self.c_positive
            && self.rigidity
            && self.rho_lower_bound
            && self.lambda_derivative
            && self.lambda_endpoint
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityDiagnostic {
    pub gap: f64,
    pub fired: bool,
    /// `max |ρ − 1|`, reported when fired.
    pub max_rho_deviation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub metric: MetricSpec,
    pub config: IsoConfig,
    pub layout: GridLayout,
    pub directions: usize,
    pub radial_nodes: usize,
    pub gradient_rule: GradientRule,
    pub model_k: f64,
    pub certificate: Option<CurvatureCertificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoReport {
    pub n: usize,
    pub volume: f64,
    pub perimeter: f64,
    /// `I(Ω_ḡ)`
    pub ratio: f64,
    /// `I(Ω_{δᵏ})` from the independent comparison quadrature.
    pub reference_ratio: f64,
    pub model: ModelQuantities,
    /// `n^{n-1} |S^{n-1}|`
    pub euclidean_ball_ratio: f64,
    pub lambda_zero_power: f64,
    pub lambda_one_power: f64,
    pub f: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub rho: Vec<f64>,
    pub lambda: LambdaCurve,
    pub c_min: f64,
    pub max_lambda_prime_mismatch: f64,
    pub epsilon: EpsilonBounds,
    pub equality: EqualityDiagnostic,
    pub verdicts: Verdicts,
    pub provenance: Provenance,
}

impl IsoReport {
    pub fn min_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Per-direction table: `theta_index, f, grad_norm, rho`.
    pub fn theta_csv(&self) -> String {
        table(
            &["theta_index", "f", "grad_norm", "rho"],
            (0..self.f.len()).map(|i| vec![i.to_string(), num(self.f[i]), num(self.grad_norm[i]), num(self.rho[i])]),
        )
    }

    pub fn lambda_csv(&self) -> String {
        self.lambda.to_csv()
    }
}

/// Everything after the chart: quadrature, `ρ`, `λ`, hypothesis bounds and
/// verdicts.
pub fn analyze_chart(
    chart: &StarDomainChart,
    metric: &MetricSpec,
    config: &IsoConfig,
    certificate: Option<CurvatureCertificate>,
) -> Result<IsoReport> {
    config.validate()?;
    let n = chart.dimension();
    let vol = volume(chart);
    let per = perimeter(chart)?;
    let ratio = iso_ratio(vol, per, n)?;
    let model = model_quantities(chart)?;
    let data = LambdaData::from_chart(chart, config.rho_clamp);
    let curve = lambda_curve(&data, &uniform_t_grid(config.t_points), config.lambda_fd_step);
    let pow = (n - 1) as i32;
    let lambda_zero_power = curve.lambda[0].powi(pow);
    let lambda_one_power = curve.lambda[curve.lambda.len() - 1].powi(pow);
    let c_min = curve.c_min.iter().copied().fold(f64::INFINITY, f64::min);
    let mismatch = curve.max_derivative_mismatch(1e-10);
    let epsilon = epsilon_bound_check(chart, config.epsilon_bar);
    let rho = data.rho.clone();

    let i = ratio.ratio;
    let slack = config.tol_ratio * i;
    let gap = i - model.ratio;
    let fired = gap.abs() <= config.equality_tol;
    let max_rho_deviation = rho.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    let equality = EqualityDiagnostic {
        gap,
        fired,
        max_rho_deviation: fired.then_some(max_rho_deviation),
    };
    let l = &curve.lambda;
    let monotone = l.windows(2).all(|w| w[1] >= w[0] - config.tol_lambda)
        && curve.lambda_prime.iter().all(|&d| d >= -config.tol_lambda)
        && l[l.len() - 1] >= l[0] - config.tol_lambda;
    let classical = (chart.model.k == 0.0).then(|| {
        let ball = ratio.reference;
        i >= ball - config.tol_classical && model.ratio >= ball - config.tol_classical
    });
    let verdicts = Verdicts {
        lower_bound_chain: i >= lambda_one_power - slack,
        lambda_monotone: monotone,
        comparison: i >= model.ratio - slack,
        classical,
        c_positive: c_min > 0.0,
        rigidity: !fired || max_rho_deviation <= 1e-6,
        rho_lower_bound: rho.iter().all(|&r| r >= 1.0 - config.tol_rho),
        lambda_derivative: mismatch <= config.tol_lambda_fd,
        lambda_endpoint: ((lambda_zero_power - model.ratio) / model.ratio).abs() <= config.tol_ratio,
    };
    Ok(IsoReport {
        n,
        volume: vol,
        perimeter: per,
        ratio: i,
        reference_ratio: model.ratio,
        model,
        euclidean_ball_ratio: ratio.reference,
        lambda_zero_power,
        lambda_one_power,
        f: chart.f.clone(),
        grad_norm: chart.grad_f.iter().map(|g| norm(n, g)).collect(),
        rho,
        lambda: curve,
        c_min,
        max_lambda_prime_mismatch: mismatch,
        epsilon,
        equality,
        verdicts,
        provenance: Provenance {
            metric: metric.clone(),
            config: config.clone(),
            layout: chart.grid.layout,
            directions: chart.grid.len(),
            radial_nodes: chart.grid.radial.len(),
            gradient_rule: chart.gradient_rule,
            model_k: chart.model.k,
            certificate,
        },
    })
}

/// Chart a field with the grid and shooting options of `config`.
pub fn chart_field(field: &MetricField, config: &IsoConfig) -> Result<StarDomainChart> {
    config.validate()?;
    let grid = config.grid(field.dimension())?;
    radial_chart(field, &grid, &config.chart_options())
}

/// Sampled certification that sectional curvature stays ≤ the model `k`.
pub fn certify(field: &MetricField, config: &IsoConfig) -> CurvatureCertificate {
    let n = field.dimension();
    let points = closed_ball_grid(n, config.certify_interior, config.certify_boundary);
    let k = config.model_k.unwrap_or(field.curvature_ceiling());
    certify_nonpositive(field, &points, k, config.tol_curvature)
}

/// Report for one field without the curvature hypothesis check.
pub fn ratio_report(field: &MetricField, config: &IsoConfig) -> Result<IsoReport> {
    let chart = chart_field(field, config)?;
    analyze_chart(&chart, field.spec(), config, None)
}

/// Certify the curvature hypothesis, chart, and evaluate the whole chain of
/// inequalities. Certification failure is an error carrying the witness.
pub fn verify_theorem(field: &MetricField, config: &IsoConfig) -> Result<IsoReport> {
    config.validate()?;
    let certificate = if config.certify {
        Some(certify(field, config).into_result()?)
    } else {
        None
    };
    let chart = chart_field(field, config)?;
    analyze_chart(&chart, field.spec(), config, certificate)
}

/// `⟨∇f, θ⟩` is zero for a valid chart; exposed for tests and dumps.
pub fn radial_component(chart: &StarDomainChart, i: usize) -> f64 {
    dot(chart.dimension(), &chart.grad_f[i], &chart.grid.directions[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small() -> IsoConfig {
        IsoConfig {
            circle_points: Some(64),
            polar: Some(8),
            azimuthal: Some(16),
            radial_nodes: Some(16),
            ..IsoConfig::default()
        }
    }

    #[test]
    fn euclidean_disk_and_ball() {
        let r2 = ratio_report(&MetricField::euclidean(2), &small()).unwrap();
        assert!((r2.volume - PI).abs() < 1e-12);
        assert!((r2.perimeter - 2.0 * PI).abs() < 1e-12);
        assert!((r2.ratio - 4.0 * PI).abs() < 1e-11);
        let r3 = ratio_report(&MetricField::euclidean(3), &small()).unwrap();
        assert!((r3.volume - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((r3.perimeter - 4.0 * PI).abs() < 1e-12);
        assert!((r3.ratio - 36.0 * PI).abs() < 1e-10);
        assert!(r2.verdicts.all_pass() && r3.verdicts.all_pass());
        assert!(r2.equality.fired && r2.equality.max_rho_deviation.unwrap() <= 1e-8);
    }

    #[test]
    fn iso_ratio_examples() {
        let d = iso_ratio(PI, 2.0 * PI, 2).unwrap();
        assert!((d.ratio - 12.56637).abs() < 1e-5);
        let b = iso_ratio(4.0 * PI / 3.0, 4.0 * PI, 3).unwrap();
        assert!((b.ratio - 113.09734).abs() < 1e-5);
        assert!((b.reference - 36.0 * PI).abs() < 1e-12);
        // doubling f: volume × 2ⁿ, perimeter × 2^{n-1}
        let s = iso_ratio(8.0 * 4.0 * PI / 3.0, 4.0 * 4.0 * PI, 3).unwrap();
        assert!(((s.ratio - b.ratio) / b.ratio).abs() < 1e-9);
        assert!(iso_ratio(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn hyperbolic_disk() {
        let field = MetricField::constant_curvature(2, -1.0).unwrap();
        let r = verify_theorem(&field, &small()).unwrap();
        let c = 1.0_f64.cosh();
        assert!((r.volume - 2.0 * PI * (c - 1.0)).abs() < 1e-10);
        assert!((r.volume - 3.41227).abs() < 1e-5);
        assert!((r.perimeter - 2.0 * PI * 1.0_f64.sinh()).abs() < 1e-10);
        assert!((r.perimeter - 7.384007).abs() < 1e-6);
        assert!((r.ratio - 2.0 * PI * (c + 1.0)).abs() < 1e-9);
        assert!(r.rho.iter().all(|x| (x - 1.0).abs() < 1e-8));
        assert!(r.verdicts.all_pass(), "{:?}", r.verdicts);
    }

    #[test]
    fn c_bound_examples() {
        assert!((c_lower_bound(2, 1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((c_lower_bound(3, 1.0, 0.0) - 0.5).abs() < 1e-15);
        let e: f64 = 0.1;
        let expect = 2.0 / 1.01_f64.sqrt() - (1.1_f64 / 0.9).powi(2) * (1.1 / 0.9) * 1.01_f64.sqrt();
        assert!((c_lower_bound(2, 1.0, e) - expect).abs() < 1e-15);
        assert!(expect > 0.0);
    }

    #[test]
    fn euclidean_epsilon_bounds_vanish() {
        let chart = chart_field(&MetricField::euclidean(2), &small()).unwrap();
        let b = epsilon_bound_check(&chart, None);
        assert!((b.radius - 1.0).abs() < 1e-14);
        assert!(b.smallest_epsilon() < 1e-12, "{b:?}");
        assert!((b.c_lower_bound - 1.0).abs() < 1e-10 && b.c_bound_positive);
    }

    #[test]
    fn lambda_is_flat_for_euclidean() {
        let chart = chart_field(&MetricField::euclidean(2), &small()).unwrap();
        let data = LambdaData::from_chart(&chart, RHO_CLAMP);
        for t in [0.0, 0.5, 1.0] {
            assert!((data.lambda(t) - 4.0 * PI).abs() < 1e-11);
            assert_eq!(data.lambda_prime(t), 0.0);
        }
    }

    #[test]
    fn lambda_derivative_matches_differences_on_synthetic_data() {
        let m = 40;
        let data = LambdaData {
            n: 3,
            weights: vec![4.0 * PI / m as f64; m],
            rho: (0..m).map(|i| 1.0 + 0.02 * (i as f64 * 0.7).sin().abs()).collect(),
            grad_k_sq: (0..m).map(|i| 1e-3 * (i as f64).cos().powi(2)).collect(),
            jk_area: (0..m).map(|i| 1.0 + 0.01 * (i as f64).sin()).collect(),
            jk_volume: (0..m).map(|i| (1.0 + 0.01 * (i as f64).sin()) / 3.0).collect(),
            rho_clamp: RHO_CLAMP,
        };
        for t in [0.0, 0.3, 1.0] {
            let a = data.lambda_prime(t);
            let d = data.lambda_prime_fd(t, 1e-2);
            assert!(a > 0.0 && ((a - d) / a).abs() < 1e-6, "{a} {d}");
        }
    }

    #[test]
    fn config_rejects_unknown_and_nonpositive() {
        assert!(serde_json::from_str::<IsoConfig>(r#"{"bogus": 1}"#).is_err());
        let c: IsoConfig = serde_json::from_str(r#"{"tol_rho": 0.0}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
