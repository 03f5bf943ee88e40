//! Geodesic shooting from the centre of the ball.
//!
//! Along each direction θ the geodesic `γ` with `γ(0) = o`, `γ̇(0) = h⁻¹θ`
//! (`h = √g_o`) is integrated together with the variational matrix `Y(t)`
//! solving the Jacobi equation in coordinates
//!
//! ```text
//! Ÿ = -(∂_l Γ^i_{jk} γ̇^j γ̇^k) Y - (2 Γ^i_{jk} γ̇^j) Ẏ,   Y(0) = 0,  Ẏ(0) = h⁻¹.
//! ```
//!
//! `E(t) = Y(t)/t` is the differential of the normal-coordinate chart map
//! at `tθ`, so the pullback metric there is `ḡ = Eᵀ g(γ(t)) E`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{spectral_gradient, GradientRule, StarDomainChart};
use crate::comparison::ComparisonModel;
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat, Vector, MAX_DIM};
use crate::metric::MetricField;
use crate::quadrature::{GridLayout, LegendreRule, SphereGrid};

pub const DEFAULT_STEP: f64 = 1.0 / 512.0;
pub const DEFAULT_MAX_LENGTH: f64 = 10.0;
const EXIT_TOL: f64 = 4.0 * f64::EPSILON;

/// Orthonormal frame at the origin: `ē_i = h⁻¹ e_i` with `h = √g_o`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFrame {
    pub h: Mat,
    pub h_inv: Mat,
}

impl NormalFrame {
    pub fn build(field: &MetricField) -> Result<Self> {
        let g0 = field.metric_at(&[0.0; MAX_DIM])?;
        let h = g0.spd_sqrt();
        let h_inv = h
            .inverse()
            .ok_or_else(|| Error::InvalidArgument("metric at origin is singular".into()))?;
        Ok(NormalFrame { h, h_inv })
    }

    /// The coordinate map `φ(x) = Σ x_i ē_i`.
    pub fn to_tangent(&self, x: &Vector) -> Vector {
        self.h_inv.mul_vec(x)
    }

    pub fn frame_vector(&self, i: usize) -> Vector {
        std::array::from_fn(|r| if r < self.h_inv.n { self.h_inv.m[r][i] } else { 0.0 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    pub step: f64,
    pub max_length: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            step: DEFAULT_STEP,
            max_length: DEFAULT_MAX_LENGTH,
        }
    }
}

/// Geodesic and variational state at arclength `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub t: f64,
    pub position: Vector,
    pub velocity: Vector,
    /// `Y(t)`
    pub jacobi: Mat,
    /// `Ẏ(t)`
    pub jacobi_rate: Mat,
}

impl RayState {
    /// `E(t) = Y(t)/t`, the differential of the chart map at `tθ`.
    pub fn chart_differential(&self) -> Mat {
        self.jacobi.scale(1.0 / self.t)
    }
}

const FLAT: usize = 2 * MAX_DIM + 2 * MAX_DIM * MAX_DIM;
type Flat = [f64; FLAT];

fn pack(s: &RayState) -> Flat {
    let mut out = [0.0; FLAT];
    out[0..3].copy_from_slice(&s.position);
    out[3..6].copy_from_slice(&s.velocity);
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            out[6 + 3 * i + j] = s.jacobi.m[i][j];
            out[15 + 3 * i + j] = s.jacobi_rate.m[i][j];
        }
    }
    out
}

fn unpack(n: usize, t: f64, y: &Flat) -> RayState {
    let mut jacobi = Mat::zeros(n);
    let mut jacobi_rate = Mat::zeros(n);
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            jacobi.m[i][j] = y[6 + 3 * i + j];
            jacobi_rate.m[i][j] = y[15 + 3 * i + j];
        }
    }
    RayState {
        t,
        position: [y[0], y[1], y[2]],
        velocity: [y[3], y[4], y[5]],
        jacobi,
        jacobi_rate,
    }
}

fn rhs(field: &MetricField, y: &Flat) -> Result<Flat> {
    let n = field.dimension();
    let mut d = [0.0; FLAT];
    d[0..3].copy_from_slice(&y[3..6]);
    d[6..15].copy_from_slice(&y[15..24]);
    if field.is_constant() {
        return Ok(d);
    }
    let x: Vector = [y[0], y[1], y[2]];
    let v: Vector = [y[3], y[4], y[5]];
    let cj = field.christoffel_jet(&x)?;
    // acceleration, A^i_l = ∂_l Γ^i_jk v^j v^k, B^i_k = 2 Γ^i_jk v^j
    let mut a = [[0.0; MAX_DIM]; MAX_DIM];
    let mut b = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            for k in 0..n {
                acc += cj.gamma[i][j][k] * v[j] * v[k];
            }
        }
        d[3 + i] = -acc;
        for l in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += cj.dgamma[l][i][j][k] * v[j] * v[k];
                }
            }
            a[i][l] = s;
        }
        for k in 0..n {
            b[i][k] = 2.0 * (0..n).map(|j| cj.gamma[i][j][k] * v[j]).sum::<f64>();
        }
    }
    for i in 0..n {
        for c in 0..n {
            let mut s = 0.0;
            for l in 0..n {
                s += a[i][l] * y[6 + 3 * l + c] + b[i][l] * y[15 + 3 * l + c];
            }
            d[15 + 3 * i + c] = -s;
        }
    }
    Ok(d)
}

fn axpy(y: &Flat, h: f64, k: &Flat) -> Flat {
    std::array::from_fn(|i| y[i] + h * k[i])
}

fn rk4_step(field: &MetricField, y: &Flat, h: f64) -> Result<Flat> {
    let k1 = rhs(field, y)?;
    let k2 = rhs(field, &axpy(y, 0.5 * h, &k1))?;
    let k3 = rhs(field, &axpy(y, 0.5 * h, &k2))?;
    let k4 = rhs(field, &axpy(y, h, &k3))?;
    Ok(std::array::from_fn(|i| {
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

fn radius_defect(y: &Flat) -> f64 {
    y[0] * y[0] + y[1] * y[1] + y[2] * y[2] - 1.0
}

/// Result of shooting one direction: states at the radial quadrature nodes
/// (mapped to `(0, f(θ)]`) and at the exit point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RayRecord {
    pub direction: Vector,
    pub exit_length: f64,
    pub nodes: Vec<RayState>,
    pub exit: RayState,
    /// Fixed-step states `t = 0, h, 2h, …` up to the last step before exit.
    #[serde(skip)]
    pub trajectory: Option<Vec<RayState>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackSample {
    /// Chart point `tθ`.
    pub x: Vector,
    pub t: f64,
    pub gbar: Mat,
    /// `√det ḡ_x`
    pub jacobian: f64,
}

/// `ḡ_x = Eᵀ g_{γ(t)} E` at `x = tθ`.
pub fn pullback_from_state(field: &MetricField, direction: &Vector, state: &RayState) -> Result<PullbackSample> {
    let n = field.dimension();
    let g = field.metric_at(&state.position)?;
    let e = state.chart_differential();
    let gbar = g.congruence(&e).symmetrized();
    let x: Vector = std::array::from_fn(|i| if i < n { state.t * direction[i] } else { 0.0 });
    Ok(PullbackSample {
        x,
        t: state.t,
        gbar,
        jacobian: gbar.det().sqrt(),
    })
}

/// Shoot the geodesic in chart direction `direction` (a Euclidean unit
/// vector), sampling at `radial` nodes mapped to `(0, f(θ)]`.
pub fn shoot_ray(
    field: &MetricField,
    frame: &NormalFrame,
    direction: &Vector,
    radial: &LegendreRule,
    opts: &ShootOptions,
    keep_trajectory: bool,
) -> Result<RayRecord> {
    let n = field.dimension();
    let theta_norm = dot(n, direction, direction).sqrt();
    if (theta_norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "direction must be a unit vector (|θ| = {theta_norm})"
        )));
    }
    if !(opts.step > 1e-12) {
        return Err(Error::StepUnderflow(opts.step));
    }
    let dir_vec = || direction[..n].to_vec();
    let h = opts.step;
    let start = RayState {
        t: 0.0,
        position: [0.0; MAX_DIM],
        velocity: frame.to_tangent(direction),
        jacobi: Mat::zeros(n),
        jacobi_rate: frame.h_inv,
    };
    let mut traj: Vec<Flat> = vec![pack(&start)];
    let max_steps = (opts.max_length / h).ceil() as usize;
    let (last, exit_tau) = loop {
        let cur = traj[traj.len() - 1];
        if traj.len() > max_steps {
            return Err(Error::NoExit {
                direction: dir_vec(),
                max_length: opts.max_length,
            });
        }
        let next = match rk4_step(field, &cur, h) {
            Ok(v) => v,
            // the collar is thinner than a step only for absurd steps
            Err(Error::PointOutsideDomain { .. }) => {
                return Err(Error::StepUnderflow(h));
            }
            Err(e) => return Err(e),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { direction: dir_vec() });
        }
        let s_next = radius_defect(&next);
        if s_next >= 0.0 {
            let tau = polish_exit(field, &cur, radius_defect(&cur), s_next, h)?;
            break (traj.len() - 1, tau);
        }
        traj.push(next);
    };
    let exit_flat = if exit_tau > 0.0 {
        rk4_step(field, &traj[last], exit_tau)?
    } else {
        traj[last]
    };
    let exit_length = last as f64 * h + exit_tau;
    let exit = unpack(n, exit_length, &exit_flat);
    let rate = 2.0 * dot(n, &exit.position, &exit.velocity);
    if !(rate > 1e-12) {
        return Err(Error::NotTransversal {
            direction: dir_vec(),
            rate,
        });
    }
    let mut nodes = Vec::with_capacity(radial.len());
    for (t, _) in radial.mapped(exit_length) {
        let k = ((t / h).floor() as usize).min(last);
        let tau = t - k as f64 * h;
        let y = if tau > 0.0 {
            rk4_step(field, &traj[k], tau)?
        } else {
            traj[k]
        };
        nodes.push(unpack(n, t, &y));
    }
    let trajectory = keep_trajectory.then(|| {
        traj.iter()
            .enumerate()
            .map(|(k, y)| unpack(n, k as f64 * h, y))
            .collect()
    });
    Ok(RayRecord {
        direction: *direction,
        exit_length,
        nodes,
        exit,
        trajectory,
    })
}

/// Root of `τ ↦ |γ(t_k + τ)|² - 1` on `(0, h]`, where `γ(t_k + τ)` is one RK4
/// step of size `τ` from the bracketing state. Bisection-safeguarded Newton
/// with `d|γ|²/dt = 2⟨γ, γ̇⟩`.
fn polish_exit(field: &MetricField, cur: &Flat, s_lo: f64, s_hi: f64, h: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, h);
    let mut tau = h * (-s_lo) / (s_hi - s_lo);
    for _ in 0..100 {
        let y = rk4_step(field, cur, tau)?;
        let s = radius_defect(&y);
        if s.abs() <= EXIT_TOL {
            return Ok(tau);
        }
        if s < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let slope = 2.0 * (y[0] * y[3] + y[1] * y[4] + y[2] * y[5]);
        let newton = tau - s / slope;
        tau = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-16 {
            break;
        }
    }
    Ok(tau)
}

/// `pullback_at` for an arbitrary `t ∈ (0, f(θ)]`; needs a record shot with
/// `keep_trajectory`.
pub fn pullback_at(field: &MetricField, ray: &RayRecord, t: f64) -> Result<PullbackSample> {
    if !(t > 0.0 && t <= ray.exit_length) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} outside (0, {}]",
            ray.exit_length
        )));
    }
    if t == ray.exit_length {
        return pullback_from_state(field, &ray.direction, &ray.exit);
    }
    if let Some(node) = ray.nodes.iter().find(|s| s.t == t) {
        return pullback_from_state(field, &ray.direction, node);
    }
    let traj = ray
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("ray was shot without its trajectory".into()))?;
    let h = if traj.len() > 1 { traj[1].t } else { ray.exit_length };
    let k = ((t / h).floor() as usize).min(traj.len() - 1);
    let tau = t - traj[k].t;
    let y = rk4_step(field, &pack(&traj[k]), tau)?;
    pullback_from_state(field, &ray.direction, &unpack(field.dimension(), t, &y))
}

/// Euclidean gradient of the radial extension of `f` at the boundary point
/// `f(θ)θ`, from the implicit-function theorem applied to
/// `Φ(x) = |exp(x)|² = 1`: `∇Φ = 2 Eᵀ γ(f)`, and
/// `∇f = -(∇Φ - ⟨∇Φ, θ⟩θ) / ⟨∇Φ, θ⟩`.
pub fn implicit_boundary_gradient(n: usize, ray: &RayRecord) -> Vector {
    let e = ray.exit.chart_differential();
    let p = ray.exit.position;
    let grad_phi: Vector = std::array::from_fn(|i| {
        if i < n {
            2.0 * (0..n).map(|r| e.m[r][i] * p[r]).sum::<f64>()
        } else {
            0.0
        }
    });
    let theta = ray.direction;
    let radial = dot(n, &grad_phi, &theta);
    std::array::from_fn(|i| {
        if i < n {
            -(grad_phi[i] - radial * theta[i]) / radial
        } else {
            0.0
        }
    })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ChartOptions {
    pub shoot: ShootOptions,
    /// Comparison curvature; defaults to the field's claimed ceiling.
    pub model_k: Option<f64>,
    /// Gradient rule; defaults to spectral for circles, implicit otherwise.
    pub gradient: Option<GradientRule>,
}

/// Shoot one ray per grid direction and assemble the normal-coordinate
/// chart. Rays run in parallel; assembly is in grid order.
pub fn radial_chart(field: &MetricField, grid: &SphereGrid, opts: &ChartOptions) -> Result<StarDomainChart> {
    let n = field.dimension();
    if grid.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grid.n,
        });
    }
    let frame = NormalFrame::build(field)?;
    let model = ComparisonModel::new(opts.model_k.unwrap_or(field.curvature_ceiling()), n);
    let rays: Vec<Result<(RayRecord, Vec<PullbackSample>, PullbackSample)>> = grid
        .directions
        .par_iter()
        .map(|theta| {
            let ray = shoot_ray(field, &frame, theta, &grid.radial, &opts.shoot, false)?;
            let samples = ray
                .nodes
                .iter()
                .map(|s| pullback_from_state(field, theta, s))
                .collect::<Result<Vec<_>>>()?;
            let boundary = pullback_from_state(field, theta, &ray.exit)?;
            Ok((ray, samples, boundary))
        })
        .collect();
    let mut f = Vec::with_capacity(grid.len());
    let mut ray_samples = Vec::with_capacity(grid.len());
    let mut boundary = Vec::with_capacity(grid.len());
    let mut grad_implicit = Vec::with_capacity(grid.len());
    let mut node_points = Vec::with_capacity(grid.len() * grid.radial.len());
    let mut exit_points = Vec::with_capacity(grid.len());
    for r in rays {
        let (ray, samples, b) = r?;
        f.push(ray.exit_length);
        grad_implicit.push(implicit_boundary_gradient(n, &ray));
        node_points.extend(ray.nodes.iter().map(|s| s.position));
        exit_points.push(ray.exit.position);
        ray_samples.push(samples);
        boundary.push(b);
    }
    let rule = opts.gradient.unwrap_or(match grid.layout {
        GridLayout::Circle { .. } => GradientRule::Spectral,
        GridLayout::LatLong { .. } => GradientRule::Implicit,
    });
    let grad_f = match rule {
        GradientRule::Spectral => spectral_gradient(grid, &f)?,
        GradientRule::Implicit => grad_implicit.clone(),
    };
    Ok(StarDomainChart {
        grid: grid.clone(),
        model,
        frame,
        f,
        grad_f,
        grad_f_implicit: grad_implicit,
        gradient_rule: rule,
        boundary,
        rays: ray_samples,
        node_points,
        exit_points,
    })
}
