//! The star-shaped domain `Ω_ḡ` in normal coordinates, sampled on a sphere
//! grid, and the spherical gradient of its radial function.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonModel;
use crate::error::{Error, Result};
use crate::geodesic::{NormalFrame, PullbackSample};
use crate::linalg::{dot, Vector};
use crate::quadrature::{GridLayout, SphereGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientRule {
    /// Trigonometric differentiation on the uniform circle.
    Spectral,
    /// Implicit-function gradient from the variational matrix at the exit.
    Implicit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarDomainChart {
    pub grid: SphereGrid,
    pub model: ComparisonModel,
    pub frame: NormalFrame,
    /// Radial function `f(θ_i)`.
    pub f: Vec<f64>,
    /// Euclidean gradient of the radial extension `x ↦ f(x/|x|)` at the
    /// boundary point `f(θ_i)θ_i`; tangent to the sphere.
    pub grad_f: Vec<Vector>,
    /// The implicit-function gradient, kept for cross-checks when
    /// `grad_f` comes from another rule.
    pub grad_f_implicit: Vec<Vector>,
    pub gradient_rule: GradientRule,
    /// Pullback at `f(θ_i)θ_i`.
    pub boundary: Vec<PullbackSample>,
    /// Pullback at the radial quadrature nodes of each ray.
    pub rays: Vec<Vec<PullbackSample>>,
    /// Manifold points `γ(t)` at the radial nodes, ray-major.
    pub node_points: Vec<Vector>,
    pub exit_points: Vec<Vector>,
}

impl StarDomainChart {
    pub fn dimension(&self) -> usize {
        self.grid.n
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// Mean of `f` over the sphere.
    pub fn mean_radius(&self) -> f64 {
        self.grid.integrate(self.f.iter().copied()) / self.grid.total_weight()
    }

    pub fn max_tangency_defect(&self) -> f64 {
        let n = self.dimension();
        self.grid
            .directions
            .iter()
            .zip(&self.grad_f)
            .map(|(d, g)| dot(n, d, g).abs())
            .fold(0.0, f64::max)
    }

    /// Chart dump: one row per (direction, radial node) with the boundary
    /// data repeated on each row of the ray.
    pub fn to_csv(&self) -> String {
        let n = self.dimension();
        let axes = ["x", "y", "z"];
        let mut out = String::from("theta_index");
        for a in &axes[..n] {
            let _ = write!(out, ",theta_{a}");
        }
        out.push_str(",f");
        for a in &axes[..n] {
            let _ = write!(out, ",grad_f_{a}");
        }
        out.push_str(",t,j_gbar\n");
        for (i, ((d, f), g)) in self.grid.directions.iter().zip(&self.f).zip(&self.grad_f).enumerate() {
            let mut head = i.to_string();
            for v in &d[..n] {
                let _ = write!(head, ",{v:.16e}");
            }
            let _ = write!(head, ",{f:.16e}");
            for v in &g[..n] {
                let _ = write!(head, ",{v:.16e}");
            }
            for s in self.rays[i].iter().chain(std::iter::once(&self.boundary[i])) {
                let _ = writeln!(out, "{head},{:.16e},{:.16e}", s.t, s.jacobian);
            }
        }
        out
    }
}

/// Gradient of the radial extension of `f` at the boundary points of a
/// uniform circle grid: `(f′(φ)/f(φ)) (-sin φ, cos φ)`, with `f′` from the
/// DFT (Nyquist mode dropped).
pub fn spectral_gradient(grid: &SphereGrid, f: &[f64]) -> Result<Vec<Vector>> {
    let GridLayout::Circle { count } = grid.layout else {
        return Err(Error::InvalidArgument("spectral gradient needs a circle grid".into()));
    };
    if f.len() != count {
        return Err(Error::DimensionMismatch {
            expected: count,
            got: f.len(),
        });
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(count).process(&mut buf);
    for (m, c) in buf.iter_mut().enumerate() {
        let freq = if 2 * m < count {
            m as f64
        } else if 2 * m == count {
            0.0
        } else {
            m as f64 - count as f64
        };
        *c *= Complex::new(0.0, freq / count as f64);
    }
    planner.plan_fft_inverse(count).process(&mut buf);
    Ok(buf
        .iter()
        .zip(f)
        .enumerate()
        .map(|(i, (d, &fv))| {
            let phi = TAU * i as f64 / count as f64;
            let s = d.re / fv;
            [-s * phi.sin(), s * phi.cos(), 0.0]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_derivative_of_trig_polynomial() {
        let grid = SphereGrid::circle(64, 4).unwrap();
        let f: Vec<f64> = grid
            .directions
            .iter()
            .map(|d| {
                let p = d[1].atan2(d[0]);
                1.0 + 0.1 * (3.0 * p).sin() + 0.05 * p.cos()
            })
            .collect();
        let g = spectral_gradient(&grid, &f).unwrap();
        for ((d, fv), gv) in grid.directions.iter().zip(&f).zip(&g) {
            let p = d[1].atan2(d[0]);
            let df = 0.3 * (3.0 * p).cos() - 0.05 * p.sin();
            let expect = [-df / fv * p.sin(), df / fv * p.cos()];
            assert!((gv[0] - expect[0]).abs() < 1e-13 && (gv[1] - expect[1]).abs() < 1e-13);
            assert!(dot(2, d, gv).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_has_zero_gradient() {
        let grid = SphereGrid::circle(32, 4).unwrap();
        let g = spectral_gradient(&grid, &[2.5; 32]).unwrap();
        assert!(g.iter().all(|v| v[0].abs() < 1e-15 && v[1].abs() < 1e-15));
    }

    #[test]
    fn rejects_wrong_layout() {
        let grid = SphereGrid::lat_long(4, 8, 4).unwrap();
        assert!(spectral_gradient(&grid, &vec![1.0; 32]).is_err());
    }
}
