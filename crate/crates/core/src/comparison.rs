//! Constant-curvature reference quantities for `k ≤ 0`.

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat, Vector};
use crate::quadrature::gauss_legendre;

/// Below this value of `r √(-k)` the ratio `sn_k(r)/r` is evaluated from its
/// Taylor series.
const TAYLOR_SWITCH: f64 = 1e-2;
/// Gauss-Legendre nodes per unit length for `𝒥_k`.
const NODES_PER_UNIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonModel {
    pub k: f64,
    pub n: usize,
}

impl ComparisonModel {
    pub fn new(k: f64, n: usize) -> Self {
        assert!(k <= 0.0, "comparison curvature must be <= 0");
        assert!(n >= 2, "dimension must be >= 2");
        ComparisonModel { k, n }
    }

    fn kappa(&self) -> f64 {
        (-self.k).sqrt()
    }

    /// `r` for `k = 0`, `sinh(√(-k) r)/√(-k)` for `k < 0`.
    pub fn sn(&self, r: f64) -> f64 {
        if self.k == 0.0 {
            r
        } else {
            r * self.sn_over_r(r)
        }
    }

    /// `sn_k(r)/r`, equal to 1 at `r = 0`.
    pub fn sn_over_r(&self, r: f64) -> f64 {
        if self.k == 0.0 {
            return 1.0;
        }
        let y = self.kappa() * r;
        if y.abs() < TAYLOR_SWITCH {
            let y2 = y * y;
            // 1 + y²/3! + y⁴/5! + ... + y^10/11!
            1.0 + y2 / 6.0 * (1.0 + y2 / 20.0 * (1.0 + y2 / 42.0 * (1.0 + y2 / 72.0 * (1.0 + y2 / 110.0))))
        } else {
            y.sinh() / y
        }
    }

    /// Derivative of `sn_k` (`cosh(√(-k) r)` for `k < 0`).
    pub fn sn_prime(&self, r: f64) -> f64 {
        if self.k == 0.0 {
            1.0
        } else {
            (self.kappa() * r).cosh()
        }
    }

    /// Jacobian of the constant-curvature exponential map at distance `r`:
    /// `(sn_k(r)/r)^{n-1}`.
    pub fn jacobian(&self, r: f64) -> f64 {
        self.sn_over_r(r).powi(self.n as i32 - 1)
    }

    /// `𝒥_k(s) = ∫₀^s J_k(r) r^{n-1} dr` by composite Gauss-Legendre.
    pub fn j_script(&self, s: f64) -> f64 {
        assert!(s >= 0.0, "j_script needs s >= 0");
        if s == 0.0 {
            return 0.0;
        }
        let panels = (s.ceil() as usize).max(1);
        let rule = gauss_legendre(NODES_PER_UNIT);
        let width = s / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let a = p as f64 * width;
            total += rule.integrate(a, a + width, |r| self.sn(r).powi(self.n as i32 - 1));
        }
        total
    }

    /// Closed forms of `𝒥_k`, where available (`k = 0`; `n ∈ {2, 3}` for `k < 0`).
    pub fn j_script_closed_form(&self, s: f64) -> Option<f64> {
        let n = self.n as i32;
        if self.k == 0.0 {
            return Some(s.powi(n) / n as f64);
        }
        let kap = self.kappa();
        match self.n {
            // (cosh(κs) - 1)/κ² = 2 sinh²(κs/2)/κ²
            2 => Some(2.0 * (0.5 * kap * s).sinh().powi(2) / (kap * kap)),
            // ∫ sinh²(κr)/κ² dr = (sinh(2κs)/(2κ) - s) / (2κ²)
            3 => Some(((2.0 * kap * s).sinh() / (2.0 * kap) - s) / (2.0 * kap * kap)),
            _ => None,
        }
    }

    /// Surface measure `|S^{n-1}|`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.n)
    }

    /// The constant-curvature tensor `δᵏ` at `x` in normal coordinates:
    /// identity along `x`, `(sn_k(r)/r)²` on the orthogonal complement.
    pub fn delta_k_tensor(&self, x: &Vector) -> Mat {
        let n = self.n;
        let r2: f64 = (0..n).map(|i| x[i] * x[i]).sum();
        if r2 == 0.0 {
            return Mat::identity(n);
        }
        let s2 = self.sn_over_r(r2.sqrt()).powi(2);
        let mut g = Mat::identity(n).scale(s2);
        for i in 0..n {
            for j in 0..n {
                g.m[i][j] += (1.0 - s2) * x[i] * x[j] / r2;
            }
        }
        g.symmetrized()
    }
}

pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        // |S^{n-1}| = 2π/(n-2) |S^{n-3}|
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// Isoperimetric ratio of the Euclidean unit ball, `n^{n-1} |S^{n-1}|`.
pub fn euclidean_ball_ratio(n: usize) -> f64 {
    (n as f64).powi(n as i32 - 1) * sphere_area(n)
}
