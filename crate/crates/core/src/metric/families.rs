//! Closed-form building blocks for the built-in metric families.

use crate::linalg::{Vector, MAX_DIM};

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: Vector,
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl ScalarJet {
    pub fn laplacian(&self, n: usize) -> f64 {
        (0..n).map(|i| self.hess[i][i]).sum()
    }

    fn accumulate(&mut self, other: &ScalarJet) {
        self.value += other.value;
        for i in 0..MAX_DIM {
            self.grad[i] += other.grad[i];
            for j in 0..MAX_DIM {
                self.hess[i][j] += other.hess[i][j];
            }
        }
    }
}

/// Exponent tuples of all monomials in `n` variables, graded by total degree
/// and ordered lexicographically (descending in `x₁`) within each degree:
/// `1, x, y, x², xy, y², …` for `n = 2`.
pub fn graded_monomials(n: usize, count: usize) -> Vec<[u32; MAX_DIM]> {
    let mut out = Vec::with_capacity(count);
    let mut degree = 0u32;
    while out.len() < count {
        let mut level = Vec::new();
        push_exponents(n, 0, degree, [0; MAX_DIM], &mut level);
        out.extend(level);
        degree += 1;
    }
    out.truncate(count);
    out
}

fn push_exponents(n: usize, var: usize, remaining: u32, cur: [u32; MAX_DIM], out: &mut Vec<[u32; MAX_DIM]>) {
    if var + 1 == n {
        let mut e = cur;
        e[var] = remaining;
        out.push(e);
        return;
    }
    for a in (0..=remaining).rev() {
        let mut e = cur;
        e[var] = a;
        push_exponents(n, var + 1, remaining - a, e, out);
    }
}

#[inline]
fn pow_u(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

#[derive(Clone, Debug)]
pub struct Polynomial {
    n: usize,
    terms: Vec<([u32; MAX_DIM], f64)>,
}

impl Polynomial {
    /// Coefficients in [`graded_monomials`] order; zero coefficients are dropped.
    pub fn from_graded(n: usize, coeffs: &[f64]) -> Self {
        let terms = graded_monomials(n, coeffs.len())
            .into_iter()
            .zip(coeffs.iter().copied())
            .filter(|(_, c)| *c != 0.0)
            .collect();
        Polynomial { n, terms }
    }

    pub fn jet(&self, x: &Vector) -> ScalarJet {
        let n = self.n;
        let mut out = ScalarJet::default();
        for (e, c) in &self.terms {
            let p: [f64; MAX_DIM] = std::array::from_fn(|i| if i < n { pow_u(x[i], e[i]) } else { 1.0 });
            // first and second partials of each univariate factor
            let d1: [f64; MAX_DIM] = std::array::from_fn(|i| {
                if i < n && e[i] >= 1 {
                    e[i] as f64 * pow_u(x[i], e[i] - 1)
                } else {
                    0.0
                }
            });
            let d2: [f64; MAX_DIM] = std::array::from_fn(|i| {
                if i < n && e[i] >= 2 {
                    (e[i] * (e[i] - 1)) as f64 * pow_u(x[i], e[i] - 2)
                } else {
                    0.0
                }
            });
            let prod_except = |skip: &[usize]| -> f64 { (0..n).filter(|i| !skip.contains(i)).map(|i| p[i]).product() };
            out.value += c * prod_except(&[]);
            for i in 0..n {
                if d1[i] != 0.0 {
                    out.grad[i] += c * d1[i] * prod_except(&[i]);
                }
                for j in 0..n {
                    let v = if i == j {
                        d2[i] * prod_except(&[i])
                    } else {
                        d1[i] * d1[j] * prod_except(&[i, j])
                    };
                    out.hess[i][j] += c * v;
                }
            }
        }
        out
    }
}

/// Gaussian bump `amplitude · exp(-|x - center|² / width²)`.
#[derive(Clone, Debug)]
pub struct Bump {
    pub n: usize,
    pub amplitude: f64,
    pub center: Vector,
    pub width: f64,
}

impl Bump {
    pub fn jet(&self, x: &Vector) -> ScalarJet {
        let n = self.n;
        let w2 = self.width * self.width;
        let d: Vector = std::array::from_fn(|i| if i < n { x[i] - self.center[i] } else { 0.0 });
        let r2: f64 = (0..n).map(|i| d[i] * d[i]).sum();
        let v = self.amplitude * (-r2 / w2).exp();
        let mut out = ScalarJet {
            value: v,
            ..Default::default()
        };
        for i in 0..n {
            out.grad[i] = -2.0 * d[i] / w2 * v;
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                out.hess[i][j] = (4.0 * d[i] * d[j] / (w2 * w2) - 2.0 * delta / w2) * v;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub enum ScalarTerm {
    Poly(Polynomial),
    Bump(Bump),
}

impl ScalarTerm {
    pub fn jet(&self, x: &Vector) -> ScalarJet {
        match self {
            ScalarTerm::Poly(p) => p.jet(x),
            ScalarTerm::Bump(b) => b.jet(x),
        }
    }
}

pub fn sum_jets(terms: &[ScalarTerm], x: &Vector) -> ScalarJet {
    let mut out = ScalarJet::default();
    for t in terms {
        out.accumulate(&t.jet(x));
    }
    out
}

/// Radial profile of the constant-curvature tensor in normal coordinates,
/// `δᵏ(x) = a(ρ) I + q(ρ) x xᵀ` with `ρ = |x|²`, together with the first
/// two `ρ`-derivatives of `a` and `q`.
///
/// With `u = -k ρ`, `a = sinh²(√u)/u` and `q = (1 - a)/ρ`. Both are entire
/// in `u` with positive Taylor coefficients `c_m = 2^{2m+1}/(2m+2)!`, so the
/// series is summed directly: no cancellation near the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureProfile {
    pub a: f64,
    pub da: f64,
    pub dda: f64,
    pub q: f64,
    pub dq: f64,
    pub ddq: f64,
}

pub fn curvature_profile(k: f64, rho: f64) -> CurvatureProfile {
    if k == 0.0 {
        return CurvatureProfile {
            a: 1.0,
            da: 0.0,
            dda: 0.0,
            q: 0.0,
            dq: 0.0,
            ddq: 0.0,
        };
    }
    let kappa2 = -k;
    let u = kappa2 * rho;
    // A(u) = Σ c_m u^m and Q(u) = Σ c_{m+1} u^m, each with two derivatives.
    // p[j] holds u^{m-j} (zero for negative powers).
    let mut sa = [0.0; 3];
    let mut sq = [0.0; 3];
    let mut c = 1.0_f64;
    let mut p = [1.0, 0.0, 0.0, 0.0];
    for m in 0..400usize {
        let mf = m as f64;
        sa[0] += c * p[0];
        sa[1] += mf * c * p[1];
        sa[2] += mf * (mf - 1.0) * c * p[2];
        if m >= 1 {
            sq[0] += c * p[1];
            sq[1] += (mf - 1.0) * c * p[2];
            sq[2] += (mf - 1.0) * (mf - 2.0) * c * p[3];
        }
        // c_{m+1} = c_m · 4 / ((2m+3)(2m+4))
        c *= 4.0 / ((2.0 * mf + 3.0) * (2.0 * mf + 4.0));
        p = [p[0] * u, p[0], p[1], p[2]];
        let next = c * p[0] * (mf + 2.0) * (mf + 2.0);
        if m > 2 && mf > u && next <= 1e-17 * (sa[0] + sq[0]) {
            break;
        }
    }
    CurvatureProfile {
        a: sa[0],
        da: kappa2 * sa[1],
        dda: kappa2 * kappa2 * sa[2],
        q: -kappa2 * sq[0],
        dq: -kappa2 * kappa2 * sq[1],
        ddq: -kappa2 * kappa2 * kappa2 * sq[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_order_two_variables() {
        let m = graded_monomials(2, 6);
        assert_eq!(m[0][..2], [0, 0]);
        assert_eq!(m[1][..2], [1, 0]);
        assert_eq!(m[2][..2], [0, 1]);
        assert_eq!(m[3][..2], [2, 0]);
        assert_eq!(m[4][..2], [1, 1]);
        assert_eq!(m[5][..2], [0, 2]);
    }

    #[test]
    fn graded_order_three_variables_degree_one() {
        let m = graded_monomials(3, 4);
        assert_eq!(m[1], [1, 0, 0]);
        assert_eq!(m[2], [0, 1, 0]);
        assert_eq!(m[3], [0, 0, 1]);
    }

    #[test]
    fn polynomial_jet_matches_hand_derivatives() {
        // u = 2 + x - 3y + x² + 4xy (coefficients in graded order)
        let p = Polynomial::from_graded(2, &[2.0, 1.0, -3.0, 1.0, 4.0, 0.0]);
        let j = p.jet(&[0.5, -0.25, 0.0]);
        let (x, y) = (0.5, -0.25);
        assert!((j.value - (2.0 + x - 3.0 * y + x * x + 4.0 * x * y)).abs() < 1e-15);
        assert!((j.grad[0] - (1.0 + 2.0 * x + 4.0 * y)).abs() < 1e-15);
        assert!((j.grad[1] - (-3.0 + 4.0 * x)).abs() < 1e-15);
        assert_eq!(j.hess[0][0], 2.0);
        assert_eq!(j.hess[0][1], 4.0);
        assert_eq!(j.hess[1][1], 0.0);
    }

    #[test]
    fn profile_matches_closed_form() {
        for &(k, r) in &[(-1.0_f64, 0.5), (-1.0, 1.01), (-4.0, 0.8), (-0.01, 0.3)] {
            let kappa = (-k).sqrt();
            let s = (kappa * r).sinh() / (kappa * r);
            let p = curvature_profile(k, r * r);
            assert!((p.a - s * s).abs() < 1e-14 * s * s, "k={k} r={r}");
            assert!((p.q - (1.0 - s * s) / (r * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let k = -1.3;
        let rho = 0.6;
        let h = 1e-5;
        let p = curvature_profile(k, rho);
        let pp = curvature_profile(k, rho + h);
        let pm = curvature_profile(k, rho - h);
        assert!(((pp.a - pm.a) / (2.0 * h) - p.da).abs() < 1e-9);
        assert!(((pp.da - pm.da) / (2.0 * h) - p.dda).abs() < 1e-9);
        assert!(((pp.q - pm.q) / (2.0 * h) - p.dq).abs() < 1e-9);
        assert!(((pp.dq - pm.dq) / (2.0 * h) - p.ddq).abs() < 1e-9);
    }
}
