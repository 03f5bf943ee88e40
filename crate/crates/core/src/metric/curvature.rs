//! Connection and curvature of a [`MetricField`].
//!
//! Index conventions: `gamma[i][j][k] = Γ^i_{jk}`, `dgamma[m][i][j][k] =
//! ∂_m Γ^i_{jk}`, and `R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_{[X,Y]} Z` with
//! sectional curvature `K(X,Y) = g(R(X,Y)Y, X) / |X ∧ Y|²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MetricField, MetricJet};
use crate::error::{Error, Result};
use crate::linalg::{dot, orthogonal_complement, Mat, Vector, MAX_DIM};

pub type Gamma = [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM];

/// Default slack on curvature ceilings (finite-difference noise floor).
pub const TOL_CURV: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct ChristoffelJet {
    pub g: Mat,
    pub gamma: Gamma,
    pub dgamma: [Gamma; MAX_DIM],
}

fn inverse_checked(g: &Mat, x: &Vector) -> Result<Mat> {
    let n = g.n;
    let inv = g.inverse().ok_or_else(|| Error::NearSingular {
        point: x[..n].to_vec(),
        condition: f64::INFINITY,
    })?;
    let condition = g.max_abs() * inv.max_abs() * n as f64;
    if !(condition <= super::MAX_CONDITION) {
        return Err(Error::NearSingular {
            point: x[..n].to_vec(),
            condition,
        });
    }
    Ok(inv)
}

/// `½ (∂_j g_lk + ∂_k g_lj - ∂_l g_jk)`, the Christoffel symbols of the first kind.
fn first_kind(n: usize, dg: &[Mat; MAX_DIM]) -> Gamma {
    let mut t = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for l in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = 0.5 * (dg[j].m[l][k] + dg[k].m[l][j] - dg[l].m[j][k]);
                t[l][j][k] = v;
                t[l][k][j] = v;
            }
        }
    }
    t
}

fn raise(n: usize, ginv: &Mat, t: &Gamma) -> Gamma {
    let mut out = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let v: f64 = (0..n).map(|l| ginv.m[i][l] * t[l][j][k]).sum();
                out[i][j][k] = v;
                out[i][k][j] = v;
            }
        }
    }
    out
}

pub fn christoffel_from_jet(jet: &MetricJet, x: &Vector) -> Result<Gamma> {
    let n = jet.g.n;
    let ginv = inverse_checked(&jet.g, x)?;
    Ok(raise(n, &ginv, &first_kind(n, &jet.dg)))
}

/// Christoffel symbols and their first derivatives from a metric jet.
pub fn christoffel_jet_from(jet: &MetricJet, x: &Vector) -> Result<ChristoffelJet> {
    let n = jet.g.n;
    let ginv = inverse_checked(&jet.g, x)?;
    let t = first_kind(n, &jet.dg);
    let gamma = raise(n, &ginv, &t);
    let mut dgamma = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for m in 0..n {
        // ∂_m g⁻¹ = -g⁻¹ (∂_m g) g⁻¹
        let dginv = ginv.mul(&jet.dg[m]).mul(&ginv).scale(-1.0);
        let dt = first_kind(n, &jet.ddg[m]);
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut v = 0.0;
                    for l in 0..n {
                        v += dginv.m[i][l] * t[l][j][k] + ginv.m[i][l] * dt[l][j][k];
                    }
                    dgamma[m][i][j][k] = v;
                    dgamma[m][i][k][j] = v;
                }
            }
        }
    }
    Ok(ChristoffelJet {
        g: jet.g,
        gamma,
        dgamma,
    })
}

impl MetricField {
    /// `Γ^i_{jk}` at `x`.
    pub fn christoffel(&self, x: &Vector) -> Result<Gamma> {
        let jet = self.jet(x)?;
        christoffel_from_jet(&jet, x)
    }

    pub fn christoffel_jet(&self, x: &Vector) -> Result<ChristoffelJet> {
        let jet = self.jet(x)?;
        christoffel_jet_from(&jet, x)
    }

    /// Fully covariant curvature `Rm(X,Y,Z,W) = g(R(X,Y)Z, W)` at `x`.
    pub fn riemann(&self, x: &Vector) -> Result<Riemann> {
        Ok(Riemann::from_jet(&self.christoffel_jet(x)?))
    }

    /// Sectional curvature of the plane spanned by `u` and `w` at `x`.
    pub fn sectional_curvature(&self, x: &Vector, u: &Vector, w: &Vector) -> Result<f64> {
        self.riemann(x)?.sectional(u, w)
    }
}

/// `rm[w][j][k][l] = g_{wi} R^i_{jkl}`, so `Rm(X,Y,Z,W) = rm[w][j][k][l] W^w Z^j X^k Y^l`.
#[derive(Clone, Copy, Debug)]
pub struct Riemann {
    pub g: Mat,
    pub rm: [[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl Riemann {
    pub fn from_jet(cj: &ChristoffelJet) -> Self {
        let n = cj.g.n;
        let (gam, dg) = (&cj.gamma, &cj.dgamma);
        let mut r = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = dg[k][i][l][j] - dg[l][i][k][j];
                        for m in 0..n {
                            v += gam[i][k][m] * gam[m][l][j] - gam[i][l][m] * gam[m][k][j];
                        }
                        r[i][j][k][l] = v;
                    }
                }
            }
        }
        let mut rm = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
        for w in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        rm[w][j][k][l] = (0..n).map(|i| cj.g.m[w][i] * r[i][j][k][l]).sum();
                    }
                }
            }
        }
        Riemann { g: cj.g, rm }
    }

    pub fn form(&self, x: &Vector, y: &Vector, z: &Vector, w: &Vector) -> f64 {
        let n = self.g.n;
        let mut s = 0.0;
        for a in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += self.rm[a][j][k][l] * w[a] * z[j] * x[k] * y[l];
                    }
                }
            }
        }
        s
    }

    pub fn sectional(&self, u: &Vector, w: &Vector) -> Result<f64> {
        let (uu, ww, uw) = (self.g.form(u, u), self.g.form(w, w), self.g.form(u, w));
        let area2 = uu * ww - uw * uw;
        if !(area2 > 1e-12 * uu * ww) {
            return Err(Error::DegeneratePlane);
        }
        Ok(self.form(u, w, w, u) / area2)
    }

    /// Sectional curvatures of the coordinate planes `span(e_a, e_b)`, `a < b`.
    pub fn coordinate_planes(&self) -> Vec<((usize, usize), f64)> {
        let n = self.g.n;
        let mut out = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                let mut u = [0.0; MAX_DIM];
                let mut w = [0.0; MAX_DIM];
                u[a] = 1.0;
                w[b] = 1.0;
                // coordinate axes are never collinear
                out.push(((a, b), self.sectional(&u, &w).unwrap_or(f64::NAN)));
            }
        }
        out
    }

    /// Largest sectional curvature over all planes. In dimension 3 every
    /// 2-vector is decomposable, so this is the top eigenvalue of the
    /// curvature operator on `Λ²` in a g-orthonormal frame; in dimension 2
    /// it is the Gauss curvature.
    pub fn max_sectional(&self) -> f64 {
        let n = self.g.n;
        if n == 2 {
            return self.coordinate_planes()[0].1;
        }
        let frame = self.g.spectral_map(|v| 1.0 / v.sqrt());
        let col = |a: usize| -> Vector { std::array::from_fn(|i| if i < n { frame.m[i][a] } else { 0.0 }) };
        let e: Vec<Vector> = (0..n).map(col).collect();
        let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
        let mut op = Mat::zeros(3);
        for (p, &(a, b)) in pairs.iter().enumerate() {
            for (q, &(c, d)) in pairs.iter().enumerate() {
                op.m[p][q] = self.form(&e[a], &e[b], &e[d], &e[c]);
            }
        }
        let (vals, _) = op.symmetrized().symmetric_eigen();
        vals[2]
    }
}

/// Sampled curvature-ceiling certification. This is evidence at the sampled
/// points, not a proof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureCertificate {
    pub ceiling: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub worst_value: f64,
    pub worst_point: Vec<f64>,
    /// Coordinate plane `(a, b)` attaining the worst value, or `None` when the
    /// worst value came from a non-coordinate plane (curvature operator, n = 3).
    pub worst_plane: Option<(usize, usize)>,
    pub passed: bool,
    pub method: String,
}

impl CurvatureCertificate {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::CertificationFailed {
                worst: self.worst_value,
                point: self.worst_point.clone(),
                ceiling: self.ceiling,
            })
        }
    }

    /// Combine certificates from disjoint point sets.
    pub fn merge(self, other: CurvatureCertificate) -> Self {
        let (worst_value, worst_point, worst_plane) = if other.worst_value > self.worst_value {
            (other.worst_value, other.worst_point, other.worst_plane)
        } else {
            (self.worst_value, self.worst_point, self.worst_plane)
        };
        CurvatureCertificate {
            ceiling: self.ceiling,
            tolerance: self.tolerance,
            samples: self.samples + other.samples,
            worst_value,
            worst_point,
            worst_plane,
            passed: self.passed && other.passed,
            method: self.method,
        }
    }
}

/// Maximum sampled sectional curvature over `points`, checked against `k + tol`.
pub fn certify_nonpositive(field: &MetricField, points: &[Vector], k: f64, tol: f64) -> CurvatureCertificate {
    let n = field.dimension();
    let per_point: Vec<(f64, Option<(usize, usize)>)> = points
        .par_iter()
        .map(|x| match field.riemann(x) {
            Ok(r) => {
                let mut worst = f64::NEG_INFINITY;
                let mut plane = None;
                for (ab, v) in r.coordinate_planes() {
                    if v > worst || v.is_nan() {
                        worst = if v.is_nan() { f64::INFINITY } else { v };
                        plane = Some(ab);
                    }
                }
                if n == 3 {
                    let top = r.max_sectional();
                    if top > worst {
                        worst = top;
                        plane = None;
                    }
                }
                (worst, plane)
            }
            // an unevaluable point is a failure witness
            Err(_) => (f64::INFINITY, None),
        })
        .collect();
    let mut worst_value = f64::NEG_INFINITY;
    let mut worst_index = 0;
    let mut worst_plane = None;
    for (i, (v, plane)) in per_point.iter().enumerate() {
        if *v > worst_value {
            worst_value = *v;
            worst_index = i;
            worst_plane = *plane;
        }
    }
    CurvatureCertificate {
        ceiling: k,
        tolerance: tol,
        samples: points.len(),
        worst_value,
        worst_point: points.get(worst_index).map(|p| p[..n].to_vec()).unwrap_or_default(),
        worst_plane,
        passed: worst_value <= k + tol,
        method: if n == 3 {
            "sampled: coordinate planes + curvature-operator maximum".into()
        } else {
            "sampled: Gauss curvature".into()
        },
    }
}

/// Second fundamental form of the coordinate sphere `|x| = 1` with respect to
/// the g-unit outward normal, expressed in a g-orthonormal basis of the
/// tangent space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryShape {
    pub point: Vec<f64>,
    pub form: Mat,
    pub principal_curvatures: Vec<f64>,
    pub positive_definite: bool,
}

pub fn boundary_second_fundamental_form(field: &MetricField, x: &Vector) -> Result<BoundaryShape> {
    let n = field.dimension();
    let r = dot(n, x, x).sqrt();
    if (r - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "boundary point must satisfy |x| = 1, got {r}"
        )));
    }
    let jet = field.jet(x)?;
    let gamma = christoffel_from_jet(&jet, x)?;
    let ginv = inverse_checked(&jet.g, x)?;
    // ∇^g F for F = |x|; on the sphere ∇F = x.
    let normal = ginv.mul_vec(x);
    let len = jet.g.form(&normal, &normal).sqrt();
    let tangent = orthogonal_complement(n, x);
    let ginv_x = normal;
    // (D_v N) with N = g⁻¹ x / |x| extended off the sphere.
    let covariant = |v: &Vector| -> Vector {
        let mut dgv = Mat::zeros(n);
        for a in 0..n {
            dgv = dgv.add(&jet.dg[a].scale(v[a]));
        }
        let a = ginv.mul_vec(&dgv.mul_vec(&ginv_x));
        let b = ginv.mul_vec(v);
        let mut out = [0.0; MAX_DIM];
        for i in 0..n {
            let mut conn = 0.0;
            for j in 0..n {
                for k in 0..n {
                    conn += gamma[i][j][k] * v[j] * normal[k];
                }
            }
            out[i] = (b[i] - a[i] + conn) / len;
        }
        out
    };
    let m = n - 1;
    let mut s = Mat::zeros(m);
    let mut gram = Mat::zeros(m);
    for a in 0..m {
        let dv = covariant(&tangent[a]);
        for b in 0..m {
            s.m[a][b] = jet.g.form(&dv, &tangent[b]);
            gram.m[a][b] = jet.g.form(&tangent[a], &tangent[b]);
        }
    }
    let whiten = gram.spectral_map(|v| 1.0 / v.sqrt());
    let form = s.symmetrized().congruence(&whiten).symmetrized();
    let (principal_curvatures, _) = form.symmetric_eigen();
    let positive_definite = principal_curvatures.iter().all(|&k| k > 0.0);
    Ok(BoundaryShape {
        point: x[..n].to_vec(),
        form,
        principal_curvatures,
        positive_definite,
    })
}

/// Sampled `C^order` distance `sup_x max_ij |∂^α (a_ij - b_ij)|`, `|α| ≤ order`.
pub fn metric_distance(a: &MetricField, b: &MetricField, order: usize, points: &[Vector]) -> Result<f64> {
    let n = a.dimension();
    if b.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.dimension(),
        });
    }
    if order > 2 {
        return Err(Error::InvalidArgument("order must be 0, 1 or 2".into()));
    }
    let per_point: Vec<Result<f64>> = points
        .par_iter()
        .map(|x| {
            let (ja, jb) = (a.jet(x)?, b.jet(x)?);
            let mut d = ja.g.sub(&jb.g).max_abs();
            if order >= 1 {
                for i in 0..n {
                    d = d.max(ja.dg[i].sub(&jb.dg[i]).max_abs());
                }
            }
            if order >= 2 {
                for i in 0..n {
                    for j in 0..n {
                        d = d.max(ja.ddg[i][j].sub(&jb.ddg[i][j]).max_abs());
                    }
                }
            }
            Ok(d)
        })
        .collect();
    let mut worst = 0.0_f64;
    for d in per_point {
        worst = worst.max(d?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector_from_slice;
    use crate::metric::sampling::{closed_ball_grid, halton_ball};
    use crate::metric::{DerivativeMode, MetricSpec, TermSpec};

    fn p(v: &[f64]) -> Vector {
        vector_from_slice(v)
    }

    fn conformal(coeffs: Vec<f64>) -> MetricField {
        MetricField::conformal2d(vec![TermSpec::poly(coeffs)]).unwrap()
    }

    #[test]
    fn euclidean_connection_vanishes() {
        let f = MetricField::euclidean(3);
        let g = f.christoffel(&p(&[0.2, 0.1, -0.3])).unwrap();
        assert!(g.iter().flatten().flatten().all(|v| *v == 0.0));
        let k = f
            .sectional_curvature(&p(&[0.2, 0.1, -0.3]), &p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 1.0]))
            .unwrap();
        assert!(k.abs() < 1e-6);
    }

    #[test]
    fn constant_curvature_connection_vanishes_at_origin() {
        let f = MetricField::constant_curvature(3, -1.0).unwrap();
        let g = f.christoffel(&p(&[0.0, 0.0, 0.0])).unwrap();
        assert!(g.iter().flatten().flatten().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn conformal_christoffel_closed_form() {
        // u = x₁: Γ^i_jk = δ^i_j ∂_k u + δ^i_k ∂_j u - δ_jk ∂_i u
        let f = conformal(vec![0.0, 1.0]);
        let g = f.christoffel(&p(&[0.0, 0.0])).unwrap();
        let du = [1.0, 0.0];
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let expected = d(i, j) * du[k] + d(i, k) * du[j] - d(j, k) * du[i];
                    assert!((g[i][j][k] - expected).abs() < 1e-14, "Γ^{i}_{j}{k}");
                }
            }
        }
    }

    #[test]
    fn hyperbolic_sectional_curvature_is_minus_one() {
        for n in [2, 3] {
            let f = MetricField::constant_curvature(n, -1.0).unwrap();
            for x in halton_ball(n, 20) {
                let k = f
                    .sectional_curvature(&x, &p(&[1.0, 0.3, 0.0]), &p(&[-0.2, 1.0, 0.5]))
                    .unwrap();
                assert!((k + 1.0).abs() < 1e-4, "n={n} x={x:?} K={k}");
            }
        }
    }

    #[test]
    fn hyperbolic_curvature_by_finite_differences() {
        let f = MetricField::constant_curvature(2, -1.0)
            .unwrap()
            .with_derivative_mode(DerivativeMode::FiniteDifference);
        let k = f
            .sectional_curvature(&p(&[0.3, -0.4]), &p(&[1.0, 0.0]), &p(&[0.0, 1.0]))
            .unwrap();
        assert!((k + 1.0).abs() < 1e-4, "K={k}");
    }

    #[test]
    fn conformal_gauss_curvature_at_origin() {
        // u = (x² + y²)/4 → K(0) = -e^{-2u} Δu = -1
        let f = conformal(vec![0.0, 0.0, 0.0, 0.25, 0.0, 0.25]);
        let k = f
            .sectional_curvature(&p(&[0.0, 0.0]), &p(&[1.0, 0.0]), &p(&[0.0, 1.0]))
            .unwrap();
        assert!((k + 1.0).abs() < 1e-4);
    }

    #[test]
    fn degenerate_plane_is_an_error() {
        let f = MetricField::euclidean(3);
        let r = f.sectional_curvature(&p(&[0.0, 0.0, 0.0]), &p(&[1.0, 2.0, 0.0]), &p(&[2.0, 4.0, 0.0]));
        assert!(matches!(r, Err(Error::DegeneratePlane)));
    }

    #[test]
    fn certification_examples() {
        let pts = halton_ball(2, 2000);
        let c = certify_nonpositive(&MetricField::euclidean(2), &pts, 0.0, TOL_CURV);
        assert!(c.passed);
        assert!(c.worst_value.abs() < 1e-12);

        let hyp = MetricField::constant_curvature(2, -1.0).unwrap();
        let c = certify_nonpositive(&hyp, &pts, -1.0, TOL_CURV);
        assert!(c.passed, "worst {}", c.worst_value);

        let positive = conformal(vec![0.0, 0.0, 0.0, -0.25, 0.0, -0.25]);
        let c = certify_nonpositive(&positive, &pts, 0.0, TOL_CURV);
        assert!(!c.passed);
        assert!(c.worst_value > 0.0);
        assert_eq!(c.worst_point.len(), 2);
        assert!(matches!(c.into_result(), Err(Error::CertificationFailed { .. })));
    }

    #[test]
    fn euclidean_unit_sphere_is_umbilic() {
        let s = boundary_second_fundamental_form(&MetricField::euclidean(3), &p(&[1.0, 0.0, 0.0])).unwrap();
        assert!(s.form.sub(&Mat::identity(2)).max_abs() < 1e-14);
        assert!(s.positive_definite);
    }

    #[test]
    fn hyperbolic_boundary_curvature_is_coth_one() {
        let s = boundary_second_fundamental_form(&MetricField::constant_curvature(2, -1.0).unwrap(), &p(&[1.0, 0.0]))
            .unwrap();
        let coth = 1.0_f64.cosh() / 1.0_f64.sinh();
        assert!((s.principal_curvatures[0] - coth).abs() < 1e-12);
        assert!((coth - 1.31304).abs() < 1e-5);
    }

    #[test]
    fn small_conformal_boundary_is_convex() {
        let f = conformal(vec![0.003, 0.004, -0.002, 0.002, 0.001, 0.002]);
        for x in crate::metric::sampling::sphere_points(2, 64) {
            assert!(boundary_second_fundamental_form(&f, &x).unwrap().positive_definite);
        }
    }

    #[test]
    fn distance_examples() {
        let grid = closed_ball_grid(2, 500, 64);
        let e = MetricField::euclidean(2);
        assert_eq!(metric_distance(&e, &e, 2, &grid).unwrap(), 0.0);
        let c = 0.03;
        let conf = conformal(vec![c]);
        let d = metric_distance(&e, &conf, 0, &grid).unwrap();
        assert!((d - ((2.0 * c).exp() - 1.0)).abs() < 1e-15);
        let hyp = MetricField::constant_curvature(2, -1.0).unwrap();
        let d = metric_distance(&e, &hyp, 0, &grid).unwrap();
        assert!((d - (1.0_f64.sinh().powi(2) - 1.0)).abs() < 1e-12, "{d}");
        let three = MetricField::from_spec(MetricSpec::euclidean(3)).unwrap();
        assert!(metric_distance(&e, &three, 0, &grid).is_err());
    }
}
