//! The matrix comparison lemma: for SPD `A ⪰ B`,
//! (i) `det A ≥ det B`, with equality only if `A = B`, and
//! (ii) `det(A) vᵀA⁻¹v ≥ det(B) vᵀB⁻¹v` for every `v`.
//!
//! Everything here works in arbitrary dimension with `nalgebra::DMatrix`
//! and symmetric eigensolvers only.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on the minimum eigenvalue of `A − B`.
pub const TOL_PSD: f64 = 1e-12;
pub const TOL_SYMMETRY: f64 = 1e-12;
pub const TOL_DET: f64 = 1e-12;
/// Relative determinant gap at which the equality branch fires.
pub const TOL_DET_EQUALITY: f64 = 1e-10;
/// `‖A − B‖_∞` allowed when the equality branch fires.
pub const TOL_EQUAL_MATRICES: f64 = 1e-8;
pub const TOL_WEIGHTED: f64 = 1e-10;
pub const TOL_WHITENED: f64 = 1e-10;

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let asym = (a - a.transpose()).amax();
    if asym > TOL_SYMMETRY * a.amax().max(1.0) {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn sym_det(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).iter().product()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domination {
    pub dominates: bool,
    /// Smallest eigenvalue of `A − B`.
    pub min_eigenvalue: f64,
}

/// `A ⪰ B` up to [`TOL_PSD`].
pub fn dominates(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Domination> {
    check_symmetric(a)?;
    check_symmetric(b)?;
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let min_eigenvalue = sym_eigenvalues(&(a - b))[0];
    Ok(Domination {
        dominates: min_eigenvalue >= -TOL_PSD,
        min_eigenvalue,
    })
}

/// An SPD pair with `A ⪰ B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdPair {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl SpdPair {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let d = dominates(&a, &b)?;
        for (name, m) in [("A", &a), ("B", &b)] {
            let min = sym_eigenvalues(m)[0];
            if !(min > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} is not positive definite (min eigenvalue {min})"
                )));
            }
        }
        if !d.dominates {
            return Err(Error::InvalidArgument(format!(
                "A - B is not positive semidefinite (min eigenvalue {})",
                d.min_eigenvalue
            )));
        }
        Ok(SpdPair { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `(SᵀAS, SᵀBS)`.
    pub fn congruent(&self, s: &DMatrix<f64>) -> Result<Self> {
        let sym = |m: &DMatrix<f64>| {
            let c = s.transpose() * m * s;
            (&c + c.transpose()) * 0.5
        };
        SpdPair::new(sym(&self.a), sym(&self.b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Whitened {
    /// `M = Λ^{-1/2} Qᵀ A Q Λ^{-1/2}` with `B = Q Λ Qᵀ`.
    pub m: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub det_m: f64,
    /// `det A / det B`
    pub det_ratio: f64,
    /// All eigenvalues `≥ 1 − 1e-10` and `det M = det A/det B` to `1e-10` relative.
    pub holds: bool,
}

pub fn whitened_form(pair: &SpdPair) -> Whitened {
    whiten(&pair.a, &pair.b)
}

/// The whitened form of any symmetric `A` against SPD `B`, without the
/// domination hypothesis (so `holds` may be false).
pub fn whiten(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Whitened {
    let eig = SymmetricEigen::new(b.clone());
    let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let w = &eig.eigenvectors * scale;
    let m = w.transpose() * a * &w;
    let m = (&m + m.transpose()) * 0.5;
    let eigenvalues = sym_eigenvalues(&m);
    let det_m: f64 = eigenvalues.iter().product();
    let det_ratio = sym_det(a) / sym_det(b);
    let holds =
        eigenvalues.iter().all(|&l| l >= 1.0 - TOL_WHITENED) && ((det_m - det_ratio) / det_ratio).abs() <= TOL_WHITENED;
    Whitened {
        m,
        eigenvalues,
        det_m,
        det_ratio,
        holds,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetVerdict {
    pub det_a: f64,
    pub det_b: f64,
    /// `det A ≥ det B − 1e-12`
    pub holds: bool,
    /// `|det A − det B| ≤ 1e-10 det B`
    pub equality: bool,
    /// `‖A − B‖_∞`
    pub distance: f64,
    /// Equality implies `A = B` to `1e-8`.
    pub equality_consistent: bool,
}

pub fn check_det_inequality(pair: &SpdPair) -> DetVerdict {
    let det_a = sym_det(&pair.a);
    let det_b = sym_det(&pair.b);
    let equality = (det_a - det_b).abs() <= TOL_DET_EQUALITY * det_b.abs();
    let distance = (&pair.a - &pair.b).amax();
    DetVerdict {
        det_a,
        det_b,
        holds: det_a >= det_b - TOL_DET,
        equality,
        distance,
        equality_consistent: !equality || distance <= TOL_EQUAL_MATRICES,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedVerdict {
    /// `det(A) vᵀA⁻¹v`
    pub lhs: f64,
    /// `det(B) vᵀB⁻¹v`
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_weighted_inverse(pair: &SpdPair, v: &DVector<f64>) -> Result<WeightedVerdict> {
    if v.len() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: v.len(),
        });
    }
    if v.amax() == 0.0 {
        return Err(Error::InvalidArgument("v must be nonzero".into()));
    }
    let weighted = |m: &DMatrix<f64>| -> Result<f64> {
        let chol = m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("matrix is not positive definite".into()))?;
        Ok(sym_det(m) * v.dot(&chol.solve(v)))
    };
    let lhs = weighted(&pair.a)?;
    let rhs = weighted(&pair.b)?;
    Ok(WeightedVerdict {
        lhs,
        rhs,
        holds: lhs >= rhs - TOL_WEIGHTED * rhs.abs().max(1.0),
    })
}

/// Random SPD matrix `GᵀG + c I` with `G` uniform in `[-1, 1]`.
pub fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let shift = rng.gen_range(0.05..1.0);
    let b = g.transpose() * g + DMatrix::identity(n, n) * shift;
    (&b + b.transpose()) * 0.5
}

/// `(B + PᵀP, B)`, a dominated pair by construction.
pub fn random_dominated_pair(n: usize, rng: &mut impl Rng) -> SpdPair {
    let b = random_spd(n, rng);
    let scale = 10f64.powf(rng.gen_range(-3.0..0.5));
    let rank = rng.gen_range(1..=n);
    let p = DMatrix::from_fn(rank, n, |_, _| scale * rng.gen_range(-1.0..1.0));
    let a = &b + p.transpose() * p;
    let a = (&a + a.transpose()) * 0.5;
    SpdPair { a, b }
}

pub fn random_vector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if v.amax() > 1e-3 {
            return v;
        }
    }
}

/// Random invertible `S` (rejection on the smallest singular value).
pub fn random_invertible(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    loop {
        let s = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        if s.clone().svd(false, false).singular_values.min() > 0.1 {
            return s;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub pairs: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub vectors_per_pair: usize,
    /// Every `equality_every`-th pair is `(B, B)`.
    pub equality_every: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            pairs: 1000,
            min_dim: 2,
            max_dim: 6,
            vectors_per_pair: 10,
            equality_every: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: Option<SuiteConfig>,
    pub pairs: usize,
    pub vectors: usize,
    pub domination_failures: usize,
    pub whitened_failures: usize,
    pub det_failures: usize,
    pub weighted_failures: usize,
    pub equality_inconsistent: usize,
    pub equality_pairs: usize,
    /// Equality pairs `(B, B)` that hit the equality branch.
    pub equality_branch_hits: usize,
    /// Strictly dominated pairs that hit it (allowed only when `A ≈ B`).
    pub spurious_equality: usize,
    pub congruence_checked: usize,
    pub congruence_changed: usize,
    pub worst_det_margin: f64,
    pub worst_weighted_margin: f64,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.domination_failures
            + self.whitened_failures
            + self.det_failures
            + self.weighted_failures
            + self.equality_inconsistent
            + self.congruence_changed
            + (self.equality_pairs - self.equality_branch_hits)
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

/// Verdict tuple compared under congruence.
fn verdict_signature(pair: &SpdPair, vs: &[DVector<f64>]) -> Result<(bool, bool, bool, Vec<bool>)> {
    let d = dominates(&pair.a, &pair.b)?;
    let det = check_det_inequality(pair);
    let w: Vec<bool> = vs
        .iter()
        .map(|v| check_weighted_inverse(pair, v).map(|r| r.holds))
        .collect::<Result<_>>()?;
    Ok((d.dominates, det.holds, det.equality_consistent, w))
}

/// Randomized property suite over dominated pairs. Deterministic in the seed.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    if config.min_dim < 1 || config.max_dim < config.min_dim {
        return Err(Error::InvalidArgument("bad dimension range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rep = SuiteReport {
        config: Some(config.clone()),
        worst_det_margin: f64::INFINITY,
        worst_weighted_margin: f64::INFINITY,
        ..Default::default()
    };
    let span = config.max_dim - config.min_dim + 1;
    for p in 0..config.pairs {
        let n = config.min_dim + p % span;
        let equal = config.equality_every > 0 && p % config.equality_every == 0;
        let pair = if equal {
            let b = random_spd(n, &mut rng);
            SpdPair { a: b.clone(), b }
        } else {
            random_dominated_pair(n, &mut rng)
        };
        rep.pairs += 1;
        if !dominates(&pair.a, &pair.b)?.dominates {
            rep.domination_failures += 1;
        }
        if !whitened_form(&pair).holds {
            rep.whitened_failures += 1;
        }
        let det = check_det_inequality(&pair);
        rep.worst_det_margin = rep.worst_det_margin.min(det.det_a - det.det_b);
        if !det.holds {
            rep.det_failures += 1;
        }
        if !det.equality_consistent {
            rep.equality_inconsistent += 1;
        }
        if equal {
            rep.equality_pairs += 1;
            if det.equality {
                rep.equality_branch_hits += 1;
            }
        } else if det.equality {
            rep.spurious_equality += 1;
        }
        let vs: Vec<DVector<f64>> = (0..config.vectors_per_pair)
            .map(|_| random_vector(n, &mut rng))
            .collect();
        for v in &vs {
            let w = check_weighted_inverse(&pair, v)?;
            rep.vectors += 1;
            rep.worst_weighted_margin = rep.worst_weighted_margin.min(w.lhs - w.rhs);
            if !w.holds {
                rep.weighted_failures += 1;
            }
        }
        let s = random_invertible(n, &mut rng);
        let moved = pair.congruent(&s)?;
        rep.congruence_checked += 1;
        if verdict_signature(&pair, &vs)? != verdict_signature(&moved, &vs)? {
            rep.congruence_changed += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn domination_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let d = dominates(&(&i2 * 2.0), &i2).unwrap();
        assert!(d.dominates && (d.min_eigenvalue - 1.0).abs() < 1e-14);
        assert!(!dominates(&i2, &(&i2 * 2.0)).unwrap().dominates);
        let d = dominates(&m(&[&[2.0, 1.0], &[1.0, 2.0]]), &i2).unwrap();
        assert!(d.dominates && d.min_eigenvalue.abs() < 1e-14);
        assert!(matches!(
            dominates(&m(&[&[1.0, 2.0], &[0.0, 1.0]]), &i2),
            Err(Error::Asymmetric(_))
        ));
    }

    #[test]
    fn whitened_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let w = whitened_form(&SpdPair::new(i2.clone(), i2.clone()).unwrap());
        assert!((&w.m - &i2).amax() < 1e-14 && w.holds);
        let w = whitened_form(&SpdPair::new(&i2 * 4.0, i2.clone()).unwrap());
        assert!(w.eigenvalues.iter().all(|l| (l - 4.0).abs() < 1e-13));
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        // not a dominated pair: A − B has eigenvalues (1 ± √5)/2
        assert!(SpdPair::new(a.clone(), b.clone()).is_err());
        let w = whiten(&a, &b);
        assert!((w.det_m - 1.5).abs() < 1e-13 && (w.det_ratio - 1.5).abs() < 1e-13);
        assert!(!w.holds);
        // eigenvalues of B^{-1/2} A B^{-1/2} solve det(A − λB) = 2λ² − 6λ + 3 = 0
        let disc = (36.0_f64 - 24.0).sqrt();
        let expect = [(6.0 - disc) / 4.0, (6.0 + disc) / 4.0];
        for (l, e) in w.eigenvalues.iter().zip(expect) {
            assert!((l - e).abs() < 1e-13);
        }
    }

    #[test]
    fn det_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let v = check_det_inequality(&SpdPair::new(&i2 * 2.0, i2.clone()).unwrap());
        assert!(v.holds && !v.equality && (v.det_a - 4.0).abs() < 1e-13);
        let v = check_det_inequality(&SpdPair::new(m(&[&[2.0, 1.0], &[1.0, 2.0]]), i2.clone()).unwrap());
        assert!(v.holds && (v.det_a - 3.0).abs() < 1e-13 && (v.det_b - 1.0).abs() < 1e-14);
        let v = check_det_inequality(&SpdPair::new(i2.clone(), i2.clone()).unwrap());
        assert!(v.equality && v.equality_consistent);
        assert!(SpdPair::new(i2.clone(), &i2 * 2.0).is_err());
    }

    #[test]
    fn weighted_inverse_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let w = check_weighted_inverse(&SpdPair::new(&i2 * 2.0, i2.clone()).unwrap(), &e1).unwrap();
        assert!((w.lhs - 2.0).abs() < 1e-14 && (w.rhs - 1.0).abs() < 1e-14 && w.holds);
        let same = SpdPair::new(i2.clone(), i2.clone()).unwrap();
        let v = DVector::from_vec(vec![0.3, -0.7]);
        let w = check_weighted_inverse(&same, &v).unwrap();
        assert_eq!(w.lhs, w.rhs);
        assert!(check_weighted_inverse(&same, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn random_pair_many_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pair = random_dominated_pair(4, &mut rng);
        for _ in 0..100 {
            assert!(
                check_weighted_inverse(&pair, &random_vector(4, &mut rng))
                    .unwrap()
                    .holds
            );
        }
    }

    #[test]
    fn suite_is_deterministic_and_clean() {
        let cfg = SuiteConfig {
            pairs: 100,
            ..Default::default()
        };
        let a = run_suite(&cfg).unwrap();
        assert!(a.passed(), "{a:?}");
        assert_eq!(a, run_suite(&cfg).unwrap());
        assert_eq!(a.equality_branch_hits, 10);
    }
}
