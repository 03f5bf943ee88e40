//! Fixed-capacity dense linear algebra for dimensions 2 and 3.
//!
//! Everything on the geodesic hot path works with stack arrays padded to
//! [`MAX_DIM`]; entries outside the active `n × n` block are kept at zero.
//! Eigen-decompositions are delegated to nalgebra's symmetric solver.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 3;

/// A point or tangent vector, padded with zeros past the active dimension.
pub type Vector = [f64; MAX_DIM];

pub fn dot(n: usize, a: &Vector, b: &Vector) -> f64 {
    (0..n).map(|i| a[i] * b[i]).sum()
}

pub fn norm(n: usize, a: &Vector) -> f64 {
    dot(n, a, a).sqrt()
}

pub fn vector_from_slice(v: &[f64]) -> Vector {
    let mut out = [0.0; MAX_DIM];
    out[..v.len()].copy_from_slice(v);
    out
}

/// Square matrix of active size `n` stored in a padded 3×3 array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub n: usize,
    pub m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        debug_assert!(n <= MAX_DIM);
        Mat {
            n,
            m: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n);
        for i in 0..n {
            out.m[i][i] = 1.0;
        }
        out
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut out = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            out.m[i][i] = *v;
        }
        out
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut out = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate().take(n) {
                out.m[i][j] = *v;
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.m[i][..self.n].to_vec()).collect()
    }

    /// `u vᵀ`
    pub fn outer(n: usize, u: &Vector, v: &Vector) -> Self {
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.m[i][j] = u[i] * v[j];
            }
        }
        out
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] -= other.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] *= s;
            }
        }
        out
    }

    pub fn mul(&self, other: &Mat) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.m[i][k] * other.m[k][j];
                }
                out.m[i][j] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        let mut out = [0.0; MAX_DIM];
        for i in 0..self.n {
            out[i] = (0..self.n).map(|j| self.m[i][j] * v[j]).sum();
        }
        out
    }

    /// The bilinear form `vᵀ A w`.
    pub fn form(&self, v: &Vector, w: &Vector) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += v[i] * self.m[i][j] * w[j];
            }
        }
        s
    }

    /// `Sᵀ A S`
    pub fn congruence(&self, s: &Mat) -> Self {
        s.transpose().mul(self).mul(s)
    }

    /// Average with the transpose; exact no-op on symmetric input.
    pub fn symmetrized(&self) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let a = 0.5 * (self.m[i][j] + self.m[j][i]);
                out.m[i][j] = a;
                out.m[j][i] = a;
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.m[i][j] - self.m[j][i]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max(self.m[i][j].abs());
            }
        }
        worst
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.n {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            3 => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            _ => unreachable!("dimension {} unsupported", self.n),
        }
    }

    /// Inverse by cofactors; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.m;
        let mut out = Self::zeros(self.n);
        match self.n {
            1 => out.m[0][0] = 1.0 / d,
            2 => {
                out.m[0][0] = m[1][1] / d;
                out.m[0][1] = -m[0][1] / d;
                out.m[1][0] = -m[1][0] / d;
                out.m[1][1] = m[0][0] / d;
            }
            3 => {
                out.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
                out.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
                out.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
                out.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
                out.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
                out.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
                out.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
                out.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
                out.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
            }
            _ => unreachable!(),
        }
        Some(out)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.m[i][j])
    }

    pub fn from_dmatrix(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.m[i][j] = a[(i, j)];
            }
        }
        out
    }

    /// Eigenvalues (ascending) and matching eigenvectors (as columns) of a
    /// symmetric matrix.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, Mat) {
        let eig = SymmetricEigen::new(self.symmetrized().to_dmatrix());
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vecs = Mat::zeros(self.n);
        for (col, &src) in order.iter().enumerate() {
            for row in 0..self.n {
                vecs.m[row][col] = eig.eigenvectors[(row, src)];
            }
        }
        (values, vecs)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.symmetric_eigen().0[0]
    }

    /// Applies `func` to the spectrum of a symmetric matrix.
    pub fn spectral_map(&self, func: impl Fn(f64) -> f64) -> Mat {
        let (values, q) = self.symmetric_eigen();
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.m[i][j] = (0..n).map(|k| q.m[i][k] * func(values[k]) * q.m[j][k]).sum();
            }
        }
        out.symmetrized()
    }

    /// Unique SPD square root (spectral construction).
    pub fn spd_sqrt(&self) -> Mat {
        self.spectral_map(f64::sqrt)
    }
}

/// Euclidean-orthonormal basis of the complement of `x` (as columns, `n × (n-1)`),
/// returned as a list of vectors.
pub fn orthogonal_complement(n: usize, x: &Vector) -> Vec<Vector> {
    let len = norm(n, x);
    let unit: Vector = std::array::from_fn(|i| if i < n { x[i] / len } else { 0.0 });
    let mut basis: Vec<Vector> = Vec::with_capacity(n - 1);
    // Gram-Schmidt over the coordinate axes, skipping the most aligned one.
    let skip = (0..n)
        .max_by(|&a, &b| unit[a].abs().total_cmp(&unit[b].abs()))
        .unwrap_or(0);
    for axis in (0..n).filter(|&a| a != skip) {
        let mut v = [0.0; MAX_DIM];
        v[axis] = 1.0;
        let p = dot(n, &v, &unit);
        for i in 0..n {
            v[i] -= p * unit[i];
        }
        for b in &basis {
            let p = dot(n, &v, b);
            for i in 0..n {
                v[i] -= p * b[i];
            }
        }
        let l = norm(n, &v);
        for vi in v.iter_mut().take(n) {
            *vi /= l;
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip_3x3() {
        let a = Mat::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]);
        let prod = a.mul(&a.inverse().unwrap());
        assert!(prod.sub(&Mat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn spd_sqrt_of_diagonal() {
        let h = Mat::diag(&[4.0, 1.0]).spd_sqrt();
        assert!(h.sub(&Mat::diag(&[2.0, 1.0])).max_abs() < 1e-14);
    }

    #[test]
    fn complement_is_orthonormal() {
        let x = [0.3, -0.4, 0.866];
        let basis = orthogonal_complement(3, &x);
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert!(dot(3, b, &x).abs() < 1e-14);
            assert!((norm(3, b) - 1.0).abs() < 1e-14);
        }
        assert!(dot(3, &basis[0], &basis[1]).abs() < 1e-14);
    }
}
