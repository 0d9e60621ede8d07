//! Dense matrices: LU with partial pivoting, Cholesky, a cyclic Jacobi
//! symmetric eigensolver, and power-iteration spectral norms.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::util::{self, SplitMix64};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMat {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    /// Write a vector into column j.
    pub fn set_col(&mut self, j: usize, col: &[f64]) {
        debug_assert_eq!(col.len(), self.nrows);
        for i in 0..self.nrows {
            self[(i, j)] = col[i];
        }
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> DMat {
        let mut t = DMat::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            y[i] = util::dot(self.row(i), x);
        }
    }

    /// y = A^T x
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for i in 0..self.nrows {
            util::axpy(x[i], self.row(i), y);
        }
    }

    /// C = self * other (ikj loop order).
    pub fn matmul(&self, other: &DMat) -> DMat {
        assert_eq!(self.ncols, other.nrows);
        let mut c = DMat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let crow = c.row_mut(i);
                for j in 0..other.ncols {
                    crow[j] += a * brow[j];
                }
            }
        }
        c
    }

    /// self += alpha * other
    pub fn add_scaled(&mut self, alpha: f64, other: &DMat) {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        util::axpy(alpha, &other.data, &mut self.data);
    }

    pub fn scale(&mut self, alpha: f64) {
        util::scale(alpha, &mut self.data);
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        util::max_abs(&self.data)
    }

    /// LU factorization with partial pivoting. Pivots below 1e-14 of the
    /// largest matrix entry are treated as numerically singular.
    pub fn lu(&self) -> Result<LuFactors> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let scale = self.max_abs();
        let mut lu = self.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // Pivot search.
            let mut p = k;
            let mut pmax = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax <= 1e-14 * scale || !pmax.is_finite() {
                return Err(Error::SingularFactorization);
            }
            if p != k {
                piv.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let inv_piv = 1.0 / lu[(k, k)];
            for i in (k + 1)..n {
                let l = lu[(i, k)] * inv_piv;
                lu[(i, k)] = l;
                if l != 0.0 {
                    let (top, bottom) = lu.data.split_at_mut((i) * n);
                    let krow = &top[k * n..k * n + n];
                    let irow = &mut bottom[..n];
                    for j in (k + 1)..n {
                        irow[j] -= l * krow[j];
                    }
                }
            }
        }
        Ok(LuFactors { lu, piv })
    }

    /// Cholesky factor L (lower) with self = L L^T; fails if not SPD.
    pub fn cholesky(&self) -> Result<DMat> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut l = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::SingularFactorization);
                    }
                    l[(i, j)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Forward substitution with the lower-triangular factor produced by
    /// [`DMat::cholesky`]: solves L y = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.nrows;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self[(i, k)] * y[k];
            }
            y[i] /= self[(i, i)];
        }
        y
    }

    /// Back substitution with the transpose of the Cholesky factor: L^T x = b.
    pub fn solve_lower_t(&self, b: &[f64]) -> Vec<f64> {
        let n = self.nrows;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self[(k, i)] * x[k];
            }
            x[i] /= self[(i, i)];
        }
        x
    }

    /// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
    ///
    /// Returns eigenvalues in ascending order and the matching orthonormal
    /// eigenvectors as the columns of the returned matrix.
    pub fn sym_eig(&self) -> (Vec<f64>, DMat) {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut a = self.clone();
        let mut v = DMat::identity(n);
        if n == 0 {
            return (Vec::new(), v);
        }
        let norm = a.max_abs().max(1e-300);
        let tol = 1e-15 * norm;
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a[(p, q)].abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= 1e-2 * tol {
                        continue;
                    }
                    // Jacobi rotation parameters.
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // A <- J^T A J applied to rows/cols p, q.
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut eig: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)], i)).collect();
        eig.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let values: Vec<f64> = eig.iter().map(|e| e.0).collect();
        let mut vectors = DMat::zeros(n, n);
        for (new_j, &(_, old_j)) in eig.iter().enumerate() {
            for i in 0..n {
                vectors[(i, new_j)] = v[(i, old_j)];
            }
        }
        (values, vectors)
    }

    /// Spectral norm (largest singular value) via power iteration on A^T A.
    pub fn spectral_norm(&self) -> f64 {
        if self.nrows == 0 || self.ncols == 0 {
            return 0.0;
        }
        let mut rng = SplitMix64::new(0x5eed_0001);
        let mut x = vec![0.0; self.ncols];
        rng.fill_sym(&mut x);
        let mut y = vec![0.0; self.nrows];
        let mut sigma2 = 0.0;
        for _ in 0..200 {
            self.matvec(&x, &mut y);
            let mut xn = vec![0.0; self.ncols];
            self.matvec_t(&y, &mut xn);
            let nrm = util::norm2(&xn);
            if nrm == 0.0 {
                return 0.0;
            }
            util::scale(1.0 / nrm, &mut xn);
            sigma2 = nrm;
            x = xn;
        }
        sigma2.sqrt()
    }
}

impl core::ops::Index<(usize, usize)> for DMat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DMat,
    piv: Vec<usize>,
}

impl LuFactors {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.nrows;
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        // Forward substitution (unit lower).
        for i in 1..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Inverse as a dense matrix (solve against identity columns).
    pub fn inverse(&self) -> DMat {
        let n = self.lu.nrows;
        let mut inv = DMat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            inv.set_col(j, &col);
            e[j] = 0.0;
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(n: usize, seed: u64) -> DMat {
        let mut rng = SplitMix64::new(seed);
        let mut a = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.next_sym();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    #[test]
    fn lu_solves_random_system() {
        let n = 25;
        let mut rng = SplitMix64::new(3);
        let mut a = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.next_sym();
            }
            a[(i, i)] += 5.0;
        }
        let mut x = vec![0.0; n];
        rng.fill_sym(&mut x);
        let mut b = vec![0.0; n];
        a.matvec(&x, &mut b);
        let lu = a.lu().unwrap();
        let xs = lu.solve(&b);
        assert!(util::max_abs_diff(&x, &xs) < 1e-11);
    }

    #[test]
    fn lu_detects_singular() {
        let mut a = DMat::zeros(3, 3);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        // Third row zero.
        assert_eq!(a.lu().unwrap_err(), Error::SingularFactorization);
    }

    #[test]
    fn jacobi_eig_reconstructs() {
        for n in [1usize, 2, 5, 20, 40] {
            let a = random_sym(n, 11 + n as u64);
            let (vals, vecs) = a.sym_eig();
            // Orthonormality.
            let vtv = vecs.transpose().matmul(&vecs);
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((vtv[(i, j)] - expect).abs() < 1e-12);
                }
            }
            // A v_j = lambda_j v_j.
            for j in 0..n {
                let vj = vecs.col(j);
                let mut av = vec![0.0; n];
                a.matvec(&vj, &mut av);
                for i in 0..n {
                    assert!(
                        (av[i] - vals[j] * vj[i]).abs() < 1e-11,
                        "n={n} j={j} i={i}"
                    );
                }
            }
            // Ascending order.
            for j in 1..n {
                assert!(vals[j] >= vals[j - 1]);
            }
        }
    }

    #[test]
    fn eig_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let mut a = DMat::zeros(2, 2);
        a[(0, 0)] = 2.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(1, 1)] = 2.0;
        let (vals, _) = a.sym_eig();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_round_trip() {
        let n = 12;
        let r = random_sym(n, 5);
        // SPD by shifting.
        let mut a = r.clone();
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        let l = a.cholesky().unwrap();
        let llt = l.matmul(&l.transpose());
        for i in 0..n {
            for j in 0..n {
                assert!((llt[(i, j)] - a[(i, j)]).abs() < 1e-11);
            }
        }
        // solve_lower / solve_lower_t compose to A^{-1}.
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let y = l.solve_lower(&b);
        let x = l.solve_lower_t(&y);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        assert!(util::max_abs_diff(&ax, &b) < 1e-10);
    }

    #[test]
    fn spectral_norm_of_diag() {
        let mut a = DMat::zeros(3, 3);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = -7.0;
        a[(2, 2)] = 4.0;
        assert!((a.spectral_norm() - 7.0).abs() < 1e-9);
    }
}
