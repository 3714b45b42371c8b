//! Small dense linear algebra for d×d symmetric matrices and d-vectors.
//!
//! Dimensions here are tiny (the ambient dimension of the diffusion), so
//! everything is hand-rolled: row-major storage, unblocked Cholesky, and a
//! cyclic Jacobi sweep for symmetric eigenvalue ranges. All routines are
//! deterministic.

use crate::error::{Error, Result};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::usage("matrix rows must form a square"));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            data.extend_from_slice(r);
        }
        Ok(Matrix { dim, data })
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * entries.len() + i] = e;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn fill_identity(&mut self) {
        self.data.fill(0.0);
        for i in 0..self.dim {
            self.data[i * self.dim + i] = 1.0;
        }
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(0.0);
    }

    pub fn copy_from(&mut self, other: &Matrix) {
        debug_assert_eq!(self.dim, other.dim);
        self.data.copy_from_slice(&other.data);
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, other: &Matrix, w: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += w * o;
        }
    }

    pub fn scale(&mut self, w: f64) {
        for s in self.data.iter_mut() {
            *s *= w;
        }
    }

    /// `out = self * v`.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            out[i] = dot(row, v);
        }
    }

    /// `vᵗ self v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let mut q = 0.0;
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            q += v[i] * dot(row, v);
        }
        q
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Lower-triangular Cholesky factor, written into `out`.
    ///
    /// Fails with a numeric error naming the pivot when the matrix is not
    /// positive definite.
    pub fn cholesky_into(&self, out: &mut Matrix) -> Result<()> {
        debug_assert_eq!(self.dim, out.dim);
        let d = self.dim;
        out.data.fill(0.0);
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= out.get(i, k) * out.get(j, k);
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::numeric(format!(
                            "cholesky pivot {i} is non-positive ({s:e})"
                        )));
                    }
                    out.set(i, j, s.sqrt());
                } else {
                    out.set(i, j, s / out.get(j, j));
                }
            }
        }
        Ok(())
    }

    pub fn cholesky(&self) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.dim);
        self.cholesky_into(&mut out)?;
        Ok(out)
    }

    /// `self * selfᵗ`, for checking Cholesky reconstructions.
    pub fn times_transpose(&self) -> Matrix {
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.get(i, k) * self.get(j, k);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    /// (min, max) eigenvalue of a symmetric matrix by cyclic Jacobi rotation.
    pub fn symmetric_eigen_range(&self) -> (f64, f64) {
        let d = self.dim;
        if d == 1 {
            return (self.data[0], self.data[0]);
        }
        let mut m = self.clone();
        let tol = 1e-14 * self.frobenius_norm().max(f64::MIN_POSITIVE);
        for _sweep in 0..64 {
            let mut off = 0.0f64;
            for p in 0..d {
                for q in (p + 1)..d {
                    off = off.max(m.get(p, q).abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = m.get(p, q);
                    if apq.abs() <= tol {
                        continue;
                    }
                    let app = m.get(p, p);
                    let aqq = m.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let mkp = m.get(k, p);
                        let mkq = m.get(k, q);
                        m.set(k, p, c * mkp - s * mkq);
                        m.set(k, q, s * mkp + c * mkq);
                    }
                    for k in 0..d {
                        let mpk = m.get(p, k);
                        let mqk = m.get(q, k);
                        m.set(p, k, c * mpk - s * mqk);
                        m.set(q, k, s * mpk + c * mqk);
                    }
                }
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..d {
            let e = m.get(i, i);
            lo = lo.min(e);
            hi = hi.max(e);
        }
        (lo, hi)
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for i in 0..self.dim {
            seq.serialize_element(&self.data[i * self.dim..(i + 1) * self.dim])?;
        }
        seq.end()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `out += w * v`.
#[inline]
pub fn add_scaled(out: &mut [f64], v: &[f64], w: f64) {
    for (o, x) in out.iter_mut().zip(v) {
        *o += w * x;
    }
}

/// Component of `x` orthogonal to the unit vector `ell`, and its norm.
pub fn orthogonal_norm(x: &[f64], ell: &[f64]) -> f64 {
    let along = dot(x, ell);
    let mut n2 = 0.0;
    for (xi, li) in x.iter().zip(ell) {
        let p = xi - along * li;
        n2 += p * p;
    }
    n2.sqrt()
}

pub fn is_unit(v: &[f64], tol: f64) -> bool {
    (norm(v) - 1.0).abs() <= tol
}
