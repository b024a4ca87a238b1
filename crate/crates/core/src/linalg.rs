//! Dense complex linear algebra on small square matrices.
//!
//! Dimensions stay at or below 256 x 256 (eight qubits), so a straightforward
//! row-major layout and a cyclic Jacobi eigensolver are both adequate and
//! bit-reproducible across platforms.

use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::C64;

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// Diagonal matrix with the given real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = CMatrix::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = C64::new(d, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row_b = &other.data[k * n..(k + 1) * n];
                let row_o = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    row_o[j] += a * row_b[j];
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &CMatrix, s: C64) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in i..self.n {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and a unitary whose columns are
    /// the matching eigenvectors, so `A = V diag(w) V^dagger`.
    pub fn eigh(&self) -> Result<(Vec<f64>, CMatrix)> {
        self.jacobi(true).map(|(w, v)| (w, v.expect("vectors requested")))
    }

    /// Eigenvalues only, ascending.
    pub fn eigvalsh(&self) -> Result<Vec<f64>> {
        self.jacobi(false).map(|(w, _)| w)
    }

    fn jacobi(&self, want_vectors: bool) -> Result<(Vec<f64>, Option<CMatrix>)> {
        let n = self.n;
        if !self.is_hermitian(1e-9 * (1.0 + self.frobenius_norm())) {
            return Err(Error::invalid("eigh requires a Hermitian matrix"));
        }
        let mut a = self.clone();
        // Symmetrize exactly so rotations see a perfectly Hermitian operand.
        for i in 0..n {
            for j in i + 1..n {
                let m = (a.get(i, j) + a.get(j, i).conj()) * 0.5;
                a.set(i, j, m);
                a.set(j, i, m.conj());
            }
            let d = a.get(i, i).re;
            a.set(i, i, C64::new(d, 0.0));
        }
        let mut v = if want_vectors { Some(CMatrix::identity(n)) } else { None };
        let scale = a.frobenius_norm().max(1e-300);
        let tol = 1e-14 * scale;

        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += a.get(i, j).norm_sqr();
                }
            }
            if (2.0 * off).sqrt() <= tol {
                let mut w: Vec<(f64, usize)> =
                    (0..n).map(|i| (a.get(i, i).re, i)).collect();
                w.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
                let order: Vec<usize> = w.iter().map(|&(_, i)| i).collect();
                let eigvals: Vec<f64> = w.into_iter().map(|(x, _)| x).collect();
                let vecs = v.map(|v| {
                    CMatrix::from_fn(n, |i, j| v.get(i, order[j]))
                });
                return Ok((eigvals, vecs));
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    let g = apq.norm();
                    if g <= tol / (n as f64) {
                        continue;
                    }
                    // Phase u makes the 2x2 block real; a real Givens angle
                    // then zeroes the off-diagonal entry.
                    let u = apq / g;
                    let app = a.get(p, p).re;
                    let aqq = a.get(q, q).re;
                    // Stable small root of t^2 - 2 tau t - 1 = 0, the zeroing
                    // condition for this rotation convention.
                    let tau = (aqq - app) / (2.0 * g);
                    let t = if tau >= 0.0 {
                        -1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Combined rotation R restricted to (p, q):
                    //   [ c        -s      ]
                    //   [ s*conj(u) c*conj(u) ]
                    let rpp = C64::new(c, 0.0);
                    let rpq = C64::new(-s, 0.0);
                    let rqp = u.conj() * s;
                    let rqq = u.conj() * c;
                    // Columns: A <- A R.
                    for i in 0..n {
                        let aip = a.get(i, p);
                        let aiq = a.get(i, q);
                        a.set(i, p, aip * rpp + aiq * rqp);
                        a.set(i, q, aip * rpq + aiq * rqq);
                    }
                    // Rows: A <- R^dagger A.
                    for j in 0..n {
                        let apj = a.get(p, j);
                        let aqj = a.get(q, j);
                        a.set(p, j, apj * rpp.conj() + aqj * rqp.conj());
                        a.set(q, j, apj * rpq.conj() + aqj * rqq.conj());
                    }
                    let dpp = a.get(p, p).re;
                    let dqq = a.get(q, q).re;
                    a.set(p, p, C64::new(dpp, 0.0));
                    a.set(q, q, C64::new(dqq, 0.0));
                    a.set(p, q, C64::new(0.0, 0.0));
                    a.set(q, p, C64::new(0.0, 0.0));
                    if let Some(v) = v.as_mut() {
                        for i in 0..n {
                            let vip = v.get(i, p);
                            let viq = v.get(i, q);
                            v.set(i, p, vip * rpp + viq * rqp);
                            v.set(i, q, vip * rpq + viq * rqq);
                        }
                    }
                }
            }
        }
        Err(Error::NoConvergence(alloc::format!(
            "jacobi eigensolver did not converge for n = {n}"
        )))
    }
}
