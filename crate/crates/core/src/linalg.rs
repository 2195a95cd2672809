//! Banded linear algebra for the 1-D discretization: tridiagonal LU with
//! partial pivoting (real or complex) and the symmetric tridiagonal QL
//! eigensolver.

use num_complex::ComplexFloat;

use crate::error::{FracError, Result};

/// Tridiagonal matrix stored by diagonals: `lower[i] = A[i+1][i]`,
/// `upper[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: ComplexFloat<Real = f64>> Tridiagonal<T> {
    pub fn new(lower: Vec<T>, diag: Vec<T>, upper: Vec<T>) -> Self {
        let n = diag.len();
        assert_eq!(lower.len(), n.saturating_sub(1));
        assert_eq!(upper.len(), n.saturating_sub(1));
        Self { lower, diag, upper }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc = acc + self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc = acc + self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.lower[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.upper[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn factor(&self) -> Result<TridiagonalLu<T>> {
        TridiagonalLu::new(self)
    }
}

/// LU factors with row interchanges, the layout used by LAPACK `gttrf`.
#[derive(Debug, Clone)]
pub struct TridiagonalLu<T> {
    dl: Vec<T>,
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    swap: Vec<bool>,
    anorm: f64,
}

impl<T: ComplexFloat<Real = f64>> TridiagonalLu<T> {
    fn new(a: &Tridiagonal<T>) -> Result<Self> {
        let n = a.dim();
        let mut dl = a.lower.clone();
        let mut d = a.diag.clone();
        let mut du = a.upper.clone();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() == 0.0 {
                    return Err(FracError::Numerical(format!("zero pivot in row {i}")));
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] = d[i + 1] - fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -(fact * du[i + 1]);
                }
                swap[i] = true;
            }
        }
        if n > 0 && d[n - 1].abs() == 0.0 {
            return Err(FracError::Numerical(format!("zero pivot in row {}", n - 1)));
        }
        if d.iter().any(|v| !v.abs().is_finite()) {
            return Err(FracError::Numerical("non-finite pivot".into()));
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swap,
            anorm: a.norm_inf(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] = b[i + 1] - self.dl[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v = v - self.du[i] * b[i + 1];
            }
            if i + 2 < n {
                v = v - self.du2[i] * b[i + 2];
            }
            b[i] = v / self.d[i];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Cheap lower bound on the infinity-norm condition number from two
    /// solves with sign-pattern right-hand sides.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        let mut inv_norm: f64 = 0.0;
        for alternate in [false, true] {
            let mut b: Vec<T> = (0..n)
                .map(|i| {
                    if alternate && i % 2 == 1 {
                        -T::one()
                    } else {
                        T::one()
                    }
                })
                .collect();
            self.solve_in_place(&mut b);
            inv_norm = inv_norm.max(b.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
        let min_pivot = self.d.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        let piv_bound = if min_pivot > 0.0 {
            1.0 / min_pivot
        } else {
            f64::INFINITY
        };
        self.anorm * inv_norm.max(piv_bound)
    }
}

/// Eigen-decomposition of a real symmetric tridiagonal matrix by the
/// implicit QL method. Returns eigenvalues ascending and eigenvectors as
/// columns of a row-major `n x n` array (`vecs[i * n + k]` is component i of
/// vector k), orthonormal in the Euclidean inner product.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    assert_eq!(off.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    const MAX_ITER: usize = 60;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(FracError::EigenConvergence {
                    iterations: MAX_ITER,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zk1 = z[k * n + i + 1];
                    let zk = z[k * n + i];
                    z[k * n + i + 1] = s * zk + c * zk1;
                    z[k * n + i] = c * zk - s * zk1;
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let vals: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut vecs = vec![0.0; n * n];
    for (newk, &k) in order.iter().enumerate() {
        // fix the sign so that the first non-negligible component is positive
        let mut sign = 1.0;
        for i in 0..n {
            let v = z[i * n + k];
            if v.abs() > 1e-8 {
                sign = v.signum();
                break;
            }
        }
        for i in 0..n {
            vecs[i * n + newk] = sign * z[i * n + k];
        }
    }
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> Tridiagonal<f64> {
        Tridiagonal::new(vec![-1.0; n - 1], vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn lu_solves_real_system() {
        let a = laplacian(50);
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x);
        let y = a.factor().unwrap().solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-11);
        }
    }

    #[test]
    fn lu_pivots_when_needed() {
        // zero leading diagonal forces a row swap
        let a = Tridiagonal::new(
            vec![1.0, 1.0, 1.0],
            vec![0.0, 0.0, 3.0, 1.0],
            vec![2.0, 1.0, 1.0],
        );
        let x = vec![1.0, -2.0, 0.5, 4.0];
        let b = a.matvec(&x);
        let y = a.factor().unwrap().solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn lu_complex() {
        let n = 30;
        let p = Complex64::new(0.3, 2.0);
        let a = Tridiagonal::new(
            vec![Complex64::new(-1.0, 0.0); n - 1],
            vec![Complex64::new(2.0, 0.0) + p; n],
            vec![Complex64::new(-1.0, 0.0); n - 1],
        );
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(i as f64, 1.0 - i as f64))
            .collect();
        let y = a.factor().unwrap().solve(&a.matvec(&x));
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).norm() < 1e-11);
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let a = Tridiagonal::new(vec![0.0], vec![0.0, 1.0], vec![0.0]);
        assert!(a.factor().is_err());
    }

    #[test]
    fn condition_estimate_grows_with_n() {
        let c1 = laplacian(10).factor().unwrap().condition_estimate();
        let c2 = laplacian(100).factor().unwrap().condition_estimate();
        assert!(c2 > 50.0 * c1);
    }

    #[test]
    fn eigen_of_discrete_laplacian() {
        let n = 40;
        let (vals, vecs) = symmetric_tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * (PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|i| vecs[i * n + a] * vecs[i * n + b]).sum();
                let exact = if a == b { 1.0 } else { 0.0 };
                assert!((dot - exact).abs() < 1e-12);
            }
        }
    }
}
