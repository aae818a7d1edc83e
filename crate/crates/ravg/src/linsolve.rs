//! Dense symmetric positive-definite solves used by every extractor:
//! Cholesky-type factorization, ridge-regularized solve, Sherman–Morrison
//! rank-1 inverse updates for the sequential harness, and a power-method
//! estimate of the largest eigenvalue for step-size selection.

use crate::error::{Error, Result};
use crate::mat::{dot, Matrix};

/// A symmetric system `A x = b`.
#[derive(Debug, Clone)]
pub struct SpdSystem {
    a: Matrix,
    b: Vec<f64>,
}

impl SpdSystem {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if a.rows() == 0 || a.rows() != a.cols() {
            return Err(Error::InvalidDimension(format!(
                "system matrix must be square and non-empty, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.len() != a.rows() {
            return Err(Error::InvalidDimension(format!(
                "rhs length {} does not match matrix size {}",
                b.len(),
                a.rows()
            )));
        }
        if a.max_abs_asymmetry() > 1e-10 {
            return Err(Error::InvalidParameter(
                "system matrix is not symmetric within 1e-10".into(),
            ));
        }
        Ok(SpdSystem { a, b })
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        solve_spd(&self.a, &self.b)
    }

    pub fn solve_ridge(&self, lambda: f64) -> Result<Vec<f64>> {
        solve_ridge(&self.a, &self.b, lambda)
    }
}

/// Lower-triangular Cholesky factor of `a`. Pivots at or below
/// `1e-12 * trace / d` declare the system singular.
fn cholesky(a: &Matrix) -> Result<Matrix> {
    let d = a.rows();
    let tol = 1e-12 * a.trace() / d as f64;
    let mut l = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= tol {
                    return Err(Error::SingularSystem(format!(
                        "pivot {s:e} at index {i} at or below tolerance {tol:e}"
                    )));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solve `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let d = l.rows();
    // forward: L z = b
    let mut z = vec![0.0; d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * z[k];
        }
        z[i] = s / l.get(i, i);
    }
    // backward: L^T x = z
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = z[i];
        for k in i + 1..d {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Solve `(A + lambda I) x = b`.
pub fn solve_ridge(a: &Matrix, b: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ridge penalty must be non-negative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return solve_spd(a, b);
    }
    let d = a.rows();
    let mut reg = a.clone();
    for i in 0..d {
        reg.set(i, i, reg.get(i, i) + lambda);
    }
    solve_spd(&reg, b)
}

/// Explicit inverse via Cholesky, for seeding rank-1 recursions.
pub fn invert_spd(a: &Matrix) -> Result<Matrix> {
    let l = cholesky(a)?;
    let d = a.rows();
    let mut inv = Matrix::zeros(d, d);
    let mut e = vec![0.0; d];
    for j in 0..d {
        e[j] = 1.0;
        let col = cholesky_solve(&l, &e);
        e[j] = 0.0;
        for i in 0..d {
            inv.set(i, j, col[i]);
        }
    }
    Ok(inv)
}

/// Sherman–Morrison: replace `ainv` with `(A + weight * v v^T)^{-1}` given
/// `ainv = A^{-1}`. Fails with `Breakdown` when the denominator
/// `1 + weight * v^T A^{-1} v` is at or below 1e-12; the caller should then
/// refactorize from scratch.
pub fn rank1_update_inverse(ainv: &mut Matrix, v: &[f64], weight: f64) -> Result<()> {
    let d = ainv.rows();
    assert_eq!(v.len(), d, "vector length must match matrix size");
    if weight == 0.0 {
        return Ok(());
    }
    let av = ainv.mul_vec(v);
    let denom = 1.0 + weight * dot(v, &av);
    if denom <= 1e-12 {
        return Err(Error::Breakdown(denom));
    }
    let scale = weight / denom;
    for i in 0..d {
        let avi = av[i];
        let row = ainv.row_mut(i);
        for j in 0..d {
            row[j] -= scale * avi * av[j];
        }
    }
    Ok(())
}

/// Largest-eigenvalue estimate by `iters` power iterations from a fixed,
/// slightly tilted start vector (deterministic; the tilt avoids starting
/// orthogonal to the top eigenvector on exchangeable matrices).
pub fn max_eigenvalue_estimate(a: &Matrix, iters: usize) -> f64 {
    let d = a.rows();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 1e-3 * i as f64).collect();
    let norm = crate::mat::norm2(&v);
    for x in v.iter_mut() {
        *x /= norm;
    }
    for _ in 0..iters {
        let w = a.mul_vec(&v);
        let n = crate::mat::norm2(&w);
        if n == 0.0 {
            return 0.0;
        }
        for i in 0..d {
            v[i] = w[i] / n;
        }
    }
    dot(&v, &a.mul_vec(&v))
}
