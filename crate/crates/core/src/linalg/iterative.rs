//! Jacobi-preconditioned Krylov solvers.

use super::sparse::CsrMatrix;
use super::{dot, norm2};
use crate::error::{NirbError, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `|Ax - b| / |b|`.
    pub residual: f64,
}

fn check_dims(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>) -> Result<()> {
    if a.nrows() == 0 {
        return Err(NirbError::InvalidArgument("zero-dimension system".into()));
    }
    if a.nrows() != a.ncols() {
        return Err(NirbError::DimensionMismatch {
            what: "square system",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if b.len() != a.nrows() {
        return Err(NirbError::DimensionMismatch {
            what: "right-hand side",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != a.nrows() {
            return Err(NirbError::DimensionMismatch {
                what: "initial guess",
                expected: a.nrows(),
                got: x0.len(),
            });
        }
    }
    Ok(())
}

fn inverse_diagonal(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

/// Preconditioned conjugate gradients for symmetric positive definite `a`.
///
/// Stops once `|Ax - b|_2 <= tol * |b|_2`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<Solution> {
    check_dims(a, b, x0)?;
    if !(tol > 0.0) {
        return Err(NirbError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !a.is_symmetric() {
        return Err(NirbError::NotSymmetric(f64::NAN));
    }
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let dinv = inverse_diagonal(a);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = a.matvec(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rel = norm2(&r) / bnorm;
    if rel <= tol {
        return Ok(Solution { x, iterations: 0, residual: rel });
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(NirbError::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm2(&r) / bnorm;
        if rel <= tol {
            return Ok(Solution { x, iterations: it, residual: rel });
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(NirbError::NoConvergence {
        iterations: max_iter,
        residual: rel,
    })
}

/// Right-preconditioned BiCGSTAB for general square systems.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<Solution> {
    check_dims(a, b, x0)?;
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let dinv = inverse_diagonal(a);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = a.matvec(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rel = norm2(&r) / bnorm;
    if rel <= tol {
        return Ok(Solution { x, iterations: 0, residual: rel });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = dinv[i] * p[i];
        }
        a.matvec_into(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            let rel = true_residual(a, &x, b) / bnorm;
            return Ok(Solution { x, iterations: it, residual: rel });
        }
        for i in 0..n {
            z[i] = dinv[i] * s[i];
        }
        a.matvec_into(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm2(&r) / bnorm;
        if !rel.is_finite() {
            break;
        }
        if rel <= tol {
            let rel = true_residual(a, &x, b) / bnorm;
            return Ok(Solution { x, iterations: it, residual: rel });
        }
    }
    Err(NirbError::NoConvergence {
        iterations: max_iter,
        residual: rel,
    })
}

fn true_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    ax.iter().zip(b).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_csr(rows: &[&[f64]]) -> CsrMatrix {
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), rows[0].len(), &t).unwrap()
    }

    #[test]
    fn identity_converges_immediately() {
        let a = dense_to_csr(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let s = cg_solve(&a, &[1.0, 2.0, 3.0], None, DEFAULT_TOL, 10).unwrap();
        assert!(s.iterations <= 1);
        assert_eq!(s.x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_hand_solution() {
        let a = dense_to_csr(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let s = cg_solve(&a, &[1.0, 2.0], None, 1e-14, 10).unwrap();
        assert!((s.x[0] - 1.0 / 11.0).abs() < 1e-10);
        assert!((s.x[1] - 7.0 / 11.0).abs() < 1e-10);
        let s = bicgstab(&a, &[1.0, 2.0], None, 1e-14, 10).unwrap();
        assert!((s.x[0] - 1.0 / 11.0).abs() < 1e-10);
    }

    #[test]
    fn homogeneous_and_errors() {
        let a = dense_to_csr(&[&[4.0, 1.0], &[1.0, 3.0]]);
        assert_eq!(cg_solve(&a, &[0.0, 0.0], None, 1e-10, 5).unwrap().x, vec![0.0, 0.0]);
        assert!(matches!(
            cg_solve(&a, &[1.0, 2.0], None, 1e-30, 1),
            Err(NirbError::NoConvergence { iterations: 1, .. })
        ));
        let ns = dense_to_csr(&[&[4.0, 1.0], &[0.0, 3.0]]);
        assert!(cg_solve(&ns, &[1.0, 2.0], None, 1e-10, 5).is_err());
        assert!(cg_solve(&a, &[1.0], None, 1e-10, 5).is_err());
    }

    #[test]
    fn bicgstab_nonsymmetric() {
        let a = dense_to_csr(&[&[4.0, 1.0, 0.0], &[-2.0, 5.0, 1.0], &[0.0, 3.0, 6.0]]);
        let b = [1.0, -1.0, 2.0];
        let s = bicgstab(&a, &b, None, 1e-13, 50).unwrap();
        let r = true_residual(&a, &s.x, &b);
        assert!(r <= 1e-12);
    }
}
