//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use super::dense::DenseMat;
use crate::error::{NirbError, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and a matrix whose columns are the
/// matching orthonormal eigenvectors.
pub fn sym_eig(g: &DenseMat) -> Result<(Vec<f64>, DenseMat)> {
    let n = g.rows();
    if n != g.cols() {
        return Err(NirbError::DimensionMismatch {
            what: "square matrix",
            expected: n,
            got: g.cols(),
        });
    }
    if !g.is_finite() {
        return Err(NirbError::NonFinite {
            what: "matrix entry",
            location: "sym_eig input".into(),
        });
    }
    let asym = g.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(NirbError::NotSymmetric(asym));
    }
    let mut a = g.clone();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = DenseMat::identity(n);
    let total: f64 = a.frobenius().powi(2);

    let mut prev_off = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        // stop on convergence or once rounding stalls the sweep
        if off <= 1e-30 * total || off == 0.0 || off >= prev_off {
            break;
        }
        prev_off = off;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, k)] = v[(r, i)];
        }
    }
    Ok((values, vectors))
}

fn rotate(a: &mut DenseMat, v: &mut DenseMat, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    let t = s / c;
    let tau = s / (1.0 + c);
    let apq = a[(p, q)];
    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let (g, h) = (a[(r, p)], a[(r, q)]);
        let gp = g - s * (h + tau * g);
        let hq = h + s * (g - tau * h);
        a[(r, p)] = gp;
        a[(p, r)] = gp;
        a[(r, q)] = hq;
        a[(q, r)] = hq;
    }
    for r in 0..n {
        let (g, h) = (v[(r, p)], v[(r, q)]);
        v[(r, p)] = g - s * (h + tau * g);
        v[(r, q)] = h + s * (g - tau * h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_input() {
        let (l, v) = sym_eig(&DenseMat::diag(&[2.0, 1.0])).unwrap();
        assert_eq!(l, vec![1.0, 2.0]);
        assert_eq!(v.column(0).iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn swap_matrix() {
        let g = DenseMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (l, v) = sym_eig(&g).unwrap();
        assert!((l[0] + 1.0).abs() < 1e-15 && (l[1] - 1.0).abs() < 1e-15);
        let c0 = v.column(0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c0[0].abs() - r).abs() < 1e-14 && (c0[0] + c0[1]).abs() < 1e-14);
    }

    #[test]
    fn identity_and_asymmetric() {
        let (l, v) = sym_eig(&DenseMat::identity(4)).unwrap();
        assert!(l.iter().all(|&x| x == 1.0));
        assert!(v.transpose().matmul(&v).unwrap().sub(&DenseMat::identity(4)).unwrap().frobenius() < 1e-15);
        let g = DenseMat::from_rows(&[vec![0.0, 1.0], vec![1.1, 0.0]]).unwrap();
        assert!(matches!(sym_eig(&g), Err(NirbError::NotSymmetric(_))));
    }
}
