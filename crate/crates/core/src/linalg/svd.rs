//! Thin SVD through the eigen-decomposition of the smaller Gram matrix.

use super::dense::DenseMat;
use super::eig::sym_eig;
use crate::error::{NirbError, Result};

/// Thin singular value decomposition `M = U diag(sigma) V^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: DenseMat,
    /// Descending, nonnegative.
    pub sigma: Vec<f64>,
    /// `k x cols` with orthonormal rows.
    pub vt: DenseMat,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMat {
        let k = self.sigma.len();
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for c in 0..k {
                us[(r, c)] *= self.sigma[c];
            }
        }
        us.matmul(&self.vt).expect("consistent SVD factors")
    }
}

pub fn svd(m: &DenseMat) -> Result<Svd> {
    if !m.is_finite() {
        return Err(NirbError::NonFinite {
            what: "matrix entry",
            location: "svd input".into(),
        });
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(NirbError::InvalidArgument("svd of an empty matrix".into()));
    }
    if m.rows() < m.cols() {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.vt.transpose(),
            sigma: t.sigma,
            vt: t.u.transpose(),
        });
    }
    let (rows, k) = (m.rows(), m.cols());
    let (lambda, v) = sym_eig(&m.gram())?;
    // descending order
    let order: Vec<usize> = (0..k).rev().collect();
    let sigma: Vec<f64> = order.iter().map(|&i| lambda[i].max(0.0).sqrt()).collect();
    let mut vt = DenseMat::zeros(k, k);
    for (row, &i) in order.iter().enumerate() {
        for c in 0..k {
            vt[(row, c)] = v[(c, i)];
        }
    }
    let cutoff = sigma[0] * 1e-14 * (rows.max(k) as f64);
    let mut u = DenseMat::zeros(rows, k);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, &s) in sigma.iter().enumerate().take(k) {
        let col = if s > cutoff && s > 0.0 {
            let vj = vt.row(j).to_vec();
            m.matvec(&vj).into_iter().map(|x| x / s).collect()
        } else {
            vec![0.0; rows]
        };
        columns.push(col);
    }
    orthonormalize_columns(&mut columns);
    for (j, col) in columns.iter().enumerate() {
        u.set_column(j, col);
    }
    Ok(Svd { u, sigma, vt })
}

/// Two passes of modified Gram-Schmidt; zero or dependent columns are
/// replaced by unit vectors orthogonal to all previous ones.
fn orthonormalize_columns(cols: &mut [Vec<f64>]) {
    let n = cols.first().map_or(0, Vec::len);
    let mut next_unit = 0;
    for j in 0..cols.len() {
        let mut ok = false;
        let original: f64 = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if original > 0.0 {
            for _ in 0..2 {
                project_out(cols, j);
            }
            let nrm: f64 = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-8 * original {
                cols[j].iter_mut().for_each(|x| *x /= nrm);
                ok = true;
            }
        }
        while !ok && next_unit < n {
            cols[j] = vec![0.0; n];
            cols[j][next_unit] = 1.0;
            next_unit += 1;
            for _ in 0..2 {
                project_out(cols, j);
            }
            let nrm: f64 = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-8 {
                cols[j].iter_mut().for_each(|x| *x /= nrm);
                ok = true;
            }
        }
    }
}

fn project_out(cols: &mut [Vec<f64>], j: usize) {
    let (done, rest) = cols.split_at_mut(j);
    let c = &mut rest[0];
    for q in done.iter() {
        let d: f64 = q.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
        for (x, y) in c.iter_mut().zip(q) {
            *x -= d * y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_values() {
        let s = svd(&DenseMat::diag(&[3.0, 1.0])).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-15 && (s.sigma[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_one_outer_product() {
        // |u| = 2, |v| = 1
        let u = [2.0 / 3.0_f64.sqrt(); 3];
        let v = [0.6, 0.8];
        let rows: Vec<Vec<f64>> = u.iter().map(|a| v.iter().map(|b| a * b).collect()).collect();
        let s = svd(&DenseMat::from_rows(&rows).unwrap()).unwrap();
        assert!((s.sigma[0] - 2.0).abs() < 1e-14);
        assert!(s.sigma[1].abs() < 1e-7);
        let ut_u = s.u.transpose().matmul(&s.u).unwrap();
        assert!(ut_u.sub(&DenseMat::identity(2)).unwrap().frobenius() < 1e-10);
    }

    #[test]
    fn hand_two_by_two() {
        let m = DenseMat::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let s = svd(&m).unwrap();
        assert!((s.sigma[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(s.sigma[1].abs() < 1e-15);
        assert!(s.reconstruct().sub(&m).unwrap().frobenius() < 1e-14);
    }

    #[test]
    fn wide_matrix() {
        let m = DenseMat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = svd(&m).unwrap();
        assert_eq!((s.u.rows(), s.u.cols(), s.vt.rows(), s.vt.cols()), (2, 2, 2, 3));
        assert!(s.reconstruct().sub(&m).unwrap().frobenius() < 1e-12 * m.frobenius());
        assert!(svd(&DenseMat::from_rows(&[vec![f64::NAN]]).unwrap()).is_err());
    }
}
