use super::dense::DenseMat;
use super::eig::sym_eig;
use crate::error::{NirbError, Result};

/// Condition-number ceiling for unregularized normal equations.
pub const MAX_CONDITION: f64 = 1e12;

/// Solves `(A^T A + delta I) X = A^T B` column by column with a dense Cholesky factor.
///
/// `a` and `b` are both `k x n`; the result is `n x n` and its `i`-th column
/// is the regularized least-squares fit of column `i` of `b`.
pub fn solve_regularized_normal(a: &DenseMat, b: &DenseMat, delta: f64) -> Result<DenseMat> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(NirbError::DimensionMismatch {
            what: "normal-equation operands",
            expected: a.rows() * a.cols(),
            got: b.rows() * b.cols(),
        });
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(NirbError::InvalidArgument(format!("delta must be finite and nonnegative, got {delta}")));
    }
    let mut ata = a.gram();
    if delta == 0.0 {
        let cond = condition_estimate(&ata)?;
        if !(cond < MAX_CONDITION) {
            return Err(NirbError::RankDeficient { condition: cond });
        }
    }
    for i in 0..ata.rows() {
        ata[(i, i)] += delta;
    }
    let chol = ata.cholesky().map_err(|_| NirbError::RankDeficient {
        condition: f64::INFINITY,
    })?;
    let atb = a.transpose().matmul(b)?;
    let n = a.cols();
    let mut x = DenseMat::zeros(n, n);
    for i in 0..n {
        let col = chol.solve(&atb.column(i));
        x.set_column(i, &col);
    }
    Ok(x)
}

/// Ratio of extreme eigenvalues of a symmetric positive semidefinite matrix.
pub fn condition_estimate(g: &DenseMat) -> Result<f64> {
    let (lambda, _) = sym_eig(g)?;
    let max = lambda.last().copied().unwrap_or(0.0);
    let min = lambda.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return Ok(f64::INFINITY);
    }
    if min <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}
