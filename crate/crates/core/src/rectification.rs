//! Per-timestep rectification matrices mapping coarse projection coefficients
//! to fine ones.

use std::borrow::Borrow;

use rayon::prelude::*;

use crate::basis::ReducedBasis;
use crate::error::{NirbError, Result};
use crate::fem::AssembledForms;
use crate::integrators::{FieldTrajectory, TimeGrid};
use crate::linalg::{solve_regularized_normal, sym_eig, DenseMat};
use crate::mesh::{TriMesh, Transfer};
use crate::time_interp::quadratic_time_interp;

/// Relative factor of the default Tikhonov parameter.
pub const DEFAULT_RELATIVE_DELTA: f64 = 1e-10;

/// How the Tikhonov parameter of each time index is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    Absolute(f64),
    /// `delta = factor * lambda_max(A^T A)` per time index.
    Relative(f64),
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        DeltaPolicy::Relative(DEFAULT_RELATIVE_DELTA)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectificationTensor {
    /// One `N x N` matrix per fine time index.
    pub matrices: Vec<DenseMat>,
    /// Tikhonov parameter actually used at each time index.
    pub deltas: Vec<f64>,
    pub train_params: Vec<Vec<f64>>,
}

impl RectificationTensor {
    pub fn n(&self) -> usize {
        self.matrices.first().map_or(0, DenseMat::rows)
    }

    pub fn steps(&self) -> usize {
        self.matrices.len()
    }

    pub fn identity(n: usize, steps: usize) -> Self {
        RectificationTensor {
            matrices: vec![DenseMat::identity(n); steps],
            deltas: vec![0.0; steps],
            train_params: Vec::new(),
        }
    }
}

/// Interpolates a coarse trajectory quadratically in time onto `fine_grid`,
/// then linearly in space onto the destination mesh.
pub fn lift_coarse(coarse: &FieldTrajectory, transfer: &Transfer, fine_grid: &TimeGrid) -> Result<FieldTrajectory> {
    quadratic_time_interp(coarse, fine_grid)?.map_rows(|r| transfer.apply(r))
}

/// `(v^n, Φ_i)_M` for every time index of a trajectory; one row per time.
pub fn trajectory_coefficients(basis: &ReducedBasis, forms: &AssembledForms, traj: &FieldTrajectory) -> Result<Vec<Vec<f64>>> {
    traj.rows().par_iter().map(|r| basis.coefficients(forms, r)).collect()
}

fn same_params(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
}

/// Fits `R^n` so that `R^n a_k^n ≈ b_k^n` over the training parameters `k`.
pub fn build_rectification<T: Borrow<FieldTrajectory> + Sync>(
    fine_trajs: &[T],
    coarse_trajs: &[T],
    coarse_mesh: &TriMesh,
    basis: &ReducedBasis,
    fine_forms: &AssembledForms,
    fine_grid: &TimeGrid,
    delta: DeltaPolicy,
) -> Result<RectificationTensor> {
    if fine_trajs.is_empty() {
        return Err(NirbError::InvalidArgument("rectification needs training trajectories".into()));
    }
    if fine_trajs.len() != coarse_trajs.len() {
        return Err(NirbError::DimensionMismatch {
            what: "coarse trajectory count",
            expected: fine_trajs.len(),
            got: coarse_trajs.len(),
        });
    }
    for (f, c) in fine_trajs.iter().zip(coarse_trajs) {
        let (f, c) = (f.borrow(), c.borrow());
        if !same_params(f.param(), c.param()) {
            return Err(NirbError::InvalidArgument(format!(
                "coarse trajectory parameter {:?} does not match fine parameter {:?}",
                c.param(),
                f.param()
            )));
        }
        if f.grid() != fine_grid {
            return Err(NirbError::InvalidArgument("fine trajectory is not on the fine time grid".into()));
        }
    }
    if basis.is_empty() {
        return Err(NirbError::InvalidArgument("rectification needs a nonempty basis".into()));
    }
    let transfer = Transfer::new(coarse_mesh, fine_forms.mesh())?;
    let a_coef = coarse_trajs
        .par_iter()
        .map(|c| trajectory_coefficients(basis, fine_forms, &lift_coarse(c.borrow(), &transfer, fine_grid)?))
        .collect::<Result<Vec<_>>>()?;
    let b_coef = fine_trajs
        .par_iter()
        .map(|t| trajectory_coefficients(basis, fine_forms, t.borrow()))
        .collect::<Result<Vec<_>>>()?;
    let per_step = (0..fine_grid.len())
        .into_par_iter()
        .map(|n| {
            let a = DenseMat::from_rows(&a_coef.iter().map(|c| c[n].clone()).collect::<Vec<_>>())?;
            let b = DenseMat::from_rows(&b_coef.iter().map(|c| c[n].clone()).collect::<Vec<_>>())?;
            fit_step(&a, &b, delta).map_err(|e| NirbError::Rectification {
                index: n,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (matrices, deltas) = per_step.into_iter().unzip();
    Ok(RectificationTensor {
        matrices,
        deltas,
        train_params: fine_trajs.iter().map(|t| t.borrow().param().to_vec()).collect(),
    })
}

/// One regularized fit; rows of `a` and `b` are training samples.
pub fn fit_step(a: &DenseMat, b: &DenseMat, delta: DeltaPolicy) -> Result<(DenseMat, f64)> {
    let d = match delta {
        DeltaPolicy::Absolute(d) => d,
        DeltaPolicy::Relative(f) => {
            let (lambda, _) = sym_eig(&a.gram())?;
            f * lambda.last().copied().unwrap_or(0.0).max(0.0)
        }
    };
    let x = solve_regularized_normal(a, b, d)?;
    let r = x.transpose();
    if !r.is_finite() {
        return Err(NirbError::NonFinite {
            what: "rectification entry",
            location: "solve".into(),
        });
    }
    Ok((r, d))
}

/// `c'^n = R^n c^n` for every time index.
pub fn apply_rectification(r: &RectificationTensor, coeffs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if coeffs.len() != r.steps() {
        return Err(NirbError::DimensionMismatch {
            what: "rectification time indices",
            expected: r.steps(),
            got: coeffs.len(),
        });
    }
    coeffs
        .iter()
        .zip(&r.matrices)
        .map(|(c, m)| {
            if c.len() != m.cols() {
                return Err(NirbError::DimensionMismatch {
                    what: "coefficient count",
                    expected: m.cols(),
                    got: c.len(),
                });
            }
            Ok(m.matvec(c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_exact_fit() {
        let a = DenseMat::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0]]).unwrap();
        let b = DenseMat::from_rows(&[vec![1.0, -1.0], vec![4.0, 0.25]]).unwrap();
        let (r, d) = fit_step(&a, &b, DeltaPolicy::Absolute(0.0)).unwrap();
        assert_eq!(d, 0.0);
        for k in 0..2 {
            let out = r.matvec(a.row(k));
            for i in 0..2 {
                assert!((out[i] - b[(k, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_and_zero_application() {
        let r = RectificationTensor::identity(3, 2);
        let c = vec![vec![1.0, 2.0, 3.0], vec![0.0; 3]];
        assert_eq!(apply_rectification(&r, &c).unwrap(), c);
        assert!(apply_rectification(&r, &c[..1]).is_err());
        assert!(apply_rectification(&r, &[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn underdetermined_needs_delta() {
        let a = DenseMat::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = DenseMat::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            fit_step(&a, &b, DeltaPolicy::Absolute(0.0)),
            Err(NirbError::RankDeficient { .. })
        ));
        let (r, d) = fit_step(&a, &b, DeltaPolicy::default()).unwrap();
        assert!(d > 0.0 && r.is_finite());
    }
}
