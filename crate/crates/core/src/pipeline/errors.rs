use rayon::prelude::*;

use crate::error::{NirbError, Result};
use crate::fem::{analytic_errors, analytic_norms, norms, AssembledForms, BoundaryCondition};
use crate::integrators::FieldTrajectory;

type ScalarFn = dyn Fn(f64, f64, f64) -> f64 + Sync;
type GradFn = dyn Fn(f64, f64, f64) -> (f64, f64) + Sync;

/// What a candidate trajectory is compared against.
#[derive(Clone, Copy)]
pub enum Reference<'a> {
    /// Exact solution `u(t, x, y)` and its gradient; single component only.
    Analytic { u: &'a ScalarFn, grad: &'a GradFn },
    /// Discrete reference on the same mesh and grid, one per component.
    Trajectory(&'a [FieldTrajectory]),
}

/// Relative errors in the maximum norm over time.
///
/// `h1` is the H1 seminorm for Dirichlet problems and the full H1 norm for
/// Neumann problems. Several components are combined as
/// `max_n sqrt(sum_s e_s^2) / max_n sqrt(sum_s |u_s|^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub l2: f64,
    pub h1: f64,
    /// Per-step absolute errors.
    pub l2_curve: Vec<f64>,
    pub h1_curve: Vec<f64>,
    /// Per-step reference norms.
    pub l2_ref: Vec<f64>,
    pub h1_ref: Vec<f64>,
}

fn ratio(e: &[f64], r: &[f64]) -> f64 {
    let num = e.iter().copied().fold(0.0, f64::max);
    let den = r.iter().copied().fold(0.0, f64::max);
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `(l2 error, h1 error, l2 ref, h1 ref)` squared, per time index.
type StepSq = (f64, f64, f64, f64);

pub fn evaluate_errors(candidate: &[FieldTrajectory], reference: Reference<'_>, forms: &AssembledForms) -> Result<ErrorReport> {
    if candidate.is_empty() {
        return Err(NirbError::InvalidArgument("no candidate trajectory".into()));
    }
    let grid = *candidate[0].grid();
    for c in candidate {
        forms.check_len(c.row(0))?;
        if *c.grid() != grid {
            return Err(NirbError::InvalidArgument("candidate components use different time grids".into()));
        }
    }
    let full_h1 = forms.bc() == BoundaryCondition::NeumannNatural;
    let lift = |l2: f64, semi: f64| if full_h1 { l2 * l2 + semi * semi } else { semi * semi };
    let steps: Vec<StepSq> = match reference {
        Reference::Analytic { u, grad } => {
            if candidate.len() != 1 {
                return Err(NirbError::DimensionMismatch {
                    what: "components for an analytic reference",
                    expected: 1,
                    got: candidate.len(),
                });
            }
            let mesh = forms.mesh();
            (0..grid.len())
                .into_par_iter()
                .map(|n| {
                    let t = grid.time(n);
                    let (el2, eh1) = analytic_errors(mesh, candidate[0].row(n), |x, y| u(t, x, y), |x, y| grad(t, x, y))?;
                    let (rl2, rh1) = analytic_norms(mesh, |x, y| u(t, x, y), |x, y| grad(t, x, y));
                    Ok((el2 * el2, lift(el2, eh1), rl2 * rl2, lift(rl2, rh1)))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Reference::Trajectory(refs) => {
            if refs.len() != candidate.len() {
                return Err(NirbError::DimensionMismatch {
                    what: "reference components",
                    expected: candidate.len(),
                    got: refs.len(),
                });
            }
            for r in refs {
                if *r.grid() != grid {
                    return Err(NirbError::InvalidArgument(
                        "candidate and reference use different time grids".into(),
                    ));
                }
                forms.check_len(r.row(0))?;
            }
            (0..grid.len())
                .into_par_iter()
                .map(|n| {
                    let mut acc = (0.0, 0.0, 0.0, 0.0);
                    for (c, r) in candidate.iter().zip(refs) {
                        let d: Vec<f64> = c.row(n).iter().zip(r.row(n)).map(|(a, b)| a - b).collect();
                        let (el2, eh1) = norms(forms, &d)?;
                        let (rl2, rh1) = norms(forms, r.row(n))?;
                        acc.0 += el2 * el2;
                        acc.1 += lift(el2, eh1);
                        acc.2 += rl2 * rl2;
                        acc.3 += lift(rl2, rh1);
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let l2_curve: Vec<f64> = steps.iter().map(|s| s.0.sqrt()).collect();
    let h1_curve: Vec<f64> = steps.iter().map(|s| s.1.sqrt()).collect();
    let l2_ref: Vec<f64> = steps.iter().map(|s| s.2.sqrt()).collect();
    let h1_ref: Vec<f64> = steps.iter().map(|s| s.3.sqrt()).collect();
    Ok(ErrorReport {
        l2: ratio(&l2_curve, &l2_ref),
        h1: ratio(&h1_curve, &h1_ref),
        l2_curve,
        h1_curve,
        l2_ref,
        h1_ref,
    })
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::integrators::TimeGrid;
    use crate::mesh::{Rect, TriMesh};
    use std::sync::Arc;

    #[test]
    fn scaling_gives_relative_error() {
        let mesh = Arc::new(TriMesh::structured(4, 4, Rect::unit_square()).unwrap());
        let forms = assemble(mesh.clone(), BoundaryCondition::DirichletZero).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|n| mesh.sample(|x, y| (1.0 + n as f64) * x * (1.0 - x) * y * (1.0 - y)))
            .collect();
        let r = FieldTrajectory::new(grid, rows.clone(), vec![]).unwrap();
        let c = r.map_rows(|v| Ok(v.iter().map(|x| 1.1 * x).collect())).unwrap();
        let rep = evaluate_errors(&[c], Reference::Trajectory(std::slice::from_ref(&r)), &forms).unwrap();
        assert!((rep.l2 - 0.1).abs() < 1e-12 && (rep.h1 - 0.1).abs() < 1e-12);
        let rep = evaluate_errors(std::slice::from_ref(&r), Reference::Trajectory(std::slice::from_ref(&r)), &forms).unwrap();
        assert_eq!((rep.l2, rep.h1), (0.0, 0.0));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((least_squares_slope(&x, &y) - 1.5).abs() < 1e-12);
    }
}
