//! Time-independent reduced bases built from fine snapshot trajectories.
//!
//! All inner products are the FEM L2 product `(u, v)_M = u^T M v`.

use std::borrow::Borrow;

use rayon::prelude::*;

use crate::error::{NirbError, Result};
use crate::fem::AssembledForms;
use crate::integrators::FieldTrajectory;
use crate::linalg::{dot, sym_eig, DenseMat};

/// Default relative singular-value cut for POD compression.
pub const DEFAULT_POD_TOL: f64 = 1e-6;
/// Gram deviation above which a basis is not considered L2-orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Which construction produced a basis and what it selected.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub algorithm: String,
    /// `(parameter index, time index)`; the time index is absent for POD-Greedy.
    pub selected: Vec<(usize, Option<usize>)>,
    /// Error of each selected candidate at the moment it was picked.
    pub selected_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    modes: Vec<Vec<f64>>,
    eigenvalues: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl ReducedBasis {
    pub fn new(modes: Vec<Vec<f64>>, eigenvalues: Option<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        if let Some(first) = modes.first() {
            if let Some(m) = modes.iter().find(|m| m.len() != first.len()) {
                return Err(NirbError::DimensionMismatch {
                    what: "mode length",
                    expected: first.len(),
                    got: m.len(),
                });
            }
        }
        if let Some(ev) = &eigenvalues {
            if ev.len() != modes.len() {
                return Err(NirbError::DimensionMismatch {
                    what: "eigenvalue count",
                    expected: modes.len(),
                    got: ev.len(),
                });
            }
        }
        Ok(ReducedBasis {
            modes,
            eigenvalues,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.modes.first().map_or(0, Vec::len)
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    /// First `n` modes (and eigenvalues).
    pub fn truncate(&self, n: usize) -> ReducedBasis {
        let n = n.min(self.len());
        ReducedBasis {
            modes: self.modes[..n].to_vec(),
            eigenvalues: self.eigenvalues.as_ref().map(|e| e[..n].to_vec()),
            provenance: self.provenance.clone(),
        }
    }

    /// `(v, Φ_i)_M` for every mode.
    pub fn coefficients(&self, forms: &AssembledForms, v: &[f64]) -> Result<Vec<f64>> {
        forms.check_len(v)?;
        let mv = forms.mass.matvec(v);
        Ok(self.modes.iter().map(|m| dot(m, &mv)).collect())
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.len() {
            return Err(NirbError::DimensionMismatch {
                what: "coefficient count",
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let mut out = vec![0.0; self.n_nodes()];
        for (c, m) in coeffs.iter().zip(&self.modes) {
            for (o, x) in out.iter_mut().zip(m) {
                *o += c * x;
            }
        }
        Ok(out)
    }

    /// L2-orthogonal projection onto the span.
    pub fn project(&self, forms: &AssembledForms, v: &[f64]) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Ok(vec![0.0; v.len()]);
        }
        self.reconstruct(&self.coefficients(forms, v)?)
    }

    /// `G_ij = (Φ_i, Φ_j)_M`.
    pub fn gram_l2(&self, forms: &AssembledForms) -> DenseMat {
        gram(&self.modes, |v| forms.mass.matvec(v))
    }

    /// `G_ij = (∇Φ_i, ∇Φ_j)`.
    pub fn gram_h1(&self, forms: &AssembledForms) -> DenseMat {
        gram(&self.modes, |v| forms.stiffness.matvec(v))
    }

    /// Largest deviation of the L2 Gram matrix from the identity.
    pub fn orthonormality_defect(&self, forms: &AssembledForms) -> f64 {
        let g = self.gram_l2(forms);
        let mut worst = 0.0f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

fn gram<F: Fn(&[f64]) -> Vec<f64>>(modes: &[Vec<f64>], op: F) -> DenseMat {
    let n = modes.len();
    let images: Vec<Vec<f64>> = modes.iter().map(|m| op(m)).collect();
    let mut g = DenseMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (dot(&modes[i], &images[j]) + dot(&modes[j], &images[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn m_norm(forms: &AssembledForms, v: &[f64]) -> f64 {
    forms.l2_inner(v, v).max(0.0).sqrt()
}

/// Orthogonalizes `v` against `basis` (two passes) and normalizes it.
///
/// Returns `None` when less than `1e-10` of the original norm survives.
pub fn orthonormalize_against(forms: &AssembledForms, basis: &[Vec<f64>], mut v: Vec<f64>) -> Option<Vec<f64>> {
    let original = m_norm(forms, &v);
    if !(original > 0.0) {
        return None;
    }
    for _ in 0..2 {
        let mv = forms.mass.matvec(&v);
        let coeffs: Vec<f64> = basis.iter().map(|b| dot(b, &mv)).collect();
        for (c, b) in coeffs.iter().zip(basis) {
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let nrm = m_norm(forms, &v);
    if nrm <= 1e-10 * original {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    Some(v)
}

/// How many POD modes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PodTruncation {
    Count(usize),
    /// Keep modes with `sigma_i / sigma_1 > tol`.
    Energy(f64),
}

#[derive(Debug, Clone)]
pub struct Pod {
    pub modes: Vec<Vec<f64>>,
    /// All singular values of the snapshot set, descending.
    pub singular_values: Vec<f64>,
}

/// Singular values of the snapshot set below this fraction of the largest are
/// indistinguishable from rounding in the Gram route and never kept.
const GRAM_NOISE: f64 = 1e-7;

/// POD of `snapshots` under the L2(M) inner product via the snapshot Gram matrix.
pub fn pod(snapshots: &[&[f64]], forms: &AssembledForms, keep: PodTruncation) -> Result<Pod> {
    if snapshots.is_empty() {
        return Err(NirbError::InvalidArgument("POD needs at least one snapshot".into()));
    }
    for s in snapshots {
        forms.check_len(s)?;
    }
    let ns = snapshots.len();
    let images: Vec<Vec<f64>> = snapshots.par_iter().map(|s| forms.mass.matvec(s)).collect();
    let mut g = DenseMat::zeros(ns, ns);
    for i in 0..ns {
        for j in i..ns {
            let v = 0.5 * (dot(snapshots[i], &images[j]) + dot(snapshots[j], &images[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let (lambda, vecs) = sym_eig(&g)?;
    let order: Vec<usize> = (0..ns).rev().collect();
    let singular_values: Vec<f64> = order.iter().map(|&i| lambda[i].max(0.0).sqrt()).collect();
    let s1 = singular_values[0];
    if !(s1 > 0.0) {
        log::warn!("POD of an all-zero snapshot set produced no modes");
        return Ok(Pod {
            modes: Vec::new(),
            singular_values,
        });
    }
    let wanted = match keep {
        PodTruncation::Count(k) => k,
        PodTruncation::Energy(tol) => singular_values.iter().take_while(|&&s| s / s1 > tol).count(),
    };
    let mut modes: Vec<Vec<f64>> = Vec::with_capacity(wanted);
    for (rank, &i) in order.iter().enumerate() {
        if modes.len() >= wanted {
            break;
        }
        let sigma = singular_values[rank];
        if sigma <= GRAM_NOISE * s1 {
            break;
        }
        let n = forms.n_nodes();
        let mut mode = vec![0.0; n];
        for (j, s) in snapshots.iter().enumerate() {
            let w = vecs[(j, i)] / sigma;
            for (m, x) in mode.iter_mut().zip(s.iter()) {
                *m += w * x;
            }
        }
        if let Some(m) = orthonormalize_against(forms, &modes, mode) {
            modes.push(m);
        }
    }
    Ok(Pod {
        modes,
        singular_values,
    })
}

fn linf_l2(forms: &AssembledForms, rows: &[Vec<f64>]) -> f64 {
    rows.iter().map(|r| m_norm(forms, r)).fold(0.0, f64::max)
}

/// Relative l∞-in-time L2 projection error of a trajectory.
pub fn relative_projection_error(forms: &AssembledForms, modes: &[Vec<f64>], traj: &FieldTrajectory) -> f64 {
    let norm = linf_l2(forms, traj.rows());
    if norm == 0.0 {
        return 0.0;
    }
    let worst = traj
        .rows()
        .iter()
        .map(|r| m_norm(forms, &residual(forms, modes, r)))
        .fold(0.0, f64::max);
    worst / norm
}

fn residual(forms: &AssembledForms, modes: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mv = forms.mass.matvec(v);
    let mut r = v.to_vec();
    for m in modes {
        let c = dot(m, &mv);
        for (x, y) in r.iter_mut().zip(m) {
            *x -= c * y;
        }
    }
    r
}

fn check_training<T: Borrow<FieldTrajectory>>(trajs: &[T], forms: &AssembledForms) -> Result<()> {
    if trajs.is_empty() {
        return Err(NirbError::InvalidArgument("training set is empty".into()));
    }
    for t in trajs {
        let t = t.borrow();
        if t.n_nodes() != forms.n_nodes() {
            return Err(NirbError::DimensionMismatch {
                what: "training trajectory nodes",
                expected: forms.n_nodes(),
                got: t.n_nodes(),
            });
        }
    }
    Ok(())
}

/// POD-Greedy: pick the worst-approximated parameter, compress its projection
/// residual trajectory by POD, append, repeat.
///
/// Every mode counts toward `n_max`; each POD step keeps singular directions
/// with `sigma_i / sigma_1 > pod_tol`. Stops at `n_max` modes, when the worst
/// relative error drops to `pod_tol`, or when every parameter was used.
pub fn pod_greedy<T>(trajs: &[T], forms: &AssembledForms, n_max: usize, pod_tol: f64) -> Result<ReducedBasis>
where
    T: Borrow<FieldTrajectory> + Sync,
{
    check_training(trajs, forms)?;
    let mut modes: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; trajs.len()];
    let mut prov = Provenance {
        algorithm: "pod_greedy".into(),
        ..Default::default()
    };
    let norms: Vec<f64> = trajs.par_iter().map(|t| linf_l2(forms, t.borrow().rows())).collect();
    while modes.len() < n_max {
        let (pick, err) = if modes.is_empty() {
            argmax(norms.iter().copied().enumerate().filter(|&(k, _)| !used[k]))
        } else {
            let errs: Vec<f64> = trajs
                .par_iter()
                .map(|t| relative_projection_error(forms, &modes, t.borrow()))
                .collect();
            argmax(errs.into_iter().enumerate().filter(|&(k, _)| !used[k]))
        };
        let Some(pick) = pick else { break };
        if !modes.is_empty() && err <= pod_tol {
            break;
        }
        used[pick] = true;
        let res: Vec<Vec<f64>> = trajs[pick]
            .borrow()
            .rows()
            .par_iter()
            .map(|r| residual(forms, &modes, r))
            .collect();
        let refs: Vec<&[f64]> = res.iter().map(Vec::as_slice).collect();
        let compressed = pod(&refs, forms, PodTruncation::Energy(pod_tol))?;
        prov.selected.push((pick, None));
        prov.selected_errors.push(err);
        for m in compressed.modes {
            if modes.len() >= n_max {
                break;
            }
            if let Some(m) = orthonormalize_against(forms, &modes, m) {
                modes.push(m);
            }
        }
    }
    ReducedBasis::new(modes, None, prov)
}

fn argmax<I: Iterator<Item = (usize, f64)>>(it: I) -> (Option<usize>, f64) {
    let mut best: (Option<usize>, f64) = (None, f64::NEG_INFINITY);
    for (k, v) in it {
        // strict comparison keeps the lowest index on ties
        if best.0.is_none() || v > best.1 {
            best = (Some(k), v);
        }
    }
    best
}

/// Classical greedy over all `(parameter, time)` snapshots.
///
/// Stops at `n_max` modes or once every snapshot residual is at most `tol`.
pub fn greedy<T>(trajs: &[T], forms: &AssembledForms, tol: f64, n_max: usize) -> Result<ReducedBasis>
where
    T: Borrow<FieldTrajectory> + Sync,
{
    check_training(trajs, forms)?;
    let index: Vec<(usize, usize)> = trajs
        .iter()
        .enumerate()
        .flat_map(|(k, t)| (0..t.borrow().grid().len()).map(move |n| (k, n)))
        .collect();
    let mut res: Vec<Vec<f64>> = index.iter().map(|&(k, n)| trajs[k].borrow().row(n).to_vec()).collect();
    let mut mres: Vec<Vec<f64>> = res.par_iter().map(|r| forms.mass.matvec(r)).collect();
    let mut used = vec![false; index.len()];
    let scale = res
        .iter()
        .zip(&mres)
        .map(|(r, m)| dot(r, m).max(0.0).sqrt())
        .fold(0.0, f64::max);
    let floor = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let mut modes: Vec<Vec<f64>> = Vec::new();
    let mut prov = Provenance {
        algorithm: "greedy".into(),
        ..Default::default()
    };
    while modes.len() < n_max {
        let norms: Vec<f64> = res
            .par_iter()
            .zip(mres.par_iter())
            .map(|(r, m)| dot(r, m).max(0.0).sqrt())
            .collect();
        let (pick, err) = argmax(norms.iter().copied().enumerate().filter(|&(i, _)| !used[i]));
        let Some(pick) = pick else { break };
        if err <= tol || err <= floor {
            break;
        }
        used[pick] = true;
        let candidate: Vec<f64> = res[pick].iter().map(|x| x / err).collect();
        let Some(phi) = orthonormalize_against(forms, &modes, candidate) else {
            break;
        };
        let mphi = forms.mass.matvec(&phi);
        res.par_iter_mut().zip(mres.par_iter_mut()).for_each(|(r, m)| {
            let c = dot(&phi, m);
            for (x, y) in r.iter_mut().zip(&phi) {
                *x -= c * y;
            }
            for (x, y) in m.iter_mut().zip(&mphi) {
                *x -= c * y;
            }
        });
        let (k, n) = index[pick];
        prov.selected.push((k, Some(n)));
        prov.selected_errors.push(err);
        modes.push(phi);
    }
    ReducedBasis::new(modes, None, prov)
}

/// Rotates an L2-orthonormal basis so that it is also H1-orthogonal:
/// solves `(∇Φ, ∇v) = λ (Φ, v)` on the span, eigenvalues ascending.
pub fn h1_reorthogonalize(basis: &ReducedBasis, forms: &AssembledForms) -> Result<ReducedBasis> {
    if basis.is_empty() {
        return Ok(basis.clone());
    }
    forms.check_len(&basis.modes[0])?;
    let defect = basis.orthonormality_defect(forms);
    if defect > ORTHONORMAL_TOL {
        return Err(NirbError::NotOrthonormal(defect));
    }
    let g = basis.gram_h1(forms);
    let (lambda, v) = sym_eig(&g)?;
    let n = basis.len();
    let modes = (0..n)
        .map(|j| {
            let mut m = vec![0.0; basis.n_nodes()];
            for i in 0..n {
                let c = v[(i, j)];
                for (x, y) in m.iter_mut().zip(&basis.modes[i]) {
                    *x += c * y;
                }
            }
            m
        })
        .collect();
    ReducedBasis::new(modes, Some(lambda), basis.provenance.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, BoundaryCondition};
    use crate::integrators::TimeGrid;
    use crate::mesh::{Rect, TriMesh};
    use std::sync::Arc;

    fn forms(n: usize) -> AssembledForms {
        let mesh = Arc::new(TriMesh::structured(n, n, Rect::unit_square()).unwrap());
        assemble(mesh, BoundaryCondition::DirichletZero).unwrap()
    }

    fn bubble(f: &AssembledForms, kx: f64, ky: f64) -> Vec<f64> {
        use std::f64::consts::PI;
        f.mesh().sample(|x, y| (kx * PI * x).sin() * (ky * PI * y).sin())
    }

    #[test]
    fn pod_of_rank_one_set() {
        let f = forms(6);
        let v = bubble(&f, 1.0, 1.0);
        let w: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        let p = pod(&[&v, &w], &f, PodTruncation::Count(2)).unwrap();
        assert_eq!(p.modes.len(), 1);
        assert!(p.singular_values[1] / p.singular_values[0] <= 1e-14);
        let nv = m_norm(&f, &v);
        for (a, b) in p.modes[0].iter().zip(&v) {
            assert!((a.abs() - b.abs() / nv).abs() < 1e-12);
        }
    }

    #[test]
    fn pod_of_zero_set_is_empty() {
        let f = forms(3);
        let z = vec![0.0; f.n_nodes()];
        assert!(pod(&[&z, &z], &f, PodTruncation::Energy(1e-6)).unwrap().modes.is_empty());
        assert!(pod(&[], &f, PodTruncation::Count(1)).is_err());
    }

    #[test]
    fn greedy_exact_span() {
        let f = forms(8);
        let a = bubble(&f, 1.0, 1.0);
        let b = bubble(&f, 2.0, 1.0);
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let rows = |s: f64| {
            (0..5)
                .map(|n| {
                    let t = n as f64 / 4.0;
                    a.iter().zip(&b).map(|(x, y)| (1.0 + t) * x + s * t * t * y).collect()
                })
                .collect::<Vec<Vec<f64>>>()
        };
        let trajs = vec![
            FieldTrajectory::new(grid, rows(1.0), vec![1.0]).unwrap(),
            FieldTrajectory::new(grid, rows(-3.0), vec![2.0]).unwrap(),
        ];
        let rb = greedy(&trajs, &f, 1e-10, 10).unwrap();
        assert_eq!(rb.len(), 2);
        for t in &trajs {
            for r in t.rows() {
                let p = rb.project(&f, r).unwrap();
                let d: Vec<f64> = r.iter().zip(&p).map(|(x, y)| x - y).collect();
                assert!(m_norm(&f, &d) <= 1e-12);
            }
        }
        let e = &rb.provenance.selected_errors;
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn h1_rotation_of_single_mode() {
        let f = forms(6);
        let v = bubble(&f, 1.0, 1.0);
        let nv = m_norm(&f, &v);
        let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let rb = ReducedBasis::new(vec![v.clone()], None, Provenance::default()).unwrap();
        let r = h1_reorthogonalize(&rb, &f).unwrap();
        let lam = r.eigenvalues().unwrap()[0];
        assert!((lam - f.h1_inner(&v, &v)).abs() < 1e-12);
        for (a, b) in r.modes()[0].iter().zip(&v) {
            assert!((a.abs() - b.abs()).abs() < 1e-12);
        }
        let bad = ReducedBasis::new(vec![v.iter().map(|x| 2.0 * x).collect()], None, Provenance::default()).unwrap();
        assert!(matches!(h1_reorthogonalize(&bad, &f), Err(NirbError::NotOrthonormal(_))));
    }
}
