//! Time stepping for the assembled FEM systems.
//!
//! Linear heat problems use backward Euler (fine grid) or Crank-Nicolson
//! (coarse grid). The Brusselator uses Newton-solved implicit Euler or the
//! explicit midpoint rule on the mass-lumped system.

use crate::error::{NirbError, Result};
use crate::fem::{load_vector, AssembledForms, BoundaryCondition, MIDPOINT_RULE};
use crate::linalg::{bicgstab, cg_solve, CsrMatrix};
use crate::models::{brusselator_initial, brusselator_jacobian, brusselator_rhs, BrusselatorParams};

const STEP_TOL: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 20;

/// Uniform time grid `t0 < t1 < ... < T` with `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > t0) || steps == 0 || !t0.is_finite() || !t_end.is_finite() {
            return Err(NirbError::InvalidArgument(format!(
                "time grid needs T > t0 and steps >= 1, got [{t0}, {t_end}] with {steps} steps"
            )));
        }
        Ok(TimeGrid { t0, t_end, steps })
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.t_end
        } else {
            self.t0 + (self.t_end - self.t0) * (n as f64 / self.steps as f64)
        }
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Both grids cover the same window.
    pub fn same_window(&self, other: &TimeGrid) -> bool {
        let scale = self.t0.abs().max(self.t_end.abs()).max(1.0);
        (self.t0 - other.t0).abs() <= 1e-12 * scale && (self.t_end - other.t_end).abs() <= 1e-12 * scale
    }
}

/// Nodal fields at every time of a grid, for one parameter on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrajectory {
    grid: TimeGrid,
    n_nodes: usize,
    rows: Vec<Vec<f64>>,
    param: Vec<f64>,
}

impl FieldTrajectory {
    pub fn new(grid: TimeGrid, rows: Vec<Vec<f64>>, param: Vec<f64>) -> Result<Self> {
        if rows.len() != grid.len() {
            return Err(NirbError::DimensionMismatch {
                what: "trajectory time rows",
                expected: grid.len(),
                got: rows.len(),
            });
        }
        let n_nodes = rows[0].len();
        for (n, r) in rows.iter().enumerate() {
            if r.len() != n_nodes {
                return Err(NirbError::DimensionMismatch {
                    what: "trajectory row length",
                    expected: n_nodes,
                    got: r.len(),
                });
            }
            if let Some(i) = r.iter().position(|v| !v.is_finite()) {
                return Err(NirbError::NonFinite {
                    what: "trajectory value",
                    location: format!("time index {n}, node {i}"),
                });
            }
        }
        Ok(FieldTrajectory {
            grid,
            n_nodes,
            rows,
            param,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn param(&self) -> &[f64] {
        &self.param
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    /// Same values with another parameter label.
    pub fn with_param(mut self, param: Vec<f64>) -> Self {
        self.param = param;
        self
    }

    /// Applies `f` to every row.
    pub fn map_rows<F>(&self, f: F) -> Result<FieldTrajectory>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let rows = self.rows.iter().map(|r| r.as_slice()).map(f).collect::<Result<Vec<_>>>()?;
        FieldTrajectory::new(self.grid, rows, self.param.clone())
    }
}

/// Time scheme for the linear heat problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    BackwardEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::BackwardEuler => "euler",
            Scheme::CrankNicolson => "cn",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "euler" | "backward_euler" => Some(Scheme::BackwardEuler),
            "cn" | "crank_nicolson" => Some(Scheme::CrankNicolson),
            _ => None,
        }
    }
}

/// `M u' + mu K u = b(t)` on the free dofs.
#[derive(Debug, Clone)]
pub struct LinearParabolic {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
}

impl LinearParabolic {
    /// Advances `u0` over `grid`; `load(t)` returns free-dof loads.
    pub fn solve<L>(&self, scheme: Scheme, mu: f64, load: L, u0: &[f64], grid: &TimeGrid) -> Result<Vec<Vec<f64>>>
    where
        L: Fn(f64) -> Result<Vec<f64>>,
    {
        if !(mu > 0.0) {
            return Err(NirbError::InvalidArgument(format!("diffusivity must be positive, got {mu}")));
        }
        let n = self.mass.nrows();
        if u0.len() != n {
            return Err(NirbError::DimensionMismatch {
                what: "initial state",
                expected: n,
                got: u0.len(),
            });
        }
        let dt = grid.dt();
        let theta = match scheme {
            Scheme::BackwardEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        };
        let lhs = self.mass.linear_combination(1.0, &self.stiffness, theta * dt * mu)?;
        let explicit = match scheme {
            Scheme::BackwardEuler => None,
            Scheme::CrankNicolson => Some(self.mass.linear_combination(1.0, &self.stiffness, -0.5 * dt * mu)?),
        };
        let mut out = Vec::with_capacity(grid.len());
        out.push(u0.to_vec());
        for step in 1..=grid.steps {
            let prev = &out[step - 1];
            let (mut rhs, t_load) = match &explicit {
                None => (self.mass.matvec(prev), grid.time(step)),
                Some(b) => (b.matvec(prev), 0.5 * (grid.time(step - 1) + grid.time(step))),
            };
            let b = load(t_load).map_err(|e| step_error(step, e))?;
            for (r, bi) in rhs.iter_mut().zip(&b) {
                *r += dt * bi;
            }
            let sol = cg_solve(&lhs, &rhs, Some(prev), STEP_TOL, 10 * n + 100).map_err(|e| step_error(step, e))?;
            out.push(sol.x);
        }
        Ok(out)
    }
}

fn step_error(step: usize, e: NirbError) -> NirbError {
    NirbError::TimeStep {
        step,
        source: Box::new(e),
    }
}

fn heat_solve<F>(
    scheme: Scheme,
    forms: &AssembledForms,
    mu: f64,
    f: F,
    u0: &[f64],
    grid: &TimeGrid,
) -> Result<FieldTrajectory>
where
    F: Fn(f64, f64, f64) -> f64,
{
    forms.check_len(u0)?;
    let grid = *grid;
    let (Some(mass), Some(stiffness)) = (forms.mass_free.clone(), forms.stiffness_free.clone()) else {
        // no free dofs: the solution is identically zero
        let rows = vec![vec![0.0; forms.n_nodes()]; grid.len()];
        return FieldTrajectory::new(grid, rows, vec![mu]);
    };
    let system = LinearParabolic { mass, stiffness };
    let mesh = forms.mesh();
    let load = |t: f64| Ok(forms.restrict(&load_vector(mesh, &f, t)?));
    let rows = system.solve(scheme, mu, load, &forms.restrict(u0), &grid)?;
    let rows = rows.iter().map(|r| forms.extend(r)).collect();
    FieldTrajectory::new(grid, rows, vec![mu])
}

/// Backward Euler: `(M + dt mu K) u^n = M u^{n-1} + dt b(t^n)`.
pub fn heat_backward_euler<F>(forms: &AssembledForms, mu: f64, f: F, u0: &[f64], grid: &TimeGrid) -> Result<FieldTrajectory>
where
    F: Fn(f64, f64, f64) -> f64,
{
    heat_solve(Scheme::BackwardEuler, forms, mu, f, u0, grid)
}

/// Crank-Nicolson with the source sampled at interval midpoints.
pub fn heat_crank_nicolson<F>(forms: &AssembledForms, mu: f64, f: F, u0: &[f64], grid: &TimeGrid) -> Result<FieldTrajectory>
where
    F: Fn(f64, f64, f64) -> f64,
{
    heat_solve(Scheme::CrankNicolson, forms, mu, f, u0, grid)
}

pub fn heat_solve_with<F>(
    scheme: Scheme,
    forms: &AssembledForms,
    mu: f64,
    f: F,
    u0: &[f64],
    grid: &TimeGrid,
) -> Result<FieldTrajectory>
where
    F: Fn(f64, f64, f64) -> f64,
{
    heat_solve(scheme, forms, mu, f, u0, grid)
}

/// Two-species nodal state.
#[derive(Debug, Clone, PartialEq)]
pub struct BrusselatorState {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl BrusselatorState {
    pub fn constant(n: usize, u1: f64, u2: f64) -> Self {
        BrusselatorState {
            u1: vec![u1; n],
            u2: vec![u2; n],
        }
    }

    pub fn initial(forms: &AssembledForms) -> Self {
        let mesh = forms.mesh();
        BrusselatorState {
            u1: mesh.sample(|x, y| brusselator_initial(x, y).0),
            u2: mesh.sample(|x, y| brusselator_initial(x, y).1),
        }
    }

    fn is_finite(&self) -> bool {
        self.u1.iter().chain(&self.u2).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    /// Newton updates performed.
    pub iterations: usize,
    /// Mass-scaled residual norm before each update and after the last.
    pub residuals: Vec<f64>,
}

fn require_neumann(forms: &AssembledForms) -> Result<()> {
    if forms.bc() != BoundaryCondition::NeumannNatural {
        return Err(NirbError::InvalidArgument("Brusselator steps need Neumann forms".into()));
    }
    Ok(())
}

/// Implicit Euler residual `M (u - u_prev)/dt - ∫ r(u) φ + alpha K u`, stacked.
fn newton_residual(
    forms: &AssembledForms,
    p: &BrusselatorParams,
    prev: &BrusselatorState,
    cur: &BrusselatorState,
    dt: f64,
) -> Vec<f64> {
    let mesh = forms.mesh();
    let n = forms.n_nodes();
    let mut res = vec![0.0; 2 * n];
    let k1 = forms.stiffness.matvec(&cur.u1);
    let k2 = forms.stiffness.matvec(&cur.u2);
    for i in 0..n {
        res[i] = p.alpha * k1[i];
        res[n + i] = p.alpha * k2[i];
    }
    for k in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[k];
        let area = mesh.area(k);
        for (l, w) in MIDPOINT_RULE.iter() {
            let at = |v: &[f64]| l[0] * v[tri[0]] + l[1] * v[tri[1]] + l[2] * v[tri[2]];
            let (a1, a2) = (at(&cur.u1), at(&cur.u2));
            let (p1, p2) = (at(&prev.u1), at(&prev.u2));
            let (r1, r2) = brusselator_rhs(p, a1, a2);
            let g1 = (a1 - p1) / dt - r1;
            let g2 = (a2 - p2) / dt - r2;
            for a in 0..3 {
                let wphi = w * area * l[a];
                res[tri[a]] += wphi * g1;
                res[n + tri[a]] += wphi * g2;
            }
        }
    }
    res
}

fn newton_jacobian(forms: &AssembledForms, p: &BrusselatorParams, cur: &BrusselatorState, dt: f64) -> Result<CsrMatrix> {
    let mesh = forms.mesh();
    let n = forms.n_nodes();
    let mut trip = Vec::with_capacity(2 * forms.stiffness.nnz() + 36 * mesh.n_triangles());
    for r in 0..n {
        for (c, v) in forms.stiffness.row(r) {
            trip.push((r, c, p.alpha * v));
            trip.push((n + r, n + c, p.alpha * v));
        }
    }
    for k in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[k];
        let area = mesh.area(k);
        for (l, w) in MIDPOINT_RULE.iter() {
            let at = |v: &[f64]| l[0] * v[tri[0]] + l[1] * v[tri[1]] + l[2] * v[tri[2]];
            let j = brusselator_jacobian(p, at(&cur.u1), at(&cur.u2));
            let blocks = [
                (0, 0, 1.0 / dt - j[0][0]),
                (0, n, -j[0][1]),
                (n, 0, -j[1][0]),
                (n, n, 1.0 / dt - j[1][1]),
            ];
            for a in 0..3 {
                for b in 0..3 {
                    let wpp = w * area * l[a] * l[b];
                    for &(ro, co, coef) in &blocks {
                        trip.push((ro + tri[a], co + tri[b], wpp * coef));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(2 * n, 2 * n, &trip)
}

fn scaled_norm(res: &[f64], lumped: &[f64]) -> f64 {
    let n = lumped.len();
    res.iter()
        .enumerate()
        .map(|(i, r)| r * r / lumped[i % n])
        .sum::<f64>()
        .sqrt()
}

/// One implicit Euler step solved by Newton's method on the stacked system.
pub fn brusselator_step_newton(
    forms: &AssembledForms,
    p: &BrusselatorParams,
    state: &BrusselatorState,
    dt: f64,
) -> Result<(BrusselatorState, NewtonReport)> {
    require_neumann(forms)?;
    if !(dt > 0.0) {
        return Err(NirbError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let n = forms.n_nodes();
    let mut cur = state.clone();
    let mut history = Vec::new();
    for it in 0..=NEWTON_MAX_ITER {
        let res = newton_residual(forms, p, state, &cur, dt);
        let norm = scaled_norm(&res, &forms.lumped);
        history.push(norm);
        if !norm.is_finite() {
            break;
        }
        if norm <= NEWTON_TOL {
            return Ok((
                cur,
                NewtonReport {
                    iterations: it,
                    residuals: history,
                },
            ));
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let jac = newton_jacobian(forms, p, &cur, dt)?;
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = bicgstab(&jac, &rhs, None, 1e-13, 20 * n + 200)?;
        for i in 0..n {
            cur.u1[i] += delta.x[i];
            cur.u2[i] += delta.x[n + i];
        }
    }
    Err(NirbError::NewtonDiverged { history })
}

fn rk2_rhs(forms: &AssembledForms, p: &BrusselatorParams, s: &BrusselatorState) -> BrusselatorState {
    let k1 = forms.stiffness.matvec(&s.u1);
    let k2 = forms.stiffness.matvec(&s.u2);
    let n = forms.n_nodes();
    let mut out = BrusselatorState::constant(n, 0.0, 0.0);
    for i in 0..n {
        let (r1, r2) = brusselator_rhs(p, s.u1[i], s.u2[i]);
        out.u1[i] = r1 - p.alpha * k1[i] / forms.lumped[i];
        out.u2[i] = r2 - p.alpha * k2[i] / forms.lumped[i];
    }
    out
}

fn axpy_state(s: &BrusselatorState, h: f64, k: &BrusselatorState) -> BrusselatorState {
    BrusselatorState {
        u1: s.u1.iter().zip(&k.u1).map(|(a, b)| a + h * b).collect(),
        u2: s.u2.iter().zip(&k.u2).map(|(a, b)| a + h * b).collect(),
    }
}

/// Explicit midpoint step on the mass-lumped system.
pub fn brusselator_step_rk2(
    forms: &AssembledForms,
    p: &BrusselatorParams,
    state: &BrusselatorState,
    dt: f64,
) -> Result<BrusselatorState> {
    require_neumann(forms)?;
    let k1 = rk2_rhs(forms, p, state);
    let mid = axpy_state(state, 0.5 * dt, &k1);
    let k2 = rk2_rhs(forms, p, &mid);
    Ok(axpy_state(state, dt, &k2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrusselatorScheme {
    NewtonEuler,
    Rk2,
}

impl BrusselatorScheme {
    pub fn name(&self) -> &'static str {
        match self {
            BrusselatorScheme::NewtonEuler => "newton_euler",
            BrusselatorScheme::Rk2 => "rk2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "newton_euler" | "euler" => Some(BrusselatorScheme::NewtonEuler),
            "rk2" => Some(BrusselatorScheme::Rk2),
            _ => None,
        }
    }
}

/// Both species over `grid`, starting from the standard initial data.
pub fn brusselator_trajectory(
    forms: &AssembledForms,
    p: &BrusselatorParams,
    grid: &TimeGrid,
    scheme: BrusselatorScheme,
) -> Result<[FieldTrajectory; 2]> {
    require_neumann(forms)?;
    let dt = grid.dt();
    let mut state = BrusselatorState::initial(forms);
    let mut rows1 = vec![state.u1.clone()];
    let mut rows2 = vec![state.u2.clone()];
    for step in 1..=grid.steps {
        state = match scheme {
            BrusselatorScheme::NewtonEuler => brusselator_step_newton(forms, p, &state, dt).map_err(|e| step_error(step, e))?.0,
            BrusselatorScheme::Rk2 => brusselator_step_rk2(forms, p, &state, dt)?,
        };
        if !state.is_finite() {
            return Err(NirbError::NonFinite {
                what: "Brusselator state (blow-up)",
                location: format!("time index {step}"),
            });
        }
        rows1.push(state.u1.clone());
        rows2.push(state.u2.clone());
    }
    let param = vec![p.a, p.b, p.alpha];
    Ok([
        FieldTrajectory::new(*grid, rows1, param.clone())?,
        FieldTrajectory::new(*grid, rows2, param)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{Rect, TriMesh};
    use std::sync::Arc;

    fn scalar(v: f64) -> CsrMatrix {
        CsrMatrix::from_triplets(1, 1, &[(0, 0, v)]).unwrap()
    }

    #[test]
    fn one_dof_surrogates() {
        let sys = LinearParabolic {
            mass: scalar(1.0),
            stiffness: scalar(1.0),
        };
        let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let zero = |_: f64| Ok(vec![0.0]);
        let be = sys.solve(Scheme::BackwardEuler, 1.0, zero, &[1.0], &grid).unwrap();
        assert!((be[1][0] - 0.5).abs() < 1e-14);
        let cn = sys.solve(Scheme::CrankNicolson, 1.0, zero, &[1.0], &grid).unwrap();
        assert!((cn[1][0] - 1.0 / 3.0).abs() < 1e-14);
        assert!(sys.solve(Scheme::BackwardEuler, 0.0, zero, &[1.0], &grid).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let mesh = Arc::new(TriMesh::structured(4, 4, Rect::unit_square()).unwrap());
        let forms = assemble(mesh, BoundaryCondition::DirichletZero).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let u0 = vec![0.0; forms.n_nodes()];
        for s in [Scheme::BackwardEuler, Scheme::CrankNicolson] {
            let tr = heat_solve_with(s, &forms, 2.0, |_, _, _| 0.0, &u0, &grid).unwrap();
            assert!(tr.rows().iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn time_grid_basics() {
        let g = TimeGrid::new(1.0, 2.0, 4).unwrap();
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.time(4), 2.0);
        assert_eq!(g.len(), 5);
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn rk2_scalar_midpoint() {
        // a = b = 0 and u2 = 0 reduce the reaction to u1' = -u1, u2' = 0
        let mesh = Arc::new(TriMesh::structured(1, 1, Rect::unit_square()).unwrap());
        let forms = assemble(mesh, BoundaryCondition::NeumannNatural).unwrap();
        let p = BrusselatorParams::new(0.0, 0.0, 0.0);
        let s = BrusselatorState::constant(4, 1.0, 0.0);
        let out = brusselator_step_rk2(&forms, &p, &s, 0.1).unwrap();
        assert!(out.u1.iter().all(|v| (v - 0.905).abs() < 1e-14));
        assert!(out.u2.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn newton_steady_state_is_fixed_point() {
        let mesh = Arc::new(TriMesh::structured(4, 4, Rect::unit_square()).unwrap());
        let forms = assemble(mesh, BoundaryCondition::NeumannNatural).unwrap();
        let p = BrusselatorParams::new(3.0, 2.0, 0.008);
        let s = BrusselatorState::constant(forms.n_nodes(), 3.0, 2.0 / 3.0);
        let (out, rep) = brusselator_step_newton(&forms, &p, &s, 0.05).unwrap();
        assert!(rep.iterations <= 1);
        assert!(*rep.residuals.last().unwrap() <= 1e-10);
        for (a, b) in out.u1.iter().zip(&s.u1) {
            assert!((a - b).abs() < 1e-12);
        }
        let dirichlet = assemble(forms.mesh_arc(), BoundaryCondition::DirichletZero).unwrap();
        assert!(brusselator_step_newton(&dirichlet, &p, &s, 0.05).is_err());
    }
}
