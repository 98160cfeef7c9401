//! Offline/online orchestration, error evaluation and convergence studies.

mod errors;
mod study;

pub use errors::{evaluate_errors, least_squares_slope, ErrorReport, Reference};
pub use study::{
    convergence_study, evaluate_parameter, leave_one_out, study_levels, Coupling, LevelRow, LooReport, LooRow,
    ParamErrors, StudyReport,
};

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::basis::{greedy, h1_reorthogonalize, pod_greedy, ReducedBasis};
use crate::error::{NirbError, Result};
use crate::fem::{assemble, ritz_projection, AssembledForms, BoundaryCondition};
use crate::integrators::{brusselator_trajectory, heat_solve_with, FieldTrajectory, TimeGrid};
use crate::io::config::{BoundsPolicy, FineScheme, InitialData, Problem, RbAlgorithm, StudyConfig};
use crate::mesh::{Rect, Transfer, TriMesh};
use crate::models::{manufactured_f, manufactured_grad, manufactured_u, BrusselatorParams};
use crate::rectification::{
    apply_rectification, build_rectification, lift_coarse, trajectory_coefficients, RectificationTensor,
};

/// Fine or coarse side of the two-grid pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fine,
    Coarse,
}

/// Assembled forms, time grids and the coarse-to-fine transfer of one study.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub problem: Problem,
    pub fine: AssembledForms,
    pub coarse: AssembledForms,
    pub fine_grid: TimeGrid,
    pub coarse_grid: TimeGrid,
    pub transfer: Transfer,
}

impl Discretization {
    pub fn new(cfg: &StudyConfig) -> Result<Self> {
        let fine = Arc::new(TriMesh::structured(cfg.fine_n, cfg.fine_n, Rect::unit_square())?);
        let coarse = Arc::new(TriMesh::structured(cfg.coarse_n, cfg.coarse_n, Rect::unit_square())?);
        Self::from_parts(
            cfg.problem,
            fine,
            coarse,
            TimeGrid::new(cfg.t0, cfg.t_end, cfg.fine_steps)?,
            TimeGrid::new(cfg.t0, cfg.t_end, cfg.coarse_steps)?,
        )
    }

    pub fn from_parts(
        problem: Problem,
        fine_mesh: Arc<TriMesh>,
        coarse_mesh: Arc<TriMesh>,
        fine_grid: TimeGrid,
        coarse_grid: TimeGrid,
    ) -> Result<Self> {
        let bc = match problem {
            Problem::Heat => BoundaryCondition::DirichletZero,
            Problem::Brusselator => BoundaryCondition::NeumannNatural,
        };
        let transfer = Transfer::new(&coarse_mesh, &fine_mesh)?;
        Ok(Discretization {
            problem,
            fine: assemble(fine_mesh, bc)?,
            coarse: assemble(coarse_mesh, bc)?,
            fine_grid,
            coarse_grid,
            transfer,
        })
    }

    pub fn forms(&self, level: Level) -> &AssembledForms {
        match level {
            Level::Fine => &self.fine,
            Level::Coarse => &self.coarse,
        }
    }

    pub fn grid(&self, level: Level) -> &TimeGrid {
        match level {
            Level::Fine => &self.fine_grid,
            Level::Coarse => &self.coarse_grid,
        }
    }
}

fn is_unit_mu(mu: f64) -> bool {
    (mu - 1.0).abs() < 1e-12
}

/// Heat initial data at `t0`: the state reached from zero data after a
/// pre-solve started at `presolve_from`. With [`InitialData::Projection`] and
/// `mu = 1`, the Ritz projection (fine) or nodal interpolation (coarse) of the
/// manufactured solution instead.
fn heat_initial(cfg: &StudyConfig, disc: &Discretization, level: Level, mu: f64, scheme: crate::integrators::Scheme) -> Result<Vec<f64>> {
    let forms = disc.forms(level);
    let t0 = cfg.t0;
    if is_unit_mu(mu) && cfg.initial_data == InitialData::Projection {
        return match level {
            Level::Fine => ritz_projection(forms, |x, y| manufactured_grad(t0, x, y)),
            Level::Coarse => Ok(forms.mesh().sample(|x, y| manufactured_u(t0, x, y))),
        };
    }
    let dt = disc.grid(level).dt();
    let steps = ((t0 - cfg.presolve_from) / dt).round() as usize;
    let zero = vec![0.0; forms.n_nodes()];
    if steps == 0 {
        return Ok(zero);
    }
    let pre = TimeGrid::new(cfg.presolve_from, t0, steps)?;
    let traj = heat_solve_with(scheme, forms, mu, manufactured_f, &zero, &pre)?;
    Ok(traj.row(steps).to_vec())
}

/// Solves the model at `param` on one level; one trajectory per component.
pub fn solve(cfg: &StudyConfig, disc: &Discretization, level: Level, param: &[f64]) -> Result<Vec<FieldTrajectory>> {
    let scheme = match level {
        Level::Fine => cfg.fine_scheme,
        Level::Coarse => cfg.coarse_scheme,
    };
    let forms = disc.forms(level);
    let grid = disc.grid(level);
    let run = || -> Result<Vec<FieldTrajectory>> {
        match scheme {
            FineScheme::Heat(s) => {
                let mu = param[0];
                let u0 = heat_initial(cfg, disc, level, mu, s)?;
                Ok(vec![heat_solve_with(s, forms, mu, manufactured_f, &u0, grid)?])
            }
            FineScheme::Brusselator(s) => {
                let p = BrusselatorParams::new(param[0], param[1], param[2]);
                Ok(brusselator_trajectory(forms, &p, grid, s)?.to_vec())
            }
        }
    };
    if param.len() != cfg.problem.param_dim() {
        return Err(NirbError::DimensionMismatch {
            what: "parameter components",
            expected: cfg.problem.param_dim(),
            got: param.len(),
        });
    }
    run().map_err(|e| NirbError::Parameter {
        param: param.to_vec(),
        source: Box::new(e),
    })
}

/// Fine and coarse trajectories for a list of parameters, indexed `[param][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub params: Vec<Vec<f64>>,
    pub fine: Vec<Vec<FieldTrajectory>>,
    pub coarse: Vec<Vec<FieldTrajectory>>,
}

pub fn compute_snapshots(cfg: &StudyConfig, disc: &Discretization, params: &[Vec<f64>]) -> Result<Snapshots> {
    let pairs = params
        .par_iter()
        .map(|p| Ok((solve(cfg, disc, Level::Fine, p)?, solve(cfg, disc, Level::Coarse, p)?)))
        .collect::<Result<Vec<_>>>()?;
    let (fine, coarse) = pairs.into_iter().unzip();
    Ok(Snapshots {
        params: params.to_vec(),
        fine,
        coarse,
    })
}

/// Basis and rectification tensor of one solution component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentModel {
    pub basis: ReducedBasis,
    pub rectification: RectificationTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineArtifacts {
    pub config: StudyConfig,
    pub fine_mesh: Arc<TriMesh>,
    pub coarse_mesh: Arc<TriMesh>,
    pub fine_grid: TimeGrid,
    pub coarse_grid: TimeGrid,
    pub components: Vec<ComponentModel>,
}

impl OfflineArtifacts {
    pub fn discretization(&self) -> Result<Discretization> {
        Discretization::from_parts(
            self.config.problem,
            self.fine_mesh.clone(),
            self.coarse_mesh.clone(),
            self.fine_grid,
            self.coarse_grid,
        )
    }

    pub fn check_consistency(&self) -> Result<()> {
        if self.components.len() != self.config.problem.components() {
            return Err(NirbError::Inconsistent(format!(
                "{} components stored, {} expected",
                self.components.len(),
                self.config.problem.components()
            )));
        }
        for (c, m) in self.components.iter().enumerate() {
            if m.basis.n_nodes() != self.fine_mesh.n_nodes() {
                return Err(NirbError::Inconsistent(format!("basis {c} does not match the fine mesh")));
            }
            if m.rectification.n() != m.basis.len() || m.rectification.steps() != self.fine_grid.len() {
                return Err(NirbError::Inconsistent(format!(
                    "rectification {c} has {} matrices of size {}, basis has {} modes on {} time indices",
                    m.rectification.steps(),
                    m.rectification.n(),
                    m.basis.len(),
                    self.fine_grid.len()
                )));
            }
        }
        if !self.fine_grid.same_window(&self.coarse_grid) {
            return Err(NirbError::Inconsistent("fine and coarse time windows differ".into()));
        }
        Ok(())
    }

    /// Errors unless the discretization-defining settings of `cfg` match the stored ones.
    pub fn check_matches(&self, cfg: &StudyConfig) -> Result<()> {
        let a = &self.config;
        let same = a.problem == cfg.problem
            && a.fine_n == cfg.fine_n
            && a.coarse_n == cfg.coarse_n
            && a.fine_steps == cfg.fine_steps
            && a.coarse_steps == cfg.coarse_steps
            && a.t0 == cfg.t0
            && a.t_end == cfg.t_end
            && a.fine_scheme == cfg.fine_scheme
            && a.coarse_scheme == cfg.coarse_scheme
            && a.initial_data == cfg.initial_data
            && a.presolve_from == cfg.presolve_from;
        if !same {
            return Err(NirbError::Inconsistent(
                "stored artifacts were built for a different discretization; rerun offline".into(),
            ));
        }
        Ok(())
    }
}

/// Builds bases and rectification tensors from precomputed snapshots, using
/// only the training parameters listed in `subset`.
pub fn offline_from_snapshots(
    cfg: &StudyConfig,
    disc: &Discretization,
    snaps: &Snapshots,
    subset: &[usize],
) -> Result<OfflineArtifacts> {
    if subset.is_empty() {
        return Err(NirbError::InvalidArgument("training set is empty".into()));
    }
    let mut components = Vec::new();
    for c in 0..cfg.problem.components() {
        let fine: Vec<&FieldTrajectory> = subset.iter().map(|&k| &snaps.fine[k][c]).collect();
        let coarse: Vec<&FieldTrajectory> = subset.iter().map(|&k| &snaps.coarse[k][c]).collect();
        let mut basis = match cfg.algorithm {
            RbAlgorithm::PodGreedy => pod_greedy(&fine, &disc.fine, cfg.n_max, cfg.pod_tol)?,
            RbAlgorithm::Greedy => greedy(&fine, &disc.fine, cfg.greedy_tol, cfg.n_max)?,
        };
        if basis.is_empty() {
            return Err(NirbError::InvalidArgument(format!("training snapshots of component {c} are all zero")));
        }
        if cfg.h1_reorthogonalize {
            basis = h1_reorthogonalize(&basis, &disc.fine)?;
        }
        log::info!("component {c}: {} modes ({})", basis.len(), basis.provenance.algorithm);
        let rectification = build_rectification(
            &fine,
            &coarse,
            disc.coarse.mesh(),
            &basis,
            &disc.fine,
            &disc.fine_grid,
            cfg.delta,
        )?;
        components.push(ComponentModel { basis, rectification });
    }
    Ok(OfflineArtifacts {
        config: cfg.clone(),
        fine_mesh: disc.fine.mesh_arc(),
        coarse_mesh: disc.coarse.mesh_arc(),
        fine_grid: disc.fine_grid,
        coarse_grid: disc.coarse_grid,
        components,
    })
}

/// Full offline stage: fine and coarse solves for the training set, then bases
/// and rectification.
pub fn offline(cfg: &StudyConfig) -> Result<(OfflineArtifacts, Snapshots)> {
    cfg.validate()?;
    let disc = Discretization::new(cfg)?;
    let snaps = compute_snapshots(cfg, &disc, &cfg.training)?;
    let all: Vec<usize> = (0..snaps.params.len()).collect();
    let art = offline_from_snapshots(cfg, &disc, &snaps, &all)?;
    Ok((art, snaps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Plain,
    Rectified,
}

#[derive(Debug, Clone)]
pub struct OnlineResult {
    /// One fine-mesh, fine-grid trajectory per component.
    pub fields: Vec<FieldTrajectory>,
    pub coarse: Vec<FieldTrajectory>,
    pub coarse_seconds: f64,
    pub reconstruct_seconds: f64,
}

/// Projects lifted coarse trajectories on the bases, optionally rectifying.
pub fn reconstruct(
    art: &OfflineArtifacts,
    disc: &Discretization,
    coarse: &[FieldTrajectory],
    mode: Mode,
) -> Result<Vec<FieldTrajectory>> {
    if coarse.len() != art.components.len() {
        return Err(NirbError::DimensionMismatch {
            what: "solution components",
            expected: art.components.len(),
            got: coarse.len(),
        });
    }
    coarse
        .iter()
        .zip(&art.components)
        .map(|(c, model)| {
            let lifted = lift_coarse(c, &disc.transfer, &disc.fine_grid)?;
            let mut coeffs = trajectory_coefficients(&model.basis, &disc.fine, &lifted)?;
            if mode == Mode::Rectified {
                coeffs = apply_rectification(&model.rectification, &coeffs)?;
            }
            let rows = coeffs
                .iter()
                .map(|a| model.basis.reconstruct(a))
                .collect::<Result<Vec<_>>>()?;
            FieldTrajectory::new(disc.fine_grid, rows, c.param().to_vec())
        })
        .collect()
}

/// Online stage at a new parameter: coarse solve, interpolation, projection.
pub fn online(art: &OfflineArtifacts, disc: &Discretization, param: &[f64], mode: Mode) -> Result<OnlineResult> {
    let cfg = &art.config;
    if !cfg.in_bounds(param) {
        match cfg.bounds_policy {
            BoundsPolicy::Reject => return Err(NirbError::OutOfBounds(param.to_vec())),
            BoundsPolicy::Warn => log::warn!("parameter {param:?} is outside the configured bounds"),
        }
    }
    let start = Instant::now();
    let coarse = solve(cfg, disc, Level::Coarse, param)?;
    let coarse_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let fields = reconstruct(art, disc, &coarse, mode)?;
    let reconstruct_seconds = start.elapsed().as_secs_f64();
    Ok(OnlineResult {
        fields,
        coarse,
        coarse_seconds,
        reconstruct_seconds,
    })
}

/// L2 projection of every row on the component bases.
pub fn project_trajectories(art: &OfflineArtifacts, disc: &Discretization, fine: &[FieldTrajectory]) -> Result<Vec<FieldTrajectory>> {
    fine.iter()
        .zip(&art.components)
        .map(|(t, m)| t.map_rows(|r| m.basis.project(&disc.fine, r)))
        .collect()
}

/// Coarse trajectories interpolated onto the fine mesh and grid.
pub fn lift_all(disc: &Discretization, coarse: &[FieldTrajectory]) -> Result<Vec<FieldTrajectory>> {
    coarse
        .iter()
        .map(|c| lift_coarse(c, &disc.transfer, &disc.fine_grid))
        .collect()
}

/// Manufactured reference, exact for the heat problem at `mu = 1`.
pub fn manufactured_reference() -> Reference<'static> {
    Reference::Analytic {
        u: &manufactured_u,
        grad: &manufactured_grad,
    }
}
