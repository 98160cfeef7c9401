use rayon::prelude::*;

use super::errors::{evaluate_errors, least_squares_slope, ErrorReport, Reference};
use super::{
    compute_snapshots, lift_all, manufactured_reference, offline_from_snapshots, online, project_trajectories,
    reconstruct, solve, Discretization, Level, Mode, OfflineArtifacts, Snapshots,
};
use crate::error::{NirbError, Result};
use crate::io::config::{Problem, StudyConfig};

/// Mesh/step coupling of a convergence ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `dt_G = H = 2h = 2 dt_F`.
    TwoH,
    /// `H^2 = h = dt_F`, `dt_G = H`.
    Sqrt,
}

impl Coupling {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "2h" => Some(Coupling::TwoH),
            "sqrt" => Some(Coupling::Sqrt),
            _ => None,
        }
    }
}

/// `(fine_n, coarse_n, fine_steps, coarse_steps)` per level on a unit time window.
pub fn study_levels(coupling: Coupling) -> Vec<(usize, usize, usize, usize)> {
    match coupling {
        Coupling::TwoH => [8, 16, 32].iter().map(|&n| (n, n / 2, n, n / 2)).collect(),
        Coupling::Sqrt => [(16, 4), (36, 6), (64, 8)].iter().map(|&(n, m)| (n, m, n, m)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub h: f64,
    pub big_h: f64,
    pub dt_f: f64,
    pub dt_g: f64,
    /// `[fine, coarse, plain NIRB, rectified NIRB]`
    pub h1: [f64; 4],
    pub l2: [f64; 4],
    pub n_modes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<LevelRow>,
    /// Slopes against `h` of the `h1` columns followed by the `l2` columns.
    pub slopes: [f64; 8],
}

/// Runs fine FEM, coarse FEM, plain and rectified NIRB on each level of the
/// ladder against the manufactured solution at the first test parameter.
pub fn convergence_study(base: &StudyConfig, levels: &[(usize, usize, usize, usize)]) -> Result<StudyReport> {
    if base.problem != Problem::Heat {
        return Err(NirbError::InvalidArgument("convergence studies need the heat problem".into()));
    }
    if levels.len() < 3 {
        return Err(NirbError::InvalidArgument(format!("a study needs at least 3 levels, got {}", levels.len())));
    }
    let mu = base.test_params.first().cloned().unwrap_or_else(|| vec![1.0]);
    if (mu[0] - 1.0).abs() > 1e-12 {
        return Err(NirbError::InvalidArgument(
            "convergence studies evaluate the manufactured solution at mu = 1".into(),
        ));
    }
    let mut rows = Vec::new();
    for &(fine_n, coarse_n, fine_steps, coarse_steps) in levels {
        let cfg = StudyConfig {
            fine_n,
            coarse_n,
            fine_steps,
            coarse_steps,
            ..base.clone()
        };
        cfg.validate()?;
        let disc = Discretization::new(&cfg)?;
        let snaps = compute_snapshots(&cfg, &disc, &cfg.training)?;
        let all: Vec<usize> = (0..snaps.params.len()).collect();
        let art = offline_from_snapshots(&cfg, &disc, &snaps, &all)?;
        let exact = manufactured_reference();
        let fine = solve(&cfg, &disc, Level::Fine, &mu)?;
        let coarse = solve(&cfg, &disc, Level::Coarse, &mu)?;
        let plain = reconstruct(&art, &disc, &coarse, Mode::Plain)?;
        let rect = reconstruct(&art, &disc, &coarse, Mode::Rectified)?;
        let e_fine = evaluate_errors(&fine, exact, &disc.fine)?;
        let e_coarse = evaluate_errors(&coarse, exact, &disc.coarse)?;
        let e_plain = evaluate_errors(&plain, exact, &disc.fine)?;
        let e_rect = evaluate_errors(&rect, exact, &disc.fine)?;
        let row = LevelRow {
            h: 1.0 / fine_n as f64,
            big_h: 1.0 / coarse_n as f64,
            dt_f: disc.fine_grid.dt(),
            dt_g: disc.coarse_grid.dt(),
            h1: [e_fine.h1, e_coarse.h1, e_plain.h1, e_rect.h1],
            l2: [e_fine.l2, e_coarse.l2, e_plain.l2, e_rect.l2],
            n_modes: art.components[0].basis.len(),
        };
        log::info!("level h=1/{fine_n}: {row:?}");
        rows.push(row);
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let mut slopes = [0.0; 8];
    for j in 0..4 {
        slopes[j] = least_squares_slope(&h, &rows.iter().map(|r| r.h1[j]).collect::<Vec<_>>());
        slopes[4 + j] = least_squares_slope(&h, &rows.iter().map(|r| r.l2[j]).collect::<Vec<_>>());
    }
    Ok(StudyReport { rows, slopes })
}

/// Coarse, plain and rectified errors at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamErrors {
    pub param: Vec<f64>,
    /// `analytic` or `fine`.
    pub reference: &'static str,
    pub coarse: ErrorReport,
    pub plain: ErrorReport,
    pub rectified: ErrorReport,
}

/// Scores the online stage at `param` against the manufactured solution
/// (heat, `mu = 1`) or a fine solve. Coarse errors use the lifted coarse field.
pub fn evaluate_parameter(art: &OfflineArtifacts, disc: &Discretization, param: &[f64]) -> Result<ParamErrors> {
    let cfg = &art.config;
    let out = online(art, disc, param, Mode::Rectified)?;
    let plain = reconstruct(art, disc, &out.coarse, Mode::Plain)?;
    let lifted = lift_all(disc, &out.coarse)?;
    let analytic = cfg.problem == Problem::Heat && (param[0] - 1.0).abs() <= 1e-12;
    let fine;
    let (truth, reference) = if analytic {
        (manufactured_reference(), "analytic")
    } else {
        fine = solve(cfg, disc, Level::Fine, param)?;
        (Reference::Trajectory(&fine), "fine")
    };
    Ok(ParamErrors {
        param: param.to_vec(),
        reference,
        coarse: evaluate_errors(&lifted, truth, &disc.fine)?,
        plain: evaluate_errors(&plain, truth, &disc.fine)?,
        rectified: evaluate_errors(&out.fields, truth, &disc.fine)?,
    })
}

/// Relative l∞-in-time errors (H1 seminorm or full H1) at one held-out parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LooRow {
    pub param: Vec<f64>,
    /// Rectified NIRB built without this parameter.
    pub rectified: f64,
    /// Plain NIRB built without this parameter.
    pub plain: f64,
    /// Projection on the basis built from the whole training set.
    pub projection: f64,
    /// Lifted coarse solution.
    pub coarse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub rows: Vec<LooRow>,
}

impl LooReport {
    fn max_of(&self, f: impl Fn(&LooRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_rectified(&self) -> f64 {
        self.max_of(|r| r.rectified)
    }

    pub fn max_plain(&self) -> f64 {
        self.max_of(|r| r.plain)
    }

    pub fn max_projection(&self) -> f64 {
        self.max_of(|r| r.projection)
    }

    pub fn max_coarse(&self) -> f64 {
        self.max_of(|r| r.coarse)
    }
}

/// Leave-one-out over the training set, reusing the given snapshots.
pub fn leave_one_out(cfg: &StudyConfig, disc: &Discretization, snaps: &Snapshots) -> Result<LooReport> {
    let n = snaps.params.len();
    if n < 2 {
        return Err(NirbError::InvalidArgument("leave-one-out needs at least 2 training parameters".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let full = offline_from_snapshots(cfg, disc, snaps, &all)?;
    let rows = (0..n)
        .into_par_iter()
        .map(|k| {
            let rest: Vec<usize> = (0..n).filter(|&j| j != k).collect();
            let art = offline_from_snapshots(cfg, disc, snaps, &rest)?;
            let truth = Reference::Trajectory(&snaps.fine[k]);
            let rect = reconstruct(&art, disc, &snaps.coarse[k], Mode::Rectified)?;
            let plain = reconstruct(&art, disc, &snaps.coarse[k], Mode::Plain)?;
            let proj = project_trajectories(&full, disc, &snaps.fine[k])?;
            let lifted = lift_all(disc, &snaps.coarse[k])?;
            Ok(LooRow {
                param: snaps.params[k].clone(),
                rectified: evaluate_errors(&rect, truth, &disc.fine)?.h1,
                plain: evaluate_errors(&plain, truth, &disc.fine)?.h1,
                projection: evaluate_errors(&proj, truth, &disc.fine)?.h1,
                coarse: evaluate_errors(&lifted, truth, &disc.fine)?.h1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LooReport { rows })
}
