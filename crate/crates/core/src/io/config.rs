//! Flat `key = value` study configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{NirbError, Result};
use crate::integrators::{BrusselatorScheme, Scheme};
use crate::models::{BRUSSELATOR_BOUNDS, HEAT_MU_RANGE};
use crate::rectification::{DeltaPolicy, DEFAULT_RELATIVE_DELTA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Heat,
    Brusselator,
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Heat => "heat",
            Problem::Brusselator => "brusselator",
        }
    }

    /// Number of scalar parameters.
    pub fn param_dim(&self) -> usize {
        match self {
            Problem::Heat => 1,
            Problem::Brusselator => 3,
        }
    }

    /// Number of solution components.
    pub fn components(&self) -> usize {
        match self {
            Problem::Heat => 1,
            Problem::Brusselator => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbAlgorithm {
    PodGreedy,
    Greedy,
}

impl RbAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            RbAlgorithm::PodGreedy => "pod_greedy",
            RbAlgorithm::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsPolicy {
    Reject,
    Warn,
}

/// How heat trajectories obtain their state at `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    /// Zero data propagated from `presolve_from` with the same scheme and step.
    Presolve,
    /// Projection of the manufactured solution when `mu = 1`, pre-solve otherwise.
    Projection,
}

impl InitialData {
    pub fn name(&self) -> &'static str {
        match self {
            InitialData::Presolve => "presolve",
            InitialData::Projection => "projection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineScheme {
    Heat(Scheme),
    Brusselator(BrusselatorScheme),
}

impl FineScheme {
    pub fn name(&self) -> &'static str {
        match self {
            FineScheme::Heat(s) => s.name(),
            FineScheme::Brusselator(s) => s.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: Problem,
    /// Inclusive bounds per parameter component.
    pub bounds: Vec<(f64, f64)>,
    pub training: Vec<Vec<f64>>,
    /// Parameters evaluated by `errors`.
    pub test_params: Vec<Vec<f64>>,
    /// Cells per side of the fine and coarse meshes.
    pub fine_n: usize,
    pub coarse_n: usize,
    pub fine_steps: usize,
    pub coarse_steps: usize,
    pub t0: f64,
    pub t_end: f64,
    pub fine_scheme: FineScheme,
    pub coarse_scheme: FineScheme,
    pub algorithm: RbAlgorithm,
    pub n_max: usize,
    pub pod_tol: f64,
    pub greedy_tol: f64,
    pub delta: DeltaPolicy,
    pub h1_reorthogonalize: bool,
    pub bounds_policy: BoundsPolicy,
    pub initial_data: InitialData,
    /// Start of the zero-data pre-solve used for heat initial data.
    pub presolve_from: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

fn heat_training() -> Vec<Vec<f64>> {
    (1..=19).filter(|&i| i != 2).map(|i| vec![0.5 * i as f64]).collect()
}

fn brusselator_training() -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for a in [2.0, 2.5, 4.0] {
        for b in [1.0, 3.0, 4.0] {
            for alpha in [0.001, 0.005, 0.01, 0.05] {
                out.push(vec![a, b, alpha]);
            }
        }
    }
    out
}

impl StudyConfig {
    /// Heat study on `[1, 2]` with `h = dt_F = 1/32`, `H = dt_G = 2h` and 18 training diffusivities.
    pub fn heat_default() -> Self {
        StudyConfig {
            problem: Problem::Heat,
            bounds: vec![HEAT_MU_RANGE],
            training: heat_training(),
            test_params: vec![vec![1.0]],
            fine_n: 32,
            coarse_n: 16,
            fine_steps: 32,
            coarse_steps: 16,
            t0: 1.0,
            t_end: 2.0,
            fine_scheme: FineScheme::Heat(Scheme::BackwardEuler),
            coarse_scheme: FineScheme::Heat(Scheme::CrankNicolson),
            algorithm: RbAlgorithm::PodGreedy,
            n_max: 3,
            pod_tol: 1e-6,
            greedy_tol: 1e-8,
            delta: DeltaPolicy::Relative(DEFAULT_RELATIVE_DELTA),
            h1_reorthogonalize: true,
            bounds_policy: BoundsPolicy::Reject,
            initial_data: InitialData::Presolve,
            presolve_from: 0.0,
            output_dir: PathBuf::from("nirb_out"),
            seed: 0,
        }
    }

    /// Brusselator on `[0, 5]`: 40x40 Newton-Euler fine grid, 20x20 RK2 coarse grid.
    pub fn brusselator_default() -> Self {
        StudyConfig {
            problem: Problem::Brusselator,
            bounds: BRUSSELATOR_BOUNDS.to_vec(),
            training: brusselator_training(),
            test_params: vec![vec![3.0, 2.0, 0.008]],
            fine_n: 40,
            coarse_n: 20,
            fine_steps: 250,
            coarse_steps: 1000,
            t0: 0.0,
            t_end: 5.0,
            fine_scheme: FineScheme::Brusselator(BrusselatorScheme::NewtonEuler),
            coarse_scheme: FineScheme::Brusselator(BrusselatorScheme::Rk2),
            algorithm: RbAlgorithm::PodGreedy,
            n_max: 30,
            pod_tol: 1e-6,
            greedy_tol: 1e-8,
            delta: DeltaPolicy::Relative(DEFAULT_RELATIVE_DELTA),
            h1_reorthogonalize: true,
            bounds_policy: BoundsPolicy::Reject,
            initial_data: InitialData::Presolve,
            presolve_from: 0.0,
            output_dir: PathBuf::from("nirb_out"),
            seed: 0,
        }
    }

    pub fn default_for(problem: Problem) -> Self {
        match problem {
            Problem::Heat => Self::heat_default(),
            Problem::Brusselator => Self::brusselator_default(),
        }
    }

    pub fn in_bounds(&self, param: &[f64]) -> bool {
        param.len() == self.bounds.len() && param.iter().zip(&self.bounds).all(|(x, (lo, hi))| (*lo..=*hi).contains(x))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NirbError::Config { line: 0, message: m });
        if self.fine_n == 0 || self.coarse_n == 0 || self.fine_steps == 0 || self.coarse_steps == 0 {
            return bad("mesh and step counts must be positive".into());
        }
        if !(self.t_end > self.t0) {
            return bad(format!("t_end {} must exceed t0 {}", self.t_end, self.t0));
        }
        if self.training.is_empty() {
            return bad("training set is empty".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be positive".into());
        }
        let dim = self.problem.param_dim();
        if self.bounds.len() != dim {
            return bad(format!("{} bounds expected, got {}", dim, self.bounds.len()));
        }
        for p in self.training.iter().chain(&self.test_params) {
            if p.len() != dim {
                return bad(format!("parameter {p:?} must have {dim} components"));
            }
        }
        if let Some(p) = self.training.iter().find(|p| !self.in_bounds(p)) {
            return bad(format!("training parameter {p:?} is outside the bounds"));
        }
        let heat = self.problem == Problem::Heat;
        for s in [self.fine_scheme, self.coarse_scheme] {
            if heat != matches!(s, FineScheme::Heat(_)) {
                return bad(format!("scheme {} does not fit problem {}", s.name(), self.problem.name()));
            }
        }
        if heat && self.presolve_from > self.t0 {
            return bad("presolve_from must not exceed t0".into());
        }
        if !(self.pod_tol >= 0.0) || !(self.greedy_tol >= 0.0) {
            return bad("tolerances must be nonnegative".into());
        }
        match self.delta {
            DeltaPolicy::Absolute(d) | DeltaPolicy::Relative(d) if !(d >= 0.0 && d.is_finite()) => {
                return bad(format!("delta must be finite and nonnegative, got {d}"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        // the problem key decides the defaults, so read it first
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(NirbError::Config {
                    line: i + 1,
                    message: format!("expected key = value, got `{line}`"),
                });
            };
            entries.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let problem = match entries.iter().rev().find(|e| e.1 == "problem") {
            None => Problem::Heat,
            Some((line, _, v)) => match v.as_str() {
                "heat" => Problem::Heat,
                "brusselator" => Problem::Brusselator,
                other => {
                    return Err(NirbError::Config {
                        line: *line,
                        message: format!("unknown problem `{other}`"),
                    })
                }
            },
        };
        let mut cfg = Self::default_for(problem);
        for (line, key, value) in &entries {
            cfg.set(key, value).map_err(|message| NirbError::Config { line: *line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NirbError::Config {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
        let count = |v: &str| v.parse::<usize>().map_err(|_| format!("`{v}` is not a nonnegative integer"));
        match key {
            "problem" => {}
            "bounds" => {
                self.bounds = parse_list(value)?
                    .into_iter()
                    .map(|p| match p.as_slice() {
                        [lo, hi] if lo <= hi => Ok((*lo, *hi)),
                        _ => Err(format!("bound `{p:?}` must be `lo, hi` with lo <= hi")),
                    })
                    .collect::<std::result::Result<_, _>>()?
            }
            "training" => self.training = parse_list(value)?,
            "test_params" => self.test_params = parse_list(value)?,
            "fine_n" => self.fine_n = count(value)?,
            "coarse_n" => self.coarse_n = count(value)?,
            "fine_steps" => self.fine_steps = count(value)?,
            "coarse_steps" => self.coarse_steps = count(value)?,
            "t0" => self.t0 = num(value)?,
            "t_end" => self.t_end = num(value)?,
            "fine_scheme" => self.fine_scheme = self.parse_scheme(value)?,
            "coarse_scheme" => self.coarse_scheme = self.parse_scheme(value)?,
            "algorithm" => {
                self.algorithm = match value {
                    "pod_greedy" => RbAlgorithm::PodGreedy,
                    "greedy" => RbAlgorithm::Greedy,
                    _ => return Err(format!("unknown algorithm `{value}`")),
                }
            }
            "n_max" => self.n_max = count(value)?,
            "pod_tol" => self.pod_tol = num(value)?,
            "greedy_tol" => self.greedy_tol = num(value)?,
            "delta" => {
                self.delta = match value.split_once(':') {
                    Some(("relative", v)) => DeltaPolicy::Relative(num(v.trim())?),
                    Some(("absolute", v)) => DeltaPolicy::Absolute(num(v.trim())?),
                    _ => return Err(format!("delta must be `relative:<f>` or `absolute:<d>`, got `{value}`")),
                }
            }
            "h1_reorthogonalize" => {
                self.h1_reorthogonalize = value.parse().map_err(|_| format!("`{value}` is not true/false"))?
            }
            "bounds_policy" => {
                self.bounds_policy = match value {
                    "reject" => BoundsPolicy::Reject,
                    "warn" => BoundsPolicy::Warn,
                    _ => return Err(format!("bounds_policy must be reject or warn, got `{value}`")),
                }
            }
            "initial_data" => {
                self.initial_data = match value {
                    "presolve" => InitialData::Presolve,
                    "projection" => InitialData::Projection,
                    _ => return Err(format!("initial_data must be presolve or projection, got `{value}`")),
                }
            }
            "presolve_from" => self.presolve_from = num(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| format!("`{value}` is not an integer"))?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn parse_scheme(&self, v: &str) -> std::result::Result<FineScheme, String> {
        match self.problem {
            Problem::Heat => Scheme::parse(v).map(FineScheme::Heat),
            Problem::Brusselator => BrusselatorScheme::parse(v).map(FineScheme::Brusselator),
        }
        .ok_or_else(|| format!("unknown scheme `{v}` for {}", self.problem.name()))
    }

    /// Canonical text form; `parse(to_text())` reproduces the configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |ps: &[Vec<f64>]| {
            ps.iter()
                .map(|p| p.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "))
                .collect::<Vec<_>>()
                .join("; ")
        };
        let bounds: Vec<Vec<f64>> = self.bounds.iter().map(|&(a, b)| vec![a, b]).collect();
        let delta = match self.delta {
            DeltaPolicy::Relative(f) => format!("relative:{f:?}"),
            DeltaPolicy::Absolute(d) => format!("absolute:{d:?}"),
        };
        let _ = writeln!(s, "problem = {}", self.problem.name());
        let _ = writeln!(s, "bounds = {}", list(&bounds));
        let _ = writeln!(s, "training = {}", list(&self.training));
        let _ = writeln!(s, "test_params = {}", list(&self.test_params));
        let _ = writeln!(s, "fine_n = {}", self.fine_n);
        let _ = writeln!(s, "coarse_n = {}", self.coarse_n);
        let _ = writeln!(s, "fine_steps = {}", self.fine_steps);
        let _ = writeln!(s, "coarse_steps = {}", self.coarse_steps);
        let _ = writeln!(s, "t0 = {:?}", self.t0);
        let _ = writeln!(s, "t_end = {:?}", self.t_end);
        let _ = writeln!(s, "fine_scheme = {}", self.fine_scheme.name());
        let _ = writeln!(s, "coarse_scheme = {}", self.coarse_scheme.name());
        let _ = writeln!(s, "algorithm = {}", self.algorithm.name());
        let _ = writeln!(s, "n_max = {}", self.n_max);
        let _ = writeln!(s, "pod_tol = {:?}", self.pod_tol);
        let _ = writeln!(s, "greedy_tol = {:?}", self.greedy_tol);
        let _ = writeln!(s, "delta = {delta}");
        let _ = writeln!(s, "h1_reorthogonalize = {}", self.h1_reorthogonalize);
        let _ = writeln!(
            s,
            "bounds_policy = {}",
            match self.bounds_policy {
                BoundsPolicy::Reject => "reject",
                BoundsPolicy::Warn => "warn",
            }
        );
        let _ = writeln!(s, "initial_data = {}", self.initial_data.name());
        let _ = writeln!(s, "presolve_from = {:?}", self.presolve_from);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

/// `1, 2; 3, 4` -> `[[1, 2], [3, 4]]`.
fn parse_list(v: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(';')
        .map(|group| {
            group
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", x.trim())))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_text() {
        for cfg in [StudyConfig::heat_default(), StudyConfig::brusselator_default()] {
            cfg.validate().unwrap();
            assert_eq!(StudyConfig::parse(&cfg.to_text()).unwrap(), cfg);
        }
        assert_eq!(StudyConfig::heat_default().training.len(), 18);
        assert_eq!(StudyConfig::brusselator_default().training.len(), 36);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = StudyConfig::parse("# study\nfine_n = 8 # cells\ntraining = 1.5; 2\ndelta = absolute:0\n").unwrap();
        assert_eq!(cfg.fine_n, 8);
        assert_eq!(cfg.training, vec![vec![1.5], vec![2.0]]);
        assert_eq!(cfg.delta, DeltaPolicy::Absolute(0.0));
    }

    #[test]
    fn reports_bad_lines() {
        let e = StudyConfig::parse("fine_n = 8\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, NirbError::Config { line: 2, .. }));
        assert!(StudyConfig::parse("fine_n 8").is_err());
        assert!(StudyConfig::parse("training = 20").is_err());
        assert!(StudyConfig::parse("fine_scheme = rk2").is_err());
    }
}
