use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nirb_core::io::csv::{error_table, loo_table, param_error_table, study_table, trajectory_table};
use nirb_core::io::{load_artifacts, load_snapshots, save_artifacts, save_snapshots, snapshots_path, StudyConfig};
use nirb_core::pipeline::{
    compute_snapshots, convergence_study, evaluate_parameter, leave_one_out, online, study_levels, Coupling,
    Discretization, Mode,
};
use nirb_core::{NirbError, Result};

/// Two-grid non-intrusive reduced basis solver.
#[derive(Parser)]
#[command(name = "nirb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fine and coarse training solves, reduced bases and rectification.
    Offline { config: PathBuf },
    /// Coarse solve at one parameter followed by the NIRB reconstruction.
    Online(OnlineArgs),
    /// Coarse, plain and rectified errors at every `test_params` entry.
    Errors { config: PathBuf },
    /// Leave-one-out over the training set.
    Loo { config: PathBuf },
    /// Three-level convergence study of the heat problem at mu = 1.
    Study {
        config: PathBuf,
        #[arg(long, value_parser = parse_coupling)]
        coupling: Coupling,
    },
}

#[derive(Args)]
struct OnlineArgs {
    config: PathBuf,
    /// Parameter components, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    mu: Vec<f64>,
    #[arg(long, conflicts_with = "rectified")]
    plain: bool,
    /// Default.
    #[arg(long)]
    rectified: bool,
}

fn parse_coupling(s: &str) -> std::result::Result<Coupling, String> {
    Coupling::parse(s).ok_or_else(|| format!("unknown coupling `{s}` (use 2h or sqrt)"))
}

fn load_config(path: &Path) -> Result<StudyConfig> {
    let cfg = StudyConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run_offline(path: &Path) -> Result<()> {
    let cfg = load_config(path)?;
    let (art, snaps) = nirb_core::pipeline::offline(&cfg)?;
    let a = save_artifacts(&cfg.output_dir, &art)?;
    let s = save_snapshots(&cfg.output_dir, &snaps)?;
    for (c, m) in art.components.iter().enumerate() {
        println!("component {c}: {} modes", m.basis.len());
    }
    println!("wrote {}", a.display());
    println!("wrote {}", s.display());
    Ok(())
}

fn run_online(args: &OnlineArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let art = load_artifacts(&cfg.output_dir)?;
    art.check_matches(&cfg)?;
    let dim = cfg.problem.param_dim();
    if args.mu.len() != dim {
        return Err(NirbError::InvalidArgument(format!("--mu needs {dim} components, got {}", args.mu.len())));
    }
    let (mode, tag) = if args.plain { (Mode::Plain, "plain") } else { (Mode::Rectified, "rectified") };
    let disc = art.discretization()?;
    let out = online(&art, &disc, &args.mu, mode)?;
    let scored = evaluate_parameter(&art, &disc, &args.mu)?;
    let report = if args.plain { &scored.plain } else { &scored.rectified };

    let traj = cfg.output_dir.join(format!("online_{tag}.csv"));
    let errs = cfg.output_dir.join(format!("online_{tag}_errors.csv"));
    trajectory_table(&out.fields).write(&traj)?;
    let times: Vec<f64> = (0..disc.fine_grid.len()).map(|n| disc.fine_grid.time(n)).collect();
    error_table(report, &times).write(&errs)?;
    println!(
        "{tag} NIRB at {:?}: h1 {:.6e}, l2 {:.6e} (coarse h1 {:.6e}, reference {})",
        args.mu, report.h1, report.l2, scored.coarse.h1, scored.reference
    );
    println!("coarse solve {:.3} s, reconstruction {:.3} s", out.coarse_seconds, out.reconstruct_seconds);
    println!("wrote {}", traj.display());
    println!("wrote {}", errs.display());
    Ok(())
}

fn run_errors(path: &Path) -> Result<()> {
    let cfg = load_config(path)?;
    let art = load_artifacts(&cfg.output_dir)?;
    art.check_matches(&cfg)?;
    if cfg.test_params.is_empty() {
        return Err(NirbError::InvalidArgument("config lists no test_params".into()));
    }
    let disc = art.discretization()?;
    let rows = cfg
        .test_params
        .iter()
        .map(|p| evaluate_parameter(&art, &disc, p))
        .collect::<Result<Vec<_>>>()?;
    for r in &rows {
        println!(
            "{:?}: coarse {:.6e}, plain {:.6e}, rectified {:.6e} (h1, reference {})",
            r.param, r.coarse.h1, r.plain.h1, r.rectified.h1, r.reference
        );
    }
    let out = cfg.output_dir.join("errors.csv");
    param_error_table(&rows).write(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run_loo(path: &Path) -> Result<()> {
    let cfg = load_config(path)?;
    let disc = Discretization::new(&cfg)?;
    let compatible = snapshots_path(&cfg.output_dir).exists()
        && load_artifacts(&cfg.output_dir).and_then(|a| a.check_matches(&cfg)).is_ok();
    let stored = if compatible { Some(load_snapshots(&cfg.output_dir)?) } else { None };
    let snaps = match stored.filter(|s| s.params == cfg.training) {
        Some(s) => s,
        None => compute_snapshots(&cfg, &disc, &cfg.training)?,
    };
    let report = leave_one_out(&cfg, &disc, &snaps)?;
    println!(
        "max h1: rectified {:.6e}, plain {:.6e}, projection {:.6e}, coarse {:.6e}",
        report.max_rectified(),
        report.max_plain(),
        report.max_projection(),
        report.max_coarse()
    );
    let out = cfg.output_dir.join("loo.csv");
    loo_table(&report).write(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run_study(path: &Path, coupling: Coupling) -> Result<()> {
    let cfg = load_config(path)?;
    let report = convergence_study(&cfg, &study_levels(coupling))?;
    let s = &report.slopes;
    println!("h1 slopes: fine {:.3}, coarse {:.3}, plain {:.3}, rectified {:.3}", s[0], s[1], s[2], s[3]);
    println!("l2 slopes: fine {:.3}, coarse {:.3}, plain {:.3}, rectified {:.3}", s[4], s[5], s[6], s[7]);
    let name = match coupling {
        Coupling::TwoH => "study_2h.csv",
        Coupling::Sqrt => "study_sqrt.csv",
    };
    let out = cfg.output_dir.join(name);
    study_table(&report).write(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("NIRB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| NirbError::InvalidArgument(format!("NIRB_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| NirbError::InvalidArgument(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Offline { config } => run_offline(config),
        Command::Online(args) => run_online(args),
        Command::Errors { config } => run_errors(config),
        Command::Loo { config } => run_loo(config),
        Command::Study { config, coupling } => run_study(config, *coupling),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
