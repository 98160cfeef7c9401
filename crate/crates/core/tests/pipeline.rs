use nirb_core::io::{BoundsPolicy, RbAlgorithm, StudyConfig};
use nirb_core::pipeline::{
    compute_snapshots, convergence_study, evaluate_errors, evaluate_parameter, leave_one_out, offline,
    offline_from_snapshots, online, reconstruct, study_levels, Coupling, Discretization, Mode, Reference,
};

fn small_heat() -> StudyConfig {
    let mut cfg = StudyConfig::heat_default();
    cfg.fine_n = 8;
    cfg.coarse_n = 4;
    cfg.fine_steps = 8;
    cfg.coarse_steps = 4;
    cfg.training = vec![vec![0.5], vec![1.5], vec![3.0], vec![6.0], vec![9.5]];
    cfg
}

fn small_brusselator() -> StudyConfig {
    let mut cfg = StudyConfig::brusselator_default();
    cfg.fine_n = 8;
    cfg.coarse_n = 4;
    cfg.fine_steps = 20;
    cfg.coarse_steps = 40;
    cfg.t_end = 1.0;
    cfg.training = vec![vec![2.0, 1.0, 0.01], vec![2.5, 3.0, 0.005], vec![4.0, 4.0, 0.05], vec![2.0, 4.0, 0.001]];
    cfg.test_params = vec![vec![3.0, 2.0, 0.008]];
    cfg.n_max = 6;
    cfg
}

#[test]
fn rectified_beats_plain_at_training_parameters() {
    let cfg = small_heat();
    let (art, snaps) = offline(&cfg).unwrap();
    let disc = art.discretization().unwrap();
    for k in 0..snaps.params.len() {
        let truth = Reference::Trajectory(&snaps.fine[k]);
        let rect = reconstruct(&art, &disc, &snaps.coarse[k], Mode::Rectified).unwrap();
        let plain = reconstruct(&art, &disc, &snaps.coarse[k], Mode::Plain).unwrap();
        let er = evaluate_errors(&rect, truth, &disc.fine).unwrap().h1;
        let ep = evaluate_errors(&plain, truth, &disc.fine).unwrap().h1;
        assert!(er <= ep, "param {:?}: rectified {er} plain {ep}", snaps.params[k]);
    }
}

#[test]
fn bounds_policy_controls_out_of_range_parameters() {
    let mut cfg = small_heat();
    let (mut art, _) = offline(&cfg).unwrap();
    let disc = art.discretization().unwrap();
    let e = online(&art, &disc, &[12.0], Mode::Rectified).unwrap_err();
    assert_eq!(e.kind(), "out_of_bounds");
    cfg.bounds_policy = BoundsPolicy::Warn;
    art.config = cfg;
    assert!(online(&art, &disc, &[12.0], Mode::Rectified).is_ok());
}

#[test]
fn errors_use_the_exact_solution_only_at_unit_diffusivity() {
    let cfg = small_heat();
    let (art, _) = offline(&cfg).unwrap();
    let disc = art.discretization().unwrap();
    let at_one = evaluate_parameter(&art, &disc, &[1.0]).unwrap();
    assert_eq!(at_one.reference, "analytic");
    assert!(at_one.rectified.h1 < at_one.coarse.h1);
    let other = evaluate_parameter(&art, &disc, &[4.0]).unwrap();
    assert_eq!(other.reference, "fine");
    assert!(other.rectified.h1 < other.coarse.h1);
}

#[test]
fn mismatched_discretization_is_reported() {
    let cfg = small_heat();
    let (art, _) = offline(&cfg).unwrap();
    let other = StudyConfig { fine_n: 16, ..cfg };
    assert_eq!(art.check_matches(&other).unwrap_err().kind(), "inconsistent_artifacts");
}

#[test]
fn greedy_algorithm_runs_end_to_end() {
    let mut cfg = small_heat();
    cfg.algorithm = RbAlgorithm::Greedy;
    cfg.n_max = 4;
    let (art, _) = offline(&cfg).unwrap();
    let basis = &art.components[0].basis;
    assert!(!basis.is_empty() && basis.len() <= 4);
    assert_eq!(basis.provenance.algorithm, "greedy");
    assert!(basis.provenance.selected.iter().all(|(_, t)| t.is_some()));
}

#[test]
fn leave_one_out_reports_every_parameter() {
    let cfg = small_heat();
    let disc = Discretization::new(&cfg).unwrap();
    let snaps = compute_snapshots(&cfg, &disc, &cfg.training).unwrap();
    let loo = leave_one_out(&cfg, &disc, &snaps).unwrap();
    assert_eq!(loo.rows.len(), cfg.training.len());
    assert!(loo.max_projection() < 1e-5);
    assert!(loo.max_rectified() < loo.max_coarse());
    let one = StudyConfig { training: vec![vec![1.5]], ..cfg.clone() };
    let snaps1 = compute_snapshots(&one, &disc, &one.training).unwrap();
    assert_eq!(leave_one_out(&one, &disc, &snaps1).unwrap_err().kind(), "invalid_argument");
}

#[test]
fn convergence_study_needs_heat() {
    let cfg = small_brusselator();
    let e = convergence_study(&cfg, &study_levels(Coupling::TwoH)).unwrap_err();
    assert_eq!(e.kind(), "invalid_argument");
}

#[test]
fn brusselator_has_one_model_per_species() {
    let cfg = small_brusselator();
    let disc = Discretization::new(&cfg).unwrap();
    let snaps = compute_snapshots(&cfg, &disc, &cfg.training).unwrap();
    let all: Vec<usize> = (0..snaps.params.len()).collect();
    let art = offline_from_snapshots(&cfg, &disc, &snaps, &all).unwrap();
    assert_eq!(art.components.len(), 2);
    for m in &art.components {
        assert!(m.basis.len() <= cfg.n_max);
        assert!(m.basis.orthonormality_defect(&disc.fine) < 1e-8);
    }
    let scored = evaluate_parameter(&art, &disc, &cfg.test_params[0]).unwrap();
    assert!(scored.rectified.h1.is_finite());
    assert!(scored.rectified.h1 < scored.coarse.h1, "{scored:?}");
}
