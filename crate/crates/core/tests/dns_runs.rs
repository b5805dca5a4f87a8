use couette_core::dns::{
    energy_identity_residual, initial_state, simulate, simulate_state, streak_simulate, Checkpoint, DtSetting, IcKind,
    InitialCondition, SimConfig,
};
use couette_core::record::RunOutcome;
use couette_core::{DomainSpec, Grid, VelocityState};

fn ic(kind: IcKind, amplitude: f64) -> InitialCondition {
    InitialCondition { kind, amplitude, seed: 5, band: 2 }
}

#[test]
fn energy_identity_converges_at_second_order() {
    let spec = DomainSpec::cube(8, 0.05).unwrap();
    let grid = Grid::new(spec).unwrap();
    let mut res = Vec::new();
    for dt in [0.02, 0.01, 0.005] {
        let mut cfg = SimConfig::new(spec, 1.4, ic(IcKind::Random, 0.05));
        cfg.time.dt = DtSetting::Fixed(dt);
        cfg.time.record_every = Some(dt);
        let u0 = initial_state(&grid, &cfg.initial_condition, 1.0).unwrap();
        let run = simulate_state(&grid, u0, &cfg).unwrap();
        res.push(energy_identity_residual(&run.record).unwrap());
    }
    for w in res.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "residuals {res:?}");
    }
}

#[test]
fn streak_path_matches_full_grid_on_x_independent_data() {
    let spec3 = DomainSpec::new(8, 16, 16, 4.0, 0.02).unwrap();
    let g3 = Grid::new(spec3).unwrap();
    let mut cfg = SimConfig::new(spec3, 2.0, ic(IcKind::Random, 0.3));
    cfg.time.record_every = Some(0.25);
    let streak = streak_simulate(&cfg).unwrap();
    let plane = initial_state(&Grid::new(DomainSpec::streak(16, 16, 4.0, 0.02).unwrap()).unwrap(), &cfg.initial_condition, 1.0)
        .unwrap();
    let mut u = VelocityState::zeros(&g3, 1.0);
    for (dst, src) in u.u.iter_mut().zip(&plane.u) {
        let n = src.coeffs().len();
        dst.coeffs_mut()[..n].copy_from_slice(src.coeffs());
    }
    let full = simulate_state(&g3, u, &cfg).unwrap();
    assert!(full.final_state.is_x_independent());
    let n = 16 * 16;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, b) in full.final_state.u.iter().zip(&streak.final_state.u) {
        for (x, y) in a.coeffs()[..n].iter().zip(b.coeffs()) {
            err = err.max((x - y).norm());
            scale = scale.max(y.norm());
        }
    }
    assert!(err <= 1e-10 * scale, "{err} vs {scale}");
    assert_eq!(full.record.times, streak.record.times);
}

#[test]
fn resume_from_checkpoint_is_bitwise_deterministic() {
    let spec = DomainSpec::cube(8, 0.02).unwrap();
    let grid = Grid::new(spec).unwrap();
    let mut cfg = SimConfig::new(spec, 2.0, ic(IcKind::ObliqueStreak, 0.05));
    cfg.time.record_every = Some(0.25);
    let whole = simulate(&cfg).unwrap();

    let mut first = cfg.clone();
    first.time.t_end = 1.5;
    let part = simulate(&first).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.chk");
    Checkpoint { domain: spec, state: part.final_state.clone() }.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let mut second = cfg.clone();
    second.time.t_start = back.state.time;
    let rest = simulate_state(&grid, back.state, &second).unwrap();

    for (a, b) in rest.final_state.u.iter().zip(&whole.final_state.u) {
        assert_eq!(a.coeffs(), b.coeffs());
    }
    assert_eq!(rest.final_state.time, whole.final_state.time);
}

#[test]
fn growth_past_blowup_factor_is_classified_as_diverged() {
    // lift-up of the rolls grows the streak well past 1.5x the initial H2 norm
    let spec = DomainSpec::cube(8, 0.001).unwrap();
    let mut cfg = SimConfig::new(spec, 10.0, ic(IcKind::ObliqueStreak, 1.0));
    cfg.run.blowup_factor = 1.5;
    let run = simulate(&cfg).unwrap();
    assert_eq!(run.record.outcome, RunOutcome::Diverged);
    assert!(run.record.diverged_at.is_some());
}

#[test]
fn small_data_completes_and_decays() {
    let spec = DomainSpec::cube(8, 0.05).unwrap();
    let cfg = SimConfig::new(spec, 6.0, ic(IcKind::Random, 1e-4));
    let run = simulate(&cfg).unwrap();
    assert_eq!(run.record.outcome, RunOutcome::Completed);
    let e = run.record.series("unz.l2").unwrap();
    assert!(e.last().unwrap() < &e[0]);
    assert!((run.record.times.last().unwrap() - 6.0).abs() < 1e-12);
    let div = run.record.series("divergence_defect").unwrap();
    assert!(div.iter().all(|d| *d < 1e-10));
}
