//! Nonlinear time integration of the perturbation equations
//! `d_t u - nu Delta u + y d_x u + (u2, 0, 0) + grad p^L + u . grad u + grad p^NL = 0`
//! in the sheared frame, plus the x-independent streak fast path.

mod checkpoint;
mod config;
mod decomposition;
mod initial;
mod snapshot;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{DtSetting, IcKind, InitialCondition, RemeshPolicy, SimConfig};
pub use decomposition::{g21_identity_residual, nonlinearity_decomposition, nonlinearity_direct, Decomposition};
pub use initial::initial_state;
pub use snapshot::{energy_identity_residual, snapshot_columns, snapshot_row};

use crate::error::{Error, Result};
use crate::linear::heat_step_in_place;
use crate::operators::{leray_project_in_place, solve_pressure_linear};
use crate::record::{RunOutcome, TrajectoryRecord};
use crate::spectral::{dealias_cutoff, DomainSpec, Grid, RemeshReport, SpectralField, TWO_PI};
use crate::state::VelocityState;

/// Hard limit on the explicit CFL number of a fixed time step.
pub const DNS_CFL_LIMIT: f64 = 1.0;
/// Time steps below this are treated as a breakdown of the run.
pub const MIN_DT: f64 = 1e-7;

/// Explicit tendency `N(u)` of the stepper and the velocity maxima seen while forming it.
#[derive(Clone, Debug)]
pub struct RhsEval {
    pub tendency: VelocityState,
    /// `max |u^i|` on the grid, per component.
    pub max_speed: [f64; 3],
}

/// Forward transforms of many real fields, two per complex FFT.
fn physical_many(grid: &Grid, fs: &[&SpectralField], plane: bool) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(fs.len());
    for pair in fs.chunks(2) {
        let b = pair.get(1).copied();
        if plane {
            let (p, q) = grid.plane_to_physical_pair(pair[0], b);
            out.push(p);
            out.extend(q);
        } else {
            let (p, q) = grid.to_physical_pair(pair[0], b);
            out.push(p.into_values());
            out.extend(q.map(|q| q.into_values()));
        }
    }
    out
}

fn spectral_many(grid: &Grid, arrays: &[Vec<f64>], plane: bool, phase: f64) -> Vec<SpectralField> {
    let mut out = Vec::with_capacity(arrays.len());
    for pair in arrays.chunks(2) {
        let b = pair.get(1).map(|v| v.as_slice());
        let (p, q) = if plane {
            grid.plane_to_spectral_pair(&pair[0], b, true)
        } else {
            grid.to_spectral_pair(&pair[0], b, true)
        };
        out.push(p.with_shear_phase(phase));
        out.extend(q.map(|q| q.with_shear_phase(phase)));
    }
    out
}

/// Dealiased `u . grad u^j` for `j = 1, 2, 3` and the component maxima of `u`.
pub fn advection(grid: &Grid, u: &VelocityState) -> ([SpectralField; 3], [f64; 3]) {
    let phase = u.shear_phase();
    let plane = u.is_x_independent();
    let axes: &[usize] = if plane { &[1, 2] } else { &[0, 1, 2] };
    let grads: Vec<SpectralField> = axes.iter().flat_map(|&ax| u.u.iter().map(move |f| f.derivative(ax))).collect();
    let mut inputs: Vec<&SpectralField> = u.u.iter().collect();
    inputs.extend(grads.iter());
    let vals = physical_many(grid, &inputs, plane);
    let n = vals[0].len();
    let mut max_speed = [0.0f64; 3];
    for i in 0..3 {
        max_speed[i] = vals[i].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    }
    let mut prods = vec![vec![0.0; n]; 3];
    for (a, &ax) in axes.iter().enumerate() {
        let vel = &vals[ax];
        for j in 0..3 {
            let g = &vals[3 + 3 * a + j];
            for ((p, v), d) in prods[j].iter_mut().zip(vel).zip(g) {
                *p += v * d;
            }
        }
    }
    let mut out = spectral_many(grid, &prods, plane, phase).into_iter();
    ([out.next().unwrap(), out.next().unwrap(), out.next().unwrap()], max_speed)
}

/// Explicit tendency `-(u2, 0, 0) - grad p^L - P(u . grad u)`, where `P` is the
/// Leray projector. Diffusion and `y d_x` are left to the stepper. Because the
/// shear tilts the wavevectors, `div N = d_x u2`, which cancels `div(y d_x u)`.
pub fn rhs_eval(grid: &Grid, u: &VelocityState, nonlinear: bool) -> RhsEval {
    let phase = u.shear_phase();
    let (mut t, max_speed) = if nonlinear {
        let (adv, m) = advection(grid, u);
        let mut t = VelocityState { u: adv, time: u.time };
        leray_project_in_place(&mut t);
        t.scale(-1.0);
        (t, m)
    } else {
        let z = grid.zeros().with_shear_phase(phase);
        (VelocityState { u: [z.clone(), z.clone(), z], time: u.time }, [0.0; 3])
    };
    t.u[0].axpy(-1.0, &u.u[1]);
    let pl = solve_pressure_linear(&u.u[1]);
    for (ax, comp) in t.u.iter_mut().enumerate() {
        comp.axpy(-1.0, &pl.derivative(ax));
    }
    RhsEval { tendency: t, max_speed }
}

/// The explicit part of the right-hand side; see [`rhs_eval`].
pub fn rhs_perturbation(grid: &Grid, u: &VelocityState) -> VelocityState {
    rhs_eval(grid, u, true).tendency
}

/// Full time derivative `nu Delta_L u + N(u)` restricted to `k = 0`
/// (the shear term vanishes there).
pub fn zero_mode_tendency(grid: &Grid, u: &VelocityState, n: &VelocityState) -> VelocityState {
    let mut out = n.zero_mode();
    for (o, f) in out.u.iter_mut().zip(&u.u) {
        o.axpy(grid.nu(), &f.zero_mode().laplacian());
    }
    out
}

/// Explicit stability rate: advection at the dealiasing cutoffs, with the
/// sheared y-wavenumber, plus the unit-rate linear coupling.
pub fn explicit_rate(grid: &Grid, u: &VelocityState, max_speed: [f64; 3]) -> f64 {
    let d = grid.dims();
    let plane = u.is_x_independent();
    let kx = if plane { 0.0 } else { dealias_cutoff(d.nx) as f64 };
    let ky = dealias_cutoff(d.ny) as f64 / grid.ly() + u.shear_phase().abs() * kx;
    let kz = dealias_cutoff(d.nz) as f64;
    let coupling = if plane { 1.0 } else { 3.0 };
    TWO_PI * (max_speed[0] * kx + max_speed[1] * ky + max_speed[2] * kz) + coupling
}

/// Diagnostics of one step.
#[derive(Clone, Debug)]
pub struct StepInfo {
    pub dt: f64,
    pub cfl: f64,
    pub remesh: Option<RemeshReport>,
    pub projection_defect: f64,
}

/// One integrating-factor Heun step of size `dt` from `u`, given `na = N(u)`:
/// `u* = E(u + dt N(u))`, `u' = E(u + dt/2 N(u)) + dt/2 N(u*)`, where `E` is
/// the exact sheared heat flow over the step. The result is Leray-projected at
/// the new phase and remeshed per `policy`.
pub fn step_with(
    grid: &Grid,
    u: &VelocityState,
    na: &RhsEval,
    dt: f64,
    nonlinear: bool,
    policy: RemeshPolicy,
) -> Result<(VelocityState, StepInfo)> {
    let nu = grid.nu();
    let (t0, t1) = (u.time, u.time + dt);
    let heat = |s: &mut VelocityState| {
        for f in s.u.iter_mut() {
            heat_step_in_place(f, nu, t0, t1);
        }
        s.time = t1;
    };
    let mut pred = u.clone();
    pred.axpy(dt, &na.tendency);
    heat(&mut pred);
    let nb = rhs_eval(grid, &pred, nonlinear);
    let mut next = u.clone();
    next.axpy(0.5 * dt, &na.tendency);
    heat(&mut next);
    next.axpy(0.5 * dt, &nb.tendency);
    let before = next.norm_sq();
    leray_project_in_place(&mut next);
    let projection_defect = if before > 0.0 { ((before - next.norm_sq()).abs() / before).sqrt() } else { 0.0 };
    let mut remesh = None;
    if policy == RemeshPolicy::Auto && next.shear_phase().abs() >= grid.spec().remesh_threshold() {
        let mut dropped = 0.0;
        let mut rep = RemeshReport::default();
        for f in next.u.iter_mut() {
            let (g, r) = grid.remesh(f);
            dropped += r.dropped_energy;
            rep = r;
            *f = g;
        }
        rep.dropped_energy = dropped;
        remesh = Some(rep);
    }
    if !next.is_finite() {
        return Err(Error::Numerical(format!("non-finite state at t = {t1}")));
    }
    let cfl = dt * explicit_rate(grid, u, na.max_speed);
    Ok((next, StepInfo { dt, cfl, remesh, projection_defect }))
}

/// One step from `u` with a fixed `dt`; fails on a CFL violation.
pub fn step(grid: &Grid, u: &VelocityState, dt: f64, nonlinear: bool, policy: RemeshPolicy) -> Result<(VelocityState, StepInfo)> {
    let na = rhs_eval(grid, u, nonlinear);
    let rate = explicit_rate(grid, u, na.max_speed);
    if dt * rate > DNS_CFL_LIMIT {
        return Err(Error::Cfl { cfl: dt * rate, suggested_dt: 0.4 / rate });
    }
    step_with(grid, u, &na, dt, nonlinear, policy)
}

/// Result of a simulation.
#[derive(Clone, Debug)]
pub struct SimResult {
    pub record: TrajectoryRecord,
    pub final_state: VelocityState,
    pub steps: usize,
    pub total_dropped_energy: f64,
}

fn h2_sq(u: &VelocityState) -> f64 {
    let r: Vec<&SpectralField> = u.u.iter().collect();
    crate::norms::quantities_sq(&r, &[crate::norms::Quantity::H(2)])[0]
}

/// Integrates `cfg` from its initial condition; see [`simulate_state`].
pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let grid = Grid::new(cfg.domain)?;
    let u0 = initial_state(&grid, &cfg.initial_condition, cfg.time.t_start)?;
    simulate_state(&grid, u0, cfg)
}

/// Streak fast path: the initial condition must be x-independent and the run
/// uses a single x-plane, evolving the 2D Navier–Stokes system for `(u2, u3)`
/// and the forced advection–diffusion equation for `ubar1`.
pub fn streak_simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let d = cfg.domain;
    let spec = DomainSpec::streak(d.ny, d.nz, d.ly, d.nu)?;
    let grid = Grid::new(spec)?;
    let u0 = initial_state(&grid, &cfg.initial_condition, cfg.time.t_start)?;
    let mut c = cfg.clone();
    c.domain = spec;
    simulate_state(&grid, u0, &c)
}

/// Integrates from `u0` (at `u0.time`) to `cfg.time.t_end`, recording a
/// snapshot at `u0.time` and then at `t_start + k record_every`. Blow-up (non-finite
/// values, or `||u||_{H^2}` past `blowup_factor` times its initial value) ends
/// the run with [`RunOutcome::Diverged`] instead of an error.
pub fn simulate_state(grid: &Grid, u0: VelocityState, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    if u0.u[0].dims() != grid.dims() {
        return Err(Error::DimensionMismatch { expected: grid.dims().tuple(), got: u0.u[0].dims().tuple() });
    }
    let nu = grid.nu();
    let t_end = cfg.time.t_end;
    let every = cfg.record_interval();
    let nonlinear = cfg.run.nonlinear;
    let mut rec = TrajectoryRecord::new(nu, snapshot_columns());
    let h2_0 = h2_sq(&u0).sqrt();
    let limit = cfg.run.blowup_factor * h2_0;
    let mut u = u0;
    // snapshot grid anchored at t_start, so a resumed run takes the same steps
    let t_first = cfg.time.t_start.min(u.time);
    let mut k_rec: u64 = ((u.time - t_first) / every).ceil().max(0.0) as u64;
    let mut first = true;
    let mut dropped_since = 0.0;
    let mut total_dropped = 0.0;
    let mut steps = 0usize;
    let diverge = |rec: &mut TrajectoryRecord, t: f64| {
        rec.outcome = RunOutcome::Diverged;
        rec.diverged_at = Some(t);
    };
    loop {
        let na = rhs_eval(grid, &u, nonlinear);
        let next_record = t_first + every * k_rec as f64;
        let at_record = (u.time - next_record).abs() <= 1e-9 * every.max(1.0);
        if at_record || first || u.time >= t_end - 1e-12 {
            first = false;
            let row = snapshot_row(grid, &u, &na.tendency, dropped_since);
            rec.push(u.time, row)?;
            dropped_since = 0.0;
            if at_record {
                k_rec += 1;
            }
        }
        if u.time >= t_end - 1e-12 {
            break;
        }
        let h2 = h2_sq(&u).sqrt();
        if !h2.is_finite() || (h2_0 > 0.0 && h2 > limit) {
            diverge(&mut rec, u.time);
            break;
        }
        let rate = explicit_rate(grid, &u, na.max_speed);
        let mut dt = match cfg.time.dt {
            DtSetting::Fixed(dt) => {
                if dt * rate > DNS_CFL_LIMIT {
                    return Err(Error::Cfl { cfl: dt * rate, suggested_dt: cfg.time.cfl / rate });
                }
                dt
            }
            DtSetting::Auto => (cfg.time.cfl / rate).min(cfg.time.dt_max),
        };
        let target = (t_first + every * k_rec as f64).min(t_end);
        if u.time + dt >= target - 1e-12 {
            dt = target - u.time;
        } else if u.time + 1.5 * dt > target {
            // split the remainder evenly instead of leaving a sliver
            dt = 0.5 * (target - u.time);
        }
        if dt < MIN_DT && target - u.time > MIN_DT {
            diverge(&mut rec, u.time);
            break;
        }
        match step_with(grid, &u, &na, dt, nonlinear, cfg.remesh.policy) {
            Ok((mut next, info)) => {
                if let Some(r) = info.remesh {
                    dropped_since += r.dropped_energy;
                    total_dropped += r.dropped_energy;
                }
                if (next.time - target).abs() < 1e-9 {
                    next.time = target;
                }
                u = next;
                steps += 1;
            }
            Err(Error::Numerical(_)) => {
                diverge(&mut rec, u.time);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SimResult { record: rec, final_state: u, steps, total_dropped_energy: total_dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{evolve_mode_exact, ModeProblem, Source};
    use crate::operators::leray_project;
    use crate::random::random_state;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn grid(n: usize, nu: f64) -> Grid {
        Grid::new(DomainSpec::new(n, n, n, 4.0, nu).unwrap()).unwrap()
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let g = grid(8, 0.01);
        let r = rhs_perturbation(&g, &VelocityState::zeros(&g, 1.0));
        assert_eq!(r.norm_sq(), 0.0);
    }

    #[test]
    fn rhs_divergence_balances_shear_term() {
        let g = grid(12, 0.01);
        for seed in 0..5 {
            let mut u = leray_project(&random_state(&g, seed, 3, true));
            u.set_shear_phase(0.07 * seed as f64);
            let u = leray_project(&u);
            let n = rhs_perturbation(&g, &u);
            let mut div = n.divergence();
            div.axpy(-1.0, &u.u[1].derivative(0));
            let scale = n.u.iter().map(|f| f.derivative(0).norm()).sum::<f64>();
            assert!(div.norm() <= 1e-10 * scale, "{}", div.norm() / scale);
        }
    }

    #[test]
    fn x_independent_rhs_stays_x_independent() {
        let g = grid(12, 0.01);
        let u = random_state(&g, 3, 3, true).zero_mode();
        let u = leray_project(&u);
        let n = rhs_perturbation(&g, &u);
        assert!(n.is_x_independent());
        // 2D incompressibility of the (u2, u3) tendency
        assert!(n.divergence().norm() < 1e-12 * n.norm_sq().sqrt().max(1e-300));
    }

    #[test]
    fn linear_mode_without_wall_normal_velocity_is_pure_heat_flow() {
        let g = grid(8, 0.02);
        // u = (c, 0, -c) e^{2 pi i (x + z)} is divergence-free with u2 = 0
        let mut u = VelocityState::zeros(&g, 1.0);
        let c = Complex64::new(0.3, -0.1);
        u.u[0].set_real_pair(1, 0, 1, c);
        u.u[2].set_real_pair(1, 0, 1, -c);
        let mut s = u.clone();
        let dt = 0.01;
        for _ in 0..100 {
            s = step(&g, &s, dt, false, RemeshPolicy::Never).unwrap().0;
        }
        let p = ModeProblem {
            k: 1,
            l: 1,
            eta: 1.0,
            nu: 0.02,
            a: 0.0,
            f1: Source::zero(),
            f2: Source::zero(),
            f3: Source::zero(),
            f_init: c,
            t_end: 2.0,
        };
        let exact = evolve_mode_exact(&p, &[2.0]).unwrap()[0];
        assert!((s.u[0].get(1, 0, 1) - exact).norm() < 1e-10 * c.norm());
        assert!((s.u[2].get(1, 0, 1) + exact).norm() < 1e-10 * c.norm());
        assert!(s.u[1].norm() < 1e-14);
    }

    #[test]
    fn linear_orr_mode_matches_rk4() {
        // u2 mode with pressure feedback: dc2/dt = (-nu |K|^2 + 2 kx K_y / |K|^2) c2
        let nu = 0.01;
        let g = grid(8, nu);
        let mut u = VelocityState::zeros(&g, 1.0);
        let c2 = Complex64::new(0.2, 0.05);
        // k = (1, m = -4, 0): K_y starts at -2 pi
        u.u[1].set_real_pair(1, -4, 0, c2);
        u.u[0].set_real_pair(1, -4, 0, c2);
        let u = leray_project(&u);
        let c0 = u.u[1].get(1, -4, 0);
        let mut s = u.clone();
        for _ in 0..400 {
            s = step(&g, &s, 0.0025, false, RemeshPolicy::Never).unwrap().0;
        }
        let rate = |t: f64| {
            let kx = TWO_PI;
            let ky = TWO_PI * (-1.0 - (t - 1.0));
            let k2 = kx * kx + ky * ky;
            -nu * k2 + 2.0 * kx * ky / k2
        };
        let (mut y, mut t, h) = (c0, 1.0, 1e-4);
        for _ in 0..10000 {
            let k1 = rate(t) * y;
            let k2 = rate(t + 0.5 * h) * (y + k1 * (0.5 * h));
            let k3 = rate(t + 0.5 * h) * (y + k2 * (0.5 * h));
            let k4 = rate(t + h) * (y + k3 * h);
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            t += h;
        }
        let got = s.u[1].get(1, -4, 0);
        assert!((got - y).norm() < 1e-5 * c0.norm(), "{got} vs {y}");
    }

    #[test]
    fn divergence_free_is_maintained_with_remeshing() {
        let g = grid(12, 0.01);
        let u = leray_project(&random_state(&g, 4, 2, true));
        let mut u = VelocityState { time: 1.0, ..u };
        u.scale(0.05);
        let mut remeshed = false;
        for _ in 0..40 {
            let (n, info) = step(&g, &u, 0.01, true, RemeshPolicy::Auto).unwrap();
            remeshed |= info.remesh.is_some();
            u = n;
            assert!(u.divergence_defect() < 1e-10);
        }
        assert!(remeshed);
    }

    #[test]
    fn diffusion_dominated_decay() {
        let g = grid(8, 0.5);
        let mut u = leray_project(&random_state(&g, 1, 2, true));
        u.scale(1e-3);
        let mut prev = u.norm_sq();
        for _ in 0..20 {
            u = step(&g, &u, 0.01, true, RemeshPolicy::Auto).unwrap().0;
            let n = u.norm_sq();
            assert!(n < prev);
            prev = n;
        }
    }

    #[test]
    fn taylor_green_streak_is_exact() {
        let nu = 0.01;
        let g = Grid::new(DomainSpec::streak(32, 32, 4.0, nu).unwrap()).unwrap();
        let ic = InitialCondition { kind: IcKind::TaylorGreen, amplitude: 1.0, seed: 0, band: 2 };
        let mut u = initial_state(&g, &ic, 1.0).unwrap();
        for _ in 0..250 {
            u = step(&g, &u, 0.004, true, RemeshPolicy::Auto).unwrap().0;
        }
        let decay = (-8.0 * PI * PI * nu * 1.0).exp();
        let mut err: f64 = 0.0;
        for (y, z) in [(0.1, 0.3), (-1.3, 0.77), (0.5, 0.5)] {
            let a = u.u[1].evaluate_at(0.0, y, z) - decay * (TWO_PI * y).sin() * (TWO_PI * z).cos();
            let b = u.u[2].evaluate_at(0.0, y, z) + decay * (TWO_PI * y).cos() * (TWO_PI * z).sin();
            err = err.max(a.abs()).max(b.abs());
        }
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn cfl_violation_reported() {
        let g = grid(8, 0.01);
        let mut u = leray_project(&random_state(&g, 2, 2, true));
        u.scale(100.0);
        match step(&g, &u, 0.5, true, RemeshPolicy::Auto) {
            Err(Error::Cfl { suggested_dt, .. }) => assert!(suggested_dt < 0.5),
            other => panic!("expected CFL error, got {:?}", other.map(|x| x.1)),
        }
    }
}
