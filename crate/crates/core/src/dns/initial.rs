use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::norms::sobolev_norm_vec;
use crate::operators::leray_project;
use crate::random::{random_state, rng_for};
use crate::spectral::Grid;
use crate::state::VelocityState;

use super::config::{IcKind, InitialCondition};

fn h2(u: &VelocityState) -> f64 {
    sobolev_norm_vec(&[&u.u[0], &u.u[1], &u.u[2]], 2.0)
}

fn normalise(mut u: VelocityState, amplitude: f64) -> VelocityState {
    let n = h2(&u);
    if n > 0.0 {
        u.scale(amplitude / n);
    }
    u
}

/// Initial state at time `t0` (shear phase 0) for the configured family.
pub fn initial_state(grid: &Grid, ic: &InitialCondition, t0: f64) -> Result<VelocityState> {
    let d = grid.dims();
    let mut u = match ic.kind {
        IcKind::Zero => VelocityState::zeros(grid, t0),
        IcKind::Random => {
            let (cx, cy, cz) = grid.cutoffs();
            let lim = if d.nx == 1 { cy.min(cz) } else { cx.min(cy).min(cz) };
            if ic.band > lim {
                return Err(Error::InvalidInput(format!("band {} exceeds the dealiased range {lim}", ic.band)));
            }
            normalise(random_state(grid, ic.seed, ic.band, true), ic.amplitude)
        }
        IcKind::ObliqueStreak => {
            // rolls from the streamfunction cos(2 pi (y / Ly + z)), plus waves on (1, 0, +-1)
            let mut roll = VelocityState::zeros(grid, t0);
            let psi = Complex64::new(0.5, 0.0);
            let (ky, kz) = (std::f64::consts::TAU / grid.ly(), std::f64::consts::TAU);
            roll.u[1].set_real_pair(0, 1, 1, Complex64::i() * kz * psi);
            roll.u[2].set_real_pair(0, 1, 1, -Complex64::i() * ky * psi);
            let roll = normalise(roll, 1.0);
            if d.nx == 1 {
                normalise(roll, ic.amplitude)
            } else {
                let mut rng = rng_for(ic.seed, 2);
                let mut waves = VelocityState::zeros(grid, t0);
                for l in [-1i64, 1] {
                    for comp in waves.u.iter_mut() {
                        let c = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
                        comp.set_real_pair(1, 0, l, c);
                    }
                }
                let waves = normalise(leray_project(&waves), 1.0);
                let mut u = roll;
                u.axpy(1.0, &waves);
                normalise(u, ic.amplitude)
            }
        }
        IcKind::TaylorGreen => {
            let m = grid.ly().round();
            if (grid.ly() - m).abs() > 1e-12 || m < 1.0 {
                return Err(Error::InvalidInput("Taylor–Green data needs an integer Ly".into()));
            }
            let m = m as i64;
            if m > grid.dims().ny as i64 / 2 - 1 || grid.dims().nz < 4 {
                return Err(Error::InvalidInput("grid too coarse for Taylor–Green data".into()));
            }
            // sin(a)cos(b) = (sin(a+b) + sin(a-b)) / 2, one real pair per sign of l
            let a = ic.amplitude;
            let mut u = VelocityState::zeros(grid, t0);
            let q = Complex64::new(0.0, -0.25 * a);
            u.u[1].set_real_pair(0, m, 1, q);
            u.u[1].set_real_pair(0, m, -1, q);
            u.u[2].set_real_pair(0, m, 1, -q);
            u.u[2].set_real_pair(0, m, -1, q);
            u
        }
    };
    u.time = t0;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dns::config::IcKind;
    use crate::spectral::{DomainSpec, TWO_PI};

    fn ic(kind: IcKind) -> InitialCondition {
        InitialCondition { kind, amplitude: 1e-3, seed: 3, band: 2 }
    }

    #[test]
    fn families_are_normalised_and_divergence_free() {
        let g = Grid::new(DomainSpec::cube(8, 0.01).unwrap()).unwrap();
        for k in [IcKind::Random, IcKind::ObliqueStreak] {
            let u = initial_state(&g, &ic(k), 1.0).unwrap();
            assert!((h2(&u) - 1e-3).abs() < 1e-15);
            assert!(u.divergence_defect() < 1e-12);
            assert_eq!(u.time, 1.0);
        }
        assert_eq!(initial_state(&g, &ic(IcKind::Zero), 1.0).unwrap().norm_sq(), 0.0);
        let mut wide = ic(IcKind::Random);
        wide.band = 3;
        assert!(initial_state(&g, &wide, 1.0).is_err());
    }

    #[test]
    fn streak_families_are_x_independent() {
        let g = Grid::new(DomainSpec::streak(16, 16, 4.0, 0.01).unwrap()).unwrap();
        for k in [IcKind::Random, IcKind::ObliqueStreak, IcKind::TaylorGreen] {
            assert!(initial_state(&g, &ic(k), 1.0).unwrap().is_x_independent());
        }
    }

    #[test]
    fn taylor_green_values() {
        let g = Grid::new(DomainSpec::streak(16, 8, 4.0, 0.01).unwrap()).unwrap();
        let mut c = ic(IcKind::TaylorGreen);
        c.amplitude = 2.0;
        let u = initial_state(&g, &c, 1.0).unwrap();
        for (y, z) in [(0.1, 0.2), (-1.7, 0.9)] {
            let e2 = 2.0 * (TWO_PI * y).sin() * (TWO_PI * z).cos();
            let e3 = -2.0 * (TWO_PI * y).cos() * (TWO_PI * z).sin();
            assert!((u.u[1].evaluate_at(0.0, y, z) - e2).abs() < 1e-12);
            assert!((u.u[2].evaluate_at(0.0, y, z) - e3).abs() < 1e-12);
        }
        assert!(u.divergence_defect() < 1e-14);
    }
}
