//! Shared inputs of the benchmarks.

use couette_core::dns::{initial_state, IcKind, InitialCondition};
use couette_core::linear::{ModeProblem, Source};
use couette_core::{DomainSpec, Grid, VelocityState};
use num_complex::Complex64;

/// Cubic grid with a small random divergence-free state on it.
pub fn random_setup(n: usize, nu: f64) -> (Grid, VelocityState) {
    let grid = Grid::new(DomainSpec::cube(n, nu).unwrap()).unwrap();
    let ic = InitialCondition { kind: IcKind::Random, amplitude: 0.02 * nu, seed: 1, band: 2 };
    let u = initial_state(&grid, &ic, 1.0).unwrap();
    (grid, u)
}

/// Forced mode problem on `[1, 1 + 10 nu^{-1/3}]`.
pub fn mode_problem(nu: f64) -> ModeProblem {
    ModeProblem {
        k: 2,
        l: 1,
        eta: 3.0,
        nu,
        a: 1.0,
        f1: Source::exponential(Complex64::new(0.3, 0.1), Complex64::new(-0.2, 1.0)),
        f2: Source::zero(),
        f3: Source::constant(Complex64::new(0.0, 0.05)),
        f_init: Complex64::new(1.0, -0.5),
        t_end: 1.0 + 10.0 * nu.powf(-1.0 / 3.0),
    }
}
