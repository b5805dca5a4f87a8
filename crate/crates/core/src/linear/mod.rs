//! Closed-form and semi-analytic propagators for the linearised operators.

mod field;

pub use field::{
    evolve_l0_heat, evolve_l1_field, evolve_l_field, heat_step_in_place, l1_nonlocal, liftup_solution,
    orr_velocity, FieldRhs,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_complex, QuadOptions};
use crate::spectral::TWO_PI;

/// Wavenumber data `(k, eta, l)` of one sheared Fourier mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub k: i64,
    pub l: i64,
    pub eta: f64,
}

/// `gamma(t) = (2 pi)^2 (k^2 + (eta - k t)^2 + l^2)`.
pub fn gamma(g: &GammaParams, t: f64) -> f64 {
    let (k, l) = (g.k as f64, g.l as f64);
    let b = g.eta - k * t;
    TWO_PI * TWO_PI * (k * k + b * b + l * l)
}

/// `int_s^t gamma`, in closed form. Uses `a^3 - b^3 = (a - b)(a^2 + ab + b^2)`
/// so that `k = 0` needs no special case.
pub fn gamma_integral(g: &GammaParams, s: f64, t: f64) -> f64 {
    let (k, l) = (g.k as f64, g.l as f64);
    let a = g.eta - k * s;
    let b = g.eta - k * t;
    TWO_PI * TWO_PI * (t - s) * (k * k + l * l + (a * a + a * b + b * b) / 3.0)
}

/// `gamma_1(t) = int_1^t gamma`.
pub fn gamma1(g: &GammaParams, t: f64) -> f64 {
    gamma_integral(g, 1.0, t)
}

/// A time-dependent complex source `sum_j amp_j exp(rate_j (t - 1))`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub terms: Vec<(Complex64, Complex64)>,
}

impl Source {
    pub fn zero() -> Self {
        Source { terms: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Source { terms: vec![(c, Complex64::new(0.0, 0.0))] }
    }

    pub fn exponential(amp: Complex64, rate: Complex64) -> Self {
        Source { terms: vec![(amp, rate)] }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(a, r)| a * (r * (t - 1.0)).exp())
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(a, _)| a.norm() == 0.0)
    }

    pub fn scaled(&self, lambda: f64) -> Source {
        Source { terms: self.terms.iter().map(|(a, r)| (a * lambda, *r)).collect() }
    }
}

/// Scalar problem `f' + nu gamma(t) f = 2 pi i k f1 + f2 + f3` on `[1, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeProblem {
    pub k: i64,
    pub l: i64,
    pub eta: f64,
    pub nu: f64,
    /// Exponential weight parameter, in `[0, 4]`.
    pub a: f64,
    pub f1: Source,
    pub f2: Source,
    pub f3: Source,
    pub f_init: Complex64,
    pub t_end: f64,
}

impl ModeProblem {
    pub fn params(&self) -> GammaParams {
        GammaParams { k: self.k, l: self.l, eta: self.eta }
    }

    /// Total forcing `2 pi i k f1 + f2 + f3` at time `t`.
    pub fn forcing(&self, t: f64) -> Complex64 {
        Complex64::new(0.0, TWO_PI * self.k as f64) * self.f1.eval(t) + self.f2.eval(t) + self.f3.eval(t)
    }

    /// Right-hand side of the mode equation.
    pub fn rhs(&self, t: f64, f: Complex64) -> Complex64 {
        -self.nu * gamma(&self.params(), t) * f + self.forcing(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 1.0) {
            return Err(Error::InvalidInput(format!("T = {} must exceed 1", self.t_end)));
        }
        if !(0.0..=4.0).contains(&self.a) {
            return Err(Error::InvalidInput(format!("a = {} outside [0, 4]", self.a)));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::InvalidInput("nu must be nonnegative".into()));
        }
        Ok(())
    }
}

fn check_grid(p: &ModeProblem, t_grid: &[f64]) -> Result<()> {
    p.validate()?;
    let mut prev = 1.0;
    for &t in t_grid {
        if t < prev || t > p.t_end + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "time grid must be sorted within [1, {}]; got {t}",
                p.t_end
            )));
        }
        prev = t;
    }
    Ok(())
}

/// Solution of the mode problem at the requested times, from the Duhamel
/// formula: the homogeneous part uses the closed-form `gamma_1`, and the
/// forcing integral is accumulated interval by interval with adaptive
/// Gauss–Kronrod quadrature.
pub fn evolve_mode_exact(p: &ModeProblem, t_grid: &[f64]) -> Result<Vec<Complex64>> {
    check_grid(p, t_grid)?;
    let forced = !(p.f1.is_zero() && p.f2.is_zero() && p.f3.is_zero());
    let forcing = |s: f64| p.forcing(s);
    duhamel_mode(&p.params(), p.nu, p.f_init, forced.then_some(&forcing as &dyn Fn(f64) -> Complex64), t_grid)
}

/// `f' + nu gamma(t) f = g(t)` from `f(1) = f_init`, sampled on a sorted grid in `[1, inf)`.
pub fn duhamel_mode(
    g: &GammaParams,
    nu: f64,
    f_init: Complex64,
    forcing: Option<&dyn Fn(f64) -> Complex64>,
    t_grid: &[f64],
) -> Result<Vec<Complex64>> {
    duhamel_mode_from(g, nu, 1.0, f_init, forcing, t_grid)
}

/// As [`duhamel_mode`], starting from `f(t0) = f0`.
pub fn duhamel_mode_from(
    g: &GammaParams,
    nu: f64,
    t0: f64,
    f0: Complex64,
    forcing: Option<&dyn Fn(f64) -> Complex64>,
    t_grid: &[f64],
) -> Result<Vec<Complex64>> {
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-13, max_intervals: 4000 };
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t_prev = t0;
    let mut f = f0;
    for &t in t_grid {
        if t < t_prev {
            return Err(Error::InvalidInput(format!("time grid not sorted at {t}")));
        }
        if t > t_prev {
            f *= (-nu * gamma_integral(g, t_prev, t)).exp();
            if let Some(src) = forcing {
                let kernel = |s: f64| (-nu * gamma_integral(g, s, t)).exp() * src(s);
                let lo = kernel_cutoff(g, nu, t_prev, t);
                let r = integrate_complex(kernel, lo, t, opts)
                    .or_else(|_| integrate_complex(kernel, lo, t, QuadOptions::abs(1e-10)))?;
                f += r.value;
            }
            t_prev = t;
        }
        out.push(f);
    }
    Ok(out)
}

/// Largest `s` in `[a, t]` with `nu int_s^t gamma >= KERNEL_DECADES`, or `a`.
/// The Duhamel kernel is below `e^{-KERNEL_DECADES}` before it; cutting there keeps
/// the quadrature from missing a boundary layer of width `1 / (nu gamma(t))`.
fn kernel_cutoff(g: &GammaParams, nu: f64, a: f64, t: f64) -> f64 {
    const KERNEL_DECADES: f64 = 50.0;
    if nu * gamma_integral(g, a, t) <= KERNEL_DECADES {
        return a;
    }
    let (mut lo, mut hi) = (a, t);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if nu * gamma_integral(g, mid, t) > KERNEL_DECADES {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * t.abs().max(1.0) {
            break;
        }
    }
    lo
}

/// Classical RK4 on the mode equation with fixed step `dt`, sampled at `t_grid`.
pub fn evolve_mode_rk4(p: &ModeProblem, t_grid: &[f64], dt: f64) -> Result<Vec<Complex64>> {
    check_grid(p, t_grid)?;
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = 1.0;
    let mut f = p.f_init;
    for &target in t_grid {
        while t < target - 1e-14 {
            let h = dt.min(target - t);
            let k1 = p.rhs(t, f);
            let k2 = p.rhs(t + 0.5 * h, f + k1 * (0.5 * h));
            let k3 = p.rhs(t + 0.5 * h, f + k2 * (0.5 * h));
            let k4 = p.rhs(t + h, f + k3 * h);
            f += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            t += h;
        }
        out.push(f);
    }
    Ok(out)
}

/// `max_i |a_i - b_i| / max_i |b_i|`.
pub fn max_relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let err = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use std::f64::consts::PI;

    #[test]
    fn gamma_examples() {
        let p = |k, eta, l| GammaParams { k, l, eta };
        assert!((gamma(&p(1, 0.0, 0), 0.0) - 4.0 * PI * PI).abs() < 1e-12);
        assert!((gamma(&p(1, 2.0, 0), 2.0) - 4.0 * PI * PI).abs() < 1e-12);
        assert!((gamma(&p(2, 0.0, 3), 1.0) - 68.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn gamma1_matches_quadrature_and_derivative() {
        let g = GammaParams { k: 1, l: 0, eta: 0.0 };
        let exact = 4.0 * PI * PI * (1.0 + 7.0 / 3.0);
        assert!((gamma1(&g, 2.0) - exact).abs() < 1e-11);
        assert_eq!(gamma1(&g, 1.0), 0.0);
        for (k, l, eta) in [(3, 2, -1.5), (-2, 0, 4.0), (0, 1, 0.7)] {
            let g = GammaParams { k, l, eta };
            let q = integrate(|s| gamma(&g, s), 1.0, 3.3, QuadOptions::default()).unwrap();
            assert!((gamma1(&g, 3.3) - q.value).abs() < 1e-10 * q.value);
            let h = 1e-5;
            let d = (gamma1(&g, 2.0 + h) - gamma1(&g, 2.0 - h)) / (2.0 * h);
            assert!((d - gamma(&g, 2.0)).abs() < 1e-6 * gamma(&g, 2.0));
        }
    }

    fn problem(k: i64, l: i64, eta: f64, nu: f64) -> ModeProblem {
        ModeProblem {
            k,
            l,
            eta,
            nu,
            a: 0.0,
            f1: Source::zero(),
            f2: Source::zero(),
            f3: Source::zero(),
            f_init: Complex64::new(1.0, 0.0),
            t_end: 2.0,
        }
    }

    #[test]
    fn homogeneous_mode_decay() {
        let p = problem(1, 0, 0.0, 0.1);
        let f = evolve_mode_exact(&p, &[2.0]).unwrap();
        let expect = (-0.1 * gamma1(&p.params(), 2.0)).exp();
        assert!((f[0].re - expect).abs() < 1e-15);
        let r = evolve_mode_rk4(&p, &[2.0], 1e-4).unwrap();
        assert!((r[0].re - expect).abs() < 1e-12);
    }

    #[test]
    fn inviscid_constant_forcing() {
        let mut p = problem(2, 1, 0.3, 0.0);
        p.f2 = Source::constant(Complex64::new(0.5, -0.25));
        let ts = [1.5, 2.0];
        let f = evolve_mode_exact(&p, &ts).unwrap();
        for (t, v) in ts.iter().zip(&f) {
            let expect = p.f_init + Complex64::new(0.5, -0.25) * (t - 1.0);
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn forced_mode_matches_rk4() {
        let mut p = problem(-3, 2, 1.7, 1e-2);
        p.t_end = 2.5;
        p.f1 = Source::exponential(Complex64::new(0.2, 0.1), Complex64::new(-0.5, 3.0));
        p.f2 = Source::constant(Complex64::new(-0.3, 0.0));
        p.f3 = Source::exponential(Complex64::new(0.0, 1.0), Complex64::new(0.0, -7.0));
        let ts: Vec<f64> = (1..=30).map(|i| 1.0 + 1.5 * i as f64 / 30.0).collect();
        let a = evolve_mode_exact(&p, &ts).unwrap();
        let b = evolve_mode_rk4(&p, &ts, 1e-4).unwrap();
        assert!(max_relative_error(&a, &b) < 1e-9);
    }

    #[test]
    fn rejects_bad_grid() {
        let p = problem(1, 0, 0.0, 0.1);
        assert!(evolve_mode_exact(&p, &[0.5]).is_err());
        assert!(evolve_mode_exact(&p, &[1.5, 1.2]).is_err());
    }

    #[test]
    fn stiff_late_time_forcing_matches_rk4() {
        // nu gamma ~ 4e3 at t = 70: the solution is quasi-steady, f ~ f3 / (nu gamma)
        let p = ModeProblem {
            k: 3,
            l: 0,
            eta: 0.0,
            nu: 2.5e-3,
            a: 0.0,
            f1: Source::zero(),
            f2: Source::zero(),
            f3: Source::constant(Complex64::new(1.0, 0.0)),
            f_init: Complex64::new(0.0, 0.0),
            t_end: 70.0,
        };
        let grid = [10.0, 40.0, 70.0];
        let exact = evolve_mode_exact(&p, &grid).unwrap();
        let rk4 = evolve_mode_rk4(&p, &grid, 1e-4).unwrap();
        for (a, b) in exact.iter().zip(&rk4) {
            assert!((a - b).norm() <= 1e-9 * b.norm(), "{a} vs {b}");
        }
        let steady = 1.0 / (p.nu * gamma(&p.params(), 70.0));
        assert!((exact[2].re / steady - 1.0).abs() < 1e-3);
    }
}
