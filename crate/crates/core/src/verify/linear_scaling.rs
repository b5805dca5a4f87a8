use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fit_scaling, ScalingFit};
use crate::error::{Error, Result};
use crate::linear::{evolve_l0_heat, liftup_solution};
use crate::norms::sobolev_norm;
use crate::spectral::{DomainSpec, Grid};
use crate::state::VelocityState;

/// Measured values and their log–log fit against `nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearScaling {
    pub points: Vec<(f64, f64)>,
    pub fit: ScalingFit,
}

fn small_grid(nu: f64) -> Result<Grid> {
    Grid::new(DomainSpec::new(4, 8, 4, 4.0, nu)?)
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidInput(format!("nu = {nu} must be positive")));
    }
    Ok(())
}

/// Time for the sheared heat flow to reduce the norm of the `(k, m, l) = (1, 0, 0)`
/// mode by `e^{-1}`, started at `t = 1` where its y-wavenumber vanishes.
pub fn e_folding_time(nu: f64) -> Result<f64> {
    check_nu(nu)?;
    let g = small_grid(nu)?;
    let mut q = g.zeros();
    q.set_real_pair(1, 0, 0, Complex64::new(0.5, 0.0));
    let n0 = q.norm();
    let target = n0 * (-1.0f64).exp();
    let norm_at = |t: f64| evolve_l0_heat(&q, nu, 1.0, 1.0 + t).norm();
    let mut hi = 1.0;
    while norm_at(hi) > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical("no e-folding within 1e12 time units".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `max_t ||ubar1(t)||` of the lift-up flow from `ubar1(0) = 0` and a unit-`H^2`
/// single-mode `ubar2(0) = cos(2 pi z)` (divergence-free with `ubar3 = 0`).
pub fn liftup_peak(nu: f64) -> Result<f64> {
    check_nu(nu)?;
    let g = small_grid(nu)?;
    let mut u = VelocityState::zeros(&g, 0.0);
    u.u[1].set_real_pair(0, 0, 1, Complex64::new(0.5, 0.0));
    let s = sobolev_norm(&u.u[1], 2.0);
    u.u[1].scale(1.0 / s);
    let norm_at = |t: f64| -> Result<f64> { Ok(liftup_solution(&u, nu, t)?.u[0].norm()) };
    // unimodal in t: golden-section search on [0, 10 / (nu |K|^2)]
    let k2 = (2.0 * std::f64::consts::PI).powi(2);
    let (mut a, mut b) = (0.0, 10.0 / (nu * k2));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (norm_at(c)?, norm_at(d)?);
    while b - a > 1e-10 * b {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = norm_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = norm_at(d)?;
        }
    }
    Ok(fc.max(fd))
}

fn scaling(nus: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<LinearScaling> {
    let points: Vec<(f64, f64)> = nus.iter().map(|&nu| Ok((nu, f(nu)?))).collect::<Result<_>>()?;
    let fit = fit_scaling(&points)?;
    Ok(LinearScaling { points, fit })
}

/// e-folding times of [`e_folding_time`] and their power-law fit.
pub fn enhanced_dissipation_scaling(nus: &[f64]) -> Result<LinearScaling> {
    scaling(nus, e_folding_time)
}

/// Lift-up peaks of [`liftup_peak`] and their power-law fit.
pub fn liftup_scaling(nus: &[f64]) -> Result<LinearScaling> {
    scaling(nus, liftup_peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn e_folding_time_solves_the_cubic() {
        // nu (2 pi)^2 (tau + tau^3 / 3) = 1
        for nu in [1e-2, 1e-4] {
            let tau = e_folding_time(nu).unwrap();
            let lhs = nu * 4.0 * PI * PI * (tau + tau.powi(3) / 3.0);
            assert!((lhs - 1.0).abs() < 1e-9, "{nu}: {lhs}");
        }
    }

    #[test]
    fn liftup_peak_closed_form() {
        // ||ubar1(t)|| = t e^{-nu K^2 t} ||ubar2||, peak ||ubar2|| / (e nu K^2)
        let nu = 1e-3;
        let k2 = 4.0 * PI * PI;
        let l2 = 1.0 / (1.0 + k2);
        let expected = l2 / (std::f64::consts::E * nu * k2);
        let p = liftup_peak(nu).unwrap();
        assert!((p - expected).abs() < 1e-9 * expected, "{p} vs {expected}");
        let s = liftup_scaling(&[1e-2, 1e-3, 1e-4]).unwrap();
        assert!((s.fit.exponent + 1.0).abs() < 1e-8);
    }
}
