use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::RatioStat;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_half_line, integrate_real_line, QuadOptions};

/// Numeric value of an identity next to its closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingCheck {
    pub numeric: f64,
    pub exact: f64,
    pub rel_err: f64,
}

fn nonzero_k(k: i64) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be nonzero".into()));
    }
    Ok(())
}

fn opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 4000 }
}

/// `int_R k^2 / (k^2 + (eta - k t)^2 + l^2) dt` by quadrature against `|k| pi / sqrt(k^2 + l^2)`.
pub fn verify_damping_identity(k: i64, l: i64, eta: f64) -> Result<DampingCheck> {
    nonzero_k(k)?;
    let (kf, lf) = (k as f64, l as f64);
    // centre the peak at t = 0 so the mapped integrand stays smooth
    let shift = eta / kf;
    let r = integrate_real_line(
        |t| {
            let b = eta - kf * (t + shift);
            kf * kf / (kf * kf + b * b + lf * lf)
        },
        opts(),
    )?;
    let exact = kf.abs() * PI / (kf * kf + lf * lf).sqrt();
    Ok(DampingCheck { numeric: r.value, exact, rel_err: (r.value - exact).abs() / exact })
}

/// Ratio of `int_0^t (k^2 + (eta - k tau)^2 + l^2) dtau` to `k^2 t^3 / 12`
/// over all sampled `(t, eta)` pairs; the minimum is the quantity of interest.
pub fn verify_mixing_lower_bound(k: i64, l: i64, etas: &[f64], times: &[f64]) -> Result<RatioStat> {
    nonzero_k(k)?;
    let (kf, lf) = (k as f64, l as f64);
    let mut ratios = Vec::with_capacity(etas.len() * times.len());
    for &eta in etas {
        for &t in times {
            if !(t > 0.0) {
                return Err(Error::InvalidInput(format!("t = {t} must be positive")));
            }
            let lhs = integrate(|s| kf * kf + (eta - kf * s).powi(2) + lf * lf, 0.0, t, opts())?.value;
            ratios.push(lhs / (kf * kf * t.powi(3) / 12.0));
        }
    }
    let mut p = BTreeMap::new();
    p.insert("k".into(), k.to_string());
    p.insert("l".into(), l.to_string());
    p.insert("eta".into(), format!("{} values", etas.len()));
    p.insert("t".into(), format!("{} values", times.len()));
    RatioStat::from_ratios("mixing_lower_bound", &ratios, p)
}

/// `k^2 int_0^t d tau / (k^2 + (eta - k tau)^2 + l^2)` by quadrature.
pub fn inviscid_damping_integral(k: i64, l: i64, eta: f64, t: f64) -> Result<f64> {
    nonzero_k(k)?;
    let (kf, lf) = (k as f64, l as f64);
    let f = |s: f64| kf * kf / (kf * kf + (eta - kf * s).powi(2) + lf * lf);
    if t.is_infinite() {
        // split at the peak so both pieces are monotone
        let peak = (eta / kf).max(0.0);
        let loose = QuadOptions { rel_tol: 1e-11, ..opts() };
        let head = if peak > 0.0 {
            integrate(f, 0.0, peak, opts()).or_else(|_| integrate(f, 0.0, peak, loose))?.value
        } else {
            0.0
        };
        let tail = integrate_half_line(f, peak, opts()).or_else(|_| integrate_half_line(f, peak, loose))?;
        Ok(head + tail.value)
    } else {
        Ok(integrate(f, 0.0, t, opts())?.value)
    }
}

/// `sup_t k^2 int_0^t ...`: the integrand is positive, so the supremum is the
/// `t -> inf` limit. It never exceeds the whole-line value `pi |k| / sqrt(k^2 + l^2) <= pi`.
pub fn verify_inviscid_damping_integral(k: i64, l: i64, eta: f64) -> Result<f64> {
    inviscid_damping_integral(k, l, eta, f64::INFINITY)
}
