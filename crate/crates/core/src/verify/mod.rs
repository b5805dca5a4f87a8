//! Numerical checks of the identities and inequalities behind the stability
//! analysis: exact scalar integrals, the mode-level and field-level linear
//! estimates, the anisotropic bilinear estimates and power-law fits.

mod bilinear;
mod linear_scaling;
mod mode;
mod props;
mod scalar;

pub use bilinear::{
    bilinear_inequalities, bilinear_sample, verify_bilinear_lemma, BilinearCheck, BilinearLemma, BilinearOptions,
};
pub use linear_scaling::{e_folding_time, enhanced_dissipation_scaling, liftup_peak, liftup_scaling, LinearScaling};
pub use mode::{lemma3b_ratio, sample_mode_problem, verify_lemma3b, Lemma3bResult, Lemma3bSweep, Lemma3bTerms, SourceFamily};
pub use props::{
    prop_decay_l0_coupled_terms, prop_decay_l0_terms, verify_prop_decay_l0, verify_prop_decay_l0_coupled, PropFamily,
    PropOptions, PropTerms,
};
pub use scalar::{
    inviscid_damping_integral, verify_damping_identity, verify_inviscid_damping_integral, verify_mixing_lower_bound,
    DampingCheck,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::record::SCHEMA_VERSION;

/// Empirical `LHS / RHS` statistics of an inequality (constant set to 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStat {
    pub name: String,
    pub samples: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub min_ratio: f64,
    /// Sampled parameter ranges, for the report.
    pub parameters: BTreeMap<String, String>,
}

impl RatioStat {
    pub fn from_ratios(name: &str, ratios: &[f64], parameters: BTreeMap<String, String>) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InvalidInput(format!("{name}: no samples")));
        }
        if let Some(bad) = ratios.iter().find(|r| !r.is_finite()) {
            return Err(Error::Numerical(format!("{name}: non-finite ratio {bad}")));
        }
        let n = ratios.len() as f64;
        Ok(RatioStat {
            name: name.to_string(),
            samples: ratios.len(),
            max_ratio: ratios.iter().cloned().fold(f64::MIN, f64::max),
            mean_ratio: ratios.iter().sum::<f64>() / n,
            min_ratio: ratios.iter().cloned().fold(f64::MAX, f64::min),
            parameters,
        })
    }
}

/// Calibration/holdout split of a ratio sample: the constant is fixed on the
/// first half and checked on the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub calibrated_c: f64,
    pub holdout_max: f64,
    /// `holdout_max / calibrated_c - 1`, clamped at 0.
    pub exceedance: f64,
    /// Fraction of holdout samples above the calibrated constant.
    pub exceed_fraction: f64,
}

impl Calibration {
    pub fn from_ratios(ratios: &[f64]) -> Result<Self> {
        if ratios.len() < 2 {
            return Err(Error::InvalidInput("calibration needs at least two samples".into()));
        }
        let (cal, hold) = ratios.split_at(ratios.len() / 2);
        let c = cal.iter().cloned().fold(f64::MIN, f64::max);
        let h = hold.iter().cloned().fold(f64::MIN, f64::max);
        let above = hold.iter().filter(|&&r| r > c).count();
        Ok(Calibration {
            calibrated_c: c,
            holdout_max: h,
            exceedance: (h / c - 1.0).max(0.0),
            exceed_fraction: above as f64 / hold.len() as f64,
        })
    }

    /// Holdout maximum within 5% of the calibrated constant.
    pub fn stable(&self) -> bool {
        self.exceedance <= 0.05
    }
}

/// JSON report of one checked inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub schema_version: u32,
    pub lemma: String,
    pub samples: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    #[serde(rename = "calibrated_C")]
    pub calibrated_c: Option<f64>,
    pub holdout_max: Option<f64>,
    pub exceedance: Option<f64>,
    pub parameters: BTreeMap<String, String>,
}

impl LemmaReport {
    pub fn new(stat: &RatioStat, cal: Option<&Calibration>) -> Self {
        LemmaReport {
            schema_version: SCHEMA_VERSION,
            lemma: stat.name.clone(),
            samples: stat.samples,
            max_ratio: stat.max_ratio,
            mean_ratio: stat.mean_ratio,
            calibrated_c: cal.map(|c| c.calibrated_c),
            holdout_max: cal.map(|c| c.holdout_max),
            exceedance: cal.map(|c| c.exceedance),
            parameters: stat.parameters.clone(),
        }
    }
}

/// Log–log least-squares fit `value ~ A nu^exponent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub stderr: f64,
    /// Half-width of the 95% confidence interval of the exponent.
    pub ci95: f64,
    pub residual_rms: f64,
    pub points: usize,
}

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|(x, v)| !(*x > 0.0) || !(*v > 0.0)) {
        return Err(Error::InvalidInput(format!("nonpositive point {p:?}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all abscissae equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let stderr = (ss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Numerical(e.to_string()))?.inverse_cdf(0.975);
    Ok(ScalingFit {
        exponent: slope,
        prefactor: icpt.exp(),
        stderr,
        ci95: t * stderr,
        residual_rms: (ss / n).sqrt(),
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_fit() {
        let pts: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4].iter().map(|&nu: &f64| (nu, 3.0 * nu.powf(-1.0 / 3.0))).collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((f.exponent + 1.0 / 3.0).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-10);
        let c = fit_scaling(&[(1.0, 2.0), (2.0, 2.0), (5.0, 2.0)]).unwrap();
        assert!(c.exponent.abs() < 1e-14);
        assert!(fit_scaling(&[(1.0, 2.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_scaling(&[(1.0, 2.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn noisy_fit_interval_covers_truth() {
        let pts = [(1.0, 1.0), (2.0, 0.26), (4.0, 0.0624), (8.0, 0.0157)];
        let f = fit_scaling(&pts).unwrap();
        assert!((f.exponent + 2.0).abs() < f.ci95);
        // t_{0.975, 2} = 4.3027
        assert!((f.ci95 / f.stderr - 4.302652729911275).abs() < 1e-6);
    }

    #[test]
    fn calibration_split() {
        let r = [1.0, 2.0, 3.0, 1.5, 3.1, 0.5];
        let c = Calibration::from_ratios(&r).unwrap();
        assert_eq!(c.calibrated_c, 3.0);
        assert_eq!(c.holdout_max, 3.1);
        assert!((c.exceedance - 0.1 / 3.0).abs() < 1e-15);
        assert!((c.exceed_fraction - 1.0 / 3.0).abs() < 1e-15);
        assert!(c.stable());
    }
}
