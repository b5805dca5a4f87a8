use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RatioStat;
use crate::error::{Error, Result};
use crate::linear::{evolve_mode_exact, gamma, gamma_integral, GammaParams, ModeProblem, Source};
use crate::quadrature::{integrate, QuadOptions};
use crate::random::rng_for;
use crate::spectral::TWO_PI;

/// Which sources of the mode equation are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFamily {
    /// Initial datum only.
    Homogeneous,
    F1,
    F2,
    F3,
    /// Initial datum and all three sources.
    Mixed,
}

/// Ranges of the randomized mode problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma3bSweep {
    pub samples: usize,
    pub seed: u64,
    pub family: SourceFamily,
    pub k_max: i64,
    pub l_max: i64,
    pub eta_max: f64,
    /// `nu` is drawn log-uniformly from `[nu_min, nu_max]`.
    pub nu_min: f64,
    pub nu_max: f64,
    pub a_max: f64,
    /// `T = 1 + horizon nu^{-1/3}`.
    pub horizon: f64,
    pub grid_points: usize,
}

impl Default for Lemma3bSweep {
    fn default() -> Self {
        Lemma3bSweep {
            samples: 40,
            seed: 1,
            family: SourceFamily::Mixed,
            k_max: 4,
            l_max: 4,
            eta_max: 8.0,
            nu_min: 1e-3,
            nu_max: 1e-2,
            a_max: 4.0,
            horizon: 10.0,
            grid_points: 4000,
        }
    }
}

/// Squared terms of both sides of the mode estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma3bTerms {
    /// `sup |w f|^2`, `int |w 2 pi k gamma^{-1/2} f|^2`, `nu int |w gamma^{1/2} f|^2`, `nu^{1/3} int |w f|^2`.
    pub lhs: [f64; 4],
    /// `|f(1)|^2`, weighted `f1` term, `nu^{-1/3}` `f2` term, `nu^{-1}` `f3` term.
    pub rhs: [f64; 4],
    /// The `f1` term without the factor `|k| (k^2 + l^2)^{-1/2}`.
    pub rhs_f1_unweighted: f64,
    pub ratio: f64,
    pub ratio_unweighted: f64,
}

/// Ratio statistics for the printed form of the estimate and for the form
/// without the `|k| (k^2 + l^2)^{-1/2}` factor on the `f1` term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma3bResult {
    pub weighted: RatioStat,
    pub unweighted: RatioStat,
}

/// Sampling times on `[1, T]`: a uniform grid of `n` points, refined so that
/// each step stays below `0.02 / rate(t)` wherever `rate` is positive.
pub(crate) fn time_grid(t_end: f64, n: usize, rate: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let h = (t_end - 1.0) / (n.max(2) - 1) as f64;
    let mut ts = vec![1.0];
    let mut t = 1.0;
    while t < t_end {
        let r = rate(t);
        let step = if r > 0.0 { h.min(0.02 / r) } else { h };
        t = (t + step).min(t_end);
        if t_end - t < 1e-9 * step {
            t = t_end;
        }
        ts.push(t);
    }
    ts
}

/// Local stiffness `nu gamma(t)` of a mode while its homogeneous part is
/// still above `e^{-40}`, zero afterwards.
pub(crate) fn transient_rate(g: &GammaParams, nu: f64) -> impl Fn(f64) -> f64 + '_ {
    move |t| {
        if nu * gamma_integral(g, 1.0, t) < 40.0 {
            nu * gamma(g, t)
        } else {
            0.0
        }
    }
}

pub(crate) fn trapz(ts: &[f64], v: &[f64]) -> f64 {
    crate::norms::trapezoid(ts, v)
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 4000 }
}

/// Evaluates both sides of the mode estimate for one problem.
pub fn lemma3b_ratio(p: &ModeProblem, grid_points: usize) -> Result<Lemma3bTerms> {
    p.validate()?;
    if p.k == 0 {
        return Err(Error::InvalidInput("k must be nonzero".into()));
    }
    let g = p.params();
    let nu = p.nu;
    let c = p.a * nu.cbrt();
    let w2 = |t: f64| (2.0 * c * t).exp();
    let ts = time_grid(p.t_end, grid_points, &transient_rate(&g, nu));
    let f = evolve_mode_exact(p, &ts)?;

    let mut sup: f64 = 0.0;
    let (mut damp, mut diss, mut enh) = (Vec::new(), Vec::new(), Vec::new());
    let kk = TWO_PI * p.k as f64;
    for (t, z) in ts.iter().zip(&f) {
        let a = w2(*t) * z.norm_sqr();
        let gm = gamma(&g, *t);
        sup = sup.max(a);
        damp.push(kk * kk / gm * a);
        diss.push(gm * a);
        enh.push(a);
    }
    let lhs = [sup, trapz(&ts, &damp), nu * trapz(&ts, &diss), nu.cbrt() * trapz(&ts, &enh)];

    let weighted_int = |src: &Source, pow: f64| -> Result<f64> {
        if src.is_zero() {
            return Ok(0.0);
        }
        Ok(integrate(|t| w2(t) * gamma(&g, t).powf(pow) * src.eval(t).norm_sqr(), 1.0, p.t_end, quad_opts())?.value)
    };
    let (kf, lf) = (p.k as f64, p.l as f64);
    let f1_raw = weighted_int(&p.f1, 1.0)?;
    let anis = kf.abs() / (kf * kf + lf * lf).sqrt();
    let rhs = [
        p.f_init.norm_sqr(),
        f1_raw * anis,
        weighted_int(&p.f2, 0.0)? / nu.cbrt(),
        weighted_int(&p.f3, -1.0)? / nu,
    ];
    let l: f64 = lhs.iter().sum();
    let r: f64 = rhs.iter().sum();
    let r_un = r - rhs[1] + f1_raw;
    if !(r > 0.0) {
        return Err(Error::InvalidInput("right-hand side vanishes".into()));
    }
    Ok(Lemma3bTerms { lhs, rhs, rhs_f1_unweighted: f1_raw, ratio: l / r, ratio_unweighted: l / r_un })
}

fn random_source<R: Rng>(rng: &mut R, nu: f64) -> Source {
    let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let rate = Complex64::new(-rng.gen_range(0.0..2.0) * nu.cbrt(), rng.gen_range(-3.0..3.0) * TWO_PI);
    Source::exponential(amp, rate)
}

/// Draws the `index`-th problem of a sweep; depends only on `(seed, index)`.
pub fn sample_mode_problem(s: &Lemma3bSweep, index: u64) -> ModeProblem {
    let mut rng = rng_for(s.seed, index);
    let mut k = 0;
    while k == 0 {
        k = rng.gen_range(-s.k_max..=s.k_max);
    }
    let l = rng.gen_range(-s.l_max..=s.l_max);
    let eta = rng.gen_range(-s.eta_max..=s.eta_max);
    let nu = (s.nu_min.ln() + rng.gen::<f64>() * (s.nu_max / s.nu_min).ln()).exp();
    let a = rng.gen_range(0.0..=s.a_max);
    let f_init = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut p = ModeProblem {
        k,
        l,
        eta,
        nu,
        a,
        f1: Source::zero(),
        f2: Source::zero(),
        f3: Source::zero(),
        f_init: Complex64::new(0.0, 0.0),
        t_end: 1.0 + s.horizon * nu.powf(-1.0 / 3.0),
    };
    use SourceFamily::*;
    if matches!(s.family, Homogeneous | Mixed) {
        p.f_init = f_init;
    }
    if matches!(s.family, F1 | Mixed) {
        p.f1 = random_source(&mut rng, nu);
    }
    if matches!(s.family, F2 | Mixed) {
        p.f2 = random_source(&mut rng, nu);
    }
    if matches!(s.family, F3 | Mixed) {
        p.f3 = random_source(&mut rng, nu);
    }
    p
}

fn validate_sweep(s: &Lemma3bSweep) -> Result<()> {
    if s.samples == 0 || s.k_max < 1 || s.l_max < 0 || s.grid_points < 2 {
        return Err(Error::InvalidInput("empty sweep".into()));
    }
    if !(s.nu_min > 0.0 && s.nu_min <= s.nu_max) {
        return Err(Error::InvalidInput(format!("bad nu range [{}, {}]", s.nu_min, s.nu_max)));
    }
    if !(0.0..=4.0).contains(&s.a_max) {
        return Err(Error::InvalidInput(format!("a_max = {} outside [0, 4]", s.a_max)));
    }
    if !(s.horizon > 0.0) {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    Ok(())
}

/// Empirical constant of the mode estimate over a randomized sweep.
pub fn verify_lemma3b(s: &Lemma3bSweep) -> Result<Lemma3bResult> {
    validate_sweep(s)?;
    let terms: Vec<Lemma3bTerms> = (0..s.samples as u64)
        .into_par_iter()
        .map(|i| lemma3b_ratio(&sample_mode_problem(s, i), s.grid_points))
        .collect::<Result<_>>()?;
    let mut params = BTreeMap::new();
    params.insert("family".into(), format!("{:?}", s.family));
    params.insert("k".into(), format!("[-{0}, {0}] \\ 0", s.k_max));
    params.insert("l".into(), format!("[-{0}, {0}]", s.l_max));
    params.insert("eta".into(), format!("[-{0}, {0}]", s.eta_max));
    params.insert("nu".into(), format!("[{}, {}] log-uniform", s.nu_min, s.nu_max));
    params.insert("a".into(), format!("[0, {}]", s.a_max));
    params.insert("T".into(), format!("1 + {} nu^(-1/3)", s.horizon));
    params.insert("seed".into(), s.seed.to_string());
    let w: Vec<f64> = terms.iter().map(|t| t.ratio).collect();
    let u: Vec<f64> = terms.iter().map(|t| t.ratio_unweighted).collect();
    Ok(Lemma3bResult {
        weighted: RatioStat::from_ratios("lemma3b", &w, params.clone())?,
        unweighted: RatioStat::from_ratios("lemma3b_unweighted_f1", &u, params)?,
    })
}
