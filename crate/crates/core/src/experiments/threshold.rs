use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{classify_run, RunClass};
use crate::dns::{initial_state, simulate_state, IcKind, InitialCondition, SimConfig};
use crate::error::{Error, Result};
use crate::record::{TrajectoryRecord, SCHEMA_VERSION};
use crate::spectral::{DomainSpec, Grid, DEFAULT_LY};
use crate::verify::{fit_scaling, ScalingFit};

/// Cubic grid size for a run at `nu`: 32 for `nu >= 5e-3`, 48 for `nu >= 1e-3`.
/// Smaller viscosities are refused unless `allow_underresolved`, which keeps 48.
pub fn default_grid(nu: f64, allow_underresolved: bool) -> Result<usize> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!("nu = {nu} must be positive")));
    }
    if nu >= 5e-3 {
        Ok(32)
    } else if nu >= 1e-3 || allow_underresolved {
        Ok(48)
    } else {
        Err(Error::InvalidInput(format!(
            "nu = {nu} is below the resolved range (>= 1e-3); set allow_underresolved to run anyway"
        )))
    }
}

/// Initial-condition generator of the bisection; the amplitude is set per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcFamily {
    #[serde(default = "default_kind")]
    pub kind: IcKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_band")]
    pub band: i64,
}

fn default_kind() -> IcKind {
    IcKind::Random
}
fn default_band() -> i64 {
    2
}

impl Default for IcFamily {
    fn default() -> Self {
        IcFamily { kind: IcKind::Random, seed: 0, band: 2 }
    }
}

/// Bisection request. Bracket ends are multiples of `nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdQuery {
    pub nu_list: Vec<f64>,
    #[serde(default)]
    pub ic_family: IcFamily,
    #[serde(default = "default_tol")]
    pub bisection_tol: f64,
    #[serde(default = "default_max_runs")]
    pub max_runs_per_nu: usize,
    /// Run length in units of `nu^{-1/3}`.
    #[serde(default = "default_t_end_policy")]
    pub t_end_policy: f64,
    #[serde(default = "default_bracket")]
    pub initial_bracket: (f64, f64),
    /// Factor applied to the violated bracket end before giving up.
    #[serde(default = "default_widen")]
    pub widen_factor: f64,
}

fn default_tol() -> f64 {
    1.2
}
fn default_max_runs() -> usize {
    24
}
fn default_t_end_policy() -> f64 {
    20.0
}
fn default_bracket() -> (f64, f64) {
    (1.0, 1e4)
}
fn default_widen() -> f64 {
    100.0
}

impl ThresholdQuery {
    pub fn new(nu_list: Vec<f64>) -> Self {
        ThresholdQuery {
            nu_list,
            ic_family: IcFamily::default(),
            bisection_tol: default_tol(),
            max_runs_per_nu: default_max_runs(),
            t_end_policy: default_t_end_policy(),
            initial_bracket: default_bracket(),
            widen_factor: default_widen(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.nu_list.is_empty() {
            return bad("nu_list is empty".into());
        }
        if self.nu_list.iter().any(|nu| !(*nu > 0.0) || !nu.is_finite()) {
            return bad(format!("nu_list {:?} must hold positive values", self.nu_list));
        }
        if self.nu_list.windows(2).any(|w| !(w[0] > w[1])) {
            return bad(format!("nu_list {:?} must be strictly descending", self.nu_list));
        }
        if !(self.bisection_tol > 1.0) {
            return bad(format!("bisection_tol = {} must exceed 1", self.bisection_tol));
        }
        let (lo, hi) = self.initial_bracket;
        if !(lo > 0.0 && hi > lo) {
            return bad(format!("initial_bracket ({lo}, {hi}) must satisfy 0 < lo < hi"));
        }
        if !(self.widen_factor > 1.0) {
            return bad("widen_factor must exceed 1".into());
        }
        if !(self.t_end_policy > 0.0) {
            return bad("t_end_policy must be positive".into());
        }
        if self.max_runs_per_nu < 2 {
            return bad("max_runs_per_nu must be at least 2".into());
        }
        Ok(())
    }
}

/// One classified run of the bisection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedRun {
    pub amplitude: f64,
    pub class: RunClass,
    /// Whether the run was extended once because it was undecided.
    pub extended: bool,
    pub record_path: Option<PathBuf>,
}

/// Decides whether a perturbation of given `H^2` amplitude decays at `nu`.
/// Never returns [`RunClass::Undecided`].
pub trait Classifier: Sync {
    fn classify(&self, nu: f64, amplitude: f64, query: &ThresholdQuery) -> Result<ClassifiedRun>;
}

/// Stable exactly when `amplitude < prefactor nu^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockClassifier {
    pub prefactor: f64,
    pub exponent: f64,
}

impl Classifier for MockClassifier {
    fn classify(&self, nu: f64, amplitude: f64, _: &ThresholdQuery) -> Result<ClassifiedRun> {
        let class =
            if amplitude < self.prefactor * nu.powf(self.exponent) { RunClass::Stable } else { RunClass::Transitioned };
        Ok(ClassifiedRun { amplitude, class, extended: false, record_path: None })
    }
}

/// Full DNS classification on the default grid for each `nu`. Undecided runs
/// are continued once for another `t_end_policy nu^{-1/3}` and then counted as
/// transitioned if still undecided.
#[derive(Clone, Debug, PartialEq)]
pub struct DnsClassifier {
    pub ly: f64,
    /// Overrides [`default_grid`].
    pub grid: Option<usize>,
    pub allow_underresolved: bool,
    /// Directory receiving every record as CSV plus manifest.
    pub record_dir: Option<PathBuf>,
}

impl Default for DnsClassifier {
    fn default() -> Self {
        DnsClassifier { ly: DEFAULT_LY, grid: None, allow_underresolved: false, record_dir: None }
    }
}

fn append(rec: &mut TrajectoryRecord, more: &TrajectoryRecord) -> Result<()> {
    let last = rec.times.last().copied().unwrap_or(f64::NEG_INFINITY);
    for (t, r) in more.times.iter().zip(&more.rows) {
        if *t > last {
            rec.push(*t, r.clone())?;
        }
    }
    rec.outcome = more.outcome;
    rec.diverged_at = more.diverged_at;
    Ok(())
}

impl DnsClassifier {
    pub fn config(&self, nu: f64, amplitude: f64, query: &ThresholdQuery) -> Result<SimConfig> {
        let n = match self.grid {
            Some(n) => n,
            None => default_grid(nu, self.allow_underresolved)?,
        };
        let f = &query.ic_family;
        let ic = InitialCondition { kind: f.kind, amplitude, seed: f.seed, band: f.band };
        let span = query.t_end_policy * nu.powf(-1.0 / 3.0);
        let cfg = SimConfig::new(DomainSpec::new(n, n, n, self.ly, nu)?, 1.0 + span, ic);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Classifier for DnsClassifier {
    fn classify(&self, nu: f64, amplitude: f64, query: &ThresholdQuery) -> Result<ClassifiedRun> {
        let mut cfg = self.config(nu, amplitude, query)?;
        let grid = Grid::new(cfg.domain)?;
        let u0 = initial_state(&grid, &cfg.initial_condition, cfg.time.t_start)?;
        let first = simulate_state(&grid, u0, &cfg)?;
        let mut rec = first.record;
        let mut class = classify_run(&rec, nu)?;
        let mut extended = false;
        if class == RunClass::Undecided {
            extended = true;
            cfg.time.t_end += query.t_end_policy * nu.powf(-1.0 / 3.0);
            let more = simulate_state(&grid, first.final_state, &cfg)?;
            append(&mut rec, &more.record)?;
            class = match classify_run(&rec, nu)? {
                RunClass::Undecided => RunClass::Transitioned,
                c => c,
            };
        }
        let record_path = match &self.record_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let p = dir.join(format!("nu{nu:e}_a{amplitude:e}.csv"));
                rec.save(&p)?;
                Some(p)
            }
            None => None,
        };
        Ok(ClassifiedRun { amplitude, class, extended, record_path })
    }
}

/// How the bracket of one `nu` ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketStatus {
    /// `a_transition_min / a_stable_max <= bisection_tol`.
    Converged,
    /// Valid bracket, but the run budget ran out first.
    RunLimit,
    /// Every amplitude tried was stable, even after widening.
    CensoredAllStable,
    /// Every amplitude tried transitioned, even after widening.
    CensoredAllTransitioned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuBracket {
    pub nu: f64,
    /// Largest stable amplitude, absent when censored from below.
    pub a_stable_max: Option<f64>,
    /// Smallest transitioned amplitude, absent when censored from above.
    pub a_transition_min: Option<f64>,
    pub status: BracketStatus,
    pub runs: Vec<ClassifiedRun>,
}

impl NuBracket {
    /// Geometric mean of the bracket ends, when both exist.
    pub fn threshold(&self) -> Option<f64> {
        Some((self.a_stable_max? * self.a_transition_min?).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub schema_version: u32,
    pub query: ThresholdQuery,
    pub brackets: Vec<NuBracket>,
    /// Fit `A* ~ nu^beta` over bracketed viscosities, when there are at least three.
    pub beta: Option<ScalingFit>,
    /// `A*` nonincreasing as `nu` decreases.
    pub monotone: bool,
}

fn bisect(c: &dyn Classifier, nu: f64, q: &ThresholdQuery) -> Result<NuBracket> {
    let mut runs = Vec::new();
    let run = |a: f64, runs: &mut Vec<ClassifiedRun>| -> Result<RunClass> {
        let r = c.classify(nu, a, q)?;
        if r.class == RunClass::Undecided {
            return Err(Error::Numerical(format!("classifier left amplitude {a} undecided")));
        }
        let class = r.class;
        runs.push(r);
        Ok(class)
    };
    let (mut lo, mut hi) = (q.initial_bracket.0 * nu, q.initial_bracket.1 * nu);
    let censored = |status, runs| NuBracket { nu, a_stable_max: None, a_transition_min: None, status, runs };
    if run(lo, &mut runs)? != RunClass::Stable {
        lo /= q.widen_factor;
        if run(lo, &mut runs)? != RunClass::Stable {
            let mut b = censored(BracketStatus::CensoredAllTransitioned, runs);
            b.a_transition_min = Some(lo);
            return Ok(b);
        }
    }
    if run(hi, &mut runs)? != RunClass::Transitioned {
        hi *= q.widen_factor;
        if run(hi, &mut runs)? != RunClass::Transitioned {
            let mut b = censored(BracketStatus::CensoredAllStable, runs);
            b.a_stable_max = Some(hi);
            return Ok(b);
        }
    }
    while hi / lo > q.bisection_tol && runs.len() < q.max_runs_per_nu {
        let mid = (lo * hi).sqrt();
        match run(mid, &mut runs)? {
            RunClass::Stable => lo = mid,
            _ => hi = mid,
        }
        debug_assert!(lo < hi);
    }
    let status = if hi / lo <= q.bisection_tol { BracketStatus::Converged } else { BracketStatus::RunLimit };
    Ok(NuBracket { nu, a_stable_max: Some(lo), a_transition_min: Some(hi), status, runs })
}

/// Geometric bisection of the transition amplitude for every `nu` in the
/// query, the viscosities running in parallel.
pub fn run_threshold_bisection(q: &ThresholdQuery, c: &dyn Classifier) -> Result<ThresholdResult> {
    q.validate()?;
    let brackets: Vec<NuBracket> = q.nu_list.par_iter().map(|&nu| bisect(c, nu, q)).collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = brackets.iter().filter_map(|b| Some((b.nu, b.threshold()?))).collect();
    let beta = if pts.len() >= 3 { Some(fit_scaling(&pts)?) } else { None };
    // nu_list is descending, so A* must not increase along it
    let monotone = pts.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(ThresholdResult { schema_version: SCHEMA_VERSION, query: q.clone(), brackets, beta, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock(exponent: f64) -> MockClassifier {
        MockClassifier { prefactor: 1.0, exponent }
    }

    #[test]
    fn mock_threshold_recovers_beta() {
        let q = ThresholdQuery::new(vec![1e-2, 5e-3, 2.5e-3]);
        let r = run_threshold_bisection(&q, &mock(1.0)).unwrap();
        let beta = r.beta.as_ref().unwrap();
        assert!((beta.exponent - 1.0).abs() < 1e-10, "{}", beta.exponent);
        assert!(r.monotone);
        for b in &r.brackets {
            assert_eq!(b.status, BracketStatus::Converged);
            let (lo, hi) = (b.a_stable_max.unwrap(), b.a_transition_min.unwrap());
            assert!(lo < b.nu && b.nu <= hi && hi / lo <= 1.2);
        }
        let r = run_threshold_bisection(&q, &mock(1.5)).unwrap();
        assert!((r.beta.unwrap().exponent - 1.5).abs() < 0.1);
    }

    #[test]
    fn single_nu_and_censoring() {
        let r = run_threshold_bisection(&ThresholdQuery::new(vec![1e-2]), &mock(1.0)).unwrap();
        assert!(r.beta.is_none() && r.brackets[0].threshold().is_some());
        let high = MockClassifier { prefactor: 1e9, exponent: 1.0 };
        let r = run_threshold_bisection(&ThresholdQuery::new(vec![1e-2]), &high).unwrap();
        assert_eq!(r.brackets[0].status, BracketStatus::CensoredAllStable);
        assert_eq!(r.brackets[0].runs.len(), 3);
        let low = MockClassifier { prefactor: 1e-9, exponent: 1.0 };
        let r = run_threshold_bisection(&ThresholdQuery::new(vec![1e-2]), &low).unwrap();
        assert_eq!(r.brackets[0].status, BracketStatus::CensoredAllTransitioned);
        // widening rescues a bracket that starts too high
        let r = run_threshold_bisection(&ThresholdQuery::new(vec![1e-2]), &MockClassifier { prefactor: 0.1, exponent: 1.0 })
            .unwrap();
        assert_eq!(r.brackets[0].status, BracketStatus::Converged);
    }

    #[test]
    fn run_limit_and_validation() {
        let mut q = ThresholdQuery::new(vec![1e-2]);
        q.max_runs_per_nu = 4;
        let r = run_threshold_bisection(&q, &mock(1.0)).unwrap();
        assert_eq!(r.brackets[0].status, BracketStatus::RunLimit);
        assert_eq!(r.brackets[0].runs.len(), 4);
        for bad in [vec![], vec![1e-3, 1e-2], vec![-1.0]] {
            assert!(ThresholdQuery::new(bad).validate().is_err());
        }
        let mut q = ThresholdQuery::new(vec![1e-2]);
        q.bisection_tol = 1.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn grid_defaults() {
        assert_eq!(default_grid(1e-2, false).unwrap(), 32);
        assert_eq!(default_grid(5e-3, false).unwrap(), 32);
        assert_eq!(default_grid(2.5e-3, false).unwrap(), 48);
        assert!(default_grid(5e-4, false).is_err());
        assert_eq!(default_grid(5e-4, true).unwrap(), 48);
    }

    #[test]
    fn query_from_toml() {
        let q: ThresholdQuery = toml::from_str("nu_list = [0.01, 0.005]\n[ic_family]\nseed = 3\n").unwrap();
        assert_eq!(q.bisection_tol, 1.2);
        assert_eq!(q.ic_family.seed, 3);
        assert!(toml::from_str::<ThresholdQuery>("nu_list = [0.01]\nbogus = 1\n").is_err());
    }
}
