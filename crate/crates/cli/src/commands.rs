use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use couette_core::dns::{simulate, simulate_state, streak_simulate, Checkpoint, SimConfig, CHECKPOINT_VERSION};
use couette_core::experiments::{
    run_threshold_bisection, Classifier, DnsClassifier, MockClassifier, ThresholdQuery, ThresholdResult,
};
use couette_core::norms::energy_functionals;
use couette_core::record::{manifest_path, RunOutcome, TrajectoryRecord, SCHEMA_VERSION};
use couette_core::spectral::DEFAULT_LY;
use couette_core::verify::{self, BilinearLemma, LemmaReport};
use couette_core::{DomainSpec, Grid, VelocityState};

use crate::output::emit;
use crate::{CheckpointCmd, Cli, Command, RunOut, Usage};

type Result<T> = anyhow::Result<T>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn read_config(path: &Path, seed: Option<u64>) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = SimConfig::from_toml(&text)?;
    if let Some(s) = seed {
        cfg.initial_condition.seed = s;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct RunReport {
    schema_version: u32,
    outcome: RunOutcome,
    diverged_at: Option<f64>,
    nu: f64,
    t_start: f64,
    t_end: f64,
    steps: usize,
    snapshots: usize,
    total_dropped_energy: f64,
    final_energy: f64,
    record: PathBuf,
    checkpoint: Option<PathBuf>,
}

fn default_record(config: &Path) -> PathBuf {
    config.with_extension("record.csv")
}

fn finish_run(
    rec: &TrajectoryRecord,
    state: &VelocityState,
    domain: DomainSpec,
    steps: usize,
    dropped: f64,
    record: PathBuf,
    out: &RunOut,
) -> Result<RunReport> {
    rec.save(&record).with_context(|| format!("writing {}", record.display()))?;
    if let Some(p) = &out.checkpoint {
        Checkpoint { domain, state: state.clone() }.save(p).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        outcome: rec.outcome,
        diverged_at: rec.diverged_at,
        nu: domain.nu,
        t_start: rec.times.first().copied().unwrap_or(f64::NAN),
        t_end: rec.times.last().copied().unwrap_or(f64::NAN),
        steps,
        snapshots: rec.len(),
        total_dropped_energy: dropped,
        final_energy: rec.last("energy")?,
        record,
        checkpoint: out.checkpoint.clone(),
    })
}

fn run_sim(cli: &Cli, config: &Path, out: &RunOut, streak: bool) -> Result<()> {
    let cfg = read_config(config, cli.seed)?;
    let res = if streak { streak_simulate(&cfg)? } else { simulate(&cfg)? };
    let mut domain = cfg.domain;
    if streak {
        domain = DomainSpec::streak(domain.ny, domain.nz, domain.ly, domain.nu)?;
    }
    let record = out.record.clone().unwrap_or_else(|| default_record(config));
    let rep = finish_run(&res.record, &res.final_state, domain, res.steps, res.total_dropped_energy, record, out)?;
    emit(&rep, cli.output)
}

#[derive(Serialize)]
struct IdentityReport {
    schema_version: u32,
    lemma: &'static str,
    k: i64,
    l: i64,
    eta: f64,
    numeric: f64,
    exact: f64,
    rel_err: f64,
}

#[derive(Serialize)]
struct InviscidReport {
    schema_version: u32,
    lemma: &'static str,
    k: i64,
    l: i64,
    eta: f64,
    value: f64,
    /// Whole-line value `pi |k| / sqrt(k^2 + l^2)`, the supremum over `eta`.
    whole_line: f64,
    bound: f64,
}

#[derive(Serialize)]
struct ScalingReport {
    schema_version: u32,
    lemma: String,
    #[serde(flatten)]
    scaling: verify::LinearScaling,
}

fn lemma_report(stat: &verify::RatioStat) -> LemmaReport {
    LemmaReport::new(stat, None)
}

fn verify_linear(cli: &Cli, lemma: &str, k: i64, l: i64, eta: f64, samples: Option<usize>, nus: &[f64]) -> Result<()> {
    let f = cli.output;
    match lemma {
        "kL2" => {
            let c = verify::verify_damping_identity(k, l, eta)?;
            let r = IdentityReport {
                schema_version: SCHEMA_VERSION,
                lemma: "kL2",
                k,
                l,
                eta,
                numeric: c.numeric,
                exact: c.exact,
                rel_err: c.rel_err,
            };
            emit(&r, f)
        }
        "mixing" => {
            let etas: Vec<f64> = (0..=40).map(|i| -20.0 + i as f64).collect();
            let times: Vec<f64> = (0..30).map(|i| 0.1 * 1.3f64.powi(i)).collect();
            emit(&lemma_report(&verify::verify_mixing_lower_bound(k, l, &etas, &times)?), f)
        }
        "inviscid" => {
            let value = verify::verify_inviscid_damping_integral(k, l, eta)?;
            let (kf, lf) = (k as f64, l as f64);
            let r = InviscidReport {
                schema_version: SCHEMA_VERSION,
                lemma: "inviscid",
                k,
                l,
                eta,
                value,
                whole_line: std::f64::consts::PI * kf.abs() / (kf * kf + lf * lf).sqrt(),
                bound: std::f64::consts::PI,
            };
            emit(&r, f)
        }
        "lem3b" => {
            let mut s = verify::Lemma3bSweep::default();
            if let Some(n) = samples {
                s.samples = n;
            }
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            let r = verify::verify_lemma3b(&s)?;
            emit(&[lemma_report(&r.weighted), lemma_report(&r.unweighted)], f)
        }
        "decay-L0" | "decay-L0-2" => {
            let mut o = verify::PropOptions::default();
            if let Some(n) = samples {
                o.samples = n;
            }
            if let Some(seed) = cli.seed {
                o.seed = seed;
            }
            let stat = if lemma == "decay-L0" {
                verify::verify_prop_decay_l0(&o)?
            } else {
                verify::verify_prop_decay_l0_coupled(&o)?
            };
            emit(&lemma_report(&stat), f)
        }
        "enhanced" | "liftup" => {
            let scaling = if lemma == "enhanced" {
                verify::enhanced_dissipation_scaling(nus)?
            } else {
                verify::liftup_scaling(nus)?
            };
            emit(&ScalingReport { schema_version: SCHEMA_VERSION, lemma: lemma.to_string(), scaling }, f)
        }
        other => usage(format!(
            "unknown lemma {other:?}; expected kL2, mixing, inviscid, lem3b, decay-L0, decay-L0-2, enhanced or liftup"
        )),
    }
}

#[derive(Serialize)]
struct BilinearReport {
    #[serde(flatten)]
    report: LemmaReport,
    exceed_fraction: f64,
    stable: bool,
}

fn verify_bilinear(cli: &Cli, lemma: &str, samples: usize) -> Result<()> {
    let lemmas: Vec<BilinearLemma> = if lemma == "all" {
        BilinearLemma::ALL.to_vec()
    } else {
        match lemma.parse() {
            Ok(l) => vec![l],
            Err(e) => return usage(format!("{e}")),
        }
    };
    let mut o = verify::BilinearOptions { samples, ..Default::default() };
    if let Some(s) = cli.seed {
        o.seed = s;
    }
    let mut out = Vec::new();
    for l in lemmas {
        for c in verify::verify_bilinear_lemma(l, &o)? {
            out.push(BilinearReport {
                report: LemmaReport::new(&c.stat, Some(&c.calibration)),
                exceed_fraction: c.calibration.exceed_fraction,
                stable: c.calibration.stable(),
            });
        }
    }
    emit(&out, cli.output)
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum ClassifierKind {
    #[default]
    Dns,
    Mock,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ClassifierSpec {
    #[serde(default)]
    kind: ClassifierKind,
    /// Mock threshold `prefactor nu^exponent`.
    prefactor: Option<f64>,
    exponent: Option<f64>,
    grid: Option<usize>,
    ly: Option<f64>,
    #[serde(default)]
    allow_underresolved: bool,
    record_dir: Option<PathBuf>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct ThresholdFile {
    query: ThresholdQuery,
    #[serde(default)]
    classifier: ClassifierSpec,
}

fn threshold(cli: &Cli, path: &Path, report: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ThresholdFile = match toml::from_str(&text) {
        Ok(f) => f,
        Err(e) => return usage(format!("query: {e}")),
    };
    let mut q = file.query;
    if let Some(s) = cli.seed {
        q.ic_family.seed = s;
    }
    let c = file.classifier;
    let classifier: Box<dyn Classifier> = match c.kind {
        ClassifierKind::Mock => Box::new(MockClassifier {
            prefactor: c.prefactor.unwrap_or(1.0),
            exponent: c.exponent.unwrap_or(1.0),
        }),
        ClassifierKind::Dns => Box::new(DnsClassifier {
            ly: c.ly.unwrap_or(DEFAULT_LY),
            grid: c.grid,
            allow_underresolved: c.allow_underresolved,
            record_dir: c.record_dir,
        }),
    };
    let r: ThresholdResult = run_threshold_bisection(&q, classifier.as_ref())?;
    if let Some(p) = report {
        std::fs::write(p, serde_json::to_string_pretty(&r)?).with_context(|| format!("writing {}", p.display()))?;
    }
    emit(&r, cli.output)
}

#[derive(Serialize)]
struct FunctionalReport {
    schema_version: u32,
    functional: String,
    value: Option<f64>,
    nu: f64,
    t_start: f64,
    t_end: f64,
    eps0: f64,
    /// `E1 <= eps0`, `E2, E3 <= eps0 nu`; absent for the other functionals.
    bootstrap_ok: Option<bool>,
}

fn norms(cli: &Cli, path: &Path, functional: Option<&str>, nu: Option<f64>, eps0: f64) -> Result<()> {
    if !manifest_path(path).exists() && nu.is_none() {
        return usage(format!("{} has no manifest; pass --nu", path.display()));
    }
    let rec = TrajectoryRecord::load(path, nu.unwrap_or(f64::NAN)).with_context(|| format!("reading {}", path.display()))?;
    let nu = nu.unwrap_or(rec.nu);
    let rep = energy_functionals(&rec, nu, eps0)?;
    match functional {
        None => emit(&rep, cli.output),
        Some(name) => {
            let i = match name.strip_prefix(['E', 'e']).and_then(|d| d.parse::<usize>().ok()) {
                Some(i @ 1..=6) => i,
                _ => return usage(format!("unknown functional {name:?}; expected E1 to E6")),
            };
            let b = rep.bootstrap;
            let ok = match i {
                1 => Some(b.e1_ok),
                2 => Some(b.e2_ok),
                3 => Some(b.e3_ok),
                _ => None,
            };
            emit(
                &FunctionalReport {
                    schema_version: SCHEMA_VERSION,
                    functional: format!("E{i}"),
                    value: rep.functional(i),
                    nu,
                    t_start: rep.t_start,
                    t_end: rep.t_end,
                    eps0,
                    bootstrap_ok: ok,
                },
                cli.output,
            )
        }
    }
}

#[derive(Serialize)]
struct CheckpointInfo {
    schema_version: u32,
    format_version: u32,
    nx: usize,
    ny: usize,
    nz: usize,
    ly: f64,
    nu: f64,
    time: f64,
    shear_phase: f64,
    energy: f64,
    component_energy: BTreeMap<String, f64>,
}

fn checkpoint(cli: &Cli, cmd: &CheckpointCmd) -> Result<()> {
    match cmd {
        CheckpointCmd::Info { file } => {
            let ck = Checkpoint::load(file).with_context(|| format!("reading {}", file.display()))?;
            let d = ck.domain;
            let comp: BTreeMap<String, f64> =
                ck.state.u.iter().enumerate().map(|(i, f)| (format!("u{}", i + 1), f.norm_sq())).collect();
            emit(
                &CheckpointInfo {
                    schema_version: SCHEMA_VERSION,
                    format_version: CHECKPOINT_VERSION,
                    nx: d.nx,
                    ny: d.ny,
                    nz: d.nz,
                    ly: d.ly,
                    nu: d.nu,
                    time: ck.state.time,
                    shear_phase: ck.state.shear_phase(),
                    energy: comp.values().sum(),
                    component_energy: comp,
                },
                cli.output,
            )
        }
        CheckpointCmd::Resume { file, config, t_end, out } => {
            let ck = Checkpoint::load(file).with_context(|| format!("reading {}", file.display()))?;
            let mut cfg = read_config(config, None)?;
            if let Some(t) = t_end {
                cfg.time.t_end = *t;
            }
            let (a, b) = (ck.domain, cfg.domain);
            if (a.ny, a.nz, a.ly, a.nu) != (b.ny, b.nz, b.ly, b.nu) || (a.nx != b.nx && a.nx != 1) {
                bail!(couette_core::Error::InvalidInput(format!(
                    "checkpoint domain {a:?} does not match the config domain {b:?}"
                )));
            }
            if !(cfg.time.t_end > ck.state.time) {
                bail!(couette_core::Error::InvalidInput(format!(
                    "t_end = {} is not after the checkpoint time {}",
                    cfg.time.t_end, ck.state.time
                )));
            }
            cfg.domain = a;
            let grid = Grid::new(a)?;
            let res = simulate_state(&grid, ck.state, &cfg)?;
            let record = out.record.clone().unwrap_or_else(|| file.with_extension("resumed.csv"));
            let rep = finish_run(&res.record, &res.final_state, a, res.steps, res.total_dropped_energy, record, out)?;
            emit(&rep, cli.output)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { config, out } => run_sim(cli, config, out, false),
        Command::Streak { config, out } => run_sim(cli, config, out, true),
        Command::VerifyLinear { lemma, k, l, eta, samples, nu } => verify_linear(cli, lemma, *k, *l, *eta, *samples, nu),
        Command::VerifyBilinear { lemma, samples } => verify_bilinear(cli, lemma, *samples),
        Command::Threshold { query, report } => threshold(cli, query, report.as_deref()),
        Command::Norms { record, functional, nu, eps0 } => norms(cli, record, functional.as_deref(), *nu, *eps0),
        Command::Checkpoint(c) => checkpoint(cli, c),
    }
}
