use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::DomainSpec;

/// Time-step choice: fixed, or from the explicit CFL number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtSetting {
    Auto,
    Fixed(f64),
}

impl Serialize for DtSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DtSetting::Auto => s.serialize_str("auto"),
            DtSetting::Fixed(dt) => s.serialize_f64(*dt),
        }
    }
}

impl<'de> Deserialize<'de> for DtSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(DtSetting::Fixed(x)),
            Raw::Text(s) if s == "auto" => Ok(DtSetting::Auto),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("dt must be a number or \"auto\", got {s:?}"))),
        }
    }
}

/// When to relabel sheared modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemeshPolicy {
    /// Remesh whenever the phase reaches half a remesh unit `1/(2 Ly)`.
    Auto,
    Never,
}

/// Named initial-condition families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcKind {
    Zero,
    /// Random divergence-free band-limited field.
    Random,
    /// Streamwise rolls plus a pair of oblique waves.
    ObliqueStreak,
    /// `(u2, u3) = A (sin 2 pi y cos 2 pi z, -cos 2 pi y sin 2 pi z)`, not normalised.
    TaylorGreen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub kind: IcKind,
    /// `||u(t_start)||_{H^2}` for the normalised families, the prefactor for Taylor–Green.
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    /// Largest mode index of the random family.
    #[serde(default = "default_band")]
    pub band: i64,
}

fn default_band() -> i64 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_t_start")]
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: DtSetting,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    /// Snapshot cadence; defaults to `min(0.1, nu^{-1/3} / 20)`.
    #[serde(default)]
    pub record_every: Option<f64>,
}

fn default_t_start() -> f64 {
    1.0
}
fn default_dt() -> DtSetting {
    DtSetting::Auto
}
fn default_cfl() -> f64 {
    0.4
}
fn default_dt_max() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemeshConfig {
    #[serde(default = "default_policy")]
    pub policy: RemeshPolicy,
}

fn default_policy() -> RemeshPolicy {
    RemeshPolicy::Auto
}

impl Default for RemeshConfig {
    fn default() -> Self {
        RemeshConfig { policy: RemeshPolicy::Auto }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Disables `u . grad u` and `grad p^NL` when false.
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    /// Growth factor of `||u||_{H^2}` over its initial value that ends a run as diverged.
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
}

fn default_true() -> bool {
    true
}
fn default_blowup() -> f64 {
    1e3
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { nonlinear: true, blowup_factor: 1e3 }
    }
}

/// Simulation configuration, read from TOML with sections `[domain]`,
/// `[time]`, `[remesh]`, `[initial_condition]` and `[run]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub domain: DomainSpec,
    pub time: TimeConfig,
    #[serde(default)]
    pub remesh: RemeshConfig,
    pub initial_condition: InitialCondition,
    #[serde(default)]
    pub run: RunConfig,
}

impl SimConfig {
    /// Configuration with defaults for everything but the essentials.
    pub fn new(domain: DomainSpec, t_end: f64, ic: InitialCondition) -> Self {
        SimConfig {
            domain,
            time: TimeConfig {
                t_start: 1.0,
                t_end,
                dt: DtSetting::Auto,
                cfl: default_cfl(),
                dt_max: default_dt_max(),
                record_every: None,
            },
            remesh: RemeshConfig::default(),
            initial_condition: ic,
            run: RunConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: SimConfig = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain.nx == 1 {
            DomainSpec::streak(self.domain.ny, self.domain.nz, self.domain.ly, self.domain.nu)?;
        } else {
            self.domain.validate()?;
        }
        let t = &self.time;
        if !(t.t_start >= 0.0) || !(t.t_end > t.t_start) {
            return Err(Error::InvalidInput(format!("need 0 <= t_start < t_end, got [{}, {}]", t.t_start, t.t_end)));
        }
        if t.t_start == 1.0 && !(t.t_end > 1.0) {
            return Err(Error::InvalidInput("t_end must exceed 1".into()));
        }
        if !(t.cfl > 0.0 && t.cfl < 1.0) {
            return Err(Error::InvalidInput(format!("cfl = {} must lie in (0, 1)", t.cfl)));
        }
        if !(t.dt_max > 0.0) {
            return Err(Error::InvalidInput("dt_max must be positive".into()));
        }
        if let DtSetting::Fixed(dt) = t.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
            }
        }
        if let Some(r) = t.record_every {
            if !(r > 0.0) {
                return Err(Error::InvalidInput("record_every must be positive".into()));
            }
        }
        let ic = &self.initial_condition;
        if !(ic.amplitude >= 0.0) || !ic.amplitude.is_finite() {
            return Err(Error::InvalidInput(format!("amplitude = {} must be finite and >= 0", ic.amplitude)));
        }
        if ic.band < 1 {
            return Err(Error::InvalidInput("band must be >= 1".into()));
        }
        if !(self.run.blowup_factor > 1.0) {
            return Err(Error::InvalidInput("blowup_factor must exceed 1".into()));
        }
        Ok(())
    }

    /// Snapshot cadence.
    pub fn record_interval(&self) -> f64 {
        self.time
            .record_every
            .unwrap_or_else(|| 0.1f64.min(self.domain.nu.powf(-1.0 / 3.0) / 20.0))
    }
}
