//! Flat dotted-key TOML run configuration.
//!
//! Every key is optional; missing keys fall back to the chosen preset.
//!
//! | key | meaning |
//! |-----|---------|
//! | `preset` | `"wsinr_small"` (default) or `"sumrate_paper"` |
//! | `scenario.m`, `scenario.n` | BS antennas, RIS elements |
//! | `scenario.p_t` | total transmit power (W) |
//! | `scenario.sigma2_dbm` / `scenario.sigma2_watts` | noise power, at most one of the two |
//! | `scenario.seed` | master seed |
//! | `channel.beta_br_db`, `channel.beta_bu_db`, `channel.beta_ru_db` | Rician factors |
//! | `pathloss.enabled` | draw links as `kappa J + G` |
//! | `pathloss.<link>.c_db`, `.rho`, `.distance` | per link, `<link>` in `bs_ris`, `bs_user1`, `bs_user2`, `ris_user1`, `ris_user2` |
//! | `admm.eps`, `admm.k_max`, `admm.rho0`, `admm.delta`, `admm.random_init` | weighted-SINR ADMM |
//! | `admm_sumrate.eps`, `.k_max`, `.rho1_0`, `.rho2_0`, `.delta1`, `.delta2`, `.random_init` | sum-rate ADMM |
//! | `sweep.kind` | `"lambda"` or `"power"` |
//! | `sweep.values` | strictly increasing list (lambda values, or `P_T` in watts) |
//! | `sweep.trials` | trials per value |
//! | `sweep.schemes` | list of scheme tags |
//! | `run.lambda` | weight used by power sweeps for the weighted-SINR column |
//! | `baseline.tol` | grid spacing target of the fixed-surface searches |
//! | `baseline.wmmse_iters` | WMMSE iteration cap |
//!
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ris_core::baselines::Scheme;
use ris_core::config::{dbm_to_watts, LinkPathloss, PathlossProfile, ScenarioConfig};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Lambda,
    Power,
}

impl SweepKind {
    pub fn tag(self) -> &'static str {
        match self {
            SweepKind::Lambda => "lambda",
            SweepKind::Power => "power",
        }
    }
}

/// Knobs that are not part of the scenario itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub lambda: f64,
    pub baseline_tol: f64,
    pub wmmse_iters: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { lambda: 0.5, baseline_tol: 1e-4, wmmse_iters: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub base: ScenarioConfig,
    pub options: RunOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.values.is_empty() {
            return Err(HarnessError::Config("sweep.values must not be empty".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HarnessError::Config("sweep.values must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::Config("sweep.values must be finite".into()));
        }
        match self.kind {
            SweepKind::Lambda if self.values.iter().any(|v| !(0.0..=1.0).contains(v)) => {
                return Err(HarnessError::Config("lambda values must lie in [0, 1]".into()));
            }
            SweepKind::Power if self.values.iter().any(|v| !(*v > 0.0)) => {
                return Err(HarnessError::Config("power values must be > 0".into()));
            }
            _ => {}
        }
        if self.trials < 1 {
            return Err(HarnessError::Config("sweep.trials must be >= 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::Config("sweep.schemes must not be empty".into()));
        }
        if !(0.0..=1.0).contains(&self.options.lambda) {
            return Err(HarnessError::Config("run.lambda must lie in [0, 1]".into()));
        }
        if !(self.options.baseline_tol > 0.0) {
            return Err(HarnessError::Config("baseline.tol must be > 0".into()));
        }
        if self.options.wmmse_iters < 1 {
            return Err(HarnessError::Config("baseline.wmmse_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Default scheme list of a sweep kind.
    pub fn default_schemes(kind: SweepKind) -> Vec<Scheme> {
        match kind {
            SweepKind::Lambda => {
                vec![Scheme::RisOptWsinr, Scheme::RisDft, Scheme::RisRandom, Scheme::NoRisZf]
            }
            SweepKind::Power => vec![
                Scheme::RisOptSumrate,
                Scheme::RisDft,
                Scheme::RisRandom,
                Scheme::NoRisWmmse,
                Scheme::NoRisZf,
            ],
        }
    }

    /// Preset scenario with its natural sweep.
    pub fn preset(name: &str) -> Result<Self> {
        let (base, kind) = match name {
            "wsinr_small" => (ScenarioConfig::wsinr_small(), SweepKind::Lambda),
            "sumrate_paper" => (ScenarioConfig::sumrate_paper(), SweepKind::Power),
            other => return Err(HarnessError::Config(format!("unknown preset {other:?}"))),
        };
        let values = match kind {
            SweepKind::Lambda => vec![0.5],
            SweepKind::Power => vec![base.p_t],
        };
        Ok(Self {
            kind,
            values,
            trials: 1,
            schemes: Self::default_schemes(kind),
            base,
            options: RunOptions::default(),
        })
    }
}

/// Flatten nested tables into dotted keys.
fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Keys(BTreeMap<String, toml::Value>);

impl Keys {
    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.0.remove(key)
    }

    fn f64(&mut self, key: &str, slot: &mut f64) -> Result<()> {
        match self.take(key) {
            None => Ok(()),
            Some(toml::Value::Float(v)) => {
                *slot = v;
                Ok(())
            }
            Some(toml::Value::Integer(v)) => {
                *slot = v as f64;
                Ok(())
            }
            Some(other) => Err(type_error(key, "a number", &other)),
        }
    }

    fn usize(&mut self, key: &str, slot: &mut usize) -> Result<()> {
        match self.take(key) {
            None => Ok(()),
            Some(toml::Value::Integer(v)) if v >= 0 => {
                *slot = v as usize;
                Ok(())
            }
            Some(other) => Err(type_error(key, "a nonnegative integer", &other)),
        }
    }

    fn u64(&mut self, key: &str, slot: &mut u64) -> Result<()> {
        let mut v = *slot as usize;
        self.usize(key, &mut v)?;
        *slot = v as u64;
        Ok(())
    }

    fn bool(&mut self, key: &str, slot: &mut bool) -> Result<()> {
        match self.take(key) {
            None => Ok(()),
            Some(toml::Value::Boolean(v)) => {
                *slot = v;
                Ok(())
            }
            Some(other) => Err(type_error(key, "a boolean", &other)),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(type_error(key, "a string", &other)),
        }
    }

    fn array(&mut self, key: &str) -> Result<Option<Vec<toml::Value>>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => Ok(Some(a)),
            Some(other) => Err(type_error(key, "an array", &other)),
        }
    }
}

fn type_error(key: &str, expected: &str, got: &toml::Value) -> HarnessError {
    HarnessError::Config(format!("{key} must be {expected}, got {got}"))
}

const LINKS: [&str; 5] = ["bs_ris", "bs_user1", "bs_user2", "ris_user1", "ris_user2"];

fn link_mut<'a>(p: &'a mut PathlossProfile, name: &str) -> &'a mut LinkPathloss {
    match name {
        "bs_ris" => &mut p.bs_ris,
        "bs_user1" => &mut p.bs_user1,
        "bs_user2" => &mut p.bs_user2,
        "ris_user1" => &mut p.ris_user1,
        _ => &mut p.ris_user2,
    }
}

fn link(p: &PathlossProfile, name: &str) -> LinkPathloss {
    match name {
        "bs_ris" => p.bs_ris,
        "bs_user1" => p.bs_user1,
        "bs_user2" => p.bs_user2,
        "ris_user1" => p.ris_user1,
        _ => p.ris_user2,
    }
}

/// Parse configuration text.
pub fn parse(text: &str) -> Result<SweepSpec> {
    let table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
    let mut flat = BTreeMap::new();
    flatten("", &table, &mut flat);
    let mut keys = Keys(flat);

    let preset = keys.string("preset")?.unwrap_or_else(|| "wsinr_small".into());
    let mut spec = SweepSpec::preset(&preset)?;
    let base = &mut spec.base;
    keys.usize("scenario.m", &mut base.m)?;
    keys.usize("scenario.n", &mut base.n)?;
    keys.f64("scenario.p_t", &mut base.p_t)?;
    keys.u64("scenario.seed", &mut base.seed)?;
    let mut dbm = f64::NAN;
    let mut watts = f64::NAN;
    keys.f64("scenario.sigma2_dbm", &mut dbm)?;
    keys.f64("scenario.sigma2_watts", &mut watts)?;
    match (dbm.is_nan(), watts.is_nan()) {
        (false, false) => {
            return Err(HarnessError::Config(
                "give at most one of scenario.sigma2_dbm and scenario.sigma2_watts".into(),
            ))
        }
        (false, true) => base.sigma2 = dbm_to_watts(dbm),
        (true, false) => base.sigma2 = watts,
        (true, true) => {}
    }
    keys.f64("channel.beta_br_db", &mut base.rician.beta_br_db)?;
    keys.f64("channel.beta_bu_db", &mut base.rician.beta_bu_db)?;
    keys.f64("channel.beta_ru_db", &mut base.rician.beta_ru_db)?;

    let mut enabled = base.pathloss.is_some();
    keys.bool("pathloss.enabled", &mut enabled)?;
    let mut profile = base.pathloss.unwrap_or_else(PathlossProfile::collinear_default);
    for name in LINKS {
        let l = link_mut(&mut profile, name);
        keys.f64(&format!("pathloss.{name}.c_db"), &mut l.c_db)?;
        keys.f64(&format!("pathloss.{name}.rho"), &mut l.rho)?;
        keys.f64(&format!("pathloss.{name}.distance"), &mut l.distance)?;
    }
    base.pathloss = enabled.then_some(profile);

    let a = &mut base.admm;
    keys.f64("admm.eps", &mut a.eps)?;
    keys.usize("admm.k_max", &mut a.k_max)?;
    keys.f64("admm.rho0", &mut a.rho0)?;
    keys.f64("admm.delta", &mut a.delta)?;
    keys.bool("admm.random_init", &mut a.random_init)?;
    let s = &mut base.admm_sumrate;
    keys.f64("admm_sumrate.eps", &mut s.eps)?;
    keys.usize("admm_sumrate.k_max", &mut s.k_max)?;
    keys.f64("admm_sumrate.rho1_0", &mut s.rho1_0)?;
    keys.f64("admm_sumrate.rho2_0", &mut s.rho2_0)?;
    keys.f64("admm_sumrate.delta1", &mut s.delta1)?;
    keys.f64("admm_sumrate.delta2", &mut s.delta2)?;
    keys.bool("admm_sumrate.random_init", &mut s.random_init)?;

    let kind_changed = match keys.string("sweep.kind")?.as_deref() {
        None => false,
        Some("lambda") => {
            let changed = spec.kind != SweepKind::Lambda;
            spec.kind = SweepKind::Lambda;
            changed
        }
        Some("power") => {
            let changed = spec.kind != SweepKind::Power;
            spec.kind = SweepKind::Power;
            changed
        }
        Some(other) => {
            return Err(HarnessError::Config(format!(
                "sweep.kind must be \"lambda\" or \"power\", got {other:?}"
            )))
        }
    };
    if kind_changed {
        spec.values = match spec.kind {
            SweepKind::Lambda => vec![0.5],
            SweepKind::Power => vec![spec.base.p_t],
        };
        spec.schemes = SweepSpec::default_schemes(spec.kind);
    }
    if let Some(values) = keys.array("sweep.values")? {
        spec.values = values
            .iter()
            .map(|v| match v {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                other => Err(type_error("sweep.values", "a list of numbers", other)),
            })
            .collect::<Result<_>>()?;
    }
    keys.usize("sweep.trials", &mut spec.trials)?;
    if let Some(schemes) = keys.array("sweep.schemes")? {
        spec.schemes = schemes
            .iter()
            .map(|v| match v {
                toml::Value::String(s) => parse_scheme(s),
                other => Err(type_error("sweep.schemes", "a list of scheme tags", other)),
            })
            .collect::<Result<_>>()?;
    }
    keys.f64("run.lambda", &mut spec.options.lambda)?;
    keys.f64("baseline.tol", &mut spec.options.baseline_tol)?;
    keys.usize("baseline.wmmse_iters", &mut spec.options.wmmse_iters)?;

    if !keys.0.is_empty() {
        let unknown: Vec<&str> = keys.0.keys().map(String::as_str).collect();
        return Err(HarnessError::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    spec.validate()?;
    Ok(spec)
}

pub fn parse_scheme(tag: &str) -> Result<Scheme> {
    tag.parse().map_err(|e: ris_core::Error| HarnessError::Config(e.to_string()))
}

/// Read and parse a config file.
pub fn load(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        HarnessError::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse(&text).map_err(|e| match e {
        HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn num(v: f64) -> String {
    toml::Value::Float(v).to_string()
}

/// Serialise a spec as flat dotted keys; `parse(&render(s)) == s`.
pub fn render(spec: &SweepSpec) -> String {
    let b = &spec.base;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("scenario.m", b.m.to_string());
    line("scenario.n", b.n.to_string());
    line("scenario.p_t", num(b.p_t));
    line("scenario.sigma2_watts", num(b.sigma2));
    line("scenario.seed", b.seed.to_string());
    line("channel.beta_br_db", num(b.rician.beta_br_db));
    line("channel.beta_bu_db", num(b.rician.beta_bu_db));
    line("channel.beta_ru_db", num(b.rician.beta_ru_db));
    line("pathloss.enabled", b.pathloss.is_some().to_string());
    let profile = b.pathloss.unwrap_or_else(PathlossProfile::collinear_default);
    for name in LINKS {
        let l = link(&profile, name);
        line(&format!("pathloss.{name}.c_db"), num(l.c_db));
        line(&format!("pathloss.{name}.rho"), num(l.rho));
        line(&format!("pathloss.{name}.distance"), num(l.distance));
    }
    let a = &b.admm;
    line("admm.eps", num(a.eps));
    line("admm.k_max", a.k_max.to_string());
    line("admm.rho0", num(a.rho0));
    line("admm.delta", num(a.delta));
    line("admm.random_init", a.random_init.to_string());
    let s = &b.admm_sumrate;
    line("admm_sumrate.eps", num(s.eps));
    line("admm_sumrate.k_max", s.k_max.to_string());
    line("admm_sumrate.rho1_0", num(s.rho1_0));
    line("admm_sumrate.rho2_0", num(s.rho2_0));
    line("admm_sumrate.delta1", num(s.delta1));
    line("admm_sumrate.delta2", num(s.delta2));
    line("admm_sumrate.random_init", s.random_init.to_string());
    line("sweep.kind", format!("\"{}\"", spec.kind.tag()));
    let values: Vec<String> = spec.values.iter().map(|v| num(*v)).collect();
    line("sweep.values", format!("[{}]", values.join(", ")));
    line("sweep.trials", spec.trials.to_string());
    let schemes: Vec<String> = spec.schemes.iter().map(|s| format!("\"{}\"", s.tag())).collect();
    line("sweep.schemes", format!("[{}]", schemes.join(", ")));
    line("run.lambda", num(spec.options.lambda));
    line("baseline.tol", num(spec.options.baseline_tol));
    line("baseline.wmmse_iters", spec.options.wmmse_iters.to_string());
    out
}
