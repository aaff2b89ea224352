//! KKT re-verification of a saved run.
//!
//! Reads `run.csv` and the `config.toml` beside it, regenerates each
//! trial's channels from the seed and recomputes the first-order residuals
//! at the stored `x`, `mu` (and `z`) of every solved optimized-RIS record.

use std::path::Path;

use ris_core::admm_sumrate::kkt_residual_sumrate;
use ris_core::admm_wsinr::{kkt_residual, KktReport};
use ris_core::baselines::Scheme;
use ris_core::channel::make_channel_set;
use ris_core::{CVec, Complex64};

use crate::config_file::{load, parse_scheme, SweepSpec};
use crate::output::{read_csv, run_dir, RUN_COLUMNS};
use crate::sweep::{operating_point, Status};
use crate::{HarnessError, Result};

pub const WSINR_STATIONARITY_TOL: f64 = 1e-4;
pub const SUMRATE_STATIONARITY_TOL: f64 = 1e-3;
pub const CONSTRAINT_TOL: f64 = 1e-6;

/// One audited record.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub trial: u64,
    pub scheme: Scheme,
    pub value: f64,
    pub stationarity: f64,
    pub constraint_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default)]
struct Stored {
    trial: u64,
    scheme: Option<Scheme>,
    value: f64,
    status: Option<Status>,
    x: Vec<(usize, Complex64)>,
    mu: Vec<(usize, Complex64)>,
    z: Vec<(usize, Complex64)>,
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<&str> {
    rec.get(i)
        .ok_or_else(|| HarnessError::RunFile(format!("row {line}: missing column {}", RUN_COLUMNS[i])))
}

fn number<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let s = field(rec, i, line)?;
    s.parse()
        .map_err(|_| HarnessError::RunFile(format!("row {line}: bad {} '{s}'", RUN_COLUMNS[i])))
}

fn dense(entries: &[(usize, Complex64)], what: &str) -> Result<CVec> {
    let mut v = CVec::zeros(entries.len());
    for &(i, c) in entries {
        if i >= entries.len() {
            return Err(HarnessError::RunFile(format!("{what} index {i} out of range")));
        }
        v[i] = c;
    }
    Ok(v)
}

fn group(rows: &[csv::StringRecord]) -> Result<Vec<Stored>> {
    let mut out: Vec<Stored> = Vec::new();
    for (line, rec) in rows.iter().enumerate() {
        let trial: u64 = number(rec, 0, line)?;
        let scheme = parse_scheme(field(rec, 1, line)?)
            .map_err(|e| HarnessError::RunFile(format!("row {line}: {e}")))?;
        let value: f64 = number(rec, 2, line)?;
        let status = Status::parse(field(rec, 3, line)?)
            .ok_or_else(|| HarnessError::RunFile(format!("row {line}: unknown status")))?;
        let idx: usize = number(rec, 5, line)?;
        let c = Complex64::new(number(rec, 6, line)?, number(rec, 7, line)?);
        let same = out.last().is_some_and(|s| {
            s.trial == trial && s.scheme == Some(scheme) && s.value.to_bits() == value.to_bits()
        });
        if !same {
            out.push(Stored { trial, scheme: Some(scheme), value, status: Some(status), ..Stored::default() });
        }
        let cur = out.last_mut().expect("pushed above");
        match field(rec, 4, line)? {
            "x" => cur.x.push((idx, c)),
            "mu" => cur.mu.push((idx, c)),
            "z" => cur.z.push((idx, c)),
            other => return Err(HarnessError::RunFile(format!("row {line}: unknown field '{other}'"))),
        }
    }
    Ok(out)
}

fn check(spec: &SweepSpec, s: &Stored, scheme: Scheme) -> Result<AuditRow> {
    let cs = make_channel_set(&spec.base, s.trial)?;
    let (lambda, p_t) = operating_point(spec, s.value);
    let x = dense(&s.x, "x")?;
    let mu = dense(&s.mu, "mu")?;
    let (report, tol): (KktReport, f64) = match scheme {
        Scheme::RisOptWsinr => (kkt_residual(&cs, lambda, &x, &mu)?, WSINR_STATIONARITY_TOL),
        Scheme::RisOptSumrate => {
            let z = if s.z.is_empty() { None } else { Some(dense(&s.z, "z")?) };
            let r = kkt_residual_sumrate(&cs, &x, z.as_ref(), &mu, p_t, spec.base.sigma2)?;
            (r, SUMRATE_STATIONARITY_TOL)
        }
        other => return Err(HarnessError::RunFile(format!("scheme {other} carries no KKT state"))),
    };
    Ok(AuditRow {
        trial: s.trial,
        scheme,
        value: s.value,
        stationarity: report.stationarity,
        constraint_residual: report.constraint_residual,
        passed: report.stationarity <= tol && report.constraint_residual <= CONSTRAINT_TOL,
    })
}

/// Audit every solved record of `run_file` against the config beside it.
pub fn audit(run_file: &Path) -> Result<Vec<AuditRow>> {
    let spec = load(&run_dir(run_file).join("config.toml"))?;
    let rows = read_csv(run_file, &RUN_COLUMNS)?;
    group(&rows)?
        .iter()
        .filter(|s| s.status.is_some_and(Status::solved))
        .map(|s| check(&spec, s, s.scheme.expect("set on creation")))
        .collect()
}
