//! Seeded Monte-Carlo sweeps over lambda or transmit power.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use ris_core::admm_sumrate::{run_alg2, SumRateTraceRow};
use ris_core::admm_wsinr::{run_alg1, TraceRow};
use ris_core::baselines::{
    dft_phase_ris, fixed_ris_sumrate, fixed_ris_wsinr, random_phase_ris, wmmse_no_ris, zf_no_ris,
    BaselineResult, Scheme,
};
use ris_core::channel::{make_channel_set, stream_rng, tags, ChannelSet};
use ris_core::system_model::{evaluate, mrt_precoders, QosReport, RisVector};
use ris_core::CVec;

use crate::config_file::{SweepKind, SweepSpec};
use crate::Result;

/// Outcome class of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    /// Converged, but the optimal power split serves one user only.
    SingleUser,
    Error(&'static str),
}

impl Status {
    /// Counted as solved in summaries.
    pub fn solved(self) -> bool {
        matches!(self, Status::Ok | Status::SingleUser)
    }

    pub fn parse(s: &str) -> Option<Status> {
        match s {
            "ok" => Some(Status::Ok),
            "not_converged" => Some(Status::NotConverged),
            "single_user" => Some(Status::SingleUser),
            _ => None,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::NotConverged => f.write_str("not_converged"),
            Status::SingleUser => f.write_str("single_user"),
            Status::Error(kind) => write!(f, "error:{kind}"),
        }
    }
}

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub kind: SweepKind,
    pub value: f64,
    pub lambda: f64,
    pub p_t: f64,
    pub status: Status,
    pub iterations: usize,
    pub qos: Option<QosReport>,
    pub stationarity: Option<f64>,
    pub constraint_residual: Option<f64>,
    pub elapsed_ms: f64,
}

impl TrialRecord {
    pub fn weighted_sinr(&self) -> Option<f64> {
        self.qos.map(|q| q.weighted_sinr(self.lambda))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceRows {
    Wsinr(Vec<TraceRow>),
    SumRate(Vec<SumRateTraceRow>),
}

/// Solver state kept for traces and audits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub x: Option<CVec>,
    /// Box multiplier (`mu`, or `mu1` of the sum-rate splitting).
    pub mu: Option<CVec>,
    pub z: Option<CVec>,
    pub trace: Option<TraceRows>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub record: TrialRecord,
    pub artifacts: Artifacts,
}

/// `(lambda, P_T)` used at one sweep value.
pub fn operating_point(spec: &SweepSpec, value: f64) -> (f64, f64) {
    match spec.kind {
        SweepKind::Lambda => (value, spec.base.p_t),
        SweepKind::Power => (spec.options.lambda, value),
    }
}

struct Solved {
    status: Status,
    iterations: usize,
    qos: QosReport,
    stationarity: Option<f64>,
    constraint_residual: Option<f64>,
    artifacts: Artifacts,
}

fn from_baseline(r: BaselineResult) -> Solved {
    Solved {
        status: Status::Ok,
        iterations: r.iterations,
        qos: r.qos,
        stationarity: None,
        constraint_residual: None,
        artifacts: Artifacts { x: r.x.map(|x| x.0), ..Artifacts::default() },
    }
}

fn solve(
    spec: &SweepSpec,
    cs: &ChannelSet,
    trial: u64,
    scheme: Scheme,
    lambda: f64,
    p_t: f64,
) -> ris_core::Result<Solved> {
    let base = &spec.base;
    let s2 = base.sigma2;
    let tol = spec.options.baseline_tol;
    let fixed = |x: RisVector| match spec.kind {
        SweepKind::Lambda => fixed_ris_wsinr(cs, &x, lambda, s2, s2, tol, scheme),
        SweepKind::Power => fixed_ris_sumrate(cs, &x, p_t, s2, s2, tol, scheme),
    };
    Ok(match scheme {
        Scheme::RisOptWsinr => {
            let mut rng = stream_rng(base.seed, trial, tags::ADMM_INIT);
            let out = run_alg1(cs, lambda, &base.admm, &mut rng)?;
            let half = 0.5f64.sqrt();
            let prec = mrt_precoders(cs, &out.x, half, half, p_t)?;
            let qos = evaluate(cs, &prec, &out.x, s2, s2)?;
            Solved {
                status: if out.state.converged { Status::Ok } else { Status::NotConverged },
                iterations: out.state.k,
                qos,
                stationarity: Some(out.kkt.stationarity),
                constraint_residual: Some(out.kkt.constraint_residual),
                artifacts: Artifacts {
                    x: Some(out.x.0.clone()),
                    mu: Some(out.state.mu.clone()),
                    z: None,
                    trace: Some(TraceRows::Wsinr(out.state.trace)),
                },
            }
        }
        Scheme::RisOptSumrate => {
            let mut rng = stream_rng(base.seed, trial, tags::ADMM_INIT);
            let out = run_alg2(cs, p_t, s2, s2, &base.admm_sumrate, &mut rng)?;
            let status = match (out.state.converged, out.single_user()) {
                (false, _) => Status::NotConverged,
                (true, Some(_)) => Status::SingleUser,
                (true, None) => Status::Ok,
            };
            Solved {
                status,
                iterations: out.state.k,
                qos: out.qos,
                stationarity: Some(out.kkt.stationarity),
                constraint_residual: Some(out.kkt.constraint_residual),
                artifacts: Artifacts {
                    x: Some(out.x.0.clone()),
                    mu: Some(out.state.mu1.clone()),
                    z: Some(out.state.z.clone()),
                    trace: Some(TraceRows::SumRate(out.state.trace)),
                },
            }
        }
        Scheme::RisRandom => {
            let mut rng = stream_rng(base.seed, trial, tags::RANDOM_PHASE);
            from_baseline(fixed(random_phase_ris(cs.n(), &mut rng))?)
        }
        Scheme::RisDft => from_baseline(fixed(dft_phase_ris(cs.n(), cs.m())?)?),
        Scheme::NoRisZf => from_baseline(zf_no_ris(cs, p_t, s2, s2)?),
        Scheme::NoRisWmmse => {
            from_baseline(wmmse_no_ris(cs, p_t, s2, s2, spec.options.wmmse_iters)?)
        }
    })
}

/// Run one `(value, trial, scheme)` cell. Solver failures become records
/// with an error status.
pub fn run_trial(spec: &SweepSpec, value: f64, trial: u64, scheme: Scheme) -> TrialOutput {
    let (lambda, p_t) = operating_point(spec, value);
    let start = Instant::now();
    let solved = make_channel_set(&spec.base, trial)
        .and_then(|cs| solve(spec, &cs, trial, scheme, lambda, p_t));
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut record = TrialRecord {
        trial,
        seed: spec.base.seed,
        scheme,
        kind: spec.kind,
        value,
        lambda,
        p_t,
        status: Status::NotConverged,
        iterations: 0,
        qos: None,
        stationarity: None,
        constraint_residual: None,
        elapsed_ms,
    };
    match solved {
        Ok(s) => {
            record.status = s.status;
            record.iterations = s.iterations;
            record.qos = Some(s.qos);
            record.stationarity = s.stationarity;
            record.constraint_residual = s.constraint_residual;
            TrialOutput { record, artifacts: s.artifacts }
        }
        Err(e) => {
            log::warn!("trial {trial} {scheme} at {value:e}: {e}");
            record.status = Status::Error(e.kind());
            TrialOutput { record, artifacts: Artifacts::default() }
        }
    }
}

/// Every `(value, trial, scheme)` cell, in value-major, then trial, then
/// scheme order regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<TrialOutput>> {
    spec.validate()?;
    let jobs: Vec<(f64, u64, Scheme)> = spec
        .values
        .iter()
        .flat_map(|&v| {
            (0..spec.trials as u64)
                .flat_map(move |t| spec.schemes.iter().map(move |&s| (v, t, s)))
        })
        .collect();
    Ok(jobs.into_par_iter().map(|(v, t, s)| run_trial(spec, v, t, s)).collect())
}

/// Mean and standard deviation of one column over solved records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    /// Population moments; NaN for an empty sample.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub kind: SweepKind,
    pub value: f64,
    pub scheme: Scheme,
    pub trials: usize,
    pub solved: usize,
    pub sum_rate: Moments,
    pub weighted_sinr: Moments,
    pub sinr1: Moments,
    pub sinr2: Moments,
}

/// Per `(value, scheme)` statistics in first-appearance order. Means
/// exclude records that are not solved.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(u64, Scheme)> = Vec::new();
    for r in records {
        let key = (r.value.to_bits(), r.scheme);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(bits, scheme)| {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.value.to_bits() == bits && r.scheme == scheme)
                .collect();
            let solved: Vec<&TrialRecord> =
                cell.iter().copied().filter(|r| r.status.solved() && r.qos.is_some()).collect();
            let column = |f: &dyn Fn(&TrialRecord) -> f64| -> Moments {
                Moments::of(&solved.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            SummaryRow {
                kind: cell[0].kind,
                value: f64::from_bits(bits),
                scheme,
                trials: cell.len(),
                solved: solved.len(),
                sum_rate: column(&|r| r.qos.map_or(f64::NAN, |q| q.sum_rate)),
                weighted_sinr: column(&|r| r.weighted_sinr().unwrap_or(f64::NAN)),
                sinr1: column(&|r| r.qos.map_or(f64::NAN, |q| q.sinr1)),
                sinr2: column(&|r| r.qos.map_or(f64::NAN, |q| q.sinr2)),
            }
        })
        .collect()
}
