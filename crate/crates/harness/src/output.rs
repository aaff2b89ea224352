//! CSV artifacts of a run directory.
//!
//! * `records.csv`: one row per `(value, trial, scheme)`, columns
//!   [`RECORD_COLUMNS`]. Byte-deterministic for a given config and seed.
//! * `summary.csv`: per `(value, scheme)` statistics, columns
//!   [`SUMMARY_COLUMNS`]; means and standard deviations (population) over
//!   solved records, `NaN` when none solved.
//! * `run.csv`: long-format solver state for audits, columns
//!   [`RUN_COLUMNS`]; `field` is `x`, `mu` or `z`.
//! * `timing.csv`: wall-clock milliseconds per record.
//! * `trace_<trial>.csv`: per-iteration rows of the ADMM schemes, columns
//!   [`TRACE_COLUMNS`]; weighted-SINR rows leave the `z_*` and `rho2`
//!   cells empty.
//! * `config.toml`: the effective configuration.
//!
//! Every CSV starts with the line `# schema=1`. Numbers are written in
//! shortest round-trip scientific notation; absent values are empty cells.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config_file::{render, SweepSpec};
use crate::sweep::{summarize, TraceRows, TrialOutput, TrialRecord};
use crate::{HarnessError, Result};

pub const SCHEMA_LINE: &str = "# schema=1";

pub const RECORD_COLUMNS: [&str; 20] = [
    "trial",
    "seed",
    "scheme",
    "sweep",
    "value",
    "lambda",
    "p_t",
    "status",
    "iterations",
    "sinr1",
    "sinr2",
    "rate1",
    "rate2",
    "sum_rate",
    "weighted_sinr",
    "interference1",
    "interference2",
    "orthogonality_residual",
    "stationarity",
    "constraint_residual",
];

pub const SUMMARY_COLUMNS: [&str; 13] = [
    "sweep",
    "value",
    "scheme",
    "trials",
    "solved",
    "mean_sum_rate",
    "std_sum_rate",
    "mean_weighted_sinr",
    "std_weighted_sinr",
    "mean_sinr1",
    "std_sinr1",
    "mean_sinr2",
    "std_sinr2",
];

pub const RUN_COLUMNS: [&str; 8] = ["trial", "scheme", "value", "status", "field", "index", "re", "im"];

pub const TRACE_COLUMNS: [&str; 11] = [
    "scheme",
    "value",
    "k",
    "objective",
    "xy_gap",
    "z_gap",
    "y_step",
    "z_step",
    "rho1",
    "rho2",
    "branch",
];

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.to_path_buf(), source }
}

/// Write `rows` under the schema line and `header` to any sink.
pub fn write_csv<W: Write>(
    mut sink: W,
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    writeln!(sink, "{SCHEMA_LINE}").map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_csv(BufWriter::new(file), path, header, rows)
}

pub fn record_row(r: &TrialRecord) -> Vec<String> {
    let q = r.qos;
    vec![
        r.trial.to_string(),
        r.seed.to_string(),
        r.scheme.tag().to_string(),
        r.kind.tag().to_string(),
        num(r.value),
        num(r.lambda),
        num(r.p_t),
        r.status.to_string(),
        r.iterations.to_string(),
        opt(q.map(|q| q.sinr1)),
        opt(q.map(|q| q.sinr2)),
        opt(q.map(|q| q.rate1)),
        opt(q.map(|q| q.rate2)),
        opt(q.map(|q| q.sum_rate)),
        opt(r.weighted_sinr()),
        opt(q.map(|q| q.interference1)),
        opt(q.map(|q| q.interference2)),
        opt(q.map(|q| q.orthogonality_residual)),
        opt(r.stationarity),
        opt(r.constraint_residual),
    ]
}

/// `records.csv` content for a record list.
pub fn records_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, Path::new("records.csv"), &RECORD_COLUMNS, records.iter().map(record_row))?;
    Ok(buf)
}

fn summary_rows(records: &[TrialRecord]) -> Vec<Vec<String>> {
    summarize(records)
        .into_iter()
        .map(|s| {
            vec![
                s.kind.tag().to_string(),
                num(s.value),
                s.scheme.tag().to_string(),
                s.trials.to_string(),
                s.solved.to_string(),
                num(s.sum_rate.mean),
                num(s.sum_rate.std),
                num(s.weighted_sinr.mean),
                num(s.weighted_sinr.std),
                num(s.sinr1.mean),
                num(s.sinr1.std),
                num(s.sinr2.mean),
                num(s.sinr2.std),
            ]
        })
        .collect()
}

fn run_rows(outputs: &[TrialOutput]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for o in outputs.iter().filter(|o| o.record.scheme.tag().starts_with("ris_opt")) {
        let r = &o.record;
        let a = &o.artifacts;
        for (field, v) in [("x", &a.x), ("mu", &a.mu), ("z", &a.z)] {
            let Some(v) = v else { continue };
            for (i, c) in v.iter().enumerate() {
                rows.push(vec![
                    r.trial.to_string(),
                    r.scheme.tag().to_string(),
                    num(r.value),
                    r.status.to_string(),
                    field.to_string(),
                    i.to_string(),
                    num(c.re),
                    num(c.im),
                ]);
            }
        }
    }
    rows
}

fn trace_rows(o: &TrialOutput) -> Vec<Vec<String>> {
    let scheme = o.record.scheme.tag().to_string();
    let value = num(o.record.value);
    match &o.artifacts.trace {
        None => Vec::new(),
        Some(TraceRows::Wsinr(rows)) => rows
            .iter()
            .map(|t| {
                vec![
                    scheme.clone(),
                    value.clone(),
                    t.k.to_string(),
                    num(t.objective),
                    num(t.primal_gap),
                    String::new(),
                    num(t.dual_gap),
                    String::new(),
                    num(t.rho),
                    String::new(),
                    t.branch.to_string(),
                ]
            })
            .collect(),
        Some(TraceRows::SumRate(rows)) => rows
            .iter()
            .map(|t| {
                vec![
                    scheme.clone(),
                    value.clone(),
                    t.k.to_string(),
                    num(t.objective_ap),
                    num(t.xy_gap),
                    num(t.z_gap),
                    num(t.y_step),
                    num(t.z_step),
                    num(t.rho1),
                    num(t.rho2),
                    t.branch.to_string(),
                ]
            })
            .collect(),
    }
}

/// Write every artifact of a finished sweep into `dir`.
pub fn write_run(dir: &Path, spec: &SweepSpec, outputs: &[TrialOutput], traces: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let records: Vec<TrialRecord> = outputs.iter().map(|o| o.record.clone()).collect();
    let path = dir.join("records.csv");
    std::fs::write(&path, records_csv(&records)?).map_err(io_err(&path))?;
    write_file(&dir.join("summary.csv"), &SUMMARY_COLUMNS, summary_rows(&records))?;
    write_file(&dir.join("run.csv"), &RUN_COLUMNS, run_rows(outputs))?;
    write_file(
        &dir.join("timing.csv"),
        &["trial", "scheme", "value", "elapsed_ms"],
        records.iter().map(|r| {
            vec![r.trial.to_string(), r.scheme.tag().to_string(), num(r.value), num(r.elapsed_ms)]
        }),
    )?;
    let path = dir.join("config.toml");
    std::fs::write(&path, render(spec)).map_err(io_err(&path))?;
    if traces {
        for trial in 0..spec.trials as u64 {
            let rows: Vec<Vec<String>> = outputs
                .iter()
                .filter(|o| o.record.trial == trial)
                .flat_map(trace_rows)
                .collect();
            if !rows.is_empty() {
                write_file(&dir.join(format!("trace_{trial}.csv")), &TRACE_COLUMNS, rows)?;
            }
        }
    }
    Ok(())
}

/// Open a harness CSV, skipping the schema line, and check its header.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let found = reader.headers().map_err(csv_err(path))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(HarnessError::RunFile(format!(
            "{}: unexpected header {:?}",
            path.display(),
            found.iter().collect::<Vec<_>>()
        )));
    }
    reader.records().map(|r| r.map_err(csv_err(path))).collect()
}

/// The directory holding a run file.
pub fn run_dir(run_file: &Path) -> PathBuf {
    run_file.parent().map(Path::to_path_buf).unwrap_or_default()
}
