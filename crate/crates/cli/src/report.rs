//! Result records, JSON-lines and CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use ipslab_core::harness::{LogFit, PowerFit, TrialStats};
use ipslab_core::protocols::ProtocolId;
use ipslab_core::provers::ProverSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Statistics of one (input, prover) case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub protocol: ProtocolId,
    pub input: String,
    pub n: u64,
    pub prover: ProverSpec,
    pub member: Option<bool>,
    pub correct_rate: Option<f64>,
    pub stats: TrialStats,
}

impl RunRecord {
    pub fn prover_json(&self) -> String {
        serde_json::to_string(&self.prover).expect("prover specs serialize")
    }
}

#[derive(Serialize)]
struct RunCsvRow<'a> {
    scenario: &'a str,
    protocol: &'a str,
    input: &'a str,
    n: u64,
    prover: String,
    member: Option<bool>,
    trials: u64,
    accepts: u64,
    rejects: u64,
    timeouts: u64,
    accept_rate: f64,
    accept_lo: f64,
    accept_hi: f64,
    reject_rate: f64,
    correct_rate: Option<f64>,
    mean_steps: f64,
    median_steps: u64,
    p90_steps: u64,
    max_steps: u64,
    mean_work_cells: f64,
    max_work_cells: u64,
    mean_prover_symbols: f64,
    sweeping_violations: u64,
    seed: u64,
}

pub fn runs_csv(records: &[RunRecord]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let s = &r.stats;
        w.serialize(RunCsvRow {
            scenario: &r.scenario,
            protocol: r.protocol.as_str(),
            input: &r.input,
            n: r.n,
            prover: r.prover_json(),
            member: r.member,
            trials: s.trials,
            accepts: s.accepts,
            rejects: s.rejects,
            timeouts: s.timeouts,
            accept_rate: s.accept_rate,
            accept_lo: s.accept_ci.0,
            accept_hi: s.accept_ci.1,
            reject_rate: s.reject_rate,
            correct_rate: r.correct_rate,
            mean_steps: s.mean_steps,
            median_steps: s.median_steps,
            p90_steps: s.p90_steps,
            max_steps: s.max_steps,
            mean_work_cells: s.mean_work_cells,
            max_work_cells: s.max_work_cells,
            mean_prover_symbols: s.mean_prover_symbols,
            sweeping_violations: s.sweeping_violations,
            seed: s.seed,
        })?;
    }
    finish_csv(w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub input: String,
    pub n: u64,
    pub trials: u64,
    pub timeouts: u64,
    pub accept_rate: f64,
    pub mean_steps: f64,
    pub max_steps: u64,
    pub mean_work_cells: f64,
    pub max_work_cells: u64,
}

/// Resource growth of one prover strategy across input sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scenario: String,
    pub protocol: ProtocolId,
    pub prover: ProverSpec,
    pub rows: Vec<SweepRow>,
    /// Mean steps against `n` on log-log axes.
    pub steps_fit: Option<PowerFit>,
    /// Max work cells against `ln n`.
    pub work_cells_fit: Option<LogFit>,
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    scenario: &'a str,
    protocol: &'a str,
    prover: String,
    input: &'a str,
    n: u64,
    trials: u64,
    timeouts: u64,
    accept_rate: f64,
    mean_steps: f64,
    max_steps: u64,
    mean_work_cells: f64,
    max_work_cells: u64,
    steps_exponent: Option<f64>,
    work_cells_log_slope: Option<f64>,
}

pub fn sweeps_csv(records: &[SweepRecord]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let prover = serde_json::to_string(&r.prover).expect("prover specs serialize");
        for row in &r.rows {
            w.serialize(SweepCsvRow {
                scenario: &r.scenario,
                protocol: r.protocol.as_str(),
                prover: prover.clone(),
                input: &row.input,
                n: row.n,
                trials: row.trials,
                timeouts: row.timeouts,
                accept_rate: row.accept_rate,
                mean_steps: row.mean_steps,
                max_steps: row.max_steps,
                mean_work_cells: row.mean_work_cells,
                max_work_cells: row.max_work_cells,
                steps_exponent: r.steps_fit.map(|f| f.exponent),
                work_cells_log_slope: r.work_cells_fit.map(|f| f.slope),
            })?;
        }
    }
    finish_csv(w)
}

pub fn finish_csv(w: csv::Writer<Vec<u8>>) -> CliResult<Vec<u8>> {
    w.into_inner()
        .map_err(|e| CliError::Csv(e.into_error().into()))
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<stem>.jsonl` and `<stem>.csv` into `out`, or the JSON lines
/// to stdout when no directory is given.
pub fn emit(out: Option<&Path>, stem: &str, jsonl: &str, csv: &[u8]) -> CliResult<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| CliError::Write {
                path: dir.to_path_buf(),
                source,
            })?;
            write_file(&dir.join(format!("{stem}.jsonl")), jsonl.as_bytes())?;
            write_file(&dir.join(format!("{stem}.csv")), csv)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(jsonl.as_bytes())
                .map_err(|source| CliError::Write {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// Run records from a JSON-lines file written by `run`.
pub fn read_run_records(path: &Path) -> CliResult<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Fixed-width table of run records.
pub fn render_table(records: &[RunRecord]) -> String {
    let mut rows = vec![[
        "scenario".to_string(),
        "input".into(),
        "prover".into(),
        "decided".into(),
        "accept".into(),
        "99% CI".into(),
        "timeouts".into(),
        "mean steps".into(),
    ]];
    for r in records {
        let s = &r.stats;
        rows.push([
            r.scenario.clone(),
            r.input.clone(),
            r.prover.id().to_string(),
            s.decided().to_string(),
            format!("{:.4}", s.accept_rate),
            format!("[{:.4}, {:.4}]", s.accept_ci.0, s.accept_ci.1),
            s.timeouts.to_string(),
            format!("{:.1}", s.mean_steps),
        ]);
    }
    let widths: Vec<usize> = (0..8)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
