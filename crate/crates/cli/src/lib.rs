//! The `ipslab` command line: run scenarios, sweep input sizes, calibrate
//! fingerprint widths, summarize results and check assertion suites.

pub mod config;
pub mod error;
pub mod generators;
pub mod report;
pub mod suite;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ipslab_core::fingerprint::{calibrate_c, calibration_table, ratio_to_f64};
use ipslab_core::harness::run_trials;
use ipslab_core::protocols::ratio_string;
use serde::{Deserialize, Serialize};

use crate::config::{read_json, Overrides, ScenarioConfig};
use crate::error::{CliError, CliResult, EXIT_ASSERTION};
use crate::report::{
    emit, finish_csv, read_run_records, render_table, runs_csv, sweeps_csv, to_jsonl, RunRecord,
};
use crate::suite::{derive_seed, AssertionResult, Status, Suite};

#[derive(Debug, Parser)]
#[command(
    name = "ipslab",
    version,
    about = "Simulate space-bounded interactive proof protocols"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Base seed; overrides the one in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per case; overrides the config.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Step limit per run; overrides the config budget.
    #[arg(long = "budget-steps")]
    pub budget_steps: Option<u64>,
    /// Worker threads (0 or absent: one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory for JSON-lines and CSV results.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            budget_steps: self.budget_steps,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every (input, prover) case of a scenario config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit step and work-cell growth over the inputs of a scenario.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run an assertion suite; exits 1 if any assertion fails.
    Check {
        /// Suite file, or the name of a suite under `suites/`.
        #[arg(required_unless_present = "config")]
        suite: Option<String>,
        #[arg(long, conflicts_with = "suite")]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Smallest fingerprint width constant for a collision bound.
    Calibrate {
        /// JSON file with `m`, `epsilon` and optionally `c_max`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bit length of the compared numbers.
        #[arg(long)]
        m: Option<u32>,
        /// Collision bound, e.g. `1/8`.
        #[arg(long)]
        epsilon: Option<String>,
        /// Largest width constant tabulated.
        #[arg(long = "c-max")]
        c_max: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a table of the records written by `run`.
    Report {
        file: PathBuf,
        /// Also write `report.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command, returning the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ipslab: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Run { config, common } => cmd_run(&config, &common).map(|_| 0),
        Command::Sweep { config, common } => cmd_sweep(&config, &common).map(|_| 0),
        Command::Check {
            suite,
            config,
            common,
        } => {
            let path = match (config, suite) {
                (Some(p), _) => p,
                (None, Some(name)) => resolve_suite(&name)?,
                (None, None) => return Err(CliError::Config("no suite given".into())),
            };
            cmd_check(&path, &common)
        }
        Command::Calibrate {
            config,
            m,
            epsilon,
            c_max,
            out,
        } => cmd_calibrate(config.as_deref(), m, epsilon, c_max, out.as_deref()).map(|_| 0),
        Command::Report { file, out } => cmd_report(&file, out.as_deref()).map(|_| 0),
    }
}

/// A path to an existing file, or `suites/<name>.json` under the working
/// directory or the workspace.
pub fn resolve_suite(name: &str) -> CliResult<PathBuf> {
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return Ok(direct);
    }
    let file = format!("{name}.json");
    let candidates = [
        PathBuf::from("suites").join(&file),
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../suites")
            .join(&file),
    ];
    candidates.into_iter().find(|p| p.is_file()).ok_or_else(|| {
        CliError::Config(format!(
            "no suite file {name:?} (also looked for suites/{file})"
        ))
    })
}

fn cmd_run(path: &Path, common: &CommonArgs) -> CliResult<()> {
    let o = common.overrides();
    let cfg: ScenarioConfig = read_json(path)?;
    let cases = cfg.cases(&o)?;
    let trials = cfg.trials(&o)?;
    let seed = o.seed.or(cfg.seed).unwrap_or(0);
    let mut records = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let stats = run_trials(
            &case.plan,
            trials,
            derive_seed(seed, i as u64),
            o.workers.unwrap_or(0),
        )?;
        let correct_rate = case.member.map(|m| {
            if m {
                stats.accept_rate
            } else {
                stats.reject_rate
            }
        });
        records.push(RunRecord {
            scenario: cfg.label(),
            protocol: cfg.protocol,
            input: case.input_label.clone(),
            n: case.plan.input.len() as u64,
            prover: case.plan.prover.clone(),
            member: case.member,
            correct_rate,
            stats,
        });
    }
    emit(
        common.out.as_deref(),
        "runs",
        &to_jsonl(&records),
        &runs_csv(&records)?,
    )?;
    if common.out.is_some() {
        let _ = write!(std::io::stdout(), "{}", render_table(&records));
    }
    Ok(())
}

fn cmd_sweep(path: &Path, common: &CommonArgs) -> CliResult<()> {
    let o = common.overrides();
    let cfg: ScenarioConfig = read_json(path)?;
    for group in suite::group_by_prover(cfg.cases(&o)?) {
        if group.len() < 3 {
            return Err(CliError::Config(
                "a sweep needs at least three input sizes per prover".into(),
            ));
        }
    }
    let seed = o.seed.or(cfg.seed).unwrap_or(0);
    let records = suite::sweep(&cfg, seed, o.workers.unwrap_or(0), &o)?;
    emit(
        common.out.as_deref(),
        "sweep",
        &to_jsonl(&records),
        &sweeps_csv(&records)?,
    )?;
    if common.out.is_some() {
        for r in &records {
            let exp = r
                .steps_fit
                .map_or("n/a".to_string(), |f| format!("{:.3}", f.exponent));
            let _ = writeln!(
                std::io::stdout(),
                "{} {}: steps exponent {exp}",
                r.scenario,
                r.prover.id()
            );
        }
    }
    Ok(())
}

fn check_csv(results: &[AssertionResult]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(r)?;
    }
    finish_csv(w)
}

fn cmd_check(path: &Path, common: &CommonArgs) -> CliResult<i32> {
    let o = common.overrides();
    let suite: Suite = read_json(path)?;
    suite.validate(&o)?;
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut stdout = std::io::stdout();
    for (i, check) in suite.checks.iter().enumerate() {
        let report = suite::run_check(check, suite.check_seed(i, &o), &o)?;
        for r in &report.results {
            let _ = writeln!(stdout, "{r}");
        }
        let _ = stdout.flush();
        reports.push(report);
    }
    let results: Vec<AssertionResult> = reports.iter().flat_map(|r| r.results.clone()).collect();
    let tally = |s: Status| results.iter().filter(|r| r.status == s).count();
    let (pass, fail, skip) = (
        tally(Status::Pass),
        tally(Status::Fail),
        tally(Status::Skip),
    );
    let _ = writeln!(
        std::io::stdout(),
        "suite {}: {pass} passed, {fail} failed, {skip} skipped in {:.1} s",
        suite.name,
        start.elapsed().as_secs_f64()
    );
    if let Some(dir) = &common.out {
        emit(
            Some(dir),
            "check",
            &to_jsonl(&reports),
            &check_csv(&results)?,
        )?;
    }
    Ok(if fail > 0 { EXIT_ASSERTION } else { 0 })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrateConfig {
    m: u32,
    epsilon: String,
    #[serde(default)]
    c_max: Option<u32>,
}

#[derive(Debug, Serialize)]
struct CalibrationRecord {
    m: u32,
    epsilon: String,
    c: u32,
    ratio: String,
    ratio_value: f64,
    table: Vec<CalibrationRowRecord>,
}

#[derive(Debug, Serialize)]
struct CalibrationRowRecord {
    c: u32,
    prime_bound: u64,
    primes_in_range: u64,
    worst_divisors: u64,
    ratio: String,
    ratio_value: f64,
}

fn cmd_calibrate(
    config: Option<&Path>,
    m: Option<u32>,
    epsilon: Option<String>,
    c_max: Option<u32>,
    out: Option<&Path>,
) -> CliResult<()> {
    let file: Option<CalibrateConfig> = config.map(read_json).transpose()?;
    let m = m
        .or(file.as_ref().map(|f| f.m))
        .ok_or_else(|| CliError::Config("calibrate needs --m or a config".into()))?;
    let epsilon_text = epsilon
        .or(file.as_ref().map(|f| f.epsilon.clone()))
        .ok_or_else(|| CliError::Config("calibrate needs --epsilon or a config".into()))?;
    let epsilon = ratio_string::parse(&epsilon_text).map_err(CliError::Config)?;
    let cal = calibrate_c(m, epsilon)?;
    let c_max = c_max.or(file.and_then(|f| f.c_max)).unwrap_or(cal.c);
    let table = calibration_table(m, c_max)?;
    let fmt_ratio = |r: num_rational::Ratio<u64>| format!("{}/{}", r.numer(), r.denom());
    let rows: Vec<CalibrationRowRecord> = table
        .iter()
        .map(|row| CalibrationRowRecord {
            c: row.c,
            prime_bound: row.prime_bound,
            primes_in_range: row.primes_in_range,
            worst_divisors: row.worst_divisors,
            ratio: fmt_ratio(row.ratio()),
            ratio_value: ratio_to_f64(row.ratio()),
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let csv = finish_csv(w)?;
    let record = CalibrationRecord {
        m,
        epsilon: fmt_ratio(epsilon),
        c: cal.c,
        ratio: fmt_ratio(cal.ratio),
        ratio_value: ratio_to_f64(cal.ratio),
        table: rows,
    };
    emit(out, "calibration", &to_jsonl(&[record]), &csv)?;
    if out.is_some() {
        let _ = writeln!(
            std::io::stdout(),
            "m = {m}, epsilon = {epsilon_text}: c = {}",
            cal.c
        );
    }
    Ok(())
}

fn cmd_report(file: &Path, out: Option<&Path>) -> CliResult<()> {
    let records = read_run_records(file)?;
    if records.is_empty() {
        return Err(CliError::Config(format!(
            "{} has no records",
            file.display()
        )));
    }
    let _ = write!(std::io::stdout(), "{}", render_table(&records));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join("report.csv");
        std::fs::write(&path, runs_csv(&records)?)
            .map_err(|source| CliError::Write { path, source })?;
    }
    Ok(())
}
