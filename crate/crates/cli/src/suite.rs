//! Assertion suites: named checks, each running one experiment and
//! testing its metrics against bounds or exact oracles.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use ipslab_core::coins::{prob_value, DEFAULT_TOSS_BUDGET};
use ipslab_core::harness::{
    digit_probability, exact_upower64_acceptance, exact_usquare_acceptance,
    exhaustive_tape_detection, fit_log_linear, fit_power_law, four_counter_trials,
    membership_bit_trials, run_trials, slack, weak_ips_estimator, SLACK_CONFIDENCE,
};
use ipslab_core::langspace::{lex_rank, LanguageSpec};
use ipslab_core::protocols::{ProtocolId, ProtocolParams};
use ipslab_core::provers::ProverSpec;
use ipslab_core::runtime::ResourceBudget;
use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{word_label, Case, InputSpec, Overrides, ProverChoice, ScenarioConfig};
use crate::error::{CliError, CliResult};
use crate::report::{SweepRecord, SweepRow};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub checks: Vec<Check>,
}

fn default_r() -> u32 {
    1
}

fn default_toss_budget() -> u64 {
    DEFAULT_TOSS_BUDGET
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipBitCheck {
    pub language: LanguageSpec,
    pub k: Vec<u32>,
    pub trials: u64,
    #[serde(default = "default_toss_budget")]
    pub toss_budget: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourCounterCheck {
    pub language: LanguageSpec,
    pub input: InputSpec,
    pub trials: u64,
    #[serde(default = "default_r")]
    pub r: u32,
    #[serde(default)]
    pub budget: ResourceBudget,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakCheck {
    pub language: LanguageSpec,
    pub input: InputSpec,
    #[serde(default)]
    pub prover: ProverChoice,
    #[serde(default = "default_y", with = "ipslab_core::protocols::ratio_string")]
    pub y: Ratio<u64>,
    pub paths: u64,
    #[serde(default)]
    pub budget: ResourceBudget,
}

fn default_y() -> Ratio<u64> {
    ProtocolParams::default().y
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapeCheck {
    pub input: InputSpec,
    pub q: u64,
    #[serde(default)]
    pub prover: ProverChoice,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    /// Thread count for this check, overriding `--workers`.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub trials: Option<ScenarioConfig>,
    #[serde(default)]
    pub scaling: Option<ScenarioConfig>,
    #[serde(default)]
    pub membership_bit: Option<MembershipBitCheck>,
    #[serde(default)]
    pub four_counter: Option<FourCounterCheck>,
    #[serde(default)]
    pub weak_estimator: Option<WeakCheck>,
    #[serde(default)]
    pub tape_enumeration: Option<TapeCheck>,
    pub assert: Vec<Assertion>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Trials,
    Scaling,
    MembershipBit,
    FourCounter,
    Weak,
    Tape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    AcceptRate,
    RejectRate,
    CorrectRate,
    Accepts,
    Rejects,
    Timeouts,
    Decided,
    SweepingViolations,
    MaxWorkCells,
    MeanSteps,
    MaxSteps,
    Seconds,
    StepsExponent,
    StepsRSquared,
    WorkCellsLogSlope,
    WorkCellsLogRSquared,
    DigitMismatches,
    ConditionalAccept,
    ConditionalReject,
    XPrimeRate,
    BalancedFraction,
    AffectedFraction,
    MinAffectedRatio,
    OutrightRejects,
    Detection,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("metric names serialize");
        f.write_str(v.as_str().expect("unit variant"))
    }
}

impl Kind {
    fn metrics(self) -> &'static [Metric] {
        use Metric::*;
        match self {
            Kind::Trials => &[
                AcceptRate,
                RejectRate,
                CorrectRate,
                Accepts,
                Rejects,
                Timeouts,
                Decided,
                SweepingViolations,
                MaxWorkCells,
                MeanSteps,
                MaxSteps,
                Seconds,
            ],
            Kind::Scaling => &[
                StepsExponent,
                StepsRSquared,
                WorkCellsLogSlope,
                WorkCellsLogRSquared,
                Timeouts,
                Seconds,
            ],
            Kind::MembershipBit => &[CorrectRate, Seconds],
            Kind::FourCounter => &[CorrectRate, AcceptRate, Timeouts, DigitMismatches, Seconds],
            Kind::Weak => &[
                ConditionalAccept,
                ConditionalReject,
                XPrimeRate,
                BalancedFraction,
                AffectedFraction,
                MinAffectedRatio,
                OutrightRejects,
                Timeouts,
                Seconds,
            ],
            Kind::Tape => &[Detection, Seconds],
        }
    }

    fn oracles(self) -> &'static [(Oracle, Metric)] {
        match self {
            Kind::Trials => &[(Oracle::ExactAcceptance, Metric::AcceptRate)],
            Kind::MembershipBit | Kind::FourCounter => {
                &[(Oracle::DigitProbability, Metric::CorrectRate)]
            }
            Kind::Weak => &[
                (Oracle::DigitProbability, Metric::XPrimeRate),
                (Oracle::DigitLottery, Metric::ConditionalAccept),
            ],
            Kind::Scaling | Kind::Tape => &[],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Oracle {
    /// Exact acceptance probability of a finite certificate.
    ExactAcceptance,
    /// Probability that the head-count digit equals the expected bit.
    DigitProbability,
    /// Digit probability scaled by the lottery factor `1 / (1 + y)`.
    DigitLottery,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "within")]
    Within,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Ge => ">=",
            Op::Gt => ">",
            Op::Le => "<=",
            Op::Lt => "<",
            Op::Eq => "==",
            Op::Within => "within",
        })
    }
}

/// A bound written as `"3/16"`, `"0.73"` or a JSON number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "String")]
pub struct Bound {
    pub text: String,
    pub exact: BigRational,
}

impl Bound {
    pub fn value(&self) -> f64 {
        self.exact.to_f64().unwrap_or(f64::NAN)
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, scale);
    Some(if neg { -r } else { r })
}

impl TryFrom<Value> for Bound {
    type Error = String;

    fn try_from(v: Value) -> Result<Self, String> {
        let text = match &v {
            Value::String(s) => s.trim().to_string(),
            Value::Number(n) => n.to_string(),
            _ => {
                return Err(format!(
                    "bound must be a number or a string like \"3/16\", got {v}"
                ))
            }
        };
        let exact = match text.split_once('/') {
            Some((n, d)) => {
                let n = parse_decimal(n.trim()).ok_or_else(|| format!("bad bound {text:?}"))?;
                let d = parse_decimal(d.trim()).ok_or_else(|| format!("bad bound {text:?}"))?;
                if d.is_zero() {
                    return Err(format!("zero denominator in {text:?}"));
                }
                n / d
            }
            None => parse_decimal(&text).ok_or_else(|| format!("bad bound {text:?}"))?,
        };
        Ok(Bound { text, exact })
    }
}

impl From<Bound> for String {
    fn from(b: Bound) -> String {
        b.text
    }
}

fn default_sigmas() -> f64 {
    3.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub metric: Metric,
    pub op: Op,
    #[serde(default)]
    pub bound: Option<Bound>,
    /// Loosen the bound by the half-width of the metric's 99% interval.
    #[serde(default)]
    pub slack: bool,
    #[serde(default)]
    pub oracle: Option<Oracle>,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

impl Assertion {
    fn describe(&self) -> String {
        match (&self.oracle, &self.bound) {
            (Some(o), _) => format!(
                "{} within {}σ of {}",
                self.metric,
                self.sigmas,
                serde_json::to_value(o)
                    .expect("oracle names serialize")
                    .as_str()
                    .unwrap_or("oracle")
            ),
            (None, Some(b)) if self.op == Op::Within => {
                format!("{} within {}σ of {}", self.metric, self.sigmas, b.text)
            }
            (None, Some(b)) if self.slack => {
                let sign = if matches!(self.op, Op::Le | Op::Lt) {
                    "+"
                } else {
                    "-"
                };
                format!("{} {} {} {sign} slack", self.metric, self.op, b.text)
            }
            (None, Some(b)) => format!("{} {} {}", self.metric, self.op, b.text),
            (None, None) => format!("{} {}", self.metric, self.op),
        }
    }
}

/// A measured metric.
#[derive(Clone, Debug, Default)]
struct Observation {
    value: f64,
    exact: Option<BigRational>,
    /// Half-width of the 99% interval, when the metric is an estimate.
    slack: Option<f64>,
    /// Sample size behind a binomial rate.
    trials: Option<u64>,
}

fn plain(value: f64) -> Observation {
    Observation {
        value,
        ..Observation::default()
    }
}

fn count(value: u64) -> Observation {
    Observation {
        value: value as f64,
        exact: Some(BigRational::from_integer(value.into())),
        ..Observation::default()
    }
}

fn rate(successes: u64, trials: u64) -> Observation {
    Observation {
        value: if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        },
        exact: None,
        slack: Some(slack(successes, trials)),
        trials: Some(trials),
    }
}

fn exact(r: BigRational) -> Observation {
    Observation {
        value: r.to_f64().unwrap_or(f64::NAN),
        exact: Some(r),
        ..Observation::default()
    }
}

/// Expected value and standard error of a metric under an oracle.
#[derive(Clone, Copy, Debug)]
struct OracleTarget {
    expected: f64,
    sigma: f64,
}

fn binomial_target(p: f64, n: u64) -> OracleTarget {
    OracleTarget {
        expected: p,
        sigma: if n == 0 {
            f64::INFINITY
        } else {
            (p * (1.0 - p) / n as f64).sqrt()
        },
    }
}

/// One evaluated unit of a check, such as a single (input, prover) case.
struct Subject {
    label: String,
    metrics: BTreeMap<Metric, Observation>,
    oracles: BTreeMap<Oracle, OracleTarget>,
    details: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub check: String,
    pub subject: String,
    pub assertion: String,
    pub status: Status,
    pub observed: Option<f64>,
    /// The value the observation was compared against, after slack.
    pub threshold: Option<f64>,
    pub slack: Option<f64>,
    pub note: Option<String>,
}

impl fmt::Display for AssertionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        write!(
            f,
            "{status} {} [{}] {}",
            self.check, self.subject, self.assertion
        )?;
        if let Some(o) = self.observed {
            write!(f, ": observed {o:.6}")?;
        }
        if let Some(t) = self.threshold {
            write!(f, ", threshold {t:.6}")?;
        }
        if let Some(note) = &self.note {
            write!(f, " ({note})")?;
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of item `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix(base ^ splitmix(index.wrapping_add(1)))
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Check {
    pub fn kind(&self) -> CliResult<Kind> {
        let kinds = [
            (self.trials.is_some(), Kind::Trials),
            (self.scaling.is_some(), Kind::Scaling),
            (self.membership_bit.is_some(), Kind::MembershipBit),
            (self.four_counter.is_some(), Kind::FourCounter),
            (self.weak_estimator.is_some(), Kind::Weak),
            (self.tape_enumeration.is_some(), Kind::Tape),
        ];
        let set: Vec<Kind> = kinds.iter().filter(|k| k.0).map(|k| k.1).collect();
        match set.as_slice() {
            [k] => Ok(*k),
            [] => Err(config(format!(
                "check {:?} has no experiment (trials, scaling, membership_bit, four_counter, weak_estimator or tape_enumeration)",
                self.name
            ))),
            _ => Err(config(format!("check {:?} has more than one experiment", self.name))),
        }
    }

    /// Static validation of the check and its assertions.
    pub fn validate(&self, o: &Overrides) -> CliResult<Kind> {
        let kind = self.kind()?;
        let at = |msg: String| config(format!("check {:?}: {msg}", self.name));
        if self.assert.is_empty() {
            return Err(at("no assertions".into()));
        }
        for a in &self.assert {
            if !kind.metrics().contains(&a.metric) {
                return Err(at(format!(
                    "metric {} does not apply to this experiment",
                    a.metric
                )));
            }
            match (&a.oracle, &a.bound, a.op) {
                (Some(oracle), None, Op::Within) => {
                    if !kind.oracles().contains(&(*oracle, a.metric)) {
                        return Err(at(format!("oracle {oracle:?} does not apply to {}", a.metric)));
                    }
                    if a.sigmas.is_nan() || a.sigmas <= 0.0 {
                        return Err(at("sigmas must be positive".into()));
                    }
                }
                (None, Some(_), op) if op != Op::Within => {}
                (None, Some(_), Op::Within) if binomial_rate(a.metric) => {
                    if a.slack {
                        return Err(at("\"within\" takes sigmas, not slack".into()));
                    }
                }
                _ => {
                    return Err(at(
                        "an assertion needs a bound, or op \"within\" with an oracle or with a bound on a rate".into(),
                    ))
                }
            }
            let estimate = matches!(
                a.metric,
                Metric::AcceptRate
                    | Metric::RejectRate
                    | Metric::CorrectRate
                    | Metric::XPrimeRate
                    | Metric::ConditionalAccept
                    | Metric::ConditionalReject
            );
            if a.slack && !estimate {
                return Err(at(format!("slack does not apply to {}", a.metric)));
            }
        }
        let positive = |n: u64, what: &str| {
            if o.trials.unwrap_or(n) == 0 {
                Err(at(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        match kind {
            Kind::Trials | Kind::Scaling => {
                let s = self
                    .trials
                    .as_ref()
                    .or(self.scaling.as_ref())
                    .expect("kind checked");
                s.trials(o)?;
                for case in s.cases(o)? {
                    dry_run(&case)?;
                }
                if kind == Kind::Scaling {
                    for group in group_by_prover(s.cases(o)?) {
                        if group.len() < 3 {
                            return Err(at(
                                "scaling needs at least three input sizes per prover".into()
                            ));
                        }
                    }
                }
            }
            Kind::MembershipBit => {
                let m = self.membership_bit.as_ref().expect("kind checked");
                positive(m.trials, "trials")?;
                if m.k.is_empty() {
                    return Err(at("k is empty".into()));
                }
                for &k in &m.k {
                    let tosses = 64u64
                        .checked_pow(k)
                        .filter(|&t| k > 0 && t <= m.toss_budget);
                    if tosses.is_none() {
                        return Err(at(format!(
                            "k = {k} needs 64^k tosses within the toss budget"
                        )));
                    }
                }
                prob_value(&m.language)?;
            }
            Kind::FourCounter => {
                let f = self.four_counter.as_ref().expect("kind checked");
                positive(f.trials, "trials")?;
                if f.r == 0 {
                    return Err(at("r must be positive".into()));
                }
                o.budget(f.budget).validate()?;
                for (_, w) in f.input.expand() {
                    f.language.alphabet().check_word(&w)?;
                }
            }
            Kind::Weak => {
                let w = self.weak_estimator.as_ref().expect("kind checked");
                positive(w.paths, "paths")?;
                o.budget(w.budget).validate()?;
                let params = ProtocolParams {
                    y: w.y,
                    ..ProtocolParams::default()
                };
                params.validate()?;
                for (_, word) in w.input.expand() {
                    w.language.alphabet().check_word(&word)?;
                }
            }
            Kind::Tape => {
                let t = self.tape_enumeration.as_ref().expect("kind checked");
                let params = ProtocolParams {
                    q: t.q,
                    ..ProtocolParams::default()
                };
                params.validate()?;
                for (label, w) in t.input.expand() {
                    if t.prover.expand(ProtocolId::SignedTape, &w).is_empty() {
                        return Err(at(format!("no prover strategies on {label}")));
                    }
                }
            }
        }
        Ok(kind)
    }
}

fn binomial_rate(m: Metric) -> bool {
    matches!(
        m,
        Metric::AcceptRate | Metric::RejectRate | Metric::CorrectRate | Metric::XPrimeRate
    )
}

/// Surfaces configuration errors of a case without simulating it.
fn dry_run(case: &Case) -> CliResult<()> {
    let mut plan = case.plan.clone();
    plan.budget.max_steps = 1;
    plan.run_one(0, 0)?;
    Ok(())
}

pub fn group_by_prover(cases: Vec<Case>) -> Vec<Vec<Case>> {
    let mut groups: Vec<Vec<Case>> = Vec::new();
    for case in cases {
        match groups
            .iter_mut()
            .find(|g| g[0].plan.prover == case.plan.prover)
        {
            Some(g) => g.push(case),
            None => groups.push(vec![case]),
        }
    }
    groups
}

fn prover_label(p: &ProverSpec) -> String {
    serde_json::to_string(p).expect("prover specs serialize")
}

fn exact_acceptance(case: &Case) -> CliResult<Option<f64>> {
    let plan = &case.plan;
    if !matches!(plan.protocol, ProtocolId::Usquare | ProtocolId::Upower64) {
        return Ok(None);
    }
    let Some(y) = plan.prover.finite_certificate(plan.protocol, &plan.input)? else {
        return Ok(None);
    };
    let n = plan.input.len() as u64;
    let walk = plan.ctx.params.walk;
    let p = match plan.protocol {
        ProtocolId::Usquare => exact_usquare_acceptance(n, &y, walk),
        ProtocolId::Upower64 => exact_upower64_acceptance(n, &y, walk),
        _ => return Ok(None),
    };
    // repetitions are unanimous
    Ok(p.to_f64().map(|p| p.powi(plan.ctx.params.r as i32)))
}

fn run_trials_check(
    s: &ScenarioConfig,
    seed: u64,
    workers: usize,
    o: &Overrides,
) -> CliResult<Vec<Subject>> {
    let trials = s.trials(o)?;
    let mut out = Vec::new();
    for (i, case) in s.cases(o)?.into_iter().enumerate() {
        let case_seed = derive_seed(s.seed.unwrap_or(seed), i as u64);
        let start = Instant::now();
        let st = run_trials(&case.plan, trials, case_seed, workers)?;
        let seconds = start.elapsed().as_secs_f64();
        let decided = st.decided();
        let mut m = BTreeMap::new();
        m.insert(Metric::AcceptRate, rate(st.accepts, decided));
        m.insert(Metric::RejectRate, rate(st.rejects, decided));
        if let Some(member) = case.member {
            m.insert(
                Metric::CorrectRate,
                rate(if member { st.accepts } else { st.rejects }, decided),
            );
        }
        m.insert(Metric::Accepts, count(st.accepts));
        m.insert(Metric::Rejects, count(st.rejects));
        m.insert(Metric::Timeouts, count(st.timeouts));
        m.insert(Metric::Decided, count(decided));
        m.insert(Metric::SweepingViolations, count(st.sweeping_violations));
        m.insert(Metric::MaxWorkCells, count(st.max_work_cells));
        m.insert(Metric::MeanSteps, plain(st.mean_steps));
        m.insert(Metric::MaxSteps, count(st.max_steps));
        m.insert(Metric::Seconds, plain(seconds));
        let mut oracles = BTreeMap::new();
        if let Some(p) = exact_acceptance(&case)? {
            oracles.insert(Oracle::ExactAcceptance, binomial_target(p, decided));
        }
        out.push(Subject {
            label: format!("{} {}", case.input_label, prover_label(&case.plan.prover)),
            details: json!({ "input": case.input_label, "n": case.plan.input.len(), "prover": case.plan.prover, "member": case.member, "oracle": oracles.get(&Oracle::ExactAcceptance).map(|t| t.expected), "stats": st }),
            metrics: m,
            oracles,
        });
    }
    Ok(out)
}

/// Runs every input size of `s` for each prover strategy and fits the
/// growth of mean steps and work cells.
pub fn sweep(
    s: &ScenarioConfig,
    seed: u64,
    workers: usize,
    o: &Overrides,
) -> CliResult<Vec<SweepRecord>> {
    let trials = s.trials(o)?;
    let mut out = Vec::new();
    for (g, group) in group_by_prover(s.cases(o)?).into_iter().enumerate() {
        let group_seed = derive_seed(seed, g as u64);
        let mut rows = Vec::new();
        for (i, case) in group.iter().enumerate() {
            let st = run_trials(
                &case.plan,
                trials,
                derive_seed(group_seed, i as u64),
                workers,
            )?;
            rows.push(SweepRow {
                input: case.input_label.clone(),
                n: case.plan.input.len() as u64,
                trials,
                timeouts: st.timeouts,
                accept_rate: st.accept_rate,
                mean_steps: st.mean_steps,
                max_steps: st.max_steps,
                mean_work_cells: st.mean_work_cells,
                max_work_cells: st.max_work_cells,
            });
        }
        let steps: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mean_steps)).collect();
        let cells: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.n as f64, r.max_work_cells as f64))
            .collect();
        out.push(SweepRecord {
            scenario: s.label(),
            protocol: s.protocol,
            prover: group[0].plan.prover.clone(),
            steps_fit: fit_power_law(&steps),
            work_cells_fit: fit_log_linear(&cells),
            rows,
        });
    }
    Ok(out)
}

fn run_scaling_check(
    s: &ScenarioConfig,
    seed: u64,
    workers: usize,
    o: &Overrides,
) -> CliResult<Vec<Subject>> {
    let start = Instant::now();
    let records = sweep(s, s.seed.unwrap_or(seed), workers, o)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut out = Vec::new();
    for r in records {
        let mut m = BTreeMap::new();
        if let Some(f) = r.steps_fit {
            m.insert(Metric::StepsExponent, plain(f.exponent));
            m.insert(Metric::StepsRSquared, plain(f.r_squared));
        }
        if let Some(f) = r.work_cells_fit {
            m.insert(Metric::WorkCellsLogSlope, plain(f.slope));
            m.insert(Metric::WorkCellsLogRSquared, plain(f.r_squared));
        }
        m.insert(
            Metric::Timeouts,
            count(r.rows.iter().map(|row| row.timeouts).sum()),
        );
        m.insert(Metric::Seconds, plain(seconds));
        out.push(Subject {
            label: prover_label(&r.prover),
            details: serde_json::to_value(&r).expect("records serialize"),
            metrics: m,
            oracles: BTreeMap::new(),
        });
    }
    Ok(out)
}

fn coin_bias(spec: &LanguageSpec) -> CliResult<f64> {
    prob_value(spec)?
        .to_f64()
        .ok_or_else(|| config("coin bias is not representable"))
}

fn run_membership_check(
    c: &MembershipBitCheck,
    seed: u64,
    workers: usize,
    o: &Overrides,
) -> CliResult<Vec<Subject>> {
    let trials = o.trials.unwrap_or(c.trials);
    let p = coin_bias(&c.language)?;
    let mut out = Vec::new();
    for (i, &k) in c.k.iter().enumerate() {
        let start = Instant::now();
        let t = membership_bit_trials(
            &c.language,
            k,
            c.toss_budget,
            trials,
            derive_seed(seed, i as u64),
            workers,
        )?;
        let seconds = start.elapsed().as_secs_f64();
        let one = digit_probability(p, k);
        let expected = if t.member { one } else { 1.0 - one };
        let mut m = BTreeMap::new();
        m.insert(Metric::CorrectRate, rate(t.correct, t.trials));
        m.insert(Metric::Seconds, plain(seconds));
        let mut oracles = BTreeMap::new();
        oracles.insert(
            Oracle::DigitProbability,
            binomial_target(expected, t.trials),
        );
        out.push(Subject {
            label: format!("k={k}"),
            details: json!({ "result": t, "oracle": expected, "seconds": seconds }),
            metrics: m,
            oracles,
        });
    }
    Ok(out)
}

fn run_four_counter_check(
    c: &FourCounterCheck,
    seed: u64,
    workers: usize,
    o: &Overrides,
) -> CliResult<Vec<Subject>> {
    let trials = o.trials.unwrap_or(c.trials);
    let p = coin_bias(&c.language)?;
    let mut out = Vec::new();
    for (i, (label, w)) in c.input.expand().into_iter().enumerate() {
        let start = Instant::now();
        let f = four_counter_trials(
            &c.language,
            &w,
            c.r,
            o.budget(c.budget),
            trials,
            derive_seed(seed, i as u64),
            workers,
        )?;
        let st = &f.stats;
        let decided = st.decided();
        let mut m = BTreeMap::new();
        m.insert(
            Metric::CorrectRate,
            rate(if f.member { st.accepts } else { st.rejects }, decided),
        );
        m.insert(Metric::AcceptRate, rate(st.accepts, decided));
        m.insert(Metric::Timeouts, count(st.timeouts));
        m.insert(Metric::DigitMismatches, count(f.digit_mismatches));
        m.insert(Metric::Seconds, plain(start.elapsed().as_secs_f64()));
        let mut oracles = BTreeMap::new();
        if c.r == 1 {
            let rank = lex_rank(c.language.alphabet(), &w)?;
            let expected = if w.is_empty() {
                1.0
            } else {
                let one = digit_probability(p, rank as u32);
                if f.member {
                    one
                } else {
                    1.0 - one
                }
            };
            oracles.insert(Oracle::DigitProbability, binomial_target(expected, decided));
        }
        out.push(Subject {
            label: label.clone(),
            details: json!({ "input": label, "result": f, "oracle": oracles.get(&Oracle::DigitProbability).map(|t| t.expected) }),
            metrics: m,
            oracles,
        });
    }
    Ok(out)
}

fn run_weak_check(c: &WeakCheck, seed: u64, o: &Overrides) -> CliResult<Vec<Subject>> {
    let paths = o.trials.unwrap_or(c.paths);
    let p = coin_bias(&c.language)?;
    let y = *c.y.numer() as f64 / *c.y.denom() as f64;
    let mut out = Vec::new();
    let mut index = 0u64;
    for (label, w) in c.input.expand() {
        for prover in c.prover.expand(ProtocolId::WeakSweeping, &w) {
            let start = Instant::now();
            let e = weak_ips_estimator(
                &c.language,
                &w,
                &prover,
                c.y,
                paths,
                derive_seed(seed, index),
                o.budget(c.budget),
                SLACK_CONFIDENCE,
            )?;
            index += 1;
            let mut m = BTreeMap::new();
            let conditional = |v: f64| Observation {
                value: v,
                slack: Some(e.half_width),
                ..Observation::default()
            };
            m.insert(Metric::ConditionalAccept, conditional(e.conditional_accept));
            m.insert(Metric::ConditionalReject, conditional(e.conditional_reject));
            if e.lottery_paths > 0 {
                let frac = |k: u64| exact(BigRational::new(k.into(), e.lottery_paths.into()));
                m.insert(Metric::XPrimeRate, rate(e.x_prime_ones, e.lottery_paths));
                m.insert(Metric::BalancedFraction, frac(e.balanced_paths));
                m.insert(Metric::AffectedFraction, frac(e.affected_paths));
            }
            if let Some(r) = e.min_affected_ratio {
                m.insert(Metric::MinAffectedRatio, plain(r));
            }
            m.insert(Metric::OutrightRejects, count(e.outright_rejects));
            m.insert(Metric::Timeouts, count(e.timeouts));
            m.insert(Metric::Seconds, plain(start.elapsed().as_secs_f64()));
            let mut oracles = BTreeMap::new();
            if !w.is_empty() {
                let rank = lex_rank(c.language.alphabet(), &w)?;
                let one = digit_probability(p, rank as u32);
                let digit = binomial_target(one, e.lottery_paths);
                oracles.insert(Oracle::DigitProbability, digit);
                oracles.insert(
                    Oracle::DigitLottery,
                    OracleTarget {
                        expected: one / (1.0 + y),
                        sigma: digit.sigma / (1.0 + y),
                    },
                );
            }
            out.push(Subject {
                label: format!("{label} {}", prover_label(&prover)),
                details: json!({ "input": label, "prover": prover, "estimate": e }),
                metrics: m,
                oracles,
            });
        }
    }
    Ok(out)
}

fn run_tape_check(c: &TapeCheck, workers: usize) -> CliResult<Vec<Subject>> {
    let mut out = Vec::new();
    for (label, w) in c.input.expand() {
        for prover in c.prover.expand(ProtocolId::SignedTape, &w) {
            let start = Instant::now();
            let pool = rayon_pool(workers)?;
            let d = pool.install(|| exhaustive_tape_detection(&w, c.q, &prover))?;
            let mut m = BTreeMap::new();
            m.insert(Metric::Detection, exact(d.clone()));
            m.insert(Metric::Seconds, plain(start.elapsed().as_secs_f64()));
            out.push(Subject {
                label: format!("{} {}", word_label(&w), prover_label(&prover)),
                details: json!({ "input": label, "q": c.q, "prover": prover, "detection": d.to_string() }),
                metrics: m,
                oracles: BTreeMap::new(),
            });
        }
    }
    Ok(out)
}

fn rayon_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| config(format!("worker pool: {e}")))
}

fn evaluate(check: &str, a: &Assertion, s: &Subject) -> AssertionResult {
    let mut r = AssertionResult {
        check: check.to_string(),
        subject: s.label.clone(),
        assertion: a.describe(),
        status: Status::Fail,
        observed: None,
        threshold: None,
        slack: None,
        note: None,
    };
    let Some(obs) = s.metrics.get(&a.metric) else {
        r.note = Some(format!("{} is undefined here", a.metric));
        return r;
    };
    r.observed = Some(obs.value);
    if let Some(oracle) = a.oracle {
        let Some(t) = s.oracles.get(&oracle) else {
            r.status = Status::Skip;
            r.note = Some("oracle does not apply".into());
            return r;
        };
        let tol = a.sigmas * t.sigma;
        r.threshold = Some(t.expected);
        r.slack = Some(tol);
        r.note = Some(format!("|observed - {:.6}| <= {tol:.6}", t.expected));
        r.status = if (obs.value - t.expected).abs() <= tol + 1e-12 {
            Status::Pass
        } else {
            Status::Fail
        };
        return r;
    }
    let bound = a.bound.as_ref().expect("validated");
    if a.op == Op::Within {
        let b = bound.value();
        let n = obs.trials.unwrap_or(0);
        let t = binomial_target(b, n);
        let tol = a.sigmas * t.sigma;
        r.threshold = Some(b);
        r.slack = Some(tol);
        r.note = Some(format!("|observed - {b:.6}| <= {tol:.6}"));
        r.status = if (obs.value - b).abs() <= tol + 1e-12 {
            Status::Pass
        } else {
            Status::Fail
        };
        return r;
    }
    let slack = if a.slack {
        obs.slack.unwrap_or(0.0)
    } else {
        0.0
    };
    let b = bound.value();
    let threshold = match a.op {
        Op::Ge | Op::Gt => b - slack,
        Op::Le | Op::Lt => b + slack,
        Op::Eq | Op::Within => b,
    };
    r.threshold = Some(threshold);
    if a.slack {
        r.slack = Some(slack);
    }
    let pass = match (&obs.exact, slack == 0.0) {
        (Some(x), true) => match a.op {
            Op::Ge => *x >= bound.exact,
            Op::Gt => *x > bound.exact,
            Op::Le => *x <= bound.exact,
            Op::Lt => *x < bound.exact,
            Op::Eq | Op::Within => *x == bound.exact,
        },
        _ => {
            let v = obs.value;
            match a.op {
                Op::Ge => v >= threshold,
                Op::Gt => v > threshold,
                Op::Le => v <= threshold,
                Op::Lt => v < threshold,
                Op::Eq | Op::Within => (v - b).abs() <= slack,
            }
        }
    };
    if let Some(x) = &obs.exact {
        if obs.value.fract() != 0.0 {
            r.note = Some(format!("exact {x}"));
        }
    }
    r.status = if pass { Status::Pass } else { Status::Fail };
    r
}

/// Everything a check produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub seed: u64,
    pub seconds: f64,
    pub subjects: Vec<Value>,
    pub results: Vec<AssertionResult>,
}

/// Runs one validated check.
pub fn run_check(check: &Check, seed: u64, o: &Overrides) -> CliResult<CheckReport> {
    let workers = check.workers.or(o.workers).unwrap_or(0);
    let start = Instant::now();
    let subjects = match check.kind()? {
        Kind::Trials => run_trials_check(check.trials.as_ref().expect("kind"), seed, workers, o)?,
        Kind::Scaling => {
            run_scaling_check(check.scaling.as_ref().expect("kind"), seed, workers, o)?
        }
        Kind::MembershipBit => run_membership_check(
            check.membership_bit.as_ref().expect("kind"),
            seed,
            workers,
            o,
        )?,
        Kind::FourCounter => {
            run_four_counter_check(check.four_counter.as_ref().expect("kind"), seed, workers, o)?
        }
        Kind::Weak => {
            let pool = rayon_pool(workers)?;
            pool.install(|| run_weak_check(check.weak_estimator.as_ref().expect("kind"), seed, o))?
        }
        Kind::Tape => run_tape_check(check.tape_enumeration.as_ref().expect("kind"), workers)?,
    };
    let mut results = Vec::new();
    for s in &subjects {
        for a in &check.assert {
            results.push(evaluate(&check.name, a, s));
        }
    }
    Ok(CheckReport {
        check: check.name.clone(),
        seed,
        seconds: start.elapsed().as_secs_f64(),
        subjects: subjects
            .into_iter()
            .map(|s| json!({ "subject": s.label, "details": s.details }))
            .collect(),
        results,
    })
}

impl Suite {
    /// Validates every check; a suite without checks is a config error.
    pub fn validate(&self, o: &Overrides) -> CliResult<()> {
        if self.checks.is_empty() {
            return Err(config(format!("suite {:?} has no checks", self.name)));
        }
        let mut names = std::collections::HashSet::new();
        for c in &self.checks {
            if !names.insert(&c.name) {
                return Err(config(format!("duplicate check name {:?}", c.name)));
            }
            c.validate(o)?;
        }
        Ok(())
    }

    pub fn check_seed(&self, index: usize, o: &Overrides) -> u64 {
        derive_seed(o.seed.unwrap_or(self.seed), index as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn suite(text: &str) -> Suite {
        serde_json::from_str(text).unwrap()
    }

    fn run_all(s: &Suite) -> Vec<AssertionResult> {
        let o = Overrides::default();
        s.validate(&o).unwrap();
        s.checks
            .iter()
            .enumerate()
            .flat_map(|(i, c)| run_check(c, s.check_seed(i, &o), &o).unwrap().results)
            .collect()
    }

    #[test]
    fn bounds_parse_exactly() {
        let b: Bound = serde_json::from_value(json!("3/16")).unwrap();
        assert_eq!(b.exact, BigRational::new(3.into(), 16.into()));
        let b: Bound = serde_json::from_value(json!("0.73")).unwrap();
        assert_eq!(b.exact, BigRational::new(73.into(), 100.into()));
        let b: Bound = serde_json::from_value(json!(2)).unwrap();
        assert_eq!(b.value(), 2.0);
        for bad in [json!("x"), json!("1/0"), json!(true), json!("")] {
            assert!(serde_json::from_value::<Bound>(bad).is_err());
        }
    }

    #[test]
    fn passes_and_failures() {
        let s = suite(
            r#"{"name":"t","seed":3,"checks":[
              {"name":"members","trials":{"protocol":"thm6-usquare","input":"usquare-members(2,3)","trials":50},
               "assert":[{"metric":"accept-rate","op":"==","bound":"1"},{"metric":"accept-rate","op":"<","bound":"1/2"}]},
              {"name":"finite","trials":{"protocol":"thm6-usquare","input":"unary(6)","prover":"finite-catalog","trials":400},
               "assert":[{"metric":"accept-rate","op":"within","oracle":"exact-acceptance"}]},
              {"name":"tape","tape_enumeration":{"input":"ab","q":5,"prover":"catalog"},
               "assert":[{"metric":"detection","op":"==","bound":"4/5"}]}
            ]}"#,
        );
        let results = run_all(&s);
        let members: Vec<_> = results.iter().filter(|r| r.check == "members").collect();
        assert_eq!(members.len(), 4);
        assert_eq!(
            members.iter().filter(|r| r.status == Status::Pass).count(),
            2
        );
        assert!(
            results
                .iter()
                .filter(|r| r.check != "members")
                .all(|r| r.status == Status::Pass),
            "{results:#?}"
        );
    }

    #[test]
    fn invalid_suites() {
        let o = Overrides::default();
        for text in [
            r#"{"name":"empty","checks":[]}"#,
            r#"{"name":"none","checks":[{"name":"a","assert":[{"metric":"accept-rate","op":">=","bound":"1"}]}]}"#,
            r#"{"name":"noassert","checks":[{"name":"a","tape_enumeration":{"input":"ab","q":5},"assert":[]}]}"#,
            r#"{"name":"metric","checks":[{"name":"a","tape_enumeration":{"input":"ab","q":5},"assert":[{"metric":"accept-rate","op":">=","bound":"1"}]}]}"#,
            r#"{"name":"slack","checks":[{"name":"a","tape_enumeration":{"input":"ab","q":5},"assert":[{"metric":"detection","op":">=","bound":"1","slack":true}]}]}"#,
            r#"{"name":"oracle","checks":[{"name":"a","trials":{"protocol":"thm6-usquare","input":"a"},"assert":[{"metric":"reject-rate","op":"within","oracle":"exact-acceptance"}]}]}"#,
            r#"{"name":"q","checks":[{"name":"a","tape_enumeration":{"input":"ab","q":4},"assert":[{"metric":"detection","op":">=","bound":"1"}]}]}"#,
            r#"{"name":"width","checks":[{"name":"a","trials":{"protocol":"thm2-logspace","input":"unary(5000)","language":{"alphabet":["a"],"kind":"bit-rule","prefix":[1],"tail":"all-zero"},"params":{"c":12}},"assert":[{"metric":"accepts","op":">=","bound":"0"}]}]}"#,
        ] {
            let parsed: Result<Suite, _> = serde_json::from_str(text);
            if let Ok(s) = parsed {
                assert!(s.validate(&o).is_err(), "{text}")
            }
        }
    }

    #[test]
    fn seeds_are_spread() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
