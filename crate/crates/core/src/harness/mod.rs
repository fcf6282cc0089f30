//! Trial execution, binomial statistics, power-law fits and exact
//! small-instance oracles.

mod digits;
mod oracles;
mod scaling;
mod weak;

pub use digits::{four_counter_trials, membership_bit_trials, FourCounterTrials, MembershipTrials};
pub use oracles::{
    certificate_blocks, digit_probability, exact_upower64_acceptance, exact_usquare_acceptance,
    exhaustive_tape_detection, membership_digit_probability, walk_right_probability,
};
pub use scaling::{
    fit_log_linear, fit_power_law, scaling_probe, LogFit, PowerFit, ScalingRow, ScalingTable,
};
pub use weak::{weak_ips_estimator, WeakEstimate};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::protocols::{run_protocol, ProtocolContext, ProtocolId};
use crate::provers::ProverSpec;
use crate::runtime::{trial_rng, Decision, Outcome, ResourceBudget, StreamPurpose};
use crate::{Error, Result};

/// Confidence level behind every CI slack.
pub const SLACK_CONFIDENCE: f64 = 0.99;

/// Two-sided standard normal quantile for `confidence`.
pub fn normal_quantile(confidence: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    std.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// Wilson score interval for `successes` out of `trials`. With no trials
/// the interval is `[0, 1]`.
///
/// # Panics
/// If `successes > trials` or `confidence` is outside `(0, 1)`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(successes <= trials, "more successes than trials");
    assert!(
        confidence > 0.0 && confidence < 1.0,
        "confidence must lie in (0, 1)"
    );
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = normal_quantile(confidence);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Half-width of the 99% Wilson interval: the tolerance subtracted from
/// a lower bound (or added to an upper bound) before comparing a rate.
pub fn slack(successes: u64, trials: u64) -> f64 {
    let (lo, hi) = wilson_interval(successes, trials, SLACK_CONFIDENCE);
    (hi - lo) / 2.0
}

/// Aggregate of a batch of runs. Rates are over decided runs; timeouts
/// are counted separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    pub accepts: u64,
    pub rejects: u64,
    pub timeouts: u64,
    pub accept_rate: f64,
    pub reject_rate: f64,
    pub confidence: f64,
    pub accept_ci: (f64, f64),
    pub reject_ci: (f64, f64),
    pub mean_steps: f64,
    pub median_steps: u64,
    pub p90_steps: u64,
    pub max_steps: u64,
    pub mean_work_cells: f64,
    pub max_work_cells: u64,
    pub mean_prover_symbols: f64,
    /// Runs whose head reversed away from an end-marker.
    pub sweeping_violations: u64,
    pub seed: u64,
}

impl TrialStats {
    pub fn from_outcomes(outcomes: &[Outcome], seed: u64, confidence: f64) -> Self {
        let count = |d: Decision| outcomes.iter().filter(|o| o.decision == d).count() as u64;
        let (accepts, rejects, timeouts) = (
            count(Decision::Accept),
            count(Decision::Reject),
            count(Decision::Timeout),
        );
        let decided = accepts + rejects;
        let rate = |k: u64| {
            if decided == 0 {
                0.0
            } else {
                k as f64 / decided as f64
            }
        };
        let mut steps: Vec<u64> = outcomes.iter().map(|o| o.steps).collect();
        steps.sort_unstable();
        let pct = |q: f64| -> u64 {
            if steps.is_empty() {
                return 0;
            }
            let i = ((steps.len() - 1) as f64 * q).round() as usize;
            steps[i]
        };
        let mean = |f: fn(&Outcome) -> u64| -> f64 {
            if outcomes.is_empty() {
                0.0
            } else {
                outcomes.iter().map(|o| f(o) as f64).sum::<f64>() / outcomes.len() as f64
            }
        };
        Self {
            trials: outcomes.len() as u64,
            accepts,
            rejects,
            timeouts,
            accept_rate: rate(accepts),
            reject_rate: rate(rejects),
            confidence,
            accept_ci: wilson_interval(accepts, decided, confidence),
            reject_ci: wilson_interval(rejects, decided, confidence),
            mean_steps: mean(|o| o.steps),
            median_steps: pct(0.5),
            p90_steps: pct(0.9),
            max_steps: steps.last().copied().unwrap_or(0),
            mean_work_cells: mean(|o| o.work_cells),
            max_work_cells: outcomes.iter().map(|o| o.work_cells).max().unwrap_or(0),
            mean_prover_symbols: mean(|o| o.prover_symbols),
            sweeping_violations: outcomes.iter().filter(|o| !o.sweeping_ok).count() as u64,
            seed,
        }
    }

    pub fn decided(&self) -> u64 {
        self.accepts + self.rejects
    }

    pub fn accept_slack(&self) -> f64 {
        slack(self.accepts, self.decided())
    }

    pub fn reject_slack(&self) -> f64 {
        slack(self.rejects, self.decided())
    }
}

/// One scenario: protocol, input, prover strategy and limits.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialPlan {
    pub protocol: ProtocolId,
    pub input: Vec<u8>,
    pub prover: ProverSpec,
    pub ctx: ProtocolContext,
    pub budget: ResourceBudget,
}

impl TrialPlan {
    pub fn new(
        protocol: ProtocolId,
        input: impl Into<Vec<u8>>,
        prover: ProverSpec,
        ctx: ProtocolContext,
    ) -> Self {
        Self {
            protocol,
            input: input.into(),
            prover,
            ctx,
            budget: ResourceBudget::default(),
        }
    }

    pub fn with_budget(mut self, budget: ResourceBudget) -> Self {
        self.budget = budget;
        self
    }

    /// Run number `trial`, with streams derived from `(seed, trial)`.
    pub fn run_one(&self, seed: u64, trial: u64) -> Result<Outcome> {
        let mut prng = trial_rng(seed, trial, StreamPurpose::Prover);
        let provers = self
            .prover
            .build(self.protocol, &self.input, &self.ctx, &mut prng)?;
        run_protocol(
            self.protocol,
            &self.input,
            provers,
            &self.ctx,
            self.budget,
            trial_rng(seed, trial, StreamPurpose::Verifier),
        )
    }
}

pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))
}

/// Runs `trials` independent trials on a pool of `workers` threads
/// (0 picks the number of cores). Results are in trial order and do not
/// depend on scheduling.
pub fn run_outcomes(
    plan: &TrialPlan,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<Outcome>> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    // configuration errors surface here, before the pool starts
    let first = plan.run_one(seed, 0)?;
    let rest: Result<Vec<Outcome>> = worker_pool(workers)?.install(|| {
        (1..trials)
            .into_par_iter()
            .map(|t| plan.run_one(seed, t))
            .collect()
    });
    let mut all = Vec::with_capacity(trials as usize);
    all.push(first);
    all.extend(rest?);
    Ok(all)
}

pub fn run_trials(plan: &TrialPlan, trials: u64, seed: u64, workers: usize) -> Result<TrialStats> {
    let outcomes = run_outcomes(plan, trials, seed, workers)?;
    Ok(TrialStats::from_outcomes(&outcomes, seed, SLACK_CONFIDENCE))
}
