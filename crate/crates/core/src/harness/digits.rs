//! Trials of the coin-based membership guessers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{wilson_interval, worker_pool, TrialStats, SLACK_CONFIDENCE};
use crate::coins::{estimate_membership_bit, head_block_digit};
use crate::langspace::{membership_bit, LanguageSpec};
use crate::protocols::recognize_1p4ca;
use crate::runtime::{trial_rng, ResourceBudget, StreamPurpose, Verifier};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipTrials {
    pub k: u32,
    pub member: bool,
    pub trials: u64,
    pub correct: u64,
    pub correct_rate: f64,
    pub correct_ci: (f64, f64),
    pub seed: u64,
}

/// `trials` independent guesses of membership bit `k` of `spec` from
/// `64^k` coin tosses each.
pub fn membership_bit_trials(
    spec: &LanguageSpec,
    k: u32,
    toss_budget: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<MembershipTrials> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    let member = k >= 1 && membership_bit(spec, k as u64);
    let guess = |t: u64| -> Result<bool> {
        let mut rng = trial_rng(seed, t, StreamPurpose::Aux);
        Ok(estimate_membership_bit(spec, k, toss_budget, &mut rng)?.guess == member)
    };
    guess(0)?;
    let correct = worker_pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| guess(t).map(u64::from))
            .try_reduce(|| 0, |a, b| Ok(a + b))
    })?;
    Ok(MembershipTrials {
        k,
        member,
        trials,
        correct,
        correct_rate: correct as f64 / trials as f64,
        correct_ci: wilson_interval(correct, trials, SLACK_CONFIDENCE),
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourCounterTrials {
    pub stats: TrialStats,
    pub member: bool,
    /// Correct decisions among decided runs.
    pub correct_rate: f64,
    /// Toss phases executed, over all trials and repetitions.
    pub toss_phases: u64,
    /// Toss phases whose `x'` differs from the block digit of the head count.
    pub digit_mismatches: u64,
}

/// Runs the four-counter recognizer on `w`, checking every toss phase's
/// final `x'` against the block digit of its head count.
pub fn four_counter_trials(
    spec: &LanguageSpec,
    w: &[u8],
    r: u32,
    budget: ResourceBudget,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<FourCounterTrials> {
    if trials == 0 || r == 0 {
        return Err(Error::InvalidParameter(
            "trials and repetitions must be positive".into(),
        ));
    }
    spec.alphabet().check_word(w)?;
    budget.validate()?;
    let member = spec.contains_word(w)?;
    let one = |t: u64| {
        let mut v = Verifier::new(
            w,
            Vec::new(),
            budget,
            trial_rng(seed, t, StreamPurpose::Verifier),
        );
        let detail = recognize_1p4ca(&mut v, spec, r);
        let mismatches = detail
            .runs
            .iter()
            .filter(|run| run.x_prime != head_block_digit(run.heads, run.rank as u32))
            .count() as u64;
        (
            v.finish(detail.decision),
            detail.runs.len() as u64,
            mismatches,
        )
    };
    let results: Vec<_> =
        worker_pool(workers)?.install(|| (0..trials).into_par_iter().map(one).collect());
    let outcomes: Vec<_> = results.iter().map(|r| r.0.clone()).collect();
    let stats = TrialStats::from_outcomes(&outcomes, seed, SLACK_CONFIDENCE);
    let correct_rate = if member {
        stats.accept_rate
    } else {
        stats.reject_rate
    };
    Ok(FourCounterTrials {
        member,
        correct_rate,
        toss_phases: results.iter().map(|r| r.1).sum(),
        digit_mismatches: results.iter().map(|r| r.2).sum(),
        stats,
    })
}
