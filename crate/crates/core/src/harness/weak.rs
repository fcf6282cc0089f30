//! Decision probabilities of the weak sweeping verifier from exact
//! per-round lottery weights.

use num_rational::{BigRational, Ratio};
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normal_quantile;
use crate::langspace::LanguageSpec;
use crate::protocols::{weak_round_exact, ProtocolContext, ProtocolId, WeakRound, WeakVerdict};
use crate::provers::ProverSpec;
use crate::runtime::{trial_rng, ResourceBudget, StreamPurpose, Verifier};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakEstimate {
    pub paths: u64,
    /// Paths cut off by the budget; excluded from everything below.
    pub timeouts: u64,
    /// Rounds rejected outright, before any lottery.
    pub outright_rejects: u64,
    pub conditional_accept: f64,
    pub conditional_reject: f64,
    /// Half-width of the delta-method interval for the conditional rates.
    pub half_width: f64,
    pub confidence: f64,
    /// Lottery paths with `x' = 1`.
    pub x_prime_ones: u64,
    pub lottery_paths: u64,
    /// Lottery paths with `PrA = PrR`.
    pub balanced_paths: u64,
    /// Lottery paths with at least one counter discrepancy.
    pub affected_paths: u64,
    /// Smallest `PrR / PrA` among affected paths.
    pub min_affected_ratio: Option<f64>,
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(0.0)
}

/// Samples `paths` coin paths of one weak round on `w` against `prover`
/// and forms the conditional decision probabilities `a / (a + r)` from
/// the averaged exact accept and reject weights.
#[allow(clippy::too_many_arguments)]
pub fn weak_ips_estimator(
    spec: &LanguageSpec,
    w: &[u8],
    prover: &ProverSpec,
    y: Ratio<u64>,
    paths: u64,
    seed: u64,
    budget: ResourceBudget,
    confidence: f64,
) -> Result<WeakEstimate> {
    if paths == 0 {
        return Err(Error::InvalidParameter(
            "at least one path is required".into(),
        ));
    }
    spec.alphabet().check_word(w)?;
    let mut ctx = ProtocolContext::with_spec(spec.clone());
    ctx.params.y = y;
    ctx.params.validate()?;
    budget.validate()?;
    let round = |path: u64| -> Result<Option<WeakRound>> {
        let mut prng = trial_rng(seed, path, StreamPurpose::Prover);
        let provers = prover.build(ProtocolId::WeakSweeping, w, &ctx, &mut prng)?;
        let mut v = Verifier::new(
            w,
            provers,
            budget,
            trial_rng(seed, path, StreamPurpose::Verifier),
        );
        Ok(weak_round_exact(&mut v, spec, y, 0).ok())
    };
    let rounds: Vec<Option<WeakRound>> = (0..paths)
        .into_par_iter()
        .map(round)
        .collect::<Result<_>>()?;
    let done: Vec<&WeakRound> = rounds.iter().flatten().collect();
    let lottery: Vec<&WeakRound> = done
        .iter()
        .copied()
        .filter(|r| r.verdict == WeakVerdict::Lottery)
        .collect();

    let weights: Vec<(u128, f64, f64)> = done
        .iter()
        .map(|r| {
            let (e, a, rej) = r.decision_weights(y);
            (e, to_f64(&a), to_f64(&rej))
        })
        .collect();
    // common factor y^min_exponent cancels in a / (a + r)
    let ln_y = (*y.numer() as f64 / *y.denom() as f64).ln();
    let min_e = weights.iter().map(|w| w.0).min().unwrap_or(0);
    let scaled: Vec<(f64, f64)> = weights
        .iter()
        .map(|&(e, a, r)| {
            let f = ((e - min_e) as f64 * ln_y).exp();
            (a * f, r * f)
        })
        .collect();
    let m = scaled.len() as f64;
    let sum_a: f64 = scaled.iter().map(|p| p.0).sum();
    let sum_t: f64 = scaled.iter().map(|p| p.0 + p.1).sum();
    let (accept, half_width) = if sum_t > 0.0 && scaled.len() > 1 {
        let ratio = sum_a / sum_t;
        let mean_t = sum_t / m;
        let var = scaled
            .iter()
            .map(|&(a, r)| (a - ratio * (a + r)).powi(2))
            .sum::<f64>()
            / (m - 1.0);
        let sd = (var / m).sqrt() / mean_t;
        (ratio, normal_quantile(confidence) * sd)
    } else if sum_t > 0.0 {
        (sum_a / sum_t, 1.0)
    } else {
        (0.0, 1.0)
    };

    let affected: Vec<f64> = lottery
        .iter()
        .filter(|r| r.discrepancies > 0)
        .map(|r| to_f64(&(&r.pr_r / &r.pr_a)))
        .collect();
    Ok(WeakEstimate {
        paths,
        timeouts: paths - done.len() as u64,
        outright_rejects: done
            .iter()
            .filter(|r| r.verdict == WeakVerdict::Rejected)
            .count() as u64,
        conditional_accept: accept,
        conditional_reject: if sum_t > 0.0 { 1.0 - accept } else { 0.0 },
        half_width,
        confidence,
        x_prime_ones: lottery.iter().filter(|r| r.x_prime).count() as u64,
        lottery_paths: lottery.len() as u64,
        balanced_paths: lottery.iter().filter(|r| r.pr_a == r.pr_r).count() as u64,
        affected_paths: affected.len() as u64,
        min_affected_ratio: affected.iter().copied().reduce(f64::min),
    })
}
