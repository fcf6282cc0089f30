//! Exact acceptance probabilities for small instances.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Binomial, Discrete};

use crate::coins::{head_block_digit, prob_value};
use crate::langspace::LanguageSpec;
use crate::protocols::{prover_of, signed_tape_session, tape_codes, TapeIo, TapeRandomness};
use crate::provers::{ProverSpec, TapeStore};
use crate::runtime::{Decision, Run, TapeProver, Triple, WalkMode};
use crate::{Error, Result};

fn ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn indicator(b: bool) -> BigRational {
    if b {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

/// Block lengths of a finite certificate `a^m1 b … a^mt b b`, read the
/// way the verifier tokenizes it. `None` if a grammar violation comes
/// before the terminating `b` (including running out of symbols).
pub fn certificate_blocks(y: &[u8], first_block: Option<u64>) -> Option<Vec<u64>> {
    let mut blocks = Vec::new();
    let mut len = 0u64;
    for &s in y {
        match s {
            b'a' => {
                len += 1;
                if blocks.is_empty() && first_block.is_some_and(|f| len > f) {
                    return None;
                }
            }
            b'b' if len > 0 => {
                if blocks.is_empty() && first_block.is_some_and(|f| f != len) {
                    return None;
                }
                blocks.push(len);
                len = 0;
            }
            b'b' if !blocks.is_empty() => return Some(blocks),
            _ => return None,
        }
    }
    None
}

/// Probability that the length-checking walk on `a^n` ends on the right.
pub fn walk_right_probability(n: u64, mode: WalkMode) -> BigRational {
    match mode {
        WalkMode::Calibrated => ratio(1, n),
        WalkMode::Literal => ratio(1, n + 1),
    }
}

/// Pair comparisons `ratio·m_A = m_B` from block `start`, each successful
/// non-final comparison followed by a walk that ends right with
/// probability `escape` and then accepts iff fewer than `n` symbols
/// remain.
fn pairs_acceptance(
    blocks: &[u64],
    start: usize,
    n: u64,
    ratio_ab: u64,
    escape: &BigRational,
) -> BigRational {
    let t = blocks.len();
    if start >= t {
        return BigRational::one();
    }
    let stay = BigRational::one() - escape;
    let mut total = BigRational::zero();
    let mut weight = BigRational::one();
    let mut j = start;
    loop {
        let reach = ratio_ab.saturating_mul(blocks[j]);
        if reach > n {
            break;
        }
        if j + 1 == t {
            total += &weight;
            break;
        }
        if reach == n || blocks[j + 1] != reach {
            break;
        }
        if j + 2 == t {
            total += &weight;
            break;
        }
        let remaining: u64 = blocks[j + 2..].iter().sum();
        if remaining < n {
            total += &weight * escape;
        }
        weight *= &stay;
        j += 2;
    }
    total
}

/// Exact acceptance probability of one USQUARE run on `a^n` against the
/// finite certificate `y`: the mean over the four checks.
pub fn exact_usquare_acceptance(n: u64, y: &[u8], mode: WalkMode) -> BigRational {
    if n <= 3 {
        return indicator(n == 1);
    }
    let Some(blocks) = certificate_blocks(y, None) else {
        return BigRational::zero();
    };
    let t = blocks.len() as u64;
    let total: u64 = blocks.iter().sum();
    let escape = walk_right_probability(n, mode);
    let sum = indicator(total == n && t >= 2);
    let count = indicator(total - blocks[0] + t == n);
    let pairs = pairs_acceptance(&blocks, 0, n, 1, &escape);
    let shifted = pairs_acceptance(&blocks, 1, n, 1, &escape);
    (sum + count + pairs + shifted) / ratio(4, 1)
}

/// Exact acceptance probability of one UPOWER64 run on `a^n` against the
/// finite certificate `y`: the mean over the three checks.
pub fn exact_upower64_acceptance(n: u64, y: &[u8], mode: WalkMode) -> BigRational {
    if n <= 64 {
        return indicator(n == 64);
    }
    let Some(blocks) = certificate_blocks(y, Some(1)) else {
        return BigRational::zero();
    };
    let total: u64 = blocks.iter().sum();
    let escape = walk_right_probability(n, mode);
    let sum = indicator(total.checked_mul(63).and_then(|s| s.checked_add(1)) == Some(n));
    let pairs = pairs_acceptance(&blocks, 0, n, 64, &escape);
    let shifted = pairs_acceptance(&blocks, 1, n, 64, &escape);
    (sum + pairs + shifted) / ratio(3, 1)
}

/// `P(head_block_digit(H, k))` for `H ~ Binomial(64^k, p)`.
pub fn digit_probability(p: f64, k: u32) -> f64 {
    let tosses = 64u64.pow(k);
    let dist = Binomial::new(p, tosses).expect("p in [0, 1]");
    (0..=tosses)
        .filter(|&h| head_block_digit(h, k))
        .map(|h| dist.pmf(h))
        .sum()
}

/// [`digit_probability`] for the coin of `spec`.
pub fn membership_digit_probability(spec: &LanguageSpec, k: u32) -> Result<f64> {
    let p = prob_value(spec)?
        .to_f64()
        .ok_or(Error::Overflow("coin bias"))?;
    Ok(digit_probability(p, k))
}

/// Both tape stores plus an odometer standing in for the verifier's draws.
struct Odometer {
    stores: [TapeStore; 2],
    draws: Vec<u64>,
    pos: usize,
}

impl TapeIo for Odometer {
    fn store(&mut self, index: usize, triple: Triple) -> Run<()> {
        self.stores[prover_of(index) - 1].store(index, triple);
        Ok(())
    }

    fn fetch(&mut self, index: usize) -> Run<Option<Triple>> {
        Ok(self.stores[prover_of(index) - 1].fetch(index))
    }
}

impl TapeRandomness for Odometer {
    fn draw(&mut self, _q: u64) -> u64 {
        let d = self.draws[self.pos];
        self.pos += 1;
        d
    }
}

/// Largest number of sessions [`exhaustive_tape_detection`] will run.
const ENUMERATION_LIMIT: u64 = 1 << 27;

/// Exact probability that the signed-tape session on `word` rejects
/// against `strategy`, by enumerating every verifier draw sequence (and
/// every guessed signature).
pub fn exhaustive_tape_detection(
    word: &[u8],
    q: u64,
    strategy: &ProverSpec,
) -> Result<BigRational> {
    let codes = tape_codes(word, q)?;
    // a, b, r_0, one nonce per cell; a new r_0 and nonces on the update
    let draws = 4 + 2 * codes.len() as u32;
    let guesses = if strategy.guesses_signature() { q } else { 1 };
    let sequences = q
        .checked_pow(draws)
        .and_then(|s| s.checked_mul(guesses))
        .filter(|&s| s <= ENUMERATION_LIMIT)
        .ok_or_else(|| {
            Error::Budget(format!(
                "{q}^{draws} draw sequences are too many to enumerate"
            ))
        })?;
    let base = strategy.tape_pair(q, &mut ChaCha8Rng::seed_from_u64(0))?;
    let session = |code: u64| -> Result<bool> {
        let guess = code % guesses;
        let mut rest = code / guesses;
        let mut seq = Vec::with_capacity(draws as usize);
        for _ in 0..draws {
            seq.push(rest % q);
            rest /= q;
        }
        let mut env = Odometer {
            stores: base.clone().map(|s| s.with_guess(guess)),
            draws: seq,
            pos: 0,
        };
        let decision =
            signed_tape_session(&mut env, q, &codes)?.expect("no limits in the odometer");
        Ok(decision == Decision::Reject)
    };
    let detected = (0..sequences)
        .into_par_iter()
        .map(|c| session(c).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(ratio(detected, sequences))
}
