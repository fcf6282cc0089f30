//! The biased coin whose head probability encodes a language.
//!
//! For membership bits `x₁, x₂, …` the bias is `p = 0.x₁01x₂01x₃01…` in
//! binary. Tossing compares a stream of fair bits against the expansion of
//! `p` and stops at the first disagreement, so `P(head) = p` exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::RngCore;

use crate::langspace::{lex_rank, membership_bit, BitTail, LanguageKind, LanguageSpec};
use crate::{Error, Result};

/// Default cap on coin tosses for a single estimation run.
pub const DEFAULT_TOSS_BUDGET: u64 = 1 << 26;

/// A real number in `[0, 1]` given by its binary digits after the point.
pub trait BinaryExpansion {
    /// Digit `j` (1-based) after the binary point.
    fn digit(&self, j: u64) -> bool;
}

/// Lazily evaluated expansion `0.x₁01x₂01…` of a language's coin bias.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbBitStream {
    spec: LanguageSpec,
}

impl ProbBitStream {
    pub fn new(spec: LanguageSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &LanguageSpec {
        &self.spec
    }
}

impl BinaryExpansion for ProbBitStream {
    fn digit(&self, j: u64) -> bool {
        prob_digit(self, j)
    }
}

/// Expansion with every digit equal, i.e. `p = 1` or `p = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstantExpansion(pub bool);

impl BinaryExpansion for ConstantExpansion {
    fn digit(&self, _j: u64) -> bool {
        self.0
    }
}

/// Digit `j` of `p`: `x_m` at `j = 3m - 2`, then a 0 and a 1 of padding.
pub fn prob_digit(stream: &ProbBitStream, j: u64) -> bool {
    assert!(j >= 1, "digits are numbered from 1");
    match j % 3 {
        1 => membership_bit(&stream.spec, j.div_ceil(3)),
        2 => false,
        _ => true,
    }
}

/// Exact value of `p` for specs whose membership bits are eventually
/// periodic (bit rules and finite sets).
pub fn prob_value(spec: &LanguageSpec) -> Result<BigRational> {
    let (prefix, period): (Vec<u8>, Vec<u8>) = match spec.kind() {
        LanguageKind::BitRule { prefix, tail } => {
            let period = match tail {
                BitTail::AllZero => vec![0],
                BitTail::AllOne => vec![1],
                BitTail::Periodic(p) => p.clone(),
            };
            (prefix.clone(), period)
        }
        LanguageKind::Finite { strings } => {
            let mut ranks = Vec::with_capacity(strings.len());
            for s in strings {
                ranks.push(lex_rank(spec.alphabet(), s.as_bytes())?);
            }
            let len = ranks.iter().copied().max().unwrap_or(0) as usize;
            let mut prefix = vec![0u8; len];
            for r in ranks {
                prefix[r as usize - 1] = 1;
            }
            (prefix, vec![0])
        }
        LanguageKind::Builtin { name } => {
            return Err(Error::UnsupportedSpec(format!(
                "{name:?} has no eventually periodic expansion"
            )))
        }
    };
    // digits of 0.x01x01..., three per membership bit
    let to_int = |bits: &[u8]| {
        bits.iter().fold(BigInt::zero(), |acc, &x| {
            (acc << 3) + BigInt::from(4 * x as u32 + 1)
        })
    };
    let pre_digits = 3 * prefix.len();
    let per_digits = 3 * period.len();
    let head = BigRational::new(to_int(&prefix), BigInt::one() << pre_digits);
    let cycle = BigRational::new(
        to_int(&period),
        (BigInt::one() << per_digits) - BigInt::one(),
    );
    Ok(head + cycle / BigRational::from_integer(BigInt::one() << pre_digits))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Toss {
    Head,
    Tail,
}

impl Toss {
    pub fn is_head(self) -> bool {
        self == Toss::Head
    }
}

/// Running toss tally.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HeadCount {
    pub tosses: u64,
    pub heads: u64,
}

impl HeadCount {
    pub fn record(&mut self, toss: Toss) {
        self.tosses += 1;
        self.heads += toss.is_head() as u64;
    }
}

/// An exact sampler for `Bernoulli(p)` with `p` given by its expansion.
///
/// Digits are cached 64 at a time, most significant first, so one toss
/// usually costs a single comparison of a uniform `u64` against the first
/// cached word.
#[derive(Clone, Debug)]
pub struct BiasedCoin<E> {
    expansion: E,
    words: Vec<u64>,
    digits_consumed: u64,
    count: HeadCount,
}

impl<E: BinaryExpansion> BiasedCoin<E> {
    pub fn new(expansion: E) -> Self {
        Self {
            expansion,
            words: Vec::new(),
            digits_consumed: 0,
            count: HeadCount::default(),
        }
    }

    pub fn expansion(&self) -> &E {
        &self.expansion
    }

    fn word(&mut self, i: usize) -> u64 {
        while self.words.len() <= i {
            let base = 64 * self.words.len() as u64;
            let mut w = 0u64;
            for d in 1..=64 {
                w = (w << 1) | self.expansion.digit(base + d) as u64;
            }
            self.words.push(w);
        }
        self.words[i]
    }

    /// Compares fair bits against the digits of `p` until they first
    /// differ; head iff the fair bit is 0 where `p` has a 1.
    pub fn toss<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Toss {
        let mut i = 0;
        loop {
            let p = self.word(i);
            let u = rng.next_u64();
            if u != p {
                self.digits_consumed += 64 * i as u64 + (u ^ p).leading_zeros() as u64 + 1;
                let toss = if u < p { Toss::Head } else { Toss::Tail };
                self.count.record(toss);
                return toss;
            }
            i += 1;
        }
    }

    /// Total expansion digits compared so far.
    pub fn digits_consumed(&self) -> u64 {
        self.digits_consumed
    }

    pub fn count(&self) -> HeadCount {
        self.count
    }
}

/// Result of the digit-extraction procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MembershipEstimate {
    pub guess: bool,
    pub heads: u64,
    pub tosses: u64,
}

/// Tosses the language's coin `64^k` times and guesses `x_k` as bit
/// `3k + 3` (1-based from the least significant end) of the head count.
pub fn estimate_membership_bit<R: RngCore + ?Sized>(
    spec: &LanguageSpec,
    k: u32,
    toss_budget: u64,
    rng: &mut R,
) -> Result<MembershipEstimate> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let tosses = 64u64
        .checked_pow(k)
        .filter(|&t| t <= toss_budget)
        .ok_or_else(|| {
            Error::Budget(format!(
                "64^{k} tosses exceed the toss budget {toss_budget}"
            ))
        })?;
    let mut coin = BiasedCoin::new(ProbBitStream::new(spec.clone()));
    for _ in 0..tosses {
        coin.toss(rng);
    }
    let heads = coin.count().heads;
    Ok(MembershipEstimate {
        guess: (heads >> (3 * k + 2)) & 1 == 1,
        heads,
        tosses,
    })
}

/// Counts `t` in blocks of `8^k`, keeping the block index mod 8; the bit
/// is 1 iff the final index lies in `4..=7`.
pub fn head_block_digit(t: u64, k: u32) -> bool {
    let block = 8u128.pow(k);
    let j = (t as u128 / block) % 8;
    j >= 4
}
