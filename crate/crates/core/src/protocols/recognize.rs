//! Prover-free recognizers: digit extraction on binary work-tape counters
//! and the one-way four-counter machine.

use crate::coins::{BiasedCoin, BinaryExpansion, ProbBitStream};
use crate::langspace::{membership_bit, Alphabet, LanguageSpec, RIGHT_END};
use crate::runtime::{Decision, Halt, Run, Verifier};

use super::decide;

/// Why a counter-machine run stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    Halt(Halt),
    /// The counter store misbehaved and the run rejects.
    Reject,
}

impl From<Halt> for Stop {
    fn from(h: Halt) -> Self {
        Stop::Halt(h)
    }
}

pub type Step<T> = std::result::Result<T, Stop>;

/// Storage for the four counters of the machine. Each `step` call is one
/// machine transition; `is_zero` reads the values the step started with.
pub trait CounterBackend {
    fn verifier(&mut self) -> &mut Verifier;
    fn is_zero(&mut self, counter: usize) -> Step<bool>;
    fn step(&mut self, deltas: [i8; 4]) -> Step<()>;
}

/// Counters held by the automaton itself.
pub struct LocalCounters<'a> {
    pub v: &'a mut Verifier,
    pub values: [u64; 4],
}

impl CounterBackend for LocalCounters<'_> {
    fn verifier(&mut self) -> &mut Verifier {
        self.v
    }

    fn is_zero(&mut self, counter: usize) -> Step<bool> {
        Ok(self.values[counter] == 0)
    }

    fn step(&mut self, deltas: [i8; 4]) -> Step<()> {
        self.v.tick(1)?;
        for (c, d) in self.values.iter_mut().zip(deltas) {
            *c = c
                .checked_add_signed(d as i64)
                .expect("counter machine decremented an empty counter");
        }
        Ok(())
    }
}

const C1: usize = 0;
const C2: usize = 1;
const C3: usize = 2;
const C4: usize = 3;

fn delta(pairs: &[(usize, i8)]) -> [i8; 4] {
    let mut d = [0i8; 4];
    for &(c, v) in pairs {
        d[c] = v;
    }
    d
}

/// Reads the input one-way and leaves `C1 = lex(w)`, using the update
/// `C1 <- k(C1 - 1) + lex(σ)` per further symbol. Returns false if the
/// input is empty (nothing is read beyond `$`).
pub(crate) fn lex_phase<B: CounterBackend>(b: &mut B, alphabet: &Alphabet) -> Step<bool> {
    let k = alphabet.size();
    let mut first = true;
    loop {
        b.verifier().move_right()?;
        let s = b.verifier().symbol();
        if s == RIGHT_END {
            return Ok(!first);
        }
        let lex = alphabet
            .index_of(s)
            .expect("input checked against the alphabet")
            + 2;
        if !first {
            b.step(delta(&[(C1, -1)]))?;
            while !b.is_zero(C1)? {
                b.step(delta(&[(C1, -1), (C4, 1)]))?;
            }
            while !b.is_zero(C4)? {
                b.step(delta(&[(C4, -1), (C1, 1)]))?;
                for _ in 1..k {
                    b.step(delta(&[(C1, 1)]))?;
                }
            }
        }
        for _ in 0..lex {
            b.step(delta(&[(C1, 1)]))?;
        }
        first = false;
    }
}

/// Multiplies counter `c` by `factor` through C4.
fn multiply<B: CounterBackend>(b: &mut B, c: usize, factor: u32) -> Step<()> {
    while !b.is_zero(c)? {
        b.step(delta(&[(c, -1), (C4, 1)]))?;
    }
    while !b.is_zero(C4)? {
        b.step(delta(&[(C4, -1), (c, 1)]))?;
        for _ in 1..factor {
            b.step(delta(&[(c, 1)]))?;
        }
    }
    Ok(())
}

/// One execution of the tossing part of the machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FourCounterRun {
    /// `l`, as recovered by the setup loop.
    pub rank: u64,
    pub x_prime: bool,
    pub heads: u64,
}

/// From `C1 = l`: builds `C2 = 64^l`, `C3 = 4·8^l`, then tosses `C2`
/// times, moving each head from the active block counter to the other
/// one and flipping `x'` whenever the active counter empties.
pub(crate) fn toss_phase<B: CounterBackend, E: BinaryExpansion>(
    b: &mut B,
    coin: &mut BiasedCoin<E>,
) -> Step<FourCounterRun> {
    b.step(delta(&[(C1, -1)]))?;
    for i in 0..64 {
        let d = if i < 32 {
            delta(&[(C2, 1), (C3, 1)])
        } else {
            delta(&[(C2, 1)])
        };
        b.step(d)?;
    }
    let mut rank = 1;
    while !b.is_zero(C1)? {
        b.step(delta(&[(C1, -1)]))?;
        rank += 1;
        multiply(b, C2, 64)?;
        multiply(b, C3, 8)?;
    }
    let (mut active, mut other) = (C3, C4);
    let mut x_prime = false;
    let mut heads = 0;
    loop {
        if b.is_zero(active)? {
            x_prime = !x_prime;
            std::mem::swap(&mut active, &mut other);
        }
        if b.is_zero(C2)? {
            break;
        }
        let toss = b.verifier().toss(coin)?;
        let mut d = delta(&[(C2, -1)]);
        if toss.is_head() {
            heads += 1;
            d[active] = -1;
            d[other] = 1;
        }
        b.step(d)?;
    }
    Ok(FourCounterRun {
        rank,
        x_prime,
        heads,
    })
}

/// Lex phase followed by one toss phase.
pub fn run_four_counter<B: CounterBackend, E: BinaryExpansion>(
    b: &mut B,
    alphabet: &Alphabet,
    coin: &mut BiasedCoin<E>,
) -> Step<Option<FourCounterRun>> {
    if !lex_phase(b, alphabet)? {
        return Ok(None);
    }
    toss_phase(b, coin).map(Some)
}

/// Decision and per-repetition details of the four-counter recognizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourCounterDetail {
    pub decision: Run<Decision>,
    pub runs: Vec<FourCounterRun>,
}

/// One-way four-counter recognizer. With `r > 1`, `r` copies of the
/// machine share the input pass and vote by majority.
pub fn recognize_1p4ca(v: &mut Verifier, spec: &LanguageSpec, r: u32) -> FourCounterDetail {
    let mut runs = Vec::new();
    let decision = (|| {
        if v.n() == 0 {
            return Ok(decide(membership_bit(spec, 1)));
        }
        let mut coin = BiasedCoin::new(ProbBitStream::new(spec.clone()));
        let mut backend = LocalCounters {
            v: &mut *v,
            values: [0; 4],
        };
        let lexed = match lex_phase(&mut backend, spec.alphabet()) {
            Ok(x) => x,
            Err(Stop::Halt(h)) => return Err(h),
            Err(Stop::Reject) => unreachable!("local counters never reject"),
        };
        assert!(lexed);
        let start = backend.values;
        let mut accepts = 0;
        for _ in 0..r {
            backend.values = start;
            let run = match toss_phase(&mut backend, &mut coin) {
                Ok(run) => run,
                Err(Stop::Halt(h)) => return Err(h),
                Err(Stop::Reject) => unreachable!("local counters never reject"),
            };
            accepts += run.x_prime as u32;
            runs.push(run);
        }
        Ok(decide(2 * accepts > r))
    })();
    FourCounterDetail { decision, runs }
}

/// Digit extraction with two binary counters of width `6k + 1`: toss
/// until the toss counter reaches `64^k`, then read bit `3k + 3` of the
/// head counter.
fn extract_digit(v: &mut Verifier, spec: &LanguageSpec, k: u64) -> Run<Decision> {
    let width = k.saturating_mul(6).saturating_add(1);
    if width.saturating_mul(2) > v.budget().max_work_cells || width > 63 {
        // 64^k tosses cannot fit any budget well before this point
        return Err(if width.saturating_mul(2) > v.budget().max_work_cells {
            Halt::WorkCells
        } else {
            Halt::Tosses
        });
    }
    let mut tosses = v.binary_counter(width as usize)?;
    let mut heads = v.binary_counter(width as usize)?;
    let mut coin = BiasedCoin::new(ProbBitStream::new(spec.clone()));
    let top = (6 * k) as u32;
    while !tosses.bit(top) {
        if v.toss(&mut coin)?.is_head() {
            v.counter_inc(&mut heads)?;
        }
        v.counter_inc(&mut tosses)?;
    }
    Ok(decide(heads.bit((3 * k + 2) as u32)))
}

/// Linear-space recognizer for unary languages: `k = n + 1`.
pub fn recognize_unary_linear_space(v: &mut Verifier, spec: &LanguageSpec) -> Run<Decision> {
    let n = v.n() as u64;
    if n == 0 {
        return Ok(decide(membership_bit(spec, 1)));
    }
    // one scan of the input sizes the counters
    v.to_right_end()?;
    extract_digit(v, spec, n + 1)
}

/// Exponential-space recognizer: `k = lex(w)`, computed on a binary
/// counter during one scan of the input.
pub fn recognize_kary_exponential(v: &mut Verifier, spec: &LanguageSpec) -> Run<Decision> {
    if v.n() == 0 {
        return Ok(decide(membership_bit(spec, 1)));
    }
    let alphabet = spec.alphabet();
    let size = alphabet.size() as u64;
    // the rank counter has about n·log₂k + 1 bits
    let bits_per_symbol = 64 - size.leading_zeros() as usize;
    let width = v.n() * bits_per_symbol + 1;
    let region = v.alloc(width);
    let mut rank: u64 = 1;
    let mut overflow = false;
    let mut used = 1;
    while v.move_right()? && v.symbol() != RIGHT_END {
        let idx = alphabet
            .index_of(v.symbol())
            .expect("input checked against the alphabet") as u64;
        // lex(w·σ) = k·(lex(w) - 1) + lex(σ), with lex(ε) = 1
        match rank
            .checked_sub(1)
            .and_then(|x| x.checked_mul(size))
            .and_then(|x| x.checked_add(idx + 2))
        {
            Some(x) => rank = x,
            None => overflow = true,
        }
        used = (used + bits_per_symbol).min(width);
        v.tick(used as u64)?;
        v.touch(region, 0, used)?;
    }
    if overflow {
        return Err(Halt::WorkCells);
    }
    extract_digit(v, spec, rank)
}
