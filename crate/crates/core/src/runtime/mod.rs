//! Verifier execution substrate.
//!
//! A [`Verifier`] owns the input tape, a metered work tape, the private
//! random source and the prover channels of one run. Every primitive
//! advances the step meter and checks the [`ResourceBudget`]; exhausting a
//! budget unwinds the protocol with [`Halt`], which becomes a timeout.

mod channel;
mod tape;
mod walk;

pub use channel::{
    CommCell, CounterMessage, CounterProver, Prover, ProverStrategy, ScriptedProver, TapeProver,
    Triple, END_OF_MESSAGE,
};
pub use tape::{BinaryCounter, InputTape, Region, WorkTape};
pub use walk::{barriers, random_walk, WalkEnd, WalkMode, WalkOutcome};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coins::{BiasedCoin, BinaryExpansion, Toss};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
    Timeout,
}

/// Result of one protocol run, with its resource meter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub decision: Decision,
    pub steps: u64,
    pub work_cells: u64,
    pub prover_symbols: u64,
    /// Every input-head reversal happened on an end-marker.
    pub sweeping_ok: bool,
    /// The input head never moved left.
    #[serde(skip)]
    pub one_way_ok: bool,
    #[serde(skip)]
    pub tosses: u64,
}

impl Outcome {
    pub fn accepted(&self) -> bool {
        self.decision == Decision::Accept
    }

    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }
}

/// True iff every recorded head reversal occurred on a marker cell.
pub fn meter_assert_sweeping(outcome: &Outcome) -> bool {
    outcome.sweeping_ok
}

/// Caps on a single run. A run exceeding any cap ends in a timeout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourceBudget {
    pub max_steps: u64,
    pub max_prover_symbols: u64,
    pub max_work_cells: u64,
    pub max_tosses: u64,
}

impl Default for ResourceBudget {
    fn default() -> Self {
        Self {
            max_steps: 1 << 34,
            max_prover_symbols: 1 << 34,
            max_work_cells: 1 << 20,
            max_tosses: crate::coins::DEFAULT_TOSS_BUDGET,
        }
    }
}

impl ResourceBudget {
    pub fn with_steps(max_steps: u64) -> Self {
        Self {
            max_steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.max_steps == 0
            || self.max_prover_symbols == 0
            || self.max_work_cells == 0
            || self.max_tosses == 0
        {
            return Err(crate::Error::InvalidParameter(
                "all budget limits must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The budget that was exhausted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Halt {
    Steps,
    ProverSymbols,
    WorkCells,
    Tosses,
}

pub type Run<T> = std::result::Result<T, Halt>;

/// Which party a derived random stream belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamPurpose {
    Verifier = 0,
    Prover = 1,
    Aux = 2,
}

/// Independent generator for `(seed, trial, purpose)`.
pub fn trial_rng(seed: u64, trial: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}

/// Runtime state of one verifier run.
pub struct Verifier {
    input: InputTape,
    work: WorkTape,
    rng: ChaCha8Rng,
    bits: u64,
    bits_left: u32,
    budget: ResourceBudget,
    steps: u64,
    prover_symbols: u64,
    tosses: u64,
    provers: Vec<Prover>,
    cells: Vec<CommCell>,
}

impl Verifier {
    pub fn new(
        input: &[u8],
        provers: Vec<Prover>,
        budget: ResourceBudget,
        rng: ChaCha8Rng,
    ) -> Self {
        let cells = vec![CommCell::default(); provers.len()];
        Self {
            input: InputTape::new(input),
            work: WorkTape::default(),
            rng,
            bits: 0,
            bits_left: 0,
            budget,
            steps: 0,
            prover_symbols: 0,
            tosses: 0,
            provers,
            cells,
        }
    }

    pub fn budget(&self) -> &ResourceBudget {
        &self.budget
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Advances the step meter by `n`.
    pub fn tick(&mut self, n: u64) -> Run<()> {
        self.steps = self.steps.saturating_add(n);
        if self.steps > self.budget.max_steps {
            return Err(Halt::Steps);
        }
        Ok(())
    }

    // ---- input tape ----

    pub fn input(&self) -> &InputTape {
        &self.input
    }

    pub fn n(&self) -> usize {
        self.input.len()
    }

    pub fn symbol(&self) -> u8 {
        self.input.symbol()
    }

    pub fn head(&self) -> usize {
        self.input.head()
    }

    /// Moves the input head one cell; returns false (without moving) at a
    /// marker that would be crossed.
    pub fn shift(&mut self, dir: i8) -> Run<bool> {
        self.tick(1)?;
        Ok(self.input.shift(dir))
    }

    pub fn move_right(&mut self) -> Run<bool> {
        self.shift(1)
    }

    pub fn move_left(&mut self) -> Run<bool> {
        self.shift(-1)
    }

    pub fn to_left_end(&mut self) -> Run<()> {
        while !self.input.at_left_end() {
            self.shift(-1)?;
        }
        Ok(())
    }

    pub fn to_right_end(&mut self) -> Run<()> {
        while !self.input.at_right_end() {
            self.shift(1)?;
        }
        Ok(())
    }

    pub fn at_left_end(&self) -> bool {
        self.input.at_left_end()
    }

    pub fn at_right_end(&self) -> bool {
        self.input.at_right_end()
    }

    // ---- work tape ----

    pub fn alloc(&mut self, len: usize) -> Region {
        self.work.alloc(len)
    }

    /// Marks cells `from..to` of `region` as visited.
    pub fn touch(&mut self, region: Region, from: usize, to: usize) -> Run<()> {
        self.work.touch(region, from, to);
        if self.work.visited() > self.budget.max_work_cells {
            return Err(Halt::WorkCells);
        }
        Ok(())
    }

    pub fn work_cells(&self) -> u64 {
        self.work.visited()
    }

    pub fn binary_counter(&mut self, width: usize) -> Run<BinaryCounter> {
        let region = self.alloc(width);
        self.touch(region, 0, 1)?;
        Ok(BinaryCounter { region, value: 0 })
    }

    /// Increments a binary counter, walking over the carried bits and back.
    /// Returns true if the carry ran off the counter's top bit.
    pub fn counter_inc(&mut self, c: &mut BinaryCounter) -> Run<bool> {
        let carried = c.value.trailing_ones() as usize + 1;
        self.tick(2 * carried as u64)?;
        self.touch(c.region, 0, carried)?;
        if carried > c.region.len {
            c.value = 0;
            return Ok(true);
        }
        c.value += 1;
        Ok(false)
    }

    // ---- randomness ----

    pub fn fair_bit(&mut self) -> bool {
        if self.bits_left == 0 {
            self.bits = self.rng.next_u64();
            self.bits_left = 64;
        }
        let b = self.bits & 1 == 1;
        self.bits >>= 1;
        self.bits_left -= 1;
        b
    }

    /// Uniform value in `0..k` from fair bits, by rejection.
    pub fn uniform_choice(&mut self, k: u32) -> u32 {
        assert!(k >= 1);
        if k == 1 {
            return 0;
        }
        let width = 32 - (k - 1).leading_zeros();
        loop {
            let mut v = 0u32;
            for _ in 0..width {
                v = (v << 1) | self.fair_bit() as u32;
            }
            if v < k {
                return v;
            }
        }
    }

    /// True with probability `2^-b`.
    pub fn bernoulli_pow2(&mut self, b: u32) -> bool {
        (0..b).all(|_| !self.fair_bit())
    }

    /// True with probability `p ∈ [0, 1]`, exactly: fair bits are compared
    /// with the binary expansion of `p` until they first differ.
    pub fn bernoulli_ratio(&mut self, p: &BigRational) -> bool {
        assert!(
            !p.is_negative() && *p <= BigRational::one(),
            "probability out of range"
        );
        let den: BigInt = p.denom().clone();
        let mut num: BigInt = p.numer().clone();
        loop {
            num <<= 1;
            let digit = num >= den;
            if digit {
                num -= &den;
            }
            if num.is_zero() && !digit {
                // the remaining expansion is all zeros
                return false;
            }
            let u = self.fair_bit();
            if u != digit {
                return digit;
            }
        }
    }

    pub fn toss<E: BinaryExpansion>(&mut self, coin: &mut BiasedCoin<E>) -> Run<Toss> {
        self.tick(1)?;
        self.tosses += 1;
        if self.tosses > self.budget.max_tosses {
            return Err(Halt::Tosses);
        }
        Ok(coin.toss(&mut self.rng))
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Length-checking walk on the input tape from cell 1. With the
    /// calibrated barriers a walk that reaches cell n takes one more step
    /// onto the right marker.
    pub fn walk(&mut self, mode: WalkMode) -> Run<WalkEnd> {
        let n = self.n();
        assert!(n >= 1, "walk on an empty input");
        while self.head() != 1 {
            let dir = if self.head() == 0 { 1 } else { -1 };
            self.shift(dir)?;
        }
        let (left, right) = barriers(n as u64, mode);
        loop {
            let pos = self.head() as u64;
            if pos == left {
                return Ok(WalkEnd::Left);
            }
            if pos == right {
                if !self.at_right_end() {
                    self.shift(1)?;
                }
                return Ok(WalkEnd::Right);
            }
            let dir = if self.fair_bit() { 1 } else { -1 };
            self.shift(dir)?;
        }
    }

    // ---- provers ----

    pub fn prover_count(&self) -> usize {
        self.provers.len()
    }

    fn meter_symbols(&mut self, n: u64) -> Run<()> {
        self.prover_symbols = self.prover_symbols.saturating_add(n);
        if self.prover_symbols > self.budget.max_prover_symbols {
            return Err(Halt::ProverSymbols);
        }
        Ok(())
    }

    /// Writes `query` into the channel's cell and reads the prover's reply.
    pub fn exchange(&mut self, channel: usize, query: u8) -> Run<u8> {
        self.tick(1)?;
        self.meter_symbols(1)?;
        let reply = match &mut self.provers[channel] {
            Prover::Stream(p) => p.respond(query),
            other => panic!("channel {channel} holds a {}", other.kind()),
        };
        let cell = &mut self.cells[channel];
        cell.last_sent = Some(query);
        cell.last_received = Some(reply);
        cell.rounds += 1;
        Ok(reply)
    }

    /// Reads a counter report; the verifier scans the whole message.
    pub fn counter_report(&mut self, channel: usize) -> Run<CounterMessage> {
        let msg = match &mut self.provers[channel] {
            Prover::Counter(p) => p.report(),
            other => panic!("channel {channel} holds a {}", other.kind()),
        };
        match msg {
            CounterMessage::Counts(s) => {
                let len = s.iter().fold(1u64, |acc, &x| acc.saturating_add(x));
                self.tick(len)?;
                self.meter_symbols(len)?;
            }
            CounterMessage::Malformed => {
                self.tick(1)?;
                self.meter_symbols(1)?;
            }
            CounterMessage::Endless => {
                // an endless message exhausts whichever cap comes first
                let room = self.budget.max_steps.saturating_sub(self.steps);
                let sym_room = self
                    .budget
                    .max_prover_symbols
                    .saturating_sub(self.prover_symbols);
                let burn = room.min(sym_room).saturating_add(1);
                self.meter_symbols(burn)?;
                self.tick(burn)?;
            }
        }
        Ok(msg)
    }

    pub fn counter_update(&mut self, channel: usize, deltas: [i8; 4]) -> Run<()> {
        self.tick(1)?;
        match &mut self.provers[channel] {
            Prover::Counter(p) => p.update(deltas),
            other => panic!("channel {channel} holds a {}", other.kind()),
        }
        Ok(())
    }

    pub fn counter_restart(&mut self, channel: usize) {
        if let Prover::Counter(p) = &mut self.provers[channel] {
            p.restart();
        }
    }

    pub fn tape_store(&mut self, channel: usize, index: usize, triple: Triple) -> Run<()> {
        self.tick(1)?;
        self.meter_symbols(3)?;
        match &mut self.provers[channel] {
            Prover::Tape(p) => p.store(index, triple),
            other => panic!("channel {channel} holds a {}", other.kind()),
        }
        Ok(())
    }

    pub fn tape_fetch(&mut self, channel: usize, index: usize) -> Run<Option<Triple>> {
        self.tick(1)?;
        self.meter_symbols(3)?;
        Ok(match &mut self.provers[channel] {
            Prover::Tape(p) => p.fetch(index),
            other => panic!("channel {channel} holds a {}", other.kind()),
        })
    }

    pub fn comm_cell(&self, channel: usize) -> CommCell {
        self.cells[channel]
    }

    /// Closes the run, turning an exhausted budget into a timeout.
    pub fn finish(&self, result: Run<Decision>) -> Outcome {
        Outcome {
            decision: result.unwrap_or(Decision::Timeout),
            steps: self.steps,
            work_cells: self.work.visited(),
            prover_symbols: self.prover_symbols,
            sweeping_ok: self.input.sweeping_ok(),
            one_way_ok: self.input.one_way_ok(),
            tosses: self.tosses,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verifier(input: &[u8]) -> Verifier {
        Verifier::new(
            input,
            Vec::new(),
            ResourceBudget::default(),
            trial_rng(1, 0, StreamPurpose::Verifier),
        )
    }

    #[test]
    fn step_budget_halts() {
        let mut v = Verifier::new(
            b"aaaa",
            Vec::new(),
            ResourceBudget::with_steps(3),
            trial_rng(0, 0, StreamPurpose::Verifier),
        );
        let r = v.to_right_end();
        assert_eq!(r, Err(Halt::Steps));
        let out = v.finish(r.map(|_| Decision::Accept));
        assert_eq!(out.decision, Decision::Timeout);
    }

    #[test]
    fn counter_increment_meters_carries() {
        let mut v = verifier(b"");
        let mut c = v.binary_counter(4).unwrap();
        for _ in 0..15 {
            assert!(!v.counter_inc(&mut c).unwrap());
        }
        assert_eq!(c.value(), 15);
        assert_eq!(v.work_cells(), 4);
        assert!(v.counter_inc(&mut c).unwrap());
    }

    #[test]
    fn exact_rational_bernoulli() {
        let mut v = verifier(b"");
        let p = BigRational::new(1.into(), 3.into());
        let n = 60_000;
        let hits = (0..n).filter(|_| v.bernoulli_ratio(&p)).count();
        let sigma = (2.0f64 / 9.0 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 1.0 / 3.0).abs() < 4.0 * sigma);
        assert!((0..100).all(|_| v.bernoulli_ratio(&BigRational::one())));
        assert!((0..100).all(|_| !v.bernoulli_ratio(&BigRational::zero())));
        let half = BigRational::new(1.into(), 2.into());
        let h = (0..n).filter(|_| v.bernoulli_ratio(&half)).count();
        assert!((h as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn uniform_choice_covers_range() {
        let mut v = verifier(b"");
        let mut seen = [0u32; 3];
        for _ in 0..30_000 {
            seen[v.uniform_choice(3) as usize] += 1;
        }
        for s in seen {
            assert!((s as f64 - 10_000.0).abs() < 400.0, "{seen:?}");
        }
    }

    #[test]
    fn walk_moves_head_to_an_end() {
        let mut v = verifier(b"aaaa");
        let mut right = 0;
        for _ in 0..4000 {
            match v.walk(WalkMode::Calibrated).unwrap() {
                WalkEnd::Right => {
                    assert!(v.at_right_end());
                    right += 1;
                }
                WalkEnd::Left => assert!(v.at_left_end()),
            }
        }
        assert!((right as f64 / 4000.0 - 0.25).abs() < 0.03);
        assert!(!v.finish(Ok(Decision::Accept)).sweeping_ok);
    }

    #[test]
    fn outcome_json_shape() {
        let v = verifier(b"ab");
        let out = v.finish(Ok(Decision::Reject));
        let json = serde_json::to_value(&out).unwrap();
        let keys: Vec<&str> = json
            .as_object()
            .unwrap()
            .keys()
            .map(|k| k.as_str())
            .collect();
        assert_eq!(keys.len(), 5);
        for k in [
            "decision",
            "steps",
            "work_cells",
            "prover_symbols",
            "sweeping_ok",
        ] {
            assert!(keys.contains(&k));
        }
        assert_eq!(json["decision"], "reject");
    }

    #[test]
    fn trial_streams_differ() {
        let mut a = trial_rng(5, 0, StreamPurpose::Verifier);
        let mut b = trial_rng(5, 1, StreamPurpose::Verifier);
        let mut c = trial_rng(5, 0, StreamPurpose::Prover);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
        assert_eq!(x, trial_rng(5, 0, StreamPurpose::Verifier).next_u64());
    }
}
