//! Sweeping verifier that simulates the four-counter machine while a
//! prover stores the counters, auditing the prover with lotteries.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::coins::{BiasedCoin, ProbBitStream};
use crate::langspace::{membership_bit, LanguageSpec};
use crate::runtime::{CounterMessage, Decision, Halt, Run, Verifier};

use super::decide;
use super::recognize::{run_four_counter, CounterBackend, Step, Stop};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LotteryMode {
    /// Run rounds, sampling the lotteries, until a decision or a budget cap.
    #[default]
    Sampled,
    /// Sample one coin path and report the exact round probabilities.
    ExactLottery,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakVerdict {
    /// The round reached the lotteries.
    Lottery,
    /// The round rejected outright (grammar or a negative counter).
    Rejected,
    /// The empty input, decided without interaction.
    Deterministic(bool),
}

/// One round with its lottery probabilities. Both share the factor
/// `y^exponent`: `PrA = y^exponent · pr_a` and `PrR = y^exponent · pr_r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakRound {
    pub verdict: WeakVerdict,
    pub x_prime: bool,
    pub exponent: u128,
    pub pr_a: BigRational,
    pub pr_r: BigRational,
    /// Step pairs where a counter did not move as instructed.
    pub discrepancies: u64,
    /// Machine steps `g - 1` (reports minus one).
    pub steps: u64,
}

impl WeakRound {
    fn new(verdict: WeakVerdict) -> Self {
        Self {
            verdict,
            x_prime: false,
            exponent: 0,
            pr_a: BigRational::one(),
            pr_r: BigRational::one(),
            discrepancies: 0,
            steps: 0,
        }
    }

    /// Per-round decision weights `(accept, reject)`, as mantissas of
    /// `y^scale` where `scale` is the returned exponent.
    pub fn decision_weights(&self, y: Ratio<u64>) -> (u128, BigRational, BigRational) {
        let y = to_big(y);
        match self.verdict {
            WeakVerdict::Lottery => {
                let (acc, rej) = if self.x_prime {
                    (self.pr_a.clone(), &y * &self.pr_r)
                } else {
                    (BigRational::zero(), &self.pr_a + &y * &self.pr_r)
                };
                (self.exponent, acc, rej)
            }
            WeakVerdict::Rejected => (0, BigRational::zero(), BigRational::one()),
            WeakVerdict::Deterministic(x) => {
                let (a, r) = if x { (1, 0) } else { (0, 1) };
                (
                    0,
                    BigRational::from_integer(a.into()),
                    BigRational::from_integer(r.into()),
                )
            }
        }
    }
}

pub(crate) fn to_big(r: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

struct ProverCounters<'a> {
    v: &'a mut Verifier,
    channel: usize,
    current: [u64; 4],
    y2: BigRational,
    y4: BigRational,
    round: WeakRound,
}

impl ProverCounters<'_> {
    fn read(&mut self) -> Step<[u64; 4]> {
        match self.v.counter_report(self.channel)? {
            CounterMessage::Counts(s) => Ok(s),
            CounterMessage::Malformed => Err(Stop::Reject),
            // the report burned the budget already
            CounterMessage::Endless => Err(Stop::Halt(Halt::Steps)),
        }
    }
}

impl CounterBackend for ProverCounters<'_> {
    fn verifier(&mut self) -> &mut Verifier {
        self.v
    }

    fn is_zero(&mut self, counter: usize) -> Step<bool> {
        Ok(self.current[counter] == 0)
    }

    fn step(&mut self, deltas: [i8; 4]) -> Step<()> {
        self.v.counter_update(self.channel, deltas)?;
        let next = self.read()?;
        for j in 0..4 {
            let a = self.current[j] as i128;
            let b = next[j] as i128 - deltas[j] as i128;
            if b < 0 {
                return Err(Stop::Reject);
            }
            self.round.exponent += 4 * a.min(b) as u128;
            let delta = (a - b).unsigned_abs();
            if delta > 0 {
                let d = u32::try_from(delta).map_err(|_| Stop::Halt(Halt::Steps))?;
                self.round.discrepancies += 1;
                self.round.pr_a *= num_traits::pow(self.y2.clone(), d as usize);
                let half = BigRational::new(1.into(), 2.into());
                self.round.pr_r *=
                    (BigRational::one() + num_traits::pow(self.y4.clone(), d as usize)) * half;
            }
        }
        self.current = next;
        self.round.steps += 1;
        Ok(())
    }
}

/// Plays one round: simulate the machine against the prover's counter
/// reports and accumulate the lottery probabilities.
pub fn weak_round_exact(
    v: &mut Verifier,
    spec: &LanguageSpec,
    y: Ratio<u64>,
    channel: usize,
) -> Run<WeakRound> {
    if v.n() == 0 {
        v.to_right_end()?;
        return Ok(WeakRound::new(WeakVerdict::Deterministic(membership_bit(
            spec, 1,
        ))));
    }
    let yb = to_big(y);
    let mut backend = ProverCounters {
        v: &mut *v,
        channel,
        current: [0; 4],
        y2: &yb * &yb,
        y4: num_traits::pow(yb.clone(), 4),
        round: WeakRound::new(WeakVerdict::Lottery),
    };
    let mut coin = BiasedCoin::new(ProbBitStream::new(spec.clone()));
    let result = backend.read().and_then(|s| {
        backend.current = s;
        run_four_counter(&mut backend, spec.alphabet(), &mut coin)
    });
    let mut round = std::mem::replace(&mut backend.round, WeakRound::new(WeakVerdict::Lottery));
    match result {
        Ok(Some(run)) => round.x_prime = run.x_prime,
        Ok(None) => unreachable!("nonempty input"),
        Err(Stop::Reject) => round.verdict = WeakVerdict::Rejected,
        Err(Stop::Halt(h)) => return Err(h),
    }
    Ok(round)
}

/// Sampled-mode verifier: rounds repeat (head back to `¢`, prover
/// restarted) until a lottery yields a decision or the budget runs out.
pub fn weak_verify_sweeping(
    v: &mut Verifier,
    spec: &LanguageSpec,
    y: Ratio<u64>,
    channel: usize,
) -> Run<Decision> {
    let yb = to_big(y);
    loop {
        let round = weak_round_exact(v, spec, y, channel)?;
        match round.verdict {
            WeakVerdict::Deterministic(x) => return Ok(decide(x)),
            WeakVerdict::Rejected => return Ok(Decision::Reject),
            WeakVerdict::Lottery => {}
        }
        let choose_a = v.fair_bit();
        let mantissa = if choose_a { &round.pr_a } else { &round.pr_r };
        let mut wins = true;
        let mut e = 0u128;
        while wins && e < round.exponent {
            v.tick(1)?;
            wins = v.bernoulli_ratio(&yb);
            e += 1;
        }
        let wins = wins && v.bernoulli_ratio(mantissa);
        if wins {
            if choose_a {
                return Ok(decide(round.x_prime));
            }
            if v.bernoulli_ratio(&yb) {
                return Ok(Decision::Reject);
            }
        }
        v.to_right_end()?;
        v.to_left_end()?;
        v.counter_restart(channel);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langspace::{Alphabet, BitTail};
    use crate::runtime::{trial_rng, CounterProver, Prover, ResourceBudget, StreamPurpose};

    struct Honest([u64; 4]);

    impl CounterProver for Honest {
        fn id(&self) -> &str {
            "honest"
        }
        fn report(&mut self) -> CounterMessage {
            CounterMessage::Counts(self.0)
        }
        fn update(&mut self, d: [i8; 4]) {
            for (c, x) in self.0.iter_mut().zip(d) {
                *c = c.checked_add_signed(x as i64).unwrap();
            }
        }
        fn restart(&mut self) {
            self.0 = [0; 4];
        }
    }

    fn verifier(w: &[u8], prover: impl CounterProver + 'static, seed: u64) -> Verifier {
        Verifier::new(
            w,
            vec![Prover::Counter(Box::new(prover))],
            ResourceBudget::default(),
            trial_rng(seed, 0, StreamPurpose::Verifier),
        )
    }

    #[test]
    fn honest_round_has_equal_lotteries() {
        let spec = LanguageSpec::bit_rule(Alphabet::unary(), vec![], BitTail::AllOne).unwrap();
        let mut v = verifier(b"a", Honest([0; 4]), 3);
        let round = weak_round_exact(&mut v, &spec, Ratio::new(1, 4), 0).unwrap();
        assert_eq!(round.verdict, WeakVerdict::Lottery);
        assert_eq!(round.discrepancies, 0);
        assert_eq!(round.pr_a, round.pr_r);
        assert!(round.exponent > 0);
        assert!(v.finish(Ok(Decision::Accept)).sweeping_ok);
    }

    #[test]
    fn single_drift_tilts_toward_rejection() {
        struct Drift(Honest, u64);
        impl CounterProver for Drift {
            fn id(&self) -> &str {
                "drift"
            }
            fn report(&mut self) -> CounterMessage {
                self.1 += 1;
                if self.1 == 500 {
                    self.0 .0[1] += 1;
                }
                self.0.report()
            }
            fn update(&mut self, d: [i8; 4]) {
                self.0.update(d)
            }
            fn restart(&mut self) {}
        }
        let spec = LanguageSpec::bit_rule(Alphabet::unary(), vec![], BitTail::AllZero).unwrap();
        let mut v = verifier(b"a", Drift(Honest([0; 4]), 0), 1);
        let round = weak_round_exact(&mut v, &spec, Ratio::new(1, 4), 0).unwrap();
        assert_eq!(round.verdict, WeakVerdict::Lottery);
        assert_eq!(round.discrepancies, 1);
        let ratio = &round.pr_r / &round.pr_a;
        assert!(ratio > BigRational::from_integer(8.into()));
    }

    #[test]
    fn malformed_message_rejects() {
        struct Bad;
        impl CounterProver for Bad {
            fn id(&self) -> &str {
                "bad"
            }
            fn report(&mut self) -> CounterMessage {
                CounterMessage::Malformed
            }
            fn update(&mut self, _: [i8; 4]) {}
            fn restart(&mut self) {}
        }
        let spec = LanguageSpec::bit_rule(Alphabet::unary(), vec![], BitTail::AllOne).unwrap();
        let mut v = verifier(b"a", Bad, 0);
        assert_eq!(
            weak_verify_sweeping(&mut v, &spec, Ratio::new(1, 4), 0),
            Ok(Decision::Reject)
        );
    }
}
