//! Log-space verifier for unary languages with fingerprinted prover
//! counts.

use crate::coins::{BiasedCoin, ProbBitStream};
use crate::fingerprint::{
    fingerprint_width, power_residue, sample_prime, ModCounter, ModOp, MAX_BITWIDTH,
};
use crate::langspace::{membership_bit, LanguageSpec};
use crate::runtime::{Decision, Run, Verifier};
use crate::{Error, Result};

use super::decide;

/// Asks for the `a^m b` stream.
pub const COUNT_QUERY: u8 = b'A';
/// Toss results sent back for every received `a`.
pub const HEAD_SYMBOL: u8 = b'h';
pub const TAIL_SYMBOL: u8 = b't';
/// Asks for the head count in binary, least significant bit first.
pub const BIN_QUERY: u8 = b'B';
pub const NEXT_BIT_QUERY: u8 = b'?';

/// Halting-walk threshold on the counter `C_h`.
const HALTING_LIMIT: u32 = 8;

/// Rejects parameter choices whose primes would exceed the supported width.
pub(crate) fn check_width(c: u32, n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    let width = fingerprint_width(c, n as u64 + 1);
    if width > MAX_BITWIDTH {
        return Err(Error::InvalidParameter(format!(
            "fingerprint width {width} bits (c = {c}, n = {n}) exceeds {MAX_BITWIDTH}"
        )));
    }
    Ok(())
}

fn bit_length(x: u64) -> usize {
    (64 - x.leading_zeros() as usize).max(1)
}

/// Verifies `a^n ∈ L` with `k = n + 1`: the prover announces `64^k` by a
/// stream of `a`s checked modulo a random prime, relays the head count of
/// the tosses made on the way, and the verifier reads bit `3k + 3` of it.
pub fn verify_unary_logspace(
    v: &mut Verifier,
    spec: &LanguageSpec,
    c: u32,
    channel: usize,
) -> Run<Decision> {
    let n = v.n();
    if n == 0 {
        return Ok(decide(membership_bit(spec, 1)));
    }
    let k = n as u64 + 1;
    let width = fingerprint_width(c, k);
    assert!(width <= MAX_BITWIDTH, "width checked before the run");
    let cells = width as usize;

    // p1, p2, r1, C1, C2, and the two phase-3 registers
    let registers = v.alloc(7 * cells);
    v.touch(registers, 0, 7 * cells)?;
    let halting_cells = v.alloc(bit_length(HALTING_LIMIT as u64));
    v.touch(halting_cells, 0, usize::MAX)?;
    let pos_cells = v.alloc(bit_length(6 * k + 1));
    v.touch(pos_cells, 0, usize::MAX)?;
    let k_cells = v.alloc(bit_length(k));
    v.touch(k_cells, 0, usize::MAX)?;

    let p1 = sample_prime(width, v.rng_mut()).expect("width within range");
    let p2 = sample_prime(width, v.rng_mut()).expect("width within range");
    v.tick(k * width as u64)?;
    let r1 = power_residue(64, k, p1);

    let mut coin = BiasedCoin::new(ProbBitStream::new(spec.clone()));
    let mut c1 = ModCounter::new(p1);
    let mut c2 = ModCounter::new(p2);
    let mut halting = 0;
    let mut sym = v.exchange(channel, COUNT_QUERY)?;
    loop {
        match sym {
            b'a' => {
                // halting walk: one full input scan per received symbol
                v.tick(n as u64 + 2)?;
                if v.bernoulli_pow2(6 * k as u32) {
                    halting += 1;
                    if halting == HALTING_LIMIT {
                        return Ok(Decision::Reject);
                    }
                }
                let head = v.toss(&mut coin)?.is_head();
                v.tick(2 * width as u64)?;
                c1.apply(ModOp::Inc);
                if head {
                    c2.apply(ModOp::Inc);
                }
                let reply = if head { HEAD_SYMBOL } else { TAIL_SYMBOL };
                sym = v.exchange(channel, reply)?;
            }
            b'b' => break,
            _ => return Ok(Decision::Reject),
        }
    }
    if c1.value() != r1 {
        return Ok(Decision::Reject);
    }

    let max_len = 6 * k + 1;
    let target = 3 * k + 2;
    let mut pos = 0u64;
    let mut pow = ModCounter::with_value(p2, 1);
    let mut acc = ModCounter::new(p2);
    let mut x_bit = false;
    let mut sym = v.exchange(channel, BIN_QUERY)?;
    loop {
        match sym {
            b'0' | b'1' => {
                if pos >= max_len {
                    return Ok(Decision::Reject);
                }
                let bit = sym == b'1';
                if pos == target {
                    x_bit = bit;
                }
                if bit {
                    acc.apply(ModOp::Add(pow.value()));
                }
                pow.apply(ModOp::Mul(2));
                v.tick(2 * width as u64)?;
                pos += 1;
                sym = v.exchange(channel, NEXT_BIT_QUERY)?;
            }
            b'b' => break,
            _ => return Ok(Decision::Reject),
        }
    }
    if acc.value() != c2.value() {
        return Ok(Decision::Reject);
    }
    Ok(decide(x_bit))
}
