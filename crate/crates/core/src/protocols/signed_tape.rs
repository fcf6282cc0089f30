//! Work tape kept by two provers as signed, nonce-chained triples
//! `(m_i, r_i, s_i)` with `s_i = m_i·a + r_i·b + r_(i-1) mod q`. Odd cells
//! live at prover 1, even cells at prover 2.

use crate::runtime::{Decision, Run, Triple, Verifier};
use crate::{Error, Result};

/// Transport of triples to and from the provers.
pub trait TapeIo {
    fn store(&mut self, index: usize, triple: Triple) -> Run<()>;
    fn fetch(&mut self, index: usize) -> Run<Option<Triple>>;
}

/// The verifier's private draws, uniform in `0..q`.
pub trait TapeRandomness {
    fn draw(&mut self, q: u64) -> u64;
}

/// Prover (1 or 2) holding 1-based cell `index`.
pub fn prover_of(index: usize) -> usize {
    if index % 2 == 1 {
        1
    } else {
        2
    }
}

impl TapeIo for Verifier {
    fn store(&mut self, index: usize, triple: Triple) -> Run<()> {
        self.tape_store(prover_of(index) - 1, index, triple)
    }

    fn fetch(&mut self, index: usize) -> Run<Option<Triple>> {
        self.tape_fetch(prover_of(index) - 1, index)
    }
}

impl TapeRandomness for Verifier {
    fn draw(&mut self, q: u64) -> u64 {
        self.uniform_choice(q as u32) as u64
    }
}

/// A failed signature check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Detection {
    pub cell: usize,
    /// 1 or 2.
    pub prover: usize,
}

pub type TapeResult = std::result::Result<(), Detection>;

/// Per-pass rewriting of the tape contents.
pub trait PassTransducer {
    /// New content for cell `index` (1-based) that currently holds `m`.
    fn cell(&mut self, index: usize, m: u64) -> u64;

    /// Content of one more cell past the end, if the pass grows the tape.
    fn append(&mut self) -> Option<u64> {
        None
    }
}

impl<F: FnMut(usize, u64) -> u64> PassTransducer for F {
    fn cell(&mut self, index: usize, m: u64) -> u64 {
        self(index, m)
    }
}

/// Verifier-side state: the secret keys, the current chain seed and the
/// tape length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedTape {
    q: u64,
    a: u64,
    b: u64,
    r0: u64,
    len: usize,
}

fn check_modulus(q: u64) -> Result<()> {
    if q < 2 || q > u32::MAX as u64 || !crate::fingerprint::is_prime(q as u128) {
        return Err(Error::InvalidParameter(format!(
            "signature modulus must be a prime below 2^32, got {q}"
        )));
    }
    Ok(())
}

impl SignedTape {
    fn sign(&self, m: u64, r: u64, prev: u64) -> u64 {
        let q = self.q as u128;
        ((m as u128 * self.a as u128 + r as u128 * self.b as u128 + prev as u128) % q) as u64
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Draws `a`, `b`, `r_0` and writes `contents` as cells `1..=len`.
    pub fn store<E: TapeIo + TapeRandomness>(
        env: &mut E,
        q: u64,
        contents: &[u64],
    ) -> Result<Run<Self>> {
        check_modulus(q)?;
        if let Some(&m) = contents.iter().find(|&&m| m >= q) {
            return Err(Error::InvalidParameter(format!(
                "tape symbol {m} does not fit modulus {q}"
            )));
        }
        let a = env.draw(q);
        let b = env.draw(q);
        let r0 = env.draw(q);
        let mut tape = SignedTape {
            q,
            a,
            b,
            r0,
            len: 0,
        };
        let mut prev = r0;
        for &m in contents {
            let r = env.draw(q);
            let s = tape.sign(m, r, prev);
            tape.len += 1;
            if let Err(h) = env.store(
                tape.len,
                Triple {
                    symbol: m,
                    nonce: r,
                    signature: s,
                },
            ) {
                return Ok(Err(h));
            }
            prev = r;
        }
        Ok(Ok(tape))
    }

    /// Verifies one fetched cell against the chain value `prev`.
    fn check(
        &self,
        index: usize,
        triple: Option<Triple>,
        prev: u64,
    ) -> std::result::Result<Triple, Detection> {
        let detection = Detection {
            cell: index,
            prover: prover_of(index),
        };
        let t = triple.ok_or(detection)?;
        if t.symbol >= self.q || t.nonce >= self.q || t.signature >= self.q {
            return Err(detection);
        }
        if self.sign(t.symbol, t.nonce, prev) != t.signature {
            return Err(detection);
        }
        Ok(t)
    }

    /// Reads every cell left to right, verifying the chain, and hands the
    /// verified symbols to `visit`.
    pub fn read<E: TapeIo>(
        &self,
        env: &mut E,
        mut visit: impl FnMut(usize, u64),
    ) -> Run<TapeResult> {
        let mut prev = self.r0;
        for i in 1..=self.len {
            let fetched = env.fetch(i)?;
            match self.check(i, fetched, prev) {
                Ok(t) => {
                    visit(i, t.symbol);
                    prev = t.nonce;
                }
                Err(d) => return Ok(Err(d)),
            }
        }
        Ok(Ok(()))
    }

    /// Reads and verifies every cell, rewrites it through `pass` with a
    /// fresh nonce chain (new `r_0` and `r_i`), and appends any cells the
    /// transducer asks for.
    pub fn update<E: TapeIo + TapeRandomness>(
        &mut self,
        env: &mut E,
        pass: &mut impl PassTransducer,
    ) -> Run<TapeResult> {
        let q = self.q;
        let new_r0 = env.draw(q);
        let mut prev_old = self.r0;
        let mut prev_new = new_r0;
        for i in 1..=self.len {
            let fetched = env.fetch(i)?;
            let t = match self.check(i, fetched, prev_old) {
                Ok(t) => t,
                Err(d) => return Ok(Err(d)),
            };
            let m = pass.cell(i, t.symbol);
            assert!(m < q, "transducer symbol out of range");
            let r = env.draw(q);
            let s = self.sign(m, r, prev_new);
            env.store(
                i,
                Triple {
                    symbol: m,
                    nonce: r,
                    signature: s,
                },
            )?;
            prev_old = t.nonce;
            prev_new = r;
        }
        while let Some(m) = pass.append() {
            assert!(m < q, "transducer symbol out of range");
            let r = env.draw(q);
            let s = self.sign(m, r, prev_new);
            self.len += 1;
            env.store(
                self.len,
                Triple {
                    symbol: m,
                    nonce: r,
                    signature: s,
                },
            )?;
            prev_new = r;
        }
        self.r0 = new_r0;
        Ok(Ok(()))
    }
}

/// Doubled symbol: content code with the head-marker flag.
pub(crate) fn with_head(code: u64, head: bool) -> u64 {
    2 * code + head as u64
}

/// Cell contents for `word`: each symbol's rank among the distinct
/// symbols, doubled, with the head-marker flag on cell 1.
pub fn tape_codes(word: &[u8], q: u64) -> Result<Vec<u64>> {
    let mut symbols: Vec<u8> = word.to_vec();
    symbols.sort_unstable();
    symbols.dedup();
    if 2 * symbols.len() as u64 > q {
        return Err(Error::InvalidParameter(format!(
            "q = {q} must exceed the doubled alphabet size {}",
            2 * symbols.len()
        )));
    }
    Ok(word
        .iter()
        .enumerate()
        .map(|(i, s)| with_head(symbols.binary_search(s).unwrap() as u64, i == 0))
        .collect())
}

/// Stores `codes`, reads them back, moves the head marker one cell right,
/// and reads again. Accepts iff no check fails.
pub fn signed_tape_session<E: TapeIo + TapeRandomness>(
    env: &mut E,
    q: u64,
    codes: &[u64],
) -> Result<Run<Decision>> {
    let mut tape = match SignedTape::store(env, q, codes)? {
        Ok(t) => t,
        Err(h) => return Ok(Err(h)),
    };
    Ok((|| {
        if tape.read(env, |_, _| {})?.is_err() {
            return Ok(Decision::Reject);
        }
        let len = tape.len();
        let mut carry = false;
        let mut shift = |i: usize, m: u64| {
            let head = m & 1 == 1;
            let out = (m & !1) | (carry || (head && i == len)) as u64;
            carry = head && i < len;
            out
        };
        if tape.update(env, &mut shift)?.is_err() {
            return Ok(Decision::Reject);
        }
        if tape.read(env, |_, _| {})?.is_err() {
            return Ok(Decision::Reject);
        }
        Ok(Decision::Accept)
    })())
}

/// The signed-tape protocol on the verifier's input.
pub fn run_signed_tape_protocol(v: &mut Verifier, q: u64) -> Result<Run<Decision>> {
    let codes = tape_codes(v.input().word(), q)?;
    check_modulus(q)?;
    for _ in 0..=codes.len() {
        if let Err(h) = v.move_right() {
            return Ok(Err(h));
        }
    }
    signed_tape_session(v, q, &codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    /// In-memory provers plus an odometer over all verifier draws.
    struct Env {
        cells: HashMap<usize, Vec<Triple>>,
        draws: Vec<u64>,
        pos: usize,
        fetches: usize,
        tamper: fn(usize, &[Triple], usize) -> Option<Triple>,
    }

    impl TapeIo for Env {
        fn store(&mut self, index: usize, t: Triple) -> Run<()> {
            self.cells.entry(index).or_default().push(t);
            Ok(())
        }
        fn fetch(&mut self, index: usize) -> Run<Option<Triple>> {
            self.fetches += 1;
            let hist = &self.cells[&index];
            Ok((self.tamper)(index, hist, self.fetches).or(hist.last().copied()))
        }
    }

    impl TapeRandomness for Env {
        fn draw(&mut self, _q: u64) -> u64 {
            let v = self.draws.get(self.pos).copied().unwrap_or(0);
            self.pos += 1;
            v
        }
    }

    /// Store two cells, read, update (identity), read. Returns whether
    /// any check fired and the number of draws used.
    fn session(
        draws: Vec<u64>,
        tamper: fn(usize, &[Triple], usize) -> Option<Triple>,
    ) -> (bool, usize) {
        let mut env = Env {
            cells: HashMap::new(),
            draws,
            pos: 0,
            fetches: 0,
            tamper,
        };
        let mut tape = SignedTape::store(&mut env, 5, &[1, 3]).unwrap().unwrap();
        let mut flagged = tape.read(&mut env, |_, _| {}).unwrap().is_err();
        if !flagged {
            flagged = tape
                .update(&mut env, &mut |_: usize, m: u64| m)
                .unwrap()
                .is_err();
        }
        if !flagged {
            flagged = tape.read(&mut env, |_, _| {}).unwrap().is_err();
        }
        (flagged, env.pos)
    }

    /// Exact detection probability by enumerating every draw sequence.
    fn enumerate(tamper: fn(usize, &[Triple], usize) -> Option<Triple>) -> (u64, u64) {
        let (_, d) = session(Vec::new(), tamper);
        let total = 5u64.pow(d as u32);
        let mut detected = 0;
        for code in 0..total {
            let draws: Vec<u64> = (0..d).map(|i| (code / 5u64.pow(i as u32)) % 5).collect();
            detected += session(draws, tamper).0 as u64;
        }
        (detected, total)
    }

    fn honest(_: usize, _: &[Triple], _: usize) -> Option<Triple> {
        None
    }

    #[test]
    fn honest_never_flagged() {
        assert_eq!(enumerate(honest).0, 0);
    }

    #[test]
    fn symbol_flip_passes_with_probability_one_over_q() {
        // first read of cell 2: symbol changed, nonce and signature kept
        fn flip(i: usize, h: &[Triple], fetch: usize) -> Option<Triple> {
            (i == 2 && fetch == 2).then(|| Triple {
                symbol: (h[0].symbol + 1) % 5,
                ..h[0]
            })
        }
        let (detected, total) = enumerate(flip);
        assert_eq!(detected * 5, total * 4);
    }

    #[test]
    fn stale_replay_on_last_cell() {
        // after the update, cell 2 is answered with its pre-update triple
        fn stale(i: usize, h: &[Triple], fetch: usize) -> Option<Triple> {
            (i == 2 && fetch > 4).then(|| h[0])
        }
        let (detected, total) = enumerate(stale);
        assert_eq!(detected * 5, total * 4);
    }

    #[test]
    fn stale_replay_on_interior_cell() {
        fn stale(i: usize, h: &[Triple], fetch: usize) -> Option<Triple> {
            (i == 1 && fetch > 4).then(|| h[0])
        }
        let (detected, total) = enumerate(stale);
        // both links of the chain must collide
        assert_eq!(detected * 25, total * 24);
    }

    #[test]
    fn updates_append_cells() {
        struct Grow(u32);
        impl PassTransducer for Grow {
            fn cell(&mut self, _: usize, m: u64) -> u64 {
                m
            }
            fn append(&mut self) -> Option<u64> {
                (self.0 > 0).then(|| {
                    self.0 -= 1;
                    4
                })
            }
        }
        let mut env = Env {
            cells: HashMap::new(),
            draws: (0..40).map(|i| (i * 7 + 3) % 5).collect(),
            pos: 0,
            fetches: 0,
            tamper: honest,
        };
        let mut tape = SignedTape::store(&mut env, 5, &[1]).unwrap().unwrap();
        assert!(tape.update(&mut env, &mut Grow(2)).unwrap().is_ok());
        assert_eq!(tape.len(), 3);
        let mut seen = Vec::new();
        assert!(tape.read(&mut env, |_, m| seen.push(m)).unwrap().is_ok());
        assert_eq!(seen, [1, 4, 4]);
    }
}
