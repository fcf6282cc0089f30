//! Sweeping verifiers for DIMA2 and its index-set refinement.

use crate::coins::{BiasedCoin, ProbBitStream};
use crate::langspace::{LanguageSpec, RIGHT_END};
use crate::runtime::{Decision, Run, Verifier, END_OF_MESSAGE};

use super::{amplify, decide, rewind, RepetitionRule};

/// Starts the copy of the input.
pub const DIMA2_QUERY: u8 = b'D';
/// Starts the `0^m 1` certificate.
pub const ZEROS_QUERY: u8 = b'Z';
const NEXT_QUERY: u8 = b'?';

/// Finite-state shape check: `0 1 0^t2 1 … 0^tm 1 1 (0^+ 1)^+` with the
/// number `m` of blocks before `11` divisible by 3.
pub fn dima2_coarse_shape(w: &[u8]) -> bool {
    let mut i = 0;
    let mut blocks = 0u8;
    let mut first = true;
    loop {
        let start = i;
        while i < w.len() && w[i] == b'0' {
            i += 1;
        }
        let len = i - start;
        if len == 0 || (first && len != 1) || i >= w.len() || w[i] != b'1' {
            return false;
        }
        i += 1;
        first = false;
        blocks = (blocks + 1) % 3;
        if i < w.len() && w[i] == b'1' {
            i += 1;
            break;
        }
    }
    if blocks != 0 {
        return false;
    }
    let mut after = 0;
    while i < w.len() {
        let start = i;
        while i < w.len() && w[i] == b'0' {
            i += 1;
        }
        if i == start || i >= w.len() || w[i] != b'1' {
            return false;
        }
        i += 1;
        after += 1;
    }
    after > 0
}

struct Stream {
    channel: usize,
    start: u8,
    started: bool,
    pending: Option<u8>,
}

impl Stream {
    fn new(channel: usize, start: u8) -> Self {
        Self {
            channel,
            start,
            started: false,
            pending: None,
        }
    }

    fn next(&mut self, v: &mut Verifier) -> Run<u8> {
        if let Some(s) = self.pending.take() {
            return Ok(s);
        }
        let q = if self.started { NEXT_QUERY } else { self.start };
        self.started = true;
        v.exchange(self.channel, q)
    }

    fn unread(&mut self, s: u8) {
        self.pending = Some(s);
    }
}

/// One-way input reader with a single symbol of lookahead.
struct Cursor {
    pending: Option<u8>,
}

impl Cursor {
    fn next(&mut self, v: &mut Verifier) -> Run<u8> {
        if let Some(s) = self.pending.take() {
            return Ok(s);
        }
        v.move_right()?;
        Ok(v.symbol())
    }

    fn unread(&mut self, s: u8) {
        self.pending = Some(s);
    }
}

/// Reads past the first `11`; false if the input ends first.
fn skip_past_marker(mut next: impl FnMut() -> Run<u8>) -> Run<bool> {
    let mut prev = 0u8;
    loop {
        let s = next()?;
        match s {
            b'1' if prev == b'1' => return Ok(true),
            b'0' | b'1' => prev = s,
            _ => return Ok(false),
        }
    }
}

/// `y = w`, with nothing after the copy.
fn equality_path(v: &mut Verifier, y: &mut Stream) -> Run<Decision> {
    loop {
        v.move_right()?;
        let s = v.symbol();
        let c = y.next(v)?;
        if s == RIGHT_END {
            return Ok(decide(c == END_OF_MESSAGE));
        }
        if c != s {
            return Ok(Decision::Reject);
        }
    }
}

/// Block `i` of `y` against block `i + 1` of `w`: doubling before `y`
/// crosses its `11`, equality afterwards.
fn chain_path(v: &mut Verifier, y: &mut Stream) -> Run<Decision> {
    let mut w = Cursor { pending: None };
    // skip the first block of w
    while w.next(v)? == b'0' {}
    let mut doubling = true;
    loop {
        let per_zero = if doubling { 2 } else { 1 };
        loop {
            match y.next(v)? {
                b'0' => {
                    for _ in 0..per_zero {
                        if w.next(v)? != b'0' {
                            return Ok(Decision::Reject);
                        }
                    }
                }
                b'1' => break,
                _ => return Ok(Decision::Reject),
            }
        }
        if w.next(v)? != b'1' {
            return Ok(Decision::Reject);
        }
        match y.next(v)? {
            b'1' => doubling = false,
            c => y.unread(c),
        }
        match w.next(v)? {
            RIGHT_END => return Ok(Decision::Accept),
            b'1' => {}
            s => w.unread(s),
        }
    }
}

/// `t'_1` of `y` against the number of blocks after `11` in `w`.
fn tail_count_path(v: &mut Verifier, y: &mut Stream) -> Run<Decision> {
    skip_past_marker(|| {
        v.move_right()?;
        Ok(v.symbol())
    })?;
    let mut y_ok = true;
    // y is read separately from the input
    let mut prev = 0u8;
    loop {
        let c = y.next(v)?;
        match c {
            b'1' if prev == b'1' => break,
            b'0' | b'1' => prev = c,
            _ => {
                y_ok = false;
                break;
            }
        }
    }
    if !y_ok {
        return Ok(Decision::Reject);
    }
    loop {
        v.move_right()?;
        match v.symbol() {
            b'1' => {
                if y.next(v)? != b'0' {
                    return Ok(Decision::Reject);
                }
            }
            RIGHT_END => return Ok(decide(y.next(v)? == b'1')),
            _ => {}
        }
    }
}

/// DIMA2 with a prover expected to echo the input: a deterministic shape
/// sweep, then one of three equiprobable sweeps.
pub fn verify_dima2(v: &mut Verifier, channel: usize) -> Run<Decision> {
    let shape = dima2_coarse_shape(v.input().word());
    v.to_right_end()?;
    if !shape {
        return Ok(Decision::Reject);
    }
    v.to_left_end()?;
    let mut y = Stream::new(channel, DIMA2_QUERY);
    match v.uniform_choice(3) {
        0 => equality_path(v, &mut y),
        1 => chain_path(v, &mut y),
        _ => tail_count_path(v, &mut y),
    }
}

/// Index-set refinement: after an amplified DIMA2 check, the prover sends
/// `0^m 1` with `m = 64^k`; either `m` is checked against the zeros after
/// `11`, or `m` coin tosses are counted in blocks of the input's tail.
pub fn verify_dima2_set(
    v: &mut Verifier,
    spec: &LanguageSpec,
    channel: usize,
    inner_r: u32,
) -> Run<Decision> {
    let base = amplify(v, inner_r, RepetitionRule::Unanimous, rewind, |v| {
        verify_dima2(v, channel)
    })?;
    if base != Decision::Accept {
        return Ok(base);
    }
    rewind(v)?;
    let mut y = Stream::new(channel, ZEROS_QUERY);
    let path = v.uniform_choice(2);
    let found = skip_past_marker(|| {
        v.move_right()?;
        Ok(v.symbol())
    })?;
    assert!(found, "shape checked by the DIMA2 pass");
    if path == 0 {
        loop {
            v.move_right()?;
            match v.symbol() {
                b'0' => {
                    if y.next(v)? != b'0' {
                        return Ok(Decision::Reject);
                    }
                }
                RIGHT_END => return Ok(decide(y.next(v)? == b'1')),
                _ => {}
            }
        }
    }
    let mut coin = BiasedCoin::new(ProbBitStream::new(spec.clone()));
    let mut j = 0u8;
    loop {
        match y.next(v)? {
            b'0' => {
                if !v.toss(&mut coin)?.is_head() {
                    continue;
                }
                v.move_right()?;
                if v.symbol() == b'1' {
                    j = (j + 1) % 8;
                    v.move_right()?;
                }
                if v.symbol() != b'0' {
                    // more heads than zeros in the tail
                    return Ok(Decision::Reject);
                }
            }
            b'1' => break,
            _ => return Ok(Decision::Reject),
        }
    }
    v.move_right()?;
    if v.symbol() == b'1' {
        j = (j + 1) % 8;
    }
    Ok(decide(j >= 4))
}
