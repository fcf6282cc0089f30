//! Constant-space verifiers for unary languages that read block-structured
//! certificates `a^(m1) b a^(m2) b … a^(mt) b b` from a stream prover.

use crate::coins::{BiasedCoin, ProbBitStream};
use crate::langspace::LanguageSpec;
use crate::runtime::{Decision, Run, Verifier, WalkEnd, WalkMode};

use super::{amplify, decide, rewind, RepetitionRule};

/// Starts the `(a^m b)^m b` certificate.
pub const USQUARE_QUERY: u8 = b'S';
/// Starts the `a b a^64 b … b` certificate.
pub const UPOWER64_QUERY: u8 = b'P';
/// Starts the `(a^(8^k) b)^(8^k) b` certificate.
pub const YK_QUERY: u8 = b'Y';
pub const NEXT_QUERY: u8 = b'?';

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Token {
    A,
    /// The `b` closing a nonempty block.
    BlockEnd,
    /// The second `b` of the final `bb`.
    Terminator,
    /// Anything outside the grammar.
    Defect,
}

/// Lazy tokenizer over a certificate stream. Grammar violations surface
/// as [`Token::Defect`] at the point they are read.
#[derive(Clone, Debug)]
pub struct CertificateReader {
    channel: usize,
    start: u8,
    started: bool,
    block_len: u64,
    blocks: u64,
    first_block: Option<u64>,
    pushback: Option<Token>,
}

impl CertificateReader {
    pub fn new(channel: usize, start: u8) -> Self {
        Self {
            channel,
            start,
            started: false,
            block_len: 0,
            blocks: 0,
            first_block: None,
            pushback: None,
        }
    }

    /// Requires the first block to have exactly `len` symbols.
    pub fn with_first_block(mut self, len: u64) -> Self {
        self.first_block = Some(len);
        self
    }

    /// Completed blocks so far.
    pub fn blocks(&self) -> u64 {
        self.blocks
    }

    pub fn next(&mut self, v: &mut Verifier) -> Run<Token> {
        if let Some(t) = self.pushback.take() {
            return Ok(t);
        }
        let query = if self.started { NEXT_QUERY } else { self.start };
        self.started = true;
        let s = v.exchange(self.channel, query)?;
        Ok(match s {
            b'a' => {
                self.block_len += 1;
                match self.first_block {
                    Some(len) if self.blocks == 0 && self.block_len > len => Token::Defect,
                    _ => Token::A,
                }
            }
            b'b' if self.block_len > 0 => {
                if self.blocks == 0 && self.first_block.is_some_and(|len| len != self.block_len) {
                    return Ok(Token::Defect);
                }
                self.block_len = 0;
                self.blocks += 1;
                Token::BlockEnd
            }
            b'b' if self.blocks > 0 => Token::Terminator,
            _ => Token::Defect,
        })
    }

    pub fn unread(&mut self, t: Token) {
        assert!(self.pushback.is_none(), "single-token pushback");
        self.pushback = Some(t);
    }

    pub fn peek(&mut self, v: &mut Verifier) -> Run<Token> {
        let t = self.next(v)?;
        self.unread(t);
        Ok(t)
    }
}

/// Moves right `times` cells; false if the right marker is reached.
fn advance(v: &mut Verifier, times: u64) -> Run<bool> {
    for _ in 0..times {
        v.move_right()?;
        if v.at_right_end() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Accepts iff `offset + per_a·(#a in y) = n` and `y` has at least
/// `min_blocks` blocks.
fn sum_path(
    v: &mut Verifier,
    y: &mut CertificateReader,
    offset: u64,
    per_a: u64,
    min_blocks: u64,
) -> Run<Decision> {
    if !advance(v, offset)? {
        return Ok(Decision::Reject);
    }
    loop {
        match y.next(v)? {
            Token::A => {
                if !advance(v, per_a)? {
                    return Ok(Decision::Reject);
                }
            }
            Token::BlockEnd => {}
            Token::Terminator => {
                v.move_right()?;
                return Ok(decide(v.at_right_end() && y.blocks() >= min_blocks));
            }
            Token::Defect => return Ok(Decision::Reject),
        }
    }
}

/// Accepts iff `Σ_{j≥2} m_j + t = n`.
fn block_count_path(v: &mut Verifier, y: &mut CertificateReader) -> Run<Decision> {
    loop {
        match y.next(v)? {
            Token::A => {}
            Token::BlockEnd => break,
            _ => return Ok(Decision::Reject),
        }
    }
    if !advance(v, 1)? {
        return Ok(Decision::Reject);
    }
    loop {
        match y.next(v)? {
            Token::A | Token::BlockEnd => {
                if !advance(v, 1)? {
                    return Ok(Decision::Reject);
                }
            }
            Token::Terminator => {
                v.move_right()?;
                return Ok(decide(v.at_right_end()));
            }
            Token::Defect => return Ok(Decision::Reject),
        }
    }
}

/// Compares consecutive pairs of blocks `ratio·m_A = m_B`, with a
/// length-checking walk after every successful comparison that is not
/// the last one. With `skip_first` the pairs start at block 2.
fn pairs_path(
    v: &mut Verifier,
    y: &mut CertificateReader,
    ratio: u64,
    skip_first: bool,
    mode: WalkMode,
) -> Run<Decision> {
    if skip_first {
        loop {
            match y.next(v)? {
                Token::A => {}
                Token::BlockEnd => break,
                _ => return Ok(Decision::Reject),
            }
        }
        match y.peek(v)? {
            Token::Terminator => return Ok(Decision::Accept),
            Token::Defect => return Ok(Decision::Reject),
            _ => {}
        }
    }
    loop {
        // the comparison starts on the first input symbol
        v.to_left_end()?;
        v.move_right()?;
        // block A: right by `ratio` per symbol; an unpaired last block may
        // end exactly on `$`
        let mut on_end = false;
        loop {
            match y.next(v)? {
                Token::A if !on_end => {
                    for step in 0..ratio {
                        v.move_right()?;
                        if v.at_right_end() {
                            if step + 1 < ratio {
                                return Ok(Decision::Reject);
                            }
                            on_end = true;
                        }
                    }
                }
                Token::BlockEnd => break,
                _ => return Ok(Decision::Reject),
            }
        }
        match y.peek(v)? {
            Token::Terminator => return Ok(Decision::Accept),
            Token::Defect => return Ok(Decision::Reject),
            _ if on_end => return Ok(Decision::Reject),
            _ => {}
        }
        // block B: left by one per symbol, ending back on cell 1
        loop {
            match y.next(v)? {
                Token::A => {
                    v.move_left()?;
                    if v.at_left_end() {
                        return Ok(Decision::Reject);
                    }
                }
                Token::BlockEnd => break,
                _ => return Ok(Decision::Reject),
            }
        }
        v.move_left()?;
        if !v.at_left_end() {
            return Ok(Decision::Reject);
        }
        match y.peek(v)? {
            Token::Terminator => return Ok(Decision::Accept),
            Token::Defect => return Ok(Decision::Reject),
            _ => {}
        }
        if v.walk(mode)? == WalkEnd::Right {
            return remaining_below_n(v, y);
        }
    }
}

/// From the right marker: accepts iff the rest of `y` has fewer than `n`
/// `a`s, moving left once per `a`.
fn remaining_below_n(v: &mut Verifier, y: &mut CertificateReader) -> Run<Decision> {
    loop {
        match y.next(v)? {
            Token::A => {
                v.move_left()?;
                if v.at_left_end() {
                    return Ok(Decision::Reject);
                }
            }
            Token::BlockEnd => {}
            Token::Terminator => {
                v.move_left()?;
                return Ok(decide(!v.at_left_end()));
            }
            Token::Defect => return Ok(Decision::Reject),
        }
    }
}

/// USQUARE: four equiprobable checks of `y = (a^m b)^m b` against `a^n`.
/// Inputs with `n ≤ 3` are decided directly.
pub fn verify_usquare(
    v: &mut Verifier,
    channel: usize,
    start: u8,
    mode: WalkMode,
) -> Run<Decision> {
    let n = v.n();
    if n <= 3 {
        v.to_right_end()?;
        return Ok(decide(n == 1));
    }
    let mut y = CertificateReader::new(channel, start);
    match v.uniform_choice(4) {
        0 => sum_path(v, &mut y, 0, 1, 2),
        1 => block_count_path(v, &mut y),
        2 => pairs_path(v, &mut y, 1, false, mode),
        _ => pairs_path(v, &mut y, 1, true, mode),
    }
}

/// UPOWER64: three equiprobable checks of `y = a b a^64 b … a^(64^(k-1)) b b`.
/// Inputs with `n ≤ 64` are decided directly.
pub fn verify_upower64(v: &mut Verifier, channel: usize, mode: WalkMode) -> Run<Decision> {
    let n = v.n();
    if n <= 64 {
        v.to_right_end()?;
        return Ok(decide(n == 64));
    }
    let mut y = CertificateReader::new(channel, UPOWER64_QUERY).with_first_block(1);
    match v.uniform_choice(3) {
        0 => sum_path(v, &mut y, 1, 63, 1),
        1 => pairs_path(v, &mut y, 64, false, mode),
        _ => pairs_path(v, &mut y, 64, true, mode),
    }
}

/// Membership of `a^(64^k)` in the unary language of an index set `I`:
/// an amplified UPOWER64 check, then either the square-root certificate
/// `y_k = (a^(8^k) b)^(8^k) b` is verified, or `64^k` tosses of the
/// index-set coin are counted in blocks of `y_k`.
pub fn verify_upower64_set(
    v: &mut Verifier,
    spec: &LanguageSpec,
    channel: usize,
    inner_r: u32,
    mode: WalkMode,
) -> Run<Decision> {
    let base = amplify(v, inner_r, RepetitionRule::Unanimous, rewind, |v| {
        verify_upower64(v, channel, mode)
    })?;
    if base != Decision::Accept {
        return Ok(base);
    }
    rewind(v)?;
    if v.uniform_choice(2) == 0 {
        return verify_usquare(v, channel, YK_QUERY, mode);
    }
    let mut coin = BiasedCoin::new(ProbBitStream::new(spec.clone()));
    let mut y = CertificateReader::new(channel, YK_QUERY);
    let mut j = 0u8;
    loop {
        v.move_right()?;
        if v.at_right_end() {
            break;
        }
        if !v.toss(&mut coin)?.is_head() {
            continue;
        }
        let mut t = y.next(v)?;
        if t == Token::BlockEnd {
            j = (j + 1) % 8;
            t = y.next(v)?;
        }
        if t != Token::A {
            // more heads than a's in y, or a malformed y
            return Ok(Decision::Reject);
        }
    }
    if y.next(v)? == Token::BlockEnd {
        j = (j + 1) % 8;
    }
    Ok(decide(j >= 4))
}
