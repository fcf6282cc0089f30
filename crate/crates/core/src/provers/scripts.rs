//! Stream provers: scripted certificates and the counting prover of the
//! log-space verifier.

use std::collections::HashMap;

use crate::protocols::{BIN_QUERY, COUNT_QUERY, HEAD_SYMBOL, NEXT_BIT_QUERY};
use crate::runtime::{ProverStrategy, END_OF_MESSAGE};

/// A stream prover holding one script per start query. Sending a start
/// query rewinds that script; other queries continue the current one.
#[derive(Clone, Debug)]
pub struct MultiScript {
    id: String,
    scripts: HashMap<u8, (Vec<u8>, Vec<u8>)>,
    current: Option<u8>,
    pos: usize,
}

impl MultiScript {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            scripts: HashMap::new(),
            current: None,
            pos: 0,
        }
    }

    pub fn with(mut self, query: u8, script: impl Into<Vec<u8>>) -> Self {
        self.scripts.insert(query, (script.into(), Vec::new()));
        self
    }

    /// A script that repeats `cycle` forever after `prefix`.
    pub fn with_periodic(
        mut self,
        query: u8,
        prefix: impl Into<Vec<u8>>,
        cycle: impl Into<Vec<u8>>,
    ) -> Self {
        let cycle = cycle.into();
        assert!(!cycle.is_empty(), "periodic tail must be nonempty");
        self.scripts.insert(query, (prefix.into(), cycle));
        self
    }
}

impl ProverStrategy for MultiScript {
    fn id(&self) -> &str {
        &self.id
    }

    fn respond(&mut self, query: u8) -> u8 {
        if self.scripts.contains_key(&query) {
            self.current = Some(query);
            self.pos = 0;
        }
        let Some((prefix, cycle)) = self.current.and_then(|q| self.scripts.get(&q)) else {
            return END_OF_MESSAGE;
        };
        let i = self.pos;
        self.pos += 1;
        if i < prefix.len() {
            prefix[i]
        } else if cycle.is_empty() {
            END_OF_MESSAGE
        } else {
            cycle[(i - prefix.len()) % cycle.len()]
        }
    }

    fn is_unbounded(&self) -> bool {
        self.scripts.values().any(|(_, c)| !c.is_empty())
    }
}

/// `a^m1 b a^m2 b … a^mt b b`.
pub fn blocks_certificate(blocks: &[u64]) -> Vec<u8> {
    let mut y = Vec::with_capacity(blocks.iter().sum::<u64>() as usize + blocks.len() + 1);
    for &m in blocks {
        y.extend(std::iter::repeat_n(b'a', m as usize));
        y.push(b'b');
    }
    y.push(b'b');
    y
}

/// Blocks of `(a^m b)^m b` with `m = ⌊√n⌋`.
pub fn usquare_blocks(n: u64) -> Vec<u64> {
    let m = num_integer::Roots::sqrt(&n);
    vec![m; m as usize]
}

/// Largest `j` with `64^j ≤ n` (0 for `n < 64`).
pub fn floor_log64(n: u64) -> u32 {
    let mut j = 0;
    let mut p = 64u64;
    while p <= n {
        j += 1;
        match p.checked_mul(64) {
            Some(next) => p = next,
            None => break,
        }
    }
    j
}

/// Blocks `1, 64, …, 64^(k-1)` for `k = ⌊log₆₄ n⌋` (at least one block).
pub fn upower64_blocks(n: u64) -> Vec<u64> {
    let k = floor_log64(n).max(1);
    (0..k).map(|j| 64u64.pow(j)).collect()
}

/// Blocks of `y_k = (a^(8^k) b)^(8^k) b`.
pub fn yk_blocks(k: u32) -> Vec<u64> {
    let side = 8u64.pow(k);
    vec![side; side as usize]
}

/// `0^count 1`.
pub fn zeros_certificate(count: u64) -> Vec<u8> {
    let mut y = vec![b'0'; count as usize];
    y.push(b'1');
    y
}

/// Prover for the log-space verifier: a stream of `a`s, then the head
/// count it was told about, in binary with the least significant bit
/// first.
#[derive(Clone, Debug)]
pub struct CountingProver {
    id: String,
    /// Number of `a`s to send; `None` never stops.
    announced: Option<u64>,
    sent: u64,
    heads: u64,
    /// Target bit index `3k + 2`.
    target: u32,
    tweak: CountTweak,
    bits: Vec<u8>,
    pos: usize,
}

/// How the reported head count deviates from the truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountTweak {
    None,
    /// Flip one bit of the count.
    FlipBit(u32),
    /// Set the decisive bit to 1.
    ForceBit,
    /// Append zero bits until the message is `extra` bits too long.
    Pad(u32),
}

impl CountingProver {
    /// `k` is the lex rank of the input (`n + 1`).
    pub fn new(id: impl Into<String>, k: u64, announced: Option<u64>, tweak: CountTweak) -> Self {
        Self {
            id: id.into(),
            announced,
            sent: 0,
            heads: 0,
            target: (3 * k + 2) as u32,
            tweak,
            bits: Vec::new(),
            pos: 0,
        }
    }

    /// `64^k`, saturating.
    pub fn honest_count(k: u64) -> u64 {
        u32::try_from(k)
            .ok()
            .and_then(|k| 64u64.checked_pow(k))
            .unwrap_or(u64::MAX)
    }

    fn binary(&self) -> Vec<u8> {
        let mut t = self.heads;
        match self.tweak {
            CountTweak::FlipBit(b) if b < 64 => t ^= 1 << b,
            CountTweak::ForceBit if self.target < 64 => t |= 1 << self.target,
            _ => {}
        }
        let mut bits = Vec::new();
        while t > 0 {
            bits.push(b'0' + (t & 1) as u8);
            t >>= 1;
        }
        if let CountTweak::Pad(extra) = self.tweak {
            let max_len = 2 * self.target as usize - 3;
            while bits.len() < max_len + extra as usize {
                bits.push(b'0');
            }
        }
        bits.push(b'b');
        bits
    }
}

impl ProverStrategy for CountingProver {
    fn id(&self) -> &str {
        &self.id
    }

    fn respond(&mut self, query: u8) -> u8 {
        match query {
            COUNT_QUERY => {
                self.sent = 0;
                self.heads = 0;
            }
            HEAD_SYMBOL => self.heads += 1,
            BIN_QUERY => {
                self.bits = self.binary();
                self.pos = 0;
            }
            _ => {}
        }
        if query == BIN_QUERY || query == NEXT_BIT_QUERY {
            let s = self.bits.get(self.pos).copied().unwrap_or(END_OF_MESSAGE);
            self.pos += 1;
            return s;
        }
        match self.announced {
            Some(m) if self.sent >= m => b'b',
            _ => {
                self.sent += 1;
                b'a'
            }
        }
    }

    fn is_unbounded(&self) -> bool {
        self.announced.is_none()
    }
}
