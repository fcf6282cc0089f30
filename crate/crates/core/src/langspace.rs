//! Ordered alphabets, lexicographic ranking and membership oracles.
//!
//! Strings are enumerated length-first and then lexicographically, with the
//! empty string at rank 1. A [`LanguageSpec`] assigns a membership bit to
//! every rank; the same bit sequence doubles as an index set `I ⊆ ℤ⁺`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Left end-marker placed before every input.
pub const LEFT_END: u8 = b'<';
/// Right end-marker placed after every input.
pub const RIGHT_END: u8 = b'>';
/// Blank work-tape symbol.
pub const BLANK: u8 = b'#';

const RESERVED: [u8; 3] = [LEFT_END, RIGHT_END, BLANK];

/// An ordered, finite input alphabet. The i-th symbol (1-based) has
/// lexicographic value `i + 1`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    symbols: Vec<u8>,
}

impl Alphabet {
    pub fn new(symbols: impl AsRef<[u8]>) -> Result<Self> {
        let symbols = symbols.as_ref().to_vec();
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet is empty".into()));
        }
        for (i, &s) in symbols.iter().enumerate() {
            if !s.is_ascii_graphic() {
                return Err(Error::InvalidAlphabet(format!(
                    "symbol {:?} is not a printable ASCII character",
                    s as char
                )));
            }
            if RESERVED.contains(&s) {
                return Err(Error::InvalidAlphabet(format!(
                    "symbol {:?} is a reserved marker",
                    s as char
                )));
            }
            if symbols[..i].contains(&s) {
                return Err(Error::InvalidAlphabet(format!(
                    "duplicate symbol {:?}",
                    s as char
                )));
            }
        }
        Ok(Self { symbols })
    }

    pub fn unary() -> Self {
        Self {
            symbols: vec![b'a'],
        }
    }

    pub fn binary_ab() -> Self {
        Self {
            symbols: vec![b'a', b'b'],
        }
    }

    pub fn binary_01() -> Self {
        Self {
            symbols: vec![b'0', b'1'],
        }
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    /// Zero-based position of `sym`, i.e. `lex(sym) - 2`.
    pub fn index_of(&self, sym: u8) -> Result<usize> {
        self.symbols
            .iter()
            .position(|&s| s == sym)
            .ok_or(Error::SymbolNotInAlphabet(sym as char))
    }

    pub fn contains(&self, sym: u8) -> bool {
        self.symbols.contains(&sym)
    }

    pub fn check_word(&self, w: &[u8]) -> Result<()> {
        for &s in w {
            self.index_of(s)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.symbols.iter().map(|&b| b as char).collect();
        write!(f, "Alphabet({s:?})")
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;

    fn try_from(value: Vec<String>) -> Result<Self> {
        let mut symbols = Vec::with_capacity(value.len());
        for s in value {
            match s.as_bytes() {
                [b] => symbols.push(*b),
                _ => {
                    return Err(Error::InvalidAlphabet(format!(
                        "alphabet entries must be single ASCII characters, got {s:?}"
                    )))
                }
            }
        }
        Alphabet::new(symbols)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(value: Alphabet) -> Self {
        value
            .symbols
            .iter()
            .map(|&b| (b as char).to_string())
            .collect()
    }
}

/// Built-in benchmark languages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinLanguage {
    /// `{ a^(m²) | m > 0 }`
    #[serde(rename = "USQUARE")]
    Usquare,
    /// `{ a^(64^m) | m > 0 }`
    #[serde(rename = "UPOWER64")]
    Upower64,
    /// The doubling-block binary language.
    #[serde(rename = "DIMA2")]
    Dima2,
}

/// Tail of a bit-rule spec, applied to every index past the prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitTail {
    AllZero,
    AllOne,
    Periodic(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LanguageKind {
    Builtin { name: BuiltinLanguage },
    Finite { strings: Vec<String> },
    BitRule { prefix: Vec<u8>, tail: BitTail },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
struct RawSpec {
    alphabet: Alphabet,
    #[serde(flatten)]
    kind: LanguageKind,
}

/// A finitely described language `L ⊆ Σ*` (or index set `I ⊆ ℤ⁺`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct LanguageSpec {
    alphabet: Alphabet,
    kind: LanguageKind,
}

impl TryFrom<RawSpec> for LanguageSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        LanguageSpec::new(raw.alphabet, raw.kind)
    }
}

impl From<LanguageSpec> for RawSpec {
    fn from(spec: LanguageSpec) -> Self {
        RawSpec {
            alphabet: spec.alphabet,
            kind: spec.kind,
        }
    }
}

impl LanguageSpec {
    pub fn new(alphabet: Alphabet, kind: LanguageKind) -> Result<Self> {
        match &kind {
            LanguageKind::Builtin { .. } => {}
            LanguageKind::Finite { strings } => {
                for s in strings {
                    alphabet.check_word(s.as_bytes()).map_err(|_| {
                        Error::InvalidSpec(format!("{s:?} is not a word over {alphabet:?}"))
                    })?;
                }
            }
            LanguageKind::BitRule { prefix, tail } => {
                let bad = |bits: &[u8]| bits.iter().any(|&b| b > 1);
                if bad(prefix) {
                    return Err(Error::InvalidSpec("prefix bits must be 0 or 1".into()));
                }
                if let BitTail::Periodic(pattern) = tail {
                    if pattern.is_empty() || bad(pattern) {
                        return Err(Error::InvalidSpec(
                            "periodic tail must be a nonempty list of 0/1 bits".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self { alphabet, kind })
    }

    pub fn builtin(alphabet: Alphabet, name: BuiltinLanguage) -> Self {
        Self {
            alphabet,
            kind: LanguageKind::Builtin { name },
        }
    }

    pub fn finite<S: Into<String>>(
        alphabet: Alphabet,
        strings: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let strings = strings.into_iter().map(Into::into).collect();
        Self::new(alphabet, LanguageKind::Finite { strings })
    }

    /// Index-set spec with the given prefix bits and tail.
    pub fn bit_rule(alphabet: Alphabet, prefix: Vec<u8>, tail: BitTail) -> Result<Self> {
        Self::new(alphabet, LanguageKind::BitRule { prefix, tail })
    }

    /// Index set containing exactly the listed positive integers.
    pub fn index_set(alphabet: Alphabet, members: &[u64]) -> Result<Self> {
        let len = members.iter().copied().max().unwrap_or(0) as usize;
        let mut prefix = vec![0u8; len];
        for &m in members {
            if m == 0 {
                return Err(Error::InvalidSpec(
                    "index sets contain positive integers".into(),
                ));
            }
            prefix[m as usize - 1] = 1;
        }
        Self::bit_rule(alphabet, prefix, BitTail::AllZero)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn kind(&self) -> &LanguageKind {
        &self.kind
    }

    /// Membership of a word, evaluated directly on the word.
    pub fn contains_word(&self, w: &[u8]) -> Result<bool> {
        self.alphabet.check_word(w)?;
        match &self.kind {
            LanguageKind::Builtin { name } => Ok(builtin_contains(*name, &self.alphabet, w)),
            LanguageKind::Finite { strings } => Ok(strings.iter().any(|s| s.as_bytes() == w)),
            LanguageKind::BitRule { .. } => {
                let i = lex_rank(&self.alphabet, w)?;
                Ok(membership_bit(self, i))
            }
        }
    }
}

fn builtin_contains(name: BuiltinLanguage, alphabet: &Alphabet, w: &[u8]) -> bool {
    match name {
        BuiltinLanguage::Usquare => {
            let a = alphabet.symbols()[0];
            w.iter().all(|&s| s == a) && is_positive_square(w.len() as u64)
        }
        BuiltinLanguage::Upower64 => {
            let a = alphabet.symbols()[0];
            w.iter().all(|&s| s == a) && is_positive_power_of_64(w.len() as u64)
        }
        BuiltinLanguage::Dima2 => dima2_index(w).is_some(),
    }
}

pub fn is_positive_square(n: u64) -> bool {
    if n == 0 {
        return false;
    }
    let r = (n as f64).sqrt() as u64;
    (r.saturating_sub(1)..=r + 1).any(|m| m * m == n)
}

pub fn is_positive_power_of_64(n: u64) -> bool {
    let mut v = n;
    if v < 64 {
        return false;
    }
    while v.is_multiple_of(64) {
        v /= 64;
    }
    v == 1
}

/// The k-th shortest member of DIMA2:
/// `0^(2^0) 1 0^(2^1) 1 … 1 0^(2^(3k-1)) 11 (0^(2^(3k)) 1)^(2^(3k))`.
pub fn dima2_member(k: u32) -> Vec<u8> {
    assert!(k >= 1, "DIMA2 members are indexed from 1");
    let mut w = Vec::with_capacity(dima2_member_len(k) as usize);
    for j in 0..3 * k {
        w.extend(std::iter::repeat_n(b'0', 1usize << j));
        w.push(b'1');
    }
    w.push(b'1');
    let block = 1usize << (3 * k);
    for _ in 0..block {
        w.extend(std::iter::repeat_n(b'0', block));
        w.push(b'1');
    }
    w
}

/// `|w_k| = 2^(6k) + 2^(3k+1) + 3k`.
pub fn dima2_member_len(k: u32) -> u64 {
    (1u64 << (6 * k)) + (1u64 << (3 * k + 1)) + 3 * k as u64
}

/// Returns `Some(k)` when `w` is the k-th member of DIMA2.
pub fn dima2_index(w: &[u8]) -> Option<u32> {
    let mut blocks = Vec::new();
    let mut i = 0;
    // blocks before "11"
    loop {
        let start = i;
        while i < w.len() && w[i] == b'0' {
            i += 1;
        }
        let len = i - start;
        if len == 0 || i >= w.len() || w[i] != b'1' {
            return None;
        }
        blocks.push(len);
        i += 1;
        if i < w.len() && w[i] == b'1' {
            i += 1;
            break;
        }
    }
    let m = blocks.len();
    if m % 3 != 0 || blocks.iter().enumerate().any(|(j, &t)| t != 1usize << j) {
        return None;
    }
    let k = (m / 3) as u32;
    let block = 1usize << (3 * k);
    let mut count = 0usize;
    while i < w.len() {
        let start = i;
        while i < w.len() && w[i] == b'0' {
            i += 1;
        }
        if i - start != block || i >= w.len() || w[i] != b'1' {
            return None;
        }
        i += 1;
        count += 1;
    }
    (count == block).then_some(k)
}

/// Rank of `w` in length-then-lexicographic order, with `lex(ε) = 1`:
/// `1 + Σ k^(i-1) + Σ (lex(w[i]) - 2)·k^(n-i)`.
pub fn lex_rank(alphabet: &Alphabet, w: &[u8]) -> Result<u64> {
    let k = alphabet.size() as u64;
    let n = w.len();
    let mut shorter: u64 = 0;
    let mut pow: u64 = 1;
    for _ in 0..n {
        shorter = shorter
            .checked_add(pow)
            .ok_or(Error::Overflow("lex_rank"))?;
        pow = pow.checked_mul(k).ok_or(Error::Overflow("lex_rank"))?;
    }
    let mut before: u64 = 0;
    for &s in w {
        let idx = alphabet.index_of(s)? as u64;
        before = before
            .checked_mul(k)
            .and_then(|b| b.checked_add(idx))
            .ok_or(Error::Overflow("lex_rank"))?;
    }
    1u64.checked_add(shorter)
        .and_then(|r| r.checked_add(before))
        .ok_or(Error::Overflow("lex_rank"))
}

/// Inverse of [`lex_rank`]: the `i`-th string `Σ*(i)`.
pub fn lex_unrank(alphabet: &Alphabet, i: u64) -> Vec<u8> {
    assert!(i >= 1, "lexicographic ranks start at 1");
    let k = alphabet.size() as u64;
    if k == 1 {
        return vec![alphabet.symbols()[0]; (i - 1) as usize];
    }
    // strings of length < n number (k^n - 1)/(k - 1)
    let mut remaining = i - 1;
    let mut len = 0u32;
    let mut count: u64 = 1;
    while remaining >= count {
        remaining -= count;
        len += 1;
        count = match count.checked_mul(k) {
            Some(c) => c,
            None => break,
        };
    }
    let mut out = vec![0u8; len as usize];
    for slot in out.iter_mut().rev() {
        *slot = alphabet.symbols()[(remaining % k) as usize];
        remaining /= k;
    }
    out
}

/// Membership bit `x_i`: 1 iff `Σ*(i) ∈ L` (or `i ∈ I` for bit-rule specs).
pub fn membership_bit(spec: &LanguageSpec, i: u64) -> bool {
    assert!(i >= 1, "membership bits are indexed from 1");
    match &spec.kind {
        LanguageKind::BitRule { prefix, tail } => {
            let idx = (i - 1) as usize;
            if idx < prefix.len() {
                return prefix[idx] == 1;
            }
            match tail {
                BitTail::AllZero => false,
                BitTail::AllOne => true,
                BitTail::Periodic(p) => p[(idx - prefix.len()) % p.len()] == 1,
            }
        }
        LanguageKind::Builtin { name } if spec.alphabet.size() == 1 => {
            let n = i - 1;
            match name {
                BuiltinLanguage::Usquare => is_positive_square(n),
                BuiltinLanguage::Upower64 => is_positive_power_of_64(n),
                BuiltinLanguage::Dima2 => false,
            }
        }
        _ => {
            let w = lex_unrank(&spec.alphabet, i);
            spec.contains_word(&w).unwrap_or(false)
        }
    }
}

/// Counter snapshots recorded while computing a lexicographic rank with
/// four counters restricted to increment, decrement and zero-test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexTrace {
    /// Counter values after each input symbol has been processed.
    pub snapshots: Vec<[u64; 4]>,
    pub final_rank: u64,
    pub increments: u64,
    pub decrements: u64,
    pub zero_tests: u64,
}

#[derive(Default)]
struct Counters {
    c: [u64; 4],
    inc: u64,
    dec: u64,
    zt: u64,
}

impl Counters {
    fn inc(&mut self, j: usize) {
        self.c[j] += 1;
        self.inc += 1;
    }

    fn dec(&mut self, j: usize) {
        assert!(self.c[j] > 0, "counter {j} decremented below zero");
        self.c[j] -= 1;
        self.dec += 1;
    }

    fn is_zero(&mut self, j: usize) -> bool {
        self.zt += 1;
        self.c[j] == 0
    }
}

/// Reads `w` one symbol at a time, maintaining `C1 = lex(w[1..m])` with the
/// update `C1 ← k·C1 + (2 - k) + (lex(w[m]) - 2)`. Multiplication by `k`
/// drains C1 into C4 and refills it k units per drained unit.
pub fn counter_lex_trace(alphabet: &Alphabet, w: &[u8]) -> Result<LexTrace> {
    if w.is_empty() {
        return Err(Error::InvalidInput(
            "the counter trace is defined for nonempty words; lex(ε) = 1 is fixed".into(),
        ));
    }
    alphabet.check_word(w)?;
    let k = alphabet.size();
    let (c1, c4) = (0, 3);
    let mut ctr = Counters::default();
    let mut snapshots = Vec::with_capacity(w.len());
    for (m, &sym) in w.iter().enumerate() {
        let lex = alphabet.index_of(sym)? + 2;
        if m > 0 {
            while !ctr.is_zero(c1) {
                ctr.dec(c1);
                ctr.inc(c4);
            }
            while !ctr.is_zero(c4) {
                ctr.dec(c4);
                for _ in 0..k {
                    ctr.inc(c1);
                }
            }
        }
        for _ in 0..lex {
            ctr.inc(c1);
        }
        if m > 0 {
            for _ in 0..k {
                ctr.dec(c1);
            }
        }
        snapshots.push(ctr.c);
    }
    Ok(LexTrace {
        final_rank: ctr.c[c1],
        snapshots,
        increments: ctr.inc,
        decrements: ctr.dec,
        zero_tests: ctr.zt,
    })
}
