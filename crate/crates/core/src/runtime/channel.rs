//! Verifier–prover communication.
//!
//! Provers only ever see what the verifier transmits: query symbols on a
//! stream channel, counter deltas for counter-storing provers, and triples
//! for tape-storing provers. Coin outcomes stay private unless a protocol
//! sends them explicitly.

use serde::{Deserialize, Serialize};

/// Symbol a stream prover sends once its certificate is exhausted.
pub const END_OF_MESSAGE: u8 = b'.';

/// A prover answering one symbol per verifier query.
pub trait ProverStrategy: Send {
    fn id(&self) -> &str;

    fn respond(&mut self, query: u8) -> u8;

    /// True when the strategy may emit an infinite stream.
    fn is_unbounded(&self) -> bool {
        false
    }
}

/// What a counter-storing prover reports for one step: the four counter
/// values `a^s1 b^s2 c^s3 d^s4 e` in run-length form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CounterMessage {
    Counts([u64; 4]),
    /// A message outside the `a*b*c*d*e` grammar.
    Malformed,
    /// A message that never reaches its terminating `e`.
    Endless,
}

/// A prover that stores four counters on the verifier's behalf.
pub trait CounterProver: Send {
    fn id(&self) -> &str;

    fn report(&mut self) -> CounterMessage;

    /// Applies the deltas `f₁f₂f₃f₄ ∈ {-1,0,1}⁴` sent by the verifier.
    fn update(&mut self, deltas: [i8; 4]);

    /// Called when the verifier restarts the whole interaction.
    fn restart(&mut self);

    fn is_unbounded(&self) -> bool {
        false
    }
}

/// One stored work-tape cell: symbol, nonce and signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub symbol: u64,
    pub nonce: u64,
    pub signature: u64,
}

/// A prover storing signed work-tape cells.
pub trait TapeProver: Send {
    fn id(&self) -> &str;

    /// Stores (or replaces) the triple for 1-based cell `index`.
    fn store(&mut self, index: usize, triple: Triple);

    /// Returns the triple claimed for cell `index`.
    fn fetch(&mut self, index: usize) -> Option<Triple>;
}

/// A prover of any of the supported interaction styles.
pub enum Prover {
    Stream(Box<dyn ProverStrategy>),
    Counter(Box<dyn CounterProver>),
    Tape(Box<dyn TapeProver>),
}

impl Prover {
    pub fn kind(&self) -> &'static str {
        match self {
            Prover::Stream(_) => "stream prover",
            Prover::Counter(_) => "counter prover",
            Prover::Tape(_) => "tape prover",
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Prover::Stream(p) => p.id(),
            Prover::Counter(p) => p.id(),
            Prover::Tape(p) => p.id(),
        }
    }
}

impl std::fmt::Debug for Prover {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Prover({}: {})", self.kind(), self.id())
    }
}

/// The single-symbol communication cell of one channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommCell {
    pub last_sent: Option<u8>,
    pub last_received: Option<u8>,
    pub rounds: u64,
}

/// A prover replaying a fixed string, then a periodic tail forever (if
/// any), otherwise [`END_OF_MESSAGE`].
#[derive(Clone, Debug)]
pub struct ScriptedProver {
    id: String,
    prefix: Vec<u8>,
    cycle: Vec<u8>,
    pos: usize,
    restart_on: Option<u8>,
}

impl ScriptedProver {
    pub fn finite(id: impl Into<String>, script: impl Into<Vec<u8>>) -> Self {
        Self {
            id: id.into(),
            prefix: script.into(),
            cycle: Vec::new(),
            pos: 0,
            restart_on: None,
        }
    }

    pub fn periodic(
        id: impl Into<String>,
        prefix: impl Into<Vec<u8>>,
        cycle: impl Into<Vec<u8>>,
    ) -> Self {
        let cycle = cycle.into();
        assert!(!cycle.is_empty(), "periodic tail must be nonempty");
        Self {
            id: id.into(),
            prefix: prefix.into(),
            cycle,
            pos: 0,
            restart_on: None,
        }
    }

    /// Rewinds the script whenever the verifier sends `query`.
    pub fn restarting_on(mut self, query: u8) -> Self {
        self.restart_on = Some(query);
        self
    }

    pub fn next_symbol(&mut self) -> u8 {
        let i = self.pos;
        self.pos += 1;
        if i < self.prefix.len() {
            self.prefix[i]
        } else if self.cycle.is_empty() {
            END_OF_MESSAGE
        } else {
            self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }
}

impl ProverStrategy for ScriptedProver {
    fn id(&self) -> &str {
        &self.id
    }

    fn respond(&mut self, query: u8) -> u8 {
        if self.restart_on == Some(query) {
            self.pos = 0;
        }
        self.next_symbol()
    }

    fn is_unbounded(&self) -> bool {
        !self.cycle.is_empty()
    }
}
