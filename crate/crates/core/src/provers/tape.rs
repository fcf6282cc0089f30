//! Tape-storing provers for the signed work tape.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::runtime::{TapeProver, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TamperKind {
    /// Change the symbol, keep nonce and signature.
    FlipSymbol,
    /// Change the symbol and send a random signature.
    GuessSignature,
    /// Return the previous version of an updated cell.
    StaleReplay,
    /// Change the nonce, keep symbol and signature.
    AlterNonce,
}

/// One tampering act: the first fetch at or after `after_fetch` (counted
/// per prover) of `cell`, or of any cell when `cell` is `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Versions {
    previous: Option<Triple>,
    latest: Triple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tamper {
    pub kind: TamperKind,
    pub cell: Option<usize>,
    pub after_fetch: u64,
}

/// Stores the last two versions of each cell; answers fetches with the
/// latest one unless it tampers.
#[derive(Clone)]
pub struct TapeStore {
    id: String,
    cells: Vec<Option<Versions>>,
    fetches: u64,
    tamper: Option<Tamper>,
    tampered: bool,
    q: u64,
    rng: ChaCha8Rng,
    guess: Option<u64>,
}

impl TapeStore {
    pub fn new(id: impl Into<String>, q: u64, tamper: Option<Tamper>, rng: ChaCha8Rng) -> Self {
        Self {
            id: id.into(),
            cells: Vec::new(),
            fetches: 0,
            tamper,
            tampered: false,
            q,
            rng,
            guess: None,
        }
    }

    /// Fixes the forged signature of [`TamperKind::GuessSignature`].
    pub fn with_guess(mut self, signature: u64) -> Self {
        self.guess = Some(signature % self.q);
        self
    }

    /// Whether the tampering act has happened.
    pub fn has_tampered(&self) -> bool {
        self.tampered
    }

    fn forge(&mut self, kind: TamperKind, cell: Versions) -> Option<Triple> {
        let t = cell.latest;
        Some(match kind {
            TamperKind::FlipSymbol => Triple {
                symbol: t.symbol ^ 2,
                ..t
            },
            TamperKind::GuessSignature => Triple {
                symbol: t.symbol ^ 2,
                signature: self.guess.unwrap_or_else(|| self.rng.gen_range(0..self.q)),
                ..t
            },
            TamperKind::StaleReplay => cell.previous?,
            TamperKind::AlterNonce => Triple {
                nonce: (t.nonce + 1) % self.q,
                ..t
            },
        })
    }
}

impl TapeProver for TapeStore {
    fn id(&self) -> &str {
        &self.id
    }

    fn store(&mut self, index: usize, triple: Triple) {
        if index >= self.cells.len() {
            self.cells.resize(index + 1, None);
        }
        let previous = self.cells[index].map(|v| v.latest);
        self.cells[index] = Some(Versions {
            previous,
            latest: triple,
        });
    }

    fn fetch(&mut self, index: usize) -> Option<Triple> {
        self.fetches += 1;
        let cell = (*self.cells.get(index)?)?;
        if let Some(t) = self.tamper {
            let due = !self.tampered
                && self.fetches >= t.after_fetch
                && t.cell.is_none_or(|c| c == index);
            if due {
                if let Some(forged) = self.forge(t.kind, cell) {
                    self.tampered = true;
                    return Some(forged);
                }
            }
        }
        Some(cell.latest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{trial_rng, StreamPurpose};

    fn triple(symbol: u64) -> Triple {
        Triple {
            symbol,
            nonce: 7,
            signature: 9,
        }
    }

    #[test]
    fn stale_replay_waits_for_an_update() {
        let tamper = Tamper {
            kind: TamperKind::StaleReplay,
            cell: Some(3),
            after_fetch: 1,
        };
        let mut p = TapeStore::new(
            "s",
            251,
            Some(tamper),
            trial_rng(0, 0, StreamPurpose::Prover),
        );
        p.store(1, triple(1));
        p.store(3, triple(3));
        assert_eq!(p.fetch(3), Some(triple(3)));
        p.store(3, triple(5));
        assert_eq!(p.fetch(1), Some(triple(1)));
        assert_eq!(p.fetch(3), Some(triple(3)));
        assert!(p.has_tampered());
        assert_eq!(p.fetch(3), Some(triple(5)));
    }

    #[test]
    fn one_shot_flip() {
        let tamper = Tamper {
            kind: TamperKind::FlipSymbol,
            cell: None,
            after_fetch: 2,
        };
        let mut p = TapeStore::new(
            "f",
            251,
            Some(tamper),
            trial_rng(0, 0, StreamPurpose::Prover),
        );
        p.store(1, triple(4));
        assert_eq!(p.fetch(1), Some(triple(4)));
        assert_eq!(p.fetch(1).unwrap().symbol, 6);
        assert_eq!(p.fetch(1), Some(triple(4)));
        assert_eq!(p.fetch(2), None);
    }
}
