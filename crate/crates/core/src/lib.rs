//! Simulation laboratory for space-bounded interactive proof systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`langspace`] orders strings over an alphabet and answers membership
//!   queries for the languages and index sets under test.
//! * [`coins`] simulates the biased coin whose binary expansion interleaves
//!   the membership bits of a language, exactly.
//! * [`fingerprint`] provides random primes and streaming residues.
//! * [`runtime`] is the verifier substrate: tapes, heads, counters,
//!   communication cells, randomness and resource metering.
//! * [`protocols`] implements every recognizer and verifier against the
//!   runtime, and [`provers`] supplies honest and adversarial provers.
//! * [`harness`] runs trials, computes confidence intervals and exact
//!   oracles.

pub mod coins;
pub mod fingerprint;
pub mod harness;
pub mod langspace;
pub mod protocols;
pub mod provers;
pub mod runtime;

mod error;

pub use error::{Error, Result};
