//! Honest and cheating prover strategies, addressable by id and
//! parameters so scenario files can name them.

mod counters;
mod scripts;
mod tape;

pub use counters::{CounterFault, CounterStore};
pub use scripts::{
    blocks_certificate, floor_log64, upower64_blocks, usquare_blocks, yk_blocks, zeros_certificate,
    CountTweak, CountingProver, MultiScript,
};
pub use tape::{Tamper, TamperKind, TapeStore};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::langspace::{dima2_index, dima2_member};
use crate::protocols::{
    prover_of, ProtocolContext, ProtocolId, ProverArity, DIMA2_QUERY, UPOWER64_QUERY,
    USQUARE_QUERY, YK_QUERY, ZEROS_QUERY,
};
use crate::runtime::{Prover, ScriptedProver};
use crate::{Error, Result};

fn one_u64() -> u64 {
    1
}

fn one_i64() -> i64 {
    1
}

fn one_u32() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// Which of the two tape provers misbehaves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TamperTarget {
    #[default]
    First,
    Second,
    Both,
}

/// A prover strategy by id. Not every strategy applies to every protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProverSpec {
    Honest,
    /// An explicit certificate, optionally followed by `cycle` forever.
    Literal {
        script: String,
        #[serde(default)]
        cycle: String,
    },
    /// Blocks of length `m` forever.
    PeriodicBlocks {
        #[serde(default)]
        m: Option<u64>,
    },
    /// The truthful certificate with block `block` (1-based) changed by `delta`.
    OffByOne {
        #[serde(default = "one_u64")]
        block: u64,
        #[serde(default = "one_i64")]
        delta: i64,
    },
    ExtraBlock,
    MissingBlock,
    /// The certificate of the nearest member.
    NearestMember,
    /// Blocks whose total matches the input length but nothing else.
    SumMatch,
    /// The input echoed with one symbol flipped.
    MutatedEcho {
        #[serde(default)]
        position: Option<usize>,
    },
    /// The input echoed without its last symbol.
    TruncatedEcho,
    /// The `k`-th member echoed instead of the input.
    MemberEcho {
        #[serde(default = "one_u32")]
        k: u32,
    },
    /// `0^(64^k + offset) 1` as the zero-count certificate.
    ZerosOffset {
        #[serde(default = "one_i64")]
        offset: i64,
    },
    /// `8^k + offset` blocks in the square-root certificate.
    RootOffset {
        #[serde(default = "one_i64")]
        offset: i64,
    },
    /// `a^(64^k + offset) b` as the announced count.
    CountOffset {
        #[serde(default = "one_i64")]
        offset: i64,
    },
    /// Report the head count with the decisive bit set.
    ForceBit,
    /// Report the head count with bit `bit` (default the decisive one) flipped.
    FlipBit {
        #[serde(default)]
        bit: Option<u32>,
    },
    /// Pad the binary head count past the allowed length.
    LongBinary {
        #[serde(default = "one_u32")]
        extra: u32,
    },
    /// Never stop sending `a`.
    EndlessCount,
    /// One counter report off by `amount`; a random early step when
    /// `at_step` is absent.
    Drift {
        #[serde(default)]
        at_step: Option<u64>,
        #[serde(default = "one_usize")]
        counter: usize,
        #[serde(default = "one_i64")]
        amount: i64,
        #[serde(default = "yes")]
        persistent: bool,
    },
    Malformed {
        #[serde(default = "one_u64")]
        at_step: u64,
    },
    EndlessReport {
        #[serde(default = "one_u64")]
        at_step: u64,
    },
    Tamper {
        kind: TamperKind,
        #[serde(default)]
        prover: TamperTarget,
        #[serde(default)]
        cell: Option<usize>,
        #[serde(default = "one_u64")]
        after_fetch: u64,
    },
}

impl ProverSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ProverSpec::Honest => "honest",
            ProverSpec::Literal { .. } => "literal",
            ProverSpec::PeriodicBlocks { .. } => "periodic-blocks",
            ProverSpec::OffByOne { .. } => "off-by-one",
            ProverSpec::ExtraBlock => "extra-block",
            ProverSpec::MissingBlock => "missing-block",
            ProverSpec::NearestMember => "nearest-member",
            ProverSpec::SumMatch => "sum-match",
            ProverSpec::MutatedEcho { .. } => "mutated-echo",
            ProverSpec::TruncatedEcho => "truncated-echo",
            ProverSpec::MemberEcho { .. } => "member-echo",
            ProverSpec::ZerosOffset { .. } => "zeros-offset",
            ProverSpec::RootOffset { .. } => "root-offset",
            ProverSpec::CountOffset { .. } => "count-offset",
            ProverSpec::ForceBit => "force-bit",
            ProverSpec::FlipBit { .. } => "flip-bit",
            ProverSpec::LongBinary { .. } => "long-binary",
            ProverSpec::EndlessCount => "endless-count",
            ProverSpec::Drift { .. } => "drift",
            ProverSpec::Malformed { .. } => "malformed",
            ProverSpec::EndlessReport { .. } => "endless-report",
            ProverSpec::Tamper { .. } => "tamper",
        }
    }

    /// Whether every message of the strategy is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            ProverSpec::Literal { cycle, .. } => cycle.is_empty(),
            ProverSpec::PeriodicBlocks { .. }
            | ProverSpec::EndlessCount
            | ProverSpec::EndlessReport { .. } => false,
            _ => true,
        }
    }

    /// Whether the strategy forges signatures at random.
    pub fn guesses_signature(&self) -> bool {
        matches!(
            self,
            ProverSpec::Tamper {
                kind: TamperKind::GuessSignature,
                ..
            }
        )
    }

    /// The whole certificate sent to the USQUARE or UPOWER64 verifier, or
    /// `None` if it never ends.
    pub fn finite_certificate(
        &self,
        protocol: ProtocolId,
        input: &[u8],
    ) -> Result<Option<Vec<u8>>> {
        if !matches!(protocol, ProtocolId::Usquare | ProtocolId::Upower64) {
            return Err(self.unsupported(protocol));
        }
        let (_, script) = self.base_script(protocol, input)?;
        Ok(script.cycle.is_empty().then_some(script.prefix))
    }

    /// Instantiates the strategy for one run. `rng` fills in randomized
    /// parameters and seeds the provers' own randomness.
    pub fn build(
        &self,
        protocol: ProtocolId,
        input: &[u8],
        ctx: &ProtocolContext,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Prover>> {
        match protocol.arity() {
            ProverArity::None => match self {
                ProverSpec::Honest => Ok(Vec::new()),
                _ => Err(self.unsupported(protocol)),
            },
            ProverArity::OneStream => self.build_stream(protocol, input),
            ProverArity::OneCounter => self.build_counter(protocol, rng),
            ProverArity::TwoTape => self.build_tape(protocol, ctx, rng),
        }
    }

    fn unsupported(&self, protocol: ProtocolId) -> Error {
        Error::InvalidParameter(format!(
            "prover {:?} does not apply to {protocol}",
            self.id()
        ))
    }

    fn build_stream(&self, protocol: ProtocolId, input: &[u8]) -> Result<Vec<Prover>> {
        let id = self.id();
        let n = input.len() as u64;
        let prover: Box<dyn crate::runtime::ProverStrategy> = match protocol {
            ProtocolId::Usquare | ProtocolId::Upower64 | ProtocolId::Dima2 => {
                let (query, script) = self.base_script(protocol, input)?;
                Box::new(script.into_prover(id, query))
            }
            ProtocolId::Dima2Set => {
                let k = dima2_index(input).unwrap_or_else(|| dima2_blocks_k(input));
                let zeros = CountingProver::honest_count(k as u64);
                let second = match self {
                    ProverSpec::ZerosOffset { offset } => {
                        Script::finite(zeros_certificate(offset_count(zeros, *offset)?))
                    }
                    _ => Script::finite(zeros_certificate(zeros)),
                };
                let base = match self {
                    ProverSpec::ZerosOffset { .. } => {
                        ProverSpec::Honest.base_script(ProtocolId::Dima2, input)?
                    }
                    _ => self.base_script(ProtocolId::Dima2, input)?,
                };
                Box::new(
                    second.attach_to(base.1.attach_to(MultiScript::new(id), base.0), ZEROS_QUERY),
                )
            }
            ProtocolId::Upower64Set => {
                let k = floor_log64(n).max(1);
                let side = 8u64.pow(k);
                let second = match self {
                    ProverSpec::RootOffset { offset } => {
                        let count = offset_count(side, *offset)?;
                        Script::finite(blocks_certificate(&vec![side; count as usize]))
                    }
                    _ => Script::finite(blocks_certificate(&yk_blocks(k))),
                };
                let base = match self {
                    ProverSpec::RootOffset { .. } => {
                        ProverSpec::Honest.base_script(ProtocolId::Upower64, input)?
                    }
                    _ => self.base_script(ProtocolId::Upower64, input)?,
                };
                Box::new(second.attach_to(base.1.attach_to(MultiScript::new(id), base.0), YK_QUERY))
            }
            ProtocolId::UnaryLogspace => {
                let k = n + 1;
                let honest = CountingProver::honest_count(k);
                let target = (3 * k + 2) as u32;
                let (announced, tweak) = match self {
                    ProverSpec::Honest => (Some(honest), CountTweak::None),
                    ProverSpec::CountOffset { offset } => {
                        (Some(offset_count(honest, *offset)?), CountTweak::None)
                    }
                    ProverSpec::ForceBit => (Some(honest), CountTweak::ForceBit),
                    ProverSpec::FlipBit { bit } => {
                        (Some(honest), CountTweak::FlipBit(bit.unwrap_or(target)))
                    }
                    ProverSpec::LongBinary { extra } => (Some(honest), CountTweak::Pad(*extra)),
                    ProverSpec::EndlessCount => (None, CountTweak::None),
                    _ => return Err(self.unsupported(protocol)),
                };
                Box::new(CountingProver::new(id, k, announced, tweak))
            }
            _ => unreachable!("stream protocols are listed above"),
        };
        Ok(vec![Prover::Stream(prover)])
    }

    /// Start query and script of the single-certificate protocols.
    fn base_script(&self, protocol: ProtocolId, input: &[u8]) -> Result<(u8, Script)> {
        let n = input.len() as u64;
        let bad = || self.unsupported(protocol);
        match protocol {
            ProtocolId::Usquare | ProtocolId::Upower64 => {
                let usquare = protocol == ProtocolId::Usquare;
                let query = if usquare {
                    USQUARE_QUERY
                } else {
                    UPOWER64_QUERY
                };
                let mut blocks = if usquare {
                    usquare_blocks(n)
                } else {
                    upower64_blocks(n)
                };
                match self {
                    ProverSpec::Honest => {}
                    ProverSpec::Literal { script, cycle } => {
                        return Ok((query, Script::new(script.as_bytes(), cycle.as_bytes())))
                    }
                    ProverSpec::PeriodicBlocks { m } => {
                        let (prefix, default_m) = if usquare {
                            (Vec::new(), ceil_sqrt(n))
                        } else {
                            (b"ab".to_vec(), 64)
                        };
                        let m = m.unwrap_or(default_m).max(1);
                        let mut cycle = vec![b'a'; m as usize];
                        cycle.push(b'b');
                        return Ok((query, Script::new(&prefix, &cycle)));
                    }
                    ProverSpec::OffByOne { block, delta } => {
                        let j = usize::try_from(*block)
                            .ok()
                            .filter(|&j| j >= 1 && j <= blocks.len())
                            .ok_or_else(|| {
                                Error::InvalidParameter(format!(
                                    "block {block} outside 1..={}",
                                    blocks.len()
                                ))
                            })?;
                        blocks[j - 1] = offset_count(blocks[j - 1], *delta)?;
                    }
                    ProverSpec::ExtraBlock => {
                        let last = *blocks.last().expect("certificates have a block");
                        blocks.push(if usquare { last } else { last * 64 });
                    }
                    ProverSpec::MissingBlock => {
                        if blocks.len() > 1 {
                            blocks.pop();
                        } else {
                            blocks[0] += 1;
                        }
                    }
                    ProverSpec::NearestMember => {
                        blocks = if usquare {
                            usquare_blocks(nearest_square(n))
                        } else {
                            upower64_blocks(nearest_power64(n))
                        };
                    }
                    ProverSpec::SumMatch => {
                        blocks = if usquare {
                            vec![n.div_ceil(2), n / 2]
                        } else if n > 64 && (n - 1).is_multiple_of(63) {
                            vec![1, (n - 1) / 63 - 1]
                        } else {
                            return Err(Error::InvalidParameter(format!(
                                "sum-match needs n ≡ 1 (mod 63) and n > 64, got {n}"
                            )));
                        };
                    }
                    _ => return Err(bad()),
                }
                Ok((query, Script::finite(blocks_certificate(&blocks))))
            }
            ProtocolId::Dima2 => {
                let mut y = input.to_vec();
                match self {
                    ProverSpec::Honest => {}
                    ProverSpec::Literal { script, cycle } => {
                        return Ok((
                            DIMA2_QUERY,
                            Script::new(script.as_bytes(), cycle.as_bytes()),
                        ))
                    }
                    ProverSpec::PeriodicBlocks { m } => {
                        let mut cycle = vec![b'0'; m.unwrap_or(1).max(1) as usize];
                        cycle.push(b'1');
                        return Ok((DIMA2_QUERY, Script::new(b"", &cycle)));
                    }
                    ProverSpec::MutatedEcho { position } => {
                        if y.is_empty() {
                            y.push(b'0');
                        } else {
                            let i = position.unwrap_or(y.len() / 2).min(y.len() - 1);
                            y[i] = if y[i] == b'0' { b'1' } else { b'0' };
                        }
                    }
                    ProverSpec::TruncatedEcho => {
                        y.pop();
                    }
                    ProverSpec::MemberEcho { k } => {
                        if *k == 0 || *k > 3 {
                            return Err(Error::InvalidParameter(format!(
                                "member-echo k = {k} outside 1..=3"
                            )));
                        }
                        y = dima2_member(*k);
                    }
                    _ => return Err(bad()),
                }
                Ok((DIMA2_QUERY, Script::finite(y)))
            }
            _ => Err(bad()),
        }
    }

    fn build_counter(&self, protocol: ProtocolId, rng: &mut ChaCha8Rng) -> Result<Vec<Prover>> {
        let fault = match *self {
            ProverSpec::Honest => CounterFault::None,
            ProverSpec::Drift {
                at_step,
                counter,
                amount,
                persistent,
            } => {
                if counter >= 4 {
                    return Err(Error::InvalidParameter(format!(
                        "counter index {counter} outside 0..4"
                    )));
                }
                CounterFault::Drift {
                    at_step: at_step.unwrap_or_else(|| rng.gen_range(2..=65)),
                    counter,
                    amount,
                    persistent,
                }
            }
            ProverSpec::Malformed { at_step } => CounterFault::Malformed { at_step },
            ProverSpec::EndlessReport { at_step } => CounterFault::Endless { at_step },
            _ => return Err(self.unsupported(protocol)),
        };
        Ok(vec![Prover::Counter(Box::new(CounterStore::new(
            self.id(),
            fault,
        )))])
    }

    fn build_tape(
        &self,
        protocol: ProtocolId,
        ctx: &ProtocolContext,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Prover>> {
        let pair = self
            .tape_pair(ctx.params.q, rng)
            .map_err(|_| self.unsupported(protocol))?;
        Ok(pair.map(|s| Prover::Tape(Box::new(s))).into())
    }

    /// The two tape stores of an honest or tampering strategy.
    pub fn tape_pair(&self, q: u64, rng: &mut ChaCha8Rng) -> Result<[TapeStore; 2]> {
        let (tamper, target) = match *self {
            ProverSpec::Honest => (None, TamperTarget::First),
            ProverSpec::Tamper {
                kind,
                prover,
                cell,
                after_fetch,
            } => {
                if let Some(c) = cell {
                    let owner = if prover == TamperTarget::Second { 2 } else { 1 };
                    if c == 0 || (prover != TamperTarget::Both && prover_of(c) != owner) {
                        return Err(Error::InvalidParameter(format!(
                            "cell {c} is not held by the tampering prover"
                        )));
                    }
                }
                (
                    Some(Tamper {
                        kind,
                        cell,
                        after_fetch,
                    }),
                    prover,
                )
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "{} is not a tape strategy",
                    self.id()
                )))
            }
        };
        let mut store = |which: TamperTarget| {
            let active = tamper.filter(|_| target == which || target == TamperTarget::Both);
            let id = if active.is_some() {
                self.id()
            } else {
                "honest"
            };
            TapeStore::new(id, q, active, ChaCha8Rng::seed_from_u64(rng.gen()))
        };
        Ok([store(TamperTarget::First), store(TamperTarget::Second)])
    }
}

/// A finite script with an optional periodic tail.
#[derive(Clone, Debug)]
struct Script {
    prefix: Vec<u8>,
    cycle: Vec<u8>,
}

impl Script {
    fn new(prefix: &[u8], cycle: &[u8]) -> Self {
        Self {
            prefix: prefix.to_vec(),
            cycle: cycle.to_vec(),
        }
    }

    fn finite(prefix: Vec<u8>) -> Self {
        Self {
            prefix,
            cycle: Vec::new(),
        }
    }

    fn into_prover(self, id: &str, query: u8) -> ScriptedProver {
        if self.cycle.is_empty() {
            ScriptedProver::finite(id, self.prefix).restarting_on(query)
        } else {
            ScriptedProver::periodic(id, self.prefix, self.cycle).restarting_on(query)
        }
    }

    fn attach_to(self, p: MultiScript, query: u8) -> MultiScript {
        if self.cycle.is_empty() {
            p.with(query, self.prefix)
        } else {
            p.with_periodic(query, self.prefix, self.cycle)
        }
    }
}

fn offset_count(base: u64, offset: i64) -> Result<u64> {
    base.checked_add_signed(offset).ok_or_else(|| {
        Error::InvalidParameter(format!("offset {offset} takes {base} out of range"))
    })
}

fn ceil_sqrt(n: u64) -> u64 {
    let m = num_integer::Roots::sqrt(&n);
    if m * m == n {
        m
    } else {
        m + 1
    }
}

fn nearest_square(n: u64) -> u64 {
    let m = num_integer::Roots::sqrt(&n).max(1);
    let (lo, hi) = (m * m, (m + 1) * (m + 1));
    if n >= lo && n - lo <= hi - n {
        lo
    } else {
        hi
    }
}

fn nearest_power64(n: u64) -> u64 {
    let k = floor_log64(n).max(1);
    let lo = 64u64.pow(k);
    match lo.checked_mul(64) {
        Some(hi) if n > lo && hi - n < n - lo => hi,
        _ => lo,
    }
}

/// `k` read off the block count before `11`, for inputs outside DIMA2.
fn dima2_blocks_k(w: &[u8]) -> u32 {
    let marker = w.windows(2).position(|p| p == b"11");
    let blocks = marker.map_or(0, |i| w[..=i].iter().filter(|&&s| s == b'1').count());
    (blocks / 3).clamp(1, 3) as u32
}

/// The honest strategy for `protocol` on `input`.
pub fn honest(protocol: ProtocolId, input: &[u8], ctx: &ProtocolContext) -> Result<Vec<Prover>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    ProverSpec::Honest.build(protocol, input, ctx, &mut rng)
}

/// The cheating strategies exercised against `protocol` on `input`.
pub fn cheat_catalog(protocol: ProtocolId, input: &[u8]) -> Vec<ProverSpec> {
    use ProverSpec::*;
    let n = input.len();
    let tampers = |cells: [Option<usize>; 2]| {
        let kinds = [
            TamperKind::FlipSymbol,
            TamperKind::GuessSignature,
            TamperKind::StaleReplay,
            TamperKind::AlterNonce,
        ];
        let mut out = Vec::new();
        for kind in kinds {
            for (prover, cell) in [
                (TamperTarget::First, cells[0]),
                (TamperTarget::Second, cells[1]),
                (TamperTarget::Both, None),
            ] {
                out.push(Tamper {
                    kind,
                    prover,
                    cell,
                    after_fetch: 1,
                });
            }
        }
        out
    };
    match protocol {
        ProtocolId::Usquare => vec![
            PeriodicBlocks { m: None },
            OffByOne { block: 1, delta: 1 },
            OffByOne {
                block: 1,
                delta: -1,
            },
            ExtraBlock,
            MissingBlock,
            NearestMember,
            SumMatch,
        ],
        ProtocolId::Upower64 => {
            let mut c = vec![
                PeriodicBlocks { m: None },
                OffByOne { block: 1, delta: 1 },
                ExtraBlock,
                MissingBlock,
                NearestMember,
            ];
            if n > 64 && (n - 1).is_multiple_of(63) {
                c.push(SumMatch);
            }
            c
        }
        ProtocolId::Dima2 => vec![
            PeriodicBlocks { m: None },
            MutatedEcho { position: None },
            TruncatedEcho,
            MemberEcho { k: 1 },
        ],
        ProtocolId::Dima2Set => vec![
            ZerosOffset { offset: 1 },
            ZerosOffset { offset: -1 },
            MutatedEcho { position: None },
        ],
        ProtocolId::Upower64Set => vec![
            RootOffset { offset: 1 },
            RootOffset { offset: -1 },
            OffByOne { block: 1, delta: 1 },
        ],
        ProtocolId::UnaryLogspace => vec![
            CountOffset { offset: 1 },
            CountOffset { offset: -1 },
            ForceBit,
            FlipBit { bit: None },
            LongBinary { extra: 1 },
            EndlessCount,
        ],
        ProtocolId::WeakSweeping => vec![
            Drift {
                at_step: None,
                counter: 1,
                amount: 1,
                persistent: true,
            },
            Drift {
                at_step: None,
                counter: 1,
                amount: 1,
                persistent: false,
            },
            Malformed { at_step: 1 },
            EndlessReport { at_step: 2 },
        ],
        // symbol and signature forgeries on each prover's first fetch;
        // replays and nonce changes on the last cell
        ProtocolId::SignedTape => {
            let mut out = Vec::new();
            if n == 0 {
                return out;
            }
            for kind in [TamperKind::FlipSymbol, TamperKind::GuessSignature] {
                for prover in [TamperTarget::First, TamperTarget::Second] {
                    if prover == TamperTarget::Second && n < 2 {
                        continue;
                    }
                    out.push(Tamper {
                        kind,
                        prover,
                        cell: None,
                        after_fetch: 1,
                    });
                }
            }
            let owner = if prover_of(n) == 1 {
                TamperTarget::First
            } else {
                TamperTarget::Second
            };
            for kind in [TamperKind::StaleReplay, TamperKind::AlterNonce] {
                out.push(Tamper {
                    kind,
                    prover: owner,
                    cell: Some(n),
                    after_fetch: 1,
                });
            }
            out
        }
        ProtocolId::TwoProver => tampers([None, None]),
        ProtocolId::UnaryLinearSpace | ProtocolId::KaryExponential | ProtocolId::FourCounter => {
            Vec::new()
        }
    }
}
