//! Recognizers and verifiers, each written as a procedure over the
//! [`Verifier`](crate::runtime::Verifier) primitives.
//!
//! [`run_protocol`] is the uniform entry point: it checks the prover
//! arrangement, builds a verifier for the input, applies the repetition
//! rule and returns the metered [`Outcome`].

mod dima;
mod logspace;
mod recognize;
mod signed_tape;
mod two_prover;
mod unary;
mod weak;

pub use dima::{dima2_coarse_shape, verify_dima2, verify_dima2_set, DIMA2_QUERY, ZEROS_QUERY};
pub use logspace::{
    verify_unary_logspace, BIN_QUERY, COUNT_QUERY, HEAD_SYMBOL, NEXT_BIT_QUERY, TAIL_SYMBOL,
};
pub use recognize::{
    recognize_1p4ca, recognize_kary_exponential, recognize_unary_linear_space, run_four_counter,
    CounterBackend, FourCounterDetail, FourCounterRun, LocalCounters, Step, Stop,
};
pub use signed_tape::{
    prover_of, run_signed_tape_protocol, signed_tape_session, tape_codes, Detection,
    PassTransducer, SignedTape, TapeIo, TapeRandomness, TapeResult,
};
pub use two_prover::{verify_two_prover, work_alphabet_size};
pub use unary::{
    verify_upower64, verify_upower64_set, verify_usquare, CertificateReader, Token, NEXT_QUERY,
    UPOWER64_QUERY, USQUARE_QUERY, YK_QUERY,
};
pub use weak::{weak_round_exact, weak_verify_sweeping, LotteryMode, WeakRound, WeakVerdict};

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::langspace::{
    dima2_index, is_positive_power_of_64, is_positive_square, membership_bit, LanguageSpec,
};
use crate::provers::floor_log64;
use crate::runtime::{Decision, Outcome, Prover, ResourceBudget, Run, Verifier, WalkMode};
use crate::{Error, Result};

/// Stable identifiers of the implemented protocols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolId {
    #[serde(rename = "thm1-unary")]
    UnaryLinearSpace,
    #[serde(rename = "cor1-kary")]
    KaryExponential,
    #[serde(rename = "thm2-logspace")]
    UnaryLogspace,
    #[serde(rename = "thm3-1p4ca")]
    FourCounter,
    #[serde(rename = "thm4-weak")]
    WeakSweeping,
    #[serde(rename = "fact3-tape")]
    SignedTape,
    #[serde(rename = "thm5-twoprover")]
    TwoProver,
    #[serde(rename = "thm6-usquare")]
    Usquare,
    #[serde(rename = "thm7-upower64")]
    Upower64,
    #[serde(rename = "thm8-dima2")]
    Dima2,
    #[serde(rename = "thm9-dima2-set")]
    Dima2Set,
    #[serde(rename = "thm10-upower64-set")]
    Upower64Set,
}

/// How independent repetitions are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepetitionRule {
    /// Accept only if every repetition accepts (one-sided error).
    Unanimous,
    /// Accept iff more than half of the repetitions accept.
    Majority,
}

/// The prover arrangement a protocol expects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProverArity {
    None,
    OneStream,
    OneCounter,
    TwoTape,
}

impl ProverArity {
    fn describe(self) -> &'static str {
        match self {
            ProverArity::None => "no provers",
            ProverArity::OneStream => "one stream prover",
            ProverArity::OneCounter => "one counter prover",
            ProverArity::TwoTape => "two tape provers",
        }
    }
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 12] = [
        ProtocolId::UnaryLinearSpace,
        ProtocolId::KaryExponential,
        ProtocolId::UnaryLogspace,
        ProtocolId::FourCounter,
        ProtocolId::WeakSweeping,
        ProtocolId::SignedTape,
        ProtocolId::TwoProver,
        ProtocolId::Usquare,
        ProtocolId::Upower64,
        ProtocolId::Dima2,
        ProtocolId::Dima2Set,
        ProtocolId::Upower64Set,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::UnaryLinearSpace => "thm1-unary",
            ProtocolId::KaryExponential => "cor1-kary",
            ProtocolId::UnaryLogspace => "thm2-logspace",
            ProtocolId::FourCounter => "thm3-1p4ca",
            ProtocolId::WeakSweeping => "thm4-weak",
            ProtocolId::SignedTape => "fact3-tape",
            ProtocolId::TwoProver => "thm5-twoprover",
            ProtocolId::Usquare => "thm6-usquare",
            ProtocolId::Upower64 => "thm7-upower64",
            ProtocolId::Dima2 => "thm8-dima2",
            ProtocolId::Dima2Set => "thm9-dima2-set",
            ProtocolId::Upower64Set => "thm10-upower64-set",
        }
    }

    pub fn arity(self) -> ProverArity {
        match self {
            ProtocolId::UnaryLinearSpace
            | ProtocolId::KaryExponential
            | ProtocolId::FourCounter => ProverArity::None,
            ProtocolId::WeakSweeping => ProverArity::OneCounter,
            ProtocolId::SignedTape | ProtocolId::TwoProver => ProverArity::TwoTape,
            _ => ProverArity::OneStream,
        }
    }

    pub fn repetition_rule(self) -> RepetitionRule {
        match self {
            ProtocolId::Usquare
            | ProtocolId::Upower64
            | ProtocolId::Dima2
            | ProtocolId::SignedTape => RepetitionRule::Unanimous,
            _ => RepetitionRule::Majority,
        }
    }

    /// Whether the protocol consults a language or index-set spec.
    pub fn needs_spec(self) -> bool {
        !matches!(
            self,
            ProtocolId::SignedTape | ProtocolId::Usquare | ProtocolId::Upower64 | ProtocolId::Dima2
        )
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown protocol id {s:?}")))
    }
}

/// `num/den` rationals written as strings in configs, e.g. `"1/4"`.
pub mod ratio_string {
    use num_rational::Ratio;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u64>, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(de::Error::custom)
    }

    pub fn parse(s: &str) -> Result<Ratio<u64>, String> {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n: u64 = n
            .trim()
            .parse()
            .map_err(|_| format!("bad rational {s:?}"))?;
        let d: u64 = d
            .trim()
            .parse()
            .map_err(|_| format!("bad rational {s:?}"))?;
        if d == 0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(Ratio::new(n, d))
    }
}

/// Tunable protocol parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Fingerprint width constant.
    pub c: u32,
    /// Signature modulus for prover-stored tapes.
    pub q: u64,
    /// Repetitions of the whole protocol.
    pub r: u32,
    /// Repetitions of the embedded membership check in the set verifiers.
    pub inner_r: u32,
    /// Lottery parameter of the weak verifier, in `(0, 1/2)`.
    #[serde(with = "ratio_string")]
    pub y: Ratio<u64>,
    pub walk: WalkMode,
    pub lottery: LotteryMode,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            c: 12,
            q: 251,
            r: 1,
            inner_r: 8,
            y: Ratio::new(1, 4),
            walk: WalkMode::Calibrated,
            lottery: LotteryMode::Sampled,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.inner_r == 0 {
            return Err(Error::InvalidParameter(
                "repetition counts must be positive".into(),
            ));
        }
        if self.c == 0 {
            return Err(Error::InvalidParameter("c must be positive".into()));
        }
        if *self.y.numer() == 0 || self.y >= Ratio::new(1, 2) {
            return Err(Error::InvalidParameter("y must lie in (0, 1/2)".into()));
        }
        if !crate::fingerprint::is_prime(self.q as u128) {
            return Err(Error::InvalidParameter(format!(
                "q = {} is not prime",
                self.q
            )));
        }
        Ok(())
    }
}

/// Everything besides input and provers that a run depends on.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProtocolContext {
    pub spec: Option<LanguageSpec>,
    pub params: ProtocolParams,
}

impl ProtocolContext {
    pub fn new(spec: Option<LanguageSpec>, params: ProtocolParams) -> Self {
        Self { spec, params }
    }

    pub fn with_spec(spec: LanguageSpec) -> Self {
        Self {
            spec: Some(spec),
            params: ProtocolParams::default(),
        }
    }

    pub(crate) fn spec(&self, protocol: ProtocolId) -> Result<&LanguageSpec> {
        self.spec.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!("{protocol} requires a language specification"))
        })
    }
}

/// Runs `body` up to `r` times and combines the decisions. A timeout in
/// any repetition is a timeout of the whole run. `between` runs before
/// every repetition after the first.
pub fn amplify(
    v: &mut Verifier,
    r: u32,
    rule: RepetitionRule,
    mut between: impl FnMut(&mut Verifier) -> Run<()>,
    mut body: impl FnMut(&mut Verifier) -> Run<Decision>,
) -> Run<Decision> {
    let mut accepts = 0u32;
    for i in 0..r {
        if i > 0 {
            between(v)?;
        }
        match body(v)? {
            Decision::Accept => accepts += 1,
            Decision::Reject if rule == RepetitionRule::Unanimous => return Ok(Decision::Reject),
            Decision::Reject => {}
            Decision::Timeout => return Ok(Decision::Timeout),
        }
    }
    let accepted = match rule {
        RepetitionRule::Unanimous => accepts == r,
        RepetitionRule::Majority => 2 * accepts > r,
    };
    Ok(if accepted {
        Decision::Accept
    } else {
        Decision::Reject
    })
}

/// Moves the head to `$` and back to `¢`, reversing only on the markers.
pub(crate) fn rewind(v: &mut Verifier) -> Run<()> {
    v.to_right_end()?;
    v.to_left_end()
}

pub(crate) fn decide(accept: bool) -> Decision {
    if accept {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

fn check_arity(protocol: ProtocolId, provers: &[Prover]) -> Result<()> {
    let arity = protocol.arity();
    let ok = match arity {
        ProverArity::None => provers.is_empty(),
        ProverArity::OneStream => matches!(provers, [Prover::Stream(_)]),
        ProverArity::OneCounter => matches!(provers, [Prover::Counter(_)]),
        ProverArity::TwoTape => matches!(provers, [Prover::Tape(_), Prover::Tape(_)]),
    };
    if ok {
        return Ok(());
    }
    let got = match provers {
        [] => "no provers",
        [p] => p.kind(),
        [_, _] => "two provers",
        _ => "more than two provers",
    };
    Err(Error::ProverArity {
        protocol: protocol.as_str(),
        expected: arity.describe(),
        got,
    })
}

/// Executes one run of `protocol` on `input`.
pub fn run_protocol(
    protocol: ProtocolId,
    input: &[u8],
    provers: Vec<Prover>,
    ctx: &ProtocolContext,
    budget: ResourceBudget,
    rng: ChaCha8Rng,
) -> Result<Outcome> {
    check_arity(protocol, &provers)?;
    ctx.params.validate()?;
    budget.validate()?;
    let mut v = Verifier::new(input, provers, budget, rng);
    let result = dispatch(protocol, &mut v, ctx)?;
    Ok(v.finish(result))
}

fn dispatch(
    protocol: ProtocolId,
    v: &mut Verifier,
    ctx: &ProtocolContext,
) -> Result<Run<Decision>> {
    let p = &ctx.params;
    let rule = protocol.repetition_rule();
    Ok(match protocol {
        ProtocolId::UnaryLinearSpace => {
            let spec = ctx.spec(protocol)?;
            check_word(spec, v)?;
            amplify(v, p.r, rule, rewind, |v| {
                recognize_unary_linear_space(v, spec)
            })
        }
        ProtocolId::KaryExponential => {
            let spec = ctx.spec(protocol)?;
            check_word(spec, v)?;
            amplify(v, p.r, rule, rewind, |v| {
                recognize_kary_exponential(v, spec)
            })
        }
        ProtocolId::UnaryLogspace => {
            let spec = ctx.spec(protocol)?;
            check_word(spec, v)?;
            logspace::check_width(p.c, v.n())?;
            amplify(v, p.r, rule, rewind, |v| {
                verify_unary_logspace(v, spec, p.c, 0)
            })
        }
        ProtocolId::FourCounter => {
            let spec = ctx.spec(protocol)?;
            check_word(spec, v)?;
            recognize_1p4ca(v, spec, p.r).decision
        }
        ProtocolId::WeakSweeping => {
            let spec = ctx.spec(protocol)?;
            check_word(spec, v)?;
            amplify(v, p.r, rule, rewind, |v| {
                weak_verify_sweeping(v, spec, p.y, 0)
            })
        }
        ProtocolId::SignedTape => run_signed_tape_protocol(v, p.q)?,
        ProtocolId::TwoProver => {
            let spec = ctx.spec(protocol)?;
            check_word(spec, v)?;
            verify_two_prover(v, spec, p.q, p.r)?
        }
        ProtocolId::Usquare => {
            check_unary(v)?;
            amplify(v, p.r, rule, rewind, |v| {
                verify_usquare(v, 0, USQUARE_QUERY, p.walk)
            })
        }
        ProtocolId::Upower64 => {
            check_unary(v)?;
            amplify(v, p.r, rule, rewind, |v| verify_upower64(v, 0, p.walk))
        }
        ProtocolId::Dima2 => {
            check_binary(v)?;
            amplify(v, p.r, rule, rewind, |v| verify_dima2(v, 0))
        }
        ProtocolId::Dima2Set => {
            let spec = ctx.spec(protocol)?;
            check_binary(v)?;
            amplify(v, p.r, rule, rewind, |v| {
                verify_dima2_set(v, spec, 0, p.inner_r)
            })
        }
        ProtocolId::Upower64Set => {
            let spec = ctx.spec(protocol)?;
            check_unary(v)?;
            amplify(v, p.r, rule, rewind, |v| {
                verify_upower64_set(v, spec, 0, p.inner_r, p.walk)
            })
        }
    })
}

/// Whether `input` belongs to the language `protocol` decides, or `None`
/// for the signed-tape protocol, which decides no language.
pub fn expected_membership(
    protocol: ProtocolId,
    input: &[u8],
    spec: Option<&LanguageSpec>,
) -> Result<Option<bool>> {
    let spec = || {
        spec.ok_or_else(|| {
            Error::InvalidParameter(format!("{protocol} requires a language specification"))
        })
    };
    let unary = input.iter().all(|&s| s == b'a');
    let n = input.len() as u64;
    Ok(Some(match protocol {
        ProtocolId::SignedTape => return Ok(None),
        ProtocolId::Usquare => unary && is_positive_square(n),
        ProtocolId::Upower64 => unary && is_positive_power_of_64(n),
        ProtocolId::Dima2 => dima2_index(input).is_some(),
        ProtocolId::Dima2Set => match dima2_index(input) {
            Some(k) => membership_bit(spec()?, k as u64),
            None => false,
        },
        ProtocolId::Upower64Set => {
            unary && is_positive_power_of_64(n) && membership_bit(spec()?, floor_log64(n) as u64)
        }
        _ => spec()?.contains_word(input)?,
    }))
}

fn check_word(spec: &LanguageSpec, v: &Verifier) -> Result<()> {
    spec.alphabet().check_word(v.input().word())
}

fn check_unary(v: &Verifier) -> Result<()> {
    match v.input().word().iter().find(|&&s| s != b'a') {
        Some(&s) => Err(Error::SymbolNotInAlphabet(s as char)),
        None => Ok(()),
    }
}

fn check_binary(v: &Verifier) -> Result<()> {
    match v.input().word().iter().find(|&&s| s != b'0' && s != b'1') {
        Some(&s) => Err(Error::SymbolNotInAlphabet(s as char)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ProtocolId::ALL {
            assert_eq!(id.as_str().parse::<ProtocolId>().unwrap(), id);
            let json = format!("\"{}\"", id.as_str());
            let back: ProtocolId = serde_json_from(&json);
            assert_eq!(back, id);
        }
        assert!("thm11".parse::<ProtocolId>().is_err());
    }

    fn serde_json_from(s: &str) -> ProtocolId {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn params_validation() {
        let mut p = ProtocolParams::default();
        assert!(p.validate().is_ok());
        p.y = Ratio::new(1, 2);
        assert!(p.validate().is_err());
        p = ProtocolParams {
            q: 250,
            ..ProtocolParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn ratio_strings() {
        assert_eq!(ratio_string::parse("1/4").unwrap(), Ratio::new(1, 4));
        assert_eq!(ratio_string::parse("3").unwrap(), Ratio::new(3, 1));
        assert!(ratio_string::parse("1/0").is_err());
    }
}
