//! Named input families, written `name(arg, ...)` in configs.

use std::fmt;
use std::str::FromStr;

use ipslab_core::langspace::{
    dima2_member, dima2_member_len, is_positive_square, lex_unrank, Alphabet,
};

use crate::error::CliError;

/// Longest word a generator will materialize.
pub const MAX_WORD_LEN: u64 = 1 << 26;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `unary(n1, n2, ...)`: `a^n` for each listed length.
    Unary(Vec<u64>),
    /// `unary-range(lo, hi)`
    UnaryRange(u64, u64),
    /// `unary-doubling(lo, hi)`: `lo, 2·lo, 4·lo, ... ≤ hi`.
    UnaryDoubling(u64, u64),
    /// `non-squares(lo, hi)`
    NonSquares(u64, u64),
    /// `usquare-member(m)`: `a^(m²)`.
    UsquareMember(u64),
    /// `usquare-members(lo, hi)`
    UsquareMembers(u64, u64),
    /// `upower64-member(k)`: `a^(64^k)`.
    Upower64Member(u32),
    /// `dima2-member(k)`
    Dima2Member(u32),
    /// `dima2-members(lo, hi)`
    Dima2Members(u32, u32),
    /// `dima2-mutants(k)`: every single-symbol flip of the k-th member.
    Dima2Mutants(u32),
    /// `lex(alphabet, rank)`: the word of that lexicographic rank.
    Lex(String, u64),
    /// `lex-upto(alphabet, rank)`: ranks `1..=rank`.
    LexUpto(String, u64),
}

fn arg<T: FromStr>(name: &str, args: &[&str], i: usize) -> Result<T, CliError> {
    let raw = args
        .get(i)
        .ok_or_else(|| CliError::Config(format!("{name} needs at least {} arguments", i + 1)))?;
    raw.parse()
        .map_err(|_| CliError::Config(format!("{name}: cannot parse argument {raw:?}")))
}

fn arity(name: &str, args: &[&str], n: usize) -> Result<(), CliError> {
    if args.len() != n {
        return Err(CliError::Config(format!(
            "{name} takes {n} arguments, got {}",
            args.len()
        )));
    }
    Ok(())
}

fn range<T: PartialOrd + fmt::Display>(name: &str, lo: T, hi: T) -> Result<(T, T), CliError> {
    if lo > hi {
        return Err(CliError::Config(format!("{name}: empty range {lo}..{hi}")));
    }
    Ok((lo, hi))
}

impl FromStr for Generator {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        let (name, rest) = s.split_once('(').ok_or_else(|| {
            CliError::Config(format!("generator {s:?} is not of the form name(args)"))
        })?;
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| CliError::Config(format!("generator {s:?} is missing ')'")))?;
        let args: Vec<&str> = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(str::trim).collect()
        };
        let name = name.trim();
        let two = |args: &[&str]| -> Result<(u64, u64), CliError> {
            arity(name, args, 2)?;
            range(name, arg(name, args, 0)?, arg(name, args, 1)?)
        };
        let gen = match name {
            "unary" => {
                if args.is_empty() {
                    return Err(CliError::Config("unary needs at least one length".into()));
                }
                Generator::Unary(
                    (0..args.len())
                        .map(|i| arg(name, &args, i))
                        .collect::<Result<_, _>>()?,
                )
            }
            "unary-range" => {
                let (lo, hi) = two(&args)?;
                Generator::UnaryRange(lo, hi)
            }
            "unary-doubling" => {
                let (lo, hi) = two(&args)?;
                if lo == 0 {
                    return Err(CliError::Config("unary-doubling must start above 0".into()));
                }
                Generator::UnaryDoubling(lo, hi)
            }
            "non-squares" => {
                let (lo, hi) = two(&args)?;
                Generator::NonSquares(lo, hi)
            }
            "usquare-member" => {
                arity(name, &args, 1)?;
                Generator::UsquareMember(arg(name, &args, 0)?)
            }
            "usquare-members" => {
                let (lo, hi) = two(&args)?;
                Generator::UsquareMembers(lo, hi)
            }
            "upower64-member" => {
                arity(name, &args, 1)?;
                Generator::Upower64Member(arg(name, &args, 0)?)
            }
            "dima2-member" => {
                arity(name, &args, 1)?;
                Generator::Dima2Member(arg(name, &args, 0)?)
            }
            "dima2-members" => {
                arity(name, &args, 2)?;
                let (lo, hi) = range(name, arg(name, &args, 0)?, arg(name, &args, 1)?)?;
                Generator::Dima2Members(lo, hi)
            }
            "dima2-mutants" => {
                arity(name, &args, 1)?;
                Generator::Dima2Mutants(arg(name, &args, 0)?)
            }
            "lex" | "lex-upto" => {
                arity(name, &args, 2)?;
                let alphabet = args[0].to_string();
                Alphabet::new(alphabet.as_bytes())
                    .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
                let rank: u64 = arg(name, &args, 1)?;
                if rank == 0 {
                    return Err(CliError::Config(format!("{name}: ranks start at 1")));
                }
                if name == "lex" {
                    Generator::Lex(alphabet, rank)
                } else {
                    Generator::LexUpto(alphabet, rank)
                }
            }
            other => return Err(CliError::Config(format!("unknown generator {other:?}"))),
        };
        gen.check_sizes()?;
        Ok(gen)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Unary(ns) => {
                let ns: Vec<String> = ns.iter().map(u64::to_string).collect();
                write!(f, "unary({})", ns.join(","))
            }
            Generator::UnaryRange(lo, hi) => write!(f, "unary-range({lo},{hi})"),
            Generator::UnaryDoubling(lo, hi) => write!(f, "unary-doubling({lo},{hi})"),
            Generator::NonSquares(lo, hi) => write!(f, "non-squares({lo},{hi})"),
            Generator::UsquareMember(m) => write!(f, "usquare-member({m})"),
            Generator::UsquareMembers(lo, hi) => write!(f, "usquare-members({lo},{hi})"),
            Generator::Upower64Member(k) => write!(f, "upower64-member({k})"),
            Generator::Dima2Member(k) => write!(f, "dima2-member({k})"),
            Generator::Dima2Members(lo, hi) => write!(f, "dima2-members({lo},{hi})"),
            Generator::Dima2Mutants(k) => write!(f, "dima2-mutants({k})"),
            Generator::Lex(a, r) => write!(f, "lex({a},{r})"),
            Generator::LexUpto(a, r) => write!(f, "lex-upto({a},{r})"),
        }
    }
}

fn too_long(what: &str, len: Option<u64>) -> Result<(), CliError> {
    match len {
        Some(l) if l <= MAX_WORD_LEN => Ok(()),
        _ => Err(CliError::Config(format!(
            "{what} is longer than {MAX_WORD_LEN} symbols"
        ))),
    }
}

fn unary_word(n: u64) -> Vec<u8> {
    vec![b'a'; n as usize]
}

impl Generator {
    fn check_sizes(&self) -> Result<(), CliError> {
        let dima = |k: u32| -> Result<(), CliError> {
            if k == 0 {
                return Err(CliError::Config("DIMA2 members are indexed from 1".into()));
            }
            too_long(
                &format!("dima2 member {k}"),
                (k <= 4).then(|| dima2_member_len(k)),
            )
        };
        match self {
            Generator::Unary(ns) => ns
                .iter()
                .try_for_each(|&n| too_long(&format!("a^{n}"), Some(n))),
            Generator::UnaryRange(_, hi)
            | Generator::UnaryDoubling(_, hi)
            | Generator::NonSquares(_, hi) => too_long(&format!("a^{hi}"), Some(*hi)),
            Generator::UsquareMember(m) | Generator::UsquareMembers(_, m) => {
                if matches!(
                    self,
                    Generator::UsquareMember(0) | Generator::UsquareMembers(0, _)
                ) {
                    return Err(CliError::Config("usquare members start at m = 1".into()));
                }
                too_long(&format!("a^({m}^2)"), m.checked_mul(*m))
            }
            Generator::Upower64Member(k) => {
                if *k == 0 {
                    return Err(CliError::Config("upower64-member starts at k = 1".into()));
                }
                too_long(&format!("a^(64^{k})"), 64u64.checked_pow(*k))
            }
            Generator::Dima2Member(k) | Generator::Dima2Mutants(k) => dima(*k),
            Generator::Dima2Members(lo, hi) => dima(*lo).and(dima(*hi)),
            Generator::Lex(_, r) | Generator::LexUpto(_, r) => {
                // words of rank r have at most log2(r) symbols
                if *r > MAX_WORD_LEN {
                    return Err(CliError::Config(format!("lex rank {r} is too large")));
                }
                Ok(())
            }
        }
    }

    /// The words of the family, in generation order.
    pub fn words(&self) -> Vec<Vec<u8>> {
        let alphabet = |a: &str| Alphabet::new(a.as_bytes()).expect("checked when parsed");
        match self {
            Generator::Unary(ns) => ns.iter().map(|&n| unary_word(n)).collect(),
            Generator::UnaryRange(lo, hi) => (*lo..=*hi).map(unary_word).collect(),
            Generator::UnaryDoubling(lo, hi) => {
                std::iter::successors(Some(*lo), |n| n.checked_mul(2))
                    .take_while(|n| n <= hi)
                    .map(unary_word)
                    .collect()
            }
            Generator::NonSquares(lo, hi) => (*lo..=*hi)
                .filter(|&n| !is_positive_square(n))
                .map(unary_word)
                .collect(),
            Generator::UsquareMember(m) => vec![unary_word(m * m)],
            Generator::UsquareMembers(lo, hi) => (*lo..=*hi).map(|m| unary_word(m * m)).collect(),
            Generator::Upower64Member(k) => vec![unary_word(64u64.pow(*k))],
            Generator::Dima2Member(k) => vec![dima2_member(*k)],
            Generator::Dima2Members(lo, hi) => (*lo..=*hi).map(dima2_member).collect(),
            Generator::Dima2Mutants(k) => {
                let w = dima2_member(*k);
                (0..w.len())
                    .map(|i| {
                        let mut m = w.clone();
                        m[i] = if m[i] == b'0' { b'1' } else { b'0' };
                        m
                    })
                    .collect()
            }
            Generator::Lex(a, r) => vec![lex_unrank(&alphabet(a), *r)],
            Generator::LexUpto(a, r) => (1..=*r).map(|i| lex_unrank(&alphabet(a), i)).collect(),
        }
    }
}
