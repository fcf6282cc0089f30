//! One-way verifier with two tape-storing provers. The input is copied
//! onto the signed tape in one pass; afterwards every step of the
//! digit-extraction program is a full verified rewrite pass over the tape,
//! so the verifier itself keeps only a constant amount of state.
//!
//! Tape layout: `[input cells][rank units][columns]`. Rank units hold
//! `lex(w)` in unary (flags `f1`, `f2`, `mark`, `ymark`); each column holds
//! one bit of the toss counter and of the head counter, plus the `x`
//! (bit `3l + 3`) and `top` (bit `6l + 1`) markers.

use crate::coins::{BiasedCoin, ProbBitStream};
use crate::langspace::{membership_bit, LanguageSpec, RIGHT_END};
use crate::runtime::{Decision, Run, Verifier};
use crate::{Error, Result};

use super::decide;
use super::signed_tape::{with_head, PassTransducer, SignedTape};

/// Codes per region: blank, input cells, rank units, columns.
fn layout(k: u64) -> (u64, u64) {
    let unit_base = 1 + 2 * k;
    let column_base = unit_base + 16;
    (unit_base, column_base)
}

/// Size of the doubled work alphabet over an input alphabet of size `k`.
pub fn work_alphabet_size(k: usize) -> u64 {
    let (_, column_base) = layout(k as u64);
    2 * (column_base + 32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Input {
        idx: u64,
        consumed: bool,
    },
    Unit {
        f1: bool,
        f2: bool,
        mark: bool,
        ymark: bool,
    },
    Column {
        t: bool,
        h: bool,
        y: bool,
        x: bool,
        top: bool,
    },
}

struct Codec {
    k: u64,
    unit_base: u64,
    column_base: u64,
}

impl Codec {
    fn new(k: u64) -> Self {
        let (unit_base, column_base) = layout(k);
        Self {
            k,
            unit_base,
            column_base,
        }
    }

    fn decode(&self, m: u64) -> Option<Cell> {
        let code = m >> 1;
        if code == 0 {
            None
        } else if code < self.unit_base {
            let c = code - 1;
            Some(Cell::Input {
                idx: c / 2,
                consumed: c % 2 == 1,
            })
        } else if code < self.column_base {
            let c = code - self.unit_base;
            Some(Cell::Unit {
                f1: c & 1 != 0,
                f2: c & 2 != 0,
                mark: c & 4 != 0,
                ymark: c & 8 != 0,
            })
        } else if code < self.column_base + 32 {
            let c = code - self.column_base;
            Some(Cell::Column {
                t: c & 1 != 0,
                h: c & 2 != 0,
                y: c & 4 != 0,
                x: c & 8 != 0,
                top: c & 16 != 0,
            })
        } else {
            None
        }
    }

    fn encode(&self, cell: Cell, head: bool) -> u64 {
        let code = match cell {
            Cell::Input { idx, consumed } => {
                debug_assert!(idx < self.k);
                1 + 2 * idx + consumed as u64
            }
            Cell::Unit {
                f1,
                f2,
                mark,
                ymark,
            } => self.unit_base + f1 as u64 + 2 * f2 as u64 + 4 * mark as u64 + 8 * ymark as u64,
            Cell::Column { t, h, y, x, top } => {
                self.column_base
                    + t as u64
                    + 2 * h as u64
                    + 4 * y as u64
                    + 8 * x as u64
                    + 16 * top as u64
            }
        };
        with_head(code, head)
    }
}

const EMPTY_UNIT: Cell = Cell::Unit {
    f1: false,
    f2: false,
    mark: false,
    ymark: false,
};

const EMPTY_COLUMN: Cell = Cell::Column {
    t: false,
    h: false,
    y: false,
    x: false,
    top: false,
};

/// The verifier's finite control between passes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    /// Consume the first input symbol into `lex(σ)` units.
    LexFirst,
    /// Mark one unit of the current value; `discount` marks the unit that
    /// the `k·(C - 1)` update drops, after checking input remains.
    LexMark {
        discount: bool,
    },
    /// Add `k` units to the second value.
    LexAdd,
    /// Consume the next symbol: second value plus `lex(σ)` becomes current.
    LexConsume,
    /// Append six columns per rank unit, then the top column.
    ColGrow,
    /// Give three columns per rank unit a `y` mark, then place `x`.
    XMark,
    /// Clear both counters before a repetition.
    Clear,
    Toss,
}

/// One pass of the tape program. Flags collected during the pass decide
/// the next mode.
struct Pass<'a> {
    codec: &'a Codec,
    mode: Mode,
    k: u64,
    // scan state
    region: u8,
    corrupt: bool,
    found_input: bool,
    lex: u64,
    found_unit: bool,
    to_flag: u64,
    skip_before_x: u8,
    carry_t: bool,
    carry_h: bool,
    x_bit: bool,
    done: bool,
    appended: u64,
    pending_appends: u64,
    append_kind: Cell,
}

impl<'a> Pass<'a> {
    fn new(codec: &'a Codec, mode: Mode, k: u64, head_toss: bool) -> Self {
        Self {
            codec,
            mode,
            k,
            region: 0,
            corrupt: false,
            found_input: false,
            lex: 0,
            found_unit: false,
            to_flag: 0,
            skip_before_x: 2,
            carry_t: true,
            carry_h: head_toss,
            x_bit: false,
            done: false,
            appended: 0,
            pending_appends: 0,
            append_kind: EMPTY_UNIT,
        }
    }

    fn enter_region(&mut self, region: u8) {
        if region < self.region {
            self.corrupt = true;
        }
        if region > self.region {
            // the unit region is entered: set up per-mode counters
            if self.region == 0 && region >= 1 {
                self.on_units_start();
            }
            self.region = region;
        }
    }

    fn on_units_start(&mut self) {
        match self.mode {
            Mode::LexAdd => self.to_flag = self.k,
            Mode::LexConsume | Mode::LexFirst => self.to_flag = self.lex,
            _ => {}
        }
    }

    fn input(&mut self, idx: u64, consumed: bool) -> Cell {
        let consumes = matches!(self.mode, Mode::LexFirst | Mode::LexConsume);
        if !consumed && !self.found_input {
            self.found_input = true;
            if consumes {
                self.lex = idx + 2;
                return Cell::Input {
                    idx,
                    consumed: true,
                };
            }
        }
        Cell::Input { idx, consumed }
    }

    fn unit(&mut self, mut f1: bool, mut f2: bool, mut mark: bool, mut ymark: bool) -> Cell {
        match self.mode {
            Mode::LexMark { discount } => {
                let proceed = !discount || self.found_input;
                if proceed && f1 && !mark && !self.found_unit {
                    self.found_unit = true;
                    mark = true;
                }
            }
            Mode::LexAdd => {
                if !f2 && self.to_flag > 0 {
                    f2 = true;
                    self.to_flag -= 1;
                }
            }
            Mode::LexConsume => {
                let new_f1 = if f2 {
                    true
                } else if self.to_flag > 0 {
                    self.to_flag -= 1;
                    true
                } else {
                    false
                };
                f1 = new_f1;
                f2 = false;
                mark = false;
            }
            Mode::ColGrow => {
                if f1 && !mark && !self.found_unit {
                    self.found_unit = true;
                    mark = true;
                }
            }
            Mode::XMark if f1 && !ymark && !self.found_unit => {
                self.found_unit = true;
                ymark = true;
                self.to_flag = 3;
            }
            _ => {}
        }
        Cell::Unit {
            f1,
            f2,
            mark,
            ymark,
        }
    }

    fn column(&mut self, mut t: bool, mut h: bool, mut y: bool, mut x: bool, top: bool) -> Cell {
        match self.mode {
            Mode::XMark => {
                if self.found_unit {
                    if !y && self.to_flag > 0 {
                        y = true;
                        self.to_flag -= 1;
                    }
                } else if !y {
                    if self.skip_before_x == 0 {
                        x = true;
                        self.skip_before_x = u8::MAX;
                    } else if self.skip_before_x != u8::MAX {
                        self.skip_before_x -= 1;
                    }
                }
            }
            Mode::Clear => {
                t = false;
                h = false;
            }
            Mode::Toss => {
                let (nt, nh) = (t ^ self.carry_t, h ^ self.carry_h);
                self.carry_t &= t;
                self.carry_h &= h;
                t = nt;
                h = nh;
                if x {
                    self.x_bit = h;
                }
                if top && t {
                    self.done = true;
                }
            }
            _ => {}
        }
        Cell::Column { t, h, y, x, top }
    }

    /// Appends requested once the existing tape has been scanned.
    fn plan_appends(&mut self) {
        match self.mode {
            Mode::LexFirst | Mode::LexConsume => {
                if self.region == 0 {
                    self.on_units_start();
                }
                self.pending_appends = self.to_flag;
                self.to_flag = 0;
                self.append_kind = Cell::Unit {
                    f1: true,
                    f2: false,
                    mark: false,
                    ymark: false,
                };
            }
            Mode::LexAdd => {
                self.pending_appends = self.to_flag;
                self.to_flag = 0;
                self.append_kind = Cell::Unit {
                    f1: false,
                    f2: true,
                    mark: false,
                    ymark: false,
                };
            }
            Mode::ColGrow => {
                if self.found_unit {
                    self.pending_appends = 6;
                    self.append_kind = EMPTY_COLUMN;
                } else {
                    self.pending_appends = 1;
                    self.append_kind = Cell::Column {
                        t: false,
                        h: false,
                        y: false,
                        x: false,
                        top: true,
                    };
                }
            }
            _ => {}
        }
    }
}

impl PassTransducer for Pass<'_> {
    fn cell(&mut self, index: usize, m: u64) -> u64 {
        let head = index == 1;
        let Some(cell) = self.codec.decode(m) else {
            self.corrupt = true;
            return m;
        };
        let out = match cell {
            Cell::Input { idx, consumed } => {
                self.enter_region(0);
                if idx >= self.k {
                    self.corrupt = true;
                }
                self.input(idx.min(self.k - 1), consumed)
            }
            Cell::Unit {
                f1,
                f2,
                mark,
                ymark,
            } => {
                self.enter_region(1);
                self.unit(f1, f2, mark, ymark)
            }
            Cell::Column { t, h, y, x, top } => {
                self.enter_region(2);
                self.column(t, h, y, x, top)
            }
        };
        self.codec.encode(out, head)
    }

    fn append(&mut self) -> Option<u64> {
        if self.appended == 0 && self.pending_appends == 0 {
            self.plan_appends();
            if self.pending_appends == 0 {
                self.appended = 1;
                return None;
            }
        }
        if self.pending_appends == 0 {
            return None;
        }
        self.pending_appends -= 1;
        self.appended += 1;
        let head = false;
        Some(self.codec.encode(self.append_kind, head))
    }
}

/// Verifies `w ∈ L` with two provers storing the work tape.
pub fn verify_two_prover(
    v: &mut Verifier,
    spec: &LanguageSpec,
    q: u64,
    r: u32,
) -> Result<Run<Decision>> {
    let alphabet = spec.alphabet();
    let k = alphabet.size() as u64;
    let size = work_alphabet_size(alphabet.size());
    if size >= q {
        return Err(Error::InvalidParameter(format!(
            "q = {q} must exceed the doubled work alphabet size {size}"
        )));
    }
    let codec = Codec::new(k);
    // the input pass: one triple per symbol
    let mut contents = Vec::with_capacity(v.n());
    let word: Vec<u8> = v.input().word().to_vec();
    Ok((|| {
        loop {
            v.move_right()?;
            if v.symbol() == RIGHT_END {
                break;
            }
            let idx = alphabet
                .index_of(v.symbol())
                .expect("input checked against the alphabet") as u64;
            contents.push(codec.encode(
                Cell::Input {
                    idx,
                    consumed: false,
                },
                contents.is_empty(),
            ));
        }
        debug_assert_eq!(contents.len(), word.len());
        if contents.is_empty() {
            return Ok(decide(membership_bit(spec, 1)));
        }
        let mut tape = match SignedTape::store(v, q, &contents).expect("validated") {
            Ok(t) => t,
            Err(h) => return Err(h),
        };
        let mut coin = BiasedCoin::new(ProbBitStream::new(spec.clone()));
        let mut mode = Mode::LexFirst;
        let mut accepts = 0u32;
        let mut repetitions = 0u32;
        loop {
            let head_toss = if mode == Mode::Toss {
                v.toss(&mut coin)?.is_head()
            } else {
                false
            };
            let mut pass = Pass::new(&codec, mode, k, head_toss);
            if tape.update(v, &mut pass)?.is_err() || pass.corrupt {
                return Ok(Decision::Reject);
            }
            mode = match mode {
                Mode::LexFirst => Mode::LexMark { discount: true },
                Mode::LexMark { discount: true } => {
                    if pass.found_input {
                        Mode::LexMark { discount: false }
                    } else {
                        Mode::ColGrow
                    }
                }
                Mode::LexMark { discount: false } => {
                    if pass.found_unit {
                        Mode::LexAdd
                    } else {
                        Mode::LexConsume
                    }
                }
                Mode::LexAdd => Mode::LexMark { discount: false },
                Mode::LexConsume => Mode::LexMark { discount: true },
                Mode::ColGrow => {
                    if pass.found_unit {
                        Mode::ColGrow
                    } else {
                        Mode::XMark
                    }
                }
                Mode::XMark => {
                    if pass.found_unit {
                        Mode::XMark
                    } else {
                        Mode::Toss
                    }
                }
                Mode::Clear => Mode::Toss,
                Mode::Toss => {
                    if !pass.done {
                        Mode::Toss
                    } else {
                        accepts += pass.x_bit as u32;
                        repetitions += 1;
                        if repetitions == r {
                            return Ok(decide(2 * accepts > r));
                        }
                        Mode::Clear
                    }
                }
            };
        }
    })())
}
