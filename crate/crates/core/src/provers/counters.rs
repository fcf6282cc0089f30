//! Counter-storing provers for the weak sweeping verifier.

use serde::{Deserialize, Serialize};

use crate::runtime::{CounterMessage, CounterProver};

/// Misbehaviour of a counter store, triggered at one report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fault", rename_all = "kebab-case")]
pub enum CounterFault {
    None,
    /// Shift one counter by `amount` at report `at_step`. A persistent
    /// drift changes the stored value; a transient one only that report.
    Drift {
        at_step: u64,
        counter: usize,
        amount: i64,
        persistent: bool,
    },
    /// Send a message outside the report grammar.
    Malformed {
        at_step: u64,
    },
    /// Never terminate the report.
    Endless {
        at_step: u64,
    },
}

/// Keeps the four counters as instructed, apart from its fault.
#[derive(Clone, Debug)]
pub struct CounterStore {
    id: String,
    values: [u64; 4],
    reports: u64,
    fault: CounterFault,
}

impl CounterStore {
    pub fn new(id: impl Into<String>, fault: CounterFault) -> Self {
        Self {
            id: id.into(),
            values: [0; 4],
            reports: 0,
            fault,
        }
    }

    pub fn honest() -> Self {
        Self::new("honest", CounterFault::None)
    }
}

impl CounterProver for CounterStore {
    fn id(&self) -> &str {
        &self.id
    }

    fn report(&mut self) -> CounterMessage {
        self.reports += 1;
        match self.fault {
            CounterFault::Drift {
                at_step,
                counter,
                amount,
                persistent,
            } if at_step == self.reports => {
                let shifted = self.values[counter].saturating_add_signed(amount);
                if persistent {
                    self.values[counter] = shifted;
                } else {
                    let mut s = self.values;
                    s[counter] = shifted;
                    return CounterMessage::Counts(s);
                }
            }
            CounterFault::Malformed { at_step } if at_step == self.reports => {
                return CounterMessage::Malformed
            }
            CounterFault::Endless { at_step } if at_step == self.reports => {
                return CounterMessage::Endless
            }
            _ => {}
        }
        CounterMessage::Counts(self.values)
    }

    fn update(&mut self, deltas: [i8; 4]) {
        for (c, d) in self.values.iter_mut().zip(deltas) {
            *c = c.saturating_add_signed(d as i64);
        }
    }

    fn restart(&mut self) {
        self.values = [0; 4];
        self.reports = 0;
    }

    fn is_unbounded(&self) -> bool {
        matches!(self.fault, CounterFault::Endless { .. })
    }
}
