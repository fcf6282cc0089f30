use crate::langspace::{LEFT_END, RIGHT_END};

/// Read-only input tape `¢ w $` with a two-way head.
#[derive(Clone, Debug)]
pub struct InputTape {
    cells: Vec<u8>,
    head: usize,
    last_dir: i8,
    reversals: u64,
    sweeping_ok: bool,
    one_way_ok: bool,
}

impl InputTape {
    pub fn new(w: &[u8]) -> Self {
        let mut cells = Vec::with_capacity(w.len() + 2);
        cells.push(LEFT_END);
        cells.extend_from_slice(w);
        cells.push(RIGHT_END);
        Self {
            cells,
            head: 0,
            last_dir: 0,
            reversals: 0,
            sweeping_ok: true,
            one_way_ok: true,
        }
    }

    /// Input length `n`; cells are numbered `0..=n+1`.
    pub fn len(&self) -> usize {
        self.cells.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn symbol(&self) -> u8 {
        self.cells[self.head]
    }

    pub fn at_left_end(&self) -> bool {
        self.head == 0
    }

    pub fn at_right_end(&self) -> bool {
        self.head == self.cells.len() - 1
    }

    pub fn word(&self) -> &[u8] {
        &self.cells[1..self.cells.len() - 1]
    }

    /// Moves the head by `dir ∈ {-1, 0, 1}`, clamped to the markers.
    /// Returns false if the move would leave the tape.
    pub(crate) fn shift(&mut self, dir: i8) -> bool {
        if dir == 0 {
            return true;
        }
        let target = self.head as i64 + dir as i64;
        if target < 0 || target >= self.cells.len() as i64 {
            return false;
        }
        if self.last_dir != 0 && dir != self.last_dir {
            self.reversals += 1;
            if !(self.at_left_end() || self.at_right_end()) {
                self.sweeping_ok = false;
            }
        }
        if dir < 0 {
            self.one_way_ok = false;
        }
        self.last_dir = dir;
        self.head = target as usize;
        true
    }

    pub fn reversals(&self) -> u64 {
        self.reversals
    }

    /// True iff every direction change so far happened on an end-marker.
    pub fn sweeping_ok(&self) -> bool {
        self.sweeping_ok
    }

    /// True iff the head never moved left.
    pub fn one_way_ok(&self) -> bool {
        self.one_way_ok
    }
}

/// A contiguous block of work-tape cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub start: usize,
    pub len: usize,
}

/// Work tape usage, tracked as the set of cells ever visited.
#[derive(Clone, Debug, Default)]
pub struct WorkTape {
    visited: Vec<bool>,
    visited_count: u64,
}

impl WorkTape {
    pub fn alloc(&mut self, len: usize) -> Region {
        let start = self.visited.len();
        self.visited.resize(start + len, false);
        Region { start, len }
    }

    /// Marks cells `from..to` of `region` as visited.
    pub(crate) fn touch(&mut self, region: Region, from: usize, to: usize) {
        let to = to.min(region.len);
        for cell in &mut self.visited[region.start + from..region.start + to] {
            if !*cell {
                *cell = true;
                self.visited_count += 1;
            }
        }
    }

    pub fn visited(&self) -> u64 {
        self.visited_count
    }
}

/// A binary counter stored least-significant bit first in a work region.
#[derive(Clone, Copy, Debug)]
pub struct BinaryCounter {
    pub(crate) region: Region,
    pub(crate) value: u64,
}

impl BinaryCounter {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn width(&self) -> usize {
        self.region.len
    }

    /// Bit `i` (0-based from the least significant end).
    pub fn bit(&self, i: u32) -> bool {
        (self.value >> i) & 1 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeping_tracks_interior_reversals() {
        let mut t = InputTape::new(b"aaa");
        for _ in 0..4 {
            assert!(t.shift(1));
        }
        assert!(t.at_right_end());
        assert!(!t.shift(1));
        t.shift(-1);
        t.shift(-1);
        assert!(t.sweeping_ok());
        assert!(!t.one_way_ok());
        t.shift(1);
        assert!(!t.sweeping_ok());
        assert_eq!(t.reversals(), 2);
    }

    #[test]
    fn forward_only_stays_sweeping() {
        let mut t = InputTape::new(b"ab");
        while t.shift(1) {}
        assert!(t.sweeping_ok() && t.one_way_ok());
        assert_eq!(t.word(), b"ab");
    }

    #[test]
    fn work_tape_counts_distinct_cells() {
        let mut w = WorkTape::default();
        let a = w.alloc(4);
        let b = w.alloc(3);
        w.touch(a, 0, 2);
        w.touch(a, 1, 3);
        w.touch(b, 0, 10);
        assert_eq!(w.visited(), 6);
    }
}
