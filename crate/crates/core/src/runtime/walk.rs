use rand::Rng;
use serde::{Deserialize, Serialize};

/// Barrier placement for the length-checking random walk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkMode {
    /// Barriers at cells 0 and n, so the walk ends right with probability
    /// exactly `1/n`; a final forced step lands on the right marker.
    #[default]
    Calibrated,
    /// Barriers at both end-markers (cells 0 and n+1); ends right with
    /// probability `1/(n+1)`.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkEnd {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkOutcome {
    pub end: WalkEnd,
    /// Unbiased ±1 steps until absorption (the forced step is not counted).
    pub steps: u64,
}

/// Absorbing barriers `(left, right)` for an input of length `n`.
pub fn barriers(n: u64, mode: WalkMode) -> (u64, u64) {
    match mode {
        WalkMode::Calibrated => (0, n),
        WalkMode::Literal => (0, n + 1),
    }
}

/// Unbiased walk from cell 1, driven by `next_bit`. `hook` sees the
/// position after every step.
pub(crate) fn walk_with(
    n: u64,
    mode: WalkMode,
    mut next_bit: impl FnMut() -> bool,
    mut hook: impl FnMut(u64),
) -> WalkOutcome {
    let (left, right) = barriers(n, mode);
    let mut pos = 1u64;
    let mut steps = 0u64;
    while pos != left && pos != right {
        pos = if next_bit() { pos + 1 } else { pos - 1 };
        steps += 1;
        hook(pos);
    }
    let end = if pos == left {
        WalkEnd::Left
    } else {
        WalkEnd::Right
    };
    WalkOutcome { end, steps }
}

/// Standalone length-checking walk on an input of length `n`.
pub fn random_walk<R: Rng + ?Sized>(
    n: u64,
    mode: WalkMode,
    rng: &mut R,
    hook: impl FnMut(u64),
) -> WalkOutcome {
    assert!(n >= 1, "the walk needs a nonempty input");
    walk_with(n, mode, || rng.gen::<bool>(), hook)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn right_rate(n: u64, mode: WalkMode, walks: u32, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut right = 0u32;
        let mut steps = 0u64;
        for _ in 0..walks {
            let w = random_walk(n, mode, &mut rng, |_| {});
            right += (w.end == WalkEnd::Right) as u32;
            steps += w.steps;
        }
        (right as f64 / walks as f64, steps as f64 / walks as f64)
    }

    #[test]
    fn two_cell_walk_is_fair() {
        let (rate, steps) = right_rate(2, WalkMode::Calibrated, 20_000, 1);
        assert!((rate - 0.5).abs() < 0.02);
        assert_eq!(steps, 1.0);
    }

    #[test]
    fn hit_probability_and_duration() {
        let (rate, _) = right_rate(4, WalkMode::Calibrated, 100_000, 2);
        let sigma = (0.25f64 * 0.75 / 1e5).sqrt();
        assert!((rate - 0.25).abs() < 2.576 * sigma, "{rate}");
        let (_, steps) = right_rate(10, WalkMode::Calibrated, 100_000, 3);
        assert!((steps - 9.0).abs() < 0.45, "{steps}");
        let (literal, _) = right_rate(4, WalkMode::Literal, 100_000, 4);
        let sigma = (0.2f64 * 0.8 / 1e5).sqrt();
        assert!((literal - 0.2).abs() < 3.0 * sigma, "{literal}");
    }

    #[test]
    fn hook_sees_every_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = 0;
        let w = random_walk(7, WalkMode::Calibrated, &mut rng, |p| {
            assert!(p <= 7);
            seen += 1;
        });
        assert_eq!(seen, w.steps);
    }
}
