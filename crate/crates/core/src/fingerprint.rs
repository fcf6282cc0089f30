//! Random primes, streaming residues and calibration of the fingerprint
//! width constant.

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive};
use rand::Rng;

use crate::{Error, Result};

/// Largest supported prime width. Miller–Rabin with the first 13 prime
/// bases is deterministic below 3.3·10²⁴ > 2⁸¹.
pub const MAX_BITWIDTH: u32 = 81;

/// Largest `m` accepted by [`calibrate_c`] without an explicit limit.
pub const DEFAULT_CALIBRATION_MAX_M: u32 = 24;

const MR_BASES: [u128; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// `a·b mod n` for `n < 2⁹⁶`, by Horner evaluation over 32-bit limbs of `b`.
pub fn mulmod(a: u128, b: u128, n: u128) -> u128 {
    debug_assert!(n > 0 && n < 1 << 96);
    let a = a % n;
    let b = b % n;
    if n <= u64::MAX as u128 {
        return a * b % n;
    }
    let mut r = 0u128;
    for shift in [64u32, 32, 0] {
        let limb = (b >> shift) & 0xffff_ffff;
        r = ((r << 32) % n + (a * limb) % n) % n;
    }
    r
}

pub fn powmod(mut base: u128, mut exp: u128, n: u128) -> u128 {
    let mut acc = 1 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, n);
        }
        base = mulmod(base, base, n);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality test for `n < 2⁸¹`.
pub fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_BASES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'bases: for &a in &MR_BASES {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// A uniformly random prime in `[2, 2^bitwidth]`, by rejection sampling.
pub fn sample_prime<R: Rng + ?Sized>(bitwidth: u32, rng: &mut R) -> Result<u128> {
    if !(2..=MAX_BITWIDTH).contains(&bitwidth) {
        return Err(Error::InvalidParameter(format!(
            "prime bitwidth must lie in 2..={MAX_BITWIDTH}, got {bitwidth}"
        )));
    }
    let hi = 1u128 << bitwidth;
    loop {
        let candidate = rng.gen_range(2..=hi);
        if is_prime(candidate) {
            return Ok(candidate);
        }
    }
}

/// Prime width `max(2, ⌈c·4·log₂ k⌉)`, computed exactly as the bit length
/// of `k^(4c) - 1`.
pub fn fingerprint_width(c: u32, k: u64) -> u32 {
    if k < 2 {
        return 2;
    }
    let x = BigUint::from(k).pow(4 * c) - BigUint::one();
    (x.bits() as u32).max(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModOp {
    Inc,
    Add(u128),
    Mul(u128),
}

/// A residue kept reduced modulo a prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModCounter {
    modulus: u128,
    value: u128,
}

impl ModCounter {
    pub fn new(modulus: u128) -> Self {
        assert!(modulus >= 2, "modulus must be at least 2");
        Self { modulus, value: 0 }
    }

    pub fn with_value(modulus: u128, value: u128) -> Self {
        let mut c = Self::new(modulus);
        c.value = value % modulus;
        c
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    pub fn value(&self) -> u128 {
        self.value
    }

    pub fn apply(&mut self, op: ModOp) {
        *self = mod_step(*self, op);
    }
}

pub fn mod_step(counter: ModCounter, op: ModOp) -> ModCounter {
    let n = counter.modulus;
    let value = match op {
        ModOp::Inc => (counter.value + 1) % n,
        ModOp::Add(v) => (counter.value + v % n) % n,
        ModOp::Mul(v) => mulmod(counter.value, v, n),
    };
    ModCounter { modulus: n, value }
}

/// Parameters of one fingerprinting run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FingerprintParams {
    pub c: u32,
    pub bitwidth: u32,
    pub p1: u128,
    pub p2: u128,
    pub r1: u128,
    pub r2: u128,
}

/// One row of the calibration table: `P3(cm, m) / P1(cm)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CalibrationRow {
    pub c: u32,
    /// `2^⌈log₂ cm⌉`.
    pub prime_bound: u64,
    pub primes_in_range: u64,
    pub worst_divisors: u64,
}

impl CalibrationRow {
    pub fn ratio(&self) -> Ratio<u64> {
        if self.primes_in_range == 0 {
            return Ratio::from_integer(1);
        }
        Ratio::new(self.worst_divisors, self.primes_in_range)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Calibration {
    pub m: u32,
    pub epsilon: Ratio<u64>,
    pub c: u32,
    pub ratio: Ratio<u64>,
}

const MAX_PRIME_BOUND: u64 = 1 << 28;

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Exhaustive table of prime-divisor counts. For every difference
/// `d ∈ [1, 2^m]` it tracks how many primes up to the current bound divide
/// `d`, growing the bound as `c` increases.
struct DivisorTable {
    m_limit: u64,
    counts: Vec<u8>,
    worst: u64,
    primes: u64,
    bound: u64,
}

impl DivisorTable {
    fn new(m: u32) -> Self {
        let m_limit = 1u64 << m;
        Self {
            m_limit,
            counts: vec![0; m_limit as usize + 1],
            worst: 0,
            primes: 0,
            bound: 1,
        }
    }

    fn extend_to(&mut self, bound: u64) {
        if bound <= self.bound {
            return;
        }
        let old = self.bound;
        let mut composite = vec![false; (bound + 1) as usize];
        for p in 2..=bound {
            if composite[p as usize] {
                continue;
            }
            let mut q = p * p;
            while q <= bound {
                composite[q as usize] = true;
                q += p;
            }
            if p > old {
                self.primes += 1;
                let mut d = p;
                while d <= self.m_limit {
                    let slot = &mut self.counts[d as usize];
                    *slot += 1;
                    self.worst = self.worst.max(*slot as u64);
                    d += p;
                }
            }
        }
        self.bound = bound;
    }

    fn row(&mut self, c: u32, m: u32) -> Result<CalibrationRow> {
        let bound = 1u64
            .checked_shl(ceil_log2(c as u64 * m as u64))
            .filter(|&b| b <= MAX_PRIME_BOUND)
            .ok_or_else(|| Error::Budget(format!("prime bound for c={c}, m={m} is too large")))?;
        self.extend_to(bound);
        Ok(CalibrationRow {
            c,
            prime_bound: bound,
            primes_in_range: self.primes,
            worst_divisors: self.worst,
        })
    }
}

fn check_m(m: u32, max_m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    if m > max_m {
        return Err(Error::Budget(format!(
            "exhaustive calibration over 2^{m} differences exceeds the limit 2^{max_m}"
        )));
    }
    Ok(())
}

/// Ratios `P3(cm, m)/P1(cm)` for `c = 1..=c_max`.
pub fn calibration_table(m: u32, c_max: u32) -> Result<Vec<CalibrationRow>> {
    check_m(m, DEFAULT_CALIBRATION_MAX_M)?;
    let mut table = DivisorTable::new(m);
    (1..=c_max).map(|c| table.row(c, m)).collect()
}

/// Smallest `c` with `P3(cm, m)/P1(cm) < ε`.
pub fn calibrate_c(m: u32, epsilon: Ratio<u64>) -> Result<Calibration> {
    calibrate_c_with_limit(m, epsilon, DEFAULT_CALIBRATION_MAX_M)
}

pub fn calibrate_c_with_limit(m: u32, epsilon: Ratio<u64>, max_m: u32) -> Result<Calibration> {
    check_m(m, max_m)?;
    if *epsilon.numer() == 0 || epsilon > Ratio::one() {
        return Err(Error::InvalidParameter("epsilon must lie in (0, 1]".into()));
    }
    let mut table = DivisorTable::new(m);
    let mut c = 1u32;
    loop {
        let row = table.row(c, m)?;
        if row.ratio() < epsilon {
            return Ok(Calibration {
                m,
                epsilon,
                c,
                ratio: row.ratio(),
            });
        }
        c = c
            .checked_add(1)
            .ok_or_else(|| Error::Budget("no c found".into()))?;
    }
}

/// Fraction of sampled primes `p` with `n1 ≡ n2 (mod p)`.
pub fn collision_rate<R: Rng + ?Sized>(
    n1: u64,
    n2: u64,
    bitwidth: u32,
    trials: u32,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let mut collisions = 0u32;
    for _ in 0..trials {
        let p = sample_prime(bitwidth, rng)?;
        collisions += (n1 as u128 % p == n2 as u128 % p) as u32;
    }
    Ok(collisions as f64 / trials as f64)
}

/// Residue of `base^exp` by repeated modular multiplication, as a verifier
/// with a single modular counter would compute it.
pub fn power_residue(base: u128, exp: u64, modulus: u128) -> u128 {
    let mut c = ModCounter::with_value(modulus, 1);
    for _ in 0..exp {
        c.apply(ModOp::Mul(base));
    }
    c.value()
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn sieve(n: u64) -> Vec<u64> {
        (2..=n)
            .filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0))
            .collect()
    }

    #[test]
    fn primality_matches_trial_division() {
        let primes = sieve(10_000);
        for n in 0..=10_000u128 {
            assert_eq!(is_prime(n), primes.contains(&(n as u64)), "{n}");
        }
        // Mersenne primes and a Carmichael number
        assert!(is_prime((1 << 61) - 1));
        assert!(is_prime((1u128 << 89) - 1));
        assert!(!is_prime(561));
        assert!(!is_prime(((1u128 << 61) - 1) * 3));
    }

    #[test]
    fn wide_mulmod() {
        let n = (1u128 << 89) - 1;
        let a = n - 2;
        let b = n - 3;
        // (-2)(-3) = 6
        assert_eq!(mulmod(a, b, n), 6);
    }

    #[test]
    fn small_widths_sample_expected_primes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            assert!([2, 3].contains(&sample_prime(2, &mut rng).unwrap()));
            assert!([2, 3, 5, 7].contains(&sample_prime(3, &mut rng).unwrap()));
        }
        assert!(sample_prime(1, &mut rng).is_err());
        assert!(sample_prime(82, &mut rng).is_err());
    }

    #[test]
    fn prime_sampling_is_uniform() {
        let primes = sieve(256);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut counts = vec![0u32; 257];
        for _ in 0..n {
            counts[sample_prime(8, &mut rng).unwrap() as usize] += 1;
        }
        let expected = n as f64 / primes.len() as f64;
        let stat: f64 = primes
            .iter()
            .map(|&p| (counts[p as usize] as f64 - expected).powi(2) / expected)
            .sum();
        let chi = ChiSquared::new((primes.len() - 1) as f64).unwrap();
        assert!(chi.sf(stat) > 0.01, "chi-square {stat}");
    }

    #[test]
    fn mod_step_examples() {
        assert_eq!(
            mod_step(ModCounter::with_value(7, 6), ModOp::Inc).value(),
            0
        );
        assert_eq!(
            mod_step(ModCounter::with_value(5, 3), ModOp::Mul(2)).value(),
            1
        );
        let mut c = ModCounter::new(7);
        for _ in 0..100 {
            c.apply(ModOp::Inc);
        }
        assert_eq!(c.value(), 2);
    }

    #[test]
    fn width_examples() {
        assert_eq!(fingerprint_width(12, 2), 48);
        assert_eq!(fingerprint_width(12, 3), 77);
        assert_eq!(fingerprint_width(1, 1), 2);
        assert_eq!(fingerprint_width(1, 2), 4);
    }

    #[test]
    fn calibration_values() {
        let r = |n, d| Ratio::new(n, d);
        let c8 = calibrate_c(8, r(1, 8)).unwrap();
        assert_eq!((c8.c, c8.ratio), (17, r(2, 27)));
        let c8_one = calibrate_c(8, r(1, 1)).unwrap();
        assert_eq!((c8_one.c, c8_one.ratio), (2, r(2, 3)));
        let c12 = calibrate_c(12, r(1, 8)).unwrap();
        assert_eq!((c12.c, c12.ratio), (11, r(5, 54)));
        assert_eq!(calibrate_c(12, r(1, 1)).unwrap().c, 1);
        assert_eq!(calibrate_c(2, r(1, 1)).unwrap().c, 2);
        assert_eq!(calibrate_c(2, r(1, 8)).unwrap().c, 9);
        assert_eq!(calibrate_c(3, r(1, 8)).unwrap().c, 11);
        assert_eq!(calibrate_c(22, r(1, 8)).unwrap().c, 12);
    }

    #[test]
    fn calibration_rejects_large_m() {
        assert!(matches!(
            calibrate_c(25, Ratio::new(1, 8)),
            Err(Error::Budget(_))
        ));
        assert!(calibrate_c(8, Ratio::new(0, 1)).is_err());
    }

    #[test]
    fn calibration_ratio_is_non_increasing() {
        for m in [8, 12] {
            let table = calibration_table(m, 64).unwrap();
            for w in table.windows(2) {
                assert!(w[1].ratio() <= w[0].ratio(), "m={m}: {w:?}");
            }
        }
    }

    #[test]
    fn collision_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(collision_rate(42, 42, 10, 100, &mut rng).unwrap(), 1.0);
        assert_eq!(collision_rate(0, 1, 20, 100, &mut rng).unwrap(), 0.0);
        let rate = collision_rate(5, 13, 2, 10_000, &mut rng).unwrap();
        assert!((rate - 0.5).abs() < 0.03, "{rate}");
    }

    proptest! {
        #[test]
        fn streaming_residue_equals_value(t in any::<u64>(), width in 2u32..=64, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sample_prime(width, &mut rng).unwrap();
            // fold bin(t) least-significant bit first
            let mut acc = ModCounter::new(p);
            let mut pow = ModCounter::with_value(p, 1);
            let mut rest = t;
            while rest > 0 {
                if rest & 1 == 1 {
                    acc.apply(ModOp::Add(pow.value()));
                }
                pow.apply(ModOp::Mul(2));
                rest >>= 1;
            }
            prop_assert_eq!(acc.value(), t as u128 % p);
        }

        #[test]
        fn equal_values_never_separate(v in any::<u64>(), width in 2u32..=81, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = sample_prime(width, &mut rng).unwrap();
            prop_assert_eq!(ModCounter::with_value(p, v as u128), ModCounter::with_value(p, v as u128));
        }

        #[test]
        fn mulmod_matches_bigint(a in any::<u128>(), b in any::<u128>(), n in 2u128..(1u128 << 95)) {
            let expect = (BigUint::from(a) * BigUint::from(b)) % BigUint::from(n);
            prop_assert_eq!(BigUint::from(mulmod(a, b, n)), expect);
        }
    }
}
