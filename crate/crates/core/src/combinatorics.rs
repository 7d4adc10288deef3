//! Exact integer combinatorics and a few real-valued helpers shared by the
//! oracles and the asymptotic formulas.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Arbitrary-precision rational used by every exact oracle.
pub type ExactRational = BigRational;

/// `n!` for `0..=max`, built once and indexed.
#[derive(Debug, Clone)]
pub struct FactorialTable {
    table: Vec<BigUint>,
}

impl FactorialTable {
    pub fn new(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        table.push(BigUint::one());
        for i in 1..=max {
            let next = &table[i - 1] * BigUint::from(i);
            table.push(next);
        }
        Self { table }
    }

    pub fn max(&self) -> usize {
        self.table.len() - 1
    }

    pub fn factorial(&self, n: usize) -> &BigUint {
        &self.table[n]
    }

    pub fn binomial(&self, n: usize, r: usize) -> BigUint {
        if r > n {
            return BigUint::zero();
        }
        &self.table[n] / (&self.table[r] * &self.table[n - r])
    }
}

/// Binomial coefficient, exact.
pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of perfect matchings of a `k`-set: `(k-1)(k-3)...1` for even `k`,
/// zero for odd `k`.
pub fn pairing_count(k: u64) -> BigUint {
    if k % 2 == 1 {
        return BigUint::zero();
    }
    (1..k).step_by(2).fold(BigUint::one(), |acc, f| acc * f)
}

/// Gaussian binomial `[k choose d]_2`, the number of `d`-dimensional
/// subspaces of GF(2)^k.
pub fn gaussian_binomial2(k: u32, d: u32) -> BigUint {
    if d > k {
        return BigUint::zero();
    }
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..d {
        num *= (BigUint::one() << (k - i)) - 1u32;
        den *= (BigUint::one() << (i + 1)) - 1u32;
    }
    num / den
}

/// `2^(-e)` as an exact rational.
pub fn inv_pow2(e: u64) -> ExactRational {
    BigRational::new(BigInt::one(), BigInt::one() << e)
}

/// `log2` of a positive big integer, accurate to a few ulps.
pub fn log2_biguint(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "log2 of zero");
    let bits = x.bits();
    if bits <= 64 {
        return x.to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap();
    top.log2() + shift as f64
}

/// `log2 |x|` of a nonzero rational.
pub fn log2_rational(x: &ExactRational) -> f64 {
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();
    log2_biguint(num) - log2_biguint(den)
}

/// Lossy conversion at the reporting boundary.
pub fn rational_to_f64(x: &ExactRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let sign = if x.numer().sign() == num_bigint::Sign::Minus { -1.0 } else { 1.0 };
    sign * log2_rational(x).exp2()
}

/// Binary entropy `h(t) = -t log2 t - (1-t) log2 (1-t)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(t: f64) -> f64 {
    assert!((0.0..=1.0).contains(&t), "binary entropy argument {t} outside [0, 1]");
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(t) + term(1.0 - t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 2), BigUint::from(15u32));
        assert_eq!(binomial(6, 7), BigUint::zero());
        let t = FactorialTable::new(30);
        for n in 0..=30 {
            for r in 0..=n {
                assert_eq!(t.binomial(n, r), binomial(n as u64, r as u64));
            }
        }
    }

    #[test]
    fn gaussian_binomials_match_small_counts() {
        assert_eq!(gaussian_binomial2(2, 1), BigUint::from(3u32));
        assert_eq!(gaussian_binomial2(3, 2), BigUint::from(7u32));
        assert_eq!(gaussian_binomial2(4, 2), BigUint::from(35u32));
        assert_eq!(gaussian_binomial2(5, 0), BigUint::one());
    }

    #[test]
    fn pairings() {
        assert_eq!(pairing_count(2), BigUint::from(1u32));
        assert_eq!(pairing_count(4), BigUint::from(3u32));
        assert_eq!(pairing_count(6), BigUint::from(15u32));
        assert_eq!(pairing_count(5), BigUint::zero());
    }

    #[test]
    fn logs_of_big_numbers() {
        let x = BigUint::one() << 200u32;
        assert!((log2_biguint(&x) - 200.0).abs() < 1e-12);
        let c = binomial(1000, 500);
        let expected: f64 = (1..=500).map(|i| ((500 + i) as f64).log2() - (i as f64).log2()).sum();
        assert!((log2_biguint(&c) - expected).abs() < 1e-9);
        let q = BigRational::new(BigInt::from(-45), BigInt::from(16));
        assert!((rational_to_f64(&q) + 2.8125).abs() < 1e-14);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.2) - 0.721_928_094_887_362_3).abs() < 1e-15);
    }
}
