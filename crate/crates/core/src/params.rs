//! Problem instances and the small text formats used to describe them.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{CheckedAdd, ToPrimitive, Zero};

use crate::combinatorics::binary_entropy;
use crate::error::{Error, Result};

/// `λ` must stay this far below `h(γ)`.
pub const ENTROPY_MARGIN: f64 = 1e-12;

/// Longest grid [`parse_grid`] will expand.
pub const MAX_GRID_LEN: usize = 1_000_000;

/// An instance `(n, γ, λ)`: codes are kernels of random `λn × n` matrices and
/// the layer is the weight-`γn` vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeParams {
    n: u64,
    gamma: Rational64,
    lambda: Rational64,
}

impl CodeParams {
    /// Checks `0 < γ < ½` with `γn` even, `0 < λ < h(γ)` with `λn` an integer.
    pub fn new(n: u64, gamma: Rational64, lambda: Rational64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if !(gamma > Rational64::zero() && gamma < Rational64::new(1, 2)) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1/2), got {gamma}")));
        }
        if !(lambda > Rational64::zero() && lambda < Rational64::from_integer(1)) {
            return Err(Error::invalid(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        let gn =
            times_n(gamma, n).ok_or_else(|| Error::invalid(format!("gamma * n = {gamma} * {n} is not an integer")))?;
        if gn % 2 != 0 {
            return Err(Error::invalid(format!("gamma * n = {gn} must be even")));
        }
        times_n(lambda, n).ok_or_else(|| Error::invalid(format!("lambda * n = {lambda} * {n} is not an integer")))?;
        let h = binary_entropy(to_f64(gamma));
        if to_f64(lambda) >= h - ENTROPY_MARGIN {
            return Err(Error::invalid(format!("lambda = {lambda} must be below h(gamma) = {h:.12}")));
        }
        Ok(CodeParams { n, gamma, lambda })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn gamma(&self) -> Rational64 {
        self.gamma
    }

    pub fn lambda(&self) -> Rational64 {
        self.lambda
    }

    /// Row weight `w = γn`.
    pub fn weight(&self) -> u64 {
        times_n(self.gamma, self.n).unwrap()
    }

    /// Number of parity checks `λn`.
    pub fn checks(&self) -> u64 {
        times_n(self.lambda, self.n).unwrap()
    }

    pub fn gamma_f64(&self) -> f64 {
        to_f64(self.gamma)
    }

    pub fn lambda_f64(&self) -> f64 {
        to_f64(self.lambda)
    }

    /// `h(γ)` in bits.
    pub fn entropy(&self) -> f64 {
        binary_entropy(self.gamma_f64())
    }
}

impl fmt::Display for CodeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.n, self.gamma, self.lambda)
    }
}

/// `n,gamma,lambda`, for example `6,1/3,1/3`.
impl FromStr for CodeParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [n, gamma, lambda] = parts.as_slice() else {
            return Err(Error::parse(s, "expected n,gamma,lambda"));
        };
        let n = n.parse::<u64>().map_err(|e| Error::parse(s, format!("n: {e}")))?;
        CodeParams::new(n, parse_rational(gamma)?, parse_rational(lambda)?)
    }
}

fn times_n(q: Rational64, n: u64) -> Option<u64> {
    let n = i64::try_from(n).ok()?;
    let prod = q.numer().checked_mul(n)?;
    if prod % q.denom() != 0 {
        return None;
    }
    u64::try_from(prod / q.denom()).ok()
}

pub(crate) fn to_f64(q: Rational64) -> f64 {
    q.to_f64().unwrap()
}

/// Parses `a/b`, an integer, or a plain decimal such as `0.25`, exactly.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::parse(s, "empty"));
    }
    if let Some((a, b)) = t.split_once('/') {
        let a = parse_i64(s, a.trim())?;
        let b = parse_i64(s, b.trim())?;
        if b == 0 {
            return Err(Error::parse(s, "zero denominator"));
        }
        if a == i64::MIN || b == i64::MIN {
            return Err(Error::parse(s, "out of range"));
        }
        return Ok(Rational64::new(a, b));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let (negative, digits) = match int.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, int.strip_prefix('+').unwrap_or(int)),
        };
        let all_digits = |x: &str| x.chars().all(|c| c.is_ascii_digit());
        if !all_digits(frac) || !all_digits(digits) || (digits.is_empty() && frac.is_empty()) {
            return Err(Error::parse(s, "malformed decimal"));
        }
        let whole = if digits.is_empty() { 0 } else { parse_i64(s, digits)? };
        let mut num = whole;
        let mut den: i64 = 1;
        for c in frac.chars() {
            let d = i64::from(c.to_digit(10).unwrap());
            num =
                num.checked_mul(10).and_then(|x| x.checked_add(d)).ok_or_else(|| Error::parse(s, "too many digits"))?;
            den = den.checked_mul(10).ok_or_else(|| Error::parse(s, "too many digits"))?;
        }
        return Ok(Rational64::new(if negative { -num } else { num }, den));
    }
    Ok(Rational64::from_integer(parse_i64(s, t)?))
}

fn parse_i64(whole: &str, part: &str) -> Result<i64> {
    if part.is_empty() || !part.trim_start_matches(['-', '+']).chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::parse(whole, format!("{part:?} is not an integer")));
    }
    part.parse::<i64>().map_err(|e| Error::parse(whole, e.to_string()))
}

/// Parses an inclusive integer range `lo..hi` (or `lo..=hi`), or a single integer.
pub fn parse_range(s: &str) -> Result<(u32, u32)> {
    let t = s.trim();
    let (lo, hi) = match t.split_once("..") {
        Some((lo, hi)) => (lo, hi.strip_prefix('=').unwrap_or(hi)),
        None => (t, t),
    };
    let num = |x: &str| x.trim().parse::<u32>().map_err(|e| Error::parse(s, e.to_string()));
    let (lo, hi) = (num(lo)?, num(hi)?);
    if lo > hi {
        return Err(Error::parse(s, "empty range"));
    }
    Ok((lo, hi))
}

/// Parses a comma list `a,b,c` or an arithmetic grid `start:step:stop`
/// (stop included when hit exactly) of exact rationals.
pub fn parse_grid(s: &str) -> Result<Vec<Rational64>> {
    let t = s.trim();
    if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        let [start, step, stop] = parts.as_slice() else {
            return Err(Error::parse(s, "expected start:step:stop"));
        };
        let (start, step, stop) = (parse_rational(start)?, parse_rational(step)?, parse_rational(stop)?);
        if step <= Rational64::zero() {
            return Err(Error::parse(s, "step must be positive"));
        }
        let mut out = Vec::new();
        let mut x = start;
        while x <= stop {
            if out.len() >= MAX_GRID_LEN {
                return Err(Error::parse(s, format!("more than {MAX_GRID_LEN} points")));
            }
            out.push(x);
            x = x.checked_add(&step).ok_or_else(|| Error::parse(s, "overflow"))?;
        }
        return Ok(out);
    }
    let out = t.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?;
    if out.len() > MAX_GRID_LEN {
        return Err(Error::parse(s, format!("more than {MAX_GRID_LEN} points")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(a: i64, b: i64) -> Rational64 {
        Rational64::new(a, b)
    }

    #[test]
    fn valid_params() {
        let p = CodeParams::new(6, q(1, 3), q(1, 3)).unwrap();
        assert_eq!((p.weight(), p.checks()), (2, 2));
        assert_eq!("6, 1/3, 1/3".parse::<CodeParams>().unwrap(), p);
        assert_eq!(p.to_string(), "6,1/3,1/3");
        assert!(CodeParams::new(600, q(1, 5), q(7, 10)).is_ok());
    }

    #[test]
    fn invalid_params() {
        assert!(CodeParams::new(6, q(1, 6), q(1, 3)).is_err(), "odd weight");
        assert!(CodeParams::new(7, q(1, 3), q(1, 3)).is_err(), "non-integer weight");
        assert!(CodeParams::new(6, q(1, 3), q(1, 4)).is_err(), "non-integer checks");
        assert!(CodeParams::new(10, q(1, 5), q(4, 5)).is_err(), "lambda above entropy");
        assert!(CodeParams::new(4, q(1, 2), q(1, 4)).is_err());
        assert!(CodeParams::new(0, q(1, 3), q(1, 3)).is_err());
        assert!("6,1/3".parse::<CodeParams>().is_err());
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_rational(" 2/6 ").unwrap(), q(1, 3));
        assert_eq!(parse_rational("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        assert_eq!(parse_rational("-1.5").unwrap(), q(-3, 2));
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        for bad in ["", "1/0", "a/b", "1/", "0.1.2", "1e3", ".", "0.12345678901234567890123", "--1", "--1.5"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn ranges_and_grids() {
        assert_eq!(parse_range("2..40").unwrap(), (2, 40));
        assert_eq!(parse_range("2..=40").unwrap(), (2, 40));
        assert_eq!(parse_range("5").unwrap(), (5, 5));
        assert!(parse_range("9..3").is_err());
        assert_eq!(parse_grid("0.1:0.1:0.3").unwrap(), vec![q(1, 10), q(1, 5), q(3, 10)]);
        assert_eq!(parse_grid("1/5,1/4").unwrap(), vec![q(1, 5), q(1, 4)]);
        assert!(parse_grid("0:0:1").is_err());
        assert!(parse_grid("0:1/10000000:1").is_err());
    }

    proptest! {
        #[test]
        fn rational_display_round_trip(a in -10_000i64..10_000, b in 1i64..10_000) {
            let x = q(a, b);
            prop_assert_eq!(parse_rational(&x.to_string()).unwrap(), x);
        }

        #[test]
        fn parsers_never_panic(s in ".{0,40}") {
            let _ = parse_rational(&s);
            let _ = parse_range(&s);
            let _ = parse_grid(&s);
            let _ = s.parse::<CodeParams>();
        }
    }
}
