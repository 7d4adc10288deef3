//! Central moments of `X = |C ∩ L|`, the number of weight-`γn` codewords of
//! the kernel `C` of a uniformly random `λn × n` matrix.
//!
//! Exact values come from the sum over subspaces `U ≤ GF(2)^k` of
//! `|T̄_U| R_U`, cross-checked against brute force over all parity-check
//! matrices. Asymptotic predictions compare the dominant terms and locate the
//! thresholds `k₀` and `k₁`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combinatorics::{binary_entropy, binomial, log2_biguint, pairing_count, ExactRational};
use crate::enumeration::{count_t, count_t_bar_cached, BATCH_SIZE};
use crate::error::{Error, Result};
use crate::gf2::CoordSet;
use crate::maxent::entropy_exponent;
use crate::params::CodeParams;
use crate::subspace::{all_subspaces, Subspace};

/// Largest moment order for the exact subspace-sum oracle.
pub const MAX_EXACT_ORDER: u32 = 4;
/// Largest `λn · n` for brute force over all parity-check matrices.
pub const MAX_BRUTEFORCE_BITS: u64 = 20;
/// Default divisor `c` in the order guard `k log2 n ≤ n / c`.
pub const DEFAULT_RANGE_DIVISOR: f64 = 8.0;
/// Coefficients closer than this count as equal when ranking terms.
pub const LEADING_TOLERANCE: f64 = 1e-12;

fn cmp_tol(a: f64, b: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= LEADING_TOLERANCE * a.abs().max(b.abs()).max(1.0) {
        std::cmp::Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

fn rational(n: BigInt, d: BigInt) -> ExactRational {
    BigRational::new(n, d)
}

fn pow2(e: u64) -> BigInt {
    BigInt::one() << e
}

/// `R_U = Σ_{I ⊆ [k]} (-1)^{k-|I|} 2^{-λn (d_I(U) + k - |I|)}`.
///
/// The exponent is `d_I(U) + k - |I|`: `I` indexes the rows whose
/// indicators are multiplied, contributing `2^{-λn d_I}`, and each of the
/// other `k - |I|` rows contributes a factor `-2^{-λn}`.
pub fn r_u(u: &Subspace, p: &CodeParams) -> ExactRational {
    let k = u.ambient_dim() as u64;
    let c = p.checks();
    // Over the common denominator 2^{λn k}, the term for I is ±2^{λn (|I| - d_I)}.
    let mut num = BigInt::zero();
    for i in CoordSet::all_subsets(k as usize) {
        let size = i.len() as u64;
        let term = pow2(c * (size - u.projected_dim(i) as u64));
        if (k - size).is_multiple_of(2) {
            num += term;
        } else {
            num -= term;
        }
    }
    rational(num, pow2(c * k))
}

/// An exact central moment with its per-subspace contributions `|T̄_U| R_U`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentExact {
    pub k: u32,
    pub value: ExactRational,
    pub decomposition: BTreeMap<Subspace, ExactRational>,
}

/// `|T_V|` for every subspace of GF(2)^k, computed in parallel.
fn count_all(k: usize, p: &CodeParams) -> Result<HashMap<Subspace, BigUint>> {
    let subspaces = all_subspaces(k)?;
    let counts: Result<Vec<(Subspace, BigUint)>> =
        subspaces.into_par_iter().map(|v| count_t(&v, p).map(|c| (v, c.value))).collect();
    Ok(counts?.into_iter().collect())
}

/// `E((X - E X)^k) = Σ_U |T̄_U| R_U`, exactly, for `1 ≤ k ≤ 4`.
pub fn central_moment_exact(p: &CodeParams, k: u32) -> Result<MomentExact> {
    if !(1..=MAX_EXACT_ORDER).contains(&k) {
        return Err(Error::invalid(format!("exact moments need 1 <= k <= {MAX_EXACT_ORDER}, got {k}")));
    }
    let mut cache = count_all(k as usize, p)?;
    let mut decomposition = BTreeMap::new();
    let mut value = ExactRational::zero();
    for u in all_subspaces(k as usize)? {
        let r = r_u(&u, p);
        let contribution = if r.is_zero() {
            r
        } else {
            let t_bar = count_t_bar_cached(&u, p, &mut cache)?;
            t_bar.to_rational() * r
        };
        value += &contribution;
        decomposition.insert(u, contribution);
    }
    Ok(MomentExact { k, value, decomposition })
}

/// `Σ_{V robust} |T_V| 2^{-λn d(V)}`, the robust-only sum that brackets the
/// `k`-th central moment up to constants.
pub fn robust_subspace_sum(p: &CodeParams, k: u32) -> Result<ExactRational> {
    if !(1..=MAX_EXACT_ORDER).contains(&k) {
        return Err(Error::invalid(format!("need 1 <= k <= {MAX_EXACT_ORDER}, got {k}")));
    }
    let counts = count_all(k as usize, p)?;
    let c = p.checks();
    let mut sum = ExactRational::zero();
    for (v, t) in counts {
        if v.is_robust() && !t.is_zero() {
            sum += rational(BigInt::from(t), pow2(c * v.dim() as u64));
        }
    }
    Ok(sum)
}

/// `(E X, Var X) = (C(n,γn) 2^{-λn}, C(n,γn) 2^{-λn} (1 - 2^{-λn}))`.
pub fn mean_variance(p: &CodeParams) -> (ExactRational, ExactRational) {
    let c = p.checks();
    let mean = rational(BigInt::from(binomial(p.n(), p.weight())), pow2(c));
    let var = &mean * rational(pow2(c) - 1, pow2(c));
    (mean, var)
}

/// The exact law of `X`, from all `2^{λn·n}` parity-check matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct XDistribution {
    params: CodeParams,
    /// `histogram[x]` is the number of matrices with `X = x`.
    pub histogram: Vec<u64>,
    pub matrices: u64,
}

fn layer(n: u64, w: u64) -> Vec<u64> {
    (0u64..(1 << n)).filter(|x| u64::from(x.count_ones()) == w).collect()
}

fn codewords_in_layer(rows: &[u64], layer: &[u64]) -> usize {
    layer.iter().filter(|&&x| rows.iter().all(|&r| (r & x).count_ones() % 2 == 0)).count()
}

impl XDistribution {
    pub fn exhaustive(p: &CodeParams) -> Result<Self> {
        let (n, c) = (p.n(), p.checks());
        let bits = c * n;
        if bits > MAX_BRUTEFORCE_BITS {
            return Err(Error::BudgetExceeded {
                what: format!("brute force over all {c} x {n} parity-check matrices"),
                estimated: 1u128 << bits.min(127),
                budget: 1u128 << MAX_BRUTEFORCE_BITS,
            });
        }
        let layer = layer(n, p.weight());
        let mask = (1u64 << n) - 1;
        let total = 1u64 << bits;
        let chunk = 1u64 << 12;
        let histogram = (0..total.div_ceil(chunk))
            .into_par_iter()
            .map(|b| {
                let mut hist = vec![0u64; layer.len() + 1];
                let mut rows = vec![0u64; c as usize];
                for m in b * chunk..((b + 1) * chunk).min(total) {
                    for (i, r) in rows.iter_mut().enumerate() {
                        *r = (m >> (i as u64 * n)) & mask;
                    }
                    hist[codewords_in_layer(&rows, &layer)] += 1;
                }
                hist
            })
            .reduce(
                || vec![0u64; layer.len() + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        Ok(XDistribution { params: p.clone(), histogram, matrices: total })
    }

    /// Average of `X` over all matrices.
    pub fn mean(&self) -> ExactRational {
        let sum: BigInt = self.histogram.iter().enumerate().map(|(x, &cnt)| BigInt::from(x) * BigInt::from(cnt)).sum();
        rational(sum, BigInt::from(self.matrices))
    }

    /// Average of `(X - μ)^k` with `μ = C(n,γn) 2^{-λn}`.
    pub fn central_moment(&self, k: u32) -> ExactRational {
        let (mu, _) = mean_variance(&self.params);
        let mut acc = ExactRational::zero();
        for (x, &cnt) in self.histogram.iter().enumerate() {
            if cnt > 0 {
                let dev = ExactRational::from_integer(BigInt::from(x)) - &mu;
                acc += num_traits::pow(dev, k as usize) * ExactRational::from_integer(BigInt::from(cnt));
            }
        }
        acc / ExactRational::from_integer(BigInt::from(self.matrices))
    }
}

/// `E((X - E X)^k)` by brute force over all parity-check matrices.
pub fn central_moment_bruteforce(p: &CodeParams, k: u32) -> Result<ExactRational> {
    Ok(XDistribution::exhaustive(p)?.central_moment(k))
}

/// A Monte Carlo moment estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub estimate: f64,
    /// Jackknife standard error of the mean of `(X - μ)^k`.
    pub stderr: f64,
    pub samples: u64,
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments { n, mean: self.mean + delta * o.n / n, m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n }
    }
}

/// Samples random parity-check matrices and averages `(X - μ)^k` around the
/// exact mean.
pub fn monte_carlo_moment(p: &CodeParams, k: u32, samples: u64, seed: u64) -> Result<MomentEstimate> {
    let (n, c, w) = (p.n(), p.checks() as usize, p.weight());
    if n > 30 {
        return Err(Error::invalid(format!("Monte Carlo moments need n <= 30, got {n}")));
    }
    if binomial(n, w) > BigUint::from(1_000_000u32) {
        return Err(Error::BudgetExceeded {
            what: "layer size for Monte Carlo moments".into(),
            estimated: binomial(n, w).to_u128().unwrap_or(u128::MAX),
            budget: 1_000_000,
        });
    }
    if samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let layer = layer(n, w);
    let mu = crate::combinatorics::rational_to_f64(&mean_variance(p).0);
    let mask = (1u64 << n) - 1;
    let batches = samples.div_ceil(BATCH_SIZE);
    let parts: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let len = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            let mut rows = vec![0u64; c];
            let mut acc = Moments { n: 0.0, mean: 0.0, m2: 0.0 };
            for _ in 0..len {
                rows.iter_mut().for_each(|r| *r = rng.random::<u64>() & mask);
                let y = (codewords_in_layer(&rows, &layer) as f64 - mu).powi(k as i32);
                acc = acc.merge(Moments { n: 1.0, mean: y, m2: 0.0 });
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(Moments { n: 0.0, mean: 0.0, m2: 0.0 }, Moments::merge);
    let stderr = (total.m2 / (total.n * (total.n - 1.0))).sqrt();
    Ok(MomentEstimate { estimate: total.mean, stderr, samples })
}

fn check_gamma_lambda(gamma: f64, lambda: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1/2), got {gamma}")));
    }
    let h = binary_entropy(gamma);
    if !(lambda > 0.0 && lambda < h) {
        return Err(Error::invalid(format!("lambda must lie in (0, h(gamma) = {h:.12}), got {lambda}")));
    }
    Ok(h)
}

fn f0(m: u32, gamma: f64) -> Result<f64> {
    entropy_exponent(f64::from(m), gamma, 0.0)?.finite().ok_or_else(|| Error::invalid("F is -inf"))
}

/// Smallest `j ≥ 1` with `pred(j)`, for a predicate that stays true once true.
fn first_true(mut pred: impl FnMut(u64) -> Result<bool>) -> Result<u64> {
    let mut hi = 1u64;
    while !pred(hi)? {
        hi = hi.checked_mul(2).filter(|&h| h < 1 << 40).ok_or_else(|| Error::invalid("threshold search diverged"))?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `F(m,γ) - (m-1)λ > (m/2)(h(γ) - λ)`: the even-space term beats the pairing term.
fn even_beats_pairing(m: u32, gamma: f64, lambda: f64, h: f64) -> Result<bool> {
    let m_f = f64::from(m);
    Ok(cmp_tol(f0(m, gamma)? - (m_f - 1.0) * lambda, m_f / 2.0 * (h - lambda)).is_gt())
}

/// `k₀(γ,λ)`, the least `m ≥ 2` at which [`even_beats_pairing`] holds.
///
/// At `m = 2` both sides equal `h - λ`, so the search starts at 3. Convexity
/// of `F` in `m` makes the condition monotone, so a doubling search followed
/// by bisection finds the threshold.
pub fn k0(gamma: f64, lambda: f64) -> Result<u32> {
    let h = check_gamma_lambda(gamma, lambda)?;
    let j = first_true(|j| even_beats_pairing(2 + j as u32, gamma, lambda, h))?;
    Ok(2 + j as u32)
}

/// `F(k,γ) - (k-1)λ > (k-3)/2 (h - λ) - λ + max(h, F(3,γ) - λ)`, at leading order.
fn even_beats_mixed(k: u32, gamma: f64, lambda: f64, h: f64, f3: f64) -> Result<bool> {
    let k_f = f64::from(k);
    let mixed = (k_f - 3.0) / 2.0 * (h - lambda) - lambda + h.max(f3 - lambda);
    Ok(cmp_tol(f0(k, gamma)? - (k_f - 1.0) * lambda, mixed).is_gt())
}

/// `k₁(γ,λ)`, the least odd `k ≥ 3` at which the even-space term of the odd
/// moments beats the mixed term, comparing the coefficients of `n`.
///
/// At `k = 3` the even-space term is one of the two mixed expressions, so
/// it never wins there and the search starts at 5.
pub fn k1(gamma: f64, lambda: f64) -> Result<u32> {
    let h = check_gamma_lambda(gamma, lambda)?;
    let f3 = f0(3, gamma)?;
    let j = first_true(|j| even_beats_mixed(3 + 2 * j as u32, gamma, lambda, h, f3))?;
    Ok(3 + 2 * j as u32)
}

/// `k₀` over a grid; `None` marks cells with `λ ≥ h(γ)`.
pub fn k0_grid(gammas: &[f64], lambdas: &[f64]) -> Result<Vec<Vec<Option<u32>>>> {
    gammas
        .par_iter()
        .map(|&g| {
            if !(g > 0.0 && g < 0.5) {
                return Err(Error::invalid(format!("gamma must lie in (0, 1/2), got {g}")));
            }
            let h = binary_entropy(g);
            lambdas
                .iter()
                .map(|&l| {
                    if !(l > 0.0 && l < 1.0) {
                        return Err(Error::invalid(format!("lambda must lie in (0, 1), got {l}")));
                    }
                    if l >= h {
                        Ok(None)
                    } else {
                        k0(g, l).map(Some)
                    }
                })
                .collect()
        })
        .collect()
}

/// `log2` upper bound on `G_d`, the dimension-`d` part of the `k`-th moment.
///
/// `n d (h - λ) + k d` for `d < k/2`, otherwise
/// `n (F(2(d+1)-k) - (k-1)λ + (k-d-1)(h-λ)) + (k-d) k`.
pub fn g_d_upper(p: &CodeParams, k: u32, d: u32) -> Result<f64> {
    if k < 1 || d >= k {
        return Err(Error::invalid(format!("need 0 <= d < k, got d = {d}, k = {k}")));
    }
    let (n, h, lambda) = (p.n() as f64, p.entropy(), p.lambda_f64());
    let (k_f, d_f) = (f64::from(k), f64::from(d));
    if 2 * d < k {
        return Ok(n * d_f * (h - lambda) + k_f * d_f);
    }
    let f = f0(2 * (d + 1) - k, p.gamma_f64())?;
    Ok(n * (f - (k_f - 1.0) * lambda + (k_f - d_f - 1.0) * (h - lambda)) + (k_f - d_f) * k_f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Products of `k/2` pairings `v_i = v_j`.
    PairingDominant,
    /// The even-weight space `E^k`, dimension `k - 1`.
    EvenDominant,
    /// For odd `k`: pairings plus one triple, at dimension `(k±1)/2`.
    OddMixed,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::PairingDominant => "PairingDominant",
            Regime::EvenDominant => "EvenDominant",
            Regime::OddMixed => "OddMixed",
        })
    }
}

/// `log2` of a term as `linear · n + log_n · log2 n + constant`. Ordered
/// lexicographically, which is the order of growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadingExponent {
    pub linear: f64,
    pub log_n: f64,
    pub constant: f64,
}

impl LeadingExponent {
    fn cmp_growth(&self, other: &Self) -> std::cmp::Ordering {
        cmp_tol(self.linear, other.linear)
            .then(cmp_tol(self.log_n, other.log_n))
            .then(cmp_tol(self.constant, other.constant))
    }
}

/// One of the competing terms for the `k`-th moment.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub regime: Regime,
    pub d: u32,
    pub leading: LeadingExponent,
    /// `log2` of the term at this `n`. Odd-order terms are known only up to
    /// a constant factor, which is omitted.
    pub log2_value: f64,
}

/// The moment of `X / sqrt(Var X)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizedMoment {
    /// `o(1)`: odd `k < k₀`.
    Vanishing,
    /// `(1 + o(1)) (k-1)!!`: even `k < k₀`, as for a Gaussian.
    Gaussian { coefficient: BigUint },
    /// `log2` of `N^{F(k) - (k/2)h - (k/2-1)λ} n^{-k/4}`: `k ≥ k₀`.
    Growing { log2_value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentPrediction {
    pub k: u32,
    pub log2_value: f64,
    pub regime: Regime,
    pub dominant_d: u32,
    /// Every candidate term, dominant first.
    pub candidates: Vec<Candidate>,
    /// The top candidates agree at every order; all of them are reported.
    pub tie: bool,
    pub k0: u32,
    pub k1: u32,
    pub normalized: NormalizedMoment,
}

impl MomentPrediction {
    /// Regimes of every candidate tied with the dominant one.
    pub fn dominant_regimes(&self) -> Vec<Regime> {
        let top = self.candidates[0].leading;
        self.candidates.iter().filter(|c| c.leading.cmp_growth(&top).is_eq()).map(|c| c.regime).collect()
    }
}

/// Largest order accepted by [`predict_moment`]: `k log2 n ≤ n / divisor`.
pub fn max_order(n: u64, divisor: f64) -> u32 {
    let n_f = n as f64;
    (n_f / divisor / n_f.log2()).floor().max(0.0) as u32
}

pub fn predict_moment(p: &CodeParams, k: u32) -> Result<MomentPrediction> {
    predict_moment_with(p, k, DEFAULT_RANGE_DIVISOR)
}

/// The asymptotic `k`-th central moment: the larger of the competing terms,
/// with the `k₀`/`k₁` thresholds and the normalized moment.
pub fn predict_moment_with(p: &CodeParams, k: u32, range_divisor: f64) -> Result<MomentPrediction> {
    let limit = max_order(p.n(), range_divisor);
    if k < 2 || k > limit {
        return Err(Error::invalid(format!("order k = {k} outside 2..={limit} (k log2 n <= n / {range_divisor})")));
    }
    let (gamma, lambda, h) = (p.gamma_f64(), p.lambda_f64(), p.entropy());
    let (n, log2n) = (p.n() as f64, (p.n() as f64).log2());
    let k_f = f64::from(k);
    let k0 = k0(gamma, lambda)?;
    let k1 = k1(gamma, lambda)?;
    let value = |e: LeadingExponent| e.linear * n + e.log_n * log2n + e.constant;

    let mut candidates = Vec::new();
    let fk = f0(k, gamma)?;
    let even = LeadingExponent { linear: fk - (k_f - 1.0) * lambda, log_n: -k_f / 2.0, constant: 0.0 };
    // For k = 2 the even-weight space is the pairing itself.
    if k > 2 {
        candidates.push(Candidate { regime: Regime::EvenDominant, d: k - 1, leading: even, log2_value: value(even) });
    }
    if k.is_multiple_of(2) {
        let coefficient = log2_biguint(&pairing_count(u64::from(k)));
        let half = k_f / 2.0;
        let leading = LeadingExponent {
            linear: half * (h - lambda),
            log_n: -k_f / 4.0,
            constant: coefficient - half / 2.0 * (2.0 * std::f64::consts::PI * gamma * (1.0 - gamma)).log2(),
        };
        let log2_binom = log2_biguint(&binomial(p.n(), p.weight()));
        let log2_value = coefficient + half * (log2_binom - lambda * n);
        candidates.push(Candidate { regime: Regime::PairingDominant, d: k / 2, leading, log2_value });
    } else {
        let f3 = f0(3, gamma)?;
        let low =
            LeadingExponent { linear: (k_f - 1.0) / 2.0 * (h - lambda), log_n: -(k_f - 1.0) / 4.0, constant: 0.0 };
        let high = LeadingExponent {
            linear: (k_f - 3.0) / 2.0 * (h - lambda) + f3 - 2.0 * lambda,
            log_n: -(k_f + 1.0) / 4.0,
            constant: 0.0,
        };
        candidates.push(Candidate { regime: Regime::OddMixed, d: (k - 1) / 2, leading: low, log2_value: value(low) });
        candidates.push(Candidate {
            regime: Regime::OddMixed,
            d: k.div_ceil(2),
            leading: high,
            log2_value: value(high),
        });
    }
    // Stable sort keeps the listed order among exact ties.
    candidates.sort_by(|a, b| b.leading.cmp_growth(&a.leading));
    let tie = candidates.len() > 1 && candidates[1].leading.cmp_growth(&candidates[0].leading).is_eq();
    let top = candidates[0].clone();

    let normalized = if k >= k0 {
        let half = k_f / 2.0;
        NormalizedMoment::Growing { log2_value: n * (fk - half * h - (half - 1.0) * lambda) - k_f / 4.0 * log2n }
    } else if k.is_multiple_of(2) {
        NormalizedMoment::Gaussian { coefficient: pairing_count(u64::from(k)) }
    } else {
        NormalizedMoment::Vanishing
    };

    Ok(MomentPrediction {
        k,
        log2_value: top.log2_value,
        regime: top.regime,
        dominant_d: top.d,
        candidates,
        tie,
        k0,
        k1,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use num_traits::Signed;

    fn params(n: u64, g: (i64, i64), l: (i64, i64)) -> CodeParams {
        CodeParams::new(n, Rational64::new(g.0, g.1), Rational64::new(l.0, l.1)).unwrap()
    }

    fn q(a: i64, b: i64) -> ExactRational {
        rational(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn r_u_examples() {
        let p = params(6, (1, 3), (1, 3));
        assert_eq!(r_u(&Subspace::even(2), &p), q(3, 16));
        // d_I = 0 for every I: Σ_j C(k,j) (-1)^{k-j} 2^{-λn(k-j)} = (1 - 2^{-λn})^k.
        for k in 1..=4usize {
            let expected = num_traits::pow(q(3, 4), k);
            assert_eq!(r_u(&Subspace::zero(k), &p), expected, "k={k}");
        }
    }

    #[test]
    fn non_robust_subspaces_vanish() {
        for p in [params(6, (1, 3), (1, 3)), params(8, (1, 4), (1, 4)), params(10, (1, 5), (3, 10))] {
            for k in 1..=4 {
                for u in all_subspaces(k).unwrap() {
                    let r = r_u(&u, &p);
                    if !u.is_robust() {
                        assert!(r.is_zero(), "U={u:?}");
                    } else {
                        assert!(!r.is_zero(), "robust U={u:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn exact_matches_closed_forms() {
        let p = params(6, (1, 3), (1, 3));
        let (mean, var) = mean_variance(&p);
        assert_eq!((mean.clone(), var.clone()), (q(15, 4), q(45, 16)));
        assert_eq!(central_moment_exact(&p, 2).unwrap().value, var);
        assert!(central_moment_exact(&p, 1).unwrap().value.is_zero());
        let m2 = central_moment_exact(&p, 2).unwrap();
        assert_eq!(m2.decomposition[&Subspace::even(2)], q(45, 16));
        let sum: ExactRational = m2.decomposition.values().sum();
        assert_eq!(sum, m2.value);
    }

    #[test]
    fn exact_matches_bruteforce() {
        for p in [params(6, (1, 3), (1, 3)), params(8, (1, 4), (1, 4)), params(10, (1, 5), (1, 5))] {
            let dist = XDistribution::exhaustive(&p).unwrap();
            assert_eq!(dist.mean(), mean_variance(&p).0);
            for k in 1..=4 {
                let exact = central_moment_exact(&p, k).unwrap();
                assert_eq!(exact.value, dist.central_moment(k), "p={p} k={k}");
                for (u, c) in &exact.decomposition {
                    if !u.is_robust() {
                        assert!(c.is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn variance_properties() {
        for p in [params(6, (1, 3), (1, 3)), params(12, (1, 6), (1, 2)), params(30, (1, 5), (7, 10))] {
            let (mean, var) = mean_variance(&p);
            assert!(mean >= var);
            assert!(var.is_positive());
        }
        // Var/E = 1 - 2^{-λn} approaches 1.
        let p = params(30, (1, 5), (7, 10));
        let (mean, var) = mean_variance(&p);
        let ratio = var / mean;
        assert_eq!(ratio, q(1, 1) - rational(BigInt::one(), pow2(21)));
    }

    #[test]
    fn bruteforce_guard() {
        let p = params(12, (1, 6), (1, 2));
        assert!(matches!(central_moment_bruteforce(&p, 2), Err(Error::BudgetExceeded { .. })));
        assert!(central_moment_exact(&p, 5).is_err());
    }

    #[test]
    fn robust_sum_brackets_the_moment() {
        let p = params(8, (1, 4), (1, 4));
        for k in 2..=4 {
            let exact = central_moment_exact(&p, k).unwrap().value;
            let robust = robust_subspace_sum(&p, k).unwrap();
            assert!(robust.is_positive());
            let ratio = crate::combinatorics::rational_to_f64(&(exact / robust));
            assert!(ratio.is_finite());
        }
    }

    #[test]
    fn monte_carlo_moments() {
        let p = params(6, (1, 3), (1, 3));
        let est = monte_carlo_moment(&p, 2, 100_000, 5).unwrap();
        assert!((est.estimate - 45.0 / 16.0).abs() <= 4.0 * est.stderr, "{est:?}");
        let first = monte_carlo_moment(&p, 1, 100_000, 6).unwrap();
        assert!(first.estimate.abs() <= 4.0 * first.stderr, "{first:?}");
        assert_eq!(monte_carlo_moment(&p, 3, 50_000, 1).unwrap(), monte_carlo_moment(&p, 3, 50_000, 1).unwrap());
        let exact3 = crate::combinatorics::rational_to_f64(&central_moment_exact(&p, 3).unwrap().value);
        let est3 = monte_carlo_moment(&p, 3, 200_000, 2).unwrap();
        assert!((est3.estimate - exact3).abs() <= 4.0 * est3.stderr, "{est3:?} vs {exact3}");
    }

    #[test]
    fn k0_examples() {
        assert_eq!(k0(0.2, 0.3).unwrap(), 3);
        let h = binary_entropy(0.2);
        let f3 = f0(3, 0.2).unwrap();
        let threshold = 2.0 * (f3 - 1.5 * h);
        assert!((threshold - 0.5478).abs() < 1e-4);
        assert!(k0(0.2, 0.6).unwrap() > 3);
        assert!(k0(0.2, 0.75).is_err());
        assert!(k0(0.6, 0.1).is_err());
    }

    #[test]
    fn k0_is_the_first_crossing_and_monotone() {
        for gamma in [0.05, 0.1, 0.2, 0.3, 0.4, 0.45] {
            let h = binary_entropy(gamma);
            let mut prev = 0;
            for i in 1..40 {
                let lambda = h * f64::from(i) / 40.0;
                let k = k0(gamma, lambda).unwrap();
                assert!(k >= 3);
                assert!(even_beats_pairing(k, gamma, lambda, h).unwrap());
                assert!(!even_beats_pairing(k - 1, gamma, lambda, h).unwrap() || k == 3);
                for m in k..k + 5 {
                    assert!(even_beats_pairing(m, gamma, lambda, h).unwrap());
                }
                assert!(k >= prev, "γ={gamma} λ={lambda}");
                prev = k;
            }
        }
    }

    #[test]
    fn k1_properties() {
        for gamma in [0.1, 0.2, 0.3, 0.4] {
            let h = binary_entropy(gamma);
            let f3 = f0(3, gamma).unwrap();
            for i in 1..20 {
                let lambda = h * f64::from(i) / 20.0;
                let k = k1(gamma, lambda).unwrap();
                assert!(k >= 5 && k % 2 == 1);
                assert!(!even_beats_mixed(3, gamma, lambda, h, f3).unwrap());
                for j in (k..k + 20).step_by(2) {
                    assert!(even_beats_mixed(j, gamma, lambda, h, f3).unwrap(), "γ={gamma} λ={lambda} k={j}");
                }
                if k > 5 {
                    assert!(!even_beats_mixed(k - 2, gamma, lambda, h, f3).unwrap());
                }
            }
        }
        assert!(k1(0.2, 0.3).unwrap() >= 5);
    }

    #[test]
    fn k0_grid_masks() {
        let grid = k0_grid(&[0.1, 0.2], &[0.1, 0.3, 0.5, 0.9]).unwrap();
        assert_eq!(grid[1][1], Some(3));
        assert_eq!(grid[0][2], None, "h(0.1) < 0.5");
        assert_eq!(grid[1][3], None);
    }

    #[test]
    fn g_d_bounds() {
        let p = params(600, (1, 5), (3, 10));
        let (h, lambda) = (p.entropy(), p.lambda_f64());
        for k in 2..=8u32 {
            assert_eq!(g_d_upper(&p, k, 0).unwrap(), 0.0);
            let fk = f0(k, 0.2).unwrap();
            let top = g_d_upper(&p, k, k - 1).unwrap();
            assert!((top - (600.0 * (fk - f64::from(k - 1) * lambda) + f64::from(k))).abs() < 1e-9);
            // The large-d branch without its (k-d)k term is strictly convex in d.
            let core = |d: u32| g_d_upper(&p, k, d).unwrap() - f64::from((k - d) * k);
            let ds: Vec<u32> = (k.div_ceil(2)..k).collect();
            for w in ds.windows(3) {
                assert!(core(w[0]) + core(w[2]) > 2.0 * core(w[1]), "k={k} d={:?}", w);
            }
        }
        assert!((g_d_upper(&p, 5, 1).unwrap() - (600.0 * (h - lambda) + 5.0)).abs() < 1e-9);
        assert!(g_d_upper(&p, 3, 3).is_err());
    }

    #[test]
    fn prediction_even_regimes() {
        // λ close to h(γ) pushes k₀ beyond the accepted range.
        let p = params(600, (1, 5), (7, 10));
        let pred = predict_moment(&p, 4).unwrap();
        assert!(pred.k0 > 8);
        assert_eq!((pred.regime, pred.dominant_d), (Regime::PairingDominant, 2));
        let log2_binom = log2_biguint(&binomial(600, 120));
        let expected = 3f64.log2() + 2.0 * (log2_binom - 420.0);
        assert!((pred.log2_value - expected).abs() < 1e-9);
        assert_eq!(pred.normalized, NormalizedMoment::Gaussian { coefficient: BigUint::from(3u32) });
        assert_eq!(predict_moment(&p, 3).unwrap().normalized, NormalizedMoment::Vanishing);

        let p = params(600, (1, 5), (3, 10));
        let pred = predict_moment(&p, 4).unwrap();
        assert_eq!(pred.k0, 3);
        assert_eq!((pred.regime, pred.dominant_d), (Regime::EvenDominant, 3));
        let f4 = f0(4, 0.2).unwrap();
        assert!((pred.log2_value - (600.0 * (f4 - 3.0 * 0.3) - 2.0 * 600f64.log2())).abs() < 1e-9);
        assert!(matches!(pred.normalized, NormalizedMoment::Growing { .. }));
        assert!(!pred.tie);
    }

    #[test]
    fn regime_switches_exactly_at_k0() {
        for &(g, l) in &[((1, 5), (3, 10)), ((1, 5), (1, 2)), ((1, 5), (13, 20)), ((1, 10), (1, 4)), ((1, 4), (3, 5))] {
            let p = params(4000, g, l);
            let k0 = k0(p.gamma_f64(), p.lambda_f64()).unwrap();
            for k in (2..=max_order(4000, DEFAULT_RANGE_DIVISOR)).step_by(2) {
                let pred = predict_moment(&p, k).unwrap();
                assert_eq!(pred.regime == Regime::EvenDominant, k >= k0, "p={p} k={k} k0={k0}");
            }
        }
    }

    #[test]
    fn odd_regime_follows_k1() {
        let p = params(4000, (1, 5), (1, 10));
        let k1 = k1(0.2, 0.1).unwrap();
        for k in (3..=max_order(4000, DEFAULT_RANGE_DIVISOR)).step_by(2) {
            let pred = predict_moment(&p, k).unwrap();
            assert_eq!(pred.regime == Regime::EvenDominant, k >= k1, "k={k} k1={k1}");
            if pred.regime == Regime::OddMixed {
                assert!(pred.dominant_d == (k - 1) / 2 || pred.dominant_d == k.div_ceil(2));
            }
        }
    }

    #[test]
    fn normalized_gap_shrinks() {
        // For even k < k₀ the leading form of the moment over Var^{k/2} (k-1)!! tends to 1.
        let gap = |n: u64| {
            let p = CodeParams::new(n, Rational64::new(1, 5), Rational64::new(7, 10)).unwrap();
            let pred = predict_moment(&p, 4).unwrap();
            let e = pred.candidates[0].leading;
            assert_eq!(pred.regime, Regime::PairingDominant);
            let leading = e.linear * n as f64 + e.log_n * (n as f64).log2() + e.constant;
            let var = crate::combinatorics::log2_rational(&mean_variance(&p).1);
            (leading - 2.0 * var - 3f64.log2()).abs()
        };
        let (a, b, c) = (gap(600), gap(1200), gap(2400));
        assert!(b < a && c < b, "{a} {b} {c}");
    }

    #[test]
    fn order_guard() {
        let p = params(600, (1, 5), (7, 10));
        assert_eq!(max_order(600, 8.0), 8);
        assert!(predict_moment(&p, 9).is_err());
        assert!(predict_moment(&p, 1).is_err());
        assert!(predict_moment_with(&p, 9, 4.0).is_ok());
    }

    #[test]
    fn tie_reporting() {
        let e = LeadingExponent { linear: 1.0, log_n: -1.0, constant: 0.0 };
        assert!(e.cmp_growth(&e).is_eq());
        let p = params(600, (1, 5), (3, 10));
        let pred = predict_moment(&p, 4).unwrap();
        assert_eq!(pred.dominant_regimes(), vec![Regime::EvenDominant]);
    }
}
