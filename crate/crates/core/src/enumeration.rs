//! Counting `k × n` matrices whose rows all weigh `γn` and whose columns lie
//! in (or span exactly) a given subspace, and estimating the probability of
//! that event under i.i.d. max-entropy columns.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::combinatorics::{log2_biguint, ExactRational, FactorialTable};
use crate::error::{Error, Result};
use crate::maxent::{chain_probs, entropy_exponent, ChainProbs, MaxEntParams};
use crate::params::{to_f64, CodeParams};
use crate::subspace::{mobius_coefficient, Subspace};

/// Largest ambient dimension [`count_t`] accepts.
pub const MAX_COUNT_K: usize = 6;
/// Default bound on the estimated number of DP steps.
pub const DEFAULT_WORK_BUDGET: u128 = 2_000_000_000;
/// Largest `k·n` for the exhaustive oracles.
pub const MAX_EXHAUSTIVE_BITS: usize = 24;
/// Samples per Monte Carlo batch. Each batch owns one random stream.
pub const BATCH_SIZE: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMethod {
    ExactDp,
    Exhaustive,
    ClosedForm,
    MobiusInversion,
}

/// An exact count and how it was obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountResult {
    pub value: BigUint,
    pub method: CountMethod,
}

impl CountResult {
    pub fn to_rational(&self) -> ExactRational {
        BigRational::from_integer(BigInt::from(self.value.clone()))
    }
}

/// `|T_V|`: matrices with every row of weight `γn` and every column in `V`.
pub fn count_t(v: &Subspace, p: &CodeParams) -> Result<CountResult> {
    count_t_with_budget(v, p, DEFAULT_WORK_BUDGET)
}

pub fn count_t_with_budget(v: &Subspace, p: &CodeParams, budget: u128) -> Result<CountResult> {
    let k = v.ambient_dim();
    if k > MAX_COUNT_K {
        return Err(Error::invalid(format!("exact counting supports k <= {MAX_COUNT_K}, got {k}")));
    }
    let n = usize::try_from(p.n()).map_err(|_| Error::invalid("n too large"))?;
    let w = p.weight() as usize;
    if v.dim() == 0 {
        let value = if w == 0 { BigUint::from(1u32) } else { BigUint::zero() };
        return Ok(CountResult { value, method: CountMethod::ClosedForm });
    }
    let radix = w + 1;
    let sum_states = radix.checked_pow(k as u32).ok_or_else(|| Error::invalid("state space overflow"))?;
    let states = sum_states as u128 * (n as u128 + 1);
    let types = 1u128 << v.dim();
    let estimated = states.saturating_mul(types).saturating_mul(n as u128 + 1);
    if estimated > budget {
        return Err(Error::BudgetExceeded { what: format!("count_T over {v:?} at n = {n}"), estimated, budget });
    }
    Ok(CountResult { value: composition_dp(v, n, w), method: CountMethod::ExactDp })
}

/// Sums `n! / Π c_u!` over column-type multiplicities `c_u` (`u ∈ V`) with
/// every row sum equal to `w`. Types are added one at a time; the state is
/// the vector of row sums and the number of columns placed so far.
fn composition_dp(v: &Subspace, n: usize, w: usize) -> BigUint {
    let k = v.ambient_dim();
    let radix = w + 1;
    let sum_states = radix.pow(k as u32);
    let place: Vec<usize> = (0..k).map(|i| radix.pow(i as u32)).collect();
    let table = FactorialTable::new(n);
    let idx = |t: usize, s: usize| t * sum_states + s;

    let mut cur = vec![BigUint::zero(); sum_states * (n + 1)];
    cur[0] = BigUint::from(1u32);
    let mut digits = vec![0usize; k];
    for u in v.elements().into_iter().filter(|&u| u != 0) {
        let rows: Vec<usize> = (0..k).filter(|&i| (u >> i) & 1 == 1).collect();
        let step: usize = rows.iter().map(|&i| place[i]).sum();
        let mut next = cur.clone();
        for t in 0..n {
            for s in 0..sum_states {
                let val = &cur[idx(t, s)];
                if val.is_zero() {
                    continue;
                }
                let mut rest = s;
                for d in digits.iter_mut() {
                    *d = rest % radix;
                    rest /= radix;
                }
                let room = rows.iter().map(|&i| w - digits[i]).min().unwrap();
                for c in 1..=room.min(n - t) {
                    let add = val * table.binomial(t + c, c);
                    next[idx(t + c, s + c * step)] += add;
                }
            }
        }
        cur = next;
    }
    let full: usize = place.iter().map(|&p| p * w).sum();
    // Remaining columns are zero vectors, placed anywhere.
    (0..=n).map(|t| &cur[idx(t, full)] * table.binomial(n, n - t)).sum()
}

fn exhaustive_guard(k: usize, n: usize) -> Result<()> {
    if k * n > MAX_EXHAUSTIVE_BITS {
        return Err(Error::BudgetExceeded {
            what: format!("exhaustive enumeration of {k} x {n} matrices"),
            estimated: 1u128 << (k * n).min(127),
            budget: 1u128 << MAX_EXHAUSTIVE_BITS,
        });
    }
    Ok(())
}

/// Visits every `k × n` matrix, passing the columns of those whose rows all
/// weigh `w`.
fn for_each_balanced_matrix(k: usize, n: usize, w: u32, mut f: impl FnMut(&[u64])) {
    let mask = (1u64 << n) - 1;
    let mut cols = vec![0u64; n];
    'outer: for m in 0u64..(1u64 << (k * n)) {
        for i in 0..k {
            if ((m >> (i * n)) & mask).count_ones() != w {
                continue 'outer;
            }
        }
        for (j, c) in cols.iter_mut().enumerate() {
            *c = (0..k).fold(0u64, |acc, i| acc | (((m >> (i * n + j)) & 1) << i));
        }
        f(&cols);
    }
}

/// `|T_V|` by visiting all `2^{kn}` matrices. Needs `kn ≤ 24`.
pub fn count_t_exhaustive(v: &Subspace, p: &CodeParams) -> Result<CountResult> {
    let (k, n) = (v.ambient_dim(), p.n() as usize);
    exhaustive_guard(k, n)?;
    let mut count = 0u64;
    for_each_balanced_matrix(k, n, p.weight() as u32, |cols| {
        if cols.iter().all(|&c| v.contains_bits(c)) {
            count += 1;
        }
    });
    Ok(CountResult { value: BigUint::from(count), method: CountMethod::Exhaustive })
}

/// `|T̄_U|`, the matrices whose columns span exactly `U`, by Möbius inversion
/// of `|T_V|` over the subspaces `V ≤ U`.
pub fn count_t_bar(u: &Subspace, p: &CodeParams) -> Result<CountResult> {
    let mut cache = HashMap::new();
    count_t_bar_cached(u, p, &mut cache)
}

pub(crate) fn count_t_bar_cached(
    u: &Subspace,
    p: &CodeParams,
    cache: &mut HashMap<Subspace, BigUint>,
) -> Result<CountResult> {
    let mut total = BigInt::zero();
    for v in u.sublattice()? {
        let t = match cache.get(&v) {
            Some(t) => t.clone(),
            None => {
                let t = count_t(&v, p)?.value;
                cache.insert(v.clone(), t.clone());
                t
            }
        };
        if !t.is_zero() {
            total += mobius_coefficient(u.dim() - v.dim()) * BigInt::from(t);
        }
    }
    assert!(!total.is_negative(), "Möbius sum for {u:?} is negative");
    Ok(CountResult { value: total.to_biguint().unwrap(), method: CountMethod::MobiusInversion })
}

/// `|T̄_U|` by visiting all `2^{kn}` matrices and comparing column spans.
pub fn count_t_bar_exhaustive(u: &Subspace, p: &CodeParams) -> Result<CountResult> {
    let (k, n) = (u.ambient_dim(), p.n() as usize);
    exhaustive_guard(k, n)?;
    let mut count = 0u64;
    for_each_balanced_matrix(k, n, p.weight() as u32, |cols| {
        if Subspace::span_words(k, cols) == *u {
            count += 1;
        }
    });
    Ok(CountResult { value: BigUint::from(count), method: CountMethod::Exhaustive })
}

/// Monte Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbEstimate {
    pub estimate: f64,
    /// Binomial standard error. With no hits this is `1/samples`.
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
}

impl ProbEstimate {
    fn from_hits(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        let stderr = if hits == 0 { 1.0 / samples as f64 } else { (p * (1.0 - p) / samples as f64).sqrt() };
        ProbEstimate { estimate: p, stderr, hits, samples }
    }
}

fn check_estimate_args(k: u32, n: u64, gamma: Rational64, samples: u64) -> Result<u64> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if samples == 0 {
        return Err(Error::invalid("samples must be positive"));
    }
    let w = gamma * Rational64::from_integer(n as i64);
    if !w.is_integer() || w.to_integer() % 2 != 0 {
        return Err(Error::invalid(format!("gamma * n = {w} must be an even integer")));
    }
    Ok(w.to_integer() as u64)
}

/// Runs `samples` trials split into fixed batches, batch `b` drawing from
/// stream `b` of a ChaCha generator seeded with `seed`. The result does not
/// depend on the number of worker threads.
fn run_batches<F>(samples: u64, seed: u64, trial: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let batches = samples.div_ceil(BATCH_SIZE);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let len = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            (0..len).filter(|_| trial(&mut rng)).count() as u64
        })
        .sum()
}

/// One draw of the row weights of a `k × n` matrix with i.i.d. columns from
/// `P_{k,γ}`, tracking only how many columns have odd prefix parity.
fn chain_trial(chain: &ChainProbs, n: u64, w: u64, rng: &mut ChaCha8Rng) -> bool {
    let k = chain.m;
    let mut odd = 0u64;
    for i in 0..k - 1 {
        let x = binomial(n - odd, chain.p01[i], rng);
        let y = binomial(odd, chain.p10[i], rng);
        if x + y != w {
            return false;
        }
        odd = odd + x - y;
    }
    // The last row flips exactly the odd columns back to even.
    odd == w
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
}

/// Monte Carlo estimate of `Pr(A ∈ T)` for a `k × n` matrix `A` with
/// i.i.d. `P_{k,γ}` columns, where `T` requires every row to weigh `γn`.
pub fn estimate_prob_t(k: u32, n: u64, gamma: Rational64, samples: u64, seed: u64) -> Result<ProbEstimate> {
    let w = check_estimate_args(k, n, gamma, samples)?;
    let chain = chain_probs(k, to_f64(gamma))?;
    let hits = run_batches(samples, seed, |rng| chain_trial(&chain, n, w, rng));
    Ok(ProbEstimate::from_hits(hits, samples))
}

/// As [`estimate_prob_t`], drawing every column explicitly. Slower; kept as
/// a cross-check of the count-based chain.
pub fn estimate_prob_t_full(k: u32, n: u64, gamma: Rational64, samples: u64, seed: u64) -> Result<ProbEstimate> {
    let w = check_estimate_args(k, n, gamma, samples)?;
    let sampler = MaxEntParams::fit(k, to_f64(gamma), 0.0)?.sampler()?;
    let hits = run_batches(samples, seed, |rng| {
        let mut weights = vec![0u64; k as usize];
        for _ in 0..n {
            let col = sampler.sample(rng);
            for (i, wt) in weights.iter_mut().enumerate() {
                *wt += u64::from(col.get(i));
            }
        }
        weights.iter().all(|&x| x == w)
    });
    Ok(ProbEstimate::from_hits(hits, samples))
}

/// Exact `Pr(A ∈ T) = |T_{E^k}| · α^{γkn} / Z^n`: every matrix in `T` has the
/// same probability under i.i.d. `P_{k,γ}` columns.
pub fn exact_prob_t(k: u32, p: &CodeParams) -> Result<f64> {
    let count = count_t(&Subspace::even(k as usize), p)?.value;
    if count.is_zero() {
        return Ok(0.0);
    }
    let params = MaxEntParams::fit(k, p.gamma_f64(), 0.0)?;
    let n = p.n() as f64;
    let log2_p = log2_biguint(&count) + p.weight() as f64 * f64::from(k) * params.alpha.log2() - n * params.log2_z;
    Ok(log2_p.exp2())
}

/// Center of the asymptotic estimate `log2 |T_{E^k}| ≈ n F(k,γ) - (k/2) log2 n`.
///
/// For `k = 2` both rows coincide, a single weight constraint remains and the
/// center is `n h(γ) - ½ log2 n`.
pub fn log2_t_asymptotic(k: u32, p: &CodeParams) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let n = p.n() as f64;
    if k == 2 {
        return Ok(n * p.entropy() - 0.5 * n.log2());
    }
    let f = entropy_exponent(f64::from(k), p.gamma_f64(), 0.0)?
        .finite()
        .ok_or_else(|| Error::invalid("F is -inf at these parameters"))?;
    Ok(n * f - f64::from(k) / 2.0 * n.log2())
}

/// `log2` of an exact count, `-∞` for zero.
pub fn log2_count(c: &CountResult) -> f64 {
    if c.value.is_zero() {
        f64::NEG_INFINITY
    } else {
        log2_biguint(&c.value)
    }
}

/// Ordinary least-squares slope of `log2 y` against `log2 x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

impl CountResult {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::INFINITY)
    }
}
