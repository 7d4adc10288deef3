//! The maximum-entropy distribution `P_{m,γ,δ}` on `{0,1}^m`, its fitted
//! parameters and the entropy exponent `F(m,γ,δ)`.
//!
//! `P(u)` is proportional to `α^|u|` times `β` on odd-weight vectors. For
//! `δ = 0` the support is the even-weight vectors, for `δ = 1` the odd ones.
//!
//! Powers `(1±x)^m` are never formed directly. Everything goes through
//! `r = (1-x)/(1+x)` with `ln|r|` taken by `ln_1p`, so `m` in the thousands is
//! fine.

use std::f64::consts::LN_2;

use rand::Rng;

use crate::combinatorics::binary_entropy;
use crate::error::{Error, Result};
use crate::gf2::{BitVector, MAX_BITS};
use crate::solve::{bisect_increasing, golden_section_min};

/// Residual tolerance of the `α` fit.
pub const FIT_TOLERANCE: f64 = 1e-12;
/// Distance to `γ_min` or `γ_max` below which the limit branch is taken.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;
/// Agreement required between the closed form and the minimization of `g`.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// A log-scale exponent which may be `-∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    MinusInfinity,
}

impl Exponent {
    pub fn is_finite(self) -> bool {
        matches!(self, Exponent::Finite(_))
    }

    /// The value, or `None` for `-∞`.
    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(v) => Some(v),
            Exponent::MinusInfinity => None,
        }
    }

    /// As an `f64`, mapping the tag to `f64::NEG_INFINITY`. For output only.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn approx_eq(self, other: Exponent, tol: f64) -> bool {
        match (self, other) {
            (Exponent::MinusInfinity, Exponent::MinusInfinity) => true,
            (Exponent::Finite(a), Exponent::Finite(b)) => (a - b).abs() <= tol,
            _ => false,
        }
    }

    pub fn plus(self, c: f64) -> Exponent {
        match self {
            Exponent::Finite(v) => Exponent::Finite(v + c),
            Exponent::MinusInfinity => Exponent::MinusInfinity,
        }
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Exponent::MinusInfinity, Exponent::MinusInfinity) => Some(Equal),
            (Exponent::MinusInfinity, Exponent::Finite(_)) => Some(Less),
            (Exponent::Finite(_), Exponent::MinusInfinity) => Some(Greater),
            (Exponent::Finite(a), Exponent::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::MinusInfinity => f.write_str("-inf"),
        }
    }
}

/// The odd-weight multiplier of `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    /// `δ = 1`: only odd weights carry mass.
    Infinite,
}

impl Beta {
    pub fn to_f64(self) -> f64 {
        match self {
            Beta::Finite(b) => b,
            Beta::Infinite => f64::INFINITY,
        }
    }
}

/// `(1-x)/(1+x)` in sign/log-magnitude form.
#[derive(Debug, Clone, Copy)]
struct Ratio {
    ln_abs: f64,
    negative: bool,
}

impl Ratio {
    fn new(x: f64) -> Self {
        debug_assert!(x > 0.0);
        if x < 1.0 {
            Ratio { ln_abs: (-2.0 * x / (1.0 + x)).ln_1p(), negative: false }
        } else if x > 1.0 {
            Ratio { ln_abs: (-2.0 / (1.0 + x)).ln_1p(), negative: true }
        } else {
            Ratio { ln_abs: f64::NEG_INFINITY, negative: false }
        }
    }

    /// Whether `r^e` is negative. Only meaningful for integer `e` when `r < 0`.
    fn pow_negative(self, e: f64) -> bool {
        self.negative && (e.rem_euclid(2.0) == 1.0)
    }

    /// `|r|^e`, with `0^0 = 1`.
    fn abs_pow(self, e: f64) -> f64 {
        if e == 0.0 {
            1.0
        } else {
            (e * self.ln_abs).exp()
        }
    }

    /// `1 - |r|^e`, accurate when `|r|^e` is close to one.
    fn one_minus_abs_pow(self, e: f64) -> f64 {
        if e == 0.0 {
            0.0
        } else {
            -(e * self.ln_abs).exp_m1()
        }
    }

    /// `1 + r^e`.
    fn one_plus_pow(self, e: f64) -> f64 {
        if self.pow_negative(e) {
            self.one_minus_abs_pow(e)
        } else {
            1.0 + self.abs_pow(e)
        }
    }

    /// `1 - r^e`.
    fn one_minus_pow(self, e: f64) -> f64 {
        if self.pow_negative(e) {
            1.0 + self.abs_pow(e)
        } else {
            self.one_minus_abs_pow(e)
        }
    }

    /// `log2(1 + r^e)`, keeping precision when `|r|^e` is tiny.
    fn log2_one_plus_pow(self, e: f64) -> f64 {
        if self.pow_negative(e) {
            self.one_minus_abs_pow(e).log2()
        } else {
            self.abs_pow(e).ln_1p() / LN_2
        }
    }

    /// `log2(1 - r^e)`.
    fn log2_one_minus_pow(self, e: f64) -> f64 {
        if self.pow_negative(e) {
            self.abs_pow(e).ln_1p() / LN_2
        } else {
            self.one_minus_abs_pow(e).log2()
        }
    }
}

fn is_integer(m: f64) -> bool {
    m.fract() == 0.0
}

fn check_m(m: f64) -> Result<()> {
    if !(m.is_finite() && m >= 1.0) {
        return Err(Error::invalid(format!("m must be a real number >= 1, got {m}")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta must lie in [0, 1], got {delta}")));
    }
    Ok(())
}

fn check_gamma_open_unit(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

/// `γ(m,x,δ)` for any `x > 0`. For `x > 1` the exponent must be an integer.
fn gamma_of_x(m: f64, x: f64, delta: f64) -> f64 {
    let r = Ratio::new(x);
    let mut s = 0.0;
    if delta < 1.0 {
        s += (1.0 - delta) * r.one_minus_pow(m - 1.0) / r.one_plus_pow(m);
    }
    if delta > 0.0 {
        s += delta * r.one_plus_pow(m - 1.0) / r.one_minus_pow(m);
    }
    x / (1.0 + x) * s
}

/// `γ_min(m,δ) = δ/m`, the least attainable coordinate mean.
pub fn gamma_min(m: f64, delta: f64) -> f64 {
    delta / m
}

/// The greatest attainable coordinate mean for integer `m`: `1 - δ'/m` with
/// `δ' = δ` for even `m` and `1 - δ` for odd `m`.
pub fn gamma_max(m: u32, delta: f64) -> f64 {
    let mf = f64::from(m);
    if m.is_multiple_of(2) {
        1.0 - delta / mf
    } else {
        1.0 - (1.0 - delta) / mf
    }
}

/// `δ'` in the `γ_max` limit: the share of weight-`m` mass.
fn delta_at_top(m: u32, delta: f64) -> f64 {
    if m.is_multiple_of(2) {
        delta
    } else {
        1.0 - delta
    }
}

/// `γ(m,α,δ)`, the coordinate mean of `P_{m,γ,δ}` as a function of `α`.
pub fn gamma_of_alpha(m: u32, alpha: f64, delta: f64) -> Result<f64> {
    check_m(f64::from(m))?;
    check_delta(delta)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(gamma_of_x(f64::from(m), alpha, delta))
}

/// As [`gamma_of_alpha`], for real `m` and `α ∈ (0,1)`, or integer `m` and any `α > 0`.
pub fn gamma_of_alpha_extended(m: f64, alpha: f64, delta: f64) -> Result<f64> {
    check_m(m)?;
    check_delta(delta)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if alpha > 1.0 && !is_integer(m) {
        return Err(Error::invalid("alpha > 1 requires an integer m"));
    }
    Ok(gamma_of_x(m, alpha, delta))
}

/// Inverse of `γ(m,·,δ)` on `(0,1)`, by bisection.
pub fn alpha_of_gamma(m: u32, gamma: f64, delta: f64) -> Result<f64> {
    check_m(f64::from(m))?;
    check_delta(delta)?;
    let gmin = gamma_min(f64::from(m), delta);
    if !(gamma > gmin && gamma < 0.5) {
        return Err(Error::invalid(format!("gamma must lie in ({gmin}, 1/2), got {gamma}")));
    }
    fit_alpha(f64::from(m), gamma, delta)
}

/// Fit `α` for `γ` strictly inside the feasible range, on either side of ½.
fn fit_alpha(m: f64, gamma: f64, delta: f64) -> Result<f64> {
    if gamma == 0.5 {
        return Ok(1.0);
    }
    let alpha = if gamma < 0.5 {
        bisect_increasing(|a| gamma_of_x(m, a, delta), gamma, 0.0, 1.0)
    } else {
        // Substitute α = 1/s so the search interval stays bounded.
        let s = bisect_increasing(|s| -gamma_of_x(m, 1.0 / s, delta), -gamma, 0.0, 1.0);
        1.0 / s
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("gamma = {gamma} is too close to the edge of the feasible range")));
    }
    let residual = (gamma_of_x(m, alpha, delta) - gamma).abs();
    if residual > FIT_TOLERANCE {
        return Err(Error::invalid(format!(
            "alpha fit for m = {m}, gamma = {gamma}, delta = {delta} left residual {residual:e}"
        )));
    }
    Ok(alpha)
}

/// `β = δ/(1-δ) · ((1+α)^m + (1-α)^m)/((1+α)^m - (1-α)^m)` at the fitted `α`.
pub fn beta_of(m: u32, gamma: f64, delta: f64) -> Result<Beta> {
    check_delta(delta)?;
    if delta == 0.0 {
        return Ok(Beta::Finite(0.0));
    }
    if delta == 1.0 {
        return Ok(Beta::Infinite);
    }
    let alpha = alpha_of_gamma_any(m, gamma, delta)?;
    Ok(Beta::Finite(beta_at(f64::from(m), alpha, delta)))
}

fn alpha_of_gamma_any(m: u32, gamma: f64, delta: f64) -> Result<f64> {
    check_m(f64::from(m))?;
    check_gamma_open_unit(gamma)?;
    let mf = f64::from(m);
    let lo = gamma_min(mf, delta);
    let hi = gamma_max(m, delta);
    if !(gamma > lo && gamma < hi) {
        return Err(Error::invalid(format!("gamma must lie in ({lo}, {hi}), got {gamma}")));
    }
    fit_alpha(mf, gamma, delta)
}

fn beta_at(m: f64, alpha: f64, delta: f64) -> f64 {
    let r = Ratio::new(alpha);
    delta / (1.0 - delta) * r.one_plus_pow(m) / r.one_minus_pow(m)
}

/// `g(m,γ,x,δ) = (1-δ)log((1+x)^m+(1-x)^m) + δ log((1+x)^m-(1-x)^m) - γ m log x - 1`,
/// in bits. For `x > 1`, `m` must be an integer.
pub fn g(m: f64, gamma: f64, x: f64, delta: f64) -> Result<f64> {
    check_m(m)?;
    check_delta(delta)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(format!("x must be positive, got {x}")));
    }
    if x > 1.0 && !is_integer(m) {
        return Err(Error::invalid("x > 1 requires an integer m"));
    }
    Ok(g_unchecked(m, gamma, x, delta))
}

fn g_unchecked(m: f64, gamma: f64, x: f64, delta: f64) -> f64 {
    let r = Ratio::new(x);
    let mut v = m * x.ln_1p() / LN_2 - gamma * m * x.log2() - 1.0;
    if delta < 1.0 {
        v += (1.0 - delta) * r.log2_one_plus_pow(m);
    }
    if delta > 0.0 {
        v += delta * r.log2_one_minus_pow(m);
    }
    v
}

/// Where `γ` sits relative to the feasible range.
enum Region {
    Interior,
    /// At a boundary, where `F` equals this limit.
    Boundary(f64),
    Infeasible,
}

fn region(m: f64, gamma: f64, delta: f64) -> Region {
    let lo = gamma_min(m, delta);
    if gamma < lo - BOUNDARY_TOLERANCE {
        return Region::Infeasible;
    }
    if gamma <= lo + BOUNDARY_TOLERANCE {
        return Region::Boundary(delta * m.log2());
    }
    if gamma > 0.5 {
        let mi = m as u32;
        let hi = gamma_max(mi, delta);
        if gamma > hi + BOUNDARY_TOLERANCE {
            return Region::Infeasible;
        }
        if gamma >= hi - BOUNDARY_TOLERANCE {
            return Region::Boundary(delta_at_top(mi, delta) * m.log2());
        }
    }
    Region::Interior
}

fn check_f_args(m: f64, gamma: f64, delta: f64) -> Result<()> {
    check_m(m)?;
    check_delta(delta)?;
    check_gamma_open_unit(gamma)?;
    if gamma > 0.5 && !is_integer(m) {
        return Err(Error::invalid("gamma > 1/2 requires an integer m"));
    }
    Ok(())
}

/// The entropy exponent `F(m,γ,δ) = h(P_{m,γ,δ}) - h(δ)` in bits.
///
/// Real `m ≥ 1` is accepted for `γ ≤ ½`; for `δ > 0` that reading of the
/// formulas is an extension past integer `m`. `γ > ½` needs integer `m`.
/// Outside `[γ_min, γ_max]` the value is [`Exponent::MinusInfinity`].
pub fn entropy_exponent(m: f64, gamma: f64, delta: f64) -> Result<Exponent> {
    check_f_args(m, gamma, delta)?;
    if m == 1.0 {
        return Ok(if (gamma - delta).abs() <= BOUNDARY_TOLERANCE {
            Exponent::Finite(0.0)
        } else {
            Exponent::MinusInfinity
        });
    }
    match region(m, gamma, delta) {
        Region::Infeasible => Ok(Exponent::MinusInfinity),
        Region::Boundary(v) => Ok(Exponent::Finite(v)),
        Region::Interior => {
            let alpha = fit_alpha(m, gamma, delta)?;
            Ok(Exponent::Finite(closed_form(m, gamma, delta, alpha).f))
        }
    }
}

/// `F` by direct minimization of `g` over `x`, the audit route.
pub fn entropy_exponent_by_minimization(m: f64, gamma: f64, delta: f64) -> Result<Exponent> {
    check_f_args(m, gamma, delta)?;
    if m == 1.0 {
        return entropy_exponent(m, gamma, delta);
    }
    if let Region::Infeasible = region(m, gamma, delta) {
        return Ok(Exponent::MinusInfinity);
    }
    // g is convex in t = ln x; the minimizer is below 1 exactly when γ < ½.
    const T: f64 = 40.0;
    let (a, b) = if gamma < 0.5 {
        (-T, 0.0)
    } else if gamma > 0.5 {
        (0.0, T)
    } else if is_integer(m) {
        (-T, T)
    } else {
        (-T, 0.0)
    };
    let (_, v) = golden_section_min(|t| g_unchecked(m, gamma, t.exp(), delta), a, b, 400);
    Ok(Exponent::Finite(v))
}

/// `F(m,γ,0) - (m h(γ) - 1)` for `γ ∈ (0,½)` and real `m ≥ 2`.
///
/// The difference shrinks like `(1-2γ)^m` and drowns in the rounding error of
/// `F` itself for moderate `m`. Here it is computed around `α* = γ/(1-γ)`:
/// the fitted `α = α* + d` is solved for `d` directly, and every term is
/// formed without cancellation.
pub fn entropy_excess(m: f64, gamma: f64) -> Result<f64> {
    check_m(m)?;
    if m < 2.0 {
        return Err(Error::invalid(format!("entropy excess needs m >= 2, got {m}")));
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1/2), got {gamma}")));
    }
    let a_star = gamma / (1.0 - gamma);
    let c = 1.0 - gamma;
    // With x = α* + d: x/(1+x) = γ + d(1-γ)/(1+x) and γ(m,x,0) = x/(1+x)·Q,
    // Q = (1 - r^{m-1})/(1 + r^m), so γ(x) - γ = d(1-γ)Q/(1+x) - γ(1-Q).
    let residual = |d: f64| {
        let x = a_star + d;
        let r = Ratio::new(x);
        let denom = r.one_plus_pow(m);
        let q = r.one_minus_pow(m - 1.0) / denom;
        let one_minus_q = (r.abs_pow(m - 1.0) + r.abs_pow(m)) / denom;
        d * c * q / (1.0 + x) - gamma * one_minus_q
    };
    let d = bisect_increasing(residual, 0.0, -a_star, 1.0 - a_star);
    let x = a_star + d;
    let delta_phi = ((d * c).ln_1p() - gamma * (d * c / gamma).ln_1p()) / LN_2;
    Ok(m * delta_phi + Ratio::new(x).log2_one_plus_pow(m))
}

/// Checks `F(m,γ,δ) = F(m,1-γ,δ)` for even `m` and `F(m,1-γ,1-δ)` for odd `m`.
pub fn negation_identity_holds(m: u32, gamma: f64, delta: f64) -> Result<bool> {
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (1/2, 1), got {gamma}")));
    }
    let mf = f64::from(m);
    let lhs = entropy_exponent(mf, gamma, delta)?;
    let mirror_delta = if m.is_multiple_of(2) { delta } else { 1.0 - delta };
    let rhs = entropy_exponent(mf, 1.0 - gamma, mirror_delta)?;
    Ok(lhs.approx_eq(rhs, AUDIT_TOLERANCE))
}

struct ClosedForm {
    beta: Beta,
    log2_z: f64,
    f: f64,
}

/// `Z`, `β` and `F = log Z - δ log β - γ m log α - h(δ)` at a fitted interior `α`.
fn closed_form(m: f64, gamma: f64, delta: f64, alpha: f64) -> ClosedForm {
    let r = Ratio::new(alpha);
    // log2 of (1+α)^m / 2, shared by every branch.
    let base = m * alpha.ln_1p() / LN_2 - 1.0;
    let gamma_term = gamma * m * alpha.log2();
    if delta == 0.0 {
        let log2_z = base + r.log2_one_plus_pow(m);
        ClosedForm { beta: Beta::Finite(0.0), log2_z, f: log2_z - gamma_term }
    } else if delta == 1.0 {
        let log2_z = base + r.log2_one_minus_pow(m);
        ClosedForm { beta: Beta::Infinite, log2_z, f: log2_z - gamma_term }
    } else {
        let beta = beta_at(m, alpha, delta);
        let log2_z = base + (r.one_plus_pow(m) + beta * r.one_minus_pow(m)).log2();
        let f = log2_z - delta * beta.log2() - gamma_term - binary_entropy(delta);
        ClosedForm { beta: Beta::Finite(beta), log2_z, f }
    }
}

/// Fitted parameters of `P_{m,γ,δ}` for `γ` strictly inside the feasible range.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntParams {
    pub m: u32,
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: Beta,
    /// `log2 Z`. `Z` itself overflows for large `m`.
    pub log2_z: f64,
    /// `F(m,γ,δ)` in bits.
    pub f: f64,
}

impl MaxEntParams {
    pub fn fit(m: u32, gamma: f64, delta: f64) -> Result<Self> {
        check_f_args(f64::from(m), gamma, delta)?;
        if m < 2 {
            return Err(Error::invalid("fitting P needs m >= 2"));
        }
        let alpha = alpha_of_gamma_any(m, gamma, delta)?;
        let cf = closed_form(f64::from(m), gamma, delta, alpha);
        Ok(MaxEntParams { m, gamma, delta, alpha, beta: cf.beta, log2_z: cf.log2_z, f: cf.f })
    }

    pub fn z(&self) -> f64 {
        self.log2_z.exp2()
    }

    /// Entropy of `P` in bits, `F + h(δ)`.
    pub fn entropy(&self) -> f64 {
        self.f + binary_entropy(self.delta)
    }

    /// `log2 P(u)` for a vector of weight `w`, `-∞` off the support.
    pub fn log2_prob_of_weight(&self, w: u32) -> f64 {
        let odd = w % 2 == 1;
        let log2_c = match (self.beta, odd) {
            (_, false) if self.delta == 1.0 => return f64::NEG_INFINITY,
            (Beta::Infinite, true) | (_, false) => 0.0,
            (Beta::Finite(b), true) => {
                if b == 0.0 {
                    return f64::NEG_INFINITY;
                }
                b.log2()
            }
        };
        f64::from(w) * self.alpha.log2() + log2_c - self.log2_z
    }

    /// `P(u)`.
    pub fn probability(&self, u: &BitVector) -> f64 {
        assert_eq!(u.len(), self.m as usize, "vector length differs from m");
        self.log2_prob_of_weight(u.weight()).exp2()
    }

    /// Distribution of the weight `|u|` under `P`, indexed `0..=m`.
    pub fn weight_distribution(&self) -> Vec<f64> {
        let m = self.m;
        let mut ln_binom = 0.0f64;
        let mut out = Vec::with_capacity(m as usize + 1);
        for w in 0..=m {
            if w > 0 {
                ln_binom += f64::from(m - w + 1).ln() - f64::from(w).ln();
            }
            let l = self.log2_prob_of_weight(w);
            out.push(if l == f64::NEG_INFINITY { 0.0 } else { (ln_binom / LN_2 + l).exp2() });
        }
        out
    }

    /// A sampler for `P`. Needs `m ≤ 64`.
    pub fn sampler(&self) -> Result<Sampler> {
        Sampler::new(self)
    }
}

/// Draws vectors from `P_{m,γ,δ}`.
///
/// For `δ = 0` and `γ < ½` the coordinates are drawn one at a time from the
/// parity chain. Otherwise the weight is drawn first and then a uniform set
/// of positions.
#[derive(Debug, Clone)]
pub struct Sampler {
    m: usize,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Chain(ChainProbs),
    Weights { cumulative: Vec<f64> },
}

impl Sampler {
    fn new(params: &MaxEntParams) -> Result<Self> {
        let m = params.m as usize;
        if m > MAX_BITS {
            return Err(Error::invalid(format!("sampling supports m <= {MAX_BITS}, got {m}")));
        }
        let kind = if params.delta == 0.0 && params.gamma < 0.5 {
            SamplerKind::Chain(chain_probs(params.m, params.gamma)?)
        } else {
            let mut acc = 0.0;
            let mut cumulative: Vec<f64> = params
                .weight_distribution()
                .into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            let total = acc;
            for c in &mut cumulative {
                *c /= total;
            }
            SamplerKind::Weights { cumulative }
        };
        Ok(Sampler { m, kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVector {
        let mut v = BitVector::zeros(self.m);
        match &self.kind {
            SamplerKind::Chain(chain) => {
                let mut odd = false;
                for i in 0..self.m {
                    let p = if odd { chain.p10[i] } else { chain.p01[i] };
                    if rng.random::<f64>() < p {
                        v.set(i, true);
                        odd = !odd;
                    }
                }
            }
            SamplerKind::Weights { cumulative } => {
                let u: f64 = rng.random();
                // The first index past u always carries positive mass.
                let w = cumulative.iter().position(|&c| u < c).unwrap_or(self.m);
                for i in rand::seq::index::sample(rng, self.m, w) {
                    v.set(i, true);
                }
            }
        }
        v
    }
}

/// One draw from `P`. Builds a [`Sampler`] each call; keep one around for bulk use.
pub fn sample_p<R: Rng + ?Sized>(params: &MaxEntParams, rng: &mut R) -> Result<BitVector> {
    Ok(params.sampler()?.sample(rng))
}

/// Transition probabilities of the parity chain that generates `P_{m,γ,0}`.
///
/// `p01[i-1]` is `Pr(u_i = 1 | w_{i-1} even)`, `p10[i-1]` is
/// `Pr(u_i = 1 | w_{i-1} odd)` and `e[i]` is `Pr(w_i odd)`, where `w_i` is the
/// weight of the first `i` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainProbs {
    pub m: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
    pub e: Vec<f64>,
}

pub fn chain_probs(m: u32, gamma: f64) -> Result<ChainProbs> {
    if m < 2 {
        return Err(Error::invalid(format!("chain needs m >= 2, got {m}")));
    }
    let alpha = alpha_of_gamma(m, gamma, 0.0)?;
    let r = Ratio::new(alpha);
    let mf = f64::from(m);
    let a = alpha / (1.0 + alpha);
    let mut p01 = Vec::with_capacity(m as usize);
    let mut p10 = Vec::with_capacity(m as usize);
    for i in 1..m {
        let rest = mf - f64::from(i);
        p01.push(a * r.one_minus_pow(rest) / r.one_plus_pow(rest + 1.0));
        p10.push(a * r.one_plus_pow(rest) / r.one_minus_pow(rest + 1.0));
    }
    // The last coordinate restores even parity.
    p01.push(0.0);
    p10.push(1.0);
    let denom = 2.0 * r.one_plus_pow(mf);
    let e = (0..=m)
        .map(|i| {
            let i = f64::from(i);
            r.one_minus_pow(i) * r.one_minus_pow(mf - i) / denom
        })
        .collect();
    Ok(ChainProbs { m: m as usize, gamma, alpha, p01, p10, e })
}

impl ChainProbs {
    /// Product of the chain conditionals along `u`.
    pub fn path_probability(&self, u: &BitVector) -> f64 {
        assert_eq!(u.len(), self.m);
        let mut odd = false;
        let mut p = 1.0;
        for i in 0..self.m {
            let q = if odd { self.p10[i] } else { self.p01[i] };
            if u.get(i) {
                p *= q;
                odd = !odd;
            } else {
                p *= 1.0 - q;
            }
        }
        p
    }

    /// Smallest distance from `{0, 1}` over the interior entries, those
    /// not pinned by the parity constraint.
    pub fn min_margin(&self) -> f64 {
        let margin = |x: f64| x.min(1.0 - x);
        let last = self.m - 1;
        let p = self.p01[..last].iter().chain(&self.p10[..last]).copied().map(margin);
        let e = self.e[1..self.m].iter().copied().map(margin);
        p.chain(e).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(m: f64, gamma: f64, delta: f64) -> f64 {
        entropy_exponent(m, gamma, delta).unwrap().finite().unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn gamma_of_alpha_examples() {
        close(gamma_of_alpha(2, 0.5, 0.0).unwrap(), 0.2, 1e-15);
        close(gamma_of_alpha(3, 1.0 / 7f64.sqrt(), 0.0).unwrap(), 0.2, 1e-15);
        assert!(gamma_of_alpha(4, 1e-9, 0.0).unwrap() < 1e-8);
        assert!(gamma_of_alpha(4, 1.0, 0.0).is_err());
        assert!(gamma_of_alpha(4, 0.0, 0.0).is_err());
    }

    #[test]
    fn alpha_of_gamma_examples() {
        close(alpha_of_gamma(2, 0.2, 0.0).unwrap(), 0.5, 1e-12);
        close(alpha_of_gamma(3, 0.2, 0.0).unwrap(), 0.377_964_473_009_227_24, 1e-12);
        close(alpha_of_gamma(5, 0.2, 0.0).unwrap(), 0.297_159_364_689_135_43, 1e-12);
        for m in [20, 40, 80] {
            let a = alpha_of_gamma(m, 0.2, 0.0).unwrap();
            assert!((a - 0.25).abs() <= 2.0 * 0.6f64.powi(m as i32), "m = {m}: {a}");
        }
        assert!(alpha_of_gamma(5, 0.2, 1.0).is_err());
        assert!(alpha_of_gamma(5, 0.5, 0.0).is_err());
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_of(4, 0.2, 0.0).unwrap(), Beta::Finite(0.0));
        assert_eq!(beta_of(4, 0.3, 1.0).unwrap(), Beta::Infinite);
        let Beta::Finite(b) = beta_of(2, 0.2, 0.1).unwrap() else { panic!() };
        close(b, 0.149_071_198_499_985_99, 1e-11);
        let alpha = alpha_of_gamma(6, 0.3, 0.5).unwrap();
        let expected =
            ((1.0 + alpha).powi(6) + (1.0 - alpha).powi(6)) / ((1.0 + alpha).powi(6) - (1.0 - alpha).powi(6));
        let Beta::Finite(b) = beta_of(6, 0.3, 0.5).unwrap() else { panic!() };
        close(b, expected, 1e-12);
    }

    // Independent high-precision solutions of the moment constraints.
    const ORACLE: &[(f64, f64, f64, f64, f64, Option<f64>)] = &[
        (3.0, 0.2, 0.0, 1.356_779_649_447_039_5, 0.377_964_473_009_227_24, None),
        (2.0, 0.2, 0.0, 0.721_928_094_887_362_3, 0.5, None),
        (5.0, 0.2, 0.0, 2.693_318_039_480_794, 0.297_159_364_689_135_43, None),
        (2.0, 0.2, 0.1, 0.685_020_179_483_518_8, 0.447_213_595_499_958, Some(0.149_071_198_499_985_99)),
        (5.0, 0.2, 0.3, 2.646_522_239_553_489, 0.269_669_293_100_440_6, Some(0.486_174_438_822_587_8)),
        (4.0, 0.3, 0.3, 2.538_227_077_047_466_7, 0.447_213_595_499_957_9, Some(0.447_213_595_499_957_9)),
        (5.0, 0.3, 0.7, 3.400_103_208_020_131, 0.418_796_525_390_440_7, Some(2.387_794_404_616_198)),
        (4.0, 0.7, 0.3, 2.538_227_077_047_467, 2.236_067_977_499_789_3, None),
        (5.0, 0.7, 0.3, 3.400_103_208_020_131, 2.387_794_404_616_197_6, None),
        (5.0, 0.8, 1.0, 2.693_318_039_480_793_3, 3.365_197_664_378_24, None),
        (10.0, 0.1, 0.5, 3.680_967_872_608_966_7, 0.107_489_973_550_778_87, Some(1.261_267_198_589_472_7)),
        (6.0, 0.45, 0.9, 4.956_645_569_495_759, 0.818_168_722_184_766_8, Some(9.000_018_008_576_701)),
    ];

    #[test]
    fn frozen_oracle_values() {
        for &(m, gamma, delta, fv, alpha, beta) in ORACLE {
            let p = MaxEntParams::fit(m as u32, gamma, delta).unwrap();
            close(p.f, fv, 1e-10);
            close(f(m, gamma, delta), fv, 1e-10);
            close(p.alpha, alpha, 1e-10 * alpha.max(1.0));
            if let Some(b) = beta {
                close(p.beta.to_f64(), b, 1e-8 * b.max(1.0));
            }
            let audit = entropy_exponent_by_minimization(m, gamma, delta).unwrap().finite().unwrap();
            close(audit, fv, AUDIT_TOLERANCE);
        }
    }

    #[test]
    fn f_reference_values() {
        close(f(2.0, 0.2, 0.0), binary_entropy(0.2), 1e-12);
        let closed = (20.0f64 / 7.0).log2() - 0.6 * (1.0 / 7f64.sqrt()).log2() - 1.0;
        close(f(3.0, 0.2, 0.0), closed, 1e-12);
        close(f(3.0, 0.2, 0.0), 1.35678, 1e-4);
        for gamma in [0.1, 0.25, 0.4] {
            close(f(2.0, gamma, 0.0), binary_entropy(gamma), 1e-12);
        }
    }

    #[test]
    fn g_examples() {
        close(g(2.0, 0.2, 1.0, 0.0).unwrap(), 1.0, 1e-15);
        for m in [2.0, 3.0, 7.5, 30.0] {
            close(g(m, 0.3, 1.0, 0.0).unwrap(), m - 1.0, 1e-12);
        }
        assert!(g(3.0, 0.2, 0.0, 0.0).is_err());
        assert!(g(3.5, 0.2, 1.5, 0.0).is_err());
        let alpha = alpha_of_gamma(3, 0.2, 0.0).unwrap();
        close(g(3.0, 0.2, alpha, 0.0).unwrap(), f(3.0, 0.2, 0.0), 1e-12);
        let (x, _) = golden_section_min(|x| g(3.0, 0.2, x, 0.0).unwrap(), 0.01, 0.99, 300);
        close(x, 0.378, 1e-3);
    }

    #[test]
    fn g_agrees_with_direct_powers() {
        for &(m, x, delta) in &[(4.0f64, 0.3f64, 0.0f64), (5.0, 1.7, 0.4), (3.0, 0.9, 1.0), (6.0, 2.5, 0.25)] {
            let a: f64 = (1.0 + x).powf(m);
            let b: f64 = (1.0 - x).powf(m);
            let mut direct = -0.3 * m * x.log2() - 1.0;
            if delta < 1.0 {
                direct += (1.0 - delta) * (a + b).log2();
            }
            if delta > 0.0 {
                direct += delta * (a - b).log2();
            }
            close(g(m, 0.3, x, delta).unwrap(), direct, 1e-12);
        }
    }

    #[test]
    fn large_m_stays_finite() {
        for m in [1000.0, 10_000.0] {
            let v = f(m, 0.2, 0.3);
            let audit = entropy_exponent_by_minimization(m, 0.2, 0.3).unwrap().finite().unwrap();
            assert!(v.is_finite());
            close(v, audit, 1e-9 * m);
            assert!(v <= m * binary_entropy(0.2));
        }
    }

    #[test]
    fn boundaries_and_infeasible() {
        assert_eq!(entropy_exponent(5.0, 0.1, 1.0).unwrap(), Exponent::MinusInfinity);
        close(f(5.0, 0.2, 1.0), 5f64.log2(), 1e-12);
        close(f(5.0, 0.8, 0.0), 5f64.log2(), 1e-12);
        close(f(5.0, 1.0 - 0.8, 1.0), 5f64.log2(), 1e-12);
        assert_eq!(entropy_exponent(2.0, 0.8, 1.0).unwrap(), Exponent::MinusInfinity);
        assert_eq!(entropy_exponent(2.0, 0.2, 1.0).unwrap(), Exponent::MinusInfinity);
        close(f(4.0, 0.5, 0.0), 3.0, 1e-12);
        close(f(7.5, 0.5, 0.3), 6.5, 1e-12);
        close(f(1.0, 0.3, 0.3), 0.0, 0.0);
        assert_eq!(entropy_exponent(1.0, 0.3, 0.5).unwrap(), Exponent::MinusInfinity);
        assert!(entropy_exponent(3.5, 0.7, 0.0).is_err());
        assert!(entropy_exponent(0.5, 0.3, 0.0).is_err());
        assert!(entropy_exponent(3.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn negation_identity_examples() {
        assert!(negation_identity_holds(4, 0.7, 0.3).unwrap());
        assert!(negation_identity_holds(5, 0.7, 0.3).unwrap());
        assert!(negation_identity_holds(5, 0.8, 1.0).unwrap());
        assert!(negation_identity_holds(2, 0.8, 1.0).unwrap());
        assert!(negation_identity_holds(5, 0.8, 0.0).unwrap());
        assert!(negation_identity_holds(4, 0.4, 0.3).is_err());
        for m in 2..=12 {
            for gamma in [0.55, 0.6, 0.75, 0.9, 0.97] {
                for delta in [0.0, 0.2, 0.5, 0.8, 1.0] {
                    assert!(negation_identity_holds(m, gamma, delta).unwrap(), "m={m} γ={gamma} δ={delta}");
                }
            }
        }
    }

    #[test]
    fn gamma_of_alpha_is_increasing() {
        for m in 2..=20u32 {
            for delta in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let mut prev = f64::NEG_INFINITY;
                for i in 1..2000 {
                    let g = gamma_of_alpha(m, f64::from(i) / 2000.0, delta).unwrap();
                    if m == 2 && delta == 1.0 {
                        // Every odd vector of length 2 has weight 1.
                        close(g, 0.5, 1e-15);
                    } else {
                        assert!(g > prev, "m={m} δ={delta} i={i}");
                    }
                    prev = g;
                }
            }
        }
    }

    #[test]
    fn f_bounds_against_binary_entropy() {
        for m in 2..=40 {
            let mf = f64::from(m);
            for gamma in [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45] {
                let h = binary_entropy(gamma);
                let v = f(mf, gamma, 0.0);
                assert!(v >= mf * h - 1.0 - 1e-12, "m={m} γ={gamma}");
                assert!(v <= mf * h + (1.0 - 2.0 * gamma).powi(m).ln_1p() / LN_2 - 1.0 + 1e-12);
                let excess = entropy_excess(mf, gamma).unwrap();
                let cap = (1.0 - 2.0 * gamma).powi(m).ln_1p() / LN_2;
                assert!(excess > 0.0 && excess <= cap * (1.0 + 1e-12), "m={m} γ={gamma}: {excess} vs {cap}");
            }
        }
    }

    #[test]
    fn f_is_convex_in_m() {
        let gammas = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45];
        for gamma in gammas {
            // The linear part m h(γ) - 1 has no second difference.
            let fs: Vec<f64> =
                (0..=41).map(|m| if m < 2 { f64::NAN } else { entropy_excess(f64::from(m), gamma).unwrap() }).collect();
            for m in 3..=40 {
                assert!(fs[m + 1] + fs[m - 1] - 2.0 * fs[m] > 0.0, "m={m} γ={gamma}");
            }
            for m in 3..=20 {
                for mp in m..=20 {
                    assert!(fs[mp] + fs[m] < fs[mp + 1] + fs[m - 1], "m={m} m'={mp} γ={gamma}");
                }
            }
        }
    }

    #[test]
    fn excess_matches_f_where_resolvable() {
        for m in [2.0, 2.5, 3.0, 5.0, 8.0, 12.0] {
            for gamma in [0.05, 0.2, 0.35, 0.45] {
                let direct = f(m, gamma, 0.0) - (m * binary_entropy(gamma) - 1.0);
                close(entropy_excess(m, gamma).unwrap(), direct, 1e-12);
            }
        }
    }

    #[test]
    fn f_decreases_in_delta() {
        for m in 2..=12 {
            for gamma in [0.1, 0.2, 0.3, 0.4, 0.45] {
                let values: Vec<Exponent> =
                    (0..=20).map(|i| entropy_exponent(f64::from(m), gamma, f64::from(i) / 20.0).unwrap()).collect();
                for w in values.windows(2) {
                    assert!(w[1] <= w[0].plus(1e-12), "m={m} γ={gamma}: {:?}", w);
                }
            }
        }
    }

    #[test]
    fn f12_bound() {
        for gamma in [0.1, 0.2, 0.3, 0.4] {
            for delta in [0.0, 0.1, 0.5, 1.0] {
                let f1 = entropy_exponent(1.0, gamma, delta).unwrap();
                for m in 2..=30 {
                    let lhs = f1.plus(f(f64::from(m + 1), gamma, 0.0));
                    let rhs = f(2.0, gamma, 0.0) + f(f64::from(m), gamma, 0.0);
                    assert!(lhs < Exponent::Finite(rhs), "γ={gamma} δ={delta} m={m}");
                }
            }
        }
    }

    #[test]
    fn chain_examples_and_identities() {
        for m in [2u32, 3, 5, 10, 40] {
            for gamma in [0.05, 0.2, 0.33, 0.49] {
                let c = chain_probs(m, gamma).unwrap();
                let a = c.alpha;
                close(c.p01[0], gamma, 1e-12);
                close(c.p01[m as usize - 2], a * a / (1.0 + a * a), 1e-12);
                close(c.p10[m as usize - 2], 0.5, 1e-12);
                assert_eq!(c.p01[m as usize - 1], 0.0);
                assert_eq!(c.p10[m as usize - 1], 1.0);
                assert_eq!(c.e[0], 0.0);
                assert_eq!(c.e[m as usize], 0.0);
                for i in 1..=m as usize {
                    let mix = c.p10[i - 1] * c.e[i - 1] + c.p01[i - 1] * (1.0 - c.e[i - 1]);
                    close(mix, gamma, 1e-12);
                    let next = c.e[i - 1] * (1.0 - c.p10[i - 1]) + (1.0 - c.e[i - 1]) * c.p01[i - 1];
                    close(next, c.e[i], 1e-12);
                }
            }
        }
    }

    #[test]
    fn chain_margins_do_not_shrink_with_m() {
        for gamma in [0.1, 0.2, 0.3, 0.4] {
            let margins: Vec<f64> = (3..=60).map(|m| chain_probs(m, gamma).unwrap().min_margin()).collect();
            let head = margins[..28].iter().copied().fold(f64::INFINITY, f64::min);
            let tail = margins[28..].iter().copied().fold(f64::INFINITY, f64::min);
            assert!(head > 0.0);
            assert!(tail >= 0.99 * head, "γ={gamma}: head {head}, tail {tail}");
        }
    }

    #[test]
    fn chain_path_probability_matches_p() {
        for m in 2..=10u32 {
            for gamma in [0.1, 0.25, 0.4] {
                let params = MaxEntParams::fit(m, gamma, 0.0).unwrap();
                let chain = chain_probs(m, gamma).unwrap();
                let mut total = 0.0;
                for bits in 0..(1u64 << m) {
                    let u = BitVector::from_bits(bits, m as usize);
                    let path = chain.path_probability(&u);
                    let direct = params.probability(&u);
                    assert!((path - direct).abs() <= 1e-10, "m={m} u={u}");
                    if u.weight() % 2 == 1 {
                        assert_eq!(path, 0.0);
                    }
                    total += direct;
                }
                close(total, 1.0, 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_meet_constraints() {
        for &(m, gamma, delta) in &[(4u32, 0.3, 0.3), (5, 0.2, 0.6), (6, 0.7, 0.5), (5, 0.3, 1.0), (3, 0.6, 0.0)] {
            let p = MaxEntParams::fit(m, gamma, delta).unwrap();
            let dist = p.weight_distribution();
            let total: f64 = dist.iter().sum();
            let odd: f64 = dist.iter().skip(1).step_by(2).sum();
            let mean: f64 = dist.iter().enumerate().map(|(w, q)| w as f64 * q).sum::<f64>() / f64::from(m);
            let entropy: f64 = {
                let mut h = 0.0;
                for w in 0..=m {
                    let q = dist[w as usize];
                    if q > 0.0 {
                        h -= q * p.log2_prob_of_weight(w);
                    }
                }
                h
            };
            close(total, 1.0, 1e-12);
            close(odd, delta, 1e-12);
            close(mean, gamma, 1e-12);
            close(entropy, p.entropy(), 1e-10);
        }
    }

    #[test]
    fn sampler_even_weight_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(m, gamma, delta) in &[(6u32, 0.2, 0.0), (9, 0.35, 0.0), (6, 0.3, 0.4), (5, 0.7, 0.2)] {
            let params = MaxEntParams::fit(m, gamma, delta).unwrap();
            let sampler = params.sampler().unwrap();
            let n = 100_000;
            let mut ones = vec![0u64; m as usize];
            let mut odd = 0u64;
            for _ in 0..n {
                let u = sampler.sample(&mut rng);
                if delta == 0.0 {
                    assert_eq!(u.weight() % 2, 0);
                }
                odd += u64::from(u.weight() % 2);
                for (i, c) in ones.iter_mut().enumerate() {
                    *c += u64::from(u.get(i));
                }
            }
            let se = (gamma * (1.0 - gamma) / n as f64).sqrt();
            for c in ones {
                assert!((c as f64 / n as f64 - gamma).abs() <= 4.0 * se, "m={m} γ={gamma} δ={delta}");
            }
            let se_odd = (delta * (1.0 - delta) / n as f64).sqrt().max(1e-12);
            assert!((odd as f64 / n as f64 - delta).abs() <= 4.0 * se_odd);
        }
    }

    #[test]
    fn sample_p_helper() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = MaxEntParams::fit(5, 0.3, 1.0).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_p(&params, &mut rng).unwrap().weight() % 2, 1);
        }
    }

    proptest! {
        #[test]
        fn alpha_round_trip(m in 2u32..60, gamma_frac in 0.01f64..0.99, delta in 0.0f64..=1.0) {
            let lo = gamma_min(f64::from(m), delta);
            let gamma = lo + gamma_frac * (0.5 - lo);
            prop_assume!(gamma > lo + 1e-6 && gamma < 0.5 - 1e-6);
            let alpha = alpha_of_gamma(m, gamma, delta).unwrap();
            prop_assert!((gamma_of_alpha(m, alpha, delta).unwrap() - gamma).abs() <= 1e-10);
        }

        #[test]
        fn closed_form_matches_minimization(m in 2.0f64..80.0, gamma in 0.02f64..0.48, delta in 0.0f64..=1.0) {
            let a = entropy_exponent(m, gamma, delta).unwrap();
            let b = entropy_exponent_by_minimization(m, gamma, delta).unwrap();
            if a.is_finite() {
                prop_assert!(a.approx_eq(b, AUDIT_TOLERANCE), "{a:?} vs {b:?}");
            } else {
                prop_assert_eq!(b, Exponent::MinusInfinity);
            }
        }
    }
}
