//! Invariant suites behind `codemoments verify`.

use clap::ValueEnum;
use codemoments::combinatorics::{binary_entropy, log2_rational, rational_to_f64};
use codemoments::enumeration::{
    count_t, count_t_bar, count_t_bar_exhaustive, count_t_exhaustive, estimate_prob_t, exact_prob_t, log2_t_asymptotic,
    log_log_slope,
};
use codemoments::error::Result;
use codemoments::gf2::BitVector;
use codemoments::maxent::{
    chain_probs, entropy_excess, entropy_exponent, entropy_exponent_by_minimization, negation_identity_holds, Exponent,
    MaxEntParams, AUDIT_TOLERANCE,
};
use codemoments::moments::{central_moment_exact, k0, k0_grid, mean_variance, r_u, robust_subspace_sum, XDistribution};
use codemoments::params::CodeParams;
use codemoments::subspace::{all_subspaces, Subspace};
use num_rational::Rational64;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Oracle,
    Maxent,
    Scaling,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// Reported for context, never fails the run.
    Info,
}

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub suite: &'static str,
    pub check: String,
    pub status: Status,
    pub measured: Value,
    pub bound: String,
}

struct Recorder {
    suite: &'static str,
    records: Vec<Record>,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Recorder { suite, records: Vec::new() }
    }

    fn check(&mut self, check: impl Into<String>, ok: bool, measured: Value, bound: impl Into<String>) {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.push(check, status, measured, bound);
    }

    fn info(&mut self, check: impl Into<String>, measured: Value) {
        self.push(check, Status::Info, measured, "");
    }

    fn push(&mut self, check: impl Into<String>, status: Status, measured: Value, bound: impl Into<String>) {
        self.records.push(Record { suite: self.suite, check: check.into(), status, measured, bound: bound.into() });
    }
}

pub struct Options {
    pub samples: u64,
    pub seed: u64,
}

pub fn run(suite: Suite, opts: &Options) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Oracle | Suite::All) {
        out.extend(oracle()?);
    }
    if matches!(suite, Suite::Maxent | Suite::All) {
        out.extend(maxent()?);
    }
    if matches!(suite, Suite::Scaling | Suite::All) {
        out.extend(scaling(opts)?);
    }
    Ok(out)
}

fn params(n: u64, g: (i64, i64), l: (i64, i64)) -> CodeParams {
    CodeParams::new(n, Rational64::new(g.0, g.1), Rational64::new(l.0, l.1)).expect("built-in parameters are valid")
}

fn oracle_params() -> [CodeParams; 3] {
    [params(6, (1, 3), (1, 3)), params(8, (1, 4), (1, 4)), params(10, (1, 5), (1, 5))]
}

fn oracle() -> Result<Vec<Record>> {
    let mut r = Recorder::new("oracle");
    for p in oracle_params() {
        let dist = XDistribution::exhaustive(&p)?;
        let mismatches: Vec<u32> = (1..=4)
            .filter(|&k| central_moment_exact(&p, k).map(|m| m.value != dist.central_moment(k)).unwrap_or(true))
            .collect();
        r.check(
            format!("central_moment_exact == bruteforce ({p},k<=4)"),
            mismatches.is_empty(),
            json!({ "mismatched_k": mismatches }),
            "exact equality",
        );
    }

    let p = params(6, (1, 3), (1, 3));
    let (mean, var) = mean_variance(&p);
    let dist = XDistribution::exhaustive(&p)?;
    r.check(
        "E(X)=15/4 and Var(X)=45/16 at (6,1/3,1/3)",
        mean.to_string() == "15/4"
            && var.to_string() == "45/16"
            && dist.mean() == mean
            && dist.central_moment(2) == var,
        json!({ "mean": mean.to_string(), "variance": var.to_string() }),
        "15/4, 45/16",
    );
    for (k, expected) in [(2usize, 15u32), (3, 120)] {
        let u = Subspace::even(k);
        let dp = count_t(&u, &p)?.value;
        let brute = count_t_exhaustive(&u, &p)?.value;
        r.check(
            format!("count_T(E^{k},6,1/3) dp == exhaustive == {expected}"),
            dp == brute && dp == expected.into(),
            json!({ "dp": dp.to_string(), "exhaustive": brute.to_string() }),
            expected.to_string(),
        );
    }
    let r_e2 = r_u(&Subspace::even(2), &p);
    r.check("R_{E^2} at lambda*n=2", r_e2.to_string() == "3/16", json!(r_e2.to_string()), "3/16");

    for p in oracle_params() {
        let mut nonzero = 0;
        let mut total = 0;
        for k in 1..=4 {
            for u in all_subspaces(k)? {
                if !u.is_robust() {
                    total += 1;
                    if r_u(&u, &p) != num_traits::Zero::zero() {
                        nonzero += 1;
                    }
                }
            }
        }
        r.check(
            format!("non-robust R_U == 0 ({p},k<=4)"),
            nonzero == 0,
            json!({ "non_robust": total, "nonzero": nonzero }),
            "0 nonzero",
        );
    }

    let subspaces = all_subspaces(3)?;
    let mut bad = 0;
    for u in &subspaces {
        let inverted = count_t_bar(u, &p)?.value;
        let direct = count_t_bar_exhaustive(u, &p)?.value;
        let partition =
            u.sublattice()?.iter().map(|v| count_t_bar(v, &p).map(|c| c.value)).sum::<Result<num_bigint::BigUint>>()?;
        if inverted != direct || partition != count_t(u, &p)?.value {
            bad += 1;
        }
    }
    r.check(
        "Mobius inversion == image equality and partition identity (U<=F2^3, 6,1/3)",
        bad == 0,
        json!({ "subspaces": subspaces.len(), "mismatches": bad }),
        "0 mismatches",
    );

    let p8 = params(8, (1, 4), (1, 4));
    for k in 2..=4 {
        let exact = central_moment_exact(&p8, k)?.value;
        let robust = robust_subspace_sum(&p8, k)?;
        r.info(format!("moment / robust-subspace sum ({p8},k={k})"), json!(rational_to_f64(&(exact / robust))));
    }
    let calib = (log2_rational(&count_t(&Subspace::even(3), &p)?.to_rational()) - log2_t_asymptotic(3, &p)?) / 3.0;
    r.info("(log2|T(E^3)| - log2_T_asymptotic)/k at (6,1/3)", json!(calib));
    Ok(r.records)
}

fn gamma_grid() -> Vec<f64> {
    (1..=9).map(|i| f64::from(i) * 0.05).collect()
}

fn maxent() -> Result<Vec<Record>> {
    let mut r = Recorder::new("maxent");
    let grid = gamma_grid();

    let worst = grid
        .iter()
        .map(|&g| Ok((entropy_exponent(2.0, g, 0.0)?.to_f64() - binary_entropy(g)).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    r.check("F(2,gamma) == h(gamma)", worst <= 1e-10, json!(worst), "1e-10");

    let mut sandwich_violation = 0.0f64;
    let mut rise = f64::NEG_INFINITY;
    let (mut ratio_all, mut ratio_tail) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &g in &grid {
        let gaps: Vec<f64> = (2..=40).map(|m| entropy_excess(f64::from(m), g)).collect::<Result<_>>()?;
        for (i, &gap) in gaps.iter().enumerate() {
            let upper = (1.0 - 2.0 * g).powi(i as i32 + 2).ln_1p() / std::f64::consts::LN_2;
            sandwich_violation = sandwich_violation.max(-gap).max(gap - upper);
        }
        for (i, w) in gaps.windows(2).enumerate() {
            rise = rise.max(w[1] - w[0]);
            let excess = w[1] / w[0] - (1.0 - 2.0 * g);
            ratio_all = ratio_all.max(excess);
            if i + 2 >= 5 {
                ratio_tail = ratio_tail.max(excess);
            }
        }
    }
    r.check(
        "m h - 1 <= F <= m h - 1 + log2(1+(1-2gamma)^m), m=2..40",
        sandwich_violation <= 1e-12,
        json!(sandwich_violation),
        "1e-12",
    );
    r.check("F - (m h - 1) nonincreasing in m", rise <= 0.0, json!(rise), "0");
    r.check("consecutive gap ratio - (1-2gamma), m=2..40", ratio_all <= 0.05, json!(ratio_all), "0.05");
    r.info("consecutive gap ratio - (1-2gamma), m=5..40", json!(ratio_tail));

    let mut min_d2 = f64::INFINITY;
    for &g in &grid {
        let e: Vec<f64> = (2..=21).map(|m| entropy_excess(f64::from(m), g)).collect::<Result<_>>()?;
        for w in e.windows(3) {
            min_d2 = min_d2.min(w[0] + w[2] - 2.0 * w[1]);
        }
    }
    r.check("second difference of F in m, m=3..20", min_d2 > 0.0, json!(min_d2), "> 0");

    let mut worst_rise = f64::NEG_INFINITY;
    for &g in &grid {
        for m in 2..=8 {
            let vals: Vec<Exponent> =
                (0..=10).map(|i| entropy_exponent(f64::from(m), g, f64::from(i) / 10.0)).collect::<Result<_>>()?;
            for w in vals.windows(2) {
                match (w[0], w[1]) {
                    (Exponent::Finite(a), Exponent::Finite(b)) => worst_rise = worst_rise.max(b - a),
                    (Exponent::MinusInfinity, Exponent::Finite(_)) => worst_rise = f64::INFINITY,
                    _ => {}
                }
            }
        }
    }
    r.check("F nonincreasing in delta, m=2..8", worst_rise <= 1e-9, json!(worst_rise), "1e-9");

    let mut audit = 0.0f64;
    for &g in &grid {
        for m in 2..=12 {
            for delta in [0.0, 0.1, 0.5] {
                let (a, b) = (
                    entropy_exponent(f64::from(m), g, delta)?,
                    entropy_exponent_by_minimization(f64::from(m), g, delta)?,
                );
                if let (Some(a), Some(b)) = (a.finite(), b.finite()) {
                    audit = audit.max((a - b).abs());
                }
            }
        }
    }
    r.check("closed-form F == minimization of g", audit <= AUDIT_TOLERANCE, json!(audit), "1e-9");

    let mut failures = 0;
    for m in 2..=8 {
        for g in [0.6, 0.7, 0.8] {
            for delta in [0.0, 0.3, 1.0] {
                if !negation_identity_holds(m, g, delta)? {
                    failures += 1;
                }
            }
        }
    }
    r.check("gamma > 1/2 negation identity, m=2..8", failures == 0, json!(failures), "0 failures");

    let (mut path, mut identity) = (0.0f64, 0.0f64);
    for m in 2..=10u32 {
        for &g in &grid {
            let chain = chain_probs(m, g)?;
            let fit = MaxEntParams::fit(m, g, 0.0)?;
            for bits in 0..(1u64 << m) {
                let u = BitVector::from_bits(bits, m as usize);
                if u.weight().is_multiple_of(2) {
                    let target = fit.alpha.powi(u.weight() as i32) / fit.z();
                    path = path.max((chain.path_probability(&u) - target).abs());
                }
            }
            for i in 1..=m as usize {
                let e = chain.e[i - 1];
                identity = identity.max((chain.p10[i - 1] * e + chain.p01[i - 1] * (1.0 - e) - g).abs());
            }
        }
    }
    r.check("chain path probability == alpha^|u|/Z, m<=10", path <= 1e-10, json!(path), "1e-10");
    r.check("gamma == p10 e + p01 (1-e) at every step", identity <= 1e-12, json!(identity), "1e-12");

    // Empirical lower envelope for the constant keeping p and e away from 0 and 1.
    let mut envelope = serde_json::Map::new();
    for &g in &grid {
        let c = (2..=60).map(|m| chain_probs(m, g).map(|ch| ch.min_margin())).collect::<Result<Vec<f64>>>()?;
        envelope.insert(format!("{g:.2}"), json!(c.into_iter().fold(f64::INFINITY, f64::min)));
    }
    r.info("min chain margin over m=2..60, by gamma", Value::Object(envelope));

    let anchor = k0(0.2, 0.3)?;
    r.check("k0(0.2,0.3)", anchor == 3, json!(anchor), "3");
    let lambdas: Vec<f64> = (1..=19).map(|i| f64::from(i) * 0.05).collect();
    let map = k0_grid(&grid, &lambdas)?;
    let mut monotone = true;
    let mut masked = true;
    for (gi, row) in map.iter().enumerate() {
        let h = binary_entropy(grid[gi]);
        let mut prev = 0;
        for (li, cell) in row.iter().enumerate() {
            masked &= cell.is_none() == (lambdas[li] >= h);
            if let Some(k) = *cell {
                monotone &= k >= prev;
                prev = k;
            }
        }
    }
    r.check("k0 nondecreasing in lambda", monotone, json!(monotone), "true");
    r.check("k0 map masks lambda >= h(gamma)", masked, json!(masked), "true");
    Ok(r.records)
}

fn scaling(opts: &Options) -> Result<Vec<Record>> {
    let mut r = Recorder::new("scaling");
    let gamma = Rational64::new(1, 3);
    for (k, ns, lo, hi) in [(3u32, vec![12u64, 24, 48, 96], -1.65, -1.35), (4, vec![12, 24, 48], -2.25, -1.75)] {
        let mut pts = Vec::new();
        for &n in &ns {
            pts.push((n as f64, estimate_prob_t(k, n, gamma, opts.samples, opts.seed)?.estimate));
        }
        let slope = log_log_slope(&pts);
        r.check(
            format!("log-log slope of Pr(A in T), k={k}, n={ns:?}"),
            (lo..=hi).contains(&slope),
            json!({ "slope": slope, "estimates": pts.iter().map(|p| p.1).collect::<Vec<_>>() }),
            format!("[{lo}, {hi}]"),
        );
    }
    let p = params(12, (1, 3), (1, 4));
    let exact = exact_prob_t(3, &p)?;
    let est = estimate_prob_t(3, 12, gamma, opts.samples, opts.seed)?;
    r.check(
        "Monte Carlo Pr(A in T) within 4 stderr of exact, k=3, n=12",
        (est.estimate - exact).abs() <= 4.0 * est.stderr,
        json!({ "estimate": est.estimate, "stderr": est.stderr, "exact": exact }),
        "4 stderr",
    );
    Ok(r.records)
}
