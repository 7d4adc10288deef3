mod output;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use codemoments::combinatorics::{binary_entropy, rational_to_f64};
use codemoments::error::Error;
use codemoments::maxent::{alpha_of_gamma, entropy_exponent, g};
use codemoments::moments::{self, k0_grid, predict_moment_with, NormalizedMoment, DEFAULT_RANGE_DIVISOR};
use codemoments::params::{parse_grid, parse_range, parse_rational, CodeParams};
use num_rational::Rational64;
use output::{num, Format, Header, Table};
use serde_json::json;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "codemoments", version, about = "Moments of the weight-layer count of random linear codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Seed recorded in the header and used by every random stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// F(m,gamma,delta) against m h(gamma) - 1 and its upper bound.
    FTable {
        #[arg(long)]
        gamma: String,
        /// Range of m, e.g. 2..40.
        #[arg(long = "k-range", default_value = "2..40")]
        k_range: String,
        #[arg(long, default_value = "0")]
        delta: String,
        #[command(flatten)]
        common: Common,
    },
    /// g(m,gamma,x,delta) over a grid of x, marking the minimizing row.
    GCurve {
        #[arg(long)]
        gamma: String,
        /// The dimension m.
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long, default_value = "0")]
        delta: String,
        /// `start:step:stop` or a comma list of positive x.
        #[arg(long = "x-grid", default_value = "1/100:1/100:1")]
        x_grid: String,
        #[command(flatten)]
        common: Common,
    },
    /// k0(gamma, lambda) over a grid; cells with lambda >= h(gamma) are masked.
    K0Map {
        #[arg(long, default_value = "1/20:1/20:9/20")]
        gamma: String,
        #[arg(long, default_value = "1/20:1/20:19/20")]
        lambda: String,
        #[command(flatten)]
        common: Common,
    },
    /// Runs invariant suites and reports one record per check.
    Verify {
        #[arg(long, value_enum, default_value_t = verify::Suite::All)]
        suite: verify::Suite,
        /// Monte Carlo samples per point in the scaling suite.
        #[arg(long, default_value_t = 10_000_000)]
        samples: u64,
        #[command(flatten)]
        common: Common,
    },
    /// The k-th central moment at one instance, exactly or by sampling.
    Moment {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        k: u32,
        #[arg(long, value_enum, default_value_t = MomentMethod::Exact)]
        method: MomentMethod,
        /// Samples for the Monte Carlo method.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Predicted asymptotic k-th central moment and its regime.
    Predict {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        lambda: String,
        #[arg(long, conflicts_with = "k_range")]
        k: Option<u32>,
        #[arg(long = "k-range")]
        k_range: Option<String>,
        /// Orders must satisfy k log2 n <= n / range-divisor.
        #[arg(long = "range-divisor", default_value_t = DEFAULT_RANGE_DIVISOR)]
        range_divisor: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MomentMethod {
    /// Sum over subspaces of GF(2)^k.
    Exact,
    /// Every parity-check matrix.
    Bruteforce,
    MonteCarlo,
}

enum Failure {
    Lib(Error),
    Verify,
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::BudgetExceeded { .. } | Error::LatticeTooLarge { .. } => ExitCode::from(EXIT_BUDGET),
                _ => ExitCode::from(EXIT_INVALID),
            }
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn to_f64(q: Rational64) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn rational(s: &str, what: &str) -> Result<Rational64, Error> {
    parse_rational(s).map_err(|e| Error::InvalidParameter(format!("--{what}: {e}")))
}

fn emit(common: &Common, text: &str) -> Result<(), Failure> {
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::FTable { common, .. }
        | Command::GCurve { common, .. }
        | Command::K0Map { common, .. }
        | Command::Verify { common, .. }
        | Command::Moment { common, .. }
        | Command::Predict { common, .. } => common.clone(),
    };
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Error::InvalidParameter("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    match cli.command {
        Command::FTable { gamma, k_range, delta, common } => f_table(&gamma, &k_range, &delta, &common),
        Command::GCurve { gamma, k, delta, x_grid, common } => g_curve(&gamma, k, &delta, &x_grid, &common),
        Command::K0Map { gamma, lambda, common } => k0_map(&gamma, &lambda, &common),
        Command::Verify { suite, samples, common } => run_verify(suite, samples, &common),
        Command::Moment { n, gamma, lambda, k, method, samples, common } => {
            moment(n, &gamma, &lambda, k, method, samples, &common)
        }
        Command::Predict { n, gamma, lambda, k, k_range, range_divisor, common } => {
            predict(n, &gamma, &lambda, k, k_range.as_deref(), range_divisor, &common)
        }
    }
}

fn f_table(gamma: &str, k_range: &str, delta: &str, common: &Common) -> Result<(), Failure> {
    let (gamma_q, delta_q) = (rational(gamma, "gamma")?, rational(delta, "delta")?);
    let (lo, hi) = parse_range(k_range)?;
    let (g, d) = (to_f64(gamma_q), to_f64(delta_q));
    if lo < 1 {
        return Err(Error::InvalidParameter("m must be at least 1".into()).into());
    }
    if !(g > 0.0 && g < 1.0) || !(0.0..=1.0).contains(&d) {
        return Err(Error::InvalidParameter(format!("need 0 < gamma < 1 and 0 <= delta <= 1, got {g}, {d}")).into());
    }
    let h = binary_entropy(g);
    let mut table = Table::new(&["m", "F", "gap", "upper_gap"]);
    for m in lo..=hi {
        let mf = f64::from(m);
        let f = entropy_exponent(mf, g, d)?;
        // The dedicated routine keeps digits that F - (m h - 1) would cancel.
        let gap = if d == 0.0 && g < 0.5 && m >= 2 {
            codemoments::maxent::entropy_excess(mf, g)?
        } else {
            f.to_f64() - (mf * h - 1.0)
        };
        let upper = (1.0 - 2.0 * g).abs().powi(m as i32).ln_1p() / std::f64::consts::LN_2;
        table.push(vec![m.to_string(), num(f.to_f64()), num(gap), num(upper)]);
    }
    let header = Header { config: format!("f-table gamma={gamma_q} m={lo}..={hi} delta={delta_q}"), seed: common.seed };
    emit(common, &table.render(&header, common.format))
}

fn g_curve(gamma: &str, m: u32, delta: &str, x_grid: &str, common: &Common) -> Result<(), Failure> {
    let (gamma_q, delta_q) = (rational(gamma, "gamma")?, rational(delta, "delta")?);
    let xs = parse_grid(x_grid)?;
    if xs.iter().any(|&x| x <= Rational64::from_integer(0)) {
        return Err(Error::InvalidParameter("--x-grid values must be positive".into()).into());
    }
    let values = xs
        .iter()
        .map(|&x| g(f64::from(m), to_f64(gamma_q), to_f64(x), to_f64(delta_q)))
        .collect::<Result<Vec<f64>, Error>>()?;
    let argmin = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
    let mut table = Table::new(&["x", "g", "argmin"]);
    for (i, (x, v)) in xs.iter().zip(&values).enumerate() {
        table.push(vec![num(to_f64(*x)), num(*v), u8::from(Some(i) == argmin).to_string()]);
    }
    let mut config = format!("g-curve m={m} gamma={gamma_q} delta={delta_q} x={x_grid}");
    if delta_q == Rational64::from_integer(0) && to_f64(gamma_q) < 0.5 && m >= 2 {
        if let Ok(alpha) = alpha_of_gamma(m, to_f64(gamma_q), 0.0) {
            config.push_str(&format!(" alpha={}", num(alpha)));
        }
    }
    emit(common, &table.render(&Header { config, seed: common.seed }, common.format))
}

fn k0_map(gamma: &str, lambda: &str, common: &Common) -> Result<(), Failure> {
    let (gammas, lambdas) = (parse_grid(gamma)?, parse_grid(lambda)?);
    let gf: Vec<f64> = gammas.iter().copied().map(to_f64).collect();
    let lf: Vec<f64> = lambdas.iter().copied().map(to_f64).collect();
    let map = k0_grid(&gf, &lf)?;
    let cell = |c: &Option<u32>| c.map_or_else(|| "masked".to_string(), |k| k.to_string());
    let table = match common.format {
        Format::Csv => {
            let mut t = Table::new(&["gamma", "lambda", "h_gamma", "k0"]);
            for (gi, row) in map.iter().enumerate() {
                for (li, c) in row.iter().enumerate() {
                    t.push(vec![gammas[gi].to_string(), lambdas[li].to_string(), num(binary_entropy(gf[gi])), cell(c)]);
                }
            }
            t
        }
        Format::Table => {
            let mut columns = vec!["gamma\\lambda".to_string()];
            columns.extend(lambdas.iter().map(|l| l.to_string()));
            let mut t = Table { columns, rows: Vec::new() };
            for (gi, row) in map.iter().enumerate() {
                let mut cells = vec![gammas[gi].to_string()];
                cells.extend(row.iter().map(|c| c.map_or_else(|| "-".to_string(), |k| k.to_string())));
                t.push(cells);
            }
            t
        }
    };
    let header = Header { config: format!("k0-map gamma={gamma} lambda={lambda}"), seed: common.seed };
    emit(common, &table.render(&header, common.format))
}

fn run_verify(suite: verify::Suite, samples: u64, common: &Common) -> Result<(), Failure> {
    if samples < 1 {
        return Err(Error::InvalidParameter("--samples must be positive".into()).into());
    }
    let records = verify::run(suite, &verify::Options { samples, seed: common.seed })?;
    let config = format!("verify suite={suite:?} samples={samples}").to_lowercase();
    let text = match common.format {
        Format::Csv => {
            let mut text =
                json!({ "version": env!("CARGO_PKG_VERSION"), "config": config, "seed": common.seed }).to_string();
            text.push('\n');
            for r in &records {
                text.push_str(&serde_json::to_string(r).expect("records serialize"));
                text.push('\n');
            }
            text
        }
        Format::Table => {
            let mut t = Table::new(&["suite", "status", "check", "measured", "bound"]);
            for r in &records {
                let status = serde_json::to_value(r.status).expect("status serializes");
                t.push(vec![
                    r.suite.into(),
                    status.as_str().unwrap_or_default().into(),
                    r.check.clone(),
                    r.measured.to_string(),
                    r.bound.clone(),
                ]);
            }
            t.render(&Header { config, seed: common.seed }, Format::Table)
        }
    };
    emit(common, &text)?;
    let failed = records.iter().filter(|r| r.status == verify::Status::Fail).count();
    eprintln!("{} checks, {failed} failed", records.len());
    if failed > 0 {
        Err(Failure::Verify)
    } else {
        Ok(())
    }
}

fn moment(
    n: u64,
    gamma: &str,
    lambda: &str,
    k: u32,
    method: MomentMethod,
    samples: u64,
    common: &Common,
) -> Result<(), Failure> {
    let p = CodeParams::new(n, rational(gamma, "gamma")?, rational(lambda, "lambda")?)?;
    let mut table = Table::new(&["k", "method", "exact", "value", "stderr"]);
    let (exact, value, stderr) = match method {
        MomentMethod::Exact | MomentMethod::Bruteforce => {
            let v = if method == MomentMethod::Exact {
                moments::central_moment_exact(&p, k)?.value
            } else {
                moments::central_moment_bruteforce(&p, k)?
            };
            (v.to_string(), rational_to_f64(&v), 0.0)
        }
        MomentMethod::MonteCarlo => {
            let e = moments::monte_carlo_moment(&p, k, samples, common.seed)?;
            (String::new(), e.estimate, e.stderr)
        }
    };
    let name = clap::ValueEnum::to_possible_value(&method).expect("no skipped variants").get_name().to_string();
    table.push(vec![k.to_string(), name.clone(), exact, num(value), num(stderr)]);
    let mut config = format!("moment n={} gamma={} lambda={} k={k} method={name}", p.n(), p.gamma(), p.lambda());
    if method == MomentMethod::MonteCarlo {
        config.push_str(&format!(" samples={samples}"));
    }
    emit(common, &table.render(&Header { config, seed: common.seed }, common.format))
}

fn predict(
    n: u64,
    gamma: &str,
    lambda: &str,
    k: Option<u32>,
    k_range: Option<&str>,
    range_divisor: f64,
    common: &Common,
) -> Result<(), Failure> {
    let p = CodeParams::new(n, rational(gamma, "gamma")?, rational(lambda, "lambda")?)?;
    if range_divisor.is_nan() || range_divisor <= 0.0 {
        return Err(Error::InvalidParameter("--range-divisor must be positive".into()).into());
    }
    let (lo, hi) = match (k, k_range) {
        (Some(k), _) => (k, k),
        (None, Some(r)) => parse_range(r)?,
        (None, None) => return Err(Error::InvalidParameter("give --k or --k-range".into()).into()),
    };
    let mut table = Table::new(&[
        "k",
        "regime",
        "d",
        "linear",
        "log_n",
        "constant",
        "log2_value",
        "dominant",
        "tie",
        "k0",
        "k1",
        "normalized",
    ]);
    for k in lo..=hi {
        let pred = predict_moment_with(&p, k, range_divisor)?;
        let normalized = match &pred.normalized {
            NormalizedMoment::Vanishing => "o(1)".to_string(),
            NormalizedMoment::Gaussian { coefficient } => format!("gaussian:{coefficient}"),
            NormalizedMoment::Growing { log2_value } => format!("growing:log2={}", num(*log2_value)),
        };
        let top = pred.dominant_regimes();
        for c in &pred.candidates {
            let dominant = c.regime == pred.regime && c.d == pred.dominant_d || (pred.tie && top.contains(&c.regime));
            table.push(vec![
                k.to_string(),
                c.regime.to_string(),
                c.d.to_string(),
                num(c.leading.linear),
                num(c.leading.log_n),
                num(c.leading.constant),
                num(c.log2_value),
                u8::from(dominant).to_string(),
                u8::from(pred.tie).to_string(),
                pred.k0.to_string(),
                pred.k1.to_string(),
                normalized.clone(),
            ]);
        }
    }
    let header = Header {
        config: format!(
            "predict n={} gamma={} lambda={} k={lo}..={hi} range_divisor={range_divisor}",
            p.n(),
            p.gamma(),
            p.lambda()
        ),
        seed: common.seed,
    };
    emit(common, &table.render(&header, common.format))
}
