//! `laststop`: tables and curve data for stopping strategies in the
//! last-success problem under a negative binomial number of trials.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use laststop::fixed_n::{asymptotic_check, Profile};
use laststop::sim;
use laststop::special::{da_hyp2f1, hyp2f1, HypArgs, HypConfig};
use laststop::strategy::{build_profile, w0, w1, StrategySpec};
use laststop::value::solve_value;
use laststop::winprob::{win_prob, win_prob_v2};
use laststop::{Error, ModelParams};
use output::{Cell, Format, Table};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "laststop",
    version,
    about = "Optimal and myopic stopping for the last-success problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Success profile parameter θ > 0 (p_k = θ/(θ+k-1))
    #[arg(long)]
    theta: f64,
    /// Prior shape ν >= 0 (ν = 0 selects the logarithmic-series prior)
    #[arg(long)]
    nu: f64,
    /// Prior scale q in (0,1)
    #[arg(long, default_value_t = 0.5)]
    q: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, Error> {
        ModelParams::new(self.theta, self.nu, self.q)
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical roots α_k and myopic cutoffs a_k = (1-α_k/q)+
    Roots {
        #[command(flatten)]
        model: ModelArgs,
        /// Largest trial index to solve
        #[arg(long, default_value_t = 1000)]
        kmax: usize,
        /// Bisection bracket width
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Optimal threshold of the known-n problem and its asymptotics
    Threshold {
        /// Success profile parameter θ > 0
        #[arg(long)]
        theta: f64,
        /// Trial counts to tabulate (repeatable); powers of ten by default
        #[arg(long = "n")]
        ns: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Winning probability of a strategy across the prior scale q
    Winprob {
        /// θ > 0
        #[arg(long)]
        theta: f64,
        /// ν >= 0
        #[arg(long)]
        nu: f64,
        /// Strategy: myopic | single:B | file:PATH (one cutoff per line)
        #[arg(long, default_value = "myopic")]
        strategy: String,
        #[arg(long, default_value_t = 0.1)]
        q_min: f64,
        #[arg(long, default_value_t = 0.9)]
        q_max: f64,
        #[arg(long, default_value_t = 0.1)]
        q_step: f64,
        /// Monte Carlo replicates per row
        #[arg(long, default_value_t = 200_000)]
        reps: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        /// Roots solved for the myopic strategy
        #[arg(long, default_value_t = 400)]
        kmax: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Value function grid dump: x, k, V, W0, W1 and the stopping set flag
    Value {
        #[command(flatten)]
        model: ModelArgs,
        /// Integration step (the stored grid is twice as fine)
        #[arg(long, default_value_t = 2.5e-4)]
        grid_step: f64,
        /// Trial-count levels in the recursion
        #[arg(long, default_value_t = 300)]
        kmax: usize,
        /// Emit rows for k = 0..=this
        #[arg(long, default_value_t = 10)]
        k_out: usize,
        /// Emit every this-many grid nodes
        #[arg(long, default_value_t = 4)]
        stride: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo estimate of a strategy's winning probability
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Strategy designator as in winprob
        #[arg(long, default_value = "myopic")]
        strategy: String,
        #[arg(long, default_value_t = 1_000_000)]
        reps: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        #[arg(long, default_value_t = 400)]
        kmax: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Simulate the Poisson limit problem instead (stops after `cutoff`)
        #[arg(long, default_value_t = false)]
        poisson_limit: bool,
        /// Cutoff for the Poisson limit problem (defaults to e^{-1/θ})
        #[arg(long)]
        cutoff: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write the data files behind the four figures into a directory
    Figures {
        #[command(flatten)]
        model: ModelArgs,
        /// Output directory
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long, default_value_t = 200_000)]
        reps: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,
        #[arg(long, default_value_t = 300)]
        kmax: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("LASTSTOP_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input, 3 for numerical trouble.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Domain(_) => 2,
        Error::NonConvergence { .. }
        | Error::NoSignChange { .. }
        | Error::MonotonicityMismatch { .. }
        | Error::NonMonotoneStrategy
        | Error::GridTooCoarse { .. } => 3,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Roots {
            model,
            kmax,
            tol,
            output,
        } => {
            let params = model.params()?;
            let table = roots_table(&params, kmax, tol)?;
            emit(&table, &output)
        }
        Command::Threshold { theta, ns, output } => {
            let table = threshold_table(theta, &ns)?;
            emit(&table, &output)
        }
        Command::Winprob {
            theta,
            nu,
            strategy,
            q_min,
            q_max,
            q_step,
            reps,
            seed,
            kmax,
            tol,
            output,
        } => {
            let cfg = WinprobConfig {
                theta,
                nu,
                strategy,
                q_min,
                q_max,
                q_step,
                reps,
                seed,
                kmax,
                tol,
            };
            let table = winprob_table(&cfg)?;
            emit(&table, &output)
        }
        Command::Value {
            model,
            grid_step,
            kmax,
            k_out,
            stride,
            output,
        } => {
            let params = model.params()?;
            let table = value_table(&params, grid_step, kmax, k_out, stride.max(1))?;
            emit(&table, &output)
        }
        Command::Simulate {
            model,
            strategy,
            reps,
            seed,
            kmax,
            tol,
            poisson_limit,
            cutoff,
            output,
        } => {
            let table = if poisson_limit {
                let c = cutoff.unwrap_or((-1.0 / model.theta).exp());
                if !(0.0 < c && c < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "cutoff must lie in (0,1), got {c}"
                    )));
                }
                poisson_limit_table(model.theta, c, reps, seed)
            } else {
                let params = model.params()?;
                let spec = resolve_strategy(&params, &strategy, kmax, tol)?;
                simulate_table(&params, &spec, &strategy, reps, seed)
            };
            emit(&table, &output)
        }
        Command::Figures {
            model,
            out,
            reps,
            seed,
            grid_step,
            kmax,
            tol,
        } => figures(&model, &out, reps, seed, grid_step, kmax, tol),
    }
}

fn emit(table: &Table, output: &OutputArgs) -> Result<(), Error> {
    write_table(table, output.format, output.out.as_deref())
        .map_err(|e| Error::InvalidParameter(format!("cannot write output: {e}")))
}

fn write_table(table: &Table, format: Format, path: Option<&Path>) -> std::io::Result<()> {
    match path {
        Some(p) => {
            let mut file = fs::File::create(p)?;
            table.write(format, &mut file)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write(format, &mut lock)?;
            lock.flush()
        }
    }
}

fn base_meta(table: &mut Table, command: &str, params: Option<&ModelParams>) {
    table.meta("tool", format!("laststop {VERSION}"));
    table.meta("command", command);
    if let Some(p) = params {
        table.meta("theta", p.theta());
        table.meta("nu", p.nu());
        table.meta("q", p.q());
    }
}

fn roots_table(params: &ModelParams, kmax: usize, tol: f64) -> Result<Table, Error> {
    let profile = build_profile(params, kmax, tol)?;
    let mut table = Table::new(&["k", "alpha_k", "a_k"]);
    base_meta(&mut table, "roots", Some(params));
    table.meta("kmax", kmax);
    table.meta("tol", tol);
    table.meta("monotonicity", profile.monotonicity());
    for k in 1..=kmax {
        table.row(vec![
            k.into(),
            profile.root(k).into(),
            profile.cutoff(k).into(),
        ]);
    }
    let a_star = profile.alpha_star();
    table.row(vec![
        "inf".into(),
        a_star.into(),
        (1.0 - a_star / params.q()).max(0.0).into(),
    ]);
    Ok(table)
}

fn threshold_table(theta: f64, ns: &[usize]) -> Result<Table, Error> {
    let _ = Profile::theta(theta)?;
    let default_ns: Vec<usize> = (1..=6).map(|e| 10usize.pow(e)).collect();
    let ns = if ns.is_empty() { &default_ns } else { ns };
    let mut table = Table::new(&["n", "k_n", "kn_over_n", "win_prob"]);
    table.meta("tool", format!("laststop {VERSION}"));
    table.meta("command", "threshold");
    table.meta("theta", theta);
    for &n in ns {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        let profile = Profile::theta(theta)?;
        let kn = profile.threshold_kn(n);
        let point = asymptotic_check(theta, n)?;
        table.row(vec![
            n.into(),
            kn.into(),
            point.kn_over_n.into(),
            point.win_prob.into(),
        ]);
    }
    Ok(table)
}

fn resolve_strategy(
    params: &ModelParams,
    designator: &str,
    kmax: usize,
    tol: f64,
) -> Result<StrategySpec, Error> {
    if designator == "myopic" {
        return Ok(build_profile(params, kmax, tol)?.myopic_strategy());
    }
    if let Some(b) = designator.strip_prefix("single:") {
        let b: f64 = b
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad cutoff in '{designator}'")))?;
        return StrategySpec::single(b);
    }
    if let Some(path) = designator.strip_prefix("file:") {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {path}: {e}")))?;
        let cutoffs: Result<Vec<f64>, _> = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad cutoff '{tok}' in {path}")))
            })
            .collect();
        let cutoffs = cutoffs?;
        let tail = *cutoffs
            .last()
            .ok_or_else(|| Error::InvalidParameter(format!("{path} holds no cutoffs")))?;
        let spec = StrategySpec::from_cutoffs(cutoffs, tail)?;
        return Ok(spec);
    }
    Err(Error::InvalidParameter(format!(
        "unknown strategy '{designator}' (expected myopic | single:<b> | file:<path>)"
    )))
}

struct WinprobConfig {
    theta: f64,
    nu: f64,
    strategy: String,
    q_min: f64,
    q_max: f64,
    q_step: f64,
    reps: usize,
    seed: u64,
    kmax: usize,
    tol: f64,
}

fn winprob_table(cfg: &WinprobConfig) -> Result<Table, Error> {
    if !(cfg.q_step > 0.0 && cfg.q_min > 0.0 && cfg.q_max < 1.0 && cfg.q_min <= cfg.q_max) {
        return Err(Error::InvalidParameter(
            "need 0 < q_min <= q_max < 1 and q_step > 0".into(),
        ));
    }
    let mut table = Table::new(&["q", "win_prob", "win_prob_v2", "mc_estimate", "mc_se"]);
    table.meta("tool", format!("laststop {VERSION}"));
    table.meta("command", "winprob");
    table.meta("theta", cfg.theta);
    table.meta("nu", cfg.nu);
    table.meta("strategy", &cfg.strategy);
    table.meta("reps", cfg.reps);
    table.meta("seed", cfg.seed);
    let myopic_formula_ok = cfg.strategy != "myopic" || cfg.nu >= cfg.theta;
    if !myopic_formula_ok {
        table.meta(
            "note",
            "myopic cutoffs are not monotone for nu < theta: formula columns omitted, \
             Monte Carlo only",
        );
    }
    if cfg.nu == 0.0 {
        table.meta(
            "note",
            "state-based formula needs nu > 0: win_prob_v2 column omitted",
        );
    }
    // boundary row: no trials ever arrive at q = 0
    table.row(vec![
        0.0.into(),
        0.0.into(),
        0.0.into(),
        0.0.into(),
        0.0.into(),
    ]);
    let steps = ((cfg.q_max - cfg.q_min) / cfg.q_step).round() as usize;
    for i in 0..=steps {
        let q = cfg.q_min + cfg.q_step * i as f64;
        if q >= 1.0 {
            break;
        }
        let params = ModelParams::new(cfg.theta, cfg.nu, q)?;
        let spec = resolve_strategy(&params, &cfg.strategy, cfg.kmax, cfg.tol)?;
        let (formula, formula_v2) = if spec.is_monotone() {
            let wp = win_prob(&params, &spec)?;
            if wp.tail_bound > 1e-10 {
                table.meta(
                    "warning",
                    format!(
                        "prior sum truncated at n = {} with tail mass {:.3e} (q = {q})",
                        wp.n_max, wp.tail_bound
                    ),
                );
            }
            let b = if cfg.nu > 0.0 {
                Cell::Num(win_prob_v2(&params, &spec, 1e-9)?)
            } else {
                Cell::Missing
            };
            (Cell::Num(wp.value), b)
        } else {
            (Cell::Missing, Cell::Missing)
        };
        let mc = sim::estimate_win(&params, &spec, cfg.reps, cfg.seed.wrapping_add(i as u64));
        table.row(vec![
            q.into(),
            formula,
            formula_v2,
            mc.estimate.into(),
            mc.std_error.into(),
        ]);
    }
    Ok(table)
}

fn value_table(
    params: &ModelParams,
    grid_step: f64,
    kmax: usize,
    k_out: usize,
    stride: usize,
) -> Result<Table, Error> {
    let grid = solve_value(params, params.q(), grid_step, kmax)?;
    let mut table = Table::new(&["x", "k", "V", "W0", "W1", "in_C"]);
    base_meta(&mut table, "value", Some(params));
    table.meta("grid_step", grid.step());
    table.meta("kmax", kmax);
    for k in 0..=k_out.min(grid.k_max().saturating_sub(1)) {
        for i in (0..grid.n_nodes()).step_by(stride) {
            let x = grid.grid_x(i);
            let (w0v, w1v) = if k >= 1 {
                (grid.w0_on_grid(i, k), w1(params, x, k)?)
            } else {
                (w0(params, x, 0)?, w1(params, x, 0)?)
            };
            let in_c = k >= 1 && x <= grid.optimal_root(k);
            table.row(vec![
                x.into(),
                k.into(),
                grid.value(x, k).into(),
                w0v.into(),
                w1v.into(),
                (in_c as usize).into(),
            ]);
        }
    }
    Ok(table)
}

fn simulate_table(
    params: &ModelParams,
    spec: &StrategySpec,
    designator: &str,
    reps: usize,
    seed: u64,
) -> Table {
    let report = sim::estimate_win(params, spec, reps, seed);
    let mut table = Table::new(&["reps", "wins", "estimate", "std_error", "seed"]);
    base_meta(&mut table, "simulate", Some(params));
    table.meta("strategy", designator);
    table.row(vec![
        report.reps.into(),
        report.wins.into(),
        report.estimate.into(),
        report.std_error.into(),
        report.seed.into(),
    ]);
    table
}

fn poisson_limit_table(theta: f64, cutoff: f64, reps: usize, seed: u64) -> Table {
    let report = sim::simulate_poisson_limit(theta, cutoff, reps, seed);
    let mut table = Table::new(&[
        "cutoff",
        "estimate",
        "std_error",
        "analytic",
        "reps",
        "seed",
    ]);
    table.meta("tool", format!("laststop {VERSION}"));
    table.meta("command", "simulate --poisson-limit");
    table.meta("theta", theta);
    table.row(vec![
        cutoff.into(),
        report.estimate.into(),
        report.std_error.into(),
        (-theta * cutoff.powf(theta) * cutoff.ln()).into(),
        report.reps.into(),
        report.seed.into(),
    ]);
    table
}

#[allow(clippy::too_many_arguments)]
fn figures(
    model: &ModelArgs,
    dir: &Path,
    reps: usize,
    seed: u64,
    grid_step: f64,
    kmax: usize,
    tol: f64,
) -> Result<(), Error> {
    let params = model.params()?;
    fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidParameter(format!("cannot create {dir:?}: {e}")))?;
    let cfg = HypConfig::default();
    let ks = [1usize, 2, 3, 5, 10];

    // fig1: both sides of the root equation per k
    let mut fig1 = Table::new(&["k", "x", "lhs", "rhs"]);
    base_meta(&mut fig1, "figures fig1", Some(&params));
    for &k in &ks {
        for i in 1..197 {
            let x = i as f64 * 0.005;
            let args = HypArgs::new(
                params.theta(),
                params.theta() - params.nu(),
                params.theta() + k as f64,
                x,
            )?;
            let lhs = da_hyp2f1(args, &cfg)? / hyp2f1(args, &cfg)?;
            let rhs = -1.0 / params.theta() - (1.0 - x).ln();
            fig1.row(vec![k.into(), x.into(), lhs.into(), rhs.into()]);
        }
    }
    write_file(&fig1, dir, "fig1.csv")?;

    // fig2: the two adapted rewards per k
    let mut fig2 = Table::new(&["k", "x", "W0", "W1"]);
    base_meta(&mut fig2, "figures fig2", Some(&params));
    for &k in &ks {
        for i in 0..199 {
            let x = i as f64 * 0.005;
            fig2.row(vec![
                k.into(),
                x.into(),
                w0(&params, x, k)?.into(),
                w1(&params, x, k)?.into(),
            ]);
        }
    }
    write_file(&fig2, dir, "fig2.csv")?;

    // fig3: winning probability as a function of q (same writer as winprob)
    let fig3 = winprob_table(&WinprobConfig {
        theta: params.theta(),
        nu: params.nu(),
        strategy: "myopic".into(),
        q_min: 0.1,
        q_max: 0.9,
        q_step: 0.1,
        reps,
        seed,
        kmax,
        tol,
    })?;
    write_file(&fig3, dir, "fig3.csv")?;

    // fig4: value surface
    let fig4 = value_table(&params, grid_step, kmax, 5, 4)?;
    write_file(&fig4, dir, "fig4.csv")?;
    Ok(())
}

fn write_file(table: &Table, dir: &Path, name: &str) -> Result<(), Error> {
    write_table(table, Format::Csv, Some(&dir.join(name)))
        .map_err(|e| Error::InvalidParameter(format!("cannot write {name}: {e}")))
}
