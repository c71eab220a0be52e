use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "gslap-bench",
    version,
    about = "Convergence-zone and pricing experiments for the Gaver-Stehfest Laplace solvers",
    after_help = "Every subcommand writes CSV with a fixed header (see each subcommand's --help) \
                  to --out or stdout. Exit status is 0 when the run completed, 2 on usage \
                  errors and 1 when a file cannot be read or written; numerical outcomes are \
                  reported in the CSV only."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaver-Stehfest weights, exact and rounded.
    #[command(after_help = "CSV header: i,exact,float")]
    Coeffs(CommonArgs),

    /// Classify each (T, p) cell as convergent, inaccurate, divergent or max-iters.
    #[command(after_help = SCAN_HELP)]
    Scan(CommonArgs),

    /// Synchronous versus asynchronous option prices.
    #[command(after_help = PRICE_HELP)]
    Price(PriceArgs),

    /// Linear-mode errors against the closed-form Black-Scholes price.
    #[command(after_help = ERRORS_HELP)]
    Errors(CommonArgs),

    /// Successive solves over n slices of length dT.
    #[command(after_help = STEPS_HELP)]
    Steps(StepsArgs),
}

const SCAN_HELP: &str = "\
CSV header: method,T,p,status,error,iterations,wall_ms,seeds,converged_seeds,detail

status is one of convergent, inaccurate, divergent, max-iters, error. error is the
normwise relative price error max|V - V_ref| / max|V_ref| over S/E in {0.4, 1, 1.2, 2}.
The reference is the closed-form Black-Scholes price in linear mode (and always for
--method direct) and a synchronous p=8 solution on a twice finer grid otherwise,
cached under --cache-dir. A converged run with error above 1e-3 is inaccurate.
For async scans a cell is convergent only if every seed is.";

const PRICE_HELP: &str = "\
CSV header: S,E,seed,V_sync,V_async,eps_abs,eps_rel,sync_status,async_status

eps_abs = |V_sync - V_async|, eps_rel = eps_abs / V_sync. Without --S/--E the four
pairs (60,50) (100,50) (20,30) (20,50) are priced. --trace FILE writes the async
trace of the first seed in the line format:
  # gslap async trace v1
  # p=.. nodes=.. tau=0x.. kappa=0x.. simulated=0|1 max_delay=.. window=..|-
  step,worker,k,residual,stamps,rho
with stamps and rho as ';'-separated lists, one entry per worker.";

const ERRORS_HELP: &str = "\
CSV header: T,p,S,V,oracle,abs_err,rel_err

One row per (T, p, S) with S/E in {0.4, 1, 1.2, 2}; rel_err = abs_err / oracle.
Uses --method direct by default; --method sync runs the iteration with constant volatility.";

const STEPS_HELP: &str = "\
CSV header: step,t_start,t_end,status,iterations,last_residual,V,residuals

V is the price at --S after the step; residuals is the ';'-separated residual history.
--trace PREFIX writes PREFIX-first.trace and PREFIX-last.trace for async runs.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Sync,
    Async,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Sync => "sync",
            Method::Async => "async",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Constant volatility sigma [default 0.3]
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Risk-free rate [default 0.05]
    #[arg(long)]
    pub r: Option<f64>,

    /// Strike price, or a comma list for `price` [default 50]
    #[arg(long = "E")]
    pub strike: Option<String>,

    /// Maturity in years, or a comma list for scans [default 1]
    #[arg(long = "T")]
    pub maturity: Option<String>,

    /// Number of terms: `6`, `4,8` or `start:step:end` [default 6]
    #[arg(long)]
    pub p: Option<String>,

    /// Interior grid nodes [default 1199]
    #[arg(long = "grid-n")]
    pub grid_n: Option<usize>,

    /// Half width of the log-price domain [default 6]
    #[arg(long = "x-max")]
    pub x_max: Option<f64>,

    /// Residual threshold [default 1e-3]
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Iteration cap [default 1000]
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,

    /// Base seed for simulated async runs [default 0]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of seeds (seed, seed+1, ...) [default 1]
    #[arg(long)]
    pub seeds: Option<usize>,

    /// Constant volatility instead of the implied-volatility coefficient
    #[arg(long)]
    pub linear: bool,

    /// Solver
    #[arg(long, alias = "mode", value_enum)]
    pub method: Option<Method>,

    /// Simulated asynchronous schedule (default)
    #[arg(long, conflicts_with = "concurrent")]
    pub sim: bool,

    /// One OS thread per worker instead of the simulated schedule
    #[arg(long)]
    pub concurrent: bool,

    /// Maximum message delay in global steps [default 3]
    #[arg(long = "delay-D")]
    pub delay: Option<u64>,

    /// Fairness window; every worker updates in each window of W activations [default 2p]
    #[arg(long = "window-W")]
    pub window: Option<usize>,

    /// Where to write the CSV (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// TOML file with defaults for any of the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Directory for cached quasilinear reference solutions
    #[arg(long = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Spot prices, paired with the --E list
    #[arg(long = "S")]
    pub spot: Option<String>,

    /// Async trace output
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StepsArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Slice length in years [default 0.1]
    #[arg(long = "dT")]
    pub delta_t: Option<f64>,

    /// Number of slices [default 10]
    #[arg(long)]
    pub n: Option<usize>,

    /// Spot price reported after each slice [default 60]
    #[arg(long = "S")]
    pub spot: Option<f64>,

    /// Prefix for async traces of the first and last slice
    #[arg(long)]
    pub trace: Option<PathBuf>,
}
