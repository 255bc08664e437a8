use std::f64::consts::PI;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use onebit::bounds::{self, BoundReport};
use onebit::checks::{self, CheckOptions};
use onebit::posterior::{GridDensity, PriorSpec, DEFAULT_GRID_POINTS, DEFAULT_TAIL_MASS};
use onebit::sim::{self, RiskCurve, SimConfig};
use onebit::{config, Error, Result};

/// Adaptive one-bit Gaussian mean estimation: simulations, bounds and checks.
#[derive(Debug, Parser)]
#[command(name = "onebit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write its risk curve as CSV.
    Simulate(SimulateArgs),
    /// Print lower and upper risk bounds as CSV.
    Bounds(BoundsArgs),
    /// Run the randomized Fisher-information and bound property checks.
    Check(CheckArgs),
    /// Solve the threshold equation of a log-concave density.
    FixedPoint(FixedPointArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Config file with one `key = value` per line.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the CSV.
    #[arg(long)]
    out: PathBuf,
    /// Override the noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<u64>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the step-size exponent of sign-SGD.
    #[arg(long)]
    beta: Option<f64>,
    /// Override the number of samples per trial.
    #[arg(long)]
    n_max: Option<u64>,
    /// Worker threads; defaults to ONEBIT_WORKERS, else one per core.
    #[arg(long)]
    workers: Option<usize>,
    /// Print the resolved config and timing to stderr.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Noise standard deviation.
    #[arg(long)]
    sigma: f64,
    /// Prior standard deviation, used by the CEO bounds.
    #[arg(long)]
    sigma_theta: Option<f64>,
    /// Prior Fisher information for the van Trees bound.
    #[arg(long)]
    i0: Option<f64>,
    /// Prior to take the Fisher information from, e.g. "cosine-squared 0 3".
    #[arg(long)]
    prior: Option<PriorSpec>,
    /// Sample sizes, comma separated [default: 10,100,...,1000000].
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Random vectors for the alternating-sum bound (a tenth as many unions).
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slack allowed above the 2/π ceiling.
    #[arg(long, default_value_t = 1e-9, allow_negative_numbers = true)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct FixedPointArgs {
    /// Prior density, e.g. "gaussian 0 1", "uniform 0 1", "cosine-squared 0 3".
    #[arg(long, required_unless_present = "density_csv", conflicts_with = "density_csv")]
    prior: Option<PriorSpec>,
    /// Tabulated density with header `t,density` on an equispaced grid.
    #[arg(long)]
    density_csv: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_m: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Bounds(args) => bounds_cmd(args),
        Command::Check(args) => check(args),
        Command::FixedPoint(args) => fixed_point(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            // sources are already part of the message
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var("ONEBIT_WORKERS") {
        Ok(v) => v.trim().parse().map_err(|_| Error::InvalidParameter {
            name: "ONEBIT_WORKERS",
            reason: format!("`{v}` is not a worker count"),
        }),
        Err(_) => Ok(0),
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let mut cfg: SimConfig = config::load_unchecked(&args.config)?;
    if let Some(v) = args.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.n_max {
        cfg.n_max = v;
        cfg.checkpoints.retain(|&n| n <= v);
        if cfg.checkpoints.last() != Some(&v) && v > 0 {
            cfg.checkpoints.push(v);
        }
    }
    cfg.validate()?;
    let workers = workers(args.workers)?;
    if args.verbose {
        eprintln!("{cfg:#?}");
        eprintln!("workers: {}", if workers == 0 { "all cores".into() } else { workers.to_string() });
    }
    let start = Instant::now();
    let curve = sim::run_monte_carlo(&cfg, workers)?;
    if args.verbose {
        eprintln!("elapsed: {:.2?}", start.elapsed());
    }
    curve.export_csv(&args.out)?;
    print_summary(&cfg, &curve);
    Ok(ExitCode::SUCCESS)
}

fn print_summary(cfg: &SimConfig, curve: &RiskCurve) {
    let s2 = cfg.sigma * cfg.sigma;
    println!("{:<16} {:>8} {:>12} {:>12} {:>12}", "scheme", "n", "n*mse", "stderr", "n*mse/s^2");
    for (scheme, points) in &curve.points {
        if let Some(p) = points.last() {
            let n = p.n as f64;
            println!(
                "{:<16} {:>8} {:>12.6} {:>12.6} {:>12.6}",
                scheme.name(),
                p.n,
                p.n_mse,
                n * p.stderr,
                p.n_mse / s2
            );
        }
    }
    println!("reference pi*sigma^2/2 = {:.6}", PI * s2 / 2.0);
    if let Ok(i0) = cfg.prior.fisher_info() {
        let n = cfg.n_max;
        if let Ok(vt) = bounds::van_trees_bound(n, cfg.sigma, i0) {
            println!("van Trees n*bound at n = {n}: {:.6}", n as f64 * vt);
        }
    }
}

fn bounds_cmd(args: BoundsArgs) -> Result<ExitCode> {
    let ns = if args.n.is_empty() {
        (1..=6).map(|k| 10u64.pow(k)).collect()
    } else {
        args.n
    };
    let i0 = match (args.i0, &args.prior, args.sigma_theta) {
        (Some(i0), ..) => Some(i0),
        (None, Some(prior), _) => Some(prior.fisher_info()?),
        (None, None, Some(st)) => Some(1.0 / (st * st)),
        (None, None, None) => {
            return Err(Error::InvalidParameter {
                name: "i0",
                reason: "give --i0, --prior or --sigma-theta".into(),
            })
        }
    };
    let report = BoundReport::compute(&ns, args.sigma, args.sigma_theta, i0)?;
    let stdout = std::io::stdout();
    report
        .write_csv(stdout.lock())
        .map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?;
    Ok(ExitCode::SUCCESS)
}

fn check(args: CheckArgs) -> Result<ExitCode> {
    let opts = CheckOptions {
        samples: args.samples,
        seed: args.seed,
        tolerance: args.tolerance,
    };
    let outcomes = checks::run_all(&opts);
    let mut out = std::io::stdout().lock();
    for o in &outcomes {
        let _ = writeln!(out, "{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(out, "{} of {} properties passed", outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn fixed_point(args: FixedPointArgs) -> Result<ExitCode> {
    let density = match (&args.prior, &args.density_csv) {
        (Some(prior), _) => prior.to_grid(args.grid_m, DEFAULT_TAIL_MASS)?,
        (None, Some(path)) => {
            let file = std::fs::File::open(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            GridDensity::read_csv(BufReader::new(file))?
        }
        (None, None) => unreachable!("clap requires one of the two"),
    };
    if !density.is_log_concave() {
        return Err(Error::NotLogConcave {
            max_second_difference: density.max_second_difference(),
        });
    }
    let fp = density.fixed_point()?;
    println!("tau      {:.12}", fp.tau);
    println!("m_minus  {:.12}", fp.m_minus);
    println!("m_plus   {:.12}", fp.m_plus);
    println!("residual {:.3e}", fp.residual);
    Ok(ExitCode::SUCCESS)
}
