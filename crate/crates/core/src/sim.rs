//! Monte Carlo risk curves.
//!
//! Each trial draws θ from the prior and one sample stream X₁, X₂, … from
//! N(θ, σ²), and feeds the same stream to every enabled scheme. Trials are
//! seeded independently from the master seed, so the aggregated curve does
//! not depend on how trials are scheduled across workers.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoders::{Averaging, BayesScheme, RunningMean, SignSgd};
use crate::error::{Error, Result};
use crate::math::{self, compensated_sum, GammaSchedule};
use crate::posterior::{csv_error, GridDensity, PriorSpec, DEFAULT_GRID_POINTS, DEFAULT_TAIL_MASS};

pub const DEFAULT_BAYES_CAP: u64 = 10_000;
pub const CHECKPOINTS_PER_DECADE: u32 = 20;

/// Variants are ordered by their CSV names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Bayes,
    EmpiricalMean,
    Sgd,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Bayes, Scheme::EmpiricalMean, Scheme::Sgd];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bayes => "bayes",
            Scheme::EmpiricalMean => "empirical_mean",
            Scheme::Sgd => "sgd",
        }
    }

    /// Whether the scheme sees only one bit per sample.
    pub fn is_one_bit(self) -> bool {
        !matches!(self, Scheme::EmpiricalMean)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sgd" => Ok(Scheme::Sgd),
            "bayes" => Ok(Scheme::Bayes),
            "empirical_mean" | "mean" => Ok(Scheme::EmpiricalMean),
            other => Err(Error::invalid("schemes", format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub prior: PriorSpec,
    pub sigma: f64,
    pub n_max: u64,
    pub checkpoints: Vec<u64>,
    pub trials: u64,
    pub beta: f64,
    pub grid_m: usize,
    pub schemes: Vec<Scheme>,
    pub master_seed: u64,
    /// Starting point of the sign-SGD recursion; the prior mean by default.
    pub theta0: f64,
    pub averaging: Averaging,
    pub burn_in: u64,
    /// The Bayes scheme stops after this many samples.
    pub bayes_cap: u64,
    pub tail_mass: f64,
}

impl SimConfig {
    /// All schemes, 500 trials, β = 0.8 and log-spaced checkpoints up to
    /// `n_max`.
    pub fn new(prior: PriorSpec, sigma: f64, n_max: u64) -> Self {
        Self {
            theta0: prior.mean(),
            prior,
            sigma,
            n_max,
            checkpoints: default_checkpoints(n_max),
            trials: 500,
            beta: 0.8,
            grid_m: DEFAULT_GRID_POINTS,
            schemes: Scheme::ALL.to_vec(),
            master_seed: 0,
            averaging: Averaging::PostUpdate,
            burn_in: 0,
            bayes_cap: DEFAULT_BAYES_CAP,
            tail_mass: DEFAULT_TAIL_MASS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("{} must be positive", self.sigma)));
        }
        if self.n_max == 0 {
            return Err(Error::invalid("n_max", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::invalid("checkpoints", "empty"));
        }
        if self.checkpoints[0] == 0 || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("checkpoints", "must be positive and strictly increasing"));
        }
        if *self.checkpoints.last().unwrap() > self.n_max {
            return Err(Error::invalid("checkpoints", format!("exceed n_max = {}", self.n_max)));
        }
        if self.schemes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("schemes", "must be sorted and distinct"));
        }
        if !self.theta0.is_finite() {
            return Err(Error::invalid("theta0", "not finite"));
        }
        GammaSchedule::new(self.beta)?;
        if self.schemes.contains(&Scheme::Bayes) {
            if self.bayes_cap == 0 {
                return Err(Error::invalid("bayes_cap", "must be at least 1"));
            }
            self.prior.to_grid(self.grid_m, self.tail_mass)?;
        }
        Ok(())
    }

    fn checkpoints_for(&self, scheme: Scheme) -> impl Iterator<Item = u64> + '_ {
        let cap = match scheme {
            Scheme::Bayes => self.bayes_cap,
            _ => u64::MAX,
        };
        self.checkpoints.iter().copied().take_while(move |&n| n <= cap)
    }
}

/// round(10^(k/20)) for k = 0, 1, …, deduplicated and cut at `n_max`, which
/// is always included.
pub fn default_checkpoints(n_max: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for k in 0.. {
        let n = 10f64.powf(k as f64 / CHECKPOINTS_PER_DECADE as f64).round() as u64;
        if n >= n_max {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
    }
    if n_max > 0 {
        out.push(n_max);
    }
    out
}

/// Per-trial seed: the splitmix64 output function applied to
/// `master_seed + (trial_index + 1)·0x9E3779B97F4A7C15` (wrapping).
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(trial_index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on (0, 1) from the top 53 bits.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: u64,
    pub theta: f64,
    /// (θ̂ₙ − θ)² at each checkpoint the scheme reached.
    pub squared_errors: BTreeMap<Scheme, Vec<(u64, f64)>>,
}

/// Runs one trial. `prior_grid` is the discretized prior used by the Bayes
/// scheme; [`run_monte_carlo`] builds it once and shares it across trials.
pub fn run_trial(config: &SimConfig, trial_index: u64, prior_grid: Option<&GridDensity>) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.master_seed, trial_index));
    let theta = config.prior.quantile(open_unit(&mut rng));
    let enabled = |s| config.schemes.contains(&s);

    let mut sgd = if enabled(Scheme::Sgd) {
        Some(
            SignSgd::new(config.theta0, GammaSchedule::new(config.beta)?)?
                .with_averaging(config.averaging)
                .with_burn_in(config.burn_in),
        )
    } else {
        None
    };
    let mut bayes = if enabled(Scheme::Bayes) {
        let grid = match prior_grid {
            Some(g) => g.clone(),
            None => config.prior.to_grid(config.grid_m, config.tail_mass)?,
        };
        Some(BayesScheme::from_density(grid)?)
    } else {
        None
    };
    let mut mean = enabled(Scheme::EmpiricalMean).then(RunningMean::default);

    let mut squared_errors: BTreeMap<Scheme, Vec<(u64, f64)>> =
        config.schemes.iter().map(|&s| (s, Vec::new())).collect();
    let mut record = |s: Scheme, n: u64, est: f64| {
        let e = est - theta;
        squared_errors.get_mut(&s).expect("enabled scheme").push((n, e * e));
    };

    let mut next = config.checkpoints.iter().copied().peekable();
    for n in 1..=config.n_max {
        let x = theta + config.sigma * math::std_normal_quantile(open_unit(&mut rng));
        if let Some(s) = sgd.as_mut() {
            s.step(x);
        }
        if let Some(b) = bayes.as_mut() {
            if n <= config.bayes_cap {
                b.step(x, config.sigma)?;
            }
        }
        if let Some(m) = mean.as_mut() {
            m.push(x);
        }
        if next.peek() == Some(&n) {
            next.next();
            if let Some(s) = &sgd {
                record(Scheme::Sgd, n, s.estimate()?);
            }
            if let Some(b) = &bayes {
                if n <= config.bayes_cap {
                    record(Scheme::Bayes, n, b.estimate());
                }
            }
            if let Some(m) = &mean {
                record(Scheme::EmpiricalMean, n, m.mean()?);
            }
        }
    }
    Ok(TrialResult {
        trial_index,
        theta,
        squared_errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskPoint {
    pub n: u64,
    pub mse: f64,
    /// Sample standard deviation of the squared errors over √trials.
    pub stderr: f64,
    pub n_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskCurve {
    pub points: BTreeMap<Scheme, Vec<RiskPoint>>,
}

impl RiskCurve {
    /// Reduces trials in index order, so the result does not depend on how
    /// they were computed.
    pub fn from_trials(config: &SimConfig, trials: &[TrialResult]) -> Self {
        let mut points = BTreeMap::new();
        for &scheme in &config.schemes {
            let curve = config
                .checkpoints_for(scheme)
                .enumerate()
                .map(|(k, n)| {
                    let errs: Vec<f64> = trials.iter().map(|t| t.squared_errors[&scheme][k].1).collect();
                    summarize(n, &errs)
                })
                .collect();
            points.insert(scheme, curve);
        }
        Self { points }
    }

    pub fn at(&self, scheme: Scheme, n: u64) -> Option<&RiskPoint> {
        self.points.get(&scheme)?.iter().find(|p| p.n == n)
    }

    pub fn last(&self, scheme: Scheme) -> Option<&RiskPoint> {
        self.points.get(&scheme)?.last()
    }

    /// CSV with header `n,scheme,mse,stderr,n_mse`, rows sorted by scheme
    /// name then n, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,scheme,mse,stderr,n_mse")?;
        for (scheme, curve) in &self.points {
            for p in curve {
                writeln!(out, "{},{},{:.16e},{:.16e},{:.16e}", p.n, scheme, p.mse, p.stderr, p.n_mse)?;
            }
        }
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = reader.headers().map_err(csv_error)?;
        if header != vec!["n", "scheme", "mse", "stderr", "n_mse"] {
            return Err(Error::Csv {
                line: 1,
                reason: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut points: BTreeMap<Scheme, Vec<RiskPoint>> = BTreeMap::new();
        for record in reader.deserialize::<(u64, String, f64, f64, f64)>() {
            let (n, scheme, mse, stderr, n_mse) = record.map_err(csv_error)?;
            let scheme: Scheme = scheme.parse().map_err(|e: Error| Error::Csv {
                line: points.values().map(Vec::len).sum::<usize>() + 2,
                reason: e.to_string(),
            })?;
            points.entry(scheme).or_default().push(RiskPoint { n, mse, stderr, n_mse });
        }
        Ok(Self { points })
    }
}

fn summarize(n: u64, errs: &[f64]) -> RiskPoint {
    let t = errs.len() as f64;
    let mse = compensated_sum(errs.iter().copied()) / t;
    let stderr = if errs.len() > 1 {
        let ss = compensated_sum(errs.iter().map(|e| (e - mse) * (e - mse)));
        (ss / (t - 1.0)).sqrt() / t.sqrt()
    } else {
        0.0
    };
    RiskPoint {
        n,
        mse,
        stderr,
        n_mse: n as f64 * mse,
    }
}

/// Runs all trials on a pool of `workers` threads (0 means one per core)
/// and aggregates them. The first failing trial, by index, aborts the run.
pub fn run_monte_carlo(config: &SimConfig, workers: usize) -> Result<RiskCurve> {
    config.validate()?;
    let grid = if config.schemes.contains(&Scheme::Bayes) {
        Some(config.prior.to_grid(config.grid_m, config.tail_mass)?)
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let results: Vec<Result<TrialResult>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                run_trial(config, i, grid.as_ref()).map_err(|e| Error::Trial {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RiskCurve::from_trials(config, &trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        let mut c = SimConfig::new(PriorSpec::uniform(-3.0, 3.0).unwrap(), 1.0, 200);
        c.trials = 8;
        c.grid_m = 512;
        c.master_seed = 11;
        c
    }

    #[test]
    fn sgd_starts_at_the_prior_mean() {
        let c = SimConfig::new(PriorSpec::gaussian(2.5, 1.0).unwrap(), 1.0, 10);
        assert_eq!(c.theta0, 2.5);
    }

    #[test]
    fn checkpoint_grid() {
        let c = default_checkpoints(1000);
        assert_eq!(&c[..4], &[1, 2, 3, 4]);
        assert_eq!(*c.last().unwrap(), 1000);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c.contains(&100) && c.contains(&178));
        assert_eq!(default_checkpoints(1), vec![1]);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(trial_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| trial_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(trial_seed(1, 0), trial_seed(0, 0));
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = small_config();
        c.sigma = 0.0;
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "sigma", .. })));
        let mut c = small_config();
        c.checkpoints = vec![10, 10];
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "checkpoints", .. })));
        let mut c = small_config();
        c.checkpoints = vec![500];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.trials = 0;
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "trials", .. })));
        let mut c = small_config();
        c.beta = 1.2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn trial_is_reproducible() {
        let c = small_config();
        let a = run_trial(&c, 3, None).unwrap();
        let b = run_trial(&c, 3, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.theta, run_trial(&c, 4, None).unwrap().theta);
        for errs in a.squared_errors.values() {
            assert_eq!(errs.len(), c.checkpoints.len());
            assert!(errs.iter().all(|&(_, e)| e >= 0.0));
        }
    }

    #[test]
    fn bayes_stops_at_cap() {
        let mut c = small_config();
        c.bayes_cap = 50;
        let t = run_trial(&c, 0, None).unwrap();
        assert_eq!(t.squared_errors[&Scheme::Bayes].last().unwrap().0, 50);
        let curve = RiskCurve::from_trials(&c, &[t]);
        assert_eq!(curve.last(Scheme::Bayes).unwrap().n, 50);
        assert_eq!(curve.last(Scheme::Sgd).unwrap().n, 200);
    }

    #[test]
    fn single_trial_curve_is_the_trial() {
        let mut c = small_config();
        c.trials = 1;
        let curve = run_monte_carlo(&c, 1).unwrap();
        let t = run_trial(&c, 0, Some(&c.prior.to_grid(c.grid_m, c.tail_mass).unwrap())).unwrap();
        for (scheme, errs) in &t.squared_errors {
            for (p, &(n, e)) in curve.points[scheme].iter().zip(errs) {
                assert_eq!((p.n, p.mse, p.stderr), (n, e, 0.0));
                assert_eq!(p.n_mse, n as f64 * e);
            }
        }
    }

    #[test]
    fn worker_count_does_not_matter() {
        let c = small_config();
        assert_eq!(run_monte_carlo(&c, 1).unwrap(), run_monte_carlo(&c, 3).unwrap());
    }

    #[test]
    fn one_sample_mean_error_is_chi_squared() {
        let mut c = SimConfig::new(PriorSpec::gaussian(0.0, 1.0).unwrap(), 2.0, 1);
        c.schemes = vec![Scheme::EmpiricalMean];
        c.trials = 10_000;
        let p = run_monte_carlo(&c, 1).unwrap().points[&Scheme::EmpiricalMean][0];
        // σ²χ²₁: mean σ², variance 2σ⁴
        assert!((p.mse - 4.0).abs() < 4.0 * p.stderr);
        let expected_se = (2.0f64).sqrt() * 4.0 / 100.0;
        assert!((p.stderr / expected_se - 1.0).abs() < 0.1);
    }

    #[test]
    fn csv_round_trip() {
        let c = small_config();
        let curve = run_monte_carlo(&c, 1).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert_eq!(RiskCurve::read_csv(buf.as_slice()).unwrap(), curve);

        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        let keys: Vec<(String, u64)> = rows
            .iter()
            .map(|r| {
                let cols: Vec<&str> = r.split(',').collect();
                (cols[1].to_string(), cols[0].parse().unwrap())
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn csv_shapes() {
        let mut buf = Vec::new();
        RiskCurve::default().write_csv(&mut buf).unwrap();
        assert_eq!(buf, b"n,scheme,mse,stderr,n_mse\n");

        let mut c = small_config();
        c.schemes = vec![Scheme::Sgd];
        c.checkpoints = vec![10, 100];
        let mut buf = Vec::new();
        run_monte_carlo(&c, 1).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
        assert!(RiskCurve::read_csv("n,scheme\n".as_bytes()).is_err());
        assert!(RiskCurve::read_csv("n,scheme,mse,stderr,n_mse\n1,sgd,x,0,0\n".as_bytes()).is_err());
    }
}
