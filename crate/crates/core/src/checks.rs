//! Randomized property suites for the Fisher-information and bound
//! evaluators. Used by the `check` subcommand and the acceptance target.

use std::f64::consts::FRAC_2_PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{self, BoundReport};
use crate::math::{std_normal_cdf, std_normal_quantile};

pub const SIGMAS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Random vectors for the alternating-sum bound; a tenth as many
    /// interval unions are drawn.
    pub samples: usize,
    pub seed: u64,
    /// Slack allowed above 2/π. A negative value forces failures.
    pub tolerance: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    /// Worst value seen, compared against `limit`.
    pub observed: f64,
    pub limit: f64,
    pub passed: bool,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{tag}] {:<32} worst {:.10e}  limit {:.10e}",
            self.name, self.observed, self.limit
        )
    }
}

fn outcome(name: &'static str, observed: f64, limit: f64) -> Outcome {
    Outcome {
        name,
        observed,
        limit,
        passed: observed <= limit,
    }
}

fn normal(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    scale * std_normal_quantile(rng.gen_range(f64::EPSILON..1.0))
}

/// Random vectors of length 1..=6 with N(0, 3²) entries, sorted descending.
/// Reports the largest value of the alternating-sum ratio.
pub fn alternating_sum_bound(samples: usize, seed: u64, tolerance: f64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut xs = Vec::with_capacity(6);
    for _ in 0..samples {
        xs.clear();
        let len = rng.gen_range(1..=6);
        xs.extend((0..len).map(|_| normal(&mut rng, 3.0)));
        xs.sort_by(|a, b| b.total_cmp(a));
        let v = bounds::alternating_sum_ratio(&xs).expect("sorted finite input").value;
        worst = worst.max(v);
    }
    outcome("alternating-sum max", worst, FRAC_2_PI + tolerance)
}

/// |value at [0] − 2/π|.
pub fn alternating_sum_at_zero() -> Outcome {
    let v = bounds::alternating_sum_ratio(&[0.0]).expect("single entry").value;
    outcome("alternating-sum at zero", (v - FRAC_2_PI).abs(), 1e-12)
}

fn random_union(rng: &mut ChaCha8Rng, theta: f64) -> Vec<(f64, f64)> {
    let k = rng.gen_range(1..=4);
    let mut ends: Vec<f64> = (0..2 * k).map(|_| theta + rng.gen_range(-8.0..8.0)).collect();
    ends.sort_by(f64::total_cmp);
    ends.dedup();
    if ends.len() % 2 == 1 {
        ends.pop();
    }
    if rng.gen_bool(0.5) {
        ends[0] = f64::NEG_INFINITY;
    }
    if rng.gen_bool(0.5) {
        *ends.last_mut().expect("at least two endpoints") = f64::INFINITY;
    }
    ends.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

/// Random unions of up to four intervals, θ ∈ [−5, 5], σ ∈ {0.5, 1, 2}.
/// Reports the largest σ²·I, which must stay below 2/π.
pub fn interval_union_bound(samples: usize, seed: u64, tolerance: f64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let theta = rng.gen_range(-5.0..=5.0);
        let sigma = SIGMAS[rng.gen_range(0..SIGMAS.len())];
        let union = random_union(&mut rng, theta);
        let info = bounds::fisher_info_interval_union(theta, sigma, &union).expect("well-formed union");
        worst = worst.max(info * sigma * sigma);
    }
    outcome("interval-union max (scaled)", worst, FRAC_2_PI + tolerance)
}

/// max over σ of |I(θ, (θ, ∞)) − 2/(πσ²)|.
pub fn threshold_at_mean() -> Outcome {
    let worst = SIGMAS
        .iter()
        .map(|&s| {
            let i = bounds::fisher_info_interval_union(0.7, s, &[(0.7, f64::INFINITY)]).expect("valid");
            (i - FRAC_2_PI / (s * s)).abs()
        })
        .fold(0.0, f64::max);
    outcome("threshold at the mean", worst, 1e-10)
}

/// Relative gap between the closed-form information of a threshold message
/// and (dP/dθ)²/(P(1 − P)) with a central difference of step 1e-5.
pub fn finite_difference_agreement(samples: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let theta = rng.gen_range(-5.0..=5.0);
        let sigma = SIGMAS[rng.gen_range(0..SIGMAS.len())];
        let tau = theta + sigma * rng.gen_range(-4.0..=4.0);
        let p = |th: f64| std_normal_cdf((th - tau) / sigma);
        let dp = (p(theta + h) - p(theta - h)) / (2.0 * h);
        let p0 = p(theta);
        let fd = dp * dp / (p0 * (1.0 - p0));
        let exact = bounds::fisher_info_interval_union(theta, sigma, &[(tau, f64::INFINITY)]).expect("valid");
        worst = worst.max(((exact - fd) / exact).abs());
    }
    outcome("finite-difference agreement", worst, 1e-5)
}

/// Largest increase between consecutive n on 10..10⁶ over the four bound
/// curves, and the largest ceo_lower − ceo_upper; both must be ≤ 0.
pub fn bound_monotonicity() -> Vec<Outcome> {
    let ns: Vec<u64> = (1..=6).map(|k| 10u64.pow(k)).collect();
    let mut rise = f64::NEG_INFINITY;
    let mut crossing = f64::NEG_INFINITY;
    for &sigma in &SIGMAS {
        let r = BoundReport::compute(&ns, sigma, Some(1.0), Some(1.0)).expect("valid parameters");
        for w in r.rows.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (x, y) in [
                (a.van_trees, b.van_trees),
                (a.ceo_lower, b.ceo_lower),
                (a.ceo_upper, b.ceo_upper),
                (Some(a.asymptote), Some(b.asymptote)),
            ] {
                rise = rise.max(y.unwrap() - x.unwrap());
            }
        }
        for row in &r.rows {
            crossing = crossing.max(row.ceo_lower.unwrap() - row.ceo_upper.unwrap());
        }
    }
    vec![
        outcome("bounds non-increasing in n", rise, 0.0),
        outcome("ceo lower below upper", crossing, 0.0),
    ]
}

pub fn run_all(opts: &CheckOptions) -> Vec<Outcome> {
    let mut out = vec![
        alternating_sum_bound(opts.samples, opts.seed, opts.tolerance),
        alternating_sum_at_zero(),
        interval_union_bound((opts.samples / 10).max(1), opts.seed, opts.tolerance),
        threshold_at_mean(),
        finite_difference_agreement((opts.samples / 100).max(1), opts.seed),
    ];
    out.extend(bound_monotonicity());
    out
}
