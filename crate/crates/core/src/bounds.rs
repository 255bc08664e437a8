//! Risk bounds: the van Trees lower bound for adaptive one-bit schemes, the
//! Gaussian CEO lower bound (from its implicit sum-rate equation) and upper
//! bound, plus numeric evaluators for the Fisher information of one-bit
//! messages with arbitrary acceptance regions.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use crate::error::{Error, Result};
use crate::math::{self, compensated_sum, std_normal_cdf, std_normal_pdf};
use crate::posterior::PriorSpec;

/// MSE ≥ πσ²/(2n + πσ²I₀).
pub fn van_trees_bound(n: u64, sigma: f64, i0: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if !(i0.is_finite() && i0 >= 0.0) {
        return Err(Error::invalid("i0", format!("{i0} must be finite and non-negative")));
    }
    let s2 = sigma * sigma;
    Ok(PI * s2 / (2.0 * n as f64 + PI * s2 * i0))
}

/// I₀ of the prior; uniform priors have none.
pub fn prior_fisher_info(prior: &PriorSpec) -> Result<f64> {
    prior.fisher_info()
}

/// πσ²/(2n), the large-n form of the van Trees bound.
pub fn asymptote(n: u64, sigma: f64) -> f64 {
    PI * sigma * sigma / (2.0 * n as f64)
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(name, format!("{v} must be positive")));
    }
    Ok(())
}

/// ½·log₂[(σθ²/D)(Dn/(Dn − σ² + Dσ²/σθ²))ⁿ] − n: the residual of the CEO
/// sum-rate equation with n terminals at one bit each. Defined for D above
/// the centralized MMSE σ²σθ²/(nσθ² + σ²).
pub fn ceo_sum_rate_residual(d: f64, n: u64, sigma: f64, sigma_theta: f64) -> f64 {
    let nf = n as f64;
    let s2 = sigma * sigma;
    let st2 = sigma_theta * sigma_theta;
    let denom = d.mul_add(nf, -s2) + d * s2 / st2;
    let log_ratio = (d * nf).ln() - denom.ln();
    let bits = ((st2 / d).ln() + nf * log_ratio) / LN_2;
    // log⁺
    0.5 * bits.max(0.0) - nf
}

/// Solution D⋆ of the CEO sum-rate equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeoSolution {
    pub distortion: f64,
    pub residual: f64,
}

/// Minimal CEO distortion D⋆ under a total rate of n bits spread over n
/// terminals. The residual decreases in D on (D_min, σθ²], where D_min is the
/// centralized MMSE, so bisection runs to floating-point resolution.
pub fn ceo_lower_bound(n: u64, sigma: f64, sigma_theta: f64) -> Result<CeoSolution> {
    if n == 0 {
        return Err(Error::ZeroStep);
    }
    check_positive("sigma", sigma)?;
    check_positive("sigma_theta", sigma_theta)?;
    let s2 = sigma * sigma;
    let st2 = sigma_theta * sigma_theta;
    let d_min = s2 * st2 / (n as f64 * st2 + s2);
    let lo = d_min * (1.0 + 1e-12);
    let f = |d: f64| Ok(ceo_sum_rate_residual(d, n, sigma, sigma_theta));
    let d = math::bisect(f, lo, st2, 0.0)?;
    Ok(CeoSolution {
        distortion: d,
        residual: ceo_sum_rate_residual(d, n, sigma, sigma_theta),
    })
}

/// (1/σθ² + 3n/(4σ² + σθ²))⁻¹, achievable with one bit per terminal.
pub fn ceo_upper_bound(n: u64, sigma: f64, sigma_theta: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_positive("sigma_theta", sigma_theta)?;
    let st2 = sigma_theta * sigma_theta;
    Ok(1.0 / (1.0 / st2 + 3.0 * n as f64 / (4.0 * sigma * sigma + st2)))
}

/// Value of the alternating-sum ratio; `degenerate` marks Δ ∉ (0, 1), where
/// the value is reported as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingSum {
    pub value: f64,
    pub degenerate: bool,
}

/// P(lo < Z < hi) without cancellation in either tail.
fn interval_prob(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if lo > 0.0 {
        std_normal_cdf(-lo) - std_normal_cdf(-hi)
    } else {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    }
}

fn pdf_or_zero(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        std_normal_pdf(x)
    }
}

/// (Σ(−1)^{k+1}φ(x_k))² / (Δ(1 − Δ)) with Δ = Σ(−1)^{k+1}Φ(x_k), for
/// x₁ ≥ x₂ ≥ … (entries may be ±∞).
///
/// Δ is the probability of the union of intervals (x₂, x₁), (x₄, x₃), …,
/// and 1 − Δ that of the complementary intervals, so both are accumulated
/// as sums of non-negative interval probabilities.
pub fn alternating_sum_ratio(xs: &[f64]) -> Result<AlternatingSum> {
    if xs.is_empty() {
        return Err(Error::invalid("xs", "empty"));
    }
    if xs.iter().any(|x| x.is_nan()) || xs.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("xs", "must be sorted non-increasing"));
    }
    let at = |k: usize| if k < xs.len() { xs[k] } else { f64::NEG_INFINITY };
    let inside = compensated_sum((0..xs.len()).step_by(2).map(|k| interval_prob(at(k + 1), at(k))));
    let outside = compensated_sum(
        std::iter::once(interval_prob(at(0), f64::INFINITY))
            .chain((1..xs.len()).step_by(2).map(|k| interval_prob(at(k + 1), at(k)))),
    );
    let numerator = compensated_sum(
        xs.iter()
            .enumerate()
            .map(|(k, &x)| if k % 2 == 0 { pdf_or_zero(x) } else { -pdf_or_zero(x) }),
    );
    if !(inside > 0.0 && outside > 0.0) {
        return Ok(AlternatingSum {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(AlternatingSum {
        value: numerator * numerator / (inside * outside),
        degenerate: false,
    })
}

/// Fisher information about θ of M = 1{X ∈ ∪(a_j, b_j)}, X ~ N(θ, σ²).
/// Intervals must be sorted and disjoint; endpoints may be infinite.
pub fn fisher_info_interval_union(theta: f64, sigma: f64, intervals: &[(f64, f64)]) -> Result<f64> {
    check_positive("sigma", sigma)?;
    for (j, &(a, b)) in intervals.iter().enumerate() {
        if a.is_nan() || b.is_nan() || a >= b {
            return Err(Error::BadIntervals(format!("interval {j} = ({a}, {b})")));
        }
        if j > 0 && a < intervals[j - 1].1 {
            return Err(Error::BadIntervals(format!(
                "interval {j} = ({a}, {b}) overlaps or precedes ({}, {})",
                intervals[j - 1].0,
                intervals[j - 1].1
            )));
        }
    }
    if intervals.is_empty() {
        return Ok(0.0);
    }
    let xs: Vec<f64> = intervals
        .iter()
        .rev()
        .flat_map(|&(a, b)| [(b - theta) / sigma, (a - theta) / sigma])
        .collect();
    Ok(alternating_sum_ratio(&xs)?.value / (sigma * sigma))
}

/// Bound curves on a grid of sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub sigma: f64,
    pub sigma_theta: Option<f64>,
    pub i0: Option<f64>,
    pub rows: Vec<BoundRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub n: u64,
    pub van_trees: Option<f64>,
    pub ceo_lower: Option<f64>,
    pub ceo_upper: Option<f64>,
    pub asymptote: f64,
}

impl BoundReport {
    /// The van Trees column needs `i0`; the CEO columns need `sigma_theta`.
    pub fn compute(ns: &[u64], sigma: f64, sigma_theta: Option<f64>, i0: Option<f64>) -> Result<Self> {
        check_positive("sigma", sigma)?;
        let rows = ns
            .iter()
            .map(|&n| {
                if n == 0 {
                    return Err(Error::ZeroStep);
                }
                let van_trees = i0.map(|i0| van_trees_bound(n, sigma, i0)).transpose()?;
                let (ceo_lower, ceo_upper) = match sigma_theta {
                    Some(st) => (
                        Some(ceo_lower_bound(n, sigma, st)?.distortion),
                        Some(ceo_upper_bound(n, sigma, st)?),
                    ),
                    None => (None, None),
                };
                Ok(BoundRow {
                    n,
                    van_trees,
                    ceo_lower,
                    ceo_upper,
                    asymptote: asymptote(n, sigma),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            sigma,
            sigma_theta,
            i0,
            rows,
        })
    }

    /// CSV with columns `n,van_trees,ceo_lower,ceo_upper,asymptote`; columns
    /// that were not computed are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let cell = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(out, "n,van_trees,ceo_lower,ceo_upper,asymptote")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{:.16e}",
                r.n,
                cell(r.van_trees),
                cell(r.ceo_lower),
                cell(r.ceo_upper),
                r.asymptote
            )?;
        }
        Ok(())
    }
}
