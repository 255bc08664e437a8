//! Grid representation of the prior and of the one-step scheme's posterior.
//!
//! Densities live on a fixed uniform grid `t_j = lo + j·h` and are stored in
//! log space. Every integral (mass, mean, truncated means) is the exact
//! integral of the piecewise-linear interpolant of the density, so the mass
//! rule is the trapezoid rule and the truncated means are continuous in the
//! split point.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{self, Message};

pub const MIN_GRID_POINTS: usize = 64;
pub const DEFAULT_GRID_POINTS: usize = 4096;
pub const DEFAULT_TAIL_MASS: f64 = 1e-9;
/// One-sided mass below which truncated means are refused.
pub const MIN_SPLIT_MASS: f64 = 1e-12;
/// One-sided mass that the fixed-point bracket must keep on each side.
const BRACKET_MASS: f64 = 1e-9;
/// Log-density (relative to the maximum) below which grid points are dropped
/// to −∞. The dropped mass is below e⁻¹⁰⁰ of the peak, far under every
/// tolerance, and keeping only the active range makes updates cheap. The
/// superlevel set of a concave function is an interval, so log-concavity is
/// kept.
const LOG_FLOOR: f64 = 100.0;
const LOG_CONCAVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    lo: f64,
    hi: f64,
    log_p: Vec<f64>,
    p: Vec<f64>,
    /// First and last index holding a finite log-density.
    first: usize,
    last: usize,
}

impl GridDensity {
    /// Builds a normalized density from unnormalized log values on a uniform
    /// grid over `[lo, hi]`. `-inf` entries are zero density.
    pub fn from_log_density(lo: f64, hi: f64, log_p: Vec<f64>) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("support", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if log_p.len() < MIN_GRID_POINTS {
            return Err(Error::invalid(
                "grid_m",
                format!("{} points, need at least {MIN_GRID_POINTS}", log_p.len()),
            ));
        }
        if log_p.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::invalid("log_density", "contains NaN or +inf"));
        }
        Self::normalized(lo, hi, log_p)
    }

    fn normalized(lo: f64, hi: f64, mut log_p: Vec<f64>) -> Result<Self> {
        let exhausted = Error::GridExhausted { lo, hi };
        let max = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(exhausted);
        }
        let m = log_p.len();
        let h = (hi - lo) / (m - 1) as f64;
        let mut first = usize::MAX;
        let mut last = 0;
        let mut sum = 0.0;
        for (j, l) in log_p.iter_mut().enumerate() {
            if *l - max < -LOG_FLOOR {
                *l = f64::NEG_INFINITY;
                continue;
            }
            first = first.min(j);
            last = j;
            let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
            sum += w * (*l - max).exp();
        }
        let log_norm = max + (h * sum).ln();
        if !log_norm.is_finite() {
            return Err(exhausted);
        }
        let mut p = vec![0.0; m];
        for j in first..=last {
            log_p[j] -= log_norm;
            p[j] = log_p[j].exp();
        }
        Ok(Self {
            lo,
            hi,
            log_p,
            p,
            first,
            last,
        })
    }

    /// Samples `density` at `m` grid points over `[lo, hi]`.
    pub fn from_fn<F: Fn(f64) -> f64>(lo: f64, hi: f64, m: usize, log_density: F) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("grid_m", format!("{m} points")));
        }
        let h = (hi - lo) / (m - 1) as f64;
        let log_p = (0..m).map(|j| log_density(lo + j as f64 * h)).collect();
        Self::from_log_density(lo, hi, log_p)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.log_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_p.is_empty()
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.len() - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.step()
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_p
    }

    pub fn density(&self) -> &[f64] {
        &self.p
    }

    /// Trapezoid integral of the density; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        let m = self.len();
        let interior: f64 = self.p.iter().sum();
        self.step() * (interior - 0.5 * (self.p[0] + self.p[m - 1]))
    }

    /// Largest discrete second difference of the log-density over interior
    /// points whose three-point stencil is finite. Returns +inf when a zero
    /// of the density sits strictly between positive values.
    pub fn max_second_difference(&self) -> f64 {
        if self.log_p[self.first..=self.last]
            .iter()
            .any(|l| !l.is_finite())
        {
            return f64::INFINITY;
        }
        self.log_p[self.first..=self.last]
            .windows(3)
            .map(|w| w[2] - 2.0 * w[1] + w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_log_concave(&self) -> bool {
        self.max_second_difference() <= LOG_CONCAVITY_TOL
    }

    fn ensure_log_concave(&self) -> Result<()> {
        let d2 = self.max_second_difference();
        if d2 > LOG_CONCAVITY_TOL {
            return Err(Error::NotLogConcave {
                max_second_difference: d2,
            });
        }
        Ok(())
    }

    /// Index of the largest density value, used as the centring point for
    /// first moments.
    fn mode(&self) -> f64 {
        let (j, _) = self.log_p[self.first..=self.last]
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, &l)| if l > acc.1 { (j, l) } else { acc });
        self.point(self.first + j)
    }

    /// Cells that can carry mass: neighbours of finite entries.
    fn cell_range(&self) -> (usize, usize) {
        (self.first.saturating_sub(1), (self.last + 1).min(self.len() - 1))
    }

    /// ∫ t p(t) dt.
    pub fn conditional_mean(&self) -> f64 {
        let c = self.mode();
        let h = self.step();
        let (k0, k1) = self.cell_range();
        let mut mass = 0.0;
        let mut first = 0.0;
        for k in k0..k1 {
            let (m0, m1) = self.cell_moments(k, c, h);
            mass += m0;
            first += m1;
        }
        c + first / mass
    }

    /// Mass and first moment about `c` of cell `k` (between nodes k and k+1).
    #[inline]
    fn cell_moments(&self, k: usize, c: f64, h: f64) -> (f64, f64) {
        let (pa, pb) = (self.p[k], self.p[k + 1]);
        let offset = self.point(k) - c;
        let m0 = 0.5 * h * (pa + pb);
        let m1 = offset * m0 + h * h * (pa + 2.0 * pb) / 6.0;
        (m0, m1)
    }

    /// Conditional means of the density restricted to (−∞, τ] and [τ, ∞).
    pub fn truncated_means(&self, tau: f64) -> Result<(f64, f64)> {
        SplitTable::new(self).truncated_means(tau)
    }

    /// The unique τ with τ = (m⁻(τ) + m⁺(τ))/2.
    pub fn solve_threshold(&self) -> Result<f64> {
        Ok(self.fixed_point()?.tau)
    }

    /// Solves the threshold equation by bisection on g(x) = x − (m⁻(x)+m⁺(x))/2,
    /// which is increasing for log-concave densities.
    pub fn fixed_point(&self) -> Result<FixedPoint> {
        let table = SplitTable::new(self);
        let (lo, hi) = table.bracket()?;
        let tol = 1e-12 * (self.hi - self.lo);
        let g = |x: f64| {
            let (mm, mp) = table.truncated_means(x)?;
            Ok(x - 0.5 * (mm + mp))
        };
        let tau = math::bisect(g, lo, hi, tol)?;
        let (m_minus, m_plus) = table.truncated_means(tau)?;
        Ok(FixedPoint {
            tau,
            m_minus,
            m_plus,
            residual: tau - 0.5 * (m_minus + m_plus),
        })
    }

    /// Multiplies by Φ(message·(t − τ)/σ) and renormalizes.
    pub fn update(&self, message: Message, tau: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
        }
        if !tau.is_finite() {
            return Err(Error::invalid("tau", format!("{tau} is not finite")));
        }
        let s = message.value() / sigma;
        let mut log_p = self.log_p.clone();
        for (j, l) in log_p.iter_mut().enumerate().take(self.last + 1).skip(self.first) {
            *l += math::log_std_normal_cdf(s * (self.point(j) - tau));
        }
        Self::normalized(self.lo, self.hi, log_p)
    }

    /// Inverse CDF of the interpolated density.
    pub fn quantile(&self, u: f64) -> f64 {
        let table = SplitTable::new(self);
        let target = u.clamp(0.0, 1.0) * table.total;
        let k = table.cell_at_left_mass(target);
        let h = self.step();
        let base = table.left_mass_at_node(k);
        let s = math::bisect(
            |s| Ok(table.partial(k, s).0 + base - target),
            0.0,
            h,
            1e-15 * h,
        )
        .unwrap_or(0.0);
        self.point(k) + s
    }

    /// Fisher information ∫ p (d/dt log p)² of a location family built from
    /// this density, or an error when it does not vanish at both ends.
    pub fn location_fisher_info(&self) -> Result<f64> {
        let m = self.len();
        let peak = self.p.iter().copied().fold(0.0, f64::max);
        if self.p[0] > 1e-6 * peak || self.p[m - 1] > 1e-6 * peak {
            return Err(Error::UndefinedPriorInformation {
                family: "explicit grid density".into(),
            });
        }
        let h = self.step();
        let sum: f64 = (1..m - 1)
            .filter(|&j| self.log_p[j - 1].is_finite() && self.log_p[j + 1].is_finite())
            .map(|j| {
                let score = (self.log_p[j + 1] - self.log_p[j - 1]) / (2.0 * h);
                self.p[j] * score * score
            })
            .sum();
        Ok(h * sum)
    }

    /// Writes `t,density` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,density")?;
        for (j, p) in self.p.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.point(j), p)?;
        }
        Ok(())
    }

    /// Reads the `t,density` format written by [`GridDensity::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut ts = Vec::new();
        let mut log_p = Vec::new();
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        for record in reader.deserialize::<(f64, f64)>() {
            let (t, d) = record.map_err(csv_error)?;
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Csv {
                    line: ts.len() + 2,
                    reason: "density must be finite and non-negative".into(),
                });
            }
            ts.push(t);
            log_p.push(d.ln());
        }
        if ts.len() < 2 {
            return Err(Error::Csv {
                line: ts.len() + 1,
                reason: "need at least two rows".into(),
            });
        }
        let (lo, hi) = (ts[0], ts[ts.len() - 1]);
        let h = (hi - lo) / (ts.len() - 1) as f64;
        for (j, t) in ts.iter().enumerate() {
            if (t - (lo + j as f64 * h)).abs() > 1e-9 * (hi - lo).abs().max(1.0) {
                return Err(Error::Csv {
                    line: j + 2,
                    reason: "grid points must be uniformly spaced and increasing".into(),
                });
            }
        }
        Self::from_log_density(lo, hi, log_p)
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Csv {
        line: e.position().map_or(0, |p| p.line() as usize),
        reason: e.to_string(),
    }
}

/// Solution of the threshold equation with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub tau: f64,
    pub m_minus: f64,
    pub m_plus: f64,
    pub residual: f64,
}

/// Prefix/suffix masses and first moments over the grid nodes, so that
/// truncated means at any split point cost O(1).
struct SplitTable<'a> {
    d: &'a GridDensity,
    center: f64,
    /// Node range `k0..=k1` covered by the tables.
    k0: usize,
    left_mass: Vec<f64>,
    left_first: Vec<f64>,
    right_mass: Vec<f64>,
    right_first: Vec<f64>,
    total: f64,
}

impl<'a> SplitTable<'a> {
    fn new(d: &'a GridDensity) -> Self {
        let center = d.mode();
        let h = d.step();
        let (k0, k1) = d.cell_range();
        let nodes = k1 - k0 + 1;
        let mut left_mass = vec![0.0; nodes];
        let mut left_first = vec![0.0; nodes];
        let mut right_mass = vec![0.0; nodes];
        let mut right_first = vec![0.0; nodes];
        let cells: Vec<(f64, f64)> = (k0..k1).map(|k| d.cell_moments(k, center, h)).collect();
        for i in 1..nodes {
            left_mass[i] = left_mass[i - 1] + cells[i - 1].0;
            left_first[i] = left_first[i - 1] + cells[i - 1].1;
        }
        for i in (0..nodes - 1).rev() {
            right_mass[i] = right_mass[i + 1] + cells[i].0;
            right_first[i] = right_first[i + 1] + cells[i].1;
        }
        let total = left_mass[nodes - 1];
        Self {
            d,
            center,
            k0,
            left_mass,
            left_first,
            right_mass,
            right_first,
            total,
        }
    }

    fn left_mass_at_node(&self, k: usize) -> f64 {
        if k <= self.k0 {
            0.0
        } else {
            self.left_mass[(k - self.k0).min(self.left_mass.len() - 1)]
        }
    }

    /// Cell containing the point where the cumulative mass reaches `target`.
    fn cell_at_left_mass(&self, target: f64) -> usize {
        let i = self.left_mass.partition_point(|&m| m <= target);
        let last_cell = self.k0 + self.left_mass.len() - 2;
        (self.k0 + i.saturating_sub(1)).min(last_cell)
    }

    /// Mass and centred first moment of cell `k` over `[t_k, t_k + s]`.
    fn partial(&self, k: usize, s: f64) -> (f64, f64) {
        let d = self.d;
        let h = d.step();
        let (pa, pb) = (d.p[k], d.p[k + 1]);
        let slope = (pb - pa) / h;
        let a0 = pa * s + 0.5 * slope * s * s;
        let a1 = (d.point(k) - self.center) * a0 + 0.5 * pa * s * s + slope * s * s * s / 3.0;
        (a0, a1)
    }

    /// (left mass, left first moment, right mass, right first moment) at τ.
    fn split(&self, tau: f64) -> (f64, f64, f64, f64) {
        let d = self.d;
        let m = d.len();
        let h = d.step();
        let k = (((tau - d.lo) / h).floor().max(0.0) as usize).min(m - 2);
        let last_node = self.k0 + self.left_mass.len() - 1;
        if k < self.k0 {
            return (0.0, 0.0, self.total, self.right_first[0]);
        }
        if k >= last_node {
            let i = self.left_mass.len() - 1;
            return (self.total, self.left_first[i], 0.0, 0.0);
        }
        let i = k - self.k0;
        let s = (tau - d.point(k)).clamp(0.0, h);
        let (a0, a1) = self.partial(k, s);
        let (c0, c1) = d.cell_moments(k, self.center, h);
        (
            self.left_mass[i] + a0,
            self.left_first[i] + a1,
            self.right_mass[i + 1] + (c0 - a0),
            self.right_first[i + 1] + (c1 - a1),
        )
    }

    fn truncated_means(&self, tau: f64) -> Result<(f64, f64)> {
        let d = self.d;
        if !(tau > d.lo && tau < d.hi) {
            return Err(Error::invalid(
                "tau",
                format!("{tau} outside the open support ({}, {})", d.lo, d.hi),
            ));
        }
        let (lm, lf, rm, rf) = self.split(tau);
        let mass = lm.min(rm);
        if mass.is_nan() || mass < MIN_SPLIT_MASS * self.total {
            return Err(Error::DegenerateSplit { tau, mass });
        }
        Ok((self.center + lf / lm, self.center + rf / rm))
    }

    /// Grid nodes keeping at least `BRACKET_MASS` on the far side.
    fn bracket(&self) -> Result<(f64, f64)> {
        let d = self.d;
        let need = BRACKET_MASS * self.total;
        let i_lo = self.left_mass.iter().position(|&m| m >= need);
        let i_hi = self.right_mass.iter().rposition(|&m| m >= need);
        match (i_lo, i_hi) {
            (Some(a), Some(b)) if a < b => {
                let lo = d.point(self.k0 + a).max(d.lo + 1e-12 * (d.hi - d.lo));
                let hi = d.point(self.k0 + b).min(d.hi - 1e-12 * (d.hi - d.lo));
                Ok((lo, hi))
            }
            _ => Err(Error::BracketFailure { lo: d.lo, hi: d.hi }),
        }
    }
}

/// The prior π(θ).
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Uniform { a: f64, b: f64 },
    Gaussian { mean: f64, std: f64 },
    /// Density cos²(π(t − center)/(2a))/a on [center − a, center + a].
    CosineSquared { center: f64, half_width: f64 },
    Explicit(GridDensity),
}

impl PriorSpec {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::Uniform { a, b }.validated()
    }

    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        Self::Gaussian { mean, std }.validated()
    }

    pub fn cosine_squared(center: f64, half_width: f64) -> Result<Self> {
        Self::CosineSquared { center, half_width }.validated()
    }

    /// Explicit densities must be log-concave.
    pub fn explicit(d: GridDensity) -> Result<Self> {
        d.ensure_log_concave()?;
        Ok(Self::Explicit(d))
    }

    fn validated(self) -> Result<Self> {
        match &self {
            Self::Uniform { a, b } if !(a.is_finite() && b.is_finite() && b > a) => {
                Err(Error::invalid("prior", format!("uniform needs a < b, got {a}, {b}")))
            }
            Self::Gaussian { mean, std } if !(mean.is_finite() && std.is_finite() && *std > 0.0) => {
                Err(Error::invalid("prior", format!("gaussian needs std > 0, got {std}")))
            }
            Self::CosineSquared { center, half_width }
                if !(center.is_finite() && half_width.is_finite() && *half_width > 0.0) =>
            {
                Err(Error::invalid(
                    "prior",
                    format!("cosine-squared needs half-width > 0, got {half_width}"),
                ))
            }
            _ => Ok(self),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Uniform { a, b } => 0.5 * (a + b),
            Self::Gaussian { mean, .. } => *mean,
            Self::CosineSquared { center, .. } => *center,
            Self::Explicit(d) => d.conditional_mean(),
        }
    }

    /// Location Fisher information I₀ = ∫ (π′)²/π.
    pub fn fisher_info(&self) -> Result<f64> {
        match self {
            Self::Uniform { .. } => Err(Error::UndefinedPriorInformation {
                family: self.to_string(),
            }),
            Self::Gaussian { std, .. } => Ok(1.0 / (std * std)),
            Self::CosineSquared { half_width, .. } => Ok(PI * PI / (half_width * half_width)),
            Self::Explicit(d) => d.location_fisher_info(),
        }
    }

    /// Maps a uniform variate to a draw from the prior.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Uniform { a, b } => a + (b - a) * u,
            Self::Gaussian { mean, std } => mean + std * math::std_normal_quantile(u),
            Self::CosineSquared { center, half_width } => {
                // F(v) = (v + 1)/2 + sin(πv)/(2π) on v ∈ [−1, 1]
                let cdf = |v: f64| Ok(0.5 * (v + 1.0) + libm::sin(PI * v) / (2.0 * PI) - u);
                let v = math::bisect(cdf, -1.0, 1.0, 1e-15).unwrap_or(0.0);
                center + half_width * v
            }
            Self::Explicit(d) => d.quantile(u),
        }
    }

    /// Discretizes the prior on `m` points. Unbounded priors are truncated
    /// to their central `1 − tail_mass` interval.
    pub fn to_grid(&self, m: usize, tail_mass: f64) -> Result<GridDensity> {
        if m < MIN_GRID_POINTS {
            return Err(Error::invalid(
                "grid_m",
                format!("{m} points, need at least {MIN_GRID_POINTS}"),
            ));
        }
        match self {
            Self::Uniform { a, b } => GridDensity::from_fn(*a, *b, m, |_| 0.0),
            Self::Gaussian { mean, std } => {
                if !(tail_mass > 0.0 && tail_mass <= 1e-6) {
                    return Err(Error::invalid(
                        "tail_mass",
                        format!("{tail_mass} outside (0, 1e-6]"),
                    ));
                }
                let z = -math::std_normal_quantile(0.5 * tail_mass);
                GridDensity::from_fn(mean - z * std, mean + z * std, m, |t| {
                    math::log_std_normal_pdf((t - mean) / std)
                })
            }
            Self::CosineSquared { center, half_width } => {
                let (lo, hi) = (center - half_width, center + half_width);
                let mut d = GridDensity::from_fn(lo, hi, m, |t| {
                    2.0 * (PI * (t - center) / (2.0 * half_width)).cos().abs().ln()
                })?;
                // The density vanishes exactly at both ends.
                let last = m - 1;
                d.log_p[0] = f64::NEG_INFINITY;
                d.log_p[last] = f64::NEG_INFINITY;
                GridDensity::normalized(lo, hi, d.log_p)
            }
            Self::Explicit(d) => {
                d.ensure_log_concave()?;
                Ok(d.clone())
            }
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { a, b } => write!(f, "uniform {a} {b}"),
            Self::Gaussian { mean, std } => write!(f, "gaussian {mean} {std}"),
            Self::CosineSquared { center, half_width } => {
                write!(f, "cosine-squared {center} {half_width}")
            }
            Self::Explicit(d) => write!(f, "explicit grid on [{}, {}]", d.lo, d.hi),
        }
    }
}

impl FromStr for PriorSpec {
    type Err = Error;

    /// `uniform A B`, `gaussian MEAN STD` or `cosine-squared CENTER HALF_WIDTH`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || Error::invalid("prior", format!("cannot parse `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let x: f64 = parts[1].parse().map_err(|_| bad())?;
        let y: f64 = parts[2].parse().map_err(|_| bad())?;
        match parts[0].to_ascii_lowercase().as_str() {
            "uniform" => Self::uniform(x, y),
            "gaussian" | "normal" => Self::gaussian(x, y),
            "cosine-squared" | "cos2" | "cosine_squared" => Self::cosine_squared(x, y),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{std_normal_cdf, std_normal_pdf};
    use std::f64::consts::FRAC_2_PI;

    /// Composite Simpson rule, independent of the grid quadrature.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn std_normal_grid(m: usize) -> GridDensity {
        PriorSpec::gaussian(0.0, 1.0).unwrap().to_grid(m, 1e-9).unwrap()
    }

    #[test]
    fn uniform_grid_is_flat() {
        let d = PriorSpec::uniform(-3.0, 3.0).unwrap().to_grid(1024, 1e-9).unwrap();
        assert!(d.density().iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-14));
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!(d.conditional_mean().abs() < 1e-10);
    }

    #[test]
    fn gaussian_grid_support_and_peak() {
        let d = std_normal_grid(1024);
        assert!((d.hi() - 6.109).abs() < 0.01, "{}", d.hi());
        assert!((d.lo() + d.hi()).abs() < 1e-12);
        let peak = d.density().iter().copied().fold(0.0, f64::max);
        // grid has no node exactly at 0 for even m; the nearest is h/2 away
        let h = d.step();
        assert!((peak - std_normal_pdf(h / 2.0)).abs() < 1e-8);
        assert!((peak - 0.39894).abs() < 1e-4);
        assert!(d.is_log_concave());
    }

    #[test]
    fn cosine_squared_grid() {
        let d = PriorSpec::cosine_squared(0.0, 3.0).unwrap().to_grid(1025, 1e-9).unwrap();
        assert_eq!(d.density()[0], 0.0);
        assert_eq!(d.density()[1024], 0.0);
        for j in (1..1024).step_by(37) {
            let t = d.point(j);
            let exact = (PI * t / 6.0).cos().powi(2) / 3.0;
            // renormalizing the trapezoid mass moves values by O(h²)
            assert!((d.density()[j] - exact).abs() < 1e-5, "t = {t}");
        }
        assert!(d.is_log_concave());
        assert!(d.conditional_mean().abs() < 1e-12);
    }

    #[test]
    fn uniform_posterior_after_one_message() {
        let d = PriorSpec::uniform(-1.0, 1.0).unwrap().to_grid(4096, 1e-9).unwrap();
        let post = d.update(Message::Plus, 0.0, 1.0).unwrap();
        let norm = simpson(std_normal_cdf, -1.0, 1.0, 20_000);
        assert!((norm - 1.0).abs() < 1e-12);
        let oracle = simpson(|t| t * std_normal_cdf(t), -1.0, 1.0, 20_000) / norm;
        assert!((oracle - 0.241).abs() < 1e-3, "{oracle}");
        assert!((post.conditional_mean() - oracle).abs() < 1e-6);
        assert!((post.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_posterior_after_one_message() {
        let post = std_normal_grid(4096).update(Message::Plus, 0.0, 1.0).unwrap();
        let oracle = 1.0 / PI.sqrt();
        assert!((post.conditional_mean() - oracle).abs() < 1e-6);
        assert!((post.conditional_mean() - 0.5642).abs() < 1e-4);
    }

    #[test]
    fn opposite_messages_reweight_symmetrically() {
        let d = PriorSpec::uniform(-2.0, 2.0).unwrap().to_grid(401, 1e-9).unwrap();
        let tau = 0.0;
        let post = d
            .update(Message::Plus, tau, 0.7)
            .unwrap()
            .update(Message::Minus, tau, 0.7)
            .unwrap();
        let m = post.len();
        for j in 0..m {
            let a = post.log_density()[j];
            let b = post.log_density()[m - 1 - j];
            assert!((a - b).abs() < 1e-12);
        }
        assert!(post.conditional_mean().abs() < 1e-12);
        // prior·Φ(z)Φ(−z)
        for j in (0..m).step_by(50) {
            let z = (d.point(j) - tau) / 0.7;
            let ratio = post.density()[j] / (std_normal_cdf(z) * std_normal_cdf(-z));
            let ratio0 = post.density()[200] / 0.25;
            assert!((ratio / ratio0 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn truncated_means_examples() {
        let d = std_normal_grid(4096);
        let (mm, mp) = d.truncated_means(0.0).unwrap();
        let half_normal = FRAC_2_PI.sqrt();
        assert!((mm + half_normal).abs() < 1e-4);
        assert!((mp - half_normal).abs() < 1e-4);

        let u = PriorSpec::uniform(0.0, 1.0).unwrap().to_grid(1001, 1e-9).unwrap();
        let (mm, mp) = u.truncated_means(0.5).unwrap();
        assert!((mm - 0.25).abs() < 1e-12 && (mp - 0.75).abs() < 1e-12);
        // split inside a cell
        let (mm, mp) = u.truncated_means(0.2003).unwrap();
        assert!((mm - 0.10015).abs() < 1e-12 && (mp - 0.60015).abs() < 1e-12);
        let (mm, mp) = u.truncated_means(0.2).unwrap();
        assert!((mm - 0.1).abs() < 1e-12 && (mp - 0.6).abs() < 1e-12);
    }

    #[test]
    fn truncated_means_errors() {
        let d = std_normal_grid(256);
        assert!(d.truncated_means(d.lo()).is_err());
        assert!(d.truncated_means(7.0).is_err());
        let narrow = d.update(Message::Plus, 5.5, 0.01).unwrap();
        assert!(matches!(
            narrow.truncated_means(-5.9),
            Err(Error::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn threshold_examples() {
        let u = PriorSpec::uniform(0.0, 1.0).unwrap().to_grid(1024, 1e-9).unwrap();
        assert!((u.solve_threshold().unwrap() - 0.5).abs() < 1e-9);

        let fp = std_normal_grid(4096).fixed_point().unwrap();
        assert!(fp.tau.abs() < 1e-6);
        assert!((fp.m_plus - 0.79788).abs() < 1e-4);

        let g = PriorSpec::gaussian(2.0, 3.0).unwrap().to_grid(2048, 1e-9).unwrap();
        assert!((g.solve_threshold().unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn threshold_of_skewed_density_is_a_fixed_point() {
        let d = std_normal_grid(2048)
            .update(Message::Plus, 0.4, 0.5)
            .unwrap()
            .update(Message::Plus, 0.9, 0.5)
            .unwrap();
        let fp = d.fixed_point().unwrap();
        assert!(fp.residual.abs() <= 1e-8 * (d.hi() - d.lo()));
        assert!(fp.tau > 0.0);
    }

    #[test]
    fn h_plus_and_h_minus_are_monotone() {
        let d = PriorSpec::cosine_squared(0.5, 2.0)
            .unwrap()
            .to_grid(1024, 1e-9)
            .unwrap()
            .update(Message::Minus, 1.0, 0.8)
            .unwrap();
        let (mut prev_plus, mut prev_minus) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 1..200 {
            let x = d.lo() + (d.hi() - d.lo()) * i as f64 / 200.0;
            let (mm, mp) = d.truncated_means(x).unwrap();
            let (hp, hm) = (mp - x, x - mm);
            assert!(hp <= prev_plus + 1e-12, "h+ increased at {x}");
            assert!(hm >= prev_minus - 1e-12, "h- decreased at {x}");
            prev_plus = hp;
            prev_minus = hm;
        }
    }

    #[test]
    fn normalization_and_concavity_survive_many_updates() {
        let mut d = PriorSpec::cosine_squared(0.0, 3.0).unwrap().to_grid(1024, 1e-9).unwrap();
        let mut state = 0x1234_5678_u64;
        for _ in 0..1000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let msg = if state >> 63 == 1 { Message::Plus } else { Message::Minus };
            let tau = d.solve_threshold().unwrap();
            d = d.update(msg, tau + 0.1 * ((state >> 20) as f64 / (1u64 << 44) as f64 - 0.5), 1.0)
                .unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-8);
            assert!(d.max_second_difference() <= 1e-8);
        }
    }

    #[test]
    fn grid_exhaustion_is_reported() {
        let d = GridDensity::from_log_density(0.0, 1.0, vec![f64::NEG_INFINITY; 64]);
        assert!(matches!(d, Err(Error::GridExhausted { .. })));
    }

    #[test]
    fn rejects_bad_grids_and_priors() {
        assert!(GridDensity::from_log_density(1.0, 0.0, vec![0.0; 64]).is_err());
        assert!(GridDensity::from_log_density(0.0, 1.0, vec![0.0; 10]).is_err());
        assert!(PriorSpec::uniform(1.0, 1.0).is_err());
        assert!(PriorSpec::gaussian(0.0, 0.0).is_err());
        assert!(PriorSpec::cosine_squared(0.0, -1.0).is_err());
        assert!(PriorSpec::gaussian(0.0, 1.0).unwrap().to_grid(32, 1e-9).is_err());
        assert!(PriorSpec::gaussian(0.0, 1.0).unwrap().to_grid(128, 1e-3).is_err());
        // bimodal
        let bimodal = GridDensity::from_fn(-4.0, 4.0, 256, |t| {
            ((-0.5 * (t - 2.0) * (t - 2.0)).exp() + (-0.5 * (t + 2.0) * (t + 2.0)).exp()).ln()
        })
        .unwrap();
        assert!(!bimodal.is_log_concave());
        assert!(matches!(
            PriorSpec::explicit(bimodal),
            Err(Error::NotLogConcave { .. })
        ));
    }

    #[test]
    fn prior_fisher_information() {
        assert_eq!(PriorSpec::gaussian(0.0, 2.0).unwrap().fisher_info().unwrap(), 0.25);
        let cos = PriorSpec::cosine_squared(0.0, 3.0).unwrap();
        assert!((cos.fisher_info().unwrap() - PI * PI / 9.0).abs() < 1e-15);
        assert!(matches!(
            PriorSpec::uniform(-3.0, 3.0).unwrap().fisher_info(),
            Err(Error::UndefinedPriorInformation { .. })
        ));
        // numeric route on the grid agrees with the closed form
        let grid = cos.to_grid(8193, 1e-9).unwrap();
        let numeric = PriorSpec::explicit(grid).unwrap().fisher_info().unwrap();
        assert!((numeric - PI * PI / 9.0).abs() < 1e-3, "{numeric}");
    }

    #[test]
    fn prior_quantiles() {
        let cos = PriorSpec::cosine_squared(1.0, 2.0).unwrap();
        assert!((cos.quantile(0.5) - 1.0).abs() < 1e-12);
        // F(v) at v = 0.5: 0.75 + 1/(2π)
        let u = 0.75 + 1.0 / (2.0 * PI);
        assert!((cos.quantile(u) - 2.0).abs() < 1e-12);
        let g = PriorSpec::gaussian(1.0, 2.0).unwrap();
        assert!((g.quantile(0.975) - (1.0 + 2.0 * 1.959_963_984_540_054)).abs() < 1e-12);
        let grid = PriorSpec::explicit(PriorSpec::uniform(0.0, 2.0).unwrap().to_grid(101, 1e-9).unwrap())
            .unwrap();
        assert!((grid.quantile(0.3) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn parses_priors() {
        assert_eq!(
            "uniform -3 3".parse::<PriorSpec>().unwrap(),
            PriorSpec::Uniform { a: -3.0, b: 3.0 }
        );
        assert_eq!(
            "cosine-squared 0 3".parse::<PriorSpec>().unwrap(),
            PriorSpec::CosineSquared { center: 0.0, half_width: 3.0 }
        );
        assert!("gaussian 0".parse::<PriorSpec>().is_err());
        assert!("laplace 0 1".parse::<PriorSpec>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = std_normal_grid(128).update(Message::Minus, 0.3, 1.0).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = GridDensity::read_csv(buf.as_slice()).unwrap();
        for (a, b) in d.density().iter().zip(back.density()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
        }
    }

    /// Richardson-style check: halving h shrinks the quadrature error ~4x, and
    /// the change is within 4× the Euler-Maclaurin estimate h²/12·∫|f''|.
    #[test]
    fn quadrature_error_is_second_order() {
        let build = |m: usize| {
            PriorSpec::uniform(0.0, 1.0)
                .unwrap()
                .to_grid(m, 1e-9)
                .unwrap()
                .update(Message::Plus, 0.3, 0.2)
                .unwrap()
        };
        let density = |t: f64| std_normal_cdf((t - 0.3) / 0.2);
        let norm = simpson(density, 0.0, 1.0, 20_000);
        // (t·p)'' = 2p' + t p''
        let second = |t: f64| {
            let z = (t - 0.3) / 0.2;
            (2.0 * std_normal_pdf(z) / 0.2 - t * z * std_normal_pdf(z) / 0.04) / norm
        };
        let curvature = simpson(|t| second(t).abs(), 0.0, 1.0, 20_000);
        for m in [128usize, 256, 512] {
            let (coarse, fine) = (build(m), build(2 * m));
            let h = coarse.step();
            let predicted = h * h / 12.0 * curvature;
            let diff = (coarse.conditional_mean() - fine.conditional_mean()).abs();
            assert!(diff <= 4.0 * predicted, "m={m}: {diff} vs {predicted}");
            let dt = (coarse.solve_threshold().unwrap() - fine.solve_threshold().unwrap()).abs();
            assert!(dt <= 4.0 * predicted, "m={m}: tau moved {dt}");
        }
    }
}
