//! Scalar primitives: the standard normal pdf/cdf (with a log-space lower
//! tail), the probit weight, the one-bit sign quantizer, power-law step
//! sizes and a bisection root finder shared by the solvers.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::error::{Error, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// ln √(2π)
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point `log_std_normal_cdf` uses the Mills-ratio continued fraction.
const LOG_TAIL_CUTOFF: f64 = -10.0;
const MILLS_CF_DEPTH: usize = 60;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn log_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x), through the complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// ln Φ(x). Accurate far into the lower tail, where Φ itself underflows.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x < LOG_TAIL_CUTOFF {
        log_std_normal_pdf(x) + mills_ratio(-x).ln()
    } else if x > 0.0 {
        (-std_normal_cdf(-x)).ln_1p()
    } else {
        std_normal_cdf(x).ln()
    }
}

/// Mills ratio (1 − Φ(t))/φ(t) for large positive `t`, by backward evaluation
/// of t + 1/(t + 2/(t + 3/(t + ...))).
fn mills_ratio(t: f64) -> f64 {
    let mut tail = t;
    for k in (1..=MILLS_CF_DEPTH).rev() {
        tail = t + k as f64 / tail;
    }
    1.0 / tail
}

/// Probit weight φ²(x) / (Φ(x)(1 − Φ(x))). Even, maximal (2/π) at zero and
/// strictly decreasing in |x|. Evaluated in log space so it decays smoothly
/// to zero instead of producing 0/0.
pub fn probit_weight(x: f64) -> f64 {
    let a = x.abs();
    (2.0 * log_std_normal_pdf(a) - log_std_normal_cdf(a) - log_std_normal_cdf(-a)).exp()
}

/// Inverse of Φ on (0, 1).
///
/// Acklam's rational approximation followed by one Halley step against
/// `std_normal_cdf`. Only `libm` transcendental functions are used, so the
/// result is bit-identical across platforms.
#[allow(clippy::excessive_precision)]
pub fn std_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail(libm::sqrt(-2.0 * libm::log(p)))
    } else if p > 1.0 - P_LOW {
        -tail(libm::sqrt(-2.0 * libm::log1p(-p)))
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    // Halley refinement; work on the smaller tail to keep relative precision.
    let e = if x > 0.0 {
        (1.0 - p) - std_normal_cdf(-x)
    } else {
        std_normal_cdf(x) - p
    };
    let u = e * libm::exp(0.5 * x * x) / FRAC_1_SQRT_2PI;
    x - u / (1.0 + 0.5 * x * u)
}

/// A one-bit message, M ∈ {−1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Message {
    Minus,
    Plus,
}

impl Message {
    pub fn value(self) -> f64 {
        match self {
            Message::Minus => -1.0,
            Message::Plus => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Message::Minus => Message::Plus,
            Message::Plus => Message::Minus,
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Minus => f.write_str("-1"),
            Message::Plus => f.write_str("+1"),
        }
    }
}

/// sgn with the tie at zero sent to +1.
pub fn sign(x: f64) -> Message {
    if x >= 0.0 {
        Message::Plus
    } else {
        Message::Minus
    }
}

/// Step sizes γₙ = n^(−β), 0 < β < 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSchedule {
    beta: f64,
}

impl GammaSchedule {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta", format!("{beta} is outside (0, 1)")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when 2/3 < β < 1, the range for which n·MSE converges to πσ²/2.
    pub fn in_mse_regime(&self) -> bool {
        self.beta > 2.0 / 3.0
    }

    pub fn gamma(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroStep);
        }
        Ok((n as f64).powf(-self.beta))
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or cannot be split further
/// in floating point, and returns the endpoint with the smaller |f|.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::BracketFailure { lo, hi });
    }
    let mut f_hi = f_hi;
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
