//! Encoder/estimator state machines, advanced one sample at a time.
//!
//! * [`SignSgd`]: θₙ = θₙ₋₁ + γₙ·sgn(Xₙ − θₙ₋₁), reported through the running
//!   average of the iterates.
//! * [`BayesScheme`]: the one-step-optimal scheme. Each message compares the
//!   sample with the fixed-point threshold of the current posterior, and the
//!   estimate is the posterior mean.
//! * [`RunningMean`]: the unconstrained empirical mean, as a baseline.

use crate::error::{Error, Result};
use crate::math::{self, GammaSchedule, Message};
use crate::posterior::{GridDensity, PriorSpec};

/// Which iterates enter the running average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// θ̂ₙ = (θ₁ + … + θₙ)/n.
    #[default]
    PostUpdate,
    /// θ̂ₙ = (θ₀ + … + θₙ₋₁)/n.
    PreUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignSgd {
    theta: f64,
    n: u64,
    sum_theta: f64,
    schedule: GammaSchedule,
    averaging: Averaging,
    burn_in: u64,
}

impl SignSgd {
    pub fn new(theta0: f64, schedule: GammaSchedule) -> Result<Self> {
        if !theta0.is_finite() {
            return Err(Error::invalid("theta0", format!("{theta0} is not finite")));
        }
        Ok(Self {
            theta: theta0,
            n: 0,
            sum_theta: 0.0,
            schedule,
            averaging: Averaging::PostUpdate,
            burn_in: 0,
        })
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    /// Leaves the first `burn_in` iterates out of the average.
    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Current iterate θₙ.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn sum_theta(&self) -> f64 {
        self.sum_theta
    }

    pub fn step(&mut self, x: f64) -> Message {
        let message = math::sign(x - self.theta);
        self.n += 1;
        let before = self.theta;
        let gamma = self.schedule.gamma(self.n).expect("step count is at least 1");
        self.theta += gamma * message.value();
        if self.n > self.burn_in {
            self.sum_theta += match self.averaging {
                Averaging::PostUpdate => self.theta,
                Averaging::PreUpdate => before,
            };
        }
        message
    }

    pub fn estimate(&self) -> Result<f64> {
        if self.n <= self.burn_in {
            return Err(Error::NoSamples);
        }
        Ok(self.sum_theta / (self.n - self.burn_in) as f64)
    }
}

/// State of the one-step-optimal scheme.
#[derive(Debug, Clone)]
pub struct BayesScheme {
    posterior: GridDensity,
    tau: f64,
    estimate: f64,
    n: u64,
}

impl BayesScheme {
    pub fn new(prior: &PriorSpec, grid_m: usize, tail_mass: f64) -> Result<Self> {
        Self::from_density(prior.to_grid(grid_m, tail_mass)?)
    }

    pub fn from_density(posterior: GridDensity) -> Result<Self> {
        if !posterior.is_log_concave() {
            return Err(Error::NotLogConcave {
                max_second_difference: posterior.max_second_difference(),
            });
        }
        let tau = posterior.solve_threshold()?;
        let estimate = posterior.conditional_mean();
        Ok(Self {
            posterior,
            tau,
            estimate,
            n: 0,
        })
    }

    pub fn posterior(&self) -> &GridDensity {
        &self.posterior
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn encode(&self, x: f64) -> Message {
        math::sign(x - self.tau)
    }

    /// Folds in a message produced with the current threshold, then refreshes
    /// the estimate and the next threshold.
    pub fn update(&mut self, message: Message, sigma: f64) -> Result<()> {
        let posterior = self.posterior.update(message, self.tau, sigma)?;
        let tau = posterior.solve_threshold()?;
        self.estimate = posterior.conditional_mean();
        self.posterior = posterior;
        self.tau = tau;
        self.n += 1;
        Ok(())
    }

    pub fn step(&mut self, x: f64, sigma: f64) -> Result<Message> {
        let message = self.encode(x);
        self.update(message, sigma)?;
        Ok(message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMean {
    sum: f64,
    n: u64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::NoSamples);
        }
        Ok(self.sum / self.n as f64)
    }
}

/// χ(x) = E sgn²(x + Z) is identically one.
pub const CHI: f64 = 1.0;

/// ψ(x) = E sgn(x + Z), Z ~ N(0, σ²), which is 2Φ(x/σ) − 1.
pub fn psi(x: f64, sigma: f64) -> f64 {
    2.0 * math::std_normal_cdf(x / sigma) - 1.0
}

/// ψ′(0) = 2/(σ√(2π)).
pub fn psi_prime0(sigma: f64) -> f64 {
    2.0 * math::FRAC_1_SQRT_2PI / sigma
}

/// χ(0)/ψ′(0)², the limiting n·MSE of averaged sign-SGD; equals πσ²/2.
pub fn asymptotic_variance(sigma: f64) -> f64 {
    let d = psi_prime0(sigma);
    CHI / (d * d)
}
