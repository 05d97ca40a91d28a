use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ThetaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `(σ(θ), ρ(θ))`-upper-bounded arrival process:
/// `E[e^{θ A(s,t)}] <= e^{θ(ρ(θ)(t-s) + σ(θ))}`.
#[derive(Clone)]
pub struct StochasticArrival {
    rho: ThetaFn,
    sigma: ThetaFn,
    theta: f64,
}

impl fmt::Debug for StochasticArrival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticArrival")
            .field("theta", &self.theta)
            .field("rho", &self.rho())
            .field("sigma", &self.sigma())
            .finish()
    }
}

impl StochasticArrival {
    pub fn new(
        theta: f64,
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        Ok(Self { rho: Arc::new(rho), sigma: Arc::new(sigma), theta })
    }

    /// Poisson packet arrivals at `rate` per slot, each packet carrying
    /// `packet_size` units of work: `ρ(θ) = rate (e^{θ·size} - 1)/θ`, `σ = 0`.
    pub fn poisson(rate: f64, packet_size: f64, theta: f64) -> Result<Self> {
        if rate < 0.0 || packet_size <= 0.0 {
            return Err(Error::InvalidParameter("poisson rate must be >= 0 and packet size > 0".into()));
        }
        Self::new(theta, move |th| poisson_rho(rate, packet_size, th), |_| 0.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn rho(&self) -> f64 {
        (self.rho)(self.theta)
    }

    pub fn sigma(&self) -> f64 {
        (self.sigma)(self.theta)
    }

    /// `pa(θ) = e^{θ ρ(θ)}`.
    pub fn pa(&self) -> f64 {
        (self.theta * self.rho()).exp()
    }

    pub fn ln_pa(&self) -> f64 {
        self.theta * self.rho()
    }

    /// Same process re-parameterised at a different θ.
    pub fn at_theta(&self, theta: f64) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        Ok(Self { rho: self.rho.clone(), sigma: self.sigma.clone(), theta })
    }

    /// Upper bound on the MGF of the arrivals over a window of `span` slots.
    pub fn mgf_bound(&self, span: f64) -> f64 {
        (self.theta * (self.rho() * span + self.sigma())).exp()
    }
}

pub fn poisson_rho(rate: f64, packet_size: f64, theta: f64) -> f64 {
    rate * (theta * packet_size).exp_m1() / theta
}

/// Aggregates independent flows sharing one θ: ρ and σ add.
pub fn aggregate_arrivals(flows: &[StochasticArrival]) -> Result<StochasticArrival> {
    let first = flows
        .first()
        .ok_or_else(|| Error::InvalidParameter("cannot aggregate an empty list of flows".into()))?;
    let theta = first.theta;
    for f in flows {
        if (f.theta - theta).abs() > 1e-12 * theta {
            return Err(Error::MismatchedTheta(theta, f.theta));
        }
    }
    if flows.len() == 1 {
        return Ok(first.clone());
    }
    let rhos: Vec<ThetaFn> = flows.iter().map(|f| f.rho.clone()).collect();
    let sigmas: Vec<ThetaFn> = flows.iter().map(|f| f.sigma.clone()).collect();
    StochasticArrival::new(
        theta,
        move |th| rhos.iter().map(|r| r(th)).sum(),
        move |th| sigmas.iter().map(|s| s(th)).sum(),
    )
}
