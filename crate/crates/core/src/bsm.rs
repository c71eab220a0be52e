//! Black-Scholes problem data and the change of variables
//! `S = E e^x`, `t = T - 2τ/σ²`, `V = S u(x, τ)`.

use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Lower bound applied to the diffusion ratio `σ̃(u)²/σ²`.
pub const DIFFUSION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    sigma: f64,
    rate: f64,
    strike: f64,
    maturity: f64,
}

impl MarketParams {
    pub fn new(sigma: f64, rate: f64, strike: f64, maturity: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite();
        if !(ok(sigma) && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        if !(ok(rate) && rate >= 0.0) {
            return Err(Error::invalid(format!("rate must be >= 0, got {rate}")));
        }
        if !(ok(strike) && strike > 0.0) {
            return Err(Error::invalid(format!("strike must be > 0, got {strike}")));
        }
        if !(ok(maturity) && maturity > 0.0) {
            return Err(Error::invalid(format!("maturity must be > 0, got {maturity}")));
        }
        Ok(MarketParams {
            sigma,
            rate,
            strike,
            maturity,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn with_strike(self, strike: f64) -> Result<Self> {
        Self::new(self.sigma, self.rate, strike, self.maturity)
    }

    pub fn with_maturity(self, maturity: f64) -> Result<Self> {
        Self::new(self.sigma, self.rate, self.strike, maturity)
    }

    pub fn transformed(&self) -> TransformedParams {
        transform_params(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedParams {
    pub kappa: f64,
    pub tau_max: f64,
}

pub fn transform_params(m: &MarketParams) -> TransformedParams {
    let var = m.sigma * m.sigma;
    TransformedParams {
        kappa: 2.0 * m.rate / var,
        tau_max: m.maturity * var / 2.0,
    }
}

/// Map `(S, t)` to `(x, τ)`.
pub fn to_computational(price: f64, time: f64, m: &MarketParams) -> Result<(f64, f64)> {
    if !(price.is_finite() && price > 0.0) {
        return Err(Error::invalid(format!("price must be > 0, got {price}")));
    }
    if !(0.0..=m.maturity).contains(&time) {
        return Err(Error::invalid(format!(
            "time {time} outside [0, {}]",
            m.maturity
        )));
    }
    let x = (price / m.strike).ln();
    let tau = m.sigma * m.sigma * (m.maturity - time) / 2.0;
    Ok((x, tau))
}

/// Map `(x, τ, u)` back to `(S, t, V)`.
pub fn from_computational(x: f64, tau: f64, u: f64, m: &MarketParams) -> (f64, f64, f64) {
    let price = m.strike * x.exp();
    let time = m.maturity - 2.0 * tau / (m.sigma * m.sigma);
    (price, time, price * u)
}

/// Initial data `u(x, 0) = max(1 - e^{-x}, 0)`.
pub fn payoff(x: f64) -> f64 {
    (1.0 - (-x).exp()).max(0.0)
}

/// `a = σ̃(u)²/σ² = 1 + sin(π u e^x)`, floored at [`DIFFUSION_FLOOR`].
pub fn diffusion_ratio(u: f64, x: f64) -> Result<f64> {
    if !(u.is_finite() && x.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite diffusion argument u = {u}, x = {x}"
        )));
    }
    Ok((1.0 + (PI * u * x.exp()).sin()).max(DIFFUSION_FLOOR))
}

/// Laplace transform of the far-field asymptote `1 - e^{-κτ - x}` at `x_max`.
/// The left boundary value is identically zero.
pub fn frequency_boundary(z: f64, kappa: f64, x_max: f64) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid(format!("Laplace node must be > 0, got {z}")));
    }
    Ok(1.0 / z - (-x_max).exp() / (z + kappa))
}

/// Closed-form European call price, used as the reference for the
/// constant-volatility problem.
pub fn black_scholes_call(price: f64, m: &MarketParams, time_to_expiry: f64) -> f64 {
    if time_to_expiry <= 0.0 {
        return (price - m.strike).max(0.0);
    }
    let n = Normal::standard();
    let vol = m.sigma * time_to_expiry.sqrt();
    let d1 = ((price / m.strike).ln() + (m.rate + 0.5 * m.sigma * m.sigma) * time_to_expiry)
        / vol;
    let d2 = d1 - vol;
    price * n.cdf(d1) - m.strike * (-m.rate * time_to_expiry).exp() * n.cdf(d2)
}
