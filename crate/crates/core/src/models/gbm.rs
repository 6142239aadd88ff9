//! European call payoff under geometric Brownian motion.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ForwardModel, ParamSource, Unknowns};
use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    /// Spot price.
    pub s: f64,
    pub strike: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Expiry.
    pub t: f64,
    pub sigma: f64,
}

impl GbmParams {
    /// s = K = 100, r = 0.05, T = 1, σ = 0.2.
    pub const REFERENCE: GbmParams = GbmParams {
        s: 100.0,
        strike: 100.0,
        r: 0.05,
        t: 1.0,
        sigma: 0.2,
    };

    pub fn new(s: f64, strike: f64, r: f64, t: f64, sigma: f64) -> Result<Self> {
        let p = Self { s, strike, r, t, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.strike > 0.0 && self.t > 0.0) {
            return Err(Error::contract("need s > 0, K > 0 and T > 0"));
        }
        Ok(())
    }

    pub fn terminal(&self, w: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.s * ((self.r - 0.5 * s2) * self.t + self.sigma * self.t.sqrt() * w).exp()
    }

    pub fn payoff(&self, w: f64) -> f64 {
        (self.terminal(w) - self.strike).max(0.0)
    }

    /// Closed-form discounted call value.
    pub fn black_scholes(&self) -> f64 {
        let st = self.sigma * self.t.sqrt();
        let d1 = ((self.s / self.strike).ln() + (self.r + 0.5 * self.sigma * self.sigma) * self.t) / st;
        let d2 = d1 - st;
        self.s * normal_cdf(d1) - self.strike * (-self.r * self.t).exp() * normal_cdf(d2)
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `max(S_T - K, 0)` elementwise; `sigma` broadcasts against `w`.
pub fn gbm_option_payoff(tape: &mut Tape, w: Var, sigma: Var, p: &GbmParams) -> Result<Var> {
    p.validate()?;
    let s2 = tape.square(sigma);
    let half_t = tape.scalar(0.5 * p.t);
    let conv = tape.mul(s2, half_t)?;
    let rt = tape.scalar(p.r * p.t);
    let drift = tape.sub(rt, conv)?;
    let sqrt_t = tape.scalar(p.t.sqrt());
    let vol = tape.mul(sigma, sqrt_t)?;
    let shock = tape.mul(vol, w)?;
    let expo = tape.add(drift, shock)?;
    let growth = tape.exp(expo);
    let spot = tape.scalar(p.s);
    let st = tape.mul(spot, growth)?;
    let k = tape.scalar(p.strike);
    let intrinsic = tape.sub(st, k)?;
    Ok(tape.relu(intrinsic))
}

/// Each observation is the average of `paths_per_observation` payoffs,
/// discounted by `e^{-rT}` when `discount` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub s: f64,
    pub strike: f64,
    pub r: f64,
    pub t: f64,
    pub sigma: ParamSource,
    pub paths_per_observation: usize,
    pub discount: bool,
}

impl GbmModel {
    fn params(&self) -> GbmParams {
        GbmParams {
            s: self.s,
            strike: self.strike,
            r: self.r,
            t: self.t,
            sigma: f64::NAN,
        }
    }

    /// Plain observation for a known σ from one noise row.
    pub fn observe(&self, sigma: f64, w: &[f64]) -> f64 {
        let p = GbmParams { sigma, ..self.params() };
        let mean = w.iter().map(|&wi| p.payoff(wi)).sum::<f64>() / w.len() as f64;
        if self.discount {
            mean * (-self.r * self.t).exp()
        } else {
            mean
        }
    }
}

impl ForwardModel for GbmModel {
    fn observation_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        self.paths_per_observation
    }

    fn simulate(&self, tape: &mut Tape, unknowns: &Unknowns, _conditioning: &Matrix, noise: &Matrix) -> Result<Var> {
        let m = self.paths_per_observation;
        if m == 0 || noise.ncols() != m {
            return Err(Error::contract(format!(
                "expected {m} payoff draws per observation, got {}",
                noise.ncols()
            )));
        }
        let sigma = self.sigma.resolve(tape, unknowns)?;
        let w = tape.leaf(noise.clone());
        let pay = gbm_option_payoff(tape, w, sigma, &self.params())?;
        let scale = if self.discount { (-self.r * self.t).exp() } else { 1.0 } / m as f64;
        let avg = tape.leaf(Array2::from_elem((m, 1), scale));
        tape.matmul(pay, avg)
    }
}
