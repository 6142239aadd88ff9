//! One-step CIR transitions `dr = κ(τ - r) dt + σ √r dW`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ForwardModel, ParamSource, Unknowns};
use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CirScheme {
    Em,
    Milstein,
}

impl FromStr for CirScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" | "euler" => Ok(CirScheme::Em),
            "milstein" => Ok(CirScheme::Milstein),
            other => Err(Error::Parse(format!("unknown CIR scheme '{other}'"))),
        }
    }
}

impl fmt::Display for CirScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CirScheme::Em => "em",
            CirScheme::Milstein => "milstein",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub kappa: f64,
    pub tau: f64,
    pub sigma: f64,
    pub dt: f64,
    /// Implicit weight of the drift in the Milstein scheme.
    pub alpha: f64,
}

impl CirParams {
    /// κ = 0.5, τ = 0.06, σ = 0.08, Δt = 0.01, α = 0.5.
    pub const REFERENCE: CirParams = CirParams {
        kappa: 0.5,
        tau: 0.06,
        sigma: 0.08,
        dt: 0.01,
        alpha: 0.5,
    };

    pub fn new(kappa: f64, tau: f64, sigma: f64, dt: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            kappa,
            tau,
            sigma,
            dt,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("tau", self.tau), ("sigma", self.sigma)] {
            if !(v > 0.0) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.dt >= 0.0) || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::contract(format!(
                "need dt >= 0 and alpha in [0, 1], got dt={} alpha={}",
                self.dt, self.alpha
            )));
        }
        Ok(())
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    pub fn feller(&self) -> bool {
        2.0 * self.kappa * self.tau > self.sigma * self.sigma
    }

    /// Un-taped step, used for path simulation.
    pub fn step(&self, x: f64, w: f64, scheme: CirScheme) -> f64 {
        let (k, t, s, dt) = (self.kappa, self.tau, self.sigma, self.dt);
        let diffusion = s * x.sqrt() * dt.sqrt() * w;
        match scheme {
            CirScheme::Em => x + k * (t - x) * dt + diffusion,
            CirScheme::Milstein => {
                let a = self.alpha;
                (x + k * (t - a * x) * dt + diffusion + 0.25 * s * s * dt * (w * w - 1.0)) / (1.0 + (1.0 - a) * k * dt)
            }
        }
    }
}

fn check_positive(tape: &Tape, x: Var) -> Result<()> {
    match tape.value(x).iter().find(|v| !(**v > 0.0)) {
        Some(&value) => Err(Error::Domain { op: "cir step", value }),
        None => Ok(()),
    }
}

/// `x + κ(τ - x)Δt + σ √x √Δt W`, elementwise with broadcasting.
pub fn cir_em_step(tape: &mut Tape, x: Var, w: Var, kappa: Var, tau: Var, sigma: Var, dt: f64) -> Result<Var> {
    check_positive(tape, x)?;
    let gap = tape.sub(tau, x)?;
    let drift = tape.mul(kappa, gap)?;
    let dtv = tape.scalar(dt);
    let drift = tape.mul(drift, dtv)?;
    let diff = diffusion(tape, x, w, sigma, dt)?;
    let y = tape.add(x, drift)?;
    tape.add(y, diff)
}

/// Weighted Milstein step
/// `[x + κ(τ - αx)Δt + σ√x√Δt W + σ²Δt(W² - 1)/4] / (1 + (1 - α)κΔt)`.
#[allow(clippy::too_many_arguments)]
pub fn cir_milstein_step(
    tape: &mut Tape,
    x: Var,
    w: Var,
    kappa: Var,
    tau: Var,
    sigma: Var,
    dt: f64,
    alpha: f64,
) -> Result<Var> {
    check_positive(tape, x)?;
    let av = tape.scalar(alpha);
    let ax = tape.mul(av, x)?;
    let gap = tape.sub(tau, ax)?;
    let drift = tape.mul(kappa, gap)?;
    let dtv = tape.scalar(dt);
    let drift = tape.mul(drift, dtv)?;
    let diff = diffusion(tape, x, w, sigma, dt)?;

    let w2 = tape.square(w);
    let one = tape.scalar(1.0);
    let w2m1 = tape.sub(w2, one)?;
    let s2 = tape.square(sigma);
    let c = tape.scalar(0.25 * dt);
    let corr = tape.mul(s2, c)?;
    let corr = tape.mul(corr, w2m1)?;

    let num = tape.add(x, drift)?;
    let num = tape.add(num, diff)?;
    let num = tape.add(num, corr)?;
    let implicit = tape.scalar((1.0 - alpha) * dt);
    let den = tape.mul(kappa, implicit)?;
    let den = tape.add(one, den)?;
    tape.div(num, den)
}

fn diffusion(tape: &mut Tape, x: Var, w: Var, sigma: Var, dt: f64) -> Result<Var> {
    let sx = tape.sqrt(x)?;
    let sdt = tape.scalar(dt.sqrt());
    let d = tape.mul(sigma, sx)?;
    let d = tape.mul(d, sdt)?;
    tape.mul(d, w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CirPath {
    pub values: Vec<f64>,
    /// Steps whose raw update was negative and got reflected.
    pub reflections: u64,
}

impl CirPath {
    /// Consecutive pairs `(R_i, R_{i+1})` as an `n x 2` matrix.
    pub fn pairs(&self) -> Matrix {
        let n = self.values.len().saturating_sub(1);
        Array2::from_shape_fn((n, 2), |(i, j)| self.values[i + j])
    }
}

/// Simulates `steps` transitions from `r0`, reflecting negative values.
pub fn simulate_cir_path<R: Rng + ?Sized>(
    r0: f64,
    steps: usize,
    p: &CirParams,
    scheme: CirScheme,
    rng: &mut R,
) -> Result<CirPath> {
    let w: Vec<f64> = (0..steps).map(|_| StandardNormal.sample(rng)).collect();
    cir_path_from_noise(r0, &w, p, scheme)
}

/// Path driven by the given standard normal increments, one per step.
pub fn cir_path_from_noise(r0: f64, w: &[f64], p: &CirParams, scheme: CirScheme) -> Result<CirPath> {
    p.validate()?;
    if !(r0 > 0.0) {
        return Err(Error::Domain {
            op: "cir path start",
            value: r0,
        });
    }
    let mut values = Vec::with_capacity(w.len() + 1);
    values.push(r0);
    let mut reflections = 0;
    let mut x = r0;
    for &wi in w {
        let mut y = p.step(x, wi, scheme);
        if y < 0.0 {
            y = -y;
            reflections += 1;
        }
        if y == 0.0 {
            // keep the square root defined at the next step
            y = f64::MIN_POSITIVE;
            reflections += 1;
        }
        values.push(y);
        x = y;
    }
    Ok(CirPath { values, reflections })
}

/// Observations are pairs `(x, y)`; `x` is taken from the real batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirModel {
    pub scheme: CirScheme,
    pub dt: f64,
    pub alpha: f64,
    pub kappa: ParamSource,
    pub tau: ParamSource,
    pub sigma: ParamSource,
}

impl ForwardModel for CirModel {
    fn observation_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn simulate(&self, tape: &mut Tape, unknowns: &Unknowns, conditioning: &Matrix, noise: &Matrix) -> Result<Var> {
        if conditioning.nrows() != noise.nrows() || conditioning.ncols() != 2 {
            return Err(Error::Shape {
                op: "cir simulate",
                lhs: conditioning.dim(),
                rhs: noise.dim(),
            });
        }
        let x = tape.leaf(conditioning.column(0).to_owned().insert_axis(ndarray::Axis(1)));
        let w = tape.leaf(noise.clone());
        let kappa = self.kappa.resolve(tape, unknowns)?;
        let tau = self.tau.resolve(tape, unknowns)?;
        let sigma = self.sigma.resolve(tape, unknowns)?;
        let y = match self.scheme {
            CirScheme::Em => cir_em_step(tape, x, w, kappa, tau, sigma, self.dt)?,
            CirScheme::Milstein => cir_milstein_step(tape, x, w, kappa, tau, sigma, self.dt, self.alpha)?,
        };
        tape.concat_cols(&[x, y])
    }
}
