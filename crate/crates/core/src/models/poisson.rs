//! `-(a(x) u')' = 1` on `(0, 1)`, `u(0) = u(1) = 0`, with
//! `a(x) = 1 - 0.9 exp(-(x - μ)² / (2σ²))`, discretized by central differences.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ForwardModel, ParamSource, Unknowns};
use crate::autodiff::{Matrix, Tape, TridiagonalSystem, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonParams {
    pub mu: f64,
    pub sigma: f64,
    /// Interior grid points.
    pub n: usize,
}

impl PoissonParams {
    pub fn new(mu: f64, sigma: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::contract(format!("need at least 2 interior points, got {n}")));
        }
        if sigma == 0.0 || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::Domain {
                op: "poisson params",
                value: sigma,
            });
        }
        Ok(Self { mu, sigma, n })
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// `a` at the `n + 1` cell midpoints `h(k + 1/2)`.
    pub fn coefficients(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.n)
            .map(|k| {
                let x = h * (k as f64 + 0.5);
                1.0 - 0.9 * (-(x - self.mu).powi(2) / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect()
    }

    pub fn system(&self) -> TridiagonalSystem {
        let a = self.coefficients();
        let n = self.n;
        let h2 = self.h() * self.h();
        TridiagonalSystem {
            sub: (1..n).map(|k| -a[k]).collect(),
            main: (0..n).map(|k| a[k] + a[k + 1]).collect(),
            sup: (1..n).map(|k| -a[k]).collect(),
            rhs: vec![h2; n],
        }
    }

    /// Nodal values `u(h), ..., u(nh)`.
    pub fn solve(&self) -> Result<Vec<f64>> {
        self.system().solve()
    }
}

/// Solves on the tape; returns a `1 x n` node differentiable in `mu` and `sigma`.
pub fn poisson_solve(tape: &mut Tape, mu: Var, sigma: Var, n: usize) -> Result<Var> {
    poisson_solve_batch(tape, mu, sigma, n)
}

/// Row-batched solve: `mu` and `sigma` are `r x 1` or `1 x 1`; the result is `r x n`.
pub fn poisson_solve_batch(tape: &mut Tape, mu: Var, sigma: Var, n: usize) -> Result<Var> {
    if n < 2 {
        return Err(Error::contract(format!("need at least 2 interior points, got {n}")));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let mids: Vec<f64> = (0..=n).map(|k| h * (k as f64 + 0.5)).collect();
    let xs = tape.row(&mids);
    let d = tape.sub(xs, mu)?;
    let d2 = tape.square(d);
    let s2 = tape.square(sigma);
    let two = tape.scalar(2.0);
    let den = tape.mul(two, s2)?;
    let q = tape.div(d2, den)?;
    let nq = tape.neg(q);
    let e = tape.exp(nq);
    let c = tape.scalar(0.9);
    let bump = tape.mul(c, e)?;
    let one = tape.scalar(1.0);
    let a = tape.sub(one, bump)?;

    let rows = tape.shape(a).0;
    let left = tape.slice_cols(a, 0, n)?;
    let right = tape.slice_cols(a, 1, n + 1)?;
    let main = tape.add(left, right)?;
    let inner = tape.slice_cols(a, 1, n)?;
    let off = tape.neg(inner);
    let rhs = tape.leaf(Array2::from_elem((rows, n), h * h));
    tape.tridiag_solve(off, main, off, rhs)
}

/// Observations are full vectors of interior nodal values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonModel {
    pub n: usize,
    pub mu: ParamSource,
    pub sigma: ParamSource,
}

impl ForwardModel for PoissonModel {
    fn observation_dim(&self) -> usize {
        self.n
    }

    fn noise_dim(&self) -> usize {
        0
    }

    fn simulate(&self, tape: &mut Tape, unknowns: &Unknowns, _conditioning: &Matrix, noise: &Matrix) -> Result<Var> {
        let rows = noise.nrows();
        let mu = self.mu.resolve(tape, unknowns)?;
        let sigma = self.sigma.resolve(tape, unknowns)?;
        // broadcast scalar sources to one row per sample
        let zeros = tape.leaf(Array2::zeros((rows, 1)));
        let mu = tape.add(mu, zeros)?;
        let out = poisson_solve_batch(tape, mu, sigma, self.n)?;
        if tape.shape(out).0 != rows {
            return Err(Error::Shape {
                op: "poisson simulate",
                lhs: (rows, self.n),
                rhs: tape.shape(out),
            });
        }
        Ok(out)
    }
}
