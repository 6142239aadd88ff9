//! Differentiable forward models `x = F(w, θ)`.

mod cir;
mod gbm;
mod poisson;

pub use cir::{
    cir_em_step, cir_milstein_step, cir_path_from_noise, simulate_cir_path, CirModel, CirParams, CirPath, CirScheme,
};
pub use gbm::{gbm_option_payoff, GbmModel, GbmParams};
pub use poisson::{poisson_solve, poisson_solve_batch, PoissonModel, PoissonParams};

pub use crate::autodiff::TridiagonalSystem;

use ndarray::Array2;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Solves a tridiagonal system with the Thomas algorithm.
pub fn thomas_solve(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    sys.solve()
}

/// Where a model parameter's value comes from during training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "source", content = "value")]
pub enum ParamSource {
    Fixed(f64),
    /// Index into the trainable scalar vector.
    Scalar(usize),
    /// Column of the generator output, one draw per simulated sample.
    Generated(usize),
}

/// Trainable quantities bound to a tape for one simulation.
#[derive(Clone, Debug, Default)]
pub struct Unknowns {
    /// `1 x 1` nodes.
    pub scalars: Vec<Var>,
    /// `n x k` generator output.
    pub generated: Option<Var>,
}

impl ParamSource {
    /// `1 x 1` for fixed and scalar sources, `n x 1` for generated ones.
    pub fn resolve(&self, tape: &mut Tape, unknowns: &Unknowns) -> Result<Var> {
        match *self {
            ParamSource::Fixed(v) => Ok(tape.scalar(v)),
            ParamSource::Scalar(i) => unknowns
                .scalars
                .get(i)
                .copied()
                .ok_or_else(|| Error::contract(format!("scalar unknown {i} is not bound"))),
            ParamSource::Generated(c) => {
                let g = unknowns
                    .generated
                    .ok_or_else(|| Error::contract("generator output is not bound"))?;
                tape.slice_cols(g, c, c + 1)
            }
        }
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self, ParamSource::Fixed(_))
    }
}

/// A stochastic forward model usable inside the adversarial loop.
pub trait ForwardModel: Send + Sync {
    /// Width of one observation row.
    fn observation_dim(&self) -> usize;

    /// Width of the per-sample stochastic input `w`.
    fn noise_dim(&self) -> usize;

    fn sample_noise(&self, rows: usize, rng: &mut dyn RngCore) -> Matrix {
        Array2::from_shape_simple_fn((rows, self.noise_dim()), || StandardNormal.sample(rng))
    }

    /// Simulated observations, one row per noise row.
    ///
    /// `conditioning` is the matching batch of real observations; models with
    /// known inputs (the CIR start value) read them from it.
    fn simulate(&self, tape: &mut Tape, unknowns: &Unknowns, conditioning: &Matrix, noise: &Matrix) -> Result<Var>;
}

#[cfg(test)]
mod tests;
