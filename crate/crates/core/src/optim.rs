//! Parameter update rules: Adam, RMSProp, gradient descent and L-BFGS.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    RmsProp,
    Gd,
    Lbfgs,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "gd" => Ok(OptimizerKind::Gd),
            "lbfgs" => Ok(OptimizerKind::Lbfgs),
            other => Err(Error::Parse(format!("unknown optimizer '{other}'"))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Gd => "gd",
            OptimizerKind::Lbfgs => "lbfgs",
        })
    }
}

/// Hyperparameters for any optimizer; fields irrelevant to `kind` are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub lbfgs: LbfgsSettings,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
            epsilon: 1e-8,
            lbfgs: LbfgsSettings::default(),
        }
    }
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            ..Self::default()
        }
    }

    pub fn build(&self, dim: usize) -> Result<Optimizer> {
        if !(self.learning_rate > 0.0) && self.kind != OptimizerKind::Lbfgs {
            return Err(Error::contract(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(match self.kind {
            OptimizerKind::Adam => Optimizer::Adam(Adam {
                lr: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.epsilon,
                m: vec![0.0; dim],
                v: vec![0.0; dim],
                t: 0,
            }),
            OptimizerKind::RmsProp => Optimizer::RmsProp(RmsProp {
                lr: self.learning_rate,
                rho: self.rho,
                eps: self.epsilon,
                v: vec![0.0; dim],
                t: 0,
            }),
            OptimizerKind::Gd => Optimizer::Gd(Gd {
                lr: self.learning_rate,
                t: 0,
            }),
            OptimizerKind::Lbfgs => Optimizer::Lbfgs(Lbfgs::new(self.lbfgs.clone(), dim)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    lr: f64,
    rho: f64,
    eps: f64,
    v: Vec<f64>,
    t: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gd {
    lr: f64,
    t: u64,
}

/// Optimizer state for one parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam(Adam),
    RmsProp(RmsProp),
    Gd(Gd),
    Lbfgs(Lbfgs),
}

fn check_grad(params: &[f64], grad: &[f64], iteration: u64) -> Result<()> {
    if params.len() != grad.len() {
        return Err(Error::contract(format!(
            "gradient length {} does not match parameter length {}",
            grad.len(),
            params.len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            iteration,
        });
    }
    Ok(())
}

impl Optimizer {
    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Adam(_) => OptimizerKind::Adam,
            Optimizer::RmsProp(_) => OptimizerKind::RmsProp,
            Optimizer::Gd(_) => OptimizerKind::Gd,
            Optimizer::Lbfgs(_) => OptimizerKind::Lbfgs,
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        match self {
            Optimizer::Adam(a) => a.t,
            Optimizer::RmsProp(r) => r.t,
            Optimizer::Gd(g) => g.t,
            Optimizer::Lbfgs(l) => l.iterations,
        }
    }

    /// First-order update. L-BFGS needs an objective, see [`Optimizer::minimize_step`].
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_grad(params, grad, self.steps() + 1)?;
        match self {
            Optimizer::Adam(a) => {
                a.t += 1;
                let b1t = 1.0 - a.beta1.powf(a.t as f64);
                let b2t = 1.0 - a.beta2.powf(a.t as f64);
                for i in 0..params.len() {
                    let g = grad[i];
                    a.m[i] = a.beta1 * a.m[i] + (1.0 - a.beta1) * g;
                    a.v[i] = a.beta2 * a.v[i] + (1.0 - a.beta2) * g * g;
                    let mhat = a.m[i] / b1t;
                    let vhat = a.v[i] / b2t;
                    params[i] -= a.lr * mhat / (vhat.sqrt() + a.eps);
                }
            }
            Optimizer::RmsProp(r) => {
                r.t += 1;
                for i in 0..params.len() {
                    let g = grad[i];
                    r.v[i] = r.rho * r.v[i] + (1.0 - r.rho) * g * g;
                    params[i] -= r.lr * g / (r.v[i].sqrt() + r.eps);
                }
            }
            Optimizer::Gd(s) => {
                s.t += 1;
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= s.lr * g;
                }
            }
            Optimizer::Lbfgs(_) => {
                return Err(Error::contract("lbfgs requires an objective; use minimize_step"));
            }
        }
        Ok(())
    }

    /// One update given an objective returning `(value, gradient)`.
    ///
    /// First-order rules evaluate the objective once; L-BFGS runs a line
    /// search on it, so the objective must be deterministic for the call.
    pub fn minimize_step<F>(&mut self, params: &mut [f64], mut objective: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        match self {
            Optimizer::Lbfgs(l) => Ok(l.iterate(params, &mut objective)?.value),
            _ => {
                let (value, grad) = objective(params)?;
                self.step(params, &grad)?;
                Ok(value)
            }
        }
    }

    pub fn lbfgs_fallbacks(&self) -> u64 {
        match self {
            Optimizer::Lbfgs(l) => l.fallbacks,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Caps the infinity norm of a trial step; `None` leaves it uncapped.
    pub max_step: Option<f64>,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_backtracks: 50,
            max_step: None,
        }
    }
}

/// Limited-memory BFGS with a backtracking Armijo line search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lbfgs {
    settings: LbfgsSettings,
    history: VecDeque<(Vec<f64>, Vec<f64>)>,
    dim: usize,
    iterations: u64,
    fallbacks: u64,
    rejected_pairs: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsStep {
    pub value: f64,
    pub grad: Vec<f64>,
    pub step_length: f64,
    pub fell_back: bool,
}

/// Inverse-Hessian approximation applied to `grad`; the search direction is its negative.
///
/// `history` is ordered oldest first. The initial scaling is
/// `s'y / y'y` of the newest pair, or the identity when empty.
pub fn two_loop_direction(history: &[(Vec<f64>, Vec<f64>)], grad: &[f64]) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut q = grad.to_vec();
    let mut alpha = vec![0.0; history.len()];
    for (i, (s, y)) in history.iter().enumerate().rev() {
        let rho = 1.0 / dot(y, s);
        alpha[i] = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qj, yj)| *qj -= alpha[i] * yj);
    }
    let gamma = history.last().map_or(1.0, |(s, y)| dot(s, y) / dot(y, y));
    q.iter_mut().for_each(|x| *x *= gamma);
    for (i, (s, y)) in history.iter().enumerate() {
        let rho = 1.0 / dot(y, s);
        let beta = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qj, sj)| *qj += (alpha[i] - beta) * sj);
    }
    q
}

impl Lbfgs {
    pub fn new(settings: LbfgsSettings, dim: usize) -> Self {
        Self {
            settings,
            history: VecDeque::new(),
            dim,
            iterations: 0,
            fallbacks: 0,
            rejected_pairs: 0,
        }
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    pub fn rejected_pairs(&self) -> u64 {
        self.rejected_pairs
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Evaluates the objective at `params`, then performs one line-searched update.
    pub fn iterate<F>(&mut self, params: &mut [f64], objective: &mut F) -> Result<LbfgsStep>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let (f0, g0) = objective(params)?;
        self.iterate_from(params, f0, g0, objective)
    }

    fn iterate_from<F>(&mut self, params: &mut [f64], f0: f64, g0: Vec<f64>, objective: &mut F) -> Result<LbfgsStep>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        if params.len() != self.dim {
            return Err(Error::contract(format!(
                "lbfgs built for dimension {}, got {}",
                self.dim,
                params.len()
            )));
        }
        self.iterations += 1;
        check_grad(params, &g0, self.iterations)?;
        if !f0.is_finite() {
            return Err(Error::NonFinite {
                what: "objective",
                iteration: self.iterations,
            });
        }

        let hist: Vec<_> = self.history.iter().cloned().collect();
        let mut dir: Vec<f64> = two_loop_direction(&hist, &g0).iter().map(|x| -x).collect();
        let mut fell_back = false;
        if dot(&dir, &g0) >= 0.0 {
            dir = g0.iter().map(|g| -g).collect();
            self.history.clear();
        }
        let found = match self.line_search(params, f0, &g0, &dir, objective)? {
            Some(found) => Some(found),
            None => {
                fell_back = true;
                self.fallbacks += 1;
                self.history.clear();
                warn!(
                    "lbfgs line search failed at iteration {}; using steepest descent",
                    self.iterations
                );
                let sd: Vec<f64> = g0.iter().map(|g| -g).collect();
                self.line_search(params, f0, &g0, &sd, objective)?
            }
        };
        let Some((t, trial, f1, g1)) = found else {
            // no decrease along -g either: stay put
            return Ok(LbfgsStep {
                value: f0,
                grad: g0,
                step_length: 0.0,
                fell_back,
            });
        };

        let s: Vec<f64> = trial.iter().zip(params.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g1.iter().zip(&g0).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * norm(&s) * norm(&y) && dot(&s, &y) > 0.0 {
            if self.history.len() == self.settings.memory {
                self.history.pop_front();
            }
            if self.settings.memory > 0 {
                self.history.push_back((s, y));
            }
        } else {
            // negative curvature along s: the stored pairs no longer describe the region
            self.rejected_pairs += 1;
            self.history.clear();
        }
        params.copy_from_slice(&trial);
        Ok(LbfgsStep {
            value: f1,
            grad: g1,
            step_length: t,
            fell_back,
        })
    }

    #[allow(clippy::type_complexity)]
    fn line_search<F>(
        &self,
        params: &[f64],
        f0: f64,
        g0: &[f64],
        dir: &[f64],
        objective: &mut F,
    ) -> Result<Option<(f64, Vec<f64>, f64, Vec<f64>)>>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let slope = dot(g0, dir);
        if !(slope < 0.0) {
            return Ok(None);
        }
        let mut t = self.settings.initial_step;
        if let Some(cap) = self.settings.max_step {
            let big = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if big * t > cap {
                t = cap / big;
            }
        }
        for _ in 0..=self.settings.max_backtracks {
            let trial: Vec<f64> = params.iter().zip(dir).map(|(p, d)| p + t * d).collect();
            match objective(&trial) {
                Ok((f1, g1)) if f1.is_finite() && g1.iter().all(|g| g.is_finite()) => {
                    if f1 <= f0 + self.settings.armijo * t * slope {
                        return Ok(Some((t, trial, f1, g1)));
                    }
                }
                // out-of-domain trial points are treated as insufficient decrease
                Ok(_) | Err(Error::Domain { .. }) | Err(Error::Singular { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= self.settings.backtrack;
        }
        Ok(None)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Record of a full [`lbfgs_minimize`] run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LbfgsTrace {
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub fallbacks: u64,
    pub converged: bool,
}

impl LbfgsTrace {
    pub fn iterations(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

/// Runs L-BFGS until `‖∇f‖ ≤ grad_tol` or `max_iter` updates.
pub fn lbfgs_minimize<F>(
    mut f: F,
    p0: &[f64],
    settings: LbfgsSettings,
    max_iter: usize,
    grad_tol: f64,
) -> Result<(Vec<f64>, LbfgsTrace)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut p = p0.to_vec();
    let mut opt = Lbfgs::new(settings, p.len());
    let (mut value, mut grad) = f(&p)?;
    let mut trace = LbfgsTrace {
        values: vec![value],
        grad_norms: vec![norm(&grad)],
        ..LbfgsTrace::default()
    };
    for _ in 0..max_iter {
        if norm(&grad) <= grad_tol {
            break;
        }
        let step = opt.iterate_from(&mut p, value, grad, &mut f)?;
        value = step.value;
        grad = step.grad;
        trace.values.push(value);
        trace.grad_norms.push(norm(&grad));
        if step.step_length == 0.0 {
            break;
        }
    }
    trace.fallbacks = opt.fallbacks;
    trace.converged = norm(&grad) <= grad_tol;
    Ok((p, trace))
}
