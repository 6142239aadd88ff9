//! The adversarial loop: discriminator updates on fresh simulations, then
//! updates of the scalar unknowns and the generator through `L^F`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use ndarray::Axis;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::losses::{LossForm, LossKind, LossPair};
use crate::models::{ForwardModel, Unknowns};
use crate::neural::{Activation, BoundMlp, InputNorm, Mlp, NoiseSpec, NormKind};
use crate::optim::{Optimizer, OptimizerKind, OptimizerSpec};

/// Consecutive evaluations within threshold required to stop.
pub const STOP_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub norm: NormKind,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self {
            hidden: vec![20, 20, 20],
            activation: Activation::Tanh,
            norm: NormKind::Standardize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub loss_form: LossForm,
    pub generator_optimizer: OptimizerSpec,
    pub discriminator_optimizer: OptimizerSpec,
    /// A batch at least as large as the data set uses every observation in order.
    pub batch_size: usize,
    /// Discriminator updates per outer iteration.
    pub disc_steps: usize,
    /// Generator updates per outer iteration.
    pub gen_steps: usize,
    pub max_iterations: u64,
    /// `0` never stops early.
    pub threshold: f64,
    pub seed: u64,
    /// Weight bound for Wasserstein critics.
    pub clip: f64,
    /// `0` disables checkpoints.
    pub checkpoint_interval: u64,
    pub checkpoint_dir: Option<PathBuf>,
    pub discriminator: DiscriminatorSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Vanilla,
            loss_form: LossForm::Centered,
            generator_optimizer: OptimizerSpec::new(OptimizerKind::RmsProp, 1e-4),
            discriminator_optimizer: OptimizerSpec::new(OptimizerKind::RmsProp, 1e-4),
            batch_size: 32,
            disc_steps: 1,
            gen_steps: 1,
            max_iterations: 1000,
            threshold: 0.0,
            seed: 0,
            clip: 0.1,
            checkpoint_interval: 0,
            checkpoint_dir: None,
            discriminator: DiscriminatorSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.disc_steps == 0 || self.gen_steps == 0 {
            return Err(Error::contract(
                "batch_size, disc_steps and gen_steps must be at least 1",
            ));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::contract(format!(
                "threshold must be >= 0, got {}",
                self.threshold
            )));
        }
        if self.loss == LossKind::Wasserstein && !(self.clip > 0.0) {
            return Err(Error::contract(format!(
                "clip constant must be positive, got {}",
                self.clip
            )));
        }
        Ok(())
    }

    pub fn loss_pair(&self) -> LossPair {
        LossPair::with_form(self.loss, self.loss_form)
    }
}

/// Network producing one draw of the unknown distribution per noise row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub net: Mlp,
    pub noise: NoiseSpec,
}

impl Generator {
    pub fn new(net: Mlp, noise: NoiseSpec) -> Result<Self> {
        if noise.dim != net.input_dim() {
            return Err(Error::contract(format!(
                "noise dimension {} does not match generator input width {}",
                noise.dim,
                net.input_dim()
            )));
        }
        Ok(Self { net, noise })
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Matrix> {
        self.net.evaluate(&self.noise.sample(count, rng))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimandKind {
    ScalarParameters,
    GeneratorDistribution,
    Mixed,
}

/// Everything the generator side trains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimand {
    pub names: Vec<String>,
    pub scalars: Vec<f64>,
    /// Reporting only.
    pub truth: Vec<Option<f64>>,
    pub generator: Option<Generator>,
}

impl Estimand {
    pub fn new(
        names: Vec<String>,
        scalars: Vec<f64>,
        truth: Vec<Option<f64>>,
        generator: Option<Generator>,
    ) -> Result<Self> {
        if names.len() != scalars.len() || truth.len() != scalars.len() {
            return Err(Error::contract("names, scalars and truth must have equal length"));
        }
        if scalars.is_empty() && generator.is_none() {
            return Err(Error::contract("estimand has nothing to train"));
        }
        Ok(Self {
            names,
            scalars,
            truth,
            generator,
        })
    }

    pub fn scalar(name: &str, init: f64, truth: Option<f64>) -> Self {
        Self {
            names: vec![name.to_string()],
            scalars: vec![init],
            truth: vec![truth],
            generator: None,
        }
    }

    pub fn kind(&self) -> EstimandKind {
        match (self.scalars.is_empty(), self.generator.is_some()) {
            (false, false) => EstimandKind::ScalarParameters,
            (true, true) => EstimandKind::GeneratorDistribution,
            _ => EstimandKind::Mixed,
        }
    }

    pub fn param_count(&self) -> usize {
        self.scalars.len() + self.generator.as_ref().map_or(0, |g| g.net.param_count())
    }

    /// Scalars first, then generator parameters.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.scalars.clone();
        if let Some(g) = &self.generator {
            p.extend(g.net.flat_params());
        }
        p
    }

    pub fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::contract(format!(
                "expected {} estimand parameters, got {}",
                self.param_count(),
                p.len()
            )));
        }
        let k = self.scalars.len();
        self.scalars.copy_from_slice(&p[..k]);
        if let Some(g) = &mut self.generator {
            g.net.set_flat_params(&p[k..])?;
        }
        Ok(())
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.scalars[i])
    }
}

/// Stops once `|d - equilibrium| < threshold` holds [`STOP_WINDOW`] times in a row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub threshold: f64,
    pub equilibrium: f64,
    streak: usize,
}

impl StopRule {
    pub fn new(threshold: f64, equilibrium: f64) -> Self {
        Self {
            threshold,
            equilibrium,
            streak: 0,
        }
    }

    /// Records one evaluation; `true` means stop.
    pub fn observe(&mut self, d: f64) -> bool {
        if (d - self.equilibrium).abs() < self.threshold {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        self.streak >= STOP_WINDOW
    }

    pub fn streak(&self) -> usize {
        self.streak
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: u64,
    pub model_loss: f64,
    pub disc_loss: f64,
    pub estimates: Vec<f64>,
    /// Seconds since the run started, cumulative across resumes.
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    /// Discriminator outputs at 0 or 1 in log losses.
    pub saturations: u64,
    /// Negative entries in simulated observations.
    pub negative_samples: u64,
    pub lbfgs_fallbacks: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub names: Vec<String>,
    pub records: Vec<HistoryRecord>,
    pub events: EventCounts,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Trace of one named scalar.
    pub fn trace(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.records.iter().map(|r| r.estimates[i]).collect())
    }

    pub fn model_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.model_loss).collect()
    }

    pub fn disc_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.disc_loss).collect()
    }

    /// Mean of the last `fraction` of a sequence, at least one element.
    pub fn tail_mean(values: &[f64], fraction: f64) -> f64 {
        let k = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len().max(1));
        values[values.len() - k..].iter().sum::<f64>() / k as f64
    }

    /// Header `iteration,model_loss,disc_loss,<names>[,wall_time]`.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut s = String::from("iteration,model_loss,disc_loss");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        if with_timing {
            s.push_str(",wall_time");
        }
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!("{},{},{}", r.iteration, r.model_loss, r.disc_loss));
            for e in &r.estimates {
                s.push_str(&format!(",{e}"));
            }
            if with_timing {
                s.push_str(&format!(",{:.6}", r.wall_time));
            }
            s.push('\n');
        }
        s
    }
}

/// Current `L^D` of `disc` on the two batches.
pub fn evaluate_discrepancy(
    disc: &Mlp,
    norm: &InputNorm,
    real: &Matrix,
    fake: &Matrix,
    loss: &LossPair,
) -> Result<f64> {
    if real.nrows() == 0 || fake.nrows() == 0 {
        return Err(Error::contract("discrepancy needs nonempty batches"));
    }
    let dr = disc.evaluate(&norm.apply_values(real))?;
    let df = disc.evaluate(&norm.apply_values(fake))?;
    loss.discriminator_loss_value(&dr, &df)
}

struct Draw {
    real: Matrix,
    noise: Matrix,
    gen_noise: Option<Matrix>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    iteration: u64,
    seed: u64,
    /// Decimal `u128`.
    word_pos: String,
    estimand: Estimand,
    discriminator: Mlp,
    norm: InputNorm,
    generator_optimizer: Optimizer,
    discriminator_optimizer: Optimizer,
    stop: StopRule,
    history: TrainHistory,
}

/// Resumable state of one adversarial run.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    model: &'a dyn ForwardModel,
    observations: &'a Matrix,
    loss: LossPair,
    estimand: Estimand,
    disc: Mlp,
    norm: InputNorm,
    gen_opt: Optimizer,
    disc_opt: Optimizer,
    rng: ChaCha8Rng,
    iteration: u64,
    stop: StopRule,
    history: TrainHistory,
    started: Instant,
    time_offset: f64,
    last_checkpoint: Option<PathBuf>,
}

impl<'a> Trainer<'a> {
    /// The discriminator is initialized from the config seed.
    pub fn new(
        cfg: TrainConfig,
        model: &'a dyn ForwardModel,
        observations: &'a Matrix,
        estimand: Estimand,
    ) -> Result<Self> {
        cfg.validate()?;
        if observations.nrows() == 0 {
            return Err(Error::contract("observation set is empty"));
        }
        if observations.ncols() != model.observation_dim() {
            return Err(Error::Shape {
                op: "train observations",
                lhs: (observations.nrows(), model.observation_dim()),
                rhs: observations.dim(),
            });
        }
        if estimand.param_count() == 0 {
            return Err(Error::contract("estimand has nothing to train"));
        }
        let loss = cfg.loss_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut widths = vec![model.observation_dim()];
        widths.extend(&cfg.discriminator.hidden);
        widths.push(1);
        let mut disc = Mlp::glorot(&widths, cfg.discriminator.activation, loss.output_activation, &mut rng)?;
        if loss.requires_clipping {
            disc.clip_weights(cfg.clip)?;
        }
        let norm = InputNorm::fit(cfg.discriminator.norm, observations)?;
        let gen_opt = cfg.generator_optimizer.build(estimand.param_count())?;
        let disc_opt = cfg.discriminator_optimizer.build(disc.param_count())?;
        let history = TrainHistory {
            names: estimand.names.clone(),
            ..TrainHistory::default()
        };
        Ok(Self {
            stop: StopRule::new(cfg.threshold, loss.equilibrium_discriminator_loss),
            cfg,
            model,
            observations,
            loss,
            estimand,
            disc,
            norm,
            gen_opt,
            disc_opt,
            rng,
            iteration: 0,
            history,
            started: Instant::now(),
            time_offset: 0.0,
            last_checkpoint: None,
        })
    }

    pub fn estimand(&self) -> &Estimand {
        &self.estimand
    }

    pub fn discriminator(&self) -> &Mlp {
        &self.disc
    }

    pub fn input_norm(&self) -> &InputNorm {
        &self.norm
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn into_parts(self) -> (Estimand, TrainHistory) {
        (self.estimand, self.history)
    }

    pub fn finished(&self) -> bool {
        self.history.stopped_early || self.iteration >= self.cfg.max_iterations
    }

    /// Runs until `max_iterations`, the stop rule, or `budget` more iterations.
    pub fn run_for(&mut self, budget: u64) -> Result<()> {
        let end = self.iteration.saturating_add(budget);
        while !self.finished() && self.iteration < end {
            self.outer_step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_for(u64::MAX)
    }

    fn draw(&mut self) -> Draw {
        let n_obs = self.observations.nrows();
        let real = if self.cfg.batch_size >= n_obs {
            self.observations.clone()
        } else {
            let idx = index::sample(&mut self.rng, n_obs, self.cfg.batch_size).into_vec();
            self.observations.select(Axis(0), &idx)
        };
        let noise = self.model.sample_noise(real.nrows(), &mut self.rng);
        let gen_noise = self
            .estimand
            .generator
            .as_ref()
            .map(|g| g.noise.sample(real.nrows(), &mut self.rng));
        Draw { real, noise, gen_noise }
    }

    fn wrap(&self, e: Error) -> Error {
        match e {
            Error::NonFinite { what, .. } => self.abort(format!("non-finite {what}")),
            e @ Error::TrainingAborted { .. } => e,
            e => Error::AtIteration {
                iteration: self.iteration + 1,
                source: Box::new(e),
            },
        }
    }

    fn abort(&self, reason: String) -> Error {
        Error::TrainingAborted {
            iteration: self.iteration + 1,
            reason,
            checkpoint: self
                .last_checkpoint
                .as_ref()
                .map_or_else(|| "none".to_string(), |p| p.display().to_string()),
        }
    }

    fn outer_step(&mut self) -> Result<()> {
        let (disc_loss, model_loss) = self.iterate_inner().map_err(|e| self.wrap(e))?;
        if !disc_loss.is_finite() {
            return Err(self.abort("non-finite discriminator loss".into()));
        }
        if !model_loss.is_finite() {
            return Err(self.abort("non-finite model loss".into()));
        }
        self.iteration += 1;
        self.history.events.lbfgs_fallbacks = self.gen_opt.lbfgs_fallbacks() + self.disc_opt.lbfgs_fallbacks();
        self.history.records.push(HistoryRecord {
            iteration: self.iteration,
            model_loss,
            disc_loss,
            estimates: self.estimand.scalars.clone(),
            wall_time: self.time_offset + self.started.elapsed().as_secs_f64(),
        });
        if self.stop.observe(disc_loss) {
            info!("stop rule met at iteration {}", self.iteration);
            self.history.stopped_early = true;
        }
        if self.iteration.is_multiple_of(1000) {
            debug!(
                "iteration {}: L^F {model_loss:.6} L^D {disc_loss:.6} {:?}",
                self.iteration, self.estimand.scalars
            );
        }
        if let Some(dir) = self.cfg.checkpoint_dir.clone() {
            let every = self.cfg.checkpoint_interval;
            if every > 0 && (self.iteration.is_multiple_of(every) || self.finished()) {
                let path = dir.join("checkpoint.json");
                self.checkpoint(&path)?;
            }
        }
        Ok(())
    }

    fn iterate_inner(&mut self) -> Result<(f64, f64)> {
        let disc_loss = self.discriminator_phase()?;
        let model_loss = self.generator_phase()?;
        Ok((disc_loss, model_loss))
    }

    /// `disc_steps` discriminator updates; returns `L^D` before the last one.
    pub(crate) fn discriminator_phase(&mut self) -> Result<f64> {
        let mut disc_loss = f64::NAN;
        for _ in 0..self.cfg.disc_steps {
            let d = self.draw();
            let fake = self.simulate_values(&d)?;
            self.history.events.negative_samples += fake.iter().filter(|v| **v < 0.0).count() as u64;
            let real = self.norm.apply_values(&d.real);
            let fake = self.norm.apply_values(&fake);
            if self.loss.kind != LossKind::Wasserstein {
                let dr = self.disc.evaluate(&real)?;
                let df = self.disc.evaluate(&fake)?;
                self.history.events.saturations +=
                    (self.loss.saturation_count(&dr) + self.loss.saturation_count(&df)) as u64;
            }
            let mut params = self.disc.flat_params();
            let mut scratch = self.disc.clone();
            let loss = self.loss;
            disc_loss = self.disc_opt.minimize_step(&mut params, |p| {
                scratch.set_flat_params(p)?;
                let mut tape = Tape::new();
                let r = tape.leaf(real.clone());
                let f = tape.leaf(fake.clone());
                let (dr, bound) = scratch.forward(&mut tape, r)?;
                let df = bound.forward(&mut tape, f)?;
                let l = loss.discriminator_loss(&mut tape, dr, df)?;
                let g = tape.backward(l)?;
                Ok((tape.scalar_value(l), bound.gradient(&g)))
            })?;
            self.disc.set_flat_params(&params)?;
            if self.loss.requires_clipping {
                self.disc.clip_weights(self.cfg.clip)?;
            }
        }
        Ok(disc_loss)
    }

    /// `gen_steps` updates of the estimand; returns `L^F` before the last one.
    ///
    /// Noise and the real batch stay frozen within one update so the
    /// L-BFGS line search sees a deterministic objective.
    pub(crate) fn generator_phase(&mut self) -> Result<f64> {
        let mut model_loss = f64::NAN;
        for _ in 0..self.cfg.gen_steps {
            let d = self.draw();
            let mut params = self.estimand.flat_params();
            let mut scratch = self.estimand.clone();
            let (model, disc, norm, loss) = (self.model, &self.disc, &self.norm, self.loss);
            model_loss = self.gen_opt.minimize_step(&mut params, |p| {
                scratch.set_flat_params(p)?;
                let mut tape = Tape::new();
                let (fake, bound) = simulate_on_tape(&mut tape, model, &scratch, &d)?;
                let r = tape.leaf(norm.apply_values(&d.real));
                let f = norm.apply(&mut tape, fake)?;
                let (dr, dbound) = disc.forward(&mut tape, r)?;
                let df = dbound.forward(&mut tape, f)?;
                let l = loss.model_loss(&mut tape, dr, df)?;
                let g = tape.backward(l)?;
                let mut grad: Vec<f64> = bound.scalars.iter().map(|&v| g.scalar(v)).collect();
                if let Some(b) = &bound.generator {
                    grad.extend(b.gradient(&g));
                }
                Ok((tape.scalar_value(l), grad))
            })?;
            self.estimand.set_flat_params(&params)?;
        }
        Ok(model_loss)
    }

    fn simulate_values(&self, d: &Draw) -> Result<Matrix> {
        let mut tape = Tape::new();
        let (fake, _) = simulate_on_tape(&mut tape, self.model, &self.estimand, d)?;
        Ok(tape.value(fake).clone())
    }

    /// Writes a JSON snapshot, replacing `path` atomically.
    pub fn checkpoint(&mut self, path: &Path) -> Result<()> {
        let snapshot = Checkpoint {
            iteration: self.iteration,
            seed: self.cfg.seed,
            word_pos: self.rng.get_word_pos().to_string(),
            estimand: self.estimand.clone(),
            discriminator: self.disc.clone(),
            norm: self.norm.clone(),
            generator_optimizer: self.gen_opt.clone(),
            discriminator_optimizer: self.disc_opt.clone(),
            stop: self.stop.clone(),
            history: self.history.clone(),
        };
        let text = serde_json::to_string(&snapshot).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        self.last_checkpoint = Some(path.to_path_buf());
        Ok(())
    }

    /// Restores a snapshot written by [`Trainer::checkpoint`] under the same config.
    pub fn resume(
        path: &Path,
        cfg: TrainConfig,
        model: &'a dyn ForwardModel,
        observations: &'a Matrix,
    ) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("checkpoint {}: {e}", path.display())))?;
        if c.seed != cfg.seed {
            return Err(Error::contract(format!(
                "checkpoint seed {} does not match config seed {}",
                c.seed, cfg.seed
            )));
        }
        let word_pos: u128 = c
            .word_pos
            .parse()
            .map_err(|_| Error::Parse(format!("checkpoint {}: bad rng position", path.display())))?;
        let mut t = Trainer::new(cfg, model, observations, c.estimand)?;
        if c.discriminator.layer_widths() != t.disc.layer_widths() {
            return Err(Error::contract("checkpoint discriminator does not match the config"));
        }
        t.rng.set_word_pos(word_pos);
        t.iteration = c.iteration;
        t.disc = c.discriminator;
        t.norm = c.norm;
        t.gen_opt = c.generator_optimizer;
        t.disc_opt = c.discriminator_optimizer;
        t.stop = c.stop;
        t.time_offset = c.history.records.last().map_or(0.0, |r| r.wall_time);
        t.history = c.history;
        t.last_checkpoint = Some(path.to_path_buf());
        Ok(t)
    }
}

struct BoundEstimand {
    scalars: Vec<Var>,
    generator: Option<BoundMlp>,
}

fn simulate_on_tape(
    tape: &mut Tape,
    model: &dyn ForwardModel,
    est: &Estimand,
    d: &Draw,
) -> Result<(Var, BoundEstimand)> {
    let scalars: Vec<Var> = est.scalars.iter().map(|&v| tape.scalar(v)).collect();
    let (generated, generator) = match (&est.generator, &d.gen_noise) {
        (Some(g), Some(u)) => {
            let input = tape.leaf(u.clone());
            let (out, bound) = g.net.forward(tape, input)?;
            (Some(out), Some(bound))
        }
        _ => (None, None),
    };
    let unknowns = Unknowns {
        scalars: scalars.clone(),
        generated,
    };
    let fake = model.simulate(tape, &unknowns, &d.real, &d.noise)?;
    Ok((fake, BoundEstimand { scalars, generator }))
}

/// Trains `estimand` in place for a full run.
pub fn train(
    cfg: TrainConfig,
    model: &dyn ForwardModel,
    observations: &Matrix,
    estimand: &mut Estimand,
) -> Result<TrainHistory> {
    let mut t = Trainer::new(cfg, model, observations, estimand.clone())?;
    t.run()?;
    let (est, history) = t.into_parts();
    *estimand = est;
    Ok(history)
}

#[cfg(test)]
mod tests;
