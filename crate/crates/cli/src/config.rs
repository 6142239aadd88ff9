//! Experiment configuration: TOML sections `experiment`, `model`, `train`,
//! `optimizer.generator`, `optimizer.discriminator`, `discriminator` and
//! `generator`, laid over per-experiment defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ana_core::losses::LossKind;
use ana_core::models::CirScheme;
use ana_core::neural::{Activation, NoiseKind, NormKind};
use ana_core::optim::{LbfgsSettings, OptimizerKind, OptimizerSpec};
use ana_core::trainer::{DiscriminatorSpec, TrainConfig};
use ana_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    PoissonUq,
    PoissonMixture,
    #[serde(rename = "poisson-2d")]
    Poisson2d,
    CirTau,
    CirKappa,
    CirLandscape,
    OptionVol,
    MleOracle,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 8] = [
        ExperimentName::PoissonUq,
        ExperimentName::PoissonMixture,
        ExperimentName::Poisson2d,
        ExperimentName::CirTau,
        ExperimentName::CirKappa,
        ExperimentName::CirLandscape,
        ExperimentName::OptionVol,
        ExperimentName::MleOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::PoissonUq => "poisson-uq",
            ExperimentName::PoissonMixture => "poisson-mixture",
            ExperimentName::Poisson2d => "poisson-2d",
            ExperimentName::CirTau => "cir-tau",
            ExperimentName::CirKappa => "cir-kappa",
            ExperimentName::CirLandscape => "cir-landscape",
            ExperimentName::OptionVol => "option-vol",
            ExperimentName::MleOracle => "mle-oracle",
        }
    }

    pub fn is_poisson(self) -> bool {
        matches!(
            self,
            ExperimentName::PoissonUq | ExperimentName::PoissonMixture | ExperimentName::Poisson2d
        )
    }

    /// Runs the adversarial loop, as opposed to a scan or a closed-form oracle.
    pub fn is_adversarial(self) -> bool {
        !matches!(self, ExperimentName::CirLandscape | ExperimentName::MleOracle)
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: ExperimentName,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `"generate"` or a path to a data CSV.
    pub data: String,
}

/// Model and data settings; each experiment reads the subset it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of observations (Poisson solution vectors or option prices).
    pub observations: usize,
    /// Initial value of the scalar unknown.
    pub init: f64,

    /// Interior grid nodes.
    pub n: usize,
    /// Distribution of μ, as a target tag.
    pub mu_target: String,
    /// Joint law of (μ, σ) for the two-dimensional study.
    pub joint_target: String,

    pub kappa: f64,
    pub tau: f64,
    pub sigma: f64,
    pub dt: f64,
    pub alpha: f64,
    pub scheme: CirScheme,
    pub path_length: usize,
    /// Start value of generated paths; non-positive draws from the stationary law.
    pub r0: f64,
    /// Resampling interval for start values of the κ study.
    pub resample_lo: f64,
    pub resample_hi: f64,

    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub expiry: f64,
    pub paths_per_observation: usize,
    pub discount: bool,

    pub scan_steps: usize,
    pub scan_realizations: usize,
    pub bins: usize,
    /// `[lo, hi, step]`.
    pub kappa_grid: [f64; 3],
    pub tau_grid: [f64; 3],
    /// Seeded paths for the oracle study.
    pub oracle_paths: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            observations: 1000,
            init: 0.0,
            n: 100,
            mu_target: "normal:0.3,0.1".into(),
            joint_target: "gaussian2d:0.3,1.0,0.1,-0.05,0.1".into(),
            kappa: 0.5,
            tau: 0.06,
            sigma: 0.08,
            dt: 0.01,
            alpha: 0.5,
            scheme: CirScheme::Milstein,
            path_length: 4000,
            r0: 0.06,
            resample_lo: 0.001,
            resample_hi: 0.03,
            spot: 100.0,
            strike: 100.0,
            rate: 0.05,
            expiry: 1.0,
            paths_per_observation: 100,
            discount: true,
            scan_steps: 100_000,
            scan_realizations: 10,
            bins: ana_core::stats::DEFAULT_BINS,
            kappa_grid: [0.1, 1.0, 0.05],
            tau_grid: [0.04, 0.08, 0.0025],
            oracle_paths: 1,
        }
    }
}

/// Grid points `lo, lo + step, ...` up to and including `hi`.
pub fn grid(g: [f64; 3]) -> Result<Vec<f64>> {
    let [lo, hi, step] = g;
    if !(step > 0.0 && hi >= lo) {
        return Err(Error::Parse(format!("bad grid [{lo}, {hi}, {step}]")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub loss: LossKind,
    /// `0` uses the full data set every step.
    pub batch_size: usize,
    pub disc_steps: usize,
    pub gen_steps: usize,
    pub max_iterations: u64,
    pub threshold: f64,
    pub clip: f64,
    pub checkpoint_interval: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub lbfgs_memory: usize,
    /// `0` leaves L-BFGS steps uncapped.
    pub lbfgs_max_step: f64,
}

impl OptimizerConfig {
    fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        let d = OptimizerSpec::default();
        Self {
            kind,
            learning_rate,
            beta1: d.beta1,
            beta2: d.beta2,
            rho: d.rho,
            epsilon: d.epsilon,
            lbfgs_memory: d.lbfgs.memory,
            lbfgs_max_step: 0.0,
        }
    }

    pub fn spec(&self) -> OptimizerSpec {
        OptimizerSpec {
            kind: self.kind,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            rho: self.rho,
            epsilon: self.epsilon,
            lbfgs: LbfgsSettings {
                memory: self.lbfgs_memory,
                max_step: (self.lbfgs_max_step > 0.0).then_some(self.lbfgs_max_step),
                ..LbfgsSettings::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub generator: OptimizerConfig,
    pub discriminator: OptimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub norm: NormKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub noise: NoiseKind,
    pub noise_dim: usize,
    /// Draws written to the generated-distribution CSVs.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentSection,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub optimizer: OptimizerSection,
    pub discriminator: DiscriminatorSection,
    pub generator: GeneratorSection,
}

impl ExperimentSpec {
    /// Reference settings for `name`.
    pub fn defaults(name: ExperimentName) -> Self {
        use OptimizerKind::*;
        let mut s = ExperimentSpec {
            experiment: ExperimentSection {
                name,
                seed: 1,
                out_dir: PathBuf::from("runs").join(name.as_str()),
                data: "generate".into(),
            },
            model: ModelConfig::default(),
            train: TrainSection {
                loss: LossKind::Wasserstein,
                batch_size: 32,
                disc_steps: 1,
                gen_steps: 1,
                max_iterations: 1000,
                threshold: 0.0,
                clip: 0.1,
                checkpoint_interval: 0,
            },
            optimizer: OptimizerSection {
                generator: OptimizerConfig::new(RmsProp, 1e-4),
                discriminator: OptimizerConfig::new(RmsProp, 1e-4),
            },
            discriminator: DiscriminatorSection {
                hidden: vec![20, 20, 20],
                activation: Activation::Tanh,
                norm: NormKind::Standardize,
            },
            generator: GeneratorSection {
                hidden: vec![20, 20, 20],
                activation: Activation::Tanh,
                noise: NoiseKind::Uniform,
                noise_dim: 10,
                samples: 10_000,
            },
        };
        let (m, t, o) = (&mut s.model, &mut s.train, &mut s.optimizer);
        if name.is_poisson() {
            t.disc_steps = 5;
        }
        match name {
            ExperimentName::PoissonUq => {
                m.sigma = 0.1;
                m.init = 0.2;
                t.max_iterations = 38_000;
            }
            ExperimentName::PoissonMixture => {
                m.sigma = 0.1;
                m.mu_target = "gmix:0.4,0.3,0.1;0.6,0.8,0.05".into();
                t.max_iterations = 100_000;
            }
            ExperimentName::Poisson2d => {
                t.max_iterations = 100_000;
            }
            ExperimentName::CirTau => {
                m.init = 0.03;
                t.loss = LossKind::Kl;
                t.batch_size = 0;
                t.max_iterations = 2000;
                o.generator = OptimizerConfig::new(Lbfgs, 1.0);
                o.generator.lbfgs_max_step = 0.001;
                o.discriminator = OptimizerConfig::new(Adam, 1e-3);
                s.discriminator.norm = NormKind::Whiten;
            }
            ExperimentName::CirKappa => {
                m.dt = 0.001;
                m.init = 0.2;
                m.path_length = 100_000;
                t.loss = LossKind::Kl;
                t.batch_size = 1000;
                t.disc_steps = 5;
                t.max_iterations = 10_000;
                o.generator = OptimizerConfig::new(RmsProp, 1e-3);
                o.discriminator = OptimizerConfig::new(RmsProp, 1e-3);
                s.discriminator.norm = NormKind::Whiten;
            }
            ExperimentName::CirLandscape => {
                m.dt = 0.001;
                m.r0 = 0.05;
            }
            ExperimentName::OptionVol => {
                m.sigma = 0.2;
                m.init = 0.1;
                m.observations = 100;
                t.loss = LossKind::Vanilla;
                t.batch_size = 100;
                t.max_iterations = 30_000;
            }
            ExperimentName::MleOracle => {
                m.oracle_paths = 50;
            }
        }
        s
    }

    /// Parses TOML text; keys absent from it keep the defaults of its experiment.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let name = user
            .get("experiment")
            .and_then(|e| e.get("name"))
            .and_then(|n| n.as_str())
            .ok_or_else(|| Error::Parse("missing experiment.name".into()))?
            .parse::<ExperimentName>()?;
        let mut base = toml::Table::try_from(Self::defaults(name)).map_err(|e| Error::Parse(e.to_string()))?;
        merge(&mut base, user);
        let spec: Self = base
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec is representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        let m = &self.model;
        if self.experiment.name.is_poisson() && m.n < 2 {
            return Err(Error::Parse("model.n must be at least 2".into()));
        }
        if self.experiment.name.is_adversarial() && m.observations == 0 {
            return Err(Error::Parse("model.observations must be positive".into()));
        }
        match self.experiment.name {
            ExperimentName::PoissonUq | ExperimentName::PoissonMixture => {
                m.mu_target.parse::<crate::targets::Target>()?;
            }
            ExperimentName::Poisson2d => {
                m.joint_target.parse::<crate::targets::JointTarget>()?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            loss: t.loss,
            generator_optimizer: self.optimizer.generator.spec(),
            discriminator_optimizer: self.optimizer.discriminator.spec(),
            batch_size: if t.batch_size == 0 { usize::MAX } else { t.batch_size },
            disc_steps: t.disc_steps,
            gen_steps: t.gen_steps,
            max_iterations: t.max_iterations,
            threshold: t.threshold,
            seed: self.experiment.seed,
            clip: t.clip,
            checkpoint_interval: t.checkpoint_interval,
            checkpoint_dir: (t.checkpoint_interval > 0).then(|| self.experiment.out_dir.clone()),
            discriminator: DiscriminatorSpec {
                hidden: self.discriminator.hidden.clone(),
                activation: self.discriminator.activation,
                norm: self.discriminator.norm,
            },
            ..TrainConfig::default()
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            // integers are accepted where floats are expected
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => {
                base.insert(k, toml::Value::Float(i as f64));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
