//! End-to-end experiment runs: data, training, oracle comparison and artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ana_core::autodiff::Matrix;
use ana_core::models::{CirModel, ForwardModel, ParamSource, PoissonModel};
use ana_core::neural::{Activation, Mlp, NoiseSpec};
use ana_core::oracle::{
    curvature_at, kappa_mle, kl_landscape, tau_asymptotic_std, tau_mle, LandscapeSpec, PairSample, ScanParameter,
    StationaryLaw,
};
use ana_core::stats::{ks_two_sample, mean, variance, Histogram};
use ana_core::trainer::{Estimand, Generator, TrainHistory, Trainer};
use ana_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{grid, ExperimentName, ExperimentSpec};
use crate::data::{cir_params, cir_path, data_rng, gbm_model, obtain_dataset, write_dataset, Dataset};
use crate::targets::{JointTarget, Target};

/// RNG stream for generator initialization and post-training draws.
pub const GENERATOR_STREAM: u64 = 2;

/// Fresh target draws used for KS comparisons.
pub const COMPARE_DRAWS: usize = 10_000;

/// Ordered `key = value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary(pub Vec<(String, String)>);

impl Summary {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn to_text(&self) -> String {
        self.0.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub name: ExperimentName,
    pub history: Option<TrainHistory>,
    pub summary: Summary,
    /// Post-training generator draws, one column per generated quantity.
    pub generated: Option<Matrix>,
    pub files: Vec<PathBuf>,
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io(path, e))
}

/// The forward model and estimand an adversarial experiment trains.
pub fn build_problem(spec: &ExperimentSpec) -> Result<(Box<dyn ForwardModel>, Estimand)> {
    let m = &spec.model;
    let g = &spec.generator;
    let make_generator = |outputs: usize| -> Result<Generator> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.experiment.seed);
        rng.set_stream(GENERATOR_STREAM);
        let mut widths = vec![g.noise_dim];
        widths.extend(&g.hidden);
        widths.push(outputs);
        let net = Mlp::glorot(&widths, g.activation, Activation::Linear, &mut rng)?;
        Generator::new(net, NoiseSpec::new(g.noise, g.noise_dim)?)
    };
    let scalar = |name: &str, truth: f64| Estimand::scalar(name, m.init, Some(truth));
    Ok(match spec.experiment.name {
        ExperimentName::PoissonUq => {
            let model = PoissonModel {
                n: m.n,
                mu: ParamSource::Generated(0),
                sigma: ParamSource::Scalar(0),
            };
            let est = Estimand::new(
                vec!["sigma".into()],
                vec![m.init],
                vec![Some(m.sigma)],
                Some(make_generator(1)?),
            )?;
            (Box::new(model), est)
        }
        ExperimentName::PoissonMixture => {
            let model = PoissonModel {
                n: m.n,
                mu: ParamSource::Generated(0),
                sigma: ParamSource::Fixed(m.sigma),
            };
            (
                Box::new(model),
                Estimand::new(vec![], vec![], vec![], Some(make_generator(1)?))?,
            )
        }
        ExperimentName::Poisson2d => {
            let model = PoissonModel {
                n: m.n,
                mu: ParamSource::Generated(0),
                sigma: ParamSource::Generated(1),
            };
            (
                Box::new(model),
                Estimand::new(vec![], vec![], vec![], Some(make_generator(2)?))?,
            )
        }
        ExperimentName::CirTau => {
            let model = CirModel {
                scheme: m.scheme,
                dt: m.dt,
                alpha: m.alpha,
                kappa: ParamSource::Fixed(m.kappa),
                tau: ParamSource::Scalar(0),
                sigma: ParamSource::Fixed(m.sigma),
            };
            (Box::new(model), scalar("tau", m.tau))
        }
        ExperimentName::CirKappa => {
            let model = CirModel {
                scheme: m.scheme,
                dt: m.dt,
                alpha: m.alpha,
                kappa: ParamSource::Scalar(0),
                tau: ParamSource::Fixed(m.tau),
                sigma: ParamSource::Fixed(m.sigma),
            };
            (Box::new(model), scalar("kappa", m.kappa))
        }
        ExperimentName::OptionVol => (Box::new(gbm_model(m, ParamSource::Scalar(0))), scalar("sigma", m.sigma)),
        other => return Err(Error::Parse(format!("{other} does not train a model"))),
    })
}

/// Histogram CSV of two samples over their pooled range.
fn comparison_csv(generated: &[f64], truth: &[f64], bins: usize) -> Result<String> {
    let (hg, ht) = Histogram::pooled(generated, truth, bins)?;
    let w = hg.bin_width();
    let mut s = String::from("bin_lo,bin_hi,generated_density,true_density\n");
    for (i, e) in hg.edges.windows(2).enumerate() {
        let _ = writeln!(s, "{},{},{},{}", e[0], e[1], hg.counts[i] / w, ht.counts[i] / w);
    }
    Ok(s)
}

/// Runs one experiment and writes its artifacts into `experiment.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunReport> {
    spec.validate()?;
    let out = spec.experiment.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| io(&out, e))?;
    match spec.experiment.name {
        ExperimentName::CirLandscape => return run_scan(spec).map(|r| r.report),
        ExperimentName::MleOracle => return run_oracle(spec),
        _ => {}
    }
    let started = Instant::now();
    let data = obtain_dataset(spec)?;
    let mut files = if spec.experiment.data == "generate" {
        write_dataset(spec, &data, &out.join("data"))?
    } else {
        vec![]
    };
    let (model, estimand) = build_problem(spec)?;
    let cfg = spec.train_config();
    let mut trainer = Trainer::new(cfg, model.as_ref(), &data.observations, estimand)?;
    let result = trainer.run();
    let history_path = out.join("history.csv");
    write_text(&history_path, &trainer.history().to_csv(true))?;
    files.push(history_path);
    result?;

    let (est, history) = trainer.into_parts();
    let mut summary = Summary::default();
    summary.push("experiment", spec.experiment.name);
    summary.push("seed", spec.experiment.seed);
    summary.push("iterations", history.len());
    summary.push("stopped_early", history.stopped_early);
    for (i, name) in est.names.iter().enumerate() {
        let trace = history.trace(name).unwrap_or_default();
        summary.push(&format!("{name}_final"), est.scalars[i]);
        if !trace.is_empty() {
            summary.push(&format!("{name}_tail_mean"), TrainHistory::tail_mean(&trace, 0.1));
        }
        if let Some(t) = est.truth[i] {
            summary.push(&format!("{name}_true"), t);
        }
    }
    if !history.is_empty() {
        summary.push(
            "model_loss_tail_mean",
            TrainHistory::tail_mean(&history.model_losses(), 0.1),
        );
        summary.push(
            "disc_loss_tail_mean",
            TrainHistory::tail_mean(&history.disc_losses(), 0.1),
        );
    }
    summary.push("saturations", history.events.saturations);
    summary.push("negative_samples", history.events.negative_samples);
    summary.push("lbfgs_fallbacks", history.events.lbfgs_fallbacks);
    if spec.experiment.name == ExperimentName::CirTau {
        let x = data.observations.column(0).to_vec();
        let y = data.observations.column(1).to_vec();
        let s = PairSample::new(x, y, spec.model.dt)?;
        summary.push("tau_mle_on_data", tau_mle(&s, spec.model.kappa, spec.model.sigma)?);
    }

    let generated = match &est.generator {
        Some(g) => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.experiment.seed);
            rng.set_stream(GENERATOR_STREAM + 1);
            let draws = g.sample(spec.generator.samples, &mut rng)?;
            files.extend(report_generated(spec, &data, &draws, &mut summary)?);
            Some(draws)
        }
        None => None,
    };
    summary.push("elapsed_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
    let summary_path = out.join("summary.txt");
    write_text(&summary_path, &summary.to_text())?;
    files.push(summary_path);
    Ok(RunReport {
        name: spec.experiment.name,
        history: Some(history),
        summary,
        generated,
        files,
    })
}

fn report_generated(
    spec: &ExperimentSpec,
    data: &Dataset,
    draws: &Matrix,
    summary: &mut Summary,
) -> Result<Vec<PathBuf>> {
    let out = &spec.experiment.out_dir;
    let bins = spec.model.bins;
    let mut files = vec![];
    let mut rng = data_rng(spec.experiment.seed);
    rng.set_stream(GENERATOR_STREAM + 2);
    let mu: Vec<f64> = draws.column(0).to_vec();
    match spec.experiment.name {
        ExperimentName::Poisson2d => {
            let abs_sigma: Vec<f64> = draws.column(1).iter().map(|v| v.abs()).collect();
            let target: JointTarget = spec.model.joint_target.parse()?;
            let fresh: Vec<[f64; 2]> = (0..COMPARE_DRAWS).map(|_| target.sample(&mut rng)).collect();
            let t_mu: Vec<f64> = fresh.iter().map(|d| d[0]).collect();
            let t_sig: Vec<f64> = fresh.iter().map(|d| d[1].abs()).collect();
            for (label, g, t) in [("mu", &mu, &t_mu), ("abs_sigma", &abs_sigma, &t_sig)] {
                let f = out.join(format!("hist_{label}.csv"));
                write_text(&f, &comparison_csv(g, t, bins)?)?;
                files.push(f);
                summary.push(&format!("{label}_ks"), ks_two_sample(g, t)?);
            }
            let (gcov, tcov) = (covariance(&mu, &abs_sigma), covariance(&t_mu, &t_sig));
            summary.push("generated_mean", format!("{},{}", mean(&mu), mean(&abs_sigma)));
            summary.push("target_mean", format!("{},{}", mean(&t_mu), mean(&t_sig)));
            summary.push("generated_cov", format!("{},{},{}", gcov[0], gcov[1], gcov[2]));
            summary.push("target_cov", format!("{},{},{}", tcov[0], tcov[1], tcov[2]));
            let f = out.join("generated.csv");
            let m = ndarray::Array2::from_shape_fn((mu.len(), 2), |(i, j)| if j == 0 { mu[i] } else { abs_sigma[i] });
            crate::data::write_csv(&f, &["mu".into(), "abs_sigma".into()], &m)?;
            files.push(f);
        }
        _ => {
            let target: Target = spec.model.mu_target.parse()?;
            let fresh = target.sample_n(COMPARE_DRAWS, &mut rng);
            let f = out.join("hist_mu.csv");
            write_text(&f, &comparison_csv(&mu, &fresh, bins)?)?;
            files.push(f);
            let f = out.join("generated.csv");
            crate::data::write_column(&f, "mu", &mu)?;
            files.push(f);
            summary.push("mu_target", &target);
            summary.push("mu_ks", ks_two_sample(&mu, &fresh)?);
            summary.push("mu_mean", mean(&mu));
            if let Some(m) = target.mean() {
                summary.push("mu_target_mean", m);
            }
            if let Some((_, t)) = &data.truth {
                summary.push("mu_ks_vs_data", ks_two_sample(&mu, &t.column(0).to_vec())?);
            }
        }
    }
    Ok(files)
}

/// `[var_a, cov_ab, var_b]`, population normalization.
fn covariance(a: &[f64], b: &[f64]) -> [f64; 3] {
    let (ma, mb) = (mean(a), mean(b));
    let n = a.len() as f64;
    let c = |x: &[f64], mx: f64, y: &[f64], my: f64| x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / n;
    [c(a, ma, a, ma), c(a, ma, b, mb), c(b, mb, b, mb)]
}

#[derive(Clone, Debug)]
pub struct ScanReport {
    pub kappa: Vec<(f64, f64)>,
    pub tau: Vec<(f64, f64)>,
    pub curvature_kappa: f64,
    pub curvature_tau: f64,
    pub report: RunReport,
}

fn scan_csv(scan: &[(f64, f64)]) -> String {
    scan.iter()
        .fold(String::from("parameter_value,discrete_kl\n"), |mut s, (v, kl)| {
            let _ = writeln!(s, "{v},{kl}");
            s
        })
}

/// Discrete-KL landscapes over κ and τ around the configured reference.
pub fn run_scan(spec: &ExperimentSpec) -> Result<ScanReport> {
    let m = &spec.model;
    let out = &spec.experiment.out_dir;
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let ls = LandscapeSpec {
        reference: cir_params(m)?,
        scheme: m.scheme,
        r0: m.r0,
        steps: m.scan_steps,
        bins: m.bins,
        realizations: m.scan_realizations,
        seed: spec.experiment.seed,
    };
    let kappa = kl_landscape(&ls, ScanParameter::Kappa, &grid(m.kappa_grid)?)?;
    let tau = kl_landscape(&ls, ScanParameter::Tau, &grid(m.tau_grid)?)?;
    let ck = curvature_at(&kappa, m.kappa)?;
    let ct = curvature_at(&tau, m.tau)?;
    let mut files = vec![];
    for (label, scan) in [("kappa", &kappa), ("tau", &tau)] {
        let f = out.join(format!("kl_{label}.csv"));
        write_text(&f, &scan_csv(scan))?;
        files.push(f);
    }
    let mut summary = Summary::default();
    summary.push("experiment", spec.experiment.name);
    summary.push("seed", spec.experiment.seed);
    summary.push("scan_steps", m.scan_steps);
    summary.push("realizations", m.scan_realizations);
    summary.push("curvature_kappa", ck);
    summary.push("curvature_tau", ct);
    summary.push("curvature_ratio", ct / ck.abs().max(f64::MIN_POSITIVE));
    let f = out.join("summary.txt");
    write_text(&f, &summary.to_text())?;
    files.push(f);
    Ok(ScanReport {
        kappa,
        tau,
        curvature_kappa: ck,
        curvature_tau: ct,
        report: RunReport {
            name: spec.experiment.name,
            history: None,
            summary,
            generated: None,
            files,
        },
    })
}

/// Closed-form estimators on `oracle_paths` seeded paths.
pub fn run_oracle(spec: &ExperimentSpec) -> Result<RunReport> {
    let m = &spec.model;
    let out = &spec.experiment.out_dir;
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    if m.oracle_paths == 0 {
        return Err(Error::Parse("model.oracle_paths must be positive".into()));
    }
    let mut csv = String::from("path,tau_hat,kappa_hat,kappa_denominator\n");
    let mut taus = vec![];
    for i in 0..m.oracle_paths {
        let path = if i == 0 && spec.experiment.data != "generate" {
            obtain_dataset(spec)?
                .path
                .ok_or_else(|| Error::Parse("oracle data must be a path".into()))?
        } else {
            cir_path(m, &mut data_rng(spec.experiment.seed.wrapping_add(i as u64)))?
        };
        let s = PairSample::from_path(&path, m.dt)?;
        let t = tau_mle(&s, m.kappa, m.sigma)?;
        let (k, den) = match kappa_mle(&s, m.tau) {
            Ok(k) => (k.estimate, k.denominator),
            Err(Error::Degenerate { denominator }) => (f64::NAN, denominator),
            Err(e) => return Err(e),
        };
        let _ = writeln!(csv, "{i},{t},{k},{den}");
        taus.push(t);
    }
    let law = StationaryLaw::new(m.kappa, m.tau, m.sigma)?;
    let sd = tau_asymptotic_std(m.kappa, m.sigma, m.dt, 1.0 / m.tau, m.path_length);
    let sd_stationary = tau_asymptotic_std(m.kappa, m.sigma, m.dt, law.mean_inverse(), m.path_length);
    let mut summary = Summary::default();
    summary.push("experiment", spec.experiment.name);
    summary.push("seed", spec.experiment.seed);
    summary.push("paths", m.oracle_paths);
    summary.push("tau_hat", taus[0]);
    summary.push("tau_true", m.tau);
    summary.push("tau_hat_mean", mean(&taus));
    if taus.len() > 1 {
        summary.push("tau_hat_std", variance(&taus).sqrt());
    }
    summary.push("tau_asymptotic_std", sd);
    summary.push("tau_asymptotic_std_stationary", sd_stationary);
    summary.push("tau_three_sigma_bound", 3.0 * sd);
    summary.push("within_three_sigma", (taus[0] - m.tau).abs() < 3.0 * sd);
    let mut files = vec![];
    let f = out.join("oracle.csv");
    write_text(&f, &csv)?;
    files.push(f);
    let f = out.join("summary.txt");
    write_text(&f, &summary.to_text())?;
    files.push(f);
    Ok(RunReport {
        name: spec.experiment.name,
        history: None,
        summary,
        generated: None,
        files,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub ks: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub target_mean: Option<f64>,
    pub target_variance: Option<f64>,
}

impl CompareReport {
    pub fn to_summary(&self, target: &Target) -> Summary {
        let mut s = Summary::default();
        s.push("target", target);
        s.push("ks", self.ks);
        s.push("sample_mean", self.sample_mean);
        s.push("sample_variance", self.sample_variance);
        match (self.target_mean, self.target_variance) {
            (Some(m), v) => {
                s.push("target_mean", m);
                s.push("mean_error", self.sample_mean - m);
                if let Some(v) = v {
                    s.push("target_variance", v);
                    s.push("variance_error", self.sample_variance - v);
                }
            }
            (None, _) => s.push("moments", "skipped, not finite for this target"),
        }
        s
    }
}

/// Two-sample KS against [`COMPARE_DRAWS`] fresh target draws, plus moment errors.
pub fn compare(sample: &[f64], target: &Target, seed: u64) -> Result<CompareReport> {
    if sample.is_empty() {
        return Err(Error::Parse("sample is empty".into()));
    }
    let mut rng = data_rng(seed);
    let fresh = target.sample_n(COMPARE_DRAWS, &mut rng);
    Ok(CompareReport {
        ks: ks_two_sample(sample, &fresh)?,
        sample_mean: mean(sample),
        sample_variance: if sample.len() > 1 { variance(sample) } else { 0.0 },
        target_mean: target.mean(),
        target_variance: target.variance(),
    })
}
