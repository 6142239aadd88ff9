//! Synthetic data sets, their CSV files and manifests.

use std::fs;
use std::path::{Path, PathBuf};

use ana_core::autodiff::Matrix;
use ana_core::models::{simulate_cir_path, CirParams, GbmModel, ParamSource, PoissonParams};
use ana_core::oracle::{resample_uniform, StationaryLaw};
use ana_core::{Error, Result};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentName, ExperimentSpec, ModelConfig};
use crate::targets::{JointTarget, Target};

/// RNG stream reserved for data generation; training uses stream 0.
pub const DATA_STREAM: u64 = 1;

pub fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATA_STREAM);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Rows fed to the discriminator as real samples.
    pub observations: Matrix,
    pub columns: Vec<String>,
    /// Hidden draws behind each observation, when generated.
    pub truth: Option<(Vec<String>, Matrix)>,
    /// Full CIR path, when the observations are its consecutive pairs.
    pub path: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentName,
    pub seed: u64,
    pub model: ModelConfig,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest {}: {e}", path.display())))
    }

    /// Spec that regenerates the recorded data.
    pub fn to_spec(&self) -> ExperimentSpec {
        let mut s = ExperimentSpec::defaults(self.experiment);
        s.experiment.seed = self.seed;
        s.model = self.model.clone();
        s
    }
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn cir_params(m: &ModelConfig) -> Result<CirParams> {
    CirParams::new(m.kappa, m.tau, m.sigma, m.dt, m.alpha)
}

pub fn gbm_model(m: &ModelConfig, sigma: ParamSource) -> GbmModel {
    GbmModel {
        s: m.spot,
        strike: m.strike,
        r: m.rate,
        t: m.expiry,
        sigma,
        paths_per_observation: m.paths_per_observation,
        discount: m.discount,
    }
}

/// One CIR path of `path_length` steps; `r0 <= 0` starts from the stationary law.
pub fn cir_path(m: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let p = cir_params(m)?;
    let r0 = if m.r0 > 0.0 {
        m.r0
    } else {
        StationaryLaw::new(m.kappa, m.tau, m.sigma)?.sample(rng)
    };
    let path = simulate_cir_path(r0, m.path_length, &p, m.scheme, rng)?;
    if path.reflections > 0 {
        log::warn!("{} reflections while generating the CIR path", path.reflections);
    }
    Ok(path.values)
}

fn pairs(path: &[f64]) -> Matrix {
    Array2::from_shape_fn((path.len() - 1, 2), |(i, j)| path[i + j])
}

fn poisson_rows(m: &ModelConfig, params: &[(f64, f64)]) -> Result<Matrix> {
    let mut obs = Array2::zeros((params.len(), m.n));
    for (i, &(mu, sigma)) in params.iter().enumerate() {
        let u = PoissonParams::new(mu, sigma, m.n)?.solve()?;
        obs.row_mut(i).assign(&ndarray::ArrayView1::from(&u));
    }
    Ok(obs)
}

/// Generates the data set described by `spec` from its seed.
pub fn make_dataset(spec: &ExperimentSpec) -> Result<Dataset> {
    let m = &spec.model;
    let mut rng = data_rng(spec.experiment.seed);
    let name = spec.experiment.name;
    match name {
        ExperimentName::PoissonUq | ExperimentName::PoissonMixture => {
            let target: Target = m.mu_target.parse()?;
            let mu = target.sample_n(m.observations, &mut rng);
            let params: Vec<(f64, f64)> = mu.iter().map(|&v| (v, m.sigma)).collect();
            Ok(Dataset {
                observations: poisson_rows(m, &params)?,
                columns: (1..=m.n).map(|i| format!("u{i}")).collect(),
                truth: Some((
                    vec!["mu".into()],
                    Array2::from_shape_vec((mu.len(), 1), mu).expect("n x 1"),
                )),
                path: None,
            })
        }
        ExperimentName::Poisson2d => {
            let target: JointTarget = m.joint_target.parse()?;
            let draws: Vec<[f64; 2]> = (0..m.observations).map(|_| target.sample(&mut rng)).collect();
            let params: Vec<(f64, f64)> = draws.iter().map(|d| (d[0], d[1])).collect();
            let truth = Array2::from_shape_fn(
                (draws.len(), 2),
                |(i, j)| if j == 0 { draws[i][0] } else { draws[i][1].abs() },
            );
            Ok(Dataset {
                observations: poisson_rows(m, &params)?,
                columns: (1..=m.n).map(|i| format!("u{i}")).collect(),
                truth: Some((vec!["mu".into(), "abs_sigma".into()], truth)),
                path: None,
            })
        }
        ExperimentName::CirTau | ExperimentName::MleOracle | ExperimentName::CirLandscape => {
            let path = cir_path(m, &mut rng)?;
            Ok(Dataset {
                observations: pairs(&path),
                columns: vec!["x".into(), "y".into()],
                truth: None,
                path: Some(path),
            })
        }
        ExperimentName::CirKappa => {
            let p = cir_params(m)?;
            let s = resample_uniform(&p, m.scheme, m.resample_lo, m.resample_hi, m.path_length, &mut rng)?;
            let obs = Array2::from_shape_fn((s.len(), 2), |(i, j)| if j == 0 { s.x[i] } else { s.y[i] });
            Ok(Dataset {
                observations: obs,
                columns: vec!["x".into(), "y".into()],
                truth: None,
                path: None,
            })
        }
        ExperimentName::OptionVol => {
            let model = gbm_model(m, ParamSource::Fixed(m.sigma));
            let prices: Vec<f64> = (0..m.observations)
                .map(|_| {
                    let w: Vec<f64> = (0..m.paths_per_observation)
                        .map(|_| StandardNormal.sample(&mut rng))
                        .collect();
                    model.observe(m.sigma, &w)
                })
                .collect();
            Ok(Dataset {
                observations: Array2::from_shape_vec((prices.len(), 1), prices).expect("n x 1"),
                columns: vec!["price".into()],
                truth: None,
                path: None,
            })
        }
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(csv_err)?;
    for row in rows.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn write_column(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let m = Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("n x 1");
    write_csv(path, &[name.to_string()], &m)
}

/// Numeric CSV with a header row.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let csv_err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for field in rec.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}: row {}: bad number '{field}'", path.display(), rows + 2)))?,
            );
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let m = Array2::from_shape_vec((rows, header.len()), values)
        .map_err(|_| Error::Parse(format!("{}: ragged rows", path.display())))?;
    Ok((header, m))
}

/// Writes the data files and `manifest.json` into `dir`.
pub fn write_dataset(spec: &ExperimentSpec, data: &Dataset, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files = Vec::new();
    let main = match (&data.path, spec.experiment.name) {
        (Some(path), _) => {
            let f = dir.join("path.csv");
            write_column(&f, "value", path)?;
            f
        }
        (None, ExperimentName::OptionVol) => {
            let f = dir.join("prices.csv");
            write_csv(&f, &data.columns, &data.observations)?;
            f
        }
        (None, ExperimentName::CirKappa) => {
            let f = dir.join("pairs.csv");
            write_csv(&f, &data.columns, &data.observations)?;
            f
        }
        (None, _) => {
            let f = dir.join("observations.csv");
            write_csv(&f, &data.columns, &data.observations)?;
            f
        }
    };
    files.push(main);
    if let Some((names, t)) = &data.truth {
        let f = dir.join("truth.csv");
        write_csv(&f, names, t)?;
        files.push(f);
    }
    let manifest = Manifest {
        experiment: spec.experiment.name,
        seed: spec.experiment.seed,
        model: spec.model.clone(),
        files: files
            .iter()
            .map(|f| f.file_name().expect("file").to_string_lossy().into_owned())
            .collect(),
    };
    let mf = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&mf, text + "\n").map_err(|e| io(&mf, e))?;
    files.push(mf);
    Ok(files)
}

/// Reads observations from a CSV in the format [`write_dataset`] produces.
pub fn load_dataset(spec: &ExperimentSpec, path: &Path) -> Result<Dataset> {
    let (header, m) = read_csv(path)?;
    let name = spec.experiment.name;
    let want = match name {
        n if n.is_poisson() => spec.model.n,
        ExperimentName::OptionVol => 1,
        _ => m.ncols(),
    };
    if m.ncols() != want {
        return Err(Error::Parse(format!(
            "{}: expected {want} columns for {name}, found {}",
            path.display(),
            m.ncols()
        )));
    }
    match (name, m.ncols()) {
        (
            ExperimentName::CirTau
            | ExperimentName::MleOracle
            | ExperimentName::CirLandscape
            | ExperimentName::CirKappa,
            1,
        ) => {
            let path: Vec<f64> = m.column(0).to_vec();
            if path.len() < 2 {
                return Err(Error::Parse("a CIR path needs at least two values".into()));
            }
            Ok(Dataset {
                observations: pairs(&path),
                columns: vec!["x".into(), "y".into()],
                truth: None,
                path: Some(path),
            })
        }
        (n, c) if !n.is_poisson() && n != ExperimentName::OptionVol && c != 2 => Err(Error::Parse(format!(
            "{}: CIR data needs one column (path) or two (pairs)",
            path.display()
        ))),
        _ => Ok(Dataset {
            observations: m,
            columns: header,
            truth: None,
            path: None,
        }),
    }
}

/// Generated or loaded data, depending on `experiment.data`.
pub fn obtain_dataset(spec: &ExperimentSpec) -> Result<Dataset> {
    match spec.experiment.data.as_str() {
        "generate" => make_dataset(spec),
        file => load_dataset(spec, Path::new(file)),
    }
}
