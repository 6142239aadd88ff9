//! Multilayer perceptrons for the generator and the discriminator.
//!
//! Weights are stored `fan_in x fan_out` so a batch `X` (one sample per row)
//! maps to `act(X W + b)`. The flat parameter order, used by optimizers and
//! by the text serialization, is layer by layer: weights row-major, then the
//! bias vector.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Matrix, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    /// Also accepted as `identity`.
    Linear,
}

impl Activation {
    fn apply_tape(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Relu => tape.relu(x),
            Activation::Linear => x,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "linear" | "identity" => Ok(Activation::Linear),
            other => Err(Error::Parse(format!("unknown activation '{other}'"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        })
    }
}

/// Fully connected network with one hidden activation and one output activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr", into = "MlpRepr")]
pub struct Mlp {
    layer_widths: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden: Activation,
    output: Activation,
}

#[derive(Serialize, Deserialize)]
struct MlpRepr {
    layer_widths: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<f64>,
}

impl From<Mlp> for MlpRepr {
    fn from(m: Mlp) -> Self {
        MlpRepr {
            params: m.flat_params(),
            layer_widths: m.layer_widths,
            hidden: m.hidden,
            output: m.output,
        }
    }
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRepr) -> Result<Self> {
        let mut m = Mlp::zeros(&r.layer_widths, r.hidden, r.output)?;
        m.set_flat_params(&r.params)?;
        Ok(m)
    }
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(layer_widths: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if layer_widths.len() < 2 || layer_widths.contains(&0) {
            return Err(Error::contract(format!(
                "layer widths must be at least two positive entries, got {layer_widths:?}"
            )));
        }
        let weights = layer_widths.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = layer_widths[1..].iter().map(|&w| Array1::zeros(w)).collect();
        Ok(Self {
            layer_widths: layer_widths.to_vec(),
            weights,
            biases,
            hidden,
            output,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        layer_widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut m = Self::zeros(layer_widths, hidden, output)?;
        for w in &mut m.weights {
            let (fan_in, fan_out) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bound");
            w.mapv_inplace(|_| dist.sample(rng));
        }
        Ok(m)
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().expect("non-empty widths")
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            w.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
            b.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
        }
        Ok(())
    }

    /// Registers every weight and bias as a tape leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        let weights = self.weights.iter().map(|w| tape.leaf(w.clone())).collect();
        let biases = self
            .biases
            .iter()
            .map(|b| tape.leaf(b.clone().insert_axis(Axis(0))))
            .collect();
        BoundMlp {
            weights,
            biases,
            hidden: self.hidden,
            output: self.output,
        }
    }

    /// Forward pass on the tape; rows of `input` are samples.
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<(Var, BoundMlp)> {
        let bound = self.bind(tape);
        let out = bound.forward(tape, input)?;
        Ok((out, bound))
    }

    /// Plain evaluation without recording a graph.
    pub fn evaluate(&self, input: &Matrix) -> Result<Matrix> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape {
                op: "mlp_forward",
                lhs: (input.nrows(), self.input_dim()),
                rhs: input.dim(),
            });
        }
        let last = self.weights.len() - 1;
        let mut h = input.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let act = if i == last { self.output } else { self.hidden };
            h = h.dot(w) + b;
            h.mapv_inplace(|x| act.apply(x));
        }
        Ok(h)
    }

    /// Clamps every weight and bias into `[-c, c]`.
    pub fn clip_weights(&mut self, c: f64) -> Result<()> {
        if !(c > 0.0) {
            return Err(Error::contract(format!("clip constant must be positive, got {c}")));
        }
        for w in &mut self.weights {
            w.mapv_inplace(|x| x.clamp(-c, c));
        }
        for b in &mut self.biases {
            b.mapv_inplace(|x| x.clamp(-c, c));
        }
        Ok(())
    }

    /// Text checkpoint: header lines followed by one parameter per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let widths: Vec<String> = self.layer_widths.iter().map(|w| w.to_string()).collect();
        writeln!(s, "mlp").unwrap();
        writeln!(s, "widths {}", widths.join(" ")).unwrap();
        writeln!(s, "hidden {}", self.hidden).unwrap();
        writeln!(s, "output {}", self.output).unwrap();
        for p in self.flat_params() {
            // Display for f64 is the shortest representation that round-trips
            writeln!(s, "{p}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let bad = |what: &str| Error::Parse(format!("mlp text: {what}"));
        if lines.next() != Some("mlp") {
            return Err(bad("missing 'mlp' header"));
        }
        let field = |line: Option<&str>, key: &str| -> Result<String> {
            let line = line.ok_or_else(|| bad(&format!("missing '{key}' line")))?;
            line.strip_prefix(key)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| bad(&format!("expected '{key}', found '{line}'")))
        };
        let widths: Vec<usize> = field(lines.next(), "widths")?
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| bad(&format!("bad width '{w}'"))))
            .collect::<Result<_>>()?;
        let hidden: Activation = field(lines.next(), "hidden")?.parse()?;
        let output: Activation = field(lines.next(), "output")?.parse()?;
        let params: Vec<f64> = lines
            .map(|l| l.parse().map_err(|_| bad(&format!("bad parameter '{l}'"))))
            .collect::<Result<_>>()?;
        let mut m = Self::zeros(&widths, hidden, output)?;
        m.set_flat_params(&params)?;
        Ok(m)
    }
}

/// An [`Mlp`] whose parameters live on a particular tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    weights: Vec<Var>,
    biases: Vec<Var>,
    hidden: Activation,
    output: Activation,
}

impl BoundMlp {
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let want = tape.shape(self.weights[0]).0;
        if tape.shape(input).1 != want {
            return Err(Error::Shape {
                op: "mlp_forward",
                lhs: (tape.shape(input).0, want),
                rhs: tape.shape(input),
            });
        }
        let last = self.weights.len() - 1;
        let mut h = input;
        for (i, (&w, &b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = tape.matmul(h, w)?;
            let z = tape.add(z, b)?;
            let act = if i == last { self.output } else { self.hidden };
            h = act.apply_tape(tape, z);
        }
        Ok(h)
    }

    /// Parameter adjoints in flat order.
    pub fn gradient(&self, grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for (&w, &b) in self.weights.iter().zip(&self.biases) {
            out.extend(grads.wrt(w).iter());
            out.extend(grads.wrt(b).iter());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    StandardNormal,
    /// Uniform on `[-1, 1]^d`.
    Uniform,
}

/// Distribution of the generator's input noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub dim: usize,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("noise dimension must be at least 1"));
        }
        Ok(Self { kind, dim })
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Matrix {
        match self.kind {
            NoiseKind::StandardNormal => Array2::from_shape_simple_fn((count, self.dim), || StandardNormal.sample(rng)),
            NoiseKind::Uniform => {
                let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
                Array2::from_shape_simple_fn((count, self.dim), || u.sample(rng))
            }
        }
    }
}

/// Draws `count` generator outputs, one per row.
pub fn sample_generator<R: Rng + ?Sized>(net: &Mlp, noise: &NoiseSpec, count: usize, rng: &mut R) -> Result<Matrix> {
    if noise.dim != net.input_dim() {
        return Err(Error::contract(format!(
            "noise dimension {} does not match generator input width {}",
            noise.dim,
            net.input_dim()
        )));
    }
    net.evaluate(&noise.sample(count, rng))
}

/// Fixed affine preprocessing in front of the discriminator: `(x - shift) T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    shift: Vec<f64>,
    /// Row-major `d x d`.
    transform: Vec<f64>,
    dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    None,
    /// Per-column zero mean, unit variance.
    Standardize,
    /// Full decorrelation through the Cholesky factor of the covariance.
    Whiten,
}

impl InputNorm {
    pub fn identity(dim: usize) -> Self {
        let mut t = vec![0.0; dim * dim];
        for i in 0..dim {
            t[i * dim + i] = 1.0;
        }
        Self {
            shift: vec![0.0; dim],
            transform: t,
            dim,
        }
    }

    /// Fits the transform on `data` (one observation per row).
    pub fn fit(kind: NormKind, data: &Matrix) -> Result<Self> {
        let (n, d) = data.dim();
        if n < 2 {
            return Err(Error::contract("normalization needs at least two observations"));
        }
        if kind == NormKind::None {
            return Ok(Self::identity(d));
        }
        let mean = data.mean_axis(Axis(0)).expect("non-empty");
        let centered = data - &mean;
        let mut cov = centered.t().dot(&centered) / (n as f64 - 1.0);
        let mut transform = vec![0.0; d * d];
        match kind {
            NormKind::Standardize => {
                for i in 0..d {
                    let sd = cov[[i, i]].sqrt();
                    transform[i * d + i] = if sd > 0.0 { 1.0 / sd } else { 1.0 };
                }
            }
            NormKind::Whiten => {
                let ridge = 1e-9 * cov.diag().sum() / d as f64;
                for i in 0..d {
                    cov[[i, i]] += ridge;
                }
                let l = cholesky(&cov)?;
                // z = x L^{-T} has identity covariance
                let linv = lower_inverse(&l);
                for i in 0..d {
                    for j in 0..d {
                        transform[i * d + j] = linv[[j, i]];
                    }
                }
            }
            NormKind::None => unreachable!(),
        }
        Ok(Self {
            shift: mean.to_vec(),
            transform,
            dim: d,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn transform_matrix(&self) -> Matrix {
        Array2::from_shape_vec((self.dim, self.dim), self.transform.clone()).expect("square")
    }

    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let shift = tape.row(&self.shift);
        let centered = tape.sub(x, shift)?;
        let t = tape.leaf(self.transform_matrix());
        tape.matmul(centered, t)
    }

    pub fn apply_values(&self, x: &Matrix) -> Matrix {
        let shift = Array1::from(self.shift.clone());
        (x - &shift).dot(&self.transform_matrix())
    }
}

fn cholesky(a: &Matrix) -> Result<Matrix> {
    let d = a.nrows();
    let mut l = Array2::zeros((d, d));
    for j in 0..d {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) {
            return Err(Error::Domain {
                op: "cholesky",
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..d {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / ljj;
        }
    }
    Ok(l)
}

fn lower_inverse(l: &Matrix) -> Matrix {
    let d = l.nrows();
    let mut inv = Array2::zeros((d, d));
    for col in 0..d {
        for i in col..d {
            let mut v = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                v -= l[[i, k]] * inv[[k, col]];
            }
            inv[[i, col]] = v / l[[i, i]];
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs() {
        let sig = Mlp::zeros(&[3, 4, 2], Activation::Tanh, Activation::Sigmoid).unwrap();
        let out = sig.evaluate(&array![[1.0, -2.0, 0.5]]).unwrap();
        assert_eq!(out, array![[0.5, 0.5]]);
        let lin = Mlp::zeros(&[3, 4, 2], Activation::Tanh, Activation::Linear).unwrap();
        assert_eq!(lin.evaluate(&array![[1.0, -2.0, 0.5]]).unwrap(), array![[0.0, 0.0]]);
    }

    #[test]
    fn one_two_one_matches_hand_evaluation() {
        let mut net = Mlp::zeros(&[1, 2, 1], Activation::Tanh, Activation::Sigmoid).unwrap();
        // W1 = [0.5, -1.5], b1 = [0.1, 0.2], W2 = [2.0; -0.7], b2 = [0.3]
        net.set_flat_params(&[0.5, -1.5, 0.1, 0.2, 2.0, -0.7, 0.3]).unwrap();
        let x = 0.8f64;
        let h1 = (0.5 * x + 0.1).tanh();
        let h2 = (-1.5 * x + 0.2).tanh();
        let z = 2.0 * h1 - 0.7 * h2 + 0.3;
        let want = 1.0 / (1.0 + (-z).exp());

        let mut tape = Tape::new();
        let input = tape.leaf(array![[x]]);
        let (out, _) = net.forward(&mut tape, input).unwrap();
        assert!((tape.scalar_value(out) - want).abs() < 1e-12);
        assert!((net.evaluate(&array![[x]]).unwrap()[[0, 0]] - want).abs() < 1e-12);
    }

    #[test]
    fn param_count_formula() {
        let net = Mlp::zeros(&[2, 20, 20, 20, 1], Activation::Tanh, Activation::Sigmoid).unwrap();
        assert_eq!(net.param_count(), 2 * 20 + 20 + 20 * 20 + 20 + 20 * 20 + 20 + 20 + 1);
        assert_eq!(net.flat_params().len(), net.param_count());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = Mlp::zeros(&[3, 2, 1], Activation::Tanh, Activation::Linear).unwrap();
        assert!(net.evaluate(&array![[1.0, 2.0]]).is_err());
        let mut tape = Tape::new();
        let x = tape.leaf(array![[1.0, 2.0]]);
        assert!(matches!(net.forward(&mut tape, x), Err(Error::Shape { .. })));
        assert!(Mlp::zeros(&[3], Activation::Tanh, Activation::Linear).is_err());
        assert!(Mlp::zeros(&[3, 0, 1], Activation::Tanh, Activation::Linear).is_err());
    }

    #[test]
    fn weight_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::glorot(&[2, 5, 3, 1], Activation::Tanh, Activation::Sigmoid, &mut rng).unwrap();
        let x = array![[0.3, -0.4], [1.2, 0.7], [-0.5, 0.1]];
        let base = net.flat_params();

        let mut tape = Tape::new();
        let (out, bound) = {
            let input = tape.leaf(x.clone());
            net.forward(&mut tape, input).unwrap()
        };
        let loss = tape.mean(out).unwrap();
        let grad = bound.gradient(&tape.backward(loss).unwrap());
        let h = 1e-6;
        for i in 0..base.len() {
            let eval = |delta: f64| {
                let mut w = net.clone();
                let mut p = base.clone();
                p[i] += delta;
                w.set_flat_params(&p).unwrap();
                w.evaluate(&x).unwrap().mean().unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(err < 1e-5, "param {i}: fd {fd} vs ad {}", grad[i]);
        }
    }

    #[test]
    fn sample_generator_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::zeros(&[4, 3, 1], Activation::Tanh, Activation::Linear).unwrap();
        let n = net.param_count();
        let mut p = vec![0.0; n];
        p[n - 1] = 0.42;
        net.set_flat_params(&p).unwrap();
        let noise = NoiseSpec::new(NoiseKind::Uniform, 4).unwrap();
        let s = sample_generator(&net, &noise, 5, &mut rng).unwrap();
        assert!(s.iter().all(|&v| v == 0.42));
        assert_eq!(sample_generator(&net, &noise, 0, &mut rng).unwrap().nrows(), 0);

        let g = Mlp::glorot(&[4, 8, 2], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
        let a = sample_generator(&g, &noise, 16, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = sample_generator(&g, &noise, 16, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
        let wrong = NoiseSpec::new(NoiseKind::StandardNormal, 3).unwrap();
        assert!(sample_generator(&g, &wrong, 1, &mut rng).is_err());
        assert!(NoiseSpec::new(NoiseKind::Uniform, 0).is_err());
    }

    #[test]
    fn clip_examples() {
        let mut net = Mlp::zeros(&[1, 1, 1], Activation::Tanh, Activation::Linear).unwrap();
        net.set_flat_params(&[-2.0, 0.01, 5.0, 0.05]).unwrap();
        net.clip_weights(0.1).unwrap();
        assert_eq!(net.flat_params(), vec![-0.1, 0.01, 0.1, 0.05]);
        let before = net.clone();
        net.clip_weights(0.1).unwrap();
        assert_eq!(net, before);
        assert!(net.clip_weights(0.0).is_err());
        assert!(net.clip_weights(-1.0).is_err());
    }

    #[test]
    fn text_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::glorot(&[3, 7, 2], Activation::Tanh, Activation::Sigmoid, &mut rng).unwrap();
        let back = Mlp::from_text(&net.to_text()).unwrap();
        assert_eq!(back, net);
        let bits: Vec<u64> = back.flat_params().iter().map(|x| x.to_bits()).collect();
        let want: Vec<u64> = net.flat_params().iter().map(|x| x.to_bits()).collect();
        assert_eq!(bits, want);
        assert!(Mlp::from_text("mlp\nwidths 2 2\nhidden tanh\noutput linear\n1.0\n").is_err());
        assert!(Mlp::from_text("garbage").is_err());
    }

    #[test]
    fn whitening_decorrelates() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 4000;
        let data = Array2::from_shape_fn((n, 2), |_| 0.0);
        let mut data = data;
        for i in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            data[[i, 0]] = 0.06 + 0.02 * a;
            data[[i, 1]] = data[[i, 0]] + 0.002 * b;
        }
        let norm = InputNorm::fit(NormKind::Whiten, &data).unwrap();
        let z = norm.apply_values(&data);
        let m = z.mean_axis(Axis(0)).unwrap();
        let c = (&z - &m).t().dot(&(&z - &m)) / (n as f64 - 1.0);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c[[i, j]] - want).abs() < 1e-6, "{c:?}");
            }
        }
        let mut tape = Tape::new();
        let x = tape.leaf(data.clone());
        let zt = norm.apply(&mut tape, x).unwrap();
        assert!((tape.value(zt) - &z).iter().all(|d| d.abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn sigmoid_output_is_in_unit_interval(seed in 0u64..500, x0 in -50.0f64..50.0, x1 in -50.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = Mlp::glorot(&[2, 6, 1], Activation::Tanh, Activation::Sigmoid, &mut rng).unwrap();
            let y = net.evaluate(&array![[x0, x1]]).unwrap()[[0, 0]];
            prop_assert!((0.0..=1.0).contains(&y));
        }

        #[test]
        fn clipping_is_idempotent_and_bounded(seed in 0u64..500, c in 0.01f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = Mlp::glorot(&[3, 5, 4, 1], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
            let mut p = net.flat_params();
            p.iter_mut().for_each(|x| *x *= 10.0);
            net.set_flat_params(&p).unwrap();
            net.clip_weights(c).unwrap();
            prop_assert!(net.flat_params().iter().all(|x| x.abs() <= c));
            let once = net.flat_params();
            net.clip_weights(c).unwrap();
            prop_assert_eq!(once, net.flat_params());
        }
    }
}
