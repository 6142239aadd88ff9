//! Analytic target distributions, parsed from `name:p1,p2,...` tags.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ana_core::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Cauchy, Distribution, Exp, FisherF, Gamma, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Exponential {
        rate: f64,
    },
    F {
        d1: f64,
        d2: f64,
    },
    /// On `[0, 1]`.
    Arcsine,
    Beta {
        a: f64,
        b: f64,
    },
    Cauchy {
        x0: f64,
        gamma: f64,
    },
    /// Raised cosine on `[mu - s, mu + s]`.
    Cosine {
        mu: f64,
        s: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
    /// `(weight, mean, std)` components.
    Mixture(Vec<(f64, f64, f64)>),
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split([',', ';'])
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{t}' in target")))
        })
        .collect()
}

fn arity(tag: &str, p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::Parse(format!(
            "target '{tag}' takes {n} parameters, got {}",
            p.len()
        )));
    }
    Ok(())
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (tag, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let p = numbers(rest)?;
        let t = match tag.trim() {
            "exponential" => match p.as_slice() {
                [] => Target::Exponential { rate: 1.0 },
                [rate] => Target::Exponential { rate: *rate },
                _ => return Err(Error::Parse("exponential takes at most one parameter".into())),
            },
            "f" => {
                arity("f", &p, 2)?;
                Target::F { d1: p[0], d2: p[1] }
            }
            "arcsine" => {
                arity("arcsine", &p, 0)?;
                Target::Arcsine
            }
            "beta" => {
                arity("beta", &p, 2)?;
                Target::Beta { a: p[0], b: p[1] }
            }
            "cauchy" => {
                arity("cauchy", &p, 2)?;
                Target::Cauchy { x0: p[0], gamma: p[1] }
            }
            "cosine" => {
                arity("cosine", &p, 2)?;
                Target::Cosine { mu: p[0], s: p[1] }
            }
            "normal" => {
                arity("normal", &p, 2)?;
                Target::Normal { mean: p[0], std: p[1] }
            }
            "gmix" => {
                if p.is_empty() || p.len() % 3 != 0 {
                    return Err(Error::Parse("gmix takes weight,mean,std triples".into()));
                }
                let comps: Vec<_> = p.chunks(3).map(|c| (c[0], c[1], c[2])).collect();
                let total: f64 = comps.iter().map(|c| c.0).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Parse(format!("gmix weights sum to {total}, expected 1")));
                }
                Target::Mixture(comps)
            }
            other => return Err(Error::Parse(format!("unknown target '{other}'"))),
        };
        t.validate()?;
        Ok(t)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Exponential { rate } => write!(f, "exponential:{rate}"),
            Target::F { d1, d2 } => write!(f, "f:{d1},{d2}"),
            Target::Arcsine => write!(f, "arcsine"),
            Target::Beta { a, b } => write!(f, "beta:{a},{b}"),
            Target::Cauchy { x0, gamma } => write!(f, "cauchy:{x0},{gamma}"),
            Target::Cosine { mu, s } => write!(f, "cosine:{mu},{s}"),
            Target::Normal { mean, std } => write!(f, "normal:{mean},{std}"),
            Target::Mixture(c) => {
                let parts: Vec<String> = c.iter().map(|(w, m, s)| format!("{w},{m},{s}")).collect();
                write!(f, "gmix:{}", parts.join(";"))
            }
        }
    }
}

impl Serialize for Target {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl Target {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Target::Exponential { rate } => *rate > 0.0,
            Target::F { d1, d2 } => *d1 > 0.0 && *d2 > 0.0,
            Target::Arcsine => true,
            Target::Beta { a, b } => *a > 0.0 && *b > 0.0,
            Target::Cauchy { gamma, .. } => *gamma > 0.0,
            Target::Cosine { s, .. } => *s > 0.0,
            Target::Normal { std, .. } => *std > 0.0,
            Target::Mixture(c) => c.iter().all(|(w, _, s)| *w >= 0.0 && *s > 0.0),
        };
        if !ok {
            return Err(Error::Parse(format!("invalid parameters for target {self}")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Target::Exponential { rate } => Exp::new(*rate).expect("validated").sample(rng),
            Target::F { d1, d2 } => FisherF::new(*d1, *d2).expect("validated").sample(rng),
            Target::Arcsine => {
                let u: f64 = rng.random();
                (0.5 * PI * u).sin().powi(2)
            }
            Target::Beta { a, b } => Beta::new(*a, *b).expect("validated").sample(rng),
            Target::Cauchy { x0, gamma } => Cauchy::new(*x0, *gamma).expect("validated").sample(rng),
            Target::Cosine { mu, s } => loop {
                let x = rng.random_range(-1.0..1.0);
                let accept = 0.5 * (1.0 + (PI * x).cos());
                if rng.random::<f64>() < accept {
                    break mu + s * x;
                }
            },
            Target::Normal { mean, std } => Normal::new(*mean, *std).expect("validated").sample(rng),
            Target::Mixture(c) => {
                let mut u: f64 = rng.random();
                let last = c.len() - 1;
                for (i, (w, m, s)) in c.iter().enumerate() {
                    if u < *w || i == last {
                        return Normal::new(*m, *s).expect("validated").sample(rng);
                    }
                    u -= w;
                }
                unreachable!("mixture has at least one component")
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// `None` where the moment is not finite.
    pub fn mean(&self) -> Option<f64> {
        match self {
            Target::Exponential { rate } => Some(1.0 / rate),
            Target::F { d2, .. } => (*d2 > 2.0).then(|| d2 / (d2 - 2.0)),
            Target::Arcsine => Some(0.5),
            Target::Beta { a, b } => Some(a / (a + b)),
            Target::Cauchy { .. } => None,
            Target::Cosine { mu, .. } => Some(*mu),
            Target::Normal { mean, .. } => Some(*mean),
            Target::Mixture(c) => Some(c.iter().map(|(w, m, _)| w * m).sum()),
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            Target::Exponential { rate } => Some(1.0 / (rate * rate)),
            Target::F { d1, d2 } => {
                (*d2 > 4.0).then(|| 2.0 * d2 * d2 * (d1 + d2 - 2.0) / (d1 * (d2 - 2.0).powi(2) * (d2 - 4.0)))
            }
            Target::Arcsine => Some(0.125),
            Target::Beta { a, b } => Some(a * b / ((a + b).powi(2) * (a + b + 1.0))),
            Target::Cauchy { .. } => None,
            Target::Cosine { s, .. } => Some(s * s * (1.0 / 3.0 - 2.0 / (PI * PI))),
            Target::Normal { std, .. } => Some(std * std),
            Target::Mixture(c) => {
                let m = self.mean().expect("finite");
                Some(c.iter().map(|(w, mi, s)| w * (s * s + mi * mi)).sum::<f64>() - m * m)
            }
        }
    }
}

/// Joint law of `(μ, σ)` for the two-dimensional Poisson study.
#[derive(Clone, Debug, PartialEq)]
pub enum JointTarget {
    /// Mean and covariance `[[a, b], [b, c]]`.
    Gaussian { mean: [f64; 2], cov: [f64; 3] },
    /// First two coordinates of a Dirichlet draw.
    Dirichlet { alpha: Vec<f64> },
}

impl FromStr for JointTarget {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (tag, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let p = numbers(rest)?;
        match tag.trim() {
            "gaussian2d" => {
                arity("gaussian2d", &p, 5)?;
                let cov = [p[2], p[3], p[4]];
                if !(cov[0] > 0.0 && cov[0] * cov[2] - cov[1] * cov[1] > 0.0) {
                    return Err(Error::Parse("gaussian2d covariance must be positive definite".into()));
                }
                Ok(JointTarget::Gaussian {
                    mean: [p[0], p[1]],
                    cov,
                })
            }
            "dirichlet" => {
                if p.len() < 2 || p.iter().any(|a| a.is_nan() || *a <= 0.0) {
                    return Err(Error::Parse(
                        "dirichlet needs at least two positive concentrations".into(),
                    ));
                }
                Ok(JointTarget::Dirichlet { alpha: p })
            }
            other => Err(Error::Parse(format!("unknown joint target '{other}'"))),
        }
    }
}

impl fmt::Display for JointTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JointTarget::Gaussian { mean, cov } => {
                write!(f, "gaussian2d:{},{},{},{},{}", mean[0], mean[1], cov[0], cov[1], cov[2])
            }
            JointTarget::Dirichlet { alpha } => {
                let a: Vec<String> = alpha.iter().map(|v| v.to_string()).collect();
                write!(f, "dirichlet:{}", a.join(","))
            }
        }
    }
}

impl JointTarget {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match self {
            JointTarget::Gaussian { mean, cov } => {
                let l11 = cov[0].sqrt();
                let l21 = cov[1] / l11;
                let l22 = (cov[2] - l21 * l21).sqrt();
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                [mean[0] + l11 * z1, mean[1] + l21 * z1 + l22 * z2]
            }
            JointTarget::Dirichlet { alpha } => {
                let g: Vec<f64> = alpha
                    .iter()
                    .map(|&a| Gamma::new(a, 1.0).expect("validated").sample(rng))
                    .collect();
                let total: f64 = g.iter().sum();
                [g[0] / total, g[1] / total]
            }
        }
    }
}
