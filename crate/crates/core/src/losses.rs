//! Adversarial loss pairs `(L^F, L^D)`.
//!
//! Discriminator outputs arrive as `n x 1` nodes. Probabilistic outputs are
//! clamped into `[SATURATION, 1 - SATURATION]` before any logarithm.
//!
//! The default forms train the discriminator to score real observations
//! high. [`LossForm::Literal`] keeps the bare textbook expressions, in which
//! the Wasserstein critic term has no fake-sample part and the KL
//! discriminator is trained to score simulated samples high.

use std::fmt;
use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};
use crate::neural::Activation;

pub const SATURATION: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Vanilla,
    Wasserstein,
    Kl,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(LossKind::Vanilla),
            "wasserstein" => Ok(LossKind::Wasserstein),
            "kl" => Ok(LossKind::Kl),
            other => Err(Error::Parse(format!("unknown loss kind '{other}'"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Vanilla => "vanilla",
            LossKind::Wasserstein => "wasserstein",
            LossKind::Kl => "kl",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossForm {
    /// Critic centred on the real-score mean; discriminator scores real high.
    #[default]
    Centered,
    Literal,
}

/// One adversarial variant and its equilibrium constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPair {
    pub kind: LossKind,
    pub form: LossForm,
    pub equilibrium_model_loss: f64,
    pub equilibrium_discriminator_loss: f64,
    pub requires_clipping: bool,
    pub output_activation: Activation,
}

impl LossPair {
    pub fn new(kind: LossKind) -> Self {
        Self::with_form(kind, LossForm::Centered)
    }

    pub fn with_form(kind: LossKind, form: LossForm) -> Self {
        let ln2 = std::f64::consts::LN_2;
        let (f, d, clip, act) = match kind {
            LossKind::Vanilla => (ln2, 2.0 * ln2, false, Activation::Sigmoid),
            LossKind::Wasserstein => (0.0, 0.0, true, Activation::Linear),
            LossKind::Kl => (0.0, 2.0 * ln2, false, Activation::Sigmoid),
        };
        Self {
            kind,
            form,
            equilibrium_model_loss: f,
            equilibrium_discriminator_loss: d,
            requires_clipping: clip,
            output_activation: act,
        }
    }

    /// `L^F`, minimized by the generator and the scalar unknowns.
    ///
    /// `d_real` is read only by the centred Wasserstein form.
    pub fn model_loss(&self, tape: &mut Tape, d_real: Var, d_fake: Var) -> Result<Var> {
        match self.kind {
            LossKind::Vanilla => {
                let p = probability(tape, d_fake)?;
                let lp = tape.log(p)?;
                let m = tape.mean(lp)?;
                Ok(tape.neg(m))
            }
            LossKind::Wasserstein => {
                let fake = tape.mean(d_fake)?;
                match self.form {
                    LossForm::Centered => {
                        let real = tape.mean(d_real)?;
                        tape.sub(real, fake)
                    }
                    LossForm::Literal => Ok(fake),
                }
            }
            LossKind::Kl => {
                let p = probability(tape, d_fake)?;
                let one = tape.scalar(1.0);
                let q = tape.sub(one, p)?;
                let ratio = tape.div(q, p)?;
                let l = tape.log(ratio)?;
                tape.mean(l)
            }
        }
    }

    /// `L^D`, minimized by the discriminator.
    pub fn discriminator_loss(&self, tape: &mut Tape, d_real: Var, d_fake: Var) -> Result<Var> {
        let (nr, nf) = (tape.shape(d_real), tape.shape(d_fake));
        if nr.1 != 1 || nf.1 != 1 || nr.0 == 0 || nf.0 == 0 {
            return Err(Error::Shape {
                op: "discriminator_loss",
                lhs: nr,
                rhs: nf,
            });
        }
        let literal_kl = self.kind == LossKind::Kl && self.form == LossForm::Literal;
        match self.kind {
            LossKind::Vanilla | LossKind::Kl => {
                // the literal KL form swaps which batch is pushed towards 1
                let (hi, lo) = if literal_kl { (d_fake, d_real) } else { (d_real, d_fake) };
                let ph = probability(tape, hi)?;
                let pl = probability(tape, lo)?;
                let lh = tape.log(ph)?;
                let one = tape.scalar(1.0);
                let ql = tape.sub(one, pl)?;
                let ll = tape.log(ql)?;
                let a = tape.mean(lh)?;
                let b = tape.mean(ll)?;
                let s = tape.add(a, b)?;
                Ok(tape.neg(s))
            }
            LossKind::Wasserstein => {
                let real = tape.mean(d_real)?;
                let neg_real = tape.neg(real);
                match self.form {
                    LossForm::Centered => {
                        let fake = tape.mean(d_fake)?;
                        tape.add(neg_real, fake)
                    }
                    LossForm::Literal => Ok(neg_real),
                }
            }
        }
    }

    pub fn model_loss_value(&self, d_real: &Matrix, d_fake: &Matrix) -> Result<f64> {
        let mut tape = Tape::new();
        let r = tape.leaf(d_real.clone());
        let f = tape.leaf(d_fake.clone());
        let v = self.model_loss(&mut tape, r, f)?;
        Ok(tape.scalar_value(v))
    }

    pub fn discriminator_loss_value(&self, d_real: &Matrix, d_fake: &Matrix) -> Result<f64> {
        let mut tape = Tape::new();
        let r = tape.leaf(d_real.clone());
        let f = tape.leaf(d_fake.clone());
        let v = self.discriminator_loss(&mut tape, r, f)?;
        Ok(tape.scalar_value(v))
    }

    /// Entries that hit the log clamp; always 0 for Wasserstein.
    pub fn saturation_count(&self, d: &Matrix) -> usize {
        if self.kind == LossKind::Wasserstein {
            return 0;
        }
        let n = d
            .iter()
            .filter(|&&p| !(SATURATION..=1.0 - SATURATION).contains(&p))
            .count();
        if n > 0 {
            debug!("{n} discriminator outputs saturated at the log clamp");
        }
        n
    }
}

fn probability(tape: &mut Tape, d: Var) -> Result<Var> {
    if let Some(&bad) = tape.value(d).iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain {
            op: "probabilistic loss",
            value: bad,
        });
    }
    Ok(tape.clamp(d, SATURATION, 1.0 - SATURATION))
}
