use super::{Tape, Var};
use crate::error::{Error, Result};

/// Outcome of comparing tape adjoints with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub passed: bool,
    pub max_rel_error: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Relative error with a tiny absolute floor so exact zeros compare cleanly.
pub(crate) fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Checks `f` at `point` against central finite differences.
///
/// `f` receives one `1 x 1` leaf per coordinate and must return a scalar
/// node. Errors raised at perturbed points propagate unchanged.
pub fn grad_check<F>(f: F, point: &[f64], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let eval = |x: &[f64]| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let inputs: Vec<Var> = x.iter().map(|&v| tape.scalar(v)).collect();
        let root = f(&mut tape, &inputs)?;
        Ok((tape, inputs, root))
    };

    let (tape, inputs, root) = eval(point)?;
    let grads = tape.backward(root)?;
    let analytic: Vec<f64> = inputs.iter().map(|&v| grads.scalar(v)).collect();

    let mut numeric = Vec::with_capacity(point.len());
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + step;
        let (t, _, r) = eval(&x)?;
        let plus = t.scalar_value(r);
        x[i] = point[i] - step;
        let (t, _, r) = eval(&x)?;
        let minus = t.scalar_value(r);
        x[i] = point[i];
        numeric.push((plus - minus) / (2.0 * step));
    }

    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &b)| rel_error(a, b))
        .fold(0.0, f64::max);
    Ok(GradCheckReport {
        passed: max_rel_error <= tol,
        max_rel_error,
        analytic,
        numeric,
    })
}
