use crate::error::{Error, Result};

/// Tridiagonal linear system `A u = rhs`.
///
/// `sub[i]` is `A[i+1][i]`, `sup[i]` is `A[i][i+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub main: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(sub: Vec<f64>, main: Vec<f64>, sup: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = main.len();
        if n == 0 || rhs.len() != n || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(Error::contract(format!(
                "tridiagonal lengths sub={}, main={}, sup={}, rhs={}",
                sub.len(),
                main.len(),
                sup.len(),
                rhs.len()
            )));
        }
        Ok(Self { sub, main, sup, rhs })
    }

    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }

    /// Thomas algorithm, O(n).
    pub fn solve(&self) -> Result<Vec<f64>> {
        thomas(&self.sub, &self.main, &self.sup, &self.rhs)
    }

    /// Solves `A^T x = rhs` with the same coefficients.
    pub fn solve_transposed(&self) -> Result<Vec<f64>> {
        thomas(&self.sup, &self.main, &self.sub, &self.rhs)
    }

    /// `A u`, used for residual checks.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.main[i] * u[i];
                if i > 0 {
                    v += self.sub[i - 1] * u[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * u[i + 1];
                }
                v
            })
            .collect()
    }
}

fn thomas(sub: &[f64], main: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = main.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];

    let mut pivot = main[0];
    if pivot == 0.0 {
        return Err(Error::Singular { pivot: 0 });
    }
    if n > 1 {
        c[0] = sup[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = main[i] - sub[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Singular { pivot: i });
        }
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}
