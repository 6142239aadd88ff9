//! Closed-form CIR estimators, Fisher information, the stationary law and
//! discrete-KL landscapes. These serve as ground truth for adversarial runs.

use std::f64::consts::PI;

use log::warn;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{cir_path_from_noise, CirParams, CirScheme};
use crate::stats::Histogram;

/// Consecutive observations `(x_i, y_i)` taken `dt` apart.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dt: f64,
}

impl PairSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>, dt: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::contract(format!(
                "{} x values but {} y values",
                x.len(),
                y.len()
            )));
        }
        if let Some(&bad) = x.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Domain {
                op: "pair sample",
                value: bad,
            });
        }
        Ok(Self { x, y, dt })
    }

    pub fn from_path(path: &[f64], dt: f64) -> Result<Self> {
        if path.len() < 2 {
            return Err(Error::contract("a path needs at least two values to form a pair"));
        }
        Self::new(path[..path.len() - 1].to_vec(), path[1..].to_vec(), dt)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::contract("empty pair sample"));
        }
        Ok(())
    }

    pub fn moments(&self) -> Result<MomentStats> {
        self.nonempty()?;
        let n = self.len() as f64;
        Ok(MomentStats {
            x_minus1: self.x.iter().map(|x| 1.0 / x).sum::<f64>() / n,
            x_0: self.x.iter().sum::<f64>() / n,
        })
    }

    fn mean_ratio(&self) -> f64 {
        self.x.iter().zip(&self.y).map(|(x, y)| y / x).sum::<f64>() / self.len() as f64
    }

    fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.len() as f64
    }
}

/// Sample means of `1/x` and `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub x_minus1: f64,
    pub x_0: f64,
}

impl MomentStats {
    /// Moments of `U(lo, hi)`.
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self {
            x_minus1: (hi / lo).ln() / (hi - lo),
            x_0: 0.5 * (lo + hi),
        }
    }

    /// `τ² X₋₁ - 2τ + X₀`, arranged so `X₋₁ = 1/τ`, `X₀ = τ` cancels exactly.
    pub fn kappa_denominator(&self, tau: f64) -> f64 {
        tau * (tau * self.x_minus1 - 1.0) + (self.x_0 - tau)
    }
}

/// Pseudo-likelihood estimator of the long-run mean for known κ.
///
/// `_sigma` does not enter the estimator.
pub fn tau_mle(s: &PairSample, kappa: f64, _sigma: f64) -> Result<f64> {
    s.nonempty()?;
    let kdt = kappa * s.dt;
    if kdt == 0.0 || !kdt.is_finite() {
        return Err(Error::contract(format!("kappa * dt must be nonzero, got {kdt}")));
    }
    let m = s.moments()?;
    Ok((s.mean_ratio() + kdt - 1.0) / (m.x_minus1 * kdt))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaMle {
    pub estimate: f64,
    pub denominator: f64,
    /// Set when `|denominator| < 1e-4 τ²`.
    pub ill_conditioned: bool,
}

pub const KAPPA_DEGENERACY: f64 = 1e-12;

/// Pseudo-likelihood estimator of the mean-reversion speed for known τ.
pub fn kappa_mle(s: &PairSample, tau: f64) -> Result<KappaMle> {
    s.nonempty()?;
    if s.dt == 0.0 {
        return Err(Error::contract("dt must be nonzero"));
    }
    let m = s.moments()?;
    let den = m.kappa_denominator(tau);
    if den.abs() < KAPPA_DEGENERACY {
        return Err(Error::Degenerate { denominator: den });
    }
    let ill = den.abs() < 1e-4 * tau * tau;
    if ill {
        warn!("kappa estimator denominator {den:e} is nearly zero; the likelihood is flat in kappa");
    }
    let num = tau * s.mean_ratio() - s.mean_y() - tau + m.x_0;
    Ok(KappaMle {
        estimate: num / (den * s.dt),
        denominator: den,
        ill_conditioned: ill,
    })
}

/// `I(τ) = κ²Δt X₋₁ / σ²`.
pub fn fisher_tau(kappa: f64, sigma: f64, dt: f64, x_minus1: f64) -> f64 {
    kappa * kappa * dt * x_minus1 / (sigma * sigma)
}

/// `I(κ) = (Δt/σ²)(τ²X₋₁ - 2τ + X₀)`.
pub fn fisher_kappa(tau: f64, sigma: f64, dt: f64, x_minus1: f64, x_0: f64) -> f64 {
    let m = MomentStats { x_minus1, x_0 };
    dt / (sigma * sigma) * m.kappa_denominator(tau)
}

/// Asymptotic standard deviation of the τ estimator from `n` pairs.
pub fn tau_asymptotic_std(kappa: f64, sigma: f64, dt: f64, x_minus1: f64, n: usize) -> f64 {
    (1.0 / (n as f64 * fisher_tau(kappa, sigma, dt, x_minus1))).sqrt()
}

/// Asymptotic standard deviation of the κ estimator from `n` pairs.
pub fn kappa_asymptotic_std(tau: f64, sigma: f64, dt: f64, m: MomentStats, n: usize) -> f64 {
    (1.0 / (n as f64 * fisher_kappa(tau, sigma, dt, m.x_minus1, m.x_0))).sqrt()
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` by the Lanczos approximation.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Gamma law of the stationary CIR rate: shape `ν = 2κτ/σ²`, rate `w = 2κ/σ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryLaw {
    pub w: f64,
    pub nu: f64,
    /// `2κτ > σ²`.
    pub feller: bool,
}

impl StationaryLaw {
    pub fn new(kappa: f64, tau: f64, sigma: f64) -> Result<Self> {
        if !(kappa > 0.0 && tau > 0.0 && sigma > 0.0) {
            return Err(Error::contract("stationary law needs positive kappa, tau and sigma"));
        }
        let s2 = sigma * sigma;
        let feller = 2.0 * kappa * tau > s2;
        if !feller {
            warn!(
                "Feller condition 2 kappa tau > sigma^2 fails ({} <= {s2})",
                2.0 * kappa * tau
            );
        }
        Ok(Self {
            w: 2.0 * kappa / s2,
            nu: 2.0 * kappa * tau / s2,
            feller,
        })
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        (self.nu * self.w.ln() - ln_gamma(self.nu) + (self.nu - 1.0) * r.ln() - self.w * r).exp()
    }

    pub fn mean(&self) -> f64 {
        self.nu / self.w
    }

    pub fn variance(&self) -> f64 {
        self.nu / (self.w * self.w)
    }

    /// `E[1/r] = w/(ν - 1)`, finite for `ν > 1`.
    pub fn mean_inverse(&self) -> f64 {
        if self.nu > 1.0 {
            self.w / (self.nu - 1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn moments(&self) -> MomentStats {
        MomentStats {
            x_minus1: self.mean_inverse(),
            x_0: self.mean(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Gamma::new(self.nu, 1.0 / self.w)
            .expect("positive shape and scale")
            .sample(rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryDensity {
    pub value: f64,
    pub feller_violated: bool,
}

pub fn stationary_density(r: f64, kappa: f64, tau: f64, sigma: f64) -> Result<StationaryDensity> {
    let law = StationaryLaw::new(kappa, tau, sigma)?;
    Ok(StationaryDensity {
        value: law.pdf(r),
        feller_violated: !law.feller,
    })
}

pub const KL_FLOOR: f64 = 1e-12;

/// `Σ P*_i log(P*_i / P_i)` over bins with `P*_i > 0`; empty `P_i` use [`KL_FLOOR`].
pub fn discrete_kl(p_star: &Histogram, p: &Histogram) -> Result<f64> {
    if p_star.edges != p.edges {
        return Err(Error::contract("histograms must share bin edges"));
    }
    for h in [p_star, p] {
        if (h.total() - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!("histogram sums to {}, expected 1", h.total())));
        }
    }
    Ok(p_star
        .counts
        .iter()
        .zip(&p.counts)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b.max(KL_FLOOR)).ln())
        .sum())
}

/// Pairs with `x ~ U(lo, hi)` and `y` one simulated step from `x`.
pub fn resample_uniform<R: Rng + ?Sized>(
    p: &CirParams,
    scheme: CirScheme,
    lo: f64,
    hi: f64,
    count: usize,
    rng: &mut R,
) -> Result<PairSample> {
    if !(lo < hi) || !(lo > 0.0) {
        return Err(Error::contract(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    p.validate()?;
    let mut x = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    for _ in 0..count {
        let xi = rng.random_range(lo..=hi);
        let w: f64 = StandardNormal.sample(rng);
        x.push(xi);
        y.push(p.step(xi, w, scheme));
    }
    PairSample::new(x, y, p.dt)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanParameter {
    Kappa,
    Tau,
}

/// Settings for a discrete-KL landscape scan over one CIR parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSpec {
    pub reference: CirParams,
    pub scheme: CirScheme,
    pub r0: f64,
    pub steps: usize,
    pub bins: usize,
    pub realizations: usize,
    pub seed: u64,
}

/// Mean discrete KL between the reference path and paths at each grid value.
///
/// Every path of one realization is driven by the same normal increments,
/// so the landscape is smooth in the scanned parameter.
pub fn kl_landscape(spec: &LandscapeSpec, param: ScanParameter, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if spec.realizations == 0 || spec.steps == 0 {
        return Err(Error::contract("landscape scan needs steps and realizations"));
    }
    let mut totals = vec![0.0; grid.len()];
    for rep in 0..spec.realizations {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(rep as u64));
        let w: Vec<f64> = (0..spec.steps).map(|_| StandardNormal.sample(&mut rng)).collect();
        let reference = cir_path_from_noise(spec.r0, &w, &spec.reference, spec.scheme)?.values;
        let results: Vec<Result<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = grid
                .iter()
                .map(|&v| {
                    let w = &w;
                    let reference = &reference;
                    scope.spawn(move || {
                        let p = match param {
                            ScanParameter::Kappa => CirParams {
                                kappa: v,
                                ..spec.reference
                            },
                            ScanParameter::Tau => CirParams {
                                tau: v,
                                ..spec.reference
                            },
                        };
                        let path = cir_path_from_noise(spec.r0, w, &p, spec.scheme)?.values;
                        let (hp_star, hp) = Histogram::pooled(reference, &path, spec.bins)?;
                        discrete_kl(&hp_star, &hp)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scan worker panicked"))
                .collect()
        });
        for (t, r) in totals.iter_mut().zip(results) {
            *t += r?;
        }
    }
    Ok(grid
        .iter()
        .zip(totals)
        .map(|(&v, t)| (v, t / spec.realizations as f64))
        .collect())
}

/// Second difference at the grid point nearest `at`, assuming uniform spacing.
pub fn curvature_at(scan: &[(f64, f64)], at: f64) -> Result<f64> {
    if scan.len() < 3 {
        return Err(Error::contract("curvature needs at least three scan points"));
    }
    let i = scan
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - at).abs().total_cmp(&(b.1 .0 - at).abs()))
        .map(|(i, _)| i)
        .expect("nonempty")
        .clamp(1, scan.len() - 2);
    let h = scan[i + 1].0 - scan[i].0;
    Ok((scan[i + 1].1 - 2.0 * scan[i].1 + scan[i - 1].1) / (h * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::simulate_cir_path;
    use crate::stats::{mean, slope, variance};
    use proptest::prelude::*;

    const P: CirParams = CirParams::REFERENCE;

    fn stationary_path(p: &CirParams, n: usize, seed: u64) -> PairSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let law = StationaryLaw::new(p.kappa, p.tau, p.sigma).unwrap();
        let r0 = law.sample(&mut rng);
        let path = simulate_cir_path(r0, n, p, CirScheme::Milstein, &mut rng).unwrap();
        PairSample::from_path(&path.values, p.dt).unwrap()
    }

    #[test]
    fn tau_mle_noiseless_identity() {
        let x = vec![0.01, 0.05, 0.2, 0.07];
        let y: Vec<f64> = x.iter().map(|x| x + 0.5 * (0.06 - x) * 0.01).collect();
        let s = PairSample::new(x, y, 0.01).unwrap();
        assert!((tau_mle(&s, 0.5, 0.08).unwrap() - 0.06).abs() < 1e-14);
    }

    #[test]
    fn tau_mle_two_pairs() {
        let s = PairSample::new(vec![1.0, 2.0], vec![1.0, 2.0], 0.1).unwrap();
        assert!((tau_mle(&s, 1.0, 0.0).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert!(tau_mle(&s, 0.0, 0.1).is_err());
        assert!(tau_mle(&PairSample::new(vec![], vec![], 0.1).unwrap(), 1.0, 0.1).is_err());
    }

    #[test]
    fn tau_mle_on_simulated_path_is_within_three_sigma() {
        let s = stationary_path(&P, 4000, 1);
        let est = tau_mle(&s, P.kappa, P.sigma).unwrap();
        let bound = 3.0 * (P.sigma.powi(2) * P.tau / (P.kappa.powi(2) * P.dt * 4000.0)).sqrt();
        assert!((bound - 0.0186).abs() < 1e-3);
        assert!((est - 0.06).abs() <= bound, "{est}");
    }

    #[test]
    fn kappa_mle_noiseless_identity() {
        let x = vec![0.01, 0.05, 0.2, 0.07];
        let y: Vec<f64> = x.iter().map(|x| x + 0.5 * (0.06 - x) * 0.01).collect();
        let s = PairSample::new(x, y, 0.01).unwrap();
        let k = kappa_mle(&s, 0.06).unwrap();
        assert!((k.estimate - 0.5).abs() < 1e-10, "{k:?}");
        assert!(!k.ill_conditioned);
    }

    #[test]
    fn kappa_mle_degenerate_when_x_sits_at_tau() {
        let s = PairSample::new(vec![0.06; 50], vec![0.061; 50], 0.01).unwrap();
        assert!(matches!(kappa_mle(&s, 0.06), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn stationary_sampling_makes_kappa_poorly_identified() {
        let law = StationaryLaw::new(P.kappa, P.tau, P.sigma).unwrap();
        let stat = law.moments().kappa_denominator(P.tau);
        let unif = MomentStats::uniform(0.001, 0.03).kappa_denominator(P.tau);
        // exact stationary value: τ s / (τ - s) with s = σ²/(2κ)
        let s = P.sigma.powi(2) / (2.0 * P.kappa);
        assert!((stat - P.tau * s / (P.tau - s)).abs() < 1e-12);
        assert!(unif > 10.0 * stat, "{unif} vs {stat}");
        // the sampled version agrees with the analytic stationary moments
        let m = stationary_path(&P, 200_000, 5).moments().unwrap();
        assert!((m.kappa_denominator(P.tau) - stat).abs() < 0.5 * stat);
    }

    #[test]
    fn kappa_mle_after_uniform_resampling() {
        let p = P.with_dt(0.001);
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = resample_uniform(&p, CirScheme::Milstein, 0.001, 0.03, n, &mut rng).unwrap();
        let k = kappa_mle(&s, p.tau).unwrap();
        let sd = kappa_asymptotic_std(p.tau, p.sigma, p.dt, MomentStats::uniform(0.001, 0.03), n);
        assert!((k.estimate - 0.5).abs() < 3.0 * sd, "{} vs sd {sd}", k.estimate);
    }

    #[test]
    fn fisher_examples() {
        assert_eq!(fisher_tau(1.0, 1.0, 1.0, 1.0), 1.0);
        assert!((fisher_tau(0.5, 0.08, 0.01, 1.0 / 0.06) - 6.5104).abs() < 1e-4);
        let base = fisher_tau(0.5, 0.08, 0.01, 16.0);
        assert!((fisher_tau(0.5, 0.16, 0.01, 16.0) - base / 4.0).abs() < 1e-12);
        assert_eq!(fisher_kappa(1.0, 1.0, 1.0, 2.0, 1.0), 1.0);
        for tau in [0.06, 0.03, 0.1, 0.37, 1.0, 2.5, 1e-3] {
            assert_eq!(fisher_kappa(tau, 0.08, 0.01, 1.0 / tau, tau), 0.0, "tau {tau}");
        }
        let u = MomentStats::uniform(0.001, 0.03);
        assert_eq!(u.x_0, 0.0155);
        assert!((u.x_minus1 - 30f64.ln() / 0.029).abs() < 1e-12);
        let i = fisher_kappa(0.06, 0.08, 0.01, u.x_minus1, u.x_0);
        let want = 0.01 / 0.0064 * (0.0036 * 30f64.ln() / 0.029 - 0.12 + 0.0155);
        assert!(i > 0.0 && (i - want).abs() < 1e-12);
    }

    #[test]
    fn lanczos_gamma() {
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0];
        for (n, f) in fact.iter().enumerate() {
            let got = ln_gamma(n as f64 + 1.0).exp();
            assert!((got - f).abs() / f < 1e-12, "{n}: {got}");
        }
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(9.375) - 11.415_487_386_993_36).abs() < 1e-9);
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn stationary_law_reference_values() {
        let law = StationaryLaw::new(P.kappa, P.tau, P.sigma).unwrap();
        assert!((law.w - 156.25).abs() < 1e-12);
        assert!((law.nu - 9.375).abs() < 1e-12);
        assert!(law.feller);
        let mass = simpson(|r| law.pdf(r), 0.0, 1.0, 20_000);
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        let first = simpson(|r| r * law.pdf(r), 0.0, 1.0, 20_000);
        assert!((first - 0.06).abs() < 1e-8);
        // E[1/r] = w/(ν-1) = 1/(τ - σ²/(2κ)), not 1/τ
        let inv = simpson(|r| if r > 0.0 { law.pdf(r) / r } else { 0.0 }, 0.0, 1.0, 20_000);
        assert!((inv - law.mean_inverse()).abs() < 1e-6);
        assert!((law.mean_inverse() - 1.0 / (0.06 - 0.0064)).abs() < 1e-9);
        assert!((inv - 1.0 / 0.06).abs() > 1.0);

        let d = stationary_density(0.06, 0.1, 0.01, 0.2).unwrap();
        assert!(d.feller_violated && d.value.is_finite());
    }

    #[test]
    fn discrete_kl_examples() {
        let mut a = Histogram::uniform(0.0, 1.0, 2).unwrap();
        a.counts = vec![1.0, 0.0];
        let mut b = Histogram::uniform(0.0, 1.0, 2).unwrap();
        b.counts = vec![0.5, 0.5];
        assert!((discrete_kl(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(discrete_kl(&b, &b).unwrap(), 0.0);
        // empty P bin uses the floor
        assert!(
            (discrete_kl(&b, &a).unwrap() - (0.5 * (0.5f64).ln() + 0.5 * (0.5 / KL_FLOOR).ln()) / 1.0).abs() < 1e-9
        );
        let c = Histogram::uniform(0.0, 2.0, 2).unwrap();
        assert!(discrete_kl(&a, &c).is_err());
        let mut unnormalized = b.clone();
        unnormalized.counts = vec![3.0, 1.0];
        assert!(discrete_kl(&unnormalized, &b).is_err());
    }

    #[test]
    fn resample_uniform_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = resample_uniform(&P, CirScheme::Milstein, 0.001, 0.03, 500, &mut rng).unwrap();
        assert!(s.x.iter().all(|x| (0.001..=0.03).contains(x)));
        let d = s.moments().unwrap().kappa_denominator(P.tau);
        assert!(d > 0.1, "{d}");
        assert!(resample_uniform(&P, CirScheme::Em, 0.001, 0.03, 0, &mut rng)
            .unwrap()
            .is_empty());
        assert!(resample_uniform(&P, CirScheme::Em, 0.03, 0.001, 5, &mut rng).is_err());
    }

    #[test]
    fn tau_error_shrinks_like_inverse_root_n() {
        let ns = [500usize, 2000, 8000, 32000];
        let mut log_n = vec![];
        let mut log_rms = vec![];
        for &n in &ns {
            let sq: f64 = (0..50)
                .map(|seed| {
                    let s = stationary_path(&P, n, 1000 + seed);
                    (tau_mle(&s, P.kappa, P.sigma).unwrap() - P.tau).powi(2)
                })
                .sum();
            log_n.push((n as f64).ln());
            log_rms.push((sq / 50.0).sqrt().ln());
        }
        let b = slope(&log_n, &log_rms);
        assert!((b + 0.5).abs() <= 0.15, "slope {b}");
    }

    #[test]
    fn tau_bias_is_linear_in_dt() {
        // a strongly mean-reverting, high-volatility regime with a fully implicit
        // drift makes the scheme mismatch bias visible above sampling noise
        let base = CirParams {
            kappa: 4.0,
            tau: 0.1,
            sigma: 0.3,
            dt: 0.01,
            alpha: 0.0,
        };
        let horizon = 5000.0;
        let dts = [0.04, 0.02, 0.01];
        let biases: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let p = base.with_dt(dt);
                let n = (horizon / dt) as usize;
                let est: Vec<f64> = (0..60)
                    .map(|seed| tau_mle(&stationary_path(&p, n, 77 + seed), p.kappa, p.sigma).unwrap())
                    .collect();
                mean(&est) - p.tau
            })
            .collect();
        assert!(biases.iter().all(|b| *b < 0.0), "{biases:?}");
        let ld: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
        let lb: Vec<f64> = biases.iter().map(|b| b.abs().ln()).collect();
        let s = slope(&ld, &lb);
        assert!((s - 1.0).abs() < 0.3, "slope {s}, biases {biases:?}");
    }

    #[test]
    fn tau_spread_matches_asymptotic_std() {
        let est: Vec<f64> = (0..50)
            .map(|seed| tau_mle(&stationary_path(&P, 4000, seed), P.kappa, P.sigma).unwrap())
            .collect();
        let sd = variance(&est).sqrt();
        let want = (P.sigma.powi(2) * P.tau / (P.kappa.powi(2) * P.dt * 4000.0)).sqrt();
        assert!(sd / want < 1.5 && want / sd < 1.5, "sd {sd} vs {want}");
        assert!((mean(&est) - P.tau).abs() < 0.003);
    }

    #[test]
    fn curvature_of_parabola() {
        let scan: Vec<(f64, f64)> = (0..11)
            .map(|i| {
                let x = 0.1 * i as f64;
                (x, 3.0 * (x - 0.5).powi(2))
            })
            .collect();
        assert!((curvature_at(&scan, 0.5).unwrap() - 6.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn gibbs_inequality(a in proptest::collection::vec(0.0f64..1.0, 6), b in proptest::collection::vec(0.01f64..1.0, 6)) {
            prop_assume!(a.iter().sum::<f64>() > 1e-3);
            let mut ha = Histogram::uniform(0.0, 1.0, 6).unwrap();
            ha.counts = a;
            ha.normalize().unwrap();
            let mut hb = Histogram::uniform(0.0, 1.0, 6).unwrap();
            hb.counts = b;
            hb.normalize().unwrap();
            prop_assert!(discrete_kl(&ha, &hb).unwrap() >= -1e-12);
            prop_assert!(discrete_kl(&ha, &ha).unwrap().abs() < 1e-15);
        }
    }
}
