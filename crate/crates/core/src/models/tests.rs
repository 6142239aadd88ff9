use super::*;
use crate::autodiff::grad_check;
use ndarray::array;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_cir() -> CirParams {
    CirParams::REFERENCE
}

#[test]
fn poisson_far_bump_matches_constant_coefficient_solution() {
    let p = PoissonParams::new(10.0, 0.1, 100).unwrap();
    let u = p.solve().unwrap();
    let max = u.iter().cloned().fold(f64::MIN, f64::max);
    assert!((max - 0.125).abs() < 1e-4, "{max}");
    // central differences are exact for the quadratic x(1-x)/2
    let h = p.h();
    for (i, ui) in u.iter().enumerate() {
        let x = h * (i + 1) as f64;
        assert!((ui - x * (1.0 - x) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn poisson_symmetric_bump_gives_symmetric_solution() {
    let u = PoissonParams::new(0.5, 0.1, 100).unwrap().solve().unwrap();
    for i in 0..u.len() {
        assert!((u[i] - u[u.len() - 1 - i]).abs() < 1e-12);
    }
}

#[test]
fn poisson_tape_matches_plain_solve() {
    let p = PoissonParams::new(0.3, 0.1, 100).unwrap();
    let mut tape = Tape::new();
    let mu = tape.scalar(0.3);
    let s = tape.scalar(0.1);
    let u = poisson_solve(&mut tape, mu, s, 100).unwrap();
    let want = p.solve().unwrap();
    for (a, b) in tape.value(u).iter().zip(&want) {
        assert!((a - b).abs() < 1e-15);
    }
}

fn poisson_mean(tape: &mut Tape, v: &[Var]) -> crate::Result<Var> {
    let u = poisson_solve(tape, v[0], v[1], 100)?;
    tape.mean(u)
}

#[test]
fn poisson_mean_gradient_at_reference_point() {
    let r = grad_check(poisson_mean, &[0.3, 0.1], 1e-6, 1e-4).unwrap();
    assert!(r.passed, "{r:?}");
    assert!(r.analytic[0].abs() > 1e-6);
}

#[test]
fn poisson_pipeline_gradients_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for _ in 0..100 {
        let mu = rng.random_range(-0.2..1.2);
        let sigma = rng.random_range(0.05..0.5);
        let r = grad_check(poisson_mean, &[mu, sigma], 1e-6, 1e-4).unwrap();
        assert!(r.passed, "({mu}, {sigma}): {r:?}");
    }
}

#[test]
fn poisson_model_batches_generated_mu() {
    let model = PoissonModel {
        n: 20,
        mu: ParamSource::Generated(0),
        sigma: ParamSource::Fixed(0.1),
    };
    let mut tape = Tape::new();
    let g = tape.leaf(array![[0.2], [0.7], [0.5]]);
    let unknowns = Unknowns {
        scalars: vec![],
        generated: Some(g),
    };
    let noise = Array2::zeros((3, 0));
    let out = model
        .simulate(&mut tape, &unknowns, &Array2::zeros((3, 20)), &noise)
        .unwrap();
    assert_eq!(tape.shape(out), (3, 20));
    for (row, mu) in [0.2, 0.7, 0.5].iter().enumerate() {
        let want = PoissonParams::new(*mu, 0.1, 20).unwrap().solve().unwrap();
        for (j, w) in want.iter().enumerate() {
            assert!((tape.value(out)[[row, j]] - w).abs() < 1e-15);
        }
    }

    let scalar = PoissonModel {
        n: 20,
        mu: ParamSource::Scalar(0),
        sigma: ParamSource::Scalar(1),
    };
    let mut tape = Tape::new();
    let a = tape.scalar(0.4);
    let b = tape.scalar(0.2);
    let unknowns = Unknowns {
        scalars: vec![a, b],
        generated: None,
    };
    let out = scalar
        .simulate(&mut tape, &unknowns, &Array2::zeros((4, 20)), &Array2::zeros((4, 0)))
        .unwrap();
    assert_eq!(tape.shape(out), (4, 20));
    assert!(PoissonModel {
        n: 20,
        mu: ParamSource::Scalar(3),
        sigma: ParamSource::Fixed(0.1)
    }
    .simulate(&mut tape, &unknowns, &Array2::zeros((1, 20)), &Array2::zeros((1, 0)))
    .is_err());
}

#[test]
fn poisson_rejects_bad_params() {
    assert!(PoissonParams::new(0.3, 0.1, 1).is_err());
    assert!(PoissonParams::new(0.3, 0.0, 10).is_err());
}

fn em(x: f64, w: f64, p: &CirParams) -> f64 {
    let mut tape = Tape::new();
    let (xv, wv) = (tape.scalar(x), tape.scalar(w));
    let (k, t, s) = (tape.scalar(p.kappa), tape.scalar(p.tau), tape.scalar(p.sigma));
    let y = cir_em_step(&mut tape, xv, wv, k, t, s, p.dt).unwrap();
    tape.scalar_value(y)
}

fn milstein(x: f64, w: f64, p: &CirParams) -> f64 {
    let mut tape = Tape::new();
    let (xv, wv) = (tape.scalar(x), tape.scalar(w));
    let (k, t, s) = (tape.scalar(p.kappa), tape.scalar(p.tau), tape.scalar(p.sigma));
    let y = cir_milstein_step(&mut tape, xv, wv, k, t, s, p.dt, p.alpha).unwrap();
    tape.scalar_value(y)
}

#[test]
fn em_step_examples() {
    let p = reference_cir();
    assert!((em(p.tau, 0.0, &p) - p.tau).abs() < 1e-16);
    assert_eq!(em(0.03, 1.7, &p.with_dt(0.0)), 0.03);
    assert!((em(0.05, 1.0, &p) - 0.05183885438199984).abs() < 1e-15);
    assert!((p.step(0.05, 1.0, CirScheme::Em) - 0.05183885438199984).abs() < 1e-15);
}

#[test]
fn milstein_step_examples() {
    let p = reference_cir();
    let explicit = CirParams { alpha: 1.0, ..p };
    for (x, w) in [(0.05, 0.4), (0.02, -1.3), (0.1, 2.0)] {
        let want = x
            + p.kappa * (p.tau - x) * p.dt
            + p.sigma * (x * p.dt).sqrt() * w
            + 0.25 * p.sigma.powi(2) * p.dt * (w * w - 1.0);
        assert!((milstein(x, w, &explicit) - want).abs() < 1e-15);
    }
    let t = p.tau;
    let want = (t + 0.5 * p.kappa * t * p.dt + p.sigma * (t * p.dt).sqrt()) / (1.0 + 0.5 * p.kappa * p.dt);
    assert!((milstein(t, 1.0, &p) - want).abs() < 1e-15);
    assert!((milstein(0.06, 0.3, &p) - 0.060571887818721165).abs() < 1e-15);
    assert!((p.step(0.06, 0.3, CirScheme::Milstein) - 0.060571887818721165).abs() < 1e-15);
}

#[test]
fn cir_steps_reject_non_positive_rate() {
    let mut tape = Tape::new();
    let (x, w, k, t, s) = (
        tape.scalar(0.0),
        tape.scalar(1.0),
        tape.scalar(0.5),
        tape.scalar(0.06),
        tape.scalar(0.08),
    );
    assert!(matches!(cir_em_step(&mut tape, x, w, k, t, s, 0.01), Err(Error::Domain { value, .. }) if value == 0.0));
    assert!(cir_milstein_step(&mut tape, x, w, k, t, s, 0.01, 0.5).is_err());
}

#[test]
fn cir_step_gradients_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for scheme in [CirScheme::Em, CirScheme::Milstein] {
        for _ in 0..100 {
            let point = [
                rng.random_range(0.005..0.2),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.1..1.5),
                rng.random_range(0.01..0.12),
                rng.random_range(0.02..0.3),
            ];
            let dt = rng.random_range(0.001..0.1);
            let alpha = rng.random_range(0.0..1.0);
            let r = grad_check(
                |tape, v| match scheme {
                    CirScheme::Em => cir_em_step(tape, v[0], v[1], v[2], v[3], v[4], dt),
                    CirScheme::Milstein => cir_milstein_step(tape, v[0], v[1], v[2], v[3], v[4], dt, alpha),
                },
                &point,
                1e-6,
                1e-5,
            )
            .unwrap();
            assert!(r.passed, "{scheme} at {point:?}: {r:?}");
        }
    }
}

#[test]
fn one_milstein_step_at_x_005() {
    let p = reference_cir();
    let r = grad_check(
        |tape, v| {
            let w = tape.scalar(0.7);
            let (k, t, s) = (tape.scalar(p.kappa), tape.scalar(p.tau), tape.scalar(p.sigma));
            cir_milstein_step(tape, v[0], w, k, t, s, p.dt, p.alpha)
        },
        &[0.05],
        1e-6,
        1e-5,
    )
    .unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn schemes_agree_to_first_order_in_dt() {
    let p = reference_cir();
    let dts = [1e-2, 1e-3, 1e-4];
    for (x, w) in [(0.05, 0.8), (0.03, -1.2), (0.08, 2.1)] {
        let gaps: Vec<f64> = dts
            .iter()
            .map(|&dt| (p.with_dt(dt).step(x, w, CirScheme::Em) - p.with_dt(dt).step(x, w, CirScheme::Milstein)).abs())
            .collect();
        let slope = (gaps[0].ln() - gaps[2].ln()) / (dts[0].ln() - dts[2].ln());
        assert!(slope >= 0.9, "x={x} w={w}: gaps {gaps:?} slope {slope}");
    }
}

#[test]
fn deterministic_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let flat = CirParams {
        sigma: 1e-300,
        ..reference_cir()
    };
    let path = simulate_cir_path(0.06, 500, &flat, CirScheme::Em, &mut rng).unwrap();
    assert!(path.values.iter().all(|&v| (v - 0.06).abs() < 1e-15));
    let path = simulate_cir_path(0.02, 2000, &flat, CirScheme::Milstein, &mut rng).unwrap();
    assert!(path.values.windows(2).all(|w| w[1] > w[0] && w[1] < 0.06));
    let path = simulate_cir_path(0.1, 2000, &flat, CirScheme::Em, &mut rng).unwrap();
    assert!(path.values.windows(2).all(|w| w[1] < w[0] && w[1] > 0.06));
    assert_eq!(path.values.len(), 2001);
    assert_eq!(path.pairs().dim(), (2000, 2));
    assert!(simulate_cir_path(0.0, 5, &reference_cir(), CirScheme::Em, &mut rng).is_err());
}

#[test]
fn long_path_mean_is_near_long_run_mean() {
    let p = reference_cir();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let path = simulate_cir_path(0.06, 100_000, &p, CirScheme::Milstein, &mut rng).unwrap();
    let mean = path.values.iter().sum::<f64>() / path.values.len() as f64;
    // AR(1) standard error with lag-one correlation 1 - κΔt
    let var = p.tau * p.sigma * p.sigma / (2.0 * p.kappa);
    let rho = 1.0 - p.kappa * p.dt;
    let se = (var * (1.0 + rho) / (1.0 - rho) / path.values.len() as f64).sqrt();
    assert!((mean - p.tau).abs() < 3.0 * se, "mean {mean}, se {se}");
    assert!(path.values.iter().all(|&v| v > 0.0));
}

#[test]
fn reflection_is_counted() {
    let wild = CirParams {
        kappa: 0.5,
        tau: 0.01,
        sigma: 2.0,
        dt: 0.1,
        alpha: 0.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let path = simulate_cir_path(0.01, 2000, &wild, CirScheme::Em, &mut rng).unwrap();
    assert!(path.reflections > 0);
    assert!(path.values.iter().all(|&v| v > 0.0));
}

#[test]
fn cir_model_keeps_x_and_simulates_y() {
    let model = CirModel {
        scheme: CirScheme::Milstein,
        dt: 0.01,
        alpha: 0.5,
        kappa: ParamSource::Fixed(0.5),
        tau: ParamSource::Scalar(0),
        sigma: ParamSource::Fixed(0.08),
    };
    let mut tape = Tape::new();
    let tau = tape.scalar(0.06);
    let unknowns = Unknowns {
        scalars: vec![tau],
        generated: None,
    };
    let cond = array![[0.05, 0.0], [0.06, 0.0]];
    let noise = array![[1.0], [0.3]];
    let out = model.simulate(&mut tape, &unknowns, &cond, &noise).unwrap();
    let v = tape.value(out);
    assert_eq!((v[[0, 0]], v[[1, 0]]), (0.05, 0.06));
    assert!((v[[1, 1]] - 0.060571887818721165).abs() < 1e-15);
    assert!(model.simulate(&mut tape, &unknowns, &cond, &array![[1.0]]).is_err());
}

#[test]
fn gbm_payoff_examples() {
    let p = GbmParams {
        sigma: 0.0,
        ..GbmParams::REFERENCE
    };
    assert!((p.payoff(1.3) - 100.0 * (0.05f64.exp() - 1.0)).abs() < 1e-12);
    assert!((p.payoff(-0.4) - 5.12711).abs() < 1e-5);
    let p = GbmParams::REFERENCE;
    assert!((p.terminal(0.0) - 103.0455).abs() < 1e-4);
    assert!((p.payoff(0.0) - 3.0455).abs() < 1e-4);
    assert_eq!(p.payoff(-40.0), 0.0);
    assert!((p.black_scholes() - 10.4506).abs() < 1e-4);

    let mut tape = Tape::new();
    let w = tape.leaf(array![[0.0, -40.0, 1.0]]);
    let s = tape.scalar(0.2);
    let pay = gbm_option_payoff(&mut tape, w, s, &p).unwrap();
    for (got, wi) in tape.value(pay).iter().zip([0.0, -40.0, 1.0]) {
        assert!((got - p.payoff(wi)).abs() < 1e-12);
    }
}

#[test]
fn gbm_sigma_gradient_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let p = GbmParams::REFERENCE;
    let mut checked = 0;
    while checked < 100 {
        let w: f64 = rng.random_range(-3.0..3.0);
        let sigma: f64 = rng.random_range(0.05..0.6);
        // stay clear of the kink
        if (GbmParams { sigma, ..p }.terminal(w) - p.strike).abs() < 1e-2 {
            continue;
        }
        let r = grad_check(
            |tape, v| gbm_option_payoff(tape, v[1], v[0], &p),
            &[sigma, w],
            1e-6,
            1e-5,
        )
        .unwrap();
        assert!(r.passed, "sigma={sigma} w={w}: {r:?}");
        checked += 1;
    }
}

#[test]
fn gbm_model_averages_and_discounts() {
    let model = GbmModel {
        s: 100.0,
        strike: 100.0,
        r: 0.05,
        t: 1.0,
        sigma: ParamSource::Scalar(0),
        paths_per_observation: 3,
        discount: true,
    };
    let mut tape = Tape::new();
    let s = tape.scalar(0.2);
    let unknowns = Unknowns {
        scalars: vec![s],
        generated: None,
    };
    let noise = array![[0.0, 1.0, -2.0], [0.5, 0.5, 0.5]];
    let out = model
        .simulate(&mut tape, &unknowns, &Array2::zeros((2, 1)), &noise)
        .unwrap();
    for r in 0..2 {
        let want = model.observe(0.2, noise.row(r).as_slice().unwrap());
        assert!((tape.value(out)[[r, 0]] - want).abs() < 1e-12);
    }
    let raw = GbmModel {
        paths_per_observation: 1,
        discount: false,
        ..model.clone()
    };
    assert_eq!(raw.observe(0.2, &[0.0]), GbmParams::REFERENCE.payoff(0.0));
    assert!(model
        .simulate(&mut tape, &unknowns, &Array2::zeros((2, 1)), &Array2::zeros((2, 2)))
        .is_err());
}

#[test]
fn monte_carlo_price_matches_closed_form() {
    let model = GbmModel {
        s: 100.0,
        strike: 100.0,
        r: 0.05,
        t: 1.0,
        sigma: ParamSource::Fixed(0.2),
        paths_per_observation: 200_000,
        discount: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = model.sample_noise(1, &mut rng);
    let price = model.observe(0.2, w.row(0).as_slice().unwrap());
    // payoff std is about 14.7, so the standard error is about 0.033
    assert!((price - GbmParams::REFERENCE.black_scholes()).abs() < 0.12, "{price}");
}

proptest! {
    #[test]
    fn poisson_solution_is_positive(mu in -1.0f64..2.0, sigma in 0.01f64..1.0) {
        let u = PoissonParams::new(mu, sigma, 100).unwrap().solve().unwrap();
        prop_assert!(u.iter().all(|&v| v > 0.0));
    }
}
