use super::*;
use crate::models::{CirModel, CirScheme, ParamSource};
use crate::neural::NoiseKind;
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

/// `x = θ + w`, one column.
struct Shift;

impl ForwardModel for Shift {
    fn observation_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn simulate(&self, tape: &mut Tape, unknowns: &Unknowns, _c: &Matrix, noise: &Matrix) -> Result<Var> {
        let w = tape.leaf(noise.clone());
        match unknowns.generated {
            Some(g) => tape.add(g, w),
            None => tape.add(unknowns.scalars[0], w),
        }
    }
}

fn gaussian(n: usize, mean: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, 1), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        mean + z
    })
}

fn small_cfg(loss: LossKind) -> TrainConfig {
    TrainConfig {
        loss,
        generator_optimizer: OptimizerSpec::new(OptimizerKind::Adam, 1e-2),
        discriminator_optimizer: OptimizerSpec::new(OptimizerKind::Adam, 1e-3),
        batch_size: 64,
        max_iterations: 30,
        seed: 7,
        discriminator: DiscriminatorSpec {
            hidden: vec![8, 8],
            ..DiscriminatorSpec::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn zero_iterations_leave_estimand_unchanged() {
    let obs = gaussian(200, 2.0, 1);
    let mut est = Estimand::scalar("theta", 0.5, Some(2.0));
    let cfg = TrainConfig {
        max_iterations: 0,
        ..small_cfg(LossKind::Vanilla)
    };
    let h = train(cfg, &Shift, &obs, &mut est).unwrap();
    assert!(h.is_empty());
    assert_eq!(est.scalars, vec![0.5]);
}

#[test]
fn invalid_configs_are_rejected() {
    let obs = gaussian(10, 0.0, 1);
    let est = Estimand::scalar("theta", 0.0, None);
    for cfg in [
        TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            disc_steps: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            threshold: -1.0,
            ..TrainConfig::default()
        },
    ] {
        assert!(Trainer::new(cfg, &Shift, &obs, est.clone()).is_err());
    }
    let empty = Matrix::zeros((0, 1));
    assert!(Trainer::new(TrainConfig::default(), &Shift, &empty, est.clone()).is_err());
    assert!(Estimand::new(vec![], vec![], vec![], None).is_err());
}

#[test]
fn stop_rule_needs_five_consecutive_hits() {
    let mut s = StopRule::new(0.1, 1.0);
    let seq = [1.05, 1.05, 1.05, 1.05, 2.0, 1.01, 0.99, 1.0, 1.02, 0.95];
    let stops: Vec<bool> = seq.iter().map(|&d| s.observe(d)).collect();
    assert_eq!(stops.iter().position(|&b| b), Some(9));
    let mut never = StopRule::new(0.0, 1.0);
    assert!((0..100).all(|_| !never.observe(1.0)));
}

#[test]
fn discrepancy_of_constant_discriminator_is_equilibrium() {
    let disc = Mlp::zeros(&[1, 4, 1], Activation::Tanh, Activation::Sigmoid).unwrap();
    let norm = InputNorm::identity(1);
    let x = gaussian(50, 0.0, 3);
    for kind in [LossKind::Vanilla, LossKind::Kl] {
        let lp = LossPair::new(kind);
        let d = evaluate_discrepancy(&disc, &norm, &x, &x, &lp).unwrap();
        assert!((d - lp.equilibrium_discriminator_loss).abs() < 1e-12);
    }
    assert!(evaluate_discrepancy(
        &disc,
        &norm,
        &Matrix::zeros((0, 1)),
        &x,
        &LossPair::new(LossKind::Vanilla)
    )
    .is_err());
}

#[test]
fn trained_discriminator_separates_distant_batches() {
    let obs = gaussian(256, 6.0, 4);
    let est = Estimand::scalar("theta", -6.0, None);
    let cfg = TrainConfig {
        discriminator_optimizer: OptimizerSpec::new(OptimizerKind::Adam, 1e-2),
        batch_size: 256,
        discriminator: DiscriminatorSpec {
            hidden: vec![8],
            norm: NormKind::None,
            ..DiscriminatorSpec::default()
        },
        ..small_cfg(LossKind::Vanilla)
    };
    let mut t = Trainer::new(cfg, &Shift, &obs, est).unwrap();
    for _ in 0..300 {
        t.discriminator_phase().unwrap();
    }
    let fake = gaussian(256, -6.0, 5);
    let d = evaluate_discrepancy(
        t.discriminator(),
        t.input_norm(),
        &obs,
        &fake,
        &LossPair::new(LossKind::Vanilla),
    )
    .unwrap();
    assert!(d < 0.05, "{d}");
}

#[test]
fn discriminator_phase_leaves_generator_bit_identical() {
    let obs = gaussian(100, 1.0, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = Mlp::glorot(&[3, 5, 1], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
    let g = Generator::new(net, NoiseSpec::new(NoiseKind::Uniform, 3).unwrap()).unwrap();
    let est = Estimand::new(vec![], vec![], vec![], Some(g)).unwrap();
    let cfg = TrainConfig {
        disc_steps: 4,
        ..small_cfg(LossKind::Vanilla)
    };
    let mut t = Trainer::new(cfg, &Shift, &obs, est).unwrap();
    let before: Vec<u64> = t.estimand().flat_params().iter().map(|v| v.to_bits()).collect();
    let disc_before = t.discriminator().flat_params();
    t.discriminator_phase().unwrap();
    let after: Vec<u64> = t.estimand().flat_params().iter().map(|v| v.to_bits()).collect();
    assert_eq!(before, after);
    assert_ne!(disc_before, t.discriminator().flat_params());
    t.generator_phase().unwrap();
    assert_ne!(
        before,
        t.estimand()
            .flat_params()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    );
}

#[test]
fn wasserstein_weights_stay_clipped() {
    let obs = gaussian(100, 1.0, 2);
    let cfg = TrainConfig {
        clip: 0.05,
        discriminator_optimizer: OptimizerSpec::new(OptimizerKind::RmsProp, 1e-1),
        disc_steps: 3,
        ..small_cfg(LossKind::Wasserstein)
    };
    let mut t = Trainer::new(cfg, &Shift, &obs, Estimand::scalar("theta", 0.0, None)).unwrap();
    for _ in 0..10 {
        t.run_for(1).unwrap();
        assert!(t.discriminator().flat_params().iter().all(|w| w.abs() <= 0.05));
    }
}

#[test]
fn seeded_runs_are_identical() {
    let obs = gaussian(300, 2.0, 1);
    let run = || {
        let mut est = Estimand::scalar("theta", 0.0, None);
        train(small_cfg(LossKind::Kl), &Shift, &obs, &mut est)
            .unwrap()
            .to_csv(false)
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.lines().count(), 31);
    assert!(a.starts_with("iteration,model_loss,disc_loss,theta\n"));
    let mut est = Estimand::scalar("theta", 0.0, None);
    let other = TrainConfig {
        seed: 8,
        ..small_cfg(LossKind::Kl)
    };
    assert_ne!(a, train(other, &Shift, &obs, &mut est).unwrap().to_csv(false));
}

#[test]
fn resume_reproduces_uninterrupted_history() {
    let obs = gaussian(300, 2.0, 1);
    for gen in [OptimizerKind::Adam, OptimizerKind::Lbfgs] {
        let cfg = TrainConfig {
            generator_optimizer: OptimizerSpec::new(gen, 1e-2),
            max_iterations: 20,
            ..small_cfg(LossKind::Vanilla)
        };
        let mut full = Trainer::new(cfg.clone(), &Shift, &obs, Estimand::scalar("theta", 0.0, None)).unwrap();
        full.run().unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let mut first = Trainer::new(cfg.clone(), &Shift, &obs, Estimand::scalar("theta", 0.0, None)).unwrap();
        first.run_for(10).unwrap();
        first.checkpoint(&path).unwrap();
        let mut resumed = Trainer::resume(&path, cfg, &Shift, &obs).unwrap();
        assert_eq!(resumed.iteration(), 10);
        assert_eq!(resumed.discriminator(), first.discriminator());
        resumed.run().unwrap();
        assert_eq!(resumed.history().to_csv(false), full.history().to_csv(false));
        assert_eq!(resumed.estimand(), full.estimand());
    }
}

#[test]
fn periodic_checkpoint_round_trips() {
    let obs = gaussian(100, 2.0, 1);
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        checkpoint_interval: 5,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        max_iterations: 12,
        ..small_cfg(LossKind::Vanilla)
    };
    let mut t = Trainer::new(cfg.clone(), &Shift, &obs, Estimand::scalar("theta", 0.0, None)).unwrap();
    t.run().unwrap();
    let path = dir.path().join("checkpoint.json");
    let back = Trainer::resume(&path, cfg, &Shift, &obs).unwrap();
    assert_eq!(back.iteration(), 12);
    let bits = |v: Vec<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.estimand().flat_params()), bits(t.estimand().flat_params()));
    assert_eq!(
        bits(back.discriminator().flat_params()),
        bits(t.discriminator().flat_params())
    );
}

#[test]
fn corrupted_checkpoint_is_an_error() {
    let obs = gaussian(10, 0.0, 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    fs::write(&path, "{\"iteration\": 3, \"seed\": ").unwrap();
    let cfg = small_cfg(LossKind::Vanilla);
    assert!(matches!(
        Trainer::resume(&path, cfg.clone(), &Shift, &obs),
        Err(Error::Parse(_))
    ));
    assert!(matches!(
        Trainer::resume(&dir.path().join("missing.json"), cfg, &Shift, &obs),
        Err(Error::Io { .. })
    ));
}

#[test]
fn non_finite_loss_aborts_with_checkpoint_reference() {
    let obs = gaussian(50, 0.0, 1);
    let mut est = Estimand::scalar("theta", f64::NAN, None);
    let err = train(small_cfg(LossKind::Wasserstein), &Shift, &obs, &mut est).unwrap_err();
    match err {
        Error::TrainingAborted {
            iteration, checkpoint, ..
        } => {
            assert_eq!(iteration, 1);
            assert_eq!(checkpoint, "none");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn model_domain_errors_carry_the_iteration() {
    let mut obs = Array2::from_elem((20, 2), 0.05);
    obs[[3, 0]] = -0.01;
    let model = CirModel {
        scheme: CirScheme::Em,
        dt: 0.01,
        alpha: 0.5,
        kappa: ParamSource::Fixed(0.5),
        tau: ParamSource::Scalar(0),
        sigma: ParamSource::Fixed(0.08),
    };
    let cfg = TrainConfig {
        discriminator: DiscriminatorSpec {
            norm: NormKind::None,
            ..DiscriminatorSpec::default()
        },
        ..small_cfg(LossKind::Kl)
    };
    let mut est = Estimand::scalar("tau", 0.05, None);
    match train(cfg, &model, &obs, &mut est).unwrap_err() {
        Error::AtIteration { iteration, source } => {
            assert_eq!(iteration, 1);
            assert!(matches!(*source, Error::Domain { .. }));
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn vanilla_shift_converges_to_equilibrium() {
    let obs = gaussian(2000, 2.0, 11);
    let mut est = Estimand::scalar("theta", 0.0, Some(2.0));
    let cfg = TrainConfig {
        generator_optimizer: OptimizerSpec::new(OptimizerKind::Adam, 5e-3),
        discriminator_optimizer: OptimizerSpec::new(OptimizerKind::Adam, 5e-3),
        batch_size: 256,
        max_iterations: 2000,
        ..small_cfg(LossKind::Vanilla)
    };
    let h = train(cfg, &Shift, &obs, &mut est).unwrap();
    let theta = TrainHistory::tail_mean(&h.trace("theta").unwrap(), 0.1);
    assert!((theta - 2.0).abs() < 0.15, "theta {theta}");
    let lf = TrainHistory::tail_mean(&h.model_losses(), 0.1);
    let ld = TrainHistory::tail_mean(&h.disc_losses(), 0.1);
    let ln2 = std::f64::consts::LN_2;
    assert!((lf - ln2).abs() < 0.15, "L^F {lf}");
    assert!((ld - 2.0 * ln2).abs() < 0.15, "L^D {ld}");
}

#[test]
fn stop_threshold_ends_run_early() {
    let obs = gaussian(500, 0.0, 11);
    let mut est = Estimand::scalar("theta", 0.0, None);
    // data and model already agree, so L^D starts at equilibrium
    let cfg = TrainConfig {
        threshold: 0.2,
        max_iterations: 500,
        ..small_cfg(LossKind::Vanilla)
    };
    let h = train(cfg, &Shift, &obs, &mut est).unwrap();
    assert!(h.stopped_early);
    assert_eq!(h.len(), STOP_WINDOW);
}

#[test]
fn history_csv_layout() {
    let h = TrainHistory {
        names: vec!["a".into(), "b".into()],
        records: vec![HistoryRecord {
            iteration: 1,
            model_loss: 0.5,
            disc_loss: 1.25,
            estimates: vec![0.1, -2.0],
            wall_time: 0.0123456789,
        }],
        ..TrainHistory::default()
    };
    assert_eq!(
        h.to_csv(false),
        "iteration,model_loss,disc_loss,a,b\n1,0.5,1.25,0.1,-2\n"
    );
    assert_eq!(
        h.to_csv(true),
        "iteration,model_loss,disc_loss,a,b,wall_time\n1,0.5,1.25,0.1,-2,0.012346\n"
    );
    assert_eq!(TrainHistory::tail_mean(&[1.0, 2.0, 3.0, 4.0], 0.5), 3.5);
    assert_eq!(TrainHistory::tail_mean(&[1.0, 2.0, 3.0], 0.01), 3.0);
}
