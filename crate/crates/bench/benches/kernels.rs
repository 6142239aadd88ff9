use ana_core::autodiff::{Tape, TridiagonalSystem};
use ana_core::models::{poisson_solve_batch, simulate_cir_path, CirParams, CirScheme};
use ana_core::neural::{Activation, Mlp};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn tape_mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Mlp::glorot(&[2, 20, 20, 20, 1], Activation::Tanh, Activation::Sigmoid, &mut rng).unwrap();
    let mut g = c.benchmark_group("mlp_forward_backward");
    for batch in [32usize, 1000, 4000] {
        let x = Array2::from_shape_fn((batch, 2), |_| rng.random::<f64>());
        g.bench_with_input(BenchmarkId::from_parameter(batch), &x, |b, x| {
            b.iter(|| {
                let mut tape = Tape::new();
                let input = tape.leaf(x.clone());
                let (out, _) = net.forward(&mut tape, input).unwrap();
                let loss = tape.sum(out);
                black_box(tape.backward(loss).unwrap());
            })
        });
    }
    g.finish();
}

fn thomas(c: &mut Criterion) {
    let mut g = c.benchmark_group("thomas_solve");
    for n in [100usize, 10_000] {
        let sys = TridiagonalSystem::new(vec![-1.0; n - 1], vec![2.5; n], vec![-1.0; n - 1], vec![1.0; n]).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, sys| {
            b.iter(|| black_box(sys.solve().unwrap()))
        });
    }
    g.finish();
}

fn cir_path(c: &mut Criterion) {
    let p = CirParams::new(0.5, 0.06, 0.08, 0.01, 0.5).unwrap();
    let mut g = c.benchmark_group("cir_path_4000");
    for (label, scheme) in [("em", CirScheme::Em), ("milstein", CirScheme::Milstein)] {
        g.bench_function(label, |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            b.iter(|| black_box(simulate_cir_path(0.06, 4000, &p, scheme, &mut rng).unwrap()))
        });
    }
    g.finish();
}

fn poisson_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mu = Array2::from_shape_fn((32, 1), |_| 0.3 + 0.1 * rng.random::<f64>());
    c.bench_function("poisson_batch_32x100_backward", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let m = tape.leaf(mu.clone());
            let s = tape.scalar(0.1);
            let u = poisson_solve_batch(&mut tape, m, s, 100).unwrap();
            let loss = tape.sum(u);
            black_box(tape.backward(loss).unwrap());
        })
    });
}

criterion_group!(benches, tape_mlp, thomas, cir_path, poisson_batch);
criterion_main!(benches);
