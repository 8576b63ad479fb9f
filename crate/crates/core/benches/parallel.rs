//! Sequential versus data-parallel execution of the two hot paths: scene
//! simulations during dataset generation and batched dense-layer gradients.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twr::dataset::{generate_dataset, SimulationSetup};
use twr::nn::{backward, forward, init_network, msle_grad, Matrix, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use twr::par::{available_workers, Executor};
use twr::scene::Mode;

fn executors() -> Vec<(&'static str, Executor)> {
    vec![("sequential", Executor::sequential()), ("parallel", Executor::new(available_workers().max(2)))]
}

fn generation(c: &mut Criterion) {
    let mut setup = SimulationSetup::desk_scale();
    setup.discretization.n_steps = 512;
    setup.features.n_time_samples = 32;
    let mut g = c.benchmark_group("generate_8_scenes");
    g.sample_size(10);
    for (name, exec) in executors() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_dataset(Mode::Single, 8, black_box(&setup), 1, &exec, None).unwrap())
        });
    }
    g.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let n_in = 576;
    let mut widths = vec![n_in];
    widths.extend_from_slice(&DEFAULT_HIDDEN);
    widths.push(5);
    let mut rates = DEFAULT_DROPOUT.to_vec();
    rates.push(0.0);
    let net = init_network(&widths, &rates, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut g = c.benchmark_group("forward_backward");
    for batch in [20, 256] {
        let x = Matrix { rows: batch, cols: n_in, data: (0..batch * n_in).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let y: Vec<f64> = (0..batch * 5).map(|_| rng.gen_range(0.0..10.0)).collect();
        for (name, exec) in executors() {
            g.bench_with_input(BenchmarkId::new(name, batch), &x, |b, x| {
                b.iter(|| {
                    let mut mask_rng = ChaCha8Rng::seed_from_u64(3);
                    let (out, cache) = forward(&net, x, true, &mut mask_rng, &exec).unwrap();
                    let dy = Matrix { rows: out.rows, cols: out.cols, data: msle_grad(&y, &out.data).unwrap() };
                    backward(&net, &cache, &dy, &exec).unwrap()
                })
            });
        }
    }
    g.finish();
}

criterion_group!(benches, generation, batch_gradient);
criterion_main!(benches);
