use std::hint::black_box;

use cosrec::{evaluate, Adam, AdamConfig, PopRec};
use cosrec_bench::{batch, model, toy_dataset};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn train_step(c: &mut Criterion) {
    let mut m = model(1000, 3416, 50);
    let mut adam = Adam::new(AdamConfig::default(), m.parameters().into_iter().map(|(_, t)| t));
    let (windows, negatives) = batch(128, 1000, 3416, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    c.bench_function("train_step/batch128_items3416", |b| {
        b.iter(|| {
            let (loss, grads) = m.loss_and_backward(&windows, &negatives, &mut rng).unwrap();
            adam.step(&mut m.parameters_mut(), &grads.tensors).unwrap();
            black_box(loss)
        })
    });
}

fn scoring(c: &mut Criterion) {
    let d = toy_dataset();
    let m = model(d.num_users, d.num_items, 50);
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    group.bench_function("cosrec_2000_users", |b| b.iter(|| black_box(evaluate(&m, &d, 1).unwrap())));
    let pop = PopRec::fit(&d);
    group.bench_function("poprec_2000_users", |b| b.iter(|| black_box(evaluate(&pop, &d, 1).unwrap())));
    group.finish();
}

criterion_group!(benches, train_step, scoring);
criterion_main!(benches);
