use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use ptinterp_core::mesh::{build_figure1_mesh, build_uniform_tensor};
use ptinterp_core::norms::{norm, NormKind};
use ptinterp_core::oracles::{random_field, random_pair, seeded_rng};
use ptinterp_core::spacetime::{interp_lambda, interp_x_irregular, interp_x_tensor_field};
use ptinterp_core::Direction;

fn operators(c: &mut Criterion) {
    let mesh = build_uniform_tensor(1.0, 1.0, 32, 32).unwrap();
    let mut rng = seeded_rng(1);
    let v = random_field(&mut rng, &mesh, 1, 1, 2, true).unwrap();
    c.bench_function("I_X tensor 32x32", |b| {
        b.iter(|| interp_x_tensor_field(black_box(&v), &mesh, 1, 1).unwrap())
    });

    let small = build_uniform_tensor(1.0, 1.0, 8, 8).unwrap();
    let pair = random_pair(&mut rng, &small, 1, 1, 2).unwrap();
    c.bench_function("I_Lambda 8x8", |b| b.iter(|| interp_lambda(black_box(&pair), &small, 1, 1).unwrap()));

    let base = build_uniform_tensor(1.0, 1.0, 64, 8).unwrap();
    let irregular = Arc::new(build_figure1_mesh(&base, 4).unwrap());
    let w = random_field(&mut rng, &base, 1, 1, 2, true).unwrap();
    c.bench_function("I_X slab-refined 64x8", |b| {
        b.iter(|| interp_x_irregular(black_box(&w), &irregular, 1, 1).unwrap())
    });
}

fn norms(c: &mut Criterion) {
    let mesh = build_uniform_tensor(1.0, 1.0, 32, 32).unwrap();
    let mut rng = seeded_rng(2);
    let v = random_field(&mut rng, &mesh, 1, 1, 2, true).unwrap();
    let dt = v.differentiate(Direction::T);
    c.bench_function("L2(H^-1) norm 64x64 cells", |b| {
        b.iter(|| norm(black_box(&dt), NormKind::L2Hminus1).unwrap())
    });
}

criterion_group!(benches, operators, norms);
criterion_main!(benches);
