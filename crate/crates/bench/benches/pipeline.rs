use std::f64::consts::TAU;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use floorloc::localizer::HypothesisGrid;
use floorloc::{best_rotation, render, render_pose, score_grid, visible_points};
use floorloc_bench::{multi_room, probe_location, square_room};

fn bench_render(c: &mut Criterion) {
    let (map, cb, loc) = multi_room();
    c.bench_function("visible_points", |b| b.iter(|| visible_points(black_box(&map), loc).unwrap()));
    c.bench_function("render", |b| b.iter(|| render(black_box(&map), &cb, loc).unwrap()));
}

fn bench_matching(c: &mut Criterion) {
    let (map, cb) = square_room();
    let loc = probe_location();
    let q = render_pose(&map, &cb, loc, 0.3).unwrap();
    let h = render(&map, &cb, loc).unwrap();
    let mut group = c.benchmark_group("best_rotation");
    for n in [8usize, 16, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| best_rotation(&q, &h, n).unwrap()));
    }
    group.finish();
    let grid = HypothesisGrid::build(&map, &cb, 0.25).unwrap();
    c.bench_function("cached_grid_score_0.25m", |b| b.iter(|| grid.score(black_box(&q), 16).unwrap()));
}

fn bench_grid(c: &mut Criterion) {
    let (map, cb) = square_room();
    let q = render_pose(&map, &cb, probe_location(), TAU / 7.0).unwrap();
    let mut group = c.benchmark_group("score_grid");
    group.sample_size(10);
    for cell in [0.5, 0.25] {
        group.bench_with_input(BenchmarkId::from_parameter(cell), &cell, |b, &cell| {
            b.iter(|| score_grid(&map, &cb, black_box(&q), cell, 16).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_render, bench_matching, bench_grid);
criterion_main!(benches);
