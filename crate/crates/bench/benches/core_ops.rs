use std::hint::black_box;

use coarselab::barycenter::{coarse_surjectivity_constant, Surjectivity};
use coarselab::bundle::section_through;
use coarselab::bundle::{horoball_bundle, product_bundle};
use coarselab::flow::{flow_bound_check, shadow_search};
use coarselab::graph::generators::{free_group_ball, path, regular_tree};
use coarselab::growth::{ball_counts, barycenter_growth_pipeline, PipelineOptions};
use coarselab::hyperbolicity::{delta_four_point, sample_detours};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn hyperbolicity(c: &mut Criterion) {
    let mut group = c.benchmark_group("delta_four_point");
    for depth in [3usize, 4, 5] {
        let t = regular_tree(4, depth);
        group.bench_with_input(BenchmarkId::new("T4", depth), &t, |b, t| {
            b.iter(|| delta_four_point(black_box(t)).unwrap())
        });
    }
    let f = free_group_ball(2, 4);
    group.bench_function("F2-4", |b| {
        b.iter(|| delta_four_point(black_box(&f)).unwrap())
    });
    group.finish();

    let hb = horoball_bundle(&path(17), 4);
    let delta = delta_four_point(hb.total()).unwrap().delta_four_point;
    c.bench_function("sample_detours/horoball-P17", |b| {
        b.iter(|| sample_detours(black_box(hb.total()), delta, 50, 1).unwrap())
    });
}

fn growth(c: &mut Criterion) {
    let t = regular_tree(3, 10);
    c.bench_function("ball_counts/T3-10", |b| {
        b.iter(|| ball_counts(black_box(&t), 0, 10).unwrap())
    });

    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    let g = free_group_ball(2, 6);
    let l = match coarse_surjectivity_constant(&g, 2).unwrap() {
        Surjectivity::Bounded { constant, .. } => Some(constant),
        Surjectivity::Unbounded { .. } => None,
    };
    group.bench_function("F2-6", |b| {
        b.iter(|| {
            barycenter_growth_pipeline(
                black_box(&g),
                l,
                PipelineOptions {
                    depth: 2,
                    ..PipelineOptions::default()
                },
            )
            .unwrap()
        })
    });
    group.finish();
}

fn bundles(c: &mut Criterion) {
    let mut group = c.benchmark_group("flow_bound_check");
    for n in [9usize, 17, 33] {
        let hb = horoball_bundle(&path(n), 4);
        let a = [(n / 2) as u32];
        group.bench_with_input(BenchmarkId::new("horoball", n), &hb, |b, hb| {
            b.iter(|| flow_bound_check(black_box(hb), &a, 1).unwrap())
        });
    }
    group.finish();

    let pb = product_bundle(&path(33), 6);
    let target = section_through(&pb, pb.total_id(0, 16), 1).unwrap();
    c.bench_function("shadow_search/product-P33", |b| {
        b.iter(|| shadow_search(black_box(&pb), &target, 2, 5).unwrap_err())
    });
}

criterion_group!(benches, hyperbolicity, growth, bundles);
criterion_main!(benches);
