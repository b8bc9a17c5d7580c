use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use panel_outliers::boxplot::medcouple_naive;
use panel_outliers::concordance::kendall_tau_naive;
use panel_outliers::hb::hb_scores;
use panel_outliers::ingest::RatioSet;
use panel_outliers::knn::knn_distances_naive;
use panel_outliers::synthetic::shiw_like;
use panel_outliers::{dbscan_cluster, fit_forest, kendall_tau, knn_distances, medcouple, DbscanParams, ForestParams};

fn effect_scores(m: usize) -> Vec<f64> {
    let rs = RatioSet::from_positive_pairs(shiw_like(7, m)).unwrap();
    hb_scores(&rs, 0.5).unwrap().e
}

fn bench_medcouple(c: &mut Criterion) {
    let mut group = c.benchmark_group("medcouple");
    for m in [500, 2000, 8000] {
        let x = effect_scores(m);
        group.bench_with_input(BenchmarkId::new("fast", m), &x, |b, x| b.iter(|| medcouple(black_box(x))));
    }
    let x = effect_scores(500);
    group.bench_with_input(BenchmarkId::new("naive", 500), &x, |b, x| b.iter(|| medcouple_naive(black_box(x))));
    group.finish();
}

fn bench_knn(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn");
    for m in [1000, 10_000] {
        let x = effect_scores(m);
        group.bench_with_input(BenchmarkId::new("k15", m), &x, |b, x| b.iter(|| knn_distances(black_box(x), 15)));
    }
    let x = effect_scores(1000);
    group.bench_with_input(BenchmarkId::new("naive_k15", 1000), &x, |b, x| {
        b.iter(|| knn_distances_naive(black_box(x), 15))
    });
    group.finish();
}

fn bench_dbscan(c: &mut Criterion) {
    let x = effect_scores(10_000);
    let params = DbscanParams { delta: 0.5, g: 11 };
    c.bench_function("dbscan/10000", |b| b.iter(|| dbscan_cluster(black_box(&x), &params)));
}

fn bench_kendall(c: &mut Criterion) {
    let mut group = c.benchmark_group("kendall");
    for m in [1000, 10_000] {
        let a = effect_scores(m);
        let b_scores = knn_distances(&a, 5).unwrap().weight;
        group.bench_function(BenchmarkId::new("knight", m), |b| b.iter(|| kendall_tau(black_box(&a), black_box(&b_scores))));
    }
    let a = effect_scores(1000);
    let b_scores = knn_distances(&a, 5).unwrap().weight;
    group.bench_function(BenchmarkId::new("naive", 1000), |b| {
        b.iter(|| kendall_tau_naive(black_box(&a), black_box(&b_scores)))
    });
    group.finish();
}

fn bench_iforest(c: &mut Criterion) {
    let mut group = c.benchmark_group("iforest");
    group.sample_size(10);
    let x = effect_scores(5000);
    for q in [256, 5000] {
        let params = ForestParams { q: Some(q), ntrees: 500, seed: 1, max_depth: None };
        group.bench_function(BenchmarkId::new("fit_score_500_trees", q), |b| {
            b.iter(|| fit_forest(black_box(&x), &params).unwrap().score(&x))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_medcouple, bench_knn, bench_dbscan, bench_kendall, bench_iforest);
criterion_main!(benches);
