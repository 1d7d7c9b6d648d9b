use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tractlens_core::explain::shap_forest;
use tractlens_core::impute::impute_knn;
use tractlens_core::ingest::synth::{synth_generate_with, Scenario, SynthOptions};
use tractlens_core::ingest::{build_response, Dataset};
use tractlens_core::models::{fit_forest, ForestConfig};
use tractlens_core::rng::{rng_from_seed, unit_f64};
use tractlens_core::spatial_stats::{gi_star, jenks_breaks, weights_knn};

fn dataset(n: usize, scenario: Scenario, opts: &SynthOptions) -> Dataset {
    let (ds, _, _) = synth_generate_with(n, 20, 1, scenario, opts).unwrap();
    ds
}

fn spatial(c: &mut Criterion) {
    let mut g = c.benchmark_group("spatial");
    for n in [1_000, 10_000] {
        let ds = build_response(dataset(n, Scenario::PlantedHotspot, &SynthOptions::complete())).unwrap();
        let index = ds.spatial_index().unwrap();
        g.bench_with_input(BenchmarkId::new("weights_knn_8", n), &n, |b, _| {
            b.iter(|| weights_knn(black_box(&index), 8, true).unwrap())
        });
        let w = weights_knn(&index, 8, true).unwrap();
        let y = ds.response().unwrap();
        g.bench_with_input(BenchmarkId::new("gi_star", n), &n, |b, _| b.iter(|| gi_star(black_box(y), &w).unwrap()));
    }
    g.finish();
}

fn impute(c: &mut Criterion) {
    let ds = dataset(2_000, Scenario::LinearResponse, &SynthOptions { missing_fraction: 0.1, ..SynthOptions::default() });
    let index = ds.spatial_index().unwrap();
    c.bench_function("impute_knn_20/2000", |b| b.iter(|| impute_knn(black_box(&ds), &index, 20).unwrap()));
}

fn jenks(c: &mut Criterion) {
    let mut rng = rng_from_seed(3);
    let mut g = c.benchmark_group("jenks_k5");
    for n in [200, 1_000] {
        let values: Vec<f64> = (0..n).map(|_| unit_f64(&mut rng) * 100.0).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &values, |b, v| b.iter(|| jenks_breaks(black_box(v), 5).unwrap()));
    }
    g.finish();
}

fn models(c: &mut Criterion) {
    let ds = build_response(dataset(1_000, Scenario::NonlinearResponse, &SynthOptions::complete())).unwrap();
    let x = ds.feature_matrix().unwrap();
    let y = ds.response().unwrap().to_vec();
    let cfg = ForestConfig { n_trees: 50, mtry: 4, seed: 2, ..ForestConfig::default() };
    let mut g = c.benchmark_group("forest");
    g.sample_size(10);
    g.bench_function("fit_50_trees/1000", |b| b.iter(|| fit_forest(black_box(&x), &y, &cfg).unwrap()));
    let forest = fit_forest(&x, &y, &cfg).unwrap();
    let bg = x.select_rows(&(0..100).collect::<Vec<_>>());
    let xe = x.select_rows(&(100..150).collect::<Vec<_>>());
    g.bench_function("shap_50_rows_bg100", |b| b.iter(|| shap_forest(black_box(&forest), &xe, &bg).unwrap()));
    g.finish();
}

criterion_group!(benches, spatial, impute, jenks, models);
criterion_main!(benches);
