use proptest::prelude::*;
use tractlens_core::ingest::synth::{synth_generate_with, Scenario, SynthOptions};
use tractlens_core::ingest::build_response;
use tractlens_core::models::{
    compare_models, fit_forest, fit_ols, kfold, predict_forest, predict_linear, r2, rmse, train_test_split, ForestConfig,
    SvrParams, LINEAR_REGRESSION, RANDOM_FOREST,
};
use tractlens_core::rng::{rng_from_seed, unit_f64};
use tractlens_core::Matrix;

fn planted_linear(seed: u64, n: usize, beta: &[f64], intercept: f64) -> (Matrix, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| beta.iter().map(|_| unit_f64(&mut rng) * 20.0 - 10.0).collect()).collect();
    let y = rows.iter().map(|r| intercept + r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn ols_recovers_planted_coefficients() {
    for seed in 0..20 {
        let beta = [1.5, -3.25, 0.125];
        let (x, y) = planted_linear(seed, 40, &beta, 7.0);
        let m = fit_ols(&x, &y).unwrap();
        assert!((m.intercept - 7.0).abs() < 1e-8);
        for (b, want) in m.coefficients.iter().zip(beta) {
            assert!((b - want).abs() < 1e-8);
        }
    }
}

#[test]
fn forest_beats_ols_on_interactions() {
    let opts = SynthOptions::complete();
    let (ds, _, _) = synth_generate_with(1000, 10, 3, Scenario::NonlinearResponse, &opts).unwrap();
    let ds = build_response(ds).unwrap();
    let x = ds.feature_matrix().unwrap();
    let y = ds.response().unwrap().to_vec();
    let split = train_test_split(y.len(), 0.75, 3).unwrap();
    let pick = |idx: &[usize]| (x.select_rows(idx), idx.iter().map(|&i| y[i]).collect::<Vec<_>>());
    let (xt, yt) = pick(&split.train);
    let (xv, yv) = pick(&split.test);
    let cfg = ForestConfig { n_trees: 60, mtry: 4, seed: 1, ..ForestConfig::default() };
    let fitted = compare_models(&xt, &yt, &xv, &yv, &cfg, &SvrParams::default()).unwrap();
    let rf = fitted.report.score(RANDOM_FOREST).unwrap().r2;
    let lr = fitted.report.score(LINEAR_REGRESSION).unwrap().r2;
    assert!(rf > lr, "forest {rf} vs ols {lr}");
    let again = compare_models(&xt, &yt, &xv, &yv, &cfg, &SvrParams::default()).unwrap();
    assert_eq!(fitted.report, again.report);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn r2_rmse_identity(obs in prop::collection::vec(-10.0f64..10.0, 3..40), noise in prop::collection::vec(-1.0f64..1.0, 40)) {
        let n = obs.len();
        let mean = obs.iter().sum::<f64>() / n as f64;
        let sst: f64 = obs.iter().map(|o| (o - mean) * (o - mean)).sum();
        prop_assume!(sst > 1e-9);
        let pred: Vec<f64> = obs.iter().zip(&noise).map(|(o, e)| o + e).collect();
        let e = rmse(&pred, &obs).unwrap();
        prop_assert!((r2(&pred, &obs).unwrap() - (1.0 - e * e * n as f64 / sst)).abs() < 1e-9);
    }

    #[test]
    fn ols_residuals_are_orthogonal(seed: u64) {
        let mut rng = rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| unit_f64(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..30).map(|_| unit_f64(&mut rng) * 5.0).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit_ols(&x, &y).unwrap();
        let res: Vec<f64> = predict_linear(&m, &x).unwrap().iter().zip(&y).map(|(p, o)| o - p).collect();
        let ones = vec![1.0; 30];
        for col in std::iter::once(ones).chain((0..4).map(|c| x.column(c))) {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = col.iter().zip(&res).map(|(a, b)| a * b).sum();
            prop_assert!((dot / norm).abs() <= 1e-8);
        }
    }

    #[test]
    fn forest_prediction_is_tree_mean(seed: u64, n_trees in 1usize..8, mtry in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| unit_f64(&mut rng)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 3.0 - r[2] + unit_f64(&mut rng)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let f = fit_forest(&x, &y, &ForestConfig { n_trees, mtry, seed, ..ForestConfig::default() }).unwrap();
        let p = predict_forest(&f, &x).unwrap();
        for (row, pi) in x.iter_rows().zip(p) {
            let mean = f.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / n_trees as f64;
            prop_assert_eq!(pi, mean);
        }
        for t in &f.trees {
            prop_assert!(t.validate().is_ok());
        }
    }

    #[test]
    fn five_folds_partition_training_rows(n in 10usize..400, seed: u64) {
        let split = train_test_split(n, 0.75, seed).unwrap();
        let folds = kfold(&split.train, 5, seed).unwrap();
        let mut all: Vec<usize> = (0..5).flat_map(|f| folds.validation(f)).collect();
        all.sort_unstable();
        prop_assert_eq!(&all, &split.train);
        let sizes = folds.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
