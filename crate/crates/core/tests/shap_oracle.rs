mod oracles;

use oracles::{forest_shap_exhaustive, random_shap_instance, random_tree};
use tractlens_core::explain::{mean_abs_shap, shap_forest, shap_tree, ShapMatrix};
use tractlens_core::models::{fit_forest, ForestConfig};
use tractlens_core::rng::{rng_from_seed, unit_f64};
use tractlens_core::Matrix;

#[test]
fn forest_algorithm_equals_exhaustive_enumeration() {
    for seed in 0..100u64 {
        let inst = random_shap_instance(seed);
        let x = Matrix::from_rows(std::slice::from_ref(&inst.x)).unwrap();
        let fast = shap_forest(&inst.forest, &x, &inst.background).unwrap();
        let (phi, base) = forest_shap_exhaustive(&inst);
        assert!((fast.base_value - base).abs() <= 1e-9, "seed {seed}");
        for (a, b) in fast.phi.row(0).iter().zip(&phi) {
            assert!((a - b).abs() <= 1e-9, "seed {seed}: {a} vs {b}");
        }
        let total = fast.base_value + fast.phi.row(0).iter().sum::<f64>();
        assert!((total - inst.forest.predict_row(&inst.x)).abs() <= 1e-9);
        for &j in &inst.unused {
            assert_eq!(fast.phi.get(0, j), 0.0);
        }
    }
}

#[test]
fn forest_attribution_is_mean_of_tree_attributions() {
    let inst = random_shap_instance(1234);
    let x = Matrix::from_rows(std::slice::from_ref(&inst.x)).unwrap();
    let fast = shap_forest(&inst.forest, &x, &inst.background).unwrap();
    let d = inst.forest.n_features;
    let mut mean = vec![0.0; d];
    for t in &inst.forest.trees {
        let (phi, _) = shap_tree(t, &inst.x, &inst.background).unwrap();
        for j in 0..d {
            mean[j] += phi[j] / inst.forest.trees.len() as f64;
        }
    }
    for j in 0..d {
        assert!((fast.phi.get(0, j) - mean[j]).abs() < 1e-12);
    }
}

#[test]
fn relabelling_features_permutes_attributions() {
    let mut rng = rng_from_seed(5);
    let d = 5;
    let tree = random_tree(&mut rng, d, &[0, 1, 2, 3, 4], 4);
    let perm = [3, 0, 4, 1, 2];
    let mut moved = tree.clone();
    for node in &mut moved.nodes {
        if let tractlens_core::models::Node::Split { feature, .. } = node {
            *feature = perm[*feature];
        }
    }
    let x: Vec<f64> = (0..d).map(|_| unit_f64(&mut rng)).collect();
    let bg: Vec<Vec<f64>> = (0..6).map(|_| (0..d).map(|_| unit_f64(&mut rng)).collect()).collect();
    let permute = |v: &[f64]| {
        let mut out = vec![0.0; d];
        for j in 0..d {
            out[perm[j]] = v[j];
        }
        out
    };
    let bg_p: Vec<Vec<f64>> = bg.iter().map(|r| permute(r)).collect();
    let (phi, _) = shap_tree(&tree, &x, &Matrix::from_rows(&bg).unwrap()).unwrap();
    let (phi_p, _) = shap_tree(&moved, &permute(&x), &Matrix::from_rows(&bg_p).unwrap()).unwrap();
    assert_eq!(permute(&phi), phi_p);
}

#[test]
fn efficiency_on_a_fitted_forest() {
    let mut rng = rng_from_seed(8);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..6).map(|_| unit_f64(&mut rng)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| 5.0 * r[0] + (r[1] > 0.5) as u8 as f64 * 3.0 * r[2]).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let cfg = ForestConfig { n_trees: 30, mtry: 3, seed: 2, ..ForestConfig::default() };
    let forest = fit_forest(&x, &y, &cfg).unwrap();
    let bg = x.select_rows(&(0..25).collect::<Vec<_>>());
    let test = x.select_rows(&(100..140).collect::<Vec<_>>());
    let s = shap_forest(&forest, &test, &bg).unwrap();
    for (i, row) in test.iter_rows().enumerate() {
        let total = s.base_value + s.phi.row(i).iter().sum::<f64>();
        assert!((total - forest.predict_row(row)).abs() <= 1e-6);
    }
    for j in 0..6 {
        if !forest.trees.iter().any(|t| t.used_features().contains(&j)) {
            assert!(s.phi.column(j).iter().all(|&p| p == 0.0));
        }
    }
}

#[test]
fn importance_ignores_instance_order() {
    let mut rng = rng_from_seed(3);
    let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| unit_f64(&mut rng) * 1e3 - 500.0).collect()).collect();
    let mut reversed = rows.clone();
    reversed.reverse();
    let names: Vec<String> = (0..4).map(|j| format!("f{j}")).collect();
    let a = mean_abs_shap(&ShapMatrix { base_value: 0.0, phi: Matrix::from_rows(&rows).unwrap() }, &names).unwrap();
    let b = mean_abs_shap(&ShapMatrix { base_value: 0.0, phi: Matrix::from_rows(&reversed).unwrap() }, &names).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parallel_and_sequential_agree() {
    let inst = random_shap_instance(77);
    let xs: Vec<Vec<f64>> = (0..30).map(|i| inst.x.iter().map(|v| (v + i as f64 * 0.031) % 1.0).collect()).collect();
    let x = Matrix::from_rows(&xs).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| shap_forest(&inst.forest, &x, &inst.background).unwrap())
    };
    assert_eq!(run(1), run(4));
}
