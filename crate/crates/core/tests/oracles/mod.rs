//! Independent reference implementations used as test oracles. Each one
//! favours the most direct formulation (full sorts, exhaustive enumeration)
//! over speed.
#![allow(dead_code)]

use tractlens_core::explain::shap_bruteforce;
use tractlens_core::geo::{haversine_miles, GeoPoint, EARTH_RADIUS_MILES};
use tractlens_core::ingest::{Dataset, FeatureKind, FeatureSpec, Schema, UnitRecord};
use tractlens_core::models::{DecisionTree, ForestConfig, ForestModel, Node};
use tractlens_core::rng::{below, rng_from_seed, unit_f64, Rng};
use tractlens_core::Matrix;

/// Great-circle distance from the chord between unit vectors:
/// `2 R asin(|a - b| / 2)`.
pub fn chord_distance_miles(a: GeoPoint, b: GeoPoint) -> f64 {
    let v = |p: GeoPoint| {
        let (la, lo) = (p.lat().to_radians(), p.lon().to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let (u, w) = (v(a), v(b));
    let chord = ((u[0] - w[0]).powi(2) + (u[1] - w[1]).powi(2) + (u[2] - w[2]).powi(2)).sqrt();
    2.0 * EARTH_RADIUS_MILES * (chord / 2.0).min(1.0).asin()
}

pub fn random_points(rng: &mut Rng, n: usize, lat0: f64, lon0: f64, span: f64) -> Vec<(String, GeoPoint)> {
    (0..n)
        .map(|i| {
            // Clamping keeps near-polar clusters valid and puts some points on the pole.
            let lat = (lat0 + (unit_f64(rng) - 0.5) * span).clamp(-90.0, 90.0);
            let lon = lon0 + (unit_f64(rng) - 0.5) * span;
            (format!("P{i:04}"), GeoPoint::new(lat, lon).unwrap())
        })
        .collect()
}

/// All points ordered by (distance, id).
pub fn brute_sorted(points: &[(String, GeoPoint)], q: GeoPoint) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points.iter().enumerate().map(|(i, (_, p))| (i, haversine_miles(q, *p))).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| points[a.0].0.cmp(&points[b.0].0)));
    all
}

pub fn brute_knn(points: &[(String, GeoPoint)], q: GeoPoint, k: usize) -> Vec<(usize, f64)> {
    brute_sorted(points, q).into_iter().take(k).collect()
}

pub fn brute_radius(points: &[(String, GeoPoint)], q: GeoPoint, r: f64) -> Vec<(usize, f64)> {
    brute_sorted(points, q).into_iter().filter(|&(_, d)| d <= r).collect()
}

/// `k` nearest other points of each point, by (distance, id).
pub fn brute_knn_neighbours(points: &[(String, GeoPoint)], k: usize) -> Vec<Vec<usize>> {
    (0..points.len())
        .map(|i| brute_sorted(points, points[i].1).into_iter().map(|(j, _)| j).filter(|&j| j != i).take(k).collect())
        .collect()
}

/// Gi* with binary self-inclusive weights, evaluated with raw (uncentred)
/// sums exactly as the statistic is usually written.
pub fn gi_star_direct(x: &[f64], neighbours: &[Vec<usize>]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let s = (x.iter().map(|v| v * v).sum::<f64>() / n - mean * mean).sqrt();
    neighbours
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let w = (nb.len() + 1) as f64;
            let local = x[i] + nb.iter().map(|&j| x[j]).sum::<f64>();
            let denom = s * ((n * w - w * w) / (n - 1.0)).sqrt();
            (local - mean * w) / denom
        })
        .collect()
}

/// Two-pass within-class SSD of `sorted` split before each index in `cuts`.
pub fn ssd_of_cuts(sorted: &[f64], cuts: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut start = 0;
    for &end in cuts.iter().chain(std::iter::once(&sorted.len())) {
        let class = &sorted[start..end];
        let mean = class.iter().sum::<f64>() / class.len() as f64;
        total += class.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        start = end;
    }
    total
}

/// Minimum SSD over every way of cutting the distinct sorted values into
/// `k` contiguous classes.
pub fn jenks_exhaustive(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Legal cut positions: boundaries between distinct values.
    let boundaries: Vec<usize> = (1..sorted.len()).filter(|&i| sorted[i] != sorted[i - 1]).collect();
    let mut best = f64::INFINITY;
    let mut cuts = Vec::with_capacity(k);
    fn go(sorted: &[f64], boundaries: &[usize], from: usize, left: usize, cuts: &mut Vec<usize>, best: &mut f64) {
        if left == 0 {
            *best = best.min(ssd_of_cuts(sorted, cuts));
            return;
        }
        for b in from..boundaries.len() {
            cuts.push(boundaries[b]);
            go(sorted, boundaries, b + 1, left - 1, cuts, best);
            cuts.pop();
        }
    }
    go(&sorted, &boundaries, 0, k - 1, &mut cuts, &mut best);
    best
}

/// Random units on a small patch. Coordinates are drawn from a coarse lattice
/// so co-located units (exact distance ties) are common.
pub fn random_impute_dataset(rng: &mut Rng, n: usize, missing: f64) -> Dataset {
    let schema = Schema::new(vec![
        FeatureSpec::numeric("a", ""),
        FeatureSpec::numeric("b", ""),
        FeatureSpec::binary("c", ""),
    ])
    .unwrap();
    let units: Vec<UnitRecord> = (0..n)
        .map(|i| {
            let lat = 40.0 + below(rng, 12) as f64 * 0.01;
            let lon = -100.0 + below(rng, 12) as f64 * 0.01;
            let a = (unit_f64(rng) * 100.0).round() / 4.0;
            let b = unit_f64(rng) * 1e5;
            let c = below(rng, 2) as f64;
            let mut cell = |v: f64| (unit_f64(rng) >= missing).then_some(v);
            UnitRecord {
                id: format!("U{:03}", (i * 37) % 1000),
                centroid: GeoPoint::new(lat, lon).unwrap(),
                rate_y1: Some(70.0),
                rate_y2: Some(70.0),
                features: vec![cell(a), cell(b), cell(c)],
            }
        })
        .collect();
    let mut ds = Dataset::new(schema, units).unwrap();
    // Every column needs at least one donor.
    for j in 0..3 {
        if ds.units.iter().all(|u| u.features[j].is_none()) {
            ds.units[0].features[j] = Some(1.0);
        }
    }
    ds
}

/// Sort every other unit with the feature present by (distance, id), take
/// the first `k`, and average (numeric, clamped to the donor range) or take
/// the majority with ties to 0 (binary).
pub fn impute_sort_and_take(ds: &Dataset, k: usize) -> Vec<Vec<f64>> {
    ds.units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            ds.schema
                .features()
                .iter()
                .enumerate()
                .map(|(j, spec)| {
                    if let Some(v) = u.features[j] {
                        return v;
                    }
                    let mut donors: Vec<(f64, &str, f64)> = ds
                        .units
                        .iter()
                        .enumerate()
                        .filter(|&(o, other)| o != i && other.features[j].is_some())
                        .map(|(_, other)| (haversine_miles(u.centroid, other.centroid), other.id.as_str(), other.features[j].unwrap()))
                        .collect();
                    donors.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
                    donors.truncate(k);
                    let vals: Vec<f64> = donors.iter().map(|d| d.2).collect();
                    match spec.kind {
                        FeatureKind::Numeric => {
                            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            mean.max(lo).min(hi)
                        }
                        FeatureKind::Binary => {
                            let ones = vals.iter().filter(|&&v| v == 1.0).count();
                            if ones > vals.len() - ones {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Random tree of depth at most `max_depth` using only `features`.
pub fn random_tree(rng: &mut Rng, d: usize, features: &[usize], max_depth: usize) -> DecisionTree {
    fn grow(rng: &mut Rng, features: &[usize], depth: usize, nodes: &mut Vec<Node>) -> usize {
        let slot = nodes.len();
        nodes.push(Node::Leaf { value: 0.0, cover: 1 });
        if depth == 0 || features.is_empty() || unit_f64(rng) < 0.2 {
            nodes[slot] = Node::Leaf { value: (unit_f64(rng) * 20.0 - 10.0).round() / 2.0 + unit_f64(rng), cover: 1 };
            return slot;
        }
        let feature = features[below(rng, features.len())];
        let threshold = unit_f64(rng);
        let left = grow(rng, features, depth - 1, nodes);
        let right = grow(rng, features, depth - 1, nodes);
        let cover = nodes[left].cover() + nodes[right].cover();
        nodes[slot] = Node::Split { feature, threshold, left, right, cover };
        slot
    }
    let mut nodes = Vec::new();
    grow(rng, features, max_depth, &mut nodes);
    DecisionTree { n_features: d, nodes }
}

pub struct ShapInstance {
    pub forest: ForestModel,
    pub x: Vec<f64>,
    pub background: Matrix,
    /// Features that no tree reads.
    pub unused: Vec<usize>,
}

/// Forest with `d <= 8`, depth `<= 4`, `<= 20` trees and a background of
/// at most 16 rows. One or two features are left out of every tree.
pub fn random_shap_instance(seed: u64) -> ShapInstance {
    let mut rng = rng_from_seed(seed);
    let d = 2 + below(&mut rng, 7);
    let n_unused = 1 + below(&mut rng, 2).min(d - 2);
    let mut perm: Vec<usize> = (0..d).collect();
    tractlens_core::rng::shuffle(&mut rng, &mut perm);
    let unused: Vec<usize> = perm[..n_unused].to_vec();
    let used: Vec<usize> = perm[n_unused..].to_vec();
    let n_trees = 1 + below(&mut rng, 20);
    let depth = 1 + below(&mut rng, 4);
    let trees = (0..n_trees).map(|_| random_tree(&mut rng, d, &used, depth)).collect();
    let forest = ForestModel::from_trees(trees, ForestConfig { mtry: 1, ..ForestConfig::default() }).unwrap();
    let x = (0..d).map(|_| unit_f64(&mut rng)).collect();
    let nb = 1 + below(&mut rng, 16);
    let bg: Vec<Vec<f64>> = (0..nb).map(|_| (0..d).map(|_| unit_f64(&mut rng)).collect()).collect();
    ShapInstance { forest, x, background: Matrix::from_rows(&bg).unwrap(), unused }
}

/// Exhaustive Shapley values of the forest's prediction function.
pub fn forest_shap_exhaustive(inst: &ShapInstance) -> (Vec<f64>, f64) {
    shap_bruteforce(|z| inst.forest.predict_row(z), &inst.x, &inst.background).unwrap()
}
