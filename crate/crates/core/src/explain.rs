//! Interventional Shapley attributions: an exhaustive reference implementation
//! and an exact per-tree algorithm for forests, plus importance summaries.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::models::{DecisionTree, ForestModel, Node};
use crate::rng::{rng_from_seed, sample_without_replacement};

/// Largest feature count [`shap_bruteforce`] will enumerate.
pub const MAX_BRUTEFORCE_FEATURES: usize = 16;
pub const DEFAULT_TOP_THRESHOLD: f64 = 0.3;
pub const DEFAULT_BACKGROUND_SIZE: usize = 100;

/// Row `i` of `phi` attributes `model(x_i) - base_value` across features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub base_value: f64,
    pub phi: Matrix,
}

impl ShapMatrix {
    pub fn n_instances(&self) -> usize {
        self.phi.rows()
    }

    pub fn n_features(&self) -> usize {
        self.phi.cols()
    }
}

/// Exact Shapley values of `model` at `x`, where a coalition `S` is valued by
/// averaging `model` over background rows with the features outside `S` taken
/// from the background. Returns `(phi, base)` with `base = v(∅)`.
pub fn shap_bruteforce<F>(model: F, x: &[f64], background: &Matrix) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let d = x.len();
    if d > MAX_BRUTEFORCE_FEATURES {
        return Err(Error::TooManyFeatures(d));
    }
    check_background(background, d)?;
    let masks = 1usize << d;
    let mut z = vec![0.0; d];
    let value: Vec<f64> = (0..masks)
        .map(|mask| {
            let total: f64 = background
                .iter_rows()
                .map(|b| {
                    for j in 0..d {
                        z[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
                    }
                    model(&z)
                })
                .sum();
            total / background.rows() as f64
        })
        .collect();
    let fact = factorials(d);
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        for mask in (0..masks).filter(|m| m >> j & 1 == 0) {
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[d - s - 1] / fact[d];
            *p += w * (value[mask | 1 << j] - value[mask]);
        }
    }
    Ok((phi, value[0]))
}

fn check_background(background: &Matrix, d: usize) -> Result<()> {
    if background.rows() == 0 {
        return Err(Error::Empty("SHAP background set"));
    }
    if background.cols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: background.cols() });
    }
    Ok(())
}

fn factorials(d: usize) -> Vec<f64> {
    let mut f = vec![1.0; d + 1];
    for i in 1..=d {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Free,
    FromX,
    FromB,
}

struct PathWalk<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    b: &'a [f64],
    fact: &'a [f64],
    side: Vec<Side>,
    from_x: Vec<usize>,
    from_b: Vec<usize>,
}

impl PathWalk<'_> {
    /// Adds the Shapley values of `tree(x_S, b_rest)` (as a game over `S`) into `phi`.
    ///
    /// A leaf reached with decisive sets `X` (features that must come from x)
    /// and `B` (features that must come from b) is the indicator game
    /// `1[X ⊆ S, B ∩ S = ∅]`, whose Shapley values are
    /// `(a-1)! c! / (a+c)!` for members of `X` and `-a! (c-1)! / (a+c)!` for
    /// members of `B`, with `a = |X|`, `c = |B|`.
    fn walk(&mut self, node: usize, phi: &mut [f64]) {
        match self.tree.nodes[node] {
            Node::Leaf { value, .. } => {
                let (a, c) = (self.from_x.len(), self.from_b.len());
                if a + c == 0 {
                    return;
                }
                let total = self.fact[a + c];
                if a > 0 {
                    let w = value * self.fact[a - 1] * self.fact[c] / total;
                    for &j in &self.from_x {
                        phi[j] += w;
                    }
                }
                if c > 0 {
                    let w = value * self.fact[a] * self.fact[c - 1] / total;
                    for &j in &self.from_b {
                        phi[j] -= w;
                    }
                }
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let xs = if self.x[feature] <= threshold { left } else { right };
                let bs = if self.b[feature] <= threshold { left } else { right };
                match self.side[feature] {
                    Side::FromX => self.walk(xs, phi),
                    Side::FromB => self.walk(bs, phi),
                    Side::Free if xs == bs => self.walk(xs, phi),
                    Side::Free => {
                        self.side[feature] = Side::FromX;
                        self.from_x.push(feature);
                        self.walk(xs, phi);
                        self.from_x.pop();
                        self.side[feature] = Side::FromB;
                        self.from_b.push(feature);
                        self.walk(bs, phi);
                        self.from_b.pop();
                        self.side[feature] = Side::Free;
                    }
                }
            }
        }
    }
}

/// Adds the single-tree, single-background-row attributions into `phi`.
fn tree_shap_into(tree: &DecisionTree, x: &[f64], b: &[f64], fact: &[f64], phi: &mut [f64]) {
    let mut walk = PathWalk {
        tree,
        x,
        b,
        fact,
        side: vec![Side::Free; x.len()],
        from_x: Vec::new(),
        from_b: Vec::new(),
    };
    walk.walk(0, phi);
}

/// Interventional Shapley values of one tree at `x`, averaged over the background.
pub fn shap_tree(tree: &DecisionTree, x: &[f64], background: &Matrix) -> Result<(Vec<f64>, f64)> {
    let d = tree.n_features;
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    check_background(background, d)?;
    let fact = factorials(d);
    let mut phi = vec![0.0; d];
    for b in background.iter_rows() {
        tree_shap_into(tree, x, b, &fact, &mut phi);
    }
    let nb = background.rows() as f64;
    phi.iter_mut().for_each(|p| *p /= nb);
    let base = background.iter_rows().map(|b| tree.predict_row(b)).sum::<f64>() / nb;
    Ok((phi, base))
}

fn forest_row(forest: &ForestModel, x: &[f64], background: &Matrix, fact: &[f64]) -> Vec<f64> {
    let mut phi = vec![0.0; forest.n_features];
    for tree in &forest.trees {
        for b in background.iter_rows() {
            tree_shap_into(tree, x, b, fact, &mut phi);
        }
    }
    let scale = (forest.trees.len() * background.rows()) as f64;
    phi.iter_mut().for_each(|p| *p /= scale);
    phi
}

/// Exact interventional Shapley values of the forest for every row of `x`.
/// Each row accumulates over trees, then background rows, in a fixed order,
/// so results do not depend on the thread count.
pub fn shap_forest(forest: &ForestModel, x: &Matrix, background: &Matrix) -> Result<ShapMatrix> {
    let d = forest.n_features;
    if x.cols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.cols() });
    }
    check_background(background, d)?;
    if d > 170 {
        return Err(Error::TooManyFeatures(d));
    }
    let fact = factorials(d);
    let rows: Vec<usize> = (0..x.rows()).collect();
    let phi: Vec<Vec<f64>> = rows.par_iter().map(|&r| forest_row(forest, x.row(r), background, &fact)).collect();
    let base_value =
        background.iter_rows().map(|b| forest.predict_row(b)).sum::<f64>() / background.rows() as f64;
    Ok(ShapMatrix {
        base_value,
        phi: Matrix::new(x.rows(), d, phi.concat())?,
    })
}

/// Seeded uniform sample of `size` row positions out of `n`, ascending.
/// Returns every position when `size >= n`.
pub fn sample_background(n: usize, size: usize, seed: u64) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    let mut idx = sample_without_replacement(&mut rng_from_seed(seed), n, size);
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub index: usize,
    pub mean_abs_shap: f64,
    /// 1-based.
    pub rank: usize,
}

/// Features by descending mean |phi|; equal values keep feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<FeatureImportance>,
}

impl ImportanceRanking {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["feature", "mean_abs_shap", "rank"])?;
        for e in &self.entries {
            out.write_record([e.feature.clone(), e.mean_abs_shap.to_string(), e.rank.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Column means of |phi|. Each column is summed in sorted order, so the
/// result is independent of instance order.
pub fn mean_abs_shap(shap: &ShapMatrix, names: &[String]) -> Result<ImportanceRanking> {
    let (n, d) = (shap.n_instances(), shap.n_features());
    if n == 0 {
        return Err(Error::Empty("SHAP matrix"));
    }
    if names.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: names.len() });
    }
    let mut entries: Vec<FeatureImportance> = (0..d)
        .map(|j| {
            let mut col: Vec<f64> = shap.phi.column(j).iter().map(|v| v.abs()).collect();
            col.sort_by(f64::total_cmp);
            FeatureImportance {
                feature: names[j].clone(),
                index: j,
                mean_abs_shap: col.iter().sum::<f64>() / n as f64,
                rank: 0,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then(a.index.cmp(&b.index)));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(ImportanceRanking { entries })
}

/// Features whose mean |phi| strictly exceeds `threshold`, in ranking order.
pub fn top_features(ranking: &ImportanceRanking, threshold: f64) -> Result<Vec<String>> {
    if !(threshold >= 0.0) {
        return Err(invalid(format!("importance threshold {threshold} must be non-negative")));
    }
    Ok(ranking
        .entries
        .iter()
        .filter(|e| e.mean_abs_shap > threshold)
        .map(|e| e.feature.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterTable {
    pub feature: String,
    pub points: Vec<(f64, f64)>,
    /// `None` when either column is constant.
    pub spearman: Option<f64>,
    pub direction: Direction,
}

impl ScatterTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["feature_value", "shap_value"])?;
        for (x, p) in &self.points {
            out.write_record([x.to_string(), p.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

pub fn shap_scatter_export(feature: &str, x_values: &[f64], phi: &[f64]) -> Result<ScatterTable> {
    if x_values.len() != phi.len() {
        return Err(Error::DimensionMismatch { expected: x_values.len(), got: phi.len() });
    }
    if x_values.is_empty() {
        return Err(Error::Empty("scatter values"));
    }
    let rho = spearman(x_values, phi);
    let direction = match rho {
        Some(r) if r > 0.0 => Direction::Positive,
        Some(r) if r < 0.0 => Direction::Negative,
        _ => Direction::None,
    };
    Ok(ScatterTable {
        feature: feature.to_owned(),
        points: x_values.iter().copied().zip(phi.iter().copied()).collect(),
        spearman: rho,
        direction,
    })
}
