use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{sample_without_replacement, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

/// Flat tree node. Children are indices into [`DecisionTree::nodes`]; rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        cover: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: usize,
    },
}

impl Node {
    pub fn cover(&self) -> usize {
        match *self {
            Node::Leaf { cover, .. } | Node::Split { cover, .. } => cover,
        }
    }
}

/// Regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Single-leaf tree.
    pub fn constant(n_features: usize, value: f64, cover: usize) -> Self {
        Self {
            n_features,
            nodes: vec![Node::Leaf { value, cover }],
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Features used by at least one split, ascending.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Structural checks: child indices in range, covers add up, thresholds finite.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(invalid("tree has no nodes"));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return Err(invalid(format!("tree node {i} is out of range or shared")));
            }
            seen[i] = true;
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
                cover,
            } = self.nodes[i]
            {
                if feature >= self.n_features || !threshold.is_finite() {
                    return Err(invalid(format!("tree node {i} has an invalid split")));
                }
                let (l, r) = (self.nodes.get(left), self.nodes.get(right));
                match (l, r) {
                    (Some(l), Some(r)) if l.cover() + r.cover() == cover => {}
                    _ => return Err(invalid(format!("tree node {i} children do not cover it"))),
                }
                stack.push(right);
                stack.push(left);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid("tree has unreachable nodes"));
        }
        Ok(())
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    cost: f64,
    n_left: usize,
}

/// Grows a tree on every row of `x`. `rng` drives only the per-node feature draw.
pub fn fit_tree(x: &Matrix, y: &[f64], params: &TreeParams, rng: &mut Rng) -> Result<DecisionTree> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::Empty("tree training set"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if params.mtry == 0 || params.mtry > d {
        return Err(invalid(format!("mtry {} outside 1..={d}", params.mtry)));
    }
    if params.min_leaf == 0 {
        return Err(invalid("min_leaf must be positive"));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter_rows().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("tree training data contains non-finite values"));
    }

    // Work items: (node slot, depth, rows). Slots are pre-reserved so children
    // receive their indices before they are grown.
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0, cover: n }];
    let mut stack: Vec<(usize, usize, Vec<usize>)> = vec![(0, 0, (0..n).collect())];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    while let Some((slot, depth, rows)) = stack.pop() {
        let cover = rows.len();
        let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / cover as f64;
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(y[r]), hi.max(y[r])));
        let stop = lo == hi
            || cover < 2 * params.min_leaf
            || params.max_depth.is_some_and(|m| depth >= m);
        let best = if stop {
            None
        } else {
            let features = {
                let mut f = sample_without_replacement(rng, d, params.mtry);
                f.sort_unstable();
                f
            };
            best_split(x, y, &rows, mean, &features, params.min_leaf, &mut order)
        };
        match best {
            None => nodes[slot] = Node::Leaf { value: mean, cover },
            Some(c) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| x.get(r, c.feature) <= c.threshold);
                debug_assert_eq!(left_rows.len(), c.n_left);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0, cover: left_rows.len() });
                nodes.push(Node::Leaf { value: 0.0, cover: right_rows.len() });
                nodes[slot] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right: left + 1,
                    cover,
                };
                stack.push((left + 1, depth + 1, right_rows));
                stack.push((left, depth + 1, left_rows));
            }
        }
    }
    Ok(DecisionTree { n_features: d, nodes })
}

/// Minimises SSE(left) + SSE(right) over midpoints between consecutive distinct
/// values. Features are scanned ascending and thresholds ascending; only a
/// strictly smaller cost replaces the incumbent.
fn best_split(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    mean: f64,
    features: &[usize],
    min_leaf: usize,
    order: &mut Vec<usize>,
) -> Option<Candidate> {
    let n = rows.len();
    let (total, total_sq) = rows.iter().fold((0.0, 0.0), |(s, q), &r| {
        let v = y[r] - mean;
        (s + v, q + v * v)
    });
    let mut best: Option<Candidate> = None;
    for &f in features {
        order.clear();
        order.extend_from_slice(rows);
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        for p in 1..n {
            let v = y[order[p - 1]] - mean;
            sum_l += v;
            sq_l += v * v;
            let (a, b) = (x.get(order[p - 1], f), x.get(order[p], f));
            if p < min_leaf || n - p < min_leaf || a == b {
                continue;
            }
            let (nl, nr) = (p as f64, (n - p) as f64);
            let (sum_r, sq_r) = (total - sum_l, total_sq - sq_l);
            let cost = (sq_l - sum_l * sum_l / nl) + (sq_r - sum_r * sum_r / nr);
            if best.as_ref().is_none_or(|c| cost < c.cost) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    cost,
                    n_left: p,
                });
            }
        }
    }
    best
}
