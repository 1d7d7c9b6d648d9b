//! Spatial weights, Getis-Ord Gi* hot/cold spots and Jenks natural breaks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geo::SpatialIndex;
use crate::normal;

/// Neighbour count for the default k-nearest weights.
pub const DEFAULT_WEIGHTS_K: usize = 8;
/// Class count for the default natural-breaks classification.
pub const DEFAULT_JENKS_K: usize = 5;

/// Row-wise sparse weights. Row `i` lists `(j, w_ij)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialWeights {
    rows: Vec<Vec<(usize, f64)>>,
    self_inclusive: bool,
}

impl SpatialWeights {
    /// Validates indices and weights; a self-inclusive matrix must carry a
    /// positive diagonal entry in every row.
    pub fn new(rows: Vec<Vec<(usize, f64)>>, self_inclusive: bool) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            for &(j, w) in row {
                if j >= n || !w.is_finite() || w < 0.0 {
                    return Err(invalid(format!("bad weight ({i}, {j}) = {w}")));
                }
            }
            if self_inclusive && !row.iter().any(|&(j, w)| j == i && w > 0.0) {
                return Err(invalid(format!("row {i} lacks a positive self weight")));
            }
        }
        Ok(Self { rows, self_inclusive })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn self_inclusive(&self) -> bool {
        self.self_inclusive
    }
}

/// Binary k-nearest-neighbour weights: `w_ij = 1` for the `k` nearest
/// other units (ties by id), plus `w_ii = 1` when self-inclusive. Rows need
/// not be symmetric.
pub fn weights_knn(points: &SpatialIndex, k: usize, self_inclusive: bool) -> Result<SpatialWeights> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(invalid(format!("k-nearest weights need 1 <= k < n (k = {k}, n = {n})")));
    }
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(k + 1);
            if self_inclusive {
                row.push((i, 1.0));
            }
            row.extend(
                points
                    .k_nearest(points.point(i), k + 1)
                    .into_iter()
                    .filter(|nb| nb.index != i)
                    .take(k)
                    .map(|nb| (nb.index, 1.0)),
            );
            row
        })
        .collect();
    SpatialWeights::new(rows, self_inclusive)
}

/// Binary distance-band weights: `w_ij = 1` iff the great-circle distance
/// is at most `d_miles`. Isolated units keep only their self weight.
pub fn weights_distance_band(points: &SpatialIndex, d_miles: f64, self_inclusive: bool) -> Result<SpatialWeights> {
    if !(d_miles > 0.0) || !d_miles.is_finite() {
        return Err(invalid("distance band must be positive"));
    }
    let rows = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            if self_inclusive {
                row.push((i, 1.0));
            }
            row.extend(
                points
                    .within_radius(points.point(i), d_miles)
                    .into_iter()
                    .filter(|nb| nb.index != i)
                    .map(|nb| (nb.index, 1.0)),
            );
            row
        })
        .collect();
    SpatialWeights::new(rows, self_inclusive)
}

/// Per-unit Gi* z-scores and two-sided normal p-values. `None` marks a
/// unit whose neighbourhood spans the whole set, where the statistic is
/// undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiResult {
    pub z: Vec<Option<f64>>,
    pub p: Vec<Option<f64>>,
}

impl GiResult {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn is_undefined(&self, i: usize) -> bool {
        self.z[i].is_none()
    }
}

/// Getis-Ord Gi* with self-inclusive weights:
///
/// ```text
/// z_i = (sum_j w_ij x_j - mean * W_i) / (S * sqrt((n * sum_j w_ij^2 - W_i^2) / (n - 1)))
/// ```
///
/// where `W_i = sum_j w_ij` and `S` is the population standard deviation
/// of `x`. Sums are taken over centred values, which is algebraically the
/// same statistic and keeps large offsets from cancelling.
pub fn gi_star(values: &[f64], weights: &SpatialWeights) -> Result<GiResult> {
    let n = values.len();
    if n < 3 {
        return Err(invalid("Gi* needs at least 3 units"));
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    if !weights.self_inclusive() {
        return Err(invalid("Gi* needs self-inclusive weights"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("Gi* values must be finite"));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let s = (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf).sqrt();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s <= 1e-12 * scale || s == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let z: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut wsum, mut w2, mut num) = (0.0, 0.0, 0.0);
            for &(j, w) in weights.row(i) {
                wsum += w;
                w2 += w * w;
                num += w * (values[j] - mean);
            }
            let bracket = (nf * w2 - wsum * wsum) / (nf - 1.0);
            if bracket <= 1e-12 * nf * w2 {
                return None;
            }
            Some(num / (s * bracket.sqrt()))
        })
        .collect();
    let p = z.iter().map(|z| z.map(normal::two_sided_p)).collect();
    Ok(GiResult { z, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HotspotClass {
    Hot99,
    Hot95,
    Hot90,
    NotSignificant,
    Cold90,
    Cold95,
    Cold99,
}

impl HotspotClass {
    pub fn label(self) -> &'static str {
        match self {
            Self::Hot99 => "hot_99",
            Self::Hot95 => "hot_95",
            Self::Hot90 => "hot_90",
            Self::NotSignificant => "not_significant",
            Self::Cold90 => "cold_90",
            Self::Cold95 => "cold_95",
            Self::Cold99 => "cold_99",
        }
    }

    /// Signed confidence level: +3 for Hot99 down to -3 for Cold99.
    pub fn level(self) -> i8 {
        match self {
            Self::Hot99 => 3,
            Self::Hot95 => 2,
            Self::Hot90 => 1,
            Self::NotSignificant => 0,
            Self::Cold90 => -1,
            Self::Cold95 => -2,
            Self::Cold99 => -3,
        }
    }

    fn from_level(level: i8) -> Self {
        match level {
            3 => Self::Hot99,
            2 => Self::Hot95,
            1 => Self::Hot90,
            -1 => Self::Cold90,
            -2 => Self::Cold95,
            -3 => Self::Cold99,
            _ => Self::NotSignificant,
        }
    }
}

/// Two-sided critical values for 99 / 95 / 90 percent confidence.
pub const Z_99: f64 = 2.576;
pub const Z_95: f64 = 1.960;
pub const Z_90: f64 = 1.645;

pub fn classify_z(z: f64) -> HotspotClass {
    let a = z.abs();
    let level = if a >= Z_99 {
        3
    } else if a >= Z_95 {
        2
    } else if a >= Z_90 {
        1
    } else {
        0
    };
    HotspotClass::from_level(if z < 0.0 { -level } else { level })
}

/// Classes from raw z-scores; undefined units are not significant.
pub fn classify_hotspots(result: &GiResult) -> Vec<HotspotClass> {
    result.z.iter().map(|z| z.map_or(HotspotClass::NotSignificant, classify_z)).collect()
}

/// Benjamini-Hochberg adjusted p-values over the defined entries.
pub fn benjamini_hochberg(p: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut defined: Vec<(usize, f64)> = p.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
    let m = defined.len() as f64;
    defined.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut q = vec![None; p.len()];
    let mut running = 1.0f64;
    for (rank, &(i, pv)) in defined.iter().enumerate().rev() {
        running = running.min(pv * m / (rank + 1) as f64);
        q[i] = Some(running.min(1.0));
    }
    q
}

/// Classes from BH-adjusted p-values: q <= 0.01 / 0.05 / 0.10 give the 99 /
/// 95 / 90 percent classes, signed by z.
pub fn classify_hotspots_fdr(result: &GiResult) -> Vec<HotspotClass> {
    let q = benjamini_hochberg(&result.p);
    result
        .z
        .iter()
        .zip(q)
        .map(|(z, q)| match (z, q) {
            (Some(z), Some(q)) => {
                let level = if q <= 0.01 {
                    3
                } else if q <= 0.05 {
                    2
                } else if q <= 0.10 {
                    1
                } else {
                    0
                };
                HotspotClass::from_level(if *z < 0.0 { -level } else { level })
            }
            _ => HotspotClass::NotSignificant,
        })
        .collect()
}

/// Optimal natural-breaks classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JenksBreaks {
    /// Upper bound (maximum value) of each class, strictly ascending.
    pub breaks: Vec<f64>,
    /// Number of values in each class.
    pub counts: Vec<usize>,
    /// Total within-class sum of squared deviations.
    pub ssd: f64,
}

impl JenksBreaks {
    pub fn k(&self) -> usize {
        self.breaks.len()
    }
}

/// Within-class sum of squared deviations of consecutive runs of `sorted`,
/// where class `c` ends (exclusive) at `ends[c]`.
pub fn partition_ssd(sorted: &[f64], ends: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut start = 0;
    for &end in ends {
        let class = &sorted[start..end];
        let mean = class.iter().sum::<f64>() / class.len() as f64;
        total += class.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        start = end;
    }
    total
}

/// Exact minimum-SSD partition of the sorted values into `k` contiguous
/// classes, by dynamic programming over the distinct values (duplicates are
/// never split across classes). O(k * u^2) for u distinct values.
pub fn jenks_breaks(values: &[f64], k: usize) -> Result<JenksBreaks> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("natural breaks need finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in &sorted {
        match distinct.last_mut() {
            Some((last, c)) if *last == v => *c += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let u = distinct.len();
    if k == 0 || k > u {
        return Err(invalid(format!("natural breaks need 1 <= k <= distinct values (k = {k}, distinct = {u})")));
    }

    // Prefix sums over groups, centred on the overall mean.
    let centre = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let mut w = vec![0.0; u + 1];
    let mut s1 = vec![0.0; u + 1];
    let mut s2 = vec![0.0; u + 1];
    for (g, &(v, c)) in distinct.iter().enumerate() {
        let (c, x) = (c as f64, v - centre);
        w[g + 1] = w[g] + c;
        s1[g + 1] = s1[g] + c * x;
        s2[g + 1] = s2[g] + c * x * x;
    }
    // SSD of groups a..=b.
    let cost = |a: usize, b: usize| -> f64 {
        if a == b {
            return 0.0;
        }
        let ww = w[b + 1] - w[a];
        let t1 = s1[b + 1] - s1[a];
        let t2 = s2[b + 1] - s2[a];
        (t2 - t1 * t1 / ww).max(0.0)
    };

    // best[m][j]: min cost of groups 0..=j in m + 1 classes.
    let mut best = vec![vec![f64::INFINITY; u]; k];
    for j in 0..u {
        best[0][j] = cost(0, j);
    }
    for m in 1..k {
        for j in m..u {
            best[m][j] = (m..=j).map(|i| best[m - 1][i - 1] + cost(i, j)).fold(f64::INFINITY, f64::min);
        }
    }

    // The prefix-sum costs carry rounding error, so exactly tied partitions
    // can come out in either order. A second DP re-scores only the
    // near-optimal candidates with the two-pass class SSD that the result
    // reports. Floating-point addition is monotone, so this DP yields the
    // exact minimum of the reported quantity over all partitions.
    let tol = 1e-9 * s2[u];
    let class_ssd = |a: usize, b: usize| -> f64 { partition_ssd(&sorted[w[a] as usize..w[b + 1] as usize], &[(w[b + 1] - w[a]) as usize]) };
    let mut exact: Vec<Vec<Option<(f64, usize)>>> = vec![vec![None; u]; k];
    fn solve(
        m: usize,
        j: usize,
        best: &[Vec<f64>],
        cost: &dyn Fn(usize, usize) -> f64,
        class_ssd: &dyn Fn(usize, usize) -> f64,
        tol: f64,
        exact: &mut [Vec<Option<(f64, usize)>>],
    ) -> f64 {
        if let Some((v, _)) = exact[m][j] {
            return v;
        }
        let (v, arg) = if m == 0 {
            (class_ssd(0, j), 0)
        } else {
            let mut pick = (f64::INFINITY, m);
            for i in m..=j {
                if best[m - 1][i - 1] + cost(i, j) > best[m][j] + tol {
                    continue;
                }
                let c = solve(m - 1, i - 1, best, cost, class_ssd, tol, exact) + class_ssd(i, j);
                if c < pick.0 {
                    pick = (c, i);
                }
            }
            pick
        };
        exact[m][j] = Some((v, arg));
        v
    }
    solve(k - 1, u - 1, &best, &cost, &class_ssd, tol, &mut exact);

    let mut group_ends = vec![0usize; k];
    let mut j = u - 1;
    for m in (0..k).rev() {
        group_ends[m] = j;
        if m > 0 {
            j = exact[m][j].expect("solved state").1 - 1;
        }
    }
    let breaks: Vec<f64> = group_ends.iter().map(|&g| distinct[g].0).collect();
    let ends: Vec<usize> = group_ends.iter().map(|&g| w[g + 1] as usize).collect();
    let counts = ends.iter().scan(0, |prev, &e| {
        let c = e - *prev;
        *prev = e;
        Some(c)
    });
    Ok(JenksBreaks {
        breaks,
        counts: counts.collect(),
        ssd: partition_ssd(&sorted, &ends),
    })
}

/// Class index of each value: the first break at or above it. Values above
/// the last break are clamped into the last class; the second return value
/// counts them.
pub fn assign_classes(values: &[f64], breaks: &[f64]) -> Result<(Vec<usize>, usize)> {
    if breaks.is_empty() || breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("breaks must be non-empty and strictly ascending"));
    }
    let mut clamped = 0;
    let classes = values
        .iter()
        .map(|&v| {
            let c = breaks.partition_point(|&b| b < v);
            if c == breaks.len() {
                clamped += 1;
                breaks.len() - 1
            } else {
                c
            }
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} value(s) above the last break were placed in the top class");
    }
    Ok((classes, clamped))
}
