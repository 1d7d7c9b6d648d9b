use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{rng_from_seed, shuffle};

/// Disjoint train/test index sets covering `0..n`, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Shuffles `0..n` under `seed` and sends the first `round(frac * n)` to training.
pub fn train_test_split(n: usize, frac: f64, seed: u64) -> Result<SplitSpec> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(invalid(format!("split fraction {frac} outside (0, 1)")));
    }
    if n < 4 {
        return Err(invalid("train/test split needs at least 4 rows"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    shuffle(&mut rng_from_seed(seed), &mut perm);
    let n_train = (frac * n as f64).round() as usize;
    let (mut train, mut test) = (perm[..n_train].to_vec(), perm[n_train..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitSpec { train, test, seed })
}

/// Fold label for each position of the index list passed to [`kfold`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
}

impl FoldAssignment {
    /// Indices held out in fold `f`, in input order.
    pub fn validation(&self, f: usize) -> Vec<usize> {
        self.indices.iter().zip(&self.labels).filter(|(_, &l)| l == f).map(|(&i, _)| i).collect()
    }

    /// Indices used for training when fold `f` is held out, in input order.
    pub fn training(&self, f: usize) -> Vec<usize> {
        self.indices.iter().zip(&self.labels).filter(|(_, &l)| l != f).map(|(&i, _)| i).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

/// Shuffles positions under `seed` and deals them round-robin into `k` folds.
pub fn kfold(indices: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(invalid("k-fold needs k >= 2"));
    }
    if indices.len() < k {
        return Err(invalid(format!("{} rows cannot fill {k} folds", indices.len())));
    }
    let mut order: Vec<usize> = (0..indices.len()).collect();
    shuffle(&mut rng_from_seed(seed), &mut order);
    let mut labels = vec![0; indices.len()];
    for (rank, &pos) in order.iter().enumerate() {
        labels[pos] = rank % k;
    }
    Ok(FoldAssignment {
        k,
        seed,
        indices: indices.to_vec(),
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eight_rows_split_six_two() {
        let s = train_test_split(8, 0.75, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (6, 2));
        assert_eq!(s, train_test_split(8, 0.75, 1).unwrap());
    }

    #[test]
    fn split_errors() {
        assert!(train_test_split(10, 1.0, 0).is_err());
        assert!(train_test_split(10, 0.0, 0).is_err());
        assert!(train_test_split(3, 0.5, 0).is_err());
    }

    #[test]
    fn fold_sizes() {
        let idx: Vec<usize> = (0..10).collect();
        assert_eq!(kfold(&idx, 5, 3).unwrap().sizes(), vec![2; 5]);
        let idx: Vec<usize> = (0..11).collect();
        let mut s = kfold(&idx, 5, 3).unwrap().sizes();
        s.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(s, vec![3, 2, 2, 2, 2]);
        assert!(kfold(&idx, 1, 0).is_err());
        assert!(kfold(&idx[..3], 5, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_partition(n in 4usize..300, frac in 0.05f64..0.95, seed: u64) {
            let s = train_test_split(n, frac, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.train.len(), (frac * n as f64).round() as usize);
        }

        #[test]
        fn folds_partition_indices(n in 5usize..200, k in 2usize..6, seed: u64) {
            let idx: Vec<usize> = (0..n).map(|i| i * 3 + 1).collect();
            let f = kfold(&idx, k, seed).unwrap();
            let mut all: Vec<usize> = (0..k).flat_map(|g| f.validation(g)).collect();
            all.sort_unstable();
            prop_assert_eq!(&all, &idx);
            let sizes = f.sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for g in 0..k {
                prop_assert_eq!(f.training(g).len() + f.validation(g).len(), n);
            }
        }
    }
}
