mod oracles;

use oracles::jenks_exhaustive;
use proptest::prelude::*;
use tractlens_core::rng::{below, rng_from_seed, unit_f64};
use tractlens_core::spatial_stats::{assign_classes, jenks_breaks};

#[test]
fn dp_equals_exhaustive_on_random_instances() {
    for seed in 0..200u64 {
        let mut rng = rng_from_seed(seed);
        let n = 2 + below(&mut rng, 24);
        // Alternate continuous data with coarse integer data that repeats values.
        let values: Vec<f64> = if seed % 2 == 0 {
            (0..n).map(|_| unit_f64(&mut rng) * 100.0).collect()
        } else {
            (0..n).map(|_| below(&mut rng, 12) as f64).collect()
        };
        let mut distinct = values.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        for k in 1..=4.min(distinct.len()) {
            let dp = jenks_breaks(&values, k).unwrap();
            assert_eq!(dp.ssd, jenks_exhaustive(&values, k), "seed {seed} k {k}");
        }
    }
}

proptest! {
    #[test]
    fn classes_are_contiguous_and_counted(values in prop::collection::vec(-50.0f64..50.0, 2..60), k in 1usize..6) {
        let mut distinct = values.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assume!(k <= distinct.len());
        let jb = jenks_breaks(&values, k).unwrap();
        prop_assert_eq!(jb.breaks.len(), k);
        prop_assert!(jb.breaks.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*jb.breaks.last().unwrap(), *distinct.last().unwrap());
        let (classes, clamped) = assign_classes(&values, &jb.breaks).unwrap();
        prop_assert_eq!(clamped, 0);
        let mut counts = vec![0; k];
        for c in classes {
            counts[c] += 1;
        }
        prop_assert_eq!(counts, jb.counts.clone());
        prop_assert!(jb.ssd >= 0.0);
    }

    #[test]
    fn more_classes_never_increase_ssd(values in prop::collection::vec(0.0f64..1.0, 4..40)) {
        let a = jenks_breaks(&values, 2).unwrap().ssd;
        let b = jenks_breaks(&values, 3).unwrap().ssd;
        prop_assert!(b <= a + 1e-12);
    }
}
