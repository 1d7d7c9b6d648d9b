//! Standard normal tail probabilities.
//!
//! Uses the Abramowitz & Stegun 26.2.17 rational approximation, absolute
//! error below 7.5e-8 over the whole real line.

const P: f64 = 0.231_641_9;
const B: [f64; 5] = [
    0.319_381_530,
    -0.356_563_782,
    1.781_477_937,
    -1.821_255_978,
    1.330_274_429,
];
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Upper tail `1 - Phi(x)` for `x >= 0`.
fn upper_tail_nonneg(x: f64) -> f64 {
    let t = 1.0 / (1.0 + P * x);
    let poly = t * (B[0] + t * (B[1] + t * (B[2] + t * (B[3] + t * B[4]))));
    INV_SQRT_2PI * (-0.5 * x * x).exp() * poly
}

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 - upper_tail_nonneg(x)
    } else {
        upper_tail_nonneg(-x)
    }
}

/// Two-sided p-value `2 * (1 - Phi(|z|))`, clamped into `(0, 1]`.
pub fn two_sided_p(z: f64) -> f64 {
    let p = 2.0 * upper_tail_nonneg(z.abs());
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn matches_reference_cdf() {
        let n = Normal::new(0.0, 1.0).unwrap();
        let mut x = -8.0;
        while x <= 8.0 {
            assert!((cdf(x) - n.cdf(x)).abs() < 1e-7, "x={x}");
            x += 0.01;
        }
    }

    #[test]
    fn familiar_critical_values() {
        assert!((two_sided_p(1.959_964) - 0.05).abs() < 1e-6);
        assert!((two_sided_p(2.575_829) - 0.01).abs() < 1e-6);
        assert!((two_sided_p(0.0) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn p_value_stays_positive_far_out() {
        assert!(two_sided_p(60.0) > 0.0);
        assert!(two_sided_p(-60.0) <= 1.0);
    }
}
