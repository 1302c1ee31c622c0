/// Smallest probability passed to the logarithm in [`cross_entropy`].
pub const LOG_FLOOR: f64 = 1e-300;

/// Max-subtracted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in z.iter_mut() {
        *v *= inv;
    }
}

/// `-ln p[target]`, with `p[target]` floored at [`LOG_FLOOR`].
pub fn cross_entropy(p: &[f64], target: usize) -> f64 {
    -p[target].max(LOG_FLOOR).ln()
}

/// `ln Σ exp(x)` computed stably.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_for_equal_logits() {
        for p in softmax(&[0.0, 0.0, 0.0]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_two_way() {
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(p[1] < 1e-300 || p[1] == 0.0);
    }

    #[test]
    fn cross_entropy_values() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1), 0.0);
        let uniform = vec![1.0 / 1000.0; 1000];
        assert!((cross_entropy(&uniform, 17) - 6.907755278982137).abs() < 1e-12);
        assert!((cross_entropy(&[0.25, 0.75], 1) - 0.2876820724517809).abs() < 1e-12);
        assert!((cross_entropy(&[1.0, 0.0], 1) - 690.7755278982137).abs() < 1e-9);
    }

    #[test]
    fn log_sum_exp_matches_naive() {
        let x = [0.1, -2.0, 3.5];
        let naive: f64 = x.iter().map(|v: &f64| v.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&x) - naive).abs() < 1e-14);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sums_to_one_and_is_equivariant(z in prop::collection::vec(-50.0f64..50.0, 1..40), shift in 0usize..40) {
            let p = softmax(&z);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let k = shift % z.len();
            let mut rotated = z.clone();
            rotated.rotate_left(k);
            let mut q = softmax(&rotated);
            q.rotate_right(k);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}
