// SPDX-License-Identifier: Apache-2.0

use super::EvalError;

/// `Σ TP_q@k / (N_Q · k)`.
pub fn precision_at_k(tp_per_query: &[usize], k: usize, n_queries: usize) -> Result<f64, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidK);
    }
    if n_queries == 0 {
        return Err(EvalError::NoQueries);
    }
    if let Some(&tp) = tp_per_query.iter().find(|&&tp| tp > k) {
        return Err(EvalError::TpExceeds { tp, bound: k });
    }
    let tp: usize = tp_per_query.iter().sum();
    Ok(tp as f64 / (n_queries * k) as f64)
}

/// `Σ TP_q@k / Σ P_q`. Every query must have at least one relevant item.
pub fn recall_at_k(tp_per_query: &[usize], relevant_per_query: &[usize]) -> Result<f64, EvalError> {
    if tp_per_query.len() != relevant_per_query.len() {
        return Err(EvalError::LengthMismatch);
    }
    if tp_per_query.is_empty() {
        return Err(EvalError::NoQueries);
    }
    for (&tp, &p) in tp_per_query.iter().zip(relevant_per_query) {
        if p == 0 {
            return Err(EvalError::ZeroRelevant);
        }
        if tp > p {
            return Err(EvalError::TpExceeds { tp, bound: p });
        }
    }
    let tp: usize = tp_per_query.iter().sum();
    let p: usize = relevant_per_query.iter().sum();
    Ok(tp as f64 / p as f64)
}

/// Trapezoidal area under precision over recall. Points are sorted by
/// recall; `(0, p₀)` is prepended when the curve does not start at zero.
pub fn pr_auc(points: &[(f64, f64)]) -> Result<f64, EvalError> {
    if points.len() < 2 {
        return Err(EvalError::TooFewPoints(points.len()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts[0].0 > 0.0 {
        pts.insert(0, (0.0, pts[0].1));
    }
    Ok(pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum())
}

/// Powers of two below `n`, then `n` itself.
pub fn k_sweep(n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2))
        .take_while(|&k| k < n)
        .collect();
    if n >= 1 {
        ks.push(n);
    }
    ks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_examples() {
        assert_eq!(precision_at_k(&[1], 2, 1).unwrap(), 0.5);
        assert_eq!(precision_at_k(&[4, 4], 4, 2).unwrap(), 1.0);
        assert_eq!(precision_at_k(&[1, 0, 2], 2, 3).unwrap(), 0.5);
        assert!(matches!(precision_at_k(&[1], 0, 1), Err(EvalError::InvalidK)));
        assert!(precision_at_k(&[3], 2, 1).is_err());
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall_at_k(&[1], &[4]).unwrap(), 0.25);
        assert_eq!(recall_at_k(&[3, 2], &[3, 2]).unwrap(), 1.0);
        assert_eq!(recall_at_k(&[1, 2], &[2, 4]).unwrap(), 0.5);
        assert!(matches!(recall_at_k(&[0], &[0]), Err(EvalError::ZeroRelevant)));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(pr_auc(&[(0.0, 0.5), (1.0, 0.5)]).unwrap(), 0.5);
        assert_eq!(pr_auc(&[(0.0, 1.0), (1.0, 0.0)]).unwrap(), 0.5);
        assert_eq!(pr_auc(&[(0.0, 1.0), (0.5, 0.5), (1.0, 0.5)]).unwrap(), 0.625);
        // unsorted input, curve not starting at zero recall
        assert_eq!(pr_auc(&[(1.0, 0.5), (0.5, 0.5)]).unwrap(), 0.5);
        assert!(matches!(pr_auc(&[(0.1, 0.1)]), Err(EvalError::TooFewPoints(1))));
    }

    #[test]
    fn sweep_values() {
        assert_eq!(k_sweep(1), [1]);
        assert_eq!(k_sweep(8), [1, 2, 4, 8]);
        assert_eq!(k_sweep(5000).len(), 14);
        assert_eq!(*k_sweep(5000).last().unwrap(), 5000);
        assert_eq!(k_sweep(5000)[12], 4096);
        assert!(k_sweep(0).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn rates_stay_in_unit_interval(
            cases in proptest::collection::vec((0usize..20, 1usize..20), 1..30),
            k in 1usize..20,
        ) {
            let relevant: Vec<usize> = cases.iter().map(|c| c.1).collect();
            let tp: Vec<usize> = cases.iter().map(|c| c.0.min(c.1).min(k)).collect();
            let p = precision_at_k(&tp, k, tp.len()).unwrap();
            let r = recall_at_k(&tp, &relevant).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&p));
            proptest::prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn auc_bounded_by_unit_square(points in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 2..20)) {
            let auc = pr_auc(&points).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&auc));
        }

        #[test]
        fn sweep_is_increasing_and_ends_at_n(n in 1usize..100_000) {
            let ks = k_sweep(n);
            proptest::prop_assert!(ks.windows(2).all(|w| w[0] < w[1]));
            proptest::prop_assert_eq!(*ks.last().unwrap(), n);
            proptest::prop_assert!(ks.iter().all(|k| *k == n || k.is_power_of_two()));
        }
    }
}
