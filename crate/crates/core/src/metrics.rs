//! Evaluation metrics: AUC (rank-based, average ranks on ties), average
//! precision (detection convention, no interpolation), accuracy, and mAP.

use crate::error::{Error, Result};

/// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(equal), computed via rank
/// sums with average ranks for ties.
pub fn auc(set: &[(f64, u8)]) -> Result<f64> {
    let n_pos = set.iter().filter(|(_, l)| *l == 1).count();
    let n_neg = set.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set[a].0.partial_cmp(&set[b].0).unwrap());

    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && set[order[j]].0 == set[order[i]].0 {
            j += 1;
        }
        // Ranks are 1-based; a tie group spanning ranks i+1..=j gets the
        // average rank.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if set[idx].1 == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }

    let np = n_pos as f64;
    let nn = n_neg as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Average precision: sort descending by score (stable, ties keep input
/// order); AP = sum over positive ranks k of precision@k, over the positive
/// count.
pub fn average_precision(set: &[(f64, u8)]) -> Result<f64> {
    let n_pos = set.iter().filter(|(_, l)| *l == 1).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set[b].0.partial_cmp(&set[a].0).unwrap().then(a.cmp(&b)));

    let mut hits = 0usize;
    let mut total = 0.0f64;
    for (rank0, &idx) in order.iter().enumerate() {
        if set[idx].1 == 1 {
            hits += 1;
            total += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(total / n_pos as f64)
}

/// Fraction of points with `(score >= threshold) == label`.
pub fn accuracy(set: &[(f64, u8)], threshold: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let correct = set
        .iter()
        .filter(|(s, l)| u8::from(*s >= threshold) == *l)
        .count();
    Ok(correct as f64 / set.len() as f64)
}

/// Unweighted mean of per-subset average precisions.
pub fn mean_ap(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force all-pairs oracle for the Mann-Whitney statistic.
    pub(crate) fn auc_brute_force(set: &[(f64, u8)]) -> f64 {
        let pos: Vec<f64> = set.iter().filter(|(_, l)| *l == 1).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = set.iter().filter(|(_, l)| *l == 0).map(|(s, _)| *s).collect();
        let mut total = 0.0;
        for &p in &pos {
            for &n in &neg {
                total += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_hand_cases() {
        let perfect = [(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)];
        assert_eq!(auc(&perfect).unwrap(), 1.0);

        let ties = [(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)];
        assert_eq!(auc(&ties).unwrap(), 0.5);

        let mixed = [(0.9, 1), (0.4, 0), (0.35, 1), (0.1, 0)];
        assert_eq!(auc(&mixed).unwrap(), 0.75);

        assert!(matches!(
            auc(&[(0.5, 1), (0.2, 1)]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn ap_hand_cases() {
        let perfect = [(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)];
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);

        // Descending ranks labeled (1,0,1,0): (1/1 + 2/3) / 2.
        let alternating = [(0.9, 1), (0.7, 0), (0.5, 1), (0.3, 0)];
        let ap = average_precision(&alternating).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((ap - 0.8333).abs() < 1e-4);

        // All negatives outrank the one positive: precision 1/4 at rank 4.
        let inverted = [(0.9, 0), (0.8, 0), (0.7, 0), (0.1, 1)];
        assert_eq!(average_precision(&inverted).unwrap(), 0.25);

        assert!(matches!(
            average_precision(&[(0.5, 0)]),
            Err(Error::NoPositives)
        ));
    }

    #[test]
    fn accuracy_hand_cases() {
        let perfect = [(0.9, 1), (0.1, 0)];
        assert_eq!(accuracy(&perfect, 0.5).unwrap(), 1.0);
        let inverted = [(0.1, 1), (0.9, 0)];
        assert_eq!(accuracy(&inverted, 0.5).unwrap(), 0.0);
        let mixed = [(0.6, 1), (0.4, 1), (0.3, 0)];
        assert!((accuracy(&mixed, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(accuracy(&[], 0.5), Err(Error::EmptySet)));
    }

    #[test]
    fn mean_ap_cases() {
        assert_eq!(mean_ap(&[0.8]).unwrap(), 0.8);
        assert_eq!(mean_ap(&[1.0, 0.5]).unwrap(), 0.75);
        assert!(mean_ap(&[]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let set: [(f64, u8); 5] = [(0.9, 1), (0.4, 0), (0.35, 1), (0.1, 0), (0.4, 1)];
        let mapped: Vec<(f64, u8)> = set.iter().map(|(s, l)| (s.powi(3) + 2.0, *l)).collect();
        assert_eq!(auc(&set).unwrap(), auc(&mapped).unwrap());
    }

    proptest! {
        #[test]
        fn auc_matches_brute_force(
            scores in proptest::collection::vec(0..100u32, 2..200),
            labels in proptest::collection::vec(0..2u8, 2..200),
        ) {
            let n = scores.len().min(labels.len());
            // Quantized scores so ties actually happen.
            let set: Vec<(f64, u8)> = (0..n)
                .map(|i| (scores[i] as f64 / 10.0, labels[i]))
                .collect();
            let n_pos = set.iter().filter(|(_, l)| *l == 1).count();
            prop_assume!(n_pos > 0 && n_pos < n);
            let fast = auc(&set).unwrap();
            let brute = auc_brute_force(&set);
            prop_assert!((fast - brute).abs() < 1e-12);
        }

        #[test]
        fn ap_is_one_iff_perfectly_ranked(
            pos in proptest::collection::vec(51..100u32, 1..40),
            neg in proptest::collection::vec(0..50u32, 1..40),
        ) {
            let mut set: Vec<(f64, u8)> = Vec::new();
            set.extend(pos.iter().map(|&s| (s as f64, 1u8)));
            set.extend(neg.iter().map(|&s| (s as f64, 0u8)));
            prop_assert_eq!(average_precision(&set).unwrap(), 1.0);
        }
    }
}
