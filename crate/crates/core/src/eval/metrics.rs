//! Per-user ranking metrics over binary relevance.

use crate::error::{Error, Result};

/// Mann-Whitney AUC: the chance a random positive outscores a random
/// negative, ties counting half. `None` when either class is empty.
pub fn auc(scored: &[(f64, bool)]) -> Option<f64> {
    let n_pos = scored.iter().filter(|s| s.1).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // wins = Σ over tie groups of pos·(negatives below) + ½·pos·neg inside
    let mut wins = 0.0;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0usize, 0usize);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        wins += pos as f64 * neg_below as f64 + 0.5 * (pos * neg) as f64;
        neg_below += neg;
        i = j;
    }
    Some(wins / (n_pos as f64 * n_neg as f64))
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("cutoff k must be at least 1".into()));
    }
    Ok(())
}

fn dcg(relevance: impl Iterator<Item = bool>) -> f64 {
    relevance
        .enumerate()
        .filter(|(_, r)| *r)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG@k of a ranked relevance list. The ideal ordering places every
/// relevant item of the full list first. `Ok(None)` when nothing is relevant.
pub fn ndcg_at_k(ranked: &[bool], k: usize) -> Result<Option<f64>> {
    check_k(k)?;
    let total = ranked.iter().filter(|&&r| r).count();
    if total == 0 {
        return Ok(None);
    }
    let ideal = dcg((0..total.min(k)).map(|_| true));
    Ok(Some(dcg(ranked.iter().take(k).copied()) / ideal))
}

/// F1@k with precision hits/k and recall hits/total_relevant.
pub fn f1_at_k(ranked: &[bool], k: usize, total_relevant: usize) -> Result<f64> {
    check_k(k)?;
    if total_relevant == 0 {
        return Err(Error::Config("F1 needs at least one relevant item".into()));
    }
    let hits = ranked.iter().take(k).filter(|&&r| r).count();
    if hits == 0 {
        return Ok(0.0);
    }
    let p = hits as f64 / k as f64;
    let r = hits as f64 / total_relevant as f64;
    Ok(2.0 * p * r / (p + r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn auc_pairs(scored: &[(f64, bool)]) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for a in scored.iter().filter(|s| s.1) {
            for b in scored.iter().filter(|s| !s.1) {
                den += 1.0;
                num += if a.0 > b.0 {
                    1.0
                } else if a.0 == b.0 {
                    0.5
                } else {
                    0.0
                };
            }
        }
        (den > 0.0).then(|| num / den)
    }

    fn ndcg_direct(ranked: &[bool], k: usize) -> Option<f64> {
        let mut dcg = 0.0;
        for (i, &r) in ranked.iter().enumerate().take(k) {
            if r {
                dcg += 1.0 / (i as f64 + 2.0).log2();
            }
        }
        let mut ideal: Vec<bool> = ranked.to_vec();
        ideal.sort_by(|a, b| b.cmp(a));
        let mut idcg = 0.0;
        for (i, &r) in ideal.iter().enumerate().take(k) {
            if r {
                idcg += 1.0 / (i as f64 + 2.0).log2();
            }
        }
        (idcg > 0.0).then(|| dcg / idcg)
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[(0.9, true), (0.1, false), (0.8, true)]), Some(1.0));
        assert_eq!(auc(&[(0.3, true), (0.3, false), (0.3, false)]), Some(0.5));
        // one of the two pairs is ordered correctly
        assert_eq!(auc(&[(0.9, true), (0.4, true), (0.6, false)]), Some(0.5));
        let v = auc(&[(0.9, true), (0.5, true), (0.6, false), (0.1, false)]).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        assert_eq!(auc(&[(0.1, true), (0.2, true)]), None);
        assert_eq!(auc(&[]), None);
    }

    #[test]
    fn ndcg_examples() {
        let mut list = vec![false; 20];
        list[0] = true;
        assert_eq!(ndcg_at_k(&list, 10).unwrap(), Some(1.0));
        list.swap(0, 1);
        let v = ndcg_at_k(&list, 10).unwrap().unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[false; 4], 10).unwrap(), None);
        assert!(ndcg_at_k(&list, 0).is_err());
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_at_k(&[true, true, false], 2, 2).unwrap(), 1.0);
        let mut list = vec![false; 30];
        list[3] = true;
        list[25] = true;
        let v = f1_at_k(&list, 10, 2).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(f1_at_k(&[false; 10], 10, 3).unwrap(), 0.0);
        assert!(f1_at_k(&list, 0, 2).is_err());
        assert!(f1_at_k(&list, 10, 0).is_err());
    }

    fn scored() -> impl Strategy<Value = Vec<(f64, bool)>> {
        // few distinct score levels so ties are common
        prop::collection::vec(
            ((0u8..6).prop_map(|s| s as f64 / 5.0), any::<bool>()),
            0..=20,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn auc_matches_pair_counting(s in scored()) {
            match (auc(&s), auc_pairs(&s)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn ndcg_matches_direct_sum(list in prop::collection::vec(any::<bool>(), 0..=20), k in 1usize..25) {
            match (ndcg_at_k(&list, k).unwrap(), ndcg_direct(&list, k)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 && (0.0..=1.0 + 1e-12).contains(&a)),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn f1_matches_precision_recall(list in prop::collection::vec(any::<bool>(), 1..=20), k in 1usize..25) {
            let total = list.iter().filter(|&&r| r).count();
            prop_assume!(total > 0);
            let hits = list.iter().take(k).filter(|&&r| r).count() as f64;
            let (p, r) = (hits / k as f64, hits / total as f64);
            let want = if hits == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            prop_assert!((f1_at_k(&list, k, total).unwrap() - want).abs() <= 1e-9);
        }

        #[test]
        fn moving_a_relevant_item_up_never_lowers_ndcg(
            list in prop::collection::vec(any::<bool>(), 2..=20),
            k in 1usize..25,
            pos in 1usize..20,
        ) {
            let mut list = list;
            let pos = 1 + pos % (list.len() - 1);
            list[pos] = true;
            list[pos - 1] = false;
            let mut up = list.clone();
            up.swap(pos, pos - 1);
            let before = ndcg_at_k(&list, k).unwrap().unwrap();
            let after = ndcg_at_k(&up, k).unwrap().unwrap();
            prop_assert!(after >= before - 1e-12);
        }
    }
}
