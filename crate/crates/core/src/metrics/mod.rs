//! Evaluation metrics: clustering purity, optimally aligned accuracy, and
//! confusion tables.

mod align;
pub mod experiment;

pub use align::max_assignment;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::LabelSet;

/// Cluster × class contingency table in sorted category order.
#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    pub predicted_categories: Vec<String>,
    pub truth_categories: Vec<String>,
    /// counts[p][t] = meters with predicted category p and truth category t.
    pub counts: Vec<Vec<usize>>,
    pub total: usize,
}

fn check_meter_sets(predicted: &LabelSet, truth: &LabelSet) -> Result<()> {
    predicted.require_fully_labeled()?;
    truth.require_fully_labeled()?;
    let only_pred: Vec<&String> =
        predicted.meters().filter(|m| !truth.contains(m)).collect();
    let only_truth: Vec<&String> =
        truth.meters().filter(|m| !predicted.contains(m)).collect();
    if !only_pred.is_empty() || !only_truth.is_empty() {
        return Err(Error::MeterSetMismatch(format!(
            "only in predicted: {only_pred:?}; only in truth: {only_truth:?}"
        )));
    }
    Ok(())
}

/// Contingency table of two fully labeled label sets over the same meters.
pub fn confusion(predicted: &LabelSet, truth: &LabelSet) -> Result<Confusion> {
    check_meter_sets(predicted, truth)?;
    let pred_cats = predicted.categories();
    let truth_cats = truth.categories();
    let pred_index: BTreeMap<&str, usize> =
        pred_cats.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let truth_index: BTreeMap<&str, usize> =
        truth_cats.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut counts = vec![vec![0usize; truth_cats.len()]; pred_cats.len()];
    let mut total = 0usize;
    for meter in predicted.meters() {
        let p = pred_index[predicted.label(meter).unwrap()];
        let t = truth_index[truth.label(meter).unwrap()];
        counts[p][t] += 1;
        total += 1;
    }
    Ok(Confusion {
        predicted_categories: pred_cats,
        truth_categories: truth_cats,
        counts,
        total,
    })
}

/// Clustering purity: each predicted cluster contributes its largest overlap
/// with any truth class.
pub fn purity(predicted: &LabelSet, truth: &LabelSet) -> Result<f64> {
    let c = confusion(predicted, truth)?;
    if c.total == 0 {
        return Err(Error::EmptyInput);
    }
    let hit: usize = c
        .counts
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(hit as f64 / c.total as f64)
}

/// Accuracy under the optimal one-to-one cluster-to-class matching.
pub fn aligned_accuracy(predicted: &LabelSet, truth: &LabelSet) -> Result<f64> {
    let c = confusion(predicted, truth)?;
    if c.total == 0 {
        return Err(Error::EmptyInput);
    }
    let weights: Vec<Vec<i64>> = c
        .counts
        .iter()
        .map(|row| row.iter().map(|&v| v as i64).collect())
        .collect();
    let assignment = max_assignment(&weights);
    let matched: i64 = assignment
        .iter()
        .enumerate()
        .filter_map(|(p, t)| t.map(|t| weights[p][t]))
        .sum();
    Ok(matched as f64 / c.total as f64)
}

/// The optimal cluster → class name mapping (unmatched clusters map to None).
pub fn best_alignment(predicted: &LabelSet, truth: &LabelSet) -> Result<Vec<(String, Option<String>)>> {
    let c = confusion(predicted, truth)?;
    let weights: Vec<Vec<i64>> = c
        .counts
        .iter()
        .map(|row| row.iter().map(|&v| v as i64).collect())
        .collect();
    let assignment = max_assignment(&weights);
    Ok(c
        .predicted_categories
        .iter()
        .zip(assignment)
        .map(|(p, t)| (p.clone(), t.map(|t| c.truth_categories[t].clone())))
        .collect())
}

/// Plain per-meter agreement between two fully labeled sets (no alignment).
pub fn exact_accuracy(predicted: &LabelSet, truth: &LabelSet) -> Result<f64> {
    check_meter_sets(predicted, truth)?;
    let mut hit = 0usize;
    let mut total = 0usize;
    for meter in predicted.meters() {
        total += 1;
        if predicted.label(meter) == truth.label(meter) {
            hit += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(hit as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_from(pairs: &[(&str, &str)]) -> LabelSet {
        let mut ls = LabelSet::new();
        for (m, l) in pairs {
            ls.insert_known(*m, *l);
        }
        ls
    }

    #[test]
    fn relabeled_perfect_clustering_scores_one() {
        let truth = labels_from(&[("m1", "a"), ("m2", "a"), ("m3", "b"), ("m4", "b")]);
        let pred = labels_from(&[("m1", "x"), ("m2", "x"), ("m3", "y"), ("m4", "y")]);
        assert_eq!(purity(&pred, &truth).unwrap(), 1.0);
        assert_eq!(aligned_accuracy(&pred, &truth).unwrap(), 1.0);
    }

    #[test]
    fn purity_reference_example() {
        // clusters {a,a,b} and {b,b} vs truth (a,a,b,b,b) -> (2+2)/5
        let truth = labels_from(&[
            ("m1", "a"), ("m2", "a"), ("m3", "b"), ("m4", "b"), ("m5", "b"),
        ]);
        let pred = labels_from(&[
            ("m1", "c0"), ("m2", "c0"), ("m3", "c0"), ("m4", "c1"), ("m5", "c1"),
        ]);
        assert_eq!(purity(&pred, &truth).unwrap(), 0.8);
        assert_eq!(aligned_accuracy(&pred, &truth).unwrap(), 0.8);
    }

    #[test]
    fn singleton_clusters_have_purity_one() {
        let truth = labels_from(&[("m1", "a"), ("m2", "a"), ("m3", "b")]);
        let pred = labels_from(&[("m1", "0"), ("m2", "1"), ("m3", "2")]);
        assert_eq!(purity(&pred, &truth).unwrap(), 1.0);
        assert!(aligned_accuracy(&pred, &truth).unwrap() < 1.0);
    }

    #[test]
    fn one_of_ten_misgrouped_gives_090() {
        let mut truth = LabelSet::new();
        let mut pred = LabelSet::new();
        for i in 0..10 {
            let m = format!("m{i}");
            truth.insert_known(m.clone(), if i < 5 { "a" } else { "b" });
            // m4 lands in the wrong cluster
            pred.insert_known(m, if i < 4 { "x" } else { "y" });
        }
        assert_eq!(aligned_accuracy(&pred, &truth).unwrap(), 0.9);
    }

    #[test]
    fn meter_set_mismatch_is_an_error() {
        let truth = labels_from(&[("m1", "a"), ("m2", "a")]);
        let pred = labels_from(&[("m1", "a"), ("m3", "a")]);
        assert!(matches!(
            purity(&pred, &truth),
            Err(Error::MeterSetMismatch(_))
        ));
    }

    #[test]
    fn purity_dominates_accuracy_on_partition_pairs() {
        // all partitions of 5 elements into <= 3 blocks, by restricted growth
        let parts = partitions(5, 3);
        for p in &parts {
            for q in &parts {
                let pred = partition_labels(p);
                let truth = partition_labels(q);
                let pu = purity(&pred, &truth).unwrap();
                let acc = aligned_accuracy(&pred, &truth).unwrap();
                assert!(pu >= acc - 1e-12, "purity {pu} < accuracy {acc} for {p:?} vs {q:?}");
                let matches = p == q;
                assert_eq!(pu == 1.0 && acc == 1.0, matches, "{p:?} vs {q:?}");
            }
        }
    }

    fn partition_labels(assignment: &[usize]) -> LabelSet {
        let mut ls = LabelSet::new();
        for (i, c) in assignment.iter().enumerate() {
            ls.insert_known(format!("m{i}"), c.to_string());
        }
        ls
    }

    /// Restricted growth strings: canonical partitions into <= max_blocks.
    fn partitions(n: usize, max_blocks: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = vec![0usize; n];
        fn rec(cur: &mut Vec<usize>, i: usize, max_used: usize, max_blocks: usize, out: &mut Vec<Vec<usize>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for c in 0..=(max_used + 1).min(max_blocks - 1) {
                cur[i] = c;
                rec(cur, i + 1, max_used.max(c), max_blocks, out);
            }
        }
        rec(&mut cur, 1, 0, max_blocks, &mut out);
        out
    }
}
