//! Agglomerative complete-linkage clustering over MFP distances for
//! user-feeder identification, and its normalized-PCC variant for the
//! three-way phase split.

use std::collections::BTreeMap;

use crate::correlate::{self, CorrelationConfig};
use crate::error::{Error, Result};
use crate::model::{DistanceKind, DistanceMatrix, LabelSet, MeterId, VoltagePanel};
use crate::select;

/// One agglomeration step. Cluster ids follow the usual linkage convention:
/// 0..n-1 are singletons, the t-th merge creates id n+t.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkageRecord {
    pub merged_a: usize,
    pub merged_b: usize,
    pub height: f64,
    pub new_size: usize,
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    /// Cluster index per meter (labels "0".."K-1"), with per-meter confidence.
    pub labels: LabelSet,
    pub linkage: Vec<LinkageRecord>,
    /// Cluster index per meter, aligned with the distance matrix order.
    pub assignments: Vec<usize>,
}

impl ClusteringResult {
    pub fn cluster_count(&self) -> usize {
        self.assignments.iter().max().map_or(0, |&m| m + 1)
    }
}

/// Builds the full complete-linkage merge sequence for a distance matrix.
///
/// Merge choice: the pair of active clusters with the smallest inter-cluster
/// distance, ties broken by the lexicographically smallest (min id, max id)
/// pair. Inter-cluster distances update by the max rule.
pub fn linkage(d: &DistanceMatrix) -> Result<Vec<LinkageRecord>> {
    d.require_valid()?;
    let n = d.n();
    // Active clusters as parallel arrays; dist is dense over active slots.
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| d.get(i, j)).collect())
        .collect();

    let mut records = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None; // (d, id_lo, id_hi, slot_a, slot_b)
        for sa in 0..dist.len() {
            if !active[sa] {
                continue;
            }
            for sb in (sa + 1)..dist.len() {
                if !active[sb] {
                    continue;
                }
                let dv = dist[sa][sb];
                let (lo, hi) = if ids[sa] < ids[sb] {
                    (ids[sa], ids[sb])
                } else {
                    (ids[sb], ids[sa])
                };
                let better = match &best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => {
                        dv < *bd || (dv == *bd && (lo, hi) < (*blo, *bhi))
                    }
                };
                if better {
                    best = Some((dv, lo, hi, sa, sb));
                }
            }
        }
        let (height, id_lo, id_hi, sa, sb) = best.expect("two active clusters");
        let new_size = sizes[sa] + sizes[sb];
        // Reuse slot sa for the merged cluster.
        for sk in 0..dist.len() {
            if sk == sa || sk == sb || !active[sk] {
                continue;
            }
            let m = dist[sa][sk].max(dist[sb][sk]);
            dist[sa][sk] = m;
            dist[sk][sa] = m;
        }
        ids[sa] = n + step;
        sizes[sa] = new_size;
        active[sb] = false;
        records.push(LinkageRecord {
            merged_a: id_lo,
            merged_b: id_hi,
            height,
            new_size,
        });
    }
    Ok(records)
}

/// Cuts a linkage at `k` clusters. Returns a cluster index per observation;
/// indices are normalized so clusters appear in order of their smallest member.
pub fn cut(records: &[LinkageRecord], n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    // Replay the first n-k merges over singleton groups.
    let mut groups: BTreeMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    for (step, rec) in records.iter().take(n - k).enumerate() {
        let a = groups.remove(&rec.merged_a).ok_or_else(|| {
            Error::Config(format!("linkage references missing cluster {}", rec.merged_a))
        })?;
        let b = groups.remove(&rec.merged_b).ok_or_else(|| {
            Error::Config(format!("linkage references missing cluster {}", rec.merged_b))
        })?;
        let mut merged = a;
        merged.extend(b);
        groups.insert(n + step, merged);
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_values().collect();
    clusters.sort_by_key(|members| *members.iter().min().unwrap());
    let mut out = vec![0usize; n];
    for (ci, members) in clusters.iter().enumerate() {
        for &m in members {
            out[m] = ci;
        }
    }
    Ok(out)
}

/// Relative-margin confidence: (second-smallest mean cluster distance -
/// smallest) / second-smallest, clamped to [0, 1].
fn confidence_margins(d: &DistanceMatrix, assignments: &[usize], k: usize) -> Vec<f64> {
    let n = d.n();
    let mut out = vec![1.0f64; n];
    if k < 2 {
        return out;
    }
    for i in 0..n {
        let mut means = Vec::with_capacity(k);
        for c in 0..k {
            let mut count = 0usize;
            let mut sum = 0.0;
            for j in 0..n {
                if j != i && assignments[j] == c {
                    count += 1;
                    sum += d.get(i, j);
                }
            }
            if count > 0 {
                means.push(sum / count as f64);
            }
        }
        if means.len() < 2 {
            continue;
        }
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (d1, d2) = (means[0], means[1]);
        out[i] = if d2 <= 0.0 { 0.0 } else { ((d2 - d1) / d2).clamp(0.0, 1.0) };
    }
    out
}

/// Complete-linkage agglomeration cut at `k` clusters.
pub fn hcluster(d: &DistanceMatrix, k: usize) -> Result<ClusteringResult> {
    let n = d.n();
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    let records = linkage(d)?;
    let assignments = cut(&records, n, k)?;
    let conf = confidence_margins(d, &assignments, k);
    let mut labels = LabelSet::new();
    for (i, meter) in d.meter_order().iter().enumerate() {
        labels.insert_with_confidence(meter.clone(), assignments[i].to_string(), conf[i]);
    }
    Ok(ClusteringResult { labels, linkage: records, assignments })
}

/// User-feeder identification without recordings: MFP distances + complete
/// linkage, cut at the feeder count.
pub fn identify_feeders(
    panel: &VoltagePanel,
    meter_ids: &[MeterId],
    feeder_count: usize,
    cfg: &CorrelationConfig,
) -> Result<ClusteringResult> {
    let d = correlate::distance_matrix(panel, meter_ids, DistanceKind::Mfp, cfg)?;
    hcluster(&d, feeder_count)
}

/// Phase identification for one feeder's meters: z-normalize, use the
/// plain-PCC complement distance, and cut at three clusters.
pub fn identify_phases(
    panel: &VoltagePanel,
    meter_ids: &[MeterId],
    cfg: &CorrelationConfig,
) -> Result<ClusteringResult> {
    if panel.meters() < 3 {
        return Err(Error::TooFewMeters { required: 3, got: panel.meters() });
    }
    let normalized = select::znormalize(panel)?;
    let d = correlate::distance_matrix(
        &normalized.panel,
        meter_ids,
        DistanceKind::PccComplement,
        cfg,
    )?;
    hcluster(&d, 3)
}

/// Marks the top `fraction` of meters by confidence as known; the rest
/// become unknown. Ties break by meter id.
pub fn high_confidence_subset(result: &ClusteringResult, fraction: f64) -> Result<LabelSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction {fraction} outside (0, 1]")));
    }
    let meters: Vec<&MeterId> = result.labels.meters().collect();
    let n = meters.len();
    let keep = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<&MeterId> = meters.clone();
    order.sort_by(|a, b| {
        result.labels
            .confidence(b)
            .partial_cmp(&result.labels.confidence(a))
            .unwrap()
            .then_with(|| a.cmp(b))
    });
    let mut out = LabelSet::new();
    for (rank, meter) in order.iter().enumerate() {
        if rank < keep {
            out.insert_with_confidence(
                (*meter).clone(),
                result.labels.label(meter).unwrap(),
                result.labels.confidence(meter),
            );
        } else {
            out.insert_unknown((*meter).clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from(vals: &[&[f64]]) -> DistanceMatrix {
        let n = vals.len();
        let ids: Vec<String> = (0..n).map(|i| format!("m{i:02}")).collect();
        let mut flat = Vec::with_capacity(n * n);
        for row in vals {
            flat.extend_from_slice(row);
        }
        DistanceMatrix::from_symmetric(DistanceKind::Mfp, ids, flat, vec![]).unwrap()
    }

    #[test]
    fn block_diagonal_groups_recovered() {
        let w = 0.05;
        let b = 0.95;
        let d = matrix_from(&[
            &[0.0, w, b, b],
            &[w, 0.0, b, b],
            &[b, b, 0.0, w],
            &[b, b, w, 0.0],
        ]);
        let r = hcluster(&d, 2).unwrap();
        assert_eq!(r.assignments, vec![0, 0, 1, 1]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let d = matrix_from(&[
            &[0.0, 0.1, 0.2],
            &[0.1, 0.0, 0.3],
            &[0.2, 0.3, 0.0],
        ]);
        let r = hcluster(&d, 3).unwrap();
        assert_eq!(r.assignments, vec![0, 1, 2]);
    }

    #[test]
    fn hand_traced_four_point_case() {
        // d(0,1)=0.1, d(2,3)=0.2, cross >= 0.8 -> {0,1} and {2,3}
        let d = matrix_from(&[
            &[0.0, 0.1, 0.8, 0.85],
            &[0.1, 0.0, 0.9, 0.8],
            &[0.8, 0.9, 0.0, 0.2],
            &[0.85, 0.8, 0.2, 0.0],
        ]);
        let r = hcluster(&d, 2).unwrap();
        assert_eq!(r.assignments, vec![0, 0, 1, 1]);
        // complete linkage: last merge height is the max cross distance
        assert_eq!(r.linkage.len(), 3);
        assert_eq!(r.linkage[2].height, 0.9);
    }

    #[test]
    fn linkage_heights_non_decreasing() {
        let d = matrix_from(&[
            &[0.0, 0.4, 0.1, 0.7],
            &[0.4, 0.0, 0.5, 0.2],
            &[0.1, 0.5, 0.0, 0.6],
            &[0.7, 0.2, 0.6, 0.0],
        ]);
        let recs = linkage(&d).unwrap();
        for w in recs.windows(2) {
            assert!(w[1].height >= w[0].height);
        }
    }

    #[test]
    fn cut_refinement_merges_exactly_two_clusters() {
        let d = matrix_from(&[
            &[0.0, 0.15, 0.6, 0.62, 0.9],
            &[0.15, 0.0, 0.61, 0.6, 0.91],
            &[0.6, 0.61, 0.0, 0.1, 0.88],
            &[0.62, 0.6, 0.1, 0.0, 0.87],
            &[0.9, 0.91, 0.88, 0.87, 0.0],
        ]);
        let recs = linkage(&d).unwrap();
        let at3 = cut(&recs, 5, 3).unwrap();
        let at2 = cut(&recs, 5, 2).unwrap();
        // Every cluster at k=2 is a union of clusters at k=3; exactly two merged.
        let mut merged_into: BTreeMap<usize, std::collections::BTreeSet<usize>> = BTreeMap::new();
        for i in 0..5 {
            merged_into.entry(at2[i]).or_default().insert(at3[i]);
        }
        let sizes: Vec<usize> = merged_into.values().map(|s| s.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 3);
        assert!(sizes.contains(&2));
    }

    #[test]
    fn permutation_invariance_up_to_relabeling() {
        let base = [
            [0.0, 0.1, 0.8, 0.85],
            [0.1, 0.0, 0.9, 0.8],
            [0.8, 0.9, 0.0, 0.2],
            [0.85, 0.8, 0.2, 0.0],
        ];
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| base[perm[i]][perm[j]]).collect())
            .collect();
        let rows: Vec<&[f64]> = permuted.iter().map(|r| r.as_slice()).collect();
        let d2 = matrix_from(&rows);
        let d1 = matrix_from(&[
            &base[0][..], &base[1][..], &base[2][..], &base[3][..],
        ]);
        let r1 = hcluster(&d1, 2).unwrap();
        let r2 = hcluster(&d2, 2).unwrap();
        // same partition after undoing the permutation
        for i in 0..4 {
            for j in 0..4 {
                let same1 = r1.assignments[perm[i]] == r1.assignments[perm[j]];
                let same2 = r2.assignments[i] == r2.assignments[j];
                assert_eq!(same1, same2);
            }
        }
    }

    #[test]
    fn high_confidence_subset_counts() {
        let d = matrix_from(&[
            &[0.0, 0.1, 0.8, 0.85],
            &[0.1, 0.0, 0.9, 0.8],
            &[0.8, 0.9, 0.0, 0.2],
            &[0.85, 0.8, 0.2, 0.0],
        ]);
        let r = hcluster(&d, 2).unwrap();
        let all = high_confidence_subset(&r, 1.0).unwrap();
        assert_eq!(all.known_count(), 4);
        let half = high_confidence_subset(&r, 0.5).unwrap();
        assert_eq!(half.known_count(), 2);
        assert_eq!(half.len(), 4);
    }
}
