//! Shared test support: an independent brute-force complete-linkage
//! reference that re-scans the raw distance matrix at every merge.

/// Complete-linkage agglomeration by naive re-scan, cut at `k` clusters.
/// Uses the same id scheme and tie rule as the production path (singletons
/// 0..n-1, merge t creates id n+t, ties to the smallest (min id, max id)
/// pair) but never reuses its distance-update machinery.
pub fn brute_force_complete_linkage(d: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = d.len();
    assert!(k >= 1 && k <= n);
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut next_id = n;
    while clusters.len() > k {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut dmax = f64::MIN;
                for &x in &clusters[a].1 {
                    for &y in &clusters[b].1 {
                        dmax = dmax.max(d[x][y]);
                    }
                }
                let (lo, hi) = if clusters[a].0 < clusters[b].0 {
                    (clusters[a].0, clusters[b].0)
                } else {
                    (clusters[b].0, clusters[a].0)
                };
                let better = match &best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => {
                        dmax < *bd || (dmax == *bd && (lo, hi) < (*blo, *bhi))
                    }
                };
                if better {
                    best = Some((dmax, lo, hi, a, b));
                }
            }
        }
        let (_, _, _, a, b) = best.unwrap();
        let (hi_idx, lo_idx) = if a > b { (a, b) } else { (b, a) };
        let removed = clusters.remove(hi_idx);
        let mut merged = clusters.remove(lo_idx).1;
        merged.extend(removed.1);
        clusters.push((next_id, merged));
        next_id += 1;
    }
    // Normalize: clusters indexed in order of their smallest member.
    let mut groups: Vec<Vec<usize>> = clusters.into_iter().map(|(_, m)| m).collect();
    groups.sort_by_key(|m| *m.iter().min().unwrap());
    let mut out = vec![0usize; n];
    for (ci, members) in groups.iter().enumerate() {
        for &m in members {
            out[m] = ci;
        }
    }
    out
}
