//! Label propagation from partially known user-feeder recordings:
//! traditional KNN on raw-voltage Euclidean distance, and the MFP
//! nearest-label rule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::correlate::{self, CorrelationConfig};
use crate::error::{Error, Result};
use crate::model::{LabelSet, MeterId, VoltagePanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignMethod {
    Knn,
    Mfp,
}

/// Assigns every unknown meter the majority label of its `k` nearest known
/// meters under overlap-scaled Euclidean distance.
pub fn knn_assign(
    panel: &VoltagePanel,
    meter_ids: &[MeterId],
    known: &LabelSet,
    k: usize,
    cfg: &CorrelationConfig,
) -> Result<LabelSet> {
    assign(panel, meter_ids, known, k, cfg, AssignMethod::Knn)
}

/// Assigns every unknown meter the majority label of its `k` most-correlated
/// known meters under the MFP distance.
pub fn mfp_assign(
    panel: &VoltagePanel,
    meter_ids: &[MeterId],
    known: &LabelSet,
    k: usize,
    cfg: &CorrelationConfig,
) -> Result<LabelSet> {
    assign(panel, meter_ids, known, k, cfg, AssignMethod::Mfp)
}

pub fn assign(
    panel: &VoltagePanel,
    meter_ids: &[MeterId],
    known: &LabelSet,
    k: usize,
    cfg: &CorrelationConfig,
    method: AssignMethod,
) -> Result<LabelSet> {
    if meter_ids.len() != panel.meters() {
        return Err(Error::DimensionMismatch {
            expected: panel.meters(),
            got: meter_ids.len(),
        });
    }
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let mut known_rows: Vec<(usize, &MeterId, &str)> = Vec::new();
    let mut unknown_rows: Vec<(usize, &MeterId)> = Vec::new();
    for (row, meter) in meter_ids.iter().enumerate() {
        if known.is_known(meter) {
            known_rows.push((row, meter, known.label(meter).unwrap()));
        } else {
            unknown_rows.push((row, meter));
        }
    }
    if unknown_rows.is_empty() {
        return Err(Error::NoUnknownMeters);
    }
    if known_rows.len() < k {
        return Err(Error::KTooLarge { k, known: known_rows.len() });
    }

    // Sorted label categories; the final tie-break is lowest label index.
    let mut categories: Vec<&str> = known_rows.iter().map(|(_, _, l)| *l).collect();
    categories.sort();
    categories.dedup();

    let mut out = LabelSet::new();
    for (_, meter, label) in &known_rows {
        out.insert_with_confidence((*meter).clone(), *label, known.confidence(meter));
    }

    for &(row, meter) in &unknown_rows {
        let mut candidates: Vec<(f64, &MeterId, &str)> = Vec::with_capacity(known_rows.len());
        for &(krow, kmeter, label) in &known_rows {
            let d = match method {
                AssignMethod::Knn => correlate::euclidean(
                    panel.values_row(row),
                    panel.mask_row(row),
                    panel.values_row(krow),
                    panel.mask_row(krow),
                    panel.steps(),
                    cfg,
                ),
                AssignMethod::Mfp => correlate::mfp(
                    panel.values_row(row),
                    panel.mask_row(row),
                    panel.values_row(krow),
                    panel.mask_row(krow),
                    cfg,
                ),
            };
            match d {
                Ok(d) => candidates.push((d, kmeter, label)),
                Err(Error::InsufficientOverlap { .. } | Error::UndefinedCorrelation(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if candidates.len() < k {
            return Err(Error::KTooLarge { k, known: candidates.len() });
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)));
        candidates.truncate(k);

        // votes and mean distance per label among the k neighbours
        let mut per_label: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for (d, _, label) in &candidates {
            let e = per_label.entry(label).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
        }
        let mut ranked: Vec<(&str, usize, f64)> = per_label
            .into_iter()
            .map(|(label, (votes, dist_sum))| (label, votes, dist_sum / votes as f64))
            .collect();
        ranked.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| a.2.partial_cmp(&b.2).unwrap())
                .then_with(|| {
                    let ia = categories.iter().position(|c| *c == a.0).unwrap();
                    let ib = categories.iter().position(|c| *c == b.0).unwrap();
                    ia.cmp(&ib)
                })
        });
        let (label, votes, _) = ranked[0];
        out.insert_with_confidence(meter.clone(), label, votes as f64 / k as f64);
    }
    Ok(out)
}
