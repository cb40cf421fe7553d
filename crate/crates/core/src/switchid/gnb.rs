//! Gaussian naive Bayes baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub class_catalog: Vec<u32>,
    log_priors: Vec<f64>,
    means: Vec<Vec<f64>>, // class × feature
    variances: Vec<Vec<f64>>,
    n_features: usize,
}

/// Per-class per-feature Gaussian fit with a floored variance.
pub fn train_gnb(rows: &[Vec<f64>], labels: &[u32]) -> Result<GnbModel> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::RaggedRows);
    }
    let mut class_catalog = labels.to_vec();
    class_catalog.sort_unstable();
    class_catalog.dedup();
    if class_catalog.len() < 2 {
        return Err(Error::SingleClass);
    }

    let k = class_catalog.len();
    let mut counts = vec![0usize; k];
    let mut means = vec![vec![0.0f64; width]; k];
    for (row, label) in rows.iter().zip(labels) {
        let c = class_catalog.binary_search(label).unwrap();
        counts[c] += 1;
        for (f, v) in row.iter().enumerate() {
            means[c][f] += v;
        }
    }
    for c in 0..k {
        for f in 0..width {
            means[c][f] /= counts[c] as f64;
        }
    }
    let mut variances = vec![vec![0.0f64; width]; k];
    for (row, label) in rows.iter().zip(labels) {
        let c = class_catalog.binary_search(label).unwrap();
        for (f, v) in row.iter().enumerate() {
            let d = v - means[c][f];
            variances[c][f] += d * d;
        }
    }
    for c in 0..k {
        for f in 0..width {
            variances[c][f] = (variances[c][f] / counts[c] as f64).max(VARIANCE_FLOOR);
        }
    }
    let n = rows.len() as f64;
    let log_priors = counts.iter().map(|&c| (c as f64 / n).ln()).collect();
    Ok(GnbModel { class_catalog, log_priors, means, variances, n_features: width })
}

/// argmax over classes of log-prior + summed Gaussian log-likelihoods,
/// ties to the lowest class index.
pub fn predict_gnb(model: &GnbModel, row: &[f64]) -> Result<u32> {
    if row.len() != model.n_features {
        return Err(Error::WidthMismatch { expected: model.n_features, got: row.len() });
    }
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for c in 0..model.class_catalog.len() {
        let mut score = model.log_priors[c];
        for (f, &v) in row.iter().enumerate() {
            let var = model.variances[c][f];
            let d = v - model.means[c][f];
            score += -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
        }
        if score > best_score {
            best_score = score;
            best = c;
        }
    }
    Ok(model.class_catalog[best])
}
