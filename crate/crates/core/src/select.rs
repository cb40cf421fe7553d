//! Dataset conditioning: time-window selection, uniform SM selection across
//! feeders, balanced class sampling, training-matrix assembly, and
//! z-normalization.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{MeterId, NetworkTopology, SwitchBar, VoltagePanel};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSense {
    /// Keep columns inside [t1, t2].
    Inside,
    /// Keep the complement; the PV-filtering default.
    Outside,
}

/// Time-based data selection window.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeWindow {
    /// Keep columns by within-day slot index.
    Fixed { t1: u32, t2: u32, sense: WindowSense },
    /// Keep columns where the reference PV output is below the reference load.
    Dynamic { pv_ref: Vec<f64>, load_ref: Vec<f64> },
}

impl TimeWindow {
    /// The fixed night window the benchmarks use: drop slots 20..=88.
    pub fn pv_filter() -> Self {
        TimeWindow::Fixed { t1: 20, t2: 88, sense: WindowSense::Outside }
    }
}

/// Column indices of `panel` kept by the window, in order.
pub fn selected_columns(panel: &VoltagePanel, window: &TimeWindow) -> Result<Vec<usize>> {
    let cols = match window {
        TimeWindow::Fixed { t1, t2, sense } => {
            let per_day = panel.columns_per_day();
            if t1 > t2 || *t2 >= per_day {
                return Err(Error::Config(format!(
                    "fixed window [{t1}, {t2}] is invalid for {per_day} columns per day"
                )));
            }
            let mut cols = Vec::new();
            for t in 0..panel.steps() {
                let slot = panel.day_slot(t)?;
                let inside = slot >= *t1 && slot <= *t2;
                let keep = match sense {
                    WindowSense::Inside => inside,
                    WindowSense::Outside => !inside,
                };
                if keep {
                    cols.push(t);
                }
            }
            cols
        }
        TimeWindow::Dynamic { pv_ref, load_ref } => {
            if pv_ref.len() != load_ref.len() {
                return Err(Error::DimensionMismatch {
                    expected: pv_ref.len(),
                    got: load_ref.len(),
                });
            }
            if pv_ref.len() != panel.steps() {
                return Err(Error::DimensionMismatch {
                    expected: panel.steps(),
                    got: pv_ref.len(),
                });
            }
            (0..panel.steps()).filter(|&t| pv_ref[t] < load_ref[t]).collect()
        }
    };
    if cols.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(cols)
}

/// Panel restricted to the window's columns; column order preserved.
pub fn select_time(panel: &VoltagePanel, window: &TimeWindow) -> Result<VoltagePanel> {
    let cols = selected_columns(panel, window)?;
    panel.restrict_columns(&cols)
}

/// Uniform SM selection across the feeders of a switch bar.
///
/// M is the minimum available-meter count over the bar's feeders (optionally
/// capped); from each feeder the M meters closest to the bar are kept, ties
/// broken by meter id. The output stacks feeders in feeder-id order.
pub fn uniform_sm_selection(
    panel: &VoltagePanel,
    meter_ids: &[MeterId],
    topo: &NetworkTopology,
    bar: &SwitchBar,
    cap: Option<usize>,
) -> Result<(VoltagePanel, Vec<MeterId>)> {
    if meter_ids.len() != panel.meters() {
        return Err(Error::DimensionMismatch {
            expected: panel.meters(),
            got: meter_ids.len(),
        });
    }
    let index_of = |id: &str| meter_ids.iter().position(|m| m == id);

    let mut feeders = bar.feeder_ids.clone();
    feeders.sort();

    // Available = attached to the feeder, present in the panel, and carrying
    // at least one observed sample.
    let mut per_feeder: Vec<Vec<(f64, MeterId, usize)>> = Vec::new();
    for feeder in &feeders {
        let mut avail = Vec::new();
        for meter in topo.meters_of_feeder(feeder) {
            let Some(row) = index_of(&meter) else { continue };
            if panel.observed_in_row(row) == 0 {
                continue;
            }
            let node = &topo.meters[&meter].node;
            let dist = topo.node(node).map(|n| n.distance_m).unwrap_or(f64::MAX);
            avail.push((dist, meter, row));
        }
        if avail.is_empty() {
            return Err(Error::FeederWithoutMeters(feeder.clone()));
        }
        avail.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        per_feeder.push(avail);
    }

    let mut m = per_feeder.iter().map(Vec::len).min().unwrap_or(0);
    if let Some(cap) = cap {
        m = m.min(cap.max(1));
    }

    let mut rows = Vec::with_capacity(m * feeders.len());
    let mut chosen = Vec::with_capacity(m * feeders.len());
    for avail in &per_feeder {
        for (_, meter, row) in avail.iter().take(m) {
            rows.push(*row);
            chosen.push(meter.clone());
        }
    }
    let reduced = panel.restrict_rows(&rows)?;
    Ok((reduced, chosen))
}

/// Balances classes to the minimum class size by uniform subsampling, then
/// shuffles deterministically.
pub fn balanced_sampling(
    samples: &[(Vec<f64>, u32)],
    catalog: &[u32],
    rng_seed: u64,
) -> Result<Vec<(Vec<f64>, u32)>> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); catalog.len()];
    for (i, (_, label)) in samples.iter().enumerate() {
        if let Some(c) = catalog.iter().position(|l| l == label) {
            per_class[c].push(i);
        }
    }
    for (c, idxs) in per_class.iter().enumerate() {
        if idxs.is_empty() {
            return Err(Error::EmptyClass(catalog[c].to_string()));
        }
    }
    let s = per_class.iter().map(Vec::len).min().unwrap();

    let mut rng = rng_for(rng_seed, "balanced_sampling");
    let mut picked = Vec::with_capacity(s * catalog.len());
    for idxs in &mut per_class {
        idxs.shuffle(&mut rng);
        picked.extend(idxs.iter().take(s).copied());
    }
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| samples[i].clone()).collect())
}

/// Stacks rows into the training-matrix layout: classes in catalog order,
/// sample rows per class in input order, label vector aligned.
pub fn assemble_training_matrix(
    rows: &[(Vec<f64>, u32)],
    catalog: &[u32],
) -> Result<(Vec<Vec<f64>>, Vec<u32>)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let width = rows[0].0.len();
    if rows.iter().any(|(r, _)| r.len() != width) {
        return Err(Error::RaggedRows);
    }
    let mut matrix = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for class in catalog {
        for (row, label) in rows {
            if label == class {
                matrix.push(row.clone());
                labels.push(*label);
            }
        }
    }
    if matrix.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok((matrix, labels))
}

/// Result of z-normalizing a panel: per-column standardized values plus the
/// list of degenerate (near-constant) columns that were zeroed.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub panel: VoltagePanel,
    pub flagged_columns: Vec<usize>,
}

/// Per-column z-normalization over observed cells.
///
/// Column statistics use the sample convention (divide by count - 1);
/// columns with SD below 1e-12 are zeroed and flagged rather than rejected.
pub fn znormalize(panel: &VoltagePanel) -> Result<Normalized> {
    let n = panel.meters();
    let steps = panel.steps();
    let mut flagged = Vec::new();
    let mut means = vec![0.0f64; steps];
    let mut sds = vec![0.0f64; steps];
    for t in 0..steps {
        let mut count = 0usize;
        let mut sum = 0.0;
        for m in 0..n {
            if let Some(v) = panel.get(m, t) {
                count += 1;
                sum += v;
            }
        }
        if count < 2 {
            return Err(Error::Config(format!(
                "column {t} has {count} observed value(s); need at least 2"
            )));
        }
        let mean = sum / count as f64;
        let mut ss = 0.0;
        for m in 0..n {
            if let Some(v) = panel.get(m, t) {
                let d = v - mean;
                ss += d * d;
            }
        }
        let sd = (ss / (count - 1) as f64).sqrt();
        means[t] = mean;
        if sd < 1e-12 {
            flagged.push(t);
            sds[t] = 0.0;
        } else {
            sds[t] = sd;
        }
    }
    let normalized = panel.map_observed(|_, t, v| {
        if sds[t] == 0.0 {
            0.0
        } else {
            (v - means[t]) / sds[t]
        }
    });
    // Re-wrap as derived data: z-scores are not raw voltages.
    let mut values = Vec::with_capacity(n * steps);
    let mut mask = Vec::with_capacity(n * steps);
    for m in 0..n {
        values.extend_from_slice(normalized.values_row(m));
        mask.extend_from_slice(normalized.mask_row(m));
    }
    let panel_out = VoltagePanel::from_derived(
        values,
        mask,
        n,
        steps,
        panel.resolution_minutes(),
        panel.start(),
    )?
    .with_offsets(panel.offsets().to_vec())?;
    Ok(Normalized { panel: panel_out, flagged_columns: flagged })
}

/// Mean-imputes missing cells per feature column, returning the fitted means.
///
/// `rows` are feature rows (samples × features) with NaN marking missing
/// cells; features with no observed value impute to 0.
pub fn impute_mean(rows: &mut [Vec<f64>]) -> Vec<f64> {
    if rows.is_empty() {
        return Vec::new();
    }
    let width = rows[0].len();
    let mut means = vec![0.0f64; width];
    for f in 0..width {
        let mut count = 0usize;
        let mut sum = 0.0;
        for row in rows.iter() {
            if row[f].is_finite() {
                count += 1;
                sum += row[f];
            }
        }
        means[f] = if count > 0 { sum / count as f64 } else { 0.0 };
    }
    for row in rows.iter_mut() {
        for f in 0..width {
            if !row[f].is_finite() {
                row[f] = means[f];
            }
        }
    }
    means
}

/// Applies previously fitted feature means to a single row.
pub fn apply_imputation(row: &mut [f64], means: &[f64]) {
    for (v, m) in row.iter_mut().zip(means) {
        if !v.is_finite() {
            *v = *m;
        }
    }
}

/// Draws a deterministic subsample of `k` distinct indices from 0..n.
pub fn sample_indices(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k.min(n));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn start() -> chrono::NaiveDateTime {
        NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    fn day_panel(meters: usize, days: usize) -> VoltagePanel {
        let steps = 96 * days;
        let values: Vec<f64> = (0..meters * steps).map(|i| 230.0 + (i % 7) as f64).collect();
        VoltagePanel::new(values, vec![true; meters * steps], meters, steps, 15, start()).unwrap()
    }

    #[test]
    fn outside_window_keeps_27_columns_per_day() {
        let p = day_panel(1, 1);
        let w = TimeWindow::pv_filter();
        let cols = selected_columns(&p, &w).unwrap();
        assert_eq!(cols.len(), 27);
        assert_eq!(cols[0], 0);
        assert_eq!(cols[19], 19);
        assert_eq!(cols[20], 89);
        assert_eq!(cols[26], 95);
        // multi-day: 27 per day
        let p3 = day_panel(1, 3);
        assert_eq!(selected_columns(&p3, &w).unwrap().len(), 81);
    }

    #[test]
    fn inside_full_day_is_identity() {
        let p = day_panel(2, 1);
        let w = TimeWindow::Fixed { t1: 0, t2: 95, sense: WindowSense::Inside };
        let q = select_time(&p, &w).unwrap();
        assert_eq!(q, p);
    }

    #[test]
    fn dynamic_with_zero_pv_is_identity() {
        let p = day_panel(2, 1);
        let w = TimeWindow::Dynamic { pv_ref: vec![0.0; 96], load_ref: vec![0.5; 96] };
        assert_eq!(select_time(&p, &w).unwrap(), p);
    }

    #[test]
    fn empty_selection_is_an_error() {
        let p = day_panel(1, 1);
        let w = TimeWindow::Dynamic { pv_ref: vec![1.0; 96], load_ref: vec![0.5; 96] };
        assert!(matches!(select_time(&p, &w), Err(Error::EmptySelection)));
    }

    #[test]
    fn fixed_selection_is_idempotent() {
        let p = day_panel(2, 2);
        let w = TimeWindow::pv_filter();
        let once = select_time(&p, &w).unwrap();
        let twice = select_time(&once, &w).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn balanced_sampling_uniform_histogram() {
        let mut samples = Vec::new();
        for (count, label) in [(120u32, 0u32), (80, 1), (95, 2)] {
            for i in 0..count {
                samples.push((vec![i as f64], label));
            }
        }
        let out = balanced_sampling(&samples, &[0, 1, 2], 42).unwrap();
        assert_eq!(out.len(), 240);
        for class in 0..3u32 {
            assert_eq!(out.iter().filter(|(_, l)| *l == class).count(), 80);
        }
        // determinism
        let again = balanced_sampling(&samples, &[0, 1, 2], 42).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn balanced_sampling_permutes_already_balanced_input() {
        let samples: Vec<_> = (0..100)
            .map(|i| (vec![i as f64], (i % 2) as u32))
            .collect();
        let out = balanced_sampling(&samples, &[0, 1], 7).unwrap();
        assert_eq!(out.len(), 100);
        let mut seen: Vec<f64> = out.iter().map(|(r, _)| r[0]).collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, (0..100).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn balanced_sampling_missing_class_errors() {
        let samples = vec![(vec![1.0], 0u32)];
        assert!(matches!(
            balanced_sampling(&samples, &[0, 1], 1),
            Err(Error::EmptyClass(_))
        ));
    }

    #[test]
    fn assemble_layout_matches_contract() {
        // K=2 feeders × M=2 meters -> width 4; S=1 row per class, J=2 classes.
        let rows = vec![
            (vec![1.0, 2.0, 3.0, 4.0], 1u32),
            (vec![5.0, 6.0, 7.0, 8.0], 0u32),
        ];
        let (m, labels) = assemble_training_matrix(&rows, &[0, 1]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0], vec![5.0, 6.0, 7.0, 8.0]);
        assert_eq!(labels, vec![0, 1]);

        assert!(matches!(assemble_training_matrix(&[], &[0]), Err(Error::EmptyInput)));
        let ragged = vec![(vec![1.0], 0u32), (vec![1.0, 2.0], 0)];
        assert!(matches!(assemble_training_matrix(&ragged, &[0]), Err(Error::RaggedRows)));
    }

    #[test]
    fn znormalize_reference_column() {
        // column [229, 230, 231] -> [-1, 0, 1] with sample SD
        let p = VoltagePanel::new(
            vec![229.0, 230.0, 231.0],
            vec![true; 3],
            3,
            1,
            15,
            start(),
        )
        .unwrap();
        let out = znormalize(&p).unwrap();
        assert!(out.flagged_columns.is_empty());
        assert!((out.panel.value(0, 0) + 1.0).abs() < 1e-12);
        assert!(out.panel.value(1, 0).abs() < 1e-12);
        assert!((out.panel.value(2, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn znormalize_constant_column_flagged() {
        let p = VoltagePanel::new(vec![230.0; 3], vec![true; 3], 3, 1, 15, start()).unwrap();
        let out = znormalize(&p).unwrap();
        assert_eq!(out.flagged_columns, vec![0]);
        for m in 0..3 {
            assert_eq!(out.panel.value(m, 0), 0.0);
        }
    }

    #[test]
    fn znormalize_output_columns_standardized() {
        let p = day_panel(5, 1);
        let out = znormalize(&p).unwrap();
        for t in 0..p.steps() {
            if out.flagged_columns.contains(&t) {
                continue;
            }
            let vals: Vec<f64> = (0..5).map(|m| out.panel.value(m, t)).collect();
            let mean = vals.iter().sum::<f64>() / 5.0;
            let sd =
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
            assert!(mean.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
    }
}
