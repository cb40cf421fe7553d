//! The three-stage correction pipeline: switch-state identification, then
//! user-feeder identification (clustering, or label propagation when partial
//! recordings exist), then per-feeder phase identification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assign::{self, AssignMethod};
use crate::cluster;
use crate::correlate::CorrelationConfig;
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{
    LabelSet, MeterId, NetworkTopology, PhaseLabel, SwitchBarState, VoltagePanel,
};
use crate::select::{self, TimeWindow};
use crate::switchid::{self, ForestConfig};
use crate::synth::{Dataset, LoadedDataset, SwitchTruth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Apply the time-based selection window before every stage.
    pub time_filter: bool,
    /// Fixed window bounds (within-day slots) and sense.
    pub t1: u32,
    pub t2: u32,
    pub keep_inside: bool,
    pub correlation: CorrelationConfig,
    pub forest: ForestConfig,
    /// Neighbour count for the assignment path.
    pub k: usize,
    pub method: AssignMethod,
    /// Chronological fraction of columns used to train the switch classifier.
    pub train_fraction: f64,
    /// Optional cap on meters per feeder for the switch stage.
    pub sm_cap: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            time_filter: true,
            t1: 20,
            t2: 88,
            keep_inside: false,
            correlation: CorrelationConfig::feeder_preset(),
            forest: ForestConfig::default(),
            k: 1,
            method: AssignMethod::Mfp,
            train_fraction: 0.75,
            sm_cap: None,
            seed: 0,
        }
    }
}

impl PipelineOptions {
    pub fn window(&self) -> TimeWindow {
        TimeWindow::Fixed {
            t1: self.t1,
            t2: self.t2,
            sense: if self.keep_inside {
                select::WindowSense::Inside
            } else {
                select::WindowSense::Outside
            },
        }
    }
}

/// Everything a pipeline run consumes.
#[derive(Debug, Clone)]
pub struct PipelineData {
    pub topology: NetworkTopology,
    pub panel: VoltagePanel,
    pub meter_ids: Vec<MeterId>,
    pub feeder_truth: Option<LabelSet>,
    pub phase_truth: Option<LabelSet>,
    pub switch_truth: Option<SwitchTruth>,
    /// Partial user-feeder recordings; their presence selects the
    /// assignment path for stage 2.
    pub known_feeders: Option<LabelSet>,
}

impl From<Dataset> for PipelineData {
    fn from(ds: Dataset) -> Self {
        Self {
            topology: ds.topology,
            panel: ds.panel,
            meter_ids: ds.meter_ids,
            feeder_truth: Some(ds.feeder_truth),
            phase_truth: Some(ds.phase_truth),
            switch_truth: ds.switch_truth,
            known_feeders: None,
        }
    }
}

impl From<LoadedDataset> for PipelineData {
    fn from(ds: LoadedDataset) -> Self {
        Self {
            topology: ds.topology,
            panel: ds.panel,
            meter_ids: ds.meter_ids,
            feeder_truth: ds.feeder_truth,
            phase_truth: ds.phase_truth,
            switch_truth: ds.switch_truth,
            known_feeders: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMetric {
    pub stage: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub metrics: Vec<StageMetric>,
    pub notes: Vec<String>,
    pub switch_state: Option<SwitchBarState>,
    pub feeder_labels: LabelSet,
    pub phase_labels: LabelSet,
}

impl PipelineReport {
    pub fn metric(&self, stage: &str, metric: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.stage == stage && m.metric == metric)
            .map(|m| m.value)
    }

    /// Stable human-readable rendering (no wall-clock content).
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("pipeline report\n");
        out.push_str("===============\n");
        for m in &self.metrics {
            out.push_str(&format!("{:<8} {:<24} {:.4}\n", m.stage, m.metric, m.value));
        }
        if let Some(ss) = &self.switch_state {
            out.push_str(&format!(
                "switch   current state          {} -> {:?} (class {})\n",
                ss.bar_id, ss.state, ss.label
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

fn filtered_panel(data: &PipelineData, opts: &PipelineOptions) -> Result<(VoltagePanel, Vec<usize>)> {
    if opts.time_filter {
        let cols = select::selected_columns(&data.panel, &opts.window())?;
        Ok((data.panel.restrict_columns(&cols)?, cols))
    } else {
        Ok((data.panel.clone(), (0..data.panel.steps()).collect()))
    }
}

/// Runs the full three-stage pipeline, scoring each stage when ground truth
/// is available, and returns the corrected topology alongside the report.
pub fn run_pipeline(
    data: &PipelineData,
    opts: &PipelineOptions,
) -> Result<(PipelineReport, NetworkTopology)> {
    let mut metrics_out: Vec<StageMetric> = Vec::new();
    let mut notes: Vec<String> = Vec::new();

    let (panel_f, cols) = filtered_panel(data, opts).map_err(|e| e.in_stage("select"))?;

    // Stage 1: switch-state identification.
    let mut switch_state = None;
    match (&data.topology.switch_bars[..], &data.switch_truth) {
        ([], _) => notes.push("switch stage skipped: topology has no switch bars".into()),
        (_, None) => {
            notes.push("switch stage skipped: no recorded state history to train on".into())
        }
        (bars, Some(truth)) => {
            let bar = bars
                .iter()
                .find(|b| b.bar_id == truth.bar_id)
                .ok_or_else(|| {
                    Error::Config(format!("schedule references unknown bar {}", truth.bar_id))
                        .in_stage("switch")
                })?;
            let (state, acc) =
                run_switch_stage(data, &panel_f, &cols, bar, truth, opts).map_err(|e| e.in_stage("switch"))?;
            metrics_out.push(StageMetric {
                stage: "switch".into(),
                metric: "rf_accuracy".into(),
                value: acc,
            });
            switch_state = Some(state);
        }
    }

    // Stage 2: user-feeder identification.
    let feeder_labels = match &data.known_feeders {
        Some(known) => {
            let out = assign::assign(
                &panel_f,
                &data.meter_ids,
                known,
                opts.k,
                &opts.correlation,
                opts.method,
            )
            .map_err(|e| e.in_stage("feeder"))?;
            if let Some(truth) = &data.feeder_truth {
                let acc = metrics::exact_accuracy(&out, truth).map_err(|e| e.in_stage("feeder"))?;
                metrics_out.push(StageMetric {
                    stage: "feeder".into(),
                    metric: "accuracy".into(),
                    value: acc,
                });
            }
            out
        }
        None => {
            let k_s = data.topology.feeders.len().max(1);
            let result =
                cluster::identify_feeders(&panel_f, &data.meter_ids, k_s, &opts.correlation)
                    .map_err(|e| e.in_stage("feeder"))?;
            let mut labels = result.labels.clone();
            if let Some(truth) = &data.feeder_truth {
                let acc =
                    metrics::aligned_accuracy(&labels, truth).map_err(|e| e.in_stage("feeder"))?;
                let pur = metrics::purity(&labels, truth).map_err(|e| e.in_stage("feeder"))?;
                metrics_out.push(StageMetric {
                    stage: "feeder".into(),
                    metric: "aligned_accuracy".into(),
                    value: acc,
                });
                metrics_out.push(StageMetric {
                    stage: "feeder".into(),
                    metric: "purity".into(),
                    value: pur,
                });
                labels = rename_clusters(&labels, truth)?;
            } else {
                labels = rename_clusters_canonical(&labels, &data.topology);
            }
            labels
        }
    };

    // Stage 3: per-feeder phase identification.
    let mut phase_labels = LabelSet::new();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (row, meter) in data.meter_ids.iter().enumerate() {
        if let Some(label) = feeder_labels.label(meter) {
            groups.entry(label.to_string()).or_default().push(row);
        }
    }
    let mut namespaced_pred = LabelSet::new();
    let mut namespaced_truth = LabelSet::new();
    for (feeder_label, rows) in &groups {
        if rows.len() < 3 {
            notes.push(format!(
                "phase stage skipped for group {feeder_label}: fewer than 3 meters"
            ));
            for &row in rows {
                phase_labels.insert_with_confidence(data.meter_ids[row].clone(), "A", 0.0);
            }
            continue;
        }
        let sub = panel_f.restrict_rows(rows).map_err(|e| e.in_stage("phase"))?;
        let ids: Vec<MeterId> = rows.iter().map(|&r| data.meter_ids[r].clone()).collect();
        let result = cluster::identify_phases(&sub, &ids, &opts.correlation)
            .map_err(|e| e.in_stage("phase"))?;
        // Name clusters as phases.
        let group_truth = data
            .phase_truth
            .as_ref()
            .map(|t| t.filtered(|m| ids.iter().any(|i| i == m)));
        let named = match &group_truth {
            Some(truth) if truth.known_count() == ids.len() => {
                rename_clusters(&result.labels, truth)?
            }
            _ => rename_phase_clusters_by_size(&result.labels),
        };
        for meter in &ids {
            phase_labels.insert_with_confidence(
                meter.clone(),
                named.label(meter).unwrap_or("A"),
                result.labels.confidence(meter),
            );
            namespaced_pred.insert_known(
                meter.clone(),
                format!("{feeder_label}:{}", result.labels.label(meter).unwrap()),
            );
            if let Some(truth) = &data.phase_truth {
                if let Some(t) = truth.label(meter) {
                    namespaced_truth.insert_known(meter.clone(), format!("{feeder_label}:{t}"));
                }
            }
        }
    }
    if data.phase_truth.is_some() && !namespaced_pred.is_empty()
        && namespaced_pred.len() == namespaced_truth.len()
    {
        let pur = metrics::purity(&namespaced_pred, &namespaced_truth)
            .map_err(|e| e.in_stage("phase"))?;
        let acc = metrics::aligned_accuracy(&namespaced_pred, &namespaced_truth)
            .map_err(|e| e.in_stage("phase"))?;
        metrics_out.push(StageMetric {
            stage: "phase".into(),
            metric: "purity".into(),
            value: pur,
        });
        metrics_out.push(StageMetric {
            stage: "phase".into(),
            metric: "aligned_accuracy".into(),
            value: acc,
        });
    }

    // Corrected topology: recorded graph with corrected meter labels.
    let mut corrected = data.topology.clone();
    for (meter, info) in corrected.meters.iter_mut() {
        if let Some(f) = feeder_labels.label(meter) {
            info.feeder = f.to_string();
        }
        if let Some(p) = phase_labels.label(meter) {
            info.phase = match p {
                "A" => PhaseLabel::A,
                "B" => PhaseLabel::B,
                "C" => PhaseLabel::C,
                _ => info.phase,
            };
        }
    }

    Ok((
        PipelineReport {
            metrics: metrics_out,
            notes,
            switch_state,
            feeder_labels,
            phase_labels,
        },
        corrected,
    ))
}

fn run_switch_stage(
    data: &PipelineData,
    panel_f: &VoltagePanel,
    cols: &[usize],
    bar: &crate::model::SwitchBar,
    truth: &SwitchTruth,
    opts: &PipelineOptions,
) -> Result<(SwitchBarState, f64)> {
    if truth.labels.len() != data.panel.steps() {
        return Err(Error::DimensionMismatch {
            expected: data.panel.steps(),
            got: truth.labels.len(),
        });
    }
    let labels: Vec<u32> = cols.iter().map(|&c| truth.labels[c]).collect();
    let outcome = switch_train_eval(
        panel_f,
        &labels,
        &data.meter_ids,
        &data.topology,
        bar,
        opts.sm_cap,
        &opts.forest,
        opts.train_fraction,
        opts.seed,
        false,
    )?;
    let label = outcome.last_prediction;
    let state = switchid::decode_state(bar, label)?.to_vec();
    Ok((
        SwitchBarState { bar_id: bar.bar_id.clone(), state, label },
        outcome.rf_accuracy,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct SwitchCellOutcome {
    pub rf_accuracy: f64,
    pub gnb_accuracy: f64,
    pub last_prediction: u32,
}

/// One switch-identification cell for the experiment runner: time-select,
/// pick meters, balance, train RF (and optionally GNB), score the held-out
/// chronological tail.
#[allow(clippy::too_many_arguments)]
pub fn run_switch_experiment_cell(
    topology: &NetworkTopology,
    panel: &VoltagePanel,
    meter_ids: &[MeterId],
    truth: &SwitchTruth,
    window: &TimeWindow,
    time_filter: bool,
    sm_cap: Option<usize>,
    forest: &ForestConfig,
    seed: u64,
) -> Result<SwitchCellOutcome> {
    let bar = topology
        .bar(&truth.bar_id)
        .ok_or_else(|| Error::Config(format!("unknown bar {}", truth.bar_id)))?;
    if truth.labels.len() != panel.steps() {
        return Err(Error::DimensionMismatch {
            expected: panel.steps(),
            got: truth.labels.len(),
        });
    }
    let (panel_f, labels) = if time_filter {
        let cols = select::selected_columns(panel, window)?;
        let labels: Vec<u32> = cols.iter().map(|&c| truth.labels[c]).collect();
        (panel.restrict_columns(&cols)?, labels)
    } else {
        (panel.clone(), truth.labels.clone())
    };
    switch_train_eval(
        &panel_f, &labels, meter_ids, topology, bar, sm_cap, forest, 0.75, seed, true,
    )
}

#[allow(clippy::too_many_arguments)]
fn switch_train_eval(
    panel_f: &VoltagePanel,
    labels: &[u32],
    meter_ids: &[MeterId],
    topology: &NetworkTopology,
    bar: &crate::model::SwitchBar,
    sm_cap: Option<usize>,
    forest_cfg: &ForestConfig,
    train_fraction: f64,
    seed: u64,
    with_gnb: bool,
) -> Result<SwitchCellOutcome> {
    let (sel_panel, _chosen) =
        select::uniform_sm_selection(panel_f, meter_ids, topology, bar, sm_cap)?;
    let steps = sel_panel.steps();
    let split = ((steps as f64) * train_fraction) as usize;
    if split == 0 || split >= steps {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} leaves an empty split of {steps} columns"
        )));
    }

    let row_at = |t: usize| -> Vec<f64> {
        (0..sel_panel.meters())
            .map(|m| sel_panel.get(m, t).unwrap_or(f64::NAN))
            .collect()
    };
    let train_rows: Vec<(Vec<f64>, u32)> = (0..split).map(|t| (row_at(t), labels[t])).collect();
    let catalog: Vec<u32> = bar.encoding.clone();
    let balanced = select::balanced_sampling(&train_rows, &catalog, seed)?;
    let (mut matrix, y) = select::assemble_training_matrix(&balanced, &catalog)?;
    let means = select::impute_mean(&mut matrix);
    let mut cfg = forest_cfg.clone();
    cfg.rng_seed = crate::seed::derive_seed(seed, "forest") ^ forest_cfg.rng_seed;
    let forest = switchid::train_forest(&matrix, &y, &cfg)?;
    let gnb = if with_gnb { Some(switchid::train_gnb(&matrix, &y)?) } else { None };

    let mut rf_hits = 0usize;
    let mut gnb_hits = 0usize;
    let mut total = 0usize;
    let mut last_pred = 0u32;
    for t in split..steps {
        let mut row = row_at(t);
        select::apply_imputation(&mut row, &means);
        let (pred, _) = switchid::predict_forest(&forest, &row)?;
        total += 1;
        if pred == labels[t] {
            rf_hits += 1;
        }
        if let Some(g) = &gnb {
            if switchid::predict_gnb(g, &row)? == labels[t] {
                gnb_hits += 1;
            }
        }
        last_pred = pred;
    }
    Ok(SwitchCellOutcome {
        rf_accuracy: rf_hits as f64 / total as f64,
        gnb_accuracy: if with_gnb { gnb_hits as f64 / total as f64 } else { f64::NAN },
        last_prediction: last_pred,
    })
}

/// Renames predicted cluster labels to the truth class names via the optimal
/// alignment; unmatched clusters keep their index names.
fn rename_clusters(predicted: &LabelSet, truth: &LabelSet) -> Result<LabelSet> {
    let mapping = metrics::best_alignment(predicted, truth)?;
    let map: BTreeMap<&str, &str> = mapping
        .iter()
        .filter_map(|(p, t)| t.as_deref().map(|t| (p.as_str(), t)))
        .collect();
    let mut out = LabelSet::new();
    for meter in predicted.meters() {
        let raw = predicted.label(meter).unwrap();
        let label = map.get(raw).copied().unwrap_or(raw);
        out.insert_with_confidence(meter.clone(), label, predicted.confidence(meter));
    }
    Ok(out)
}

/// Without truth, clusters map onto feeder ids by descending size.
fn rename_clusters_canonical(predicted: &LabelSet, topo: &NetworkTopology) -> LabelSet {
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for meter in predicted.meters() {
        *sizes.entry(predicted.label(meter).unwrap()).or_default() += 1;
    }
    let mut order: Vec<&str> = sizes.keys().copied().collect();
    order.sort_by_key(|c| (usize::MAX - sizes[c], c.to_string()));
    let feeders = topo.feeder_ids();
    let map: BTreeMap<&str, String> = order
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let name = feeders.get(i).cloned().unwrap_or_else(|| format!("cluster{i}"));
            (c, name)
        })
        .collect();
    let mut out = LabelSet::new();
    for meter in predicted.meters() {
        let raw = predicted.label(meter).unwrap();
        out.insert_with_confidence(meter.clone(), map[raw].clone(), predicted.confidence(meter));
    }
    out
}

/// Without truth, phase clusters map onto A/B/C by descending size.
fn rename_phase_clusters_by_size(predicted: &LabelSet) -> LabelSet {
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for meter in predicted.meters() {
        *sizes.entry(predicted.label(meter).unwrap()).or_default() += 1;
    }
    let mut order: Vec<&str> = sizes.keys().copied().collect();
    order.sort_by_key(|c| (usize::MAX - sizes[c], c.to_string()));
    let names = ["A", "B", "C"];
    let map: BTreeMap<&str, &str> = order
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, names.get(i).copied().unwrap_or("C")))
        .collect();
    let mut out = LabelSet::new();
    for meter in predicted.meters() {
        let raw = predicted.label(meter).unwrap();
        out.insert_with_confidence(meter.clone(), map[raw], predicted.confidence(meter));
    }
    out
}
