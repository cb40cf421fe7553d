//! Seeded experiment runner: generate, corrupt, select, identify, score,
//! averaged over seeds per sweep point.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::assign;
use crate::cluster;
use crate::correlate::CorrelationConfig;
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{DistanceKind, LabelSet};
use crate::pipeline::{run_switch_experiment_cell, SwitchCellOutcome};
use crate::seed::rng_for;
use crate::select::{self, TimeWindow};
use crate::synth::{self, MissingMode, NetworkTemplate, ProfileConfig, SwitchSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Switch-state classification accuracy (RF and GNB).
    Switch,
    /// User-feeder identification without recordings (clustering).
    FeederCluster,
    /// User-feeder identification with partial recordings (KNN and MFP).
    Assign,
    /// Per-feeder phase identification (purity, filtered and unfiltered).
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Fraction of randomly missing points; value in [0, 1).
    MissingFraction,
    /// Meters per feeder available to the switch stage; 0 means all.
    SmCount,
    /// Measurement noise SD in volts.
    NoiseSd,
    /// Fraction of meters with unknown recordings (assign task).
    UnknownFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignSettings {
    pub k: usize,
    pub unknown_fraction: f64,
}

impl Default for AssignSettings {
    fn default() -> Self {
        Self { k: 1, unknown_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionSettings {
    pub time_filter: bool,
    pub t1: u32,
    pub t2: u32,
    pub keep_inside: bool,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self { time_filter: true, t1: 20, t2: 88, keep_inside: false }
    }
}

impl SelectionSettings {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub task: Task,
    pub seeds: Vec<u64>,
    #[serde(rename = "network")]
    pub template: NetworkTemplate,
    #[serde(rename = "profiles", default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub switch: Option<SwitchSpec>,
    #[serde(default)]
    pub correlation: CorrelationConfig,
    #[serde(default)]
    pub forest: crate::switchid::ForestConfig,
    #[serde(default)]
    pub selection: SelectionSettings,
    #[serde(default)]
    pub assign: AssignSettings,
    /// Baseline measurement noise applied to every generated panel.
    #[serde(default)]
    pub noise_sd: f64,
    /// Baseline missing-points fraction.
    #[serde(default)]
    pub missing_fraction: f64,
    /// Baseline cap on meters per feeder for the switch task (None = all).
    #[serde(default)]
    pub sm_cap: Option<usize>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Feeder whose meters the phase task clusters; defaults to the first.
    #[serde(default)]
    pub phase_feeder: Option<String>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("experiment needs at least one seed".into()));
        }
        if matches!(self.task, Task::Switch) && self.switch.is_none() {
            return Err(Error::Config("switch task needs a [switch] section".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep has no values".into()));
            }
            for &v in &sweep.values {
                match sweep.parameter {
                    SweepParameter::MissingFraction => {
                        if !(0.0..1.0).contains(&v) {
                            return Err(Error::Config(format!("missing fraction {v} outside [0,1)")));
                        }
                    }
                    SweepParameter::UnknownFraction => {
                        if !(0.0 < v && v < 1.0) {
                            return Err(Error::Config(format!("unknown fraction {v} outside (0,1)")));
                        }
                    }
                    SweepParameter::NoiseSd => {
                        if v < 0.0 {
                            return Err(Error::Config("noise SD must be >= 0".into()));
                        }
                    }
                    SweepParameter::SmCount => {
                        if v < 0.0 || v.fract() != 0.0 {
                            return Err(Error::Config(format!("SM count {v} must be a whole number")));
                        }
                    }
                }
            }
        }
        self.correlation.validate()?;
        self.profile.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sweep_value: Option<f64>,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub task: Task,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep_value,metric,mean,sd,n\n");
        for row in &self.rows {
            let sv = row.sweep_value.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{sv},{},{:.6},{:.6},{}", row.metric, row.mean, row.sd, row.n);
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("experiment: {} ({:?})\n", self.name, self.task);
        out.push_str(&format!(
            "{:<12} {:<24} {:>8} {:>8} {:>4}\n",
            "sweep", "metric", "mean", "sd", "n"
        ));
        for row in &self.rows {
            let sv = row
                .sweep_value
                .map(|v| format!("{v}"))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<12} {:<24} {:>8.4} {:>8.4} {:>4}\n",
                sv, row.metric, row.mean, row.sd, row.n
            ));
        }
        out
    }

    pub fn rows_for(&self, metric: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.metric == metric).collect()
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Cell {
    noise_sd: f64,
    missing_fraction: f64,
    sm_cap: Option<usize>,
    unknown_fraction: f64,
}

fn cell_for(spec: &ExperimentSpec, sweep_value: Option<f64>) -> Cell {
    let mut cell = Cell {
        noise_sd: spec.noise_sd,
        missing_fraction: spec.missing_fraction,
        sm_cap: spec.sm_cap,
        unknown_fraction: spec.assign.unknown_fraction,
    };
    if let (Some(sweep), Some(v)) = (&spec.sweep, sweep_value) {
        match sweep.parameter {
            SweepParameter::MissingFraction => cell.missing_fraction = v,
            SweepParameter::NoiseSd => cell.noise_sd = v,
            SweepParameter::UnknownFraction => cell.unknown_fraction = v,
            SweepParameter::SmCount => {
                cell.sm_cap = if v == 0.0 { None } else { Some(v as usize) }
            }
        }
    }
    cell
}

/// Runs the experiment grid: for each (sweep point, seed), generate ->
/// corrupt -> select -> identify -> score. Rows appear in sweep order with
/// one row per metric.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let sweep_points: Vec<Option<f64>> = match &spec.sweep {
        Some(sweep) => sweep.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };

    let mut rows = Vec::new();
    for sweep_value in sweep_points {
        let cell = cell_for(spec, sweep_value);
        // metric name -> per-seed values, in first-seen order
        let mut metric_names: Vec<String> = Vec::new();
        let mut per_metric: Vec<Vec<f64>> = Vec::new();
        for &seed in &spec.seeds {
            let scores = run_cell(spec, &cell, seed)?;
            for (name, value) in scores {
                match metric_names.iter().position(|m| *m == name) {
                    Some(i) => per_metric[i].push(value),
                    None => {
                        metric_names.push(name);
                        per_metric.push(vec![value]);
                    }
                }
            }
        }
        for (name, values) in metric_names.into_iter().zip(per_metric) {
            let (mean, sd) = mean_sd(&values);
            rows.push(ReportRow {
                sweep_value,
                metric: name,
                mean,
                sd,
                n: values.len(),
                per_seed: values,
            });
        }
    }
    Ok(ExperimentReport { name: spec.name.clone(), task: spec.task, rows })
}

fn run_cell(spec: &ExperimentSpec, cell: &Cell, seed: u64) -> Result<Vec<(String, f64)>> {
    let ds = synth::generate(&spec.template, &spec.profile, spec.switch.as_ref(), seed)?;
    let mut panel = ds.panel.clone();
    if cell.noise_sd > 0.0 {
        panel = synth::inject_noise(&panel, cell.noise_sd, seed)?;
    }
    if cell.missing_fraction > 0.0 {
        panel = synth::inject_missing(&panel, cell.missing_fraction, MissingMode::RandomPoints, seed)?;
    }

    match spec.task {
        Task::Switch => {
            let truth = ds.switch_truth.as_ref().expect("validated switch spec");
            let outcome: SwitchCellOutcome = run_switch_experiment_cell(
                &ds.topology,
                &panel,
                &ds.meter_ids,
                truth,
                &spec.selection.window(),
                spec.selection.time_filter,
                cell.sm_cap,
                &spec.forest,
                seed,
            )?;
            Ok(vec![
                ("rf_accuracy".into(), outcome.rf_accuracy),
                ("gnb_accuracy".into(), outcome.gnb_accuracy),
            ])
        }
        Task::FeederCluster => {
            let work = if spec.selection.time_filter {
                select::select_time(&panel, &spec.selection.window())?
            } else {
                panel
            };
            let k_s = ds.topology.feeders.len();
            let result =
                cluster::identify_feeders(&work, &ds.meter_ids, k_s, &spec.correlation)?;
            let acc = metrics::aligned_accuracy(&result.labels, &ds.feeder_truth)?;
            let pur = metrics::purity(&result.labels, &ds.feeder_truth)?;
            Ok(vec![("aligned_accuracy".into(), acc), ("purity".into(), pur)])
        }
        Task::Assign => {
            let work = if spec.selection.time_filter {
                select::select_time(&panel, &spec.selection.window())?
            } else {
                panel
            };
            let n = ds.meter_ids.len();
            let n_unknown = ((cell.unknown_fraction * n as f64).round() as usize).clamp(1, n - 1);
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = rng_for(seed, "unknown_subset");
            order.shuffle(&mut rng);
            let mut known = LabelSet::new();
            for (rank, &i) in order.iter().enumerate() {
                let meter = &ds.meter_ids[i];
                if rank < n_unknown {
                    known.insert_unknown(meter.clone());
                } else {
                    known.insert_known(meter.clone(), ds.feeder_truth.label(meter).unwrap());
                }
            }
            let score = |out: &LabelSet| -> f64 {
                let mut hit = 0usize;
                for &i in order.iter().take(n_unknown) {
                    let meter = &ds.meter_ids[i];
                    if out.label(meter) == ds.feeder_truth.label(meter) {
                        hit += 1;
                    }
                }
                hit as f64 / n_unknown as f64
            };
            let knn = assign::knn_assign(&work, &ds.meter_ids, &known, spec.assign.k, &spec.correlation)?;
            let mfp = assign::mfp_assign(&work, &ds.meter_ids, &known, spec.assign.k, &spec.correlation)?;
            Ok(vec![
                ("knn_accuracy".into(), score(&knn)),
                ("mfp_accuracy".into(), score(&mfp)),
            ])
        }
        Task::Phase => {
            let feeder = spec
                .phase_feeder
                .clone()
                .unwrap_or_else(|| ds.topology.feeder_ids()[0].clone());
            let rows: Vec<usize> = ds
                .meter_ids
                .iter()
                .enumerate()
                .filter(|(_, m)| ds.feeder_truth.label(m) == Some(feeder.as_str()))
                .map(|(i, _)| i)
                .collect();
            if rows.len() < 3 {
                return Err(Error::TooFewMeters { required: 3, got: rows.len() });
            }
            let ids: Vec<String> = rows.iter().map(|&i| ds.meter_ids[i].clone()).collect();
            let sub = panel.restrict_rows(&rows)?;
            let truth = ds.phase_truth.filtered(|m| ids.iter().any(|i| i == m));

            let filtered = select::select_time(&sub, &spec.selection.window())?;
            let res_f = cluster::identify_phases(&filtered, &ids, &spec.correlation)?;
            let res_u = cluster::identify_phases(&sub, &ids, &spec.correlation)?;
            Ok(vec![
                ("purity_filtered".into(), metrics::purity(&res_f.labels, &truth)?),
                ("purity_unfiltered".into(), metrics::purity(&res_u.labels, &truth)?),
                (
                    "accuracy_filtered".into(),
                    metrics::aligned_accuracy(&res_f.labels, &truth)?,
                ),
                (
                    "accuracy_unfiltered".into(),
                    metrics::aligned_accuracy(&res_u.labels, &truth)?,
                ),
            ])
        }
    }
}

/// Dumps MFP and Euclidean distance matrices for one seed of the spec's
/// dataset (the heatmap export).
pub fn emit_heatmaps(spec: &ExperimentSpec, seed: u64, dir: &std::path::Path) -> Result<()> {
    let ds = synth::generate(&spec.template, &spec.profile, spec.switch.as_ref(), seed)?;
    let mut panel = ds.panel.clone();
    if spec.noise_sd > 0.0 {
        panel = synth::inject_noise(&panel, spec.noise_sd, seed)?;
    }
    let work = if spec.selection.time_filter {
        select::select_time(&panel, &spec.selection.window())?
    } else {
        panel
    };
    std::fs::create_dir_all(dir)?;
    for kind in [DistanceKind::Mfp, DistanceKind::Euclidean] {
        let m = crate::correlate::distance_matrix(&work, &ds.meter_ids, kind, &spec.correlation)?;
        let name = match kind {
            DistanceKind::Mfp => "heatmap_mfp.csv",
            DistanceKind::Euclidean => "heatmap_euclidean.csv",
            DistanceKind::PccComplement => "heatmap_pcc.csv",
        };
        m.save_csv(&dir.join(name))?;
    }
    Ok(())
}
