//! Full dataset assembly: network, profiles, switch schedule, power-flow
//! solve, ground-truth labels, and the on-disk manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{io, LabelSet, MeterId, NetworkTopology, VoltagePanel};
use crate::seed::derive_seed;
use crate::synth::network::{
    attach_switch_bar, build_network, NetworkTemplate, SwitchSpec, BACKUP_SOURCE, NOMINAL_PHASE_V,
    PRIMARY_SOURCE,
};
use crate::synth::powerflow::solve_panel;
use crate::synth::profiles::{generate_injections_grouped, mv_traces, Injections, ProfileConfig};
use crate::synth::schedule::schedule_switch_states;

/// Voltage sanity band; violations indicate a mis-scaled template.
const PU_MIN: f64 = 0.85;
const PU_MAX: f64 = 1.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchTruth {
    pub bar_id: String,
    pub labels: Vec<u32>,
}

/// A generated benchmark dataset with every ground-truth label.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub topology: NetworkTopology,
    pub panel: VoltagePanel,
    pub meter_ids: Vec<MeterId>,
    pub feeder_truth: LabelSet,
    pub phase_truth: LabelSet,
    pub switch_truth: Option<SwitchTruth>,
    pub injections: Injections,
    pub template: NetworkTemplate,
    pub profile: ProfileConfig,
    pub seed: u64,
}

/// Generates a labeled dataset. The top-level seed overrides the profile's
/// seed field so one value reproduces the whole artifact.
pub fn generate(
    tmpl: &NetworkTemplate,
    profile: &ProfileConfig,
    switch: Option<&SwitchSpec>,
    seed: u64,
) -> Result<Dataset> {
    let mut profile = profile.clone();
    profile.rng_seed = derive_seed(seed, "profiles");

    let mut topology = build_network(tmpl, derive_seed(seed, "network"))?;
    let mut switch_truth = None;
    let mut feeder_emf: Option<BTreeMap<String, Vec<f64>>> = None;

    let steps = profile.total_steps();
    if let Some(spec) = switch {
        let bar = attach_switch_bar(&mut topology, spec)?;
        let labels = schedule_switch_states(
            &bar,
            profile.days,
            profile.steps_per_day(),
            spec.dwell_range,
            spec.bias.as_deref(),
            derive_seed(seed, "schedule"),
        )?;
        // Per-feeder EMF traces: switch closed -> primary source, open -> backup.
        let sources = vec![PRIMARY_SOURCE.to_string(), BACKUP_SOURCE.to_string()];
        let traces = mv_traces(&profile, &sources);
        let primary_v = topology.transformer(PRIMARY_SOURCE).unwrap().nominal_phase_v[0];
        let backup_v = topology.transformer(BACKUP_SOURCE).unwrap().nominal_phase_v[0];
        let mut emf_map = BTreeMap::new();
        for (i, feeder) in bar.feeder_ids.iter().enumerate() {
            let mut trace = Vec::with_capacity(steps);
            for t in 0..steps {
                let state = crate::switchid::decode_state(&bar, labels[t])?;
                let closed = state[i] == 1;
                let v = if closed {
                    primary_v * (1.0 + traces[0][t])
                } else {
                    backup_v * (1.0 + traces[1][t])
                };
                trace.push(v);
            }
            emf_map.insert(feeder.clone(), trace);
        }
        feeder_emf = Some(emf_map);
        switch_truth = Some(SwitchTruth { bar_id: bar.bar_id.clone(), labels });
    }

    let meter_ids = topology.meter_ids();
    let feeder_order = topology.feeder_ids();
    let groups: Vec<usize> = meter_ids
        .iter()
        .map(|m| {
            let feeder = &topology.meters[m].feeder;
            feeder_order.iter().position(|f| f == feeder).unwrap_or(0)
        })
        .collect();
    let injections = generate_injections_grouped(&profile, &groups)?;

    let source_ids: Vec<String> = topology.transformers.iter().map(|t| t.id.clone()).collect();
    let traces = mv_traces(&profile, &source_ids);
    let source_scale: BTreeMap<String, Vec<f64>> = source_ids
        .iter()
        .zip(&traces)
        .map(|(id, tr)| (id.clone(), tr.iter().map(|d| 1.0 + d).collect()))
        .collect();

    let panel = solve_panel(
        &topology,
        &injections,
        profile.resolution_minutes,
        profile.start,
        profile.power_factor,
        Some(&source_scale),
        feeder_emf.as_ref(),
    )?;

    // Sanity band in per-unit.
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for m in 0..panel.meters() {
        for t in 0..panel.steps() {
            let v = panel.value(m, t) / NOMINAL_PHASE_V;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo < PU_MIN || hi > PU_MAX {
        return Err(Error::Config(format!(
            "voltages span [{lo:.4}, {hi:.4}] pu, outside [{PU_MIN}, {PU_MAX}]; template is mis-scaled"
        )));
    }

    let mut feeder_truth = LabelSet::new();
    let mut phase_truth = LabelSet::new();
    for (meter, info) in &topology.meters {
        feeder_truth.insert_known(meter.clone(), info.feeder.clone());
        phase_truth.insert_known(meter.clone(), info.phase.to_string());
    }

    Ok(Dataset {
        topology,
        panel,
        meter_ids,
        feeder_truth,
        phase_truth,
        switch_truth,
        injections,
        template: tmpl.clone(),
        profile,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub topology: String,
    pub voltages: String,
    pub feeder_labels: String,
    pub phase_labels: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_labels: Option<String>,
    /// Mean PV/load reference CSV for the dynamic time window.
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub template: NetworkTemplate,
    pub profile: ProfileConfig,
    pub files: ManifestFiles,
}

/// Writes all dataset files plus `manifest.json` into `dir`.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let files = ManifestFiles {
        topology: "topology.json".into(),
        voltages: "voltages.csv".into(),
        feeder_labels: "feeder_labels.json".into(),
        phase_labels: "phase_labels.json".into(),
        switch_labels: ds.switch_truth.as_ref().map(|_| "switch_labels.csv".to_string()),
        reference: "reference.csv".into(),
    };
    io::save_topology(&dir.join(&files.topology), &ds.topology)?;
    io::save_panel_csv(&dir.join(&files.voltages), &ds.panel, &ds.meter_ids)?;
    io::save_labels(&dir.join(&files.feeder_labels), &ds.feeder_truth)?;
    io::save_labels(&dir.join(&files.phase_labels), &ds.phase_truth)?;
    if let (Some(truth), Some(name)) = (&ds.switch_truth, &files.switch_labels) {
        io::save_switch_schedule(
            &dir.join(name),
            &ds.panel,
            &[(truth.bar_id.clone(), truth.labels.clone())],
        )?;
    }
    let (pv_ref, load_ref) = ds.injections.reference_series();
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(&files.reference))?);
    writeln!(f, "timestamp,pv,load")?;
    for t in 0..ds.panel.steps() {
        writeln!(
            f,
            "{},{},{}",
            ds.panel.timestamp(t)?.format("%Y-%m-%dT%H:%M:%S"),
            pv_ref[t],
            load_ref[t]
        )?;
    }
    let manifest = Manifest {
        seed: ds.seed,
        template: ds.template.clone(),
        profile: ds.profile.clone(),
        files,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

/// A dataset reloaded from a manifest.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: Manifest,
    pub topology: NetworkTopology,
    pub panel: VoltagePanel,
    pub meter_ids: Vec<MeterId>,
    pub feeder_truth: Option<LabelSet>,
    pub phase_truth: Option<LabelSet>,
    pub switch_truth: Option<SwitchTruth>,
    pub reference: Option<(Vec<f64>, Vec<f64>)>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<LoadedDataset> {
    let f = std::io::BufReader::new(std::fs::File::open(manifest_path)?);
    let manifest: Manifest = serde_json::from_reader(f)?;
    let dir = manifest_path.parent().map(PathBuf::from).unwrap_or_default();
    let topology = io::load_topology(&dir.join(&manifest.files.topology))?;
    let (panel, meter_ids) = io::load_panel_csv(&dir.join(&manifest.files.voltages))?;
    let feeder_truth = {
        let p = dir.join(&manifest.files.feeder_labels);
        p.exists().then(|| io::load_labels(&p)).transpose()?
    };
    let phase_truth = {
        let p = dir.join(&manifest.files.phase_labels);
        p.exists().then(|| io::load_labels(&p)).transpose()?
    };
    let switch_truth = match &manifest.files.switch_labels {
        Some(name) => {
            let bars = io::load_switch_schedule(&dir.join(name))?;
            bars.into_iter().next().map(|(bar_id, labels)| SwitchTruth { bar_id, labels })
        }
        None => None,
    };
    let reference = {
        let p = dir.join(&manifest.files.reference);
        if p.exists() {
            let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(&p)?;
            let mut pv = Vec::new();
            let mut load = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                pv.push(rec[1].parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
                load.push(rec[2].parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
            }
            Some((pv, load))
        } else {
            None
        }
    };
    Ok(LoadedDataset {
        manifest,
        topology,
        panel,
        meter_ids,
        feeder_truth,
        phase_truth,
        switch_truth,
        reference,
    })
}
