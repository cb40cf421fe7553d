//! Subcommand implementations behind the `lvtopo` binary, exposed as a
//! library so integration tests can drive them directly.

use std::io::Write;
use std::path::{Path, PathBuf};

use lvtopo::assign::AssignMethod;
use lvtopo::config::ConfigFile;
use lvtopo::error::{Error, Result};
use lvtopo::metrics;
use lvtopo::metrics::experiment::{self, ExperimentSpec};
use lvtopo::model::{io as model_io, LabelSet};
use lvtopo::pipeline::{self, PipelineData, PipelineOptions};
use lvtopo::synth;

/// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 pipeline failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::Toml(_) => 1,
        Error::Stage { .. } => 3,
        _ => 2,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(Error::from)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// `lvtopo generate`: build a synthetic dataset and write it with a manifest.
pub fn cmd_generate(config_path: &Path, out_dir: &Path) -> Result<PathBuf> {
    let cfg = ConfigFile::load(config_path)?;
    let network = cfg.require_network()?;
    let profile = cfg.profiles.clone().unwrap_or_default();
    let ds = synth::generate(network, &profile, cfg.switch.as_ref(), cfg.seed)?;

    // Corruption is part of the emitted artifact so downstream runs see the
    // same degraded data the experiment intends.
    let mut ds = ds;
    if let Some(c) = &cfg.corruption {
        if c.noise_sd > 0.0 {
            ds.panel = synth::inject_noise(&ds.panel, c.noise_sd, cfg.seed)?;
        }
        if c.missing_fraction > 0.0 {
            ds.panel = synth::inject_missing(&ds.panel, c.missing_fraction, c.missing_mode, cfg.seed)?;
        }
    }
    synth::write_dataset(out_dir, &ds)?;
    Ok(out_dir.join("manifest.json"))
}

#[derive(Debug, Default, Clone)]
pub struct PipelineOverrides {
    pub config: Option<PathBuf>,
    pub time_filter: Option<bool>,
    pub k: Option<usize>,
    pub method: Option<AssignMethod>,
    pub sm_cap: Option<usize>,
    pub known_feeders: Option<PathBuf>,
}

/// `lvtopo pipeline`: run the three stages against a dataset manifest.
pub fn cmd_pipeline(
    manifest: &Path,
    out_dir: &Path,
    overrides: &PipelineOverrides,
) -> Result<pipeline::PipelineReport> {
    let loaded = synth::load_dataset(manifest)?;
    let seed = loaded.manifest.seed;
    let mut opts: PipelineOptions = match &overrides.config {
        Some(path) => ConfigFile::load(path)?.pipeline_options(),
        None => PipelineOptions::default(),
    };
    opts.seed = seed;
    if let Some(tf) = overrides.time_filter {
        opts.time_filter = tf;
    }
    if let Some(k) = overrides.k {
        opts.k = k;
    }
    if let Some(m) = overrides.method {
        opts.method = m;
    }
    if let Some(cap) = overrides.sm_cap {
        opts.sm_cap = Some(cap);
    }
    let mut data: PipelineData = loaded.into();
    if let Some(path) = &overrides.known_feeders {
        data.known_feeders = Some(model_io::load_labels(path)?);
    }

    let (report, corrected) = pipeline::run_pipeline(&data, &opts)?;

    std::fs::create_dir_all(out_dir)?;
    model_io::save_topology(&out_dir.join("corrected_topology.json"), &corrected)?;
    model_io::save_labels(&out_dir.join("feeder_labels_pred.json"), &report.feeder_labels)?;
    model_io::save_labels(&out_dir.join("phase_labels_pred.json"), &report.phase_labels)?;
    write_json(&out_dir.join("report.json"), &report)?;
    write_text(&out_dir.join("report.txt"), &report.render_text())?;
    Ok(report)
}

/// `lvtopo eval`: compare predicted labels against truth labels.
pub fn cmd_eval(predicted: &Path, truth: &Path, csv_out: Option<&Path>) -> Result<String> {
    let predicted = model_io::load_labels(predicted)?;
    let truth = model_io::load_labels(truth)?;
    let report = eval_report(&predicted, &truth)?;
    if let Some(path) = csv_out {
        let confusion = metrics::confusion(&predicted, &truth)?;
        let mut csv = String::from("predicted\\truth");
        for t in &confusion.truth_categories {
            csv.push_str(&format!(",{t}"));
        }
        csv.push('\n');
        for (p, row) in confusion.predicted_categories.iter().zip(&confusion.counts) {
            csv.push_str(p);
            for c in row {
                csv.push_str(&format!(",{c}"));
            }
            csv.push('\n');
        }
        write_text(path, &csv)?;
    }
    Ok(report)
}

fn eval_report(predicted: &LabelSet, truth: &LabelSet) -> Result<String> {
    let purity = metrics::purity(predicted, truth)?;
    let accuracy = metrics::aligned_accuracy(predicted, truth)?;
    let confusion = metrics::confusion(predicted, truth)?;
    let mut out = String::new();
    out.push_str(&format!("meters            {}\n", confusion.total));
    out.push_str(&format!("purity            {purity:.4}\n"));
    out.push_str(&format!("aligned accuracy  {accuracy:.4}\n"));
    out.push_str("confusion (rows = predicted, cols = truth):\n");
    out.push_str(&format!("{:>12}", ""));
    for t in &confusion.truth_categories {
        out.push_str(&format!("{t:>10}"));
    }
    out.push('\n');
    for (p, row) in confusion.predicted_categories.iter().zip(&confusion.counts) {
        out.push_str(&format!("{p:>12}"));
        for c in row {
            out.push_str(&format!("{c:>10}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// `lvtopo experiment`: run a seeded experiment spec and write its report.
pub fn cmd_experiment(
    spec_path: &Path,
    out_dir: &Path,
    emit_heatmap: bool,
) -> Result<experiment::ExperimentReport> {
    let text = std::fs::read_to_string(spec_path)?;
    let spec: ExperimentSpec = toml::from_str(&text)?;
    let report = experiment::run_experiment(&spec)?;
    std::fs::create_dir_all(out_dir)?;
    write_text(&out_dir.join("report.csv"), &report.to_csv())?;
    write_text(&out_dir.join("report.txt"), &report.render_text())?;
    write_json(&out_dir.join("report.json"), &report)?;
    if emit_heatmap {
        experiment::emit_heatmaps(&spec, spec.seeds[0], out_dir)?;
    }
    Ok(report)
}
