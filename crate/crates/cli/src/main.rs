use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lvtopo_cli::{cmd_eval, cmd_experiment, cmd_generate, cmd_pipeline, exit_code, PipelineOverrides};

#[derive(Parser)]
#[command(
    name = "lvtopo",
    version,
    about = "Topology correction for LV distribution networks from smart-meter voltages"
)]
struct Cli {
    /// Upper bound on worker threads (the current implementation runs
    /// single-threaded, which satisfies any bound).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Knn,
    Mfp,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset from a TOML config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run switch, feeder, and phase identification against a manifest.
    Pipeline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional TOML config; flags below override its sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        time_filter: Option<OnOff>,
        /// Neighbour count for the assignment path.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Cap on meters per feeder in the switch stage.
        #[arg(long)]
        sm_cap: Option<usize>,
        /// Partial user-feeder recordings; switches stage 2 to assignment.
        #[arg(long)]
        known_feeders: Option<PathBuf>,
    },
    /// Score predicted labels against truth labels.
    Eval {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write the confusion matrix as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a seeded experiment spec and write mean/SD trend tables.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dump MFP and Euclidean distance matrices for the first seed.
        #[arg(long)]
        emit_heatmap: bool,
    },
}

fn run(cli: Cli) -> lvtopo::Result<()> {
    if cli.threads == 0 {
        return Err(lvtopo::Error::Config("--threads must be at least 1".into()));
    }
    match cli.command {
        Command::Generate { config, out } => {
            let manifest = cmd_generate(&config, &out)?;
            println!("dataset written; manifest at {}", manifest.display());
        }
        Command::Pipeline {
            manifest,
            out,
            config,
            time_filter,
            k,
            method,
            sm_cap,
            known_feeders,
        } => {
            let overrides = PipelineOverrides {
                config,
                time_filter: time_filter.map(|v| matches!(v, OnOff::On)),
                k,
                method: method.map(|m| match m {
                    MethodArg::Knn => lvtopo::assign::AssignMethod::Knn,
                    MethodArg::Mfp => lvtopo::assign::AssignMethod::Mfp,
                }),
                sm_cap,
                known_feeders,
            };
            let report = cmd_pipeline(&manifest, &out, &overrides)?;
            print!("{}", report.render_text());
            println!("outputs written to {}", out.display());
        }
        Command::Eval { predicted, truth, csv } => {
            let report = cmd_eval(&predicted, &truth, csv.as_deref())?;
            print!("{report}");
        }
        Command::Experiment { spec, out, emit_heatmap } => {
            let report = cmd_experiment(&spec, &out, emit_heatmap)?;
            print!("{}", report.render_text());
            println!("outputs written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; keep usage errors on exit code 1
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
