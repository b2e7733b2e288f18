use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seamsentinel::classify::ClassifierModel;
use seamsentinel::cwt::{parse_scales, ScalogramFormat, WaveletSpec};
use seamsentinel::pipeline::{self, read_dataset, PipelineConfig, ScalogramRequest};
use seamsentinel::signal::{read_recording_header, Axis, Scenario};
use seamsentinel::{Error, Result};

/// Vibration-based condition monitoring for round-seam milling machines.
#[derive(Parser)]
#[command(name = "seamsentinel", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file with key=value lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// wear | defect | stability | belt
    #[arg(long, global = true)]
    scenario: Option<Scenario>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Accept artifacts produced under a different config.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Pgm,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic recordings.
    Simulate {
        #[arg(long, short)]
        out_dir: PathBuf,
    },
    /// Turn recordings into a labeled feature dataset.
    Featurize {
        #[arg(required = true)]
        recordings: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train the configured classifiers on a dataset.
    Train {
        dataset: PathBuf,
        #[arg(long, short)]
        out_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Score a model on the validation split of a dataset.
    Evaluate {
        model: PathBuf,
        dataset: PathBuf,
        /// Use every row instead of the validation split.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        json: bool,
    },
    /// Rank features of a forest model.
    Importance {
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Export a CWT scalogram of one recording axis.
    Scalogram {
        recording: PathBuf,
        /// gaussian[:order], morlet[:fc] or shannon[:fb:fc]
        #[arg(long, default_value = "morlet")]
        wavelet: String,
        /// `lo:hi:step` or comma-separated values.
        #[arg(long)]
        scales: String,
        #[arg(long)]
        axis: Option<Axis>,
        #[arg(long, default_value_t = 0.0)]
        start_s: f64,
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
        /// Defaults to the extension of `out`.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Classify every window of a recording.
    Predict {
        model: PathBuf,
        recording: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Default)]
struct Inherited {
    scenario: Option<Scenario>,
    seed: Option<u64>,
}

/// Precedence: command line, then config file, then the input artifact.
fn resolve(common: &Common, from: Inherited) -> Result<PipelineConfig> {
    let mut pairs = Vec::new();
    if let Some(seed) = from.seed {
        pairs.push(("seed".to_string(), seed.to_string()));
    }
    if let Some(path) = &common.config {
        pairs.extend(PipelineConfig::load(path)?);
    }
    if let Some(s) = common.scenario {
        pairs.push(("scenario".into(), s.name().into()));
    }
    if let Some(seed) = common.seed {
        pairs.push(("seed".into(), seed.to_string()));
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    PipelineConfig::from_pairs(&pairs, from.scenario)
}

fn from_recording(path: &Path) -> Result<Inherited> {
    let h = read_recording_header(path)?;
    Ok(Inherited {
        scenario: h.scenario,
        seed: h.seed,
    })
}

fn from_model(path: &Path) -> Result<Inherited> {
    let m = ClassifierModel::load(path)?;
    Ok(Inherited {
        scenario: m.header().scenario,
        seed: m.header().seed,
    })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn run(cli: Cli, common: &Common) -> Result<()> {
    match cli.command {
        Command::Simulate { out_dir } => {
            let cfg = resolve(common, Inherited::default())?;
            for p in pipeline::cmd_simulate(&cfg, &out_dir)? {
                println!("{}", p.display());
            }
        }
        Command::Featurize { recordings, out } => {
            let cfg = resolve(common, from_recording(&recordings[0])?)?;
            let f = pipeline::cmd_featurize(&recordings, &cfg, &out, common.force)?;
            for o in &f.skipped_offsets {
                eprintln!("warning: skipped degenerate window at {o} s");
            }
            let counts: Vec<String> = f
                .file
                .dataset
                .class_counts()
                .iter()
                .map(|(c, n)| format!("class {c}: {n}"))
                .collect();
            println!(
                "{}: {} rows x {} features ({})",
                out.display(),
                f.file.dataset.len(),
                f.file.dataset.n_features(),
                counts.join(", ")
            );
        }
        Command::Train {
            dataset,
            out_dir,
            json: as_json,
        } => {
            let file = read_dataset(&dataset)?;
            let cfg = resolve(
                common,
                Inherited {
                    scenario: file.dataset.scenario(),
                    seed: file.seed,
                },
            )?;
            let out = pipeline::cmd_train(&dataset, &cfg, &out_dir, common.force)?;
            if as_json {
                print!("{}", out.report.to_json());
            } else {
                print!("{}", out.report.to_text());
            }
        }
        Command::Evaluate {
            model,
            dataset,
            all,
            json: as_json,
        } => {
            let cfg = resolve(common, from_model(&model)?)?;
            let r = pipeline::cmd_evaluate(&model, &dataset, &cfg, all, common.force)?;
            if as_json {
                print!("{}", json(&r));
            } else {
                print!("{}", r.to_text());
            }
        }
        Command::Importance { model, json: as_json } => {
            let ranked = pipeline::cmd_importance(&model)?;
            if as_json {
                print!("{}", json(&ranked));
            } else {
                print!("{}", pipeline::importance_table(&ranked));
            }
        }
        Command::Scalogram {
            recording,
            wavelet,
            scales,
            axis,
            start_s,
            duration_s,
            out,
            format,
        } => {
            let axis = match axis {
                Some(a) => a,
                None => from_recording(&recording)?
                    .scenario
                    .map_or(Axis::Y, |s| s.default_axis()),
            };
            let format = match format {
                Some(Format::Csv) => ScalogramFormat::Csv,
                Some(Format::Pgm) => ScalogramFormat::Pgm,
                None if out.extension().is_some_and(|e| e == "pgm") => ScalogramFormat::Pgm,
                None => ScalogramFormat::Csv,
            };
            let req = ScalogramRequest {
                axis,
                wavelet: wavelet.parse::<WaveletSpec>()?,
                scales: parse_scales(&scales)?,
                start_s,
                duration_s,
                format,
            };
            let sc = pipeline::cmd_scalogram(&recording, &req, &out)?;
            println!(
                "{}: {} scales x {} samples, {}",
                out.display(),
                sc.n_scales(),
                sc.n_samples(),
                sc.wavelet()
            );
        }
        Command::Predict {
            model,
            recording,
            json: as_json,
        } => {
            let inherited = from_model(&model)?;
            let scenario = inherited.scenario;
            let cfg = resolve(common, inherited)?;
            let p = pipeline::cmd_predict(&model, &recording, &cfg, common.force)?;
            if as_json {
                print!("{}", json(&p));
            } else {
                print!("{}", p.to_text(scenario));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.common.clone();
    match run(cli, &common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
