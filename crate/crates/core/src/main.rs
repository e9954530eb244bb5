use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use neurostream::autodiff::checkpoint::Checkpoint;
use neurostream::dataset::{load_csv, save_csv, Manifest};
use neurostream::dataset::{gen_synthetic, Dataset, SynthSpec};
use neurostream::features_io::{self, FeatureBlock};
use neurostream::harness::{self, ExperimentConfig};
use neurostream::hemisplit::{partition_check, LEFT, RIGHT};
use neurostream::model::{self, ModelConfig, ModelParams, Variant};
use neurostream::preprocess::{preprocess, PreprocConfig, PreprocRecording};
use neurostream::spectral::{spectral_features, SpectralConfig};
use neurostream::temporal::temporal_scan;
use neurostream::{Channel, Error, Result};

#[derive(Parser)]
#[command(name = "neurostream", version, about = "Bi-hemispheric EEG emotion classification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic labelled dataset.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; receives `<split>.csv` and its manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-reference, band-pass and delay-trim raw recordings.
    Preprocess {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectral features of pre-processed recordings (all 21 channels).
    Features {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write checkpoint, report and loss curve.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[command(flatten)]
        exp: ExpArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on labelled data.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        exp: ExpArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict labels and class probabilities.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        exp: ExpArgs,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate on each eighth of the recordings.
    TemporalScan {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[command(flatten)]
        exp: ExpArgs,
        /// Comma-separated variants to scan.
        #[arg(long, value_delimiter = ',', default_value = "mono,bi")]
        variants: Vec<Variant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare mono and bi over several seeds.
    Compare {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the full training objective (tiny model
    /// unless `--config` is given).
    Gradcheck {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long, default_value_t = 6)]
        frames: usize,
        #[arg(long, default_value_t = 3)]
        bins: usize,
        #[arg(long, default_value_t = 2)]
        batch: usize,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Print the electrode partition or a model's layer table.
    Inspect {
        #[arg(long)]
        partition: bool,
        /// Experiment config whose model to describe.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 300.0)]
        fs: f64,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long = "in", alias = "data")]
    input: PathBuf,
    /// Defaults to the CSV's sidecar `.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variant: Option<Variant>,
}

impl ExpArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        Ok(cfg)
    }
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_data(&self.input, self.manifest.as_deref())
    }
}

fn load_data(csv: &Path, manifest: Option<&Path>) -> Result<Dataset> {
    let m = manifest.map(Path::to_path_buf).unwrap_or_else(|| Manifest::path_for(csv));
    load_csv(csv, &m)
}

fn read_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

fn write(path: PathBuf, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, body)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_report(dir: &Path, report: &neurostream::EvalReport) -> Result<()> {
    write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    write(dir.join("confusion.csv"), report.confusion_csv(false))?;
    write(dir.join("confusion_pct.csv"), report.confusion_csv(true))?;
    if !report.loss_curve.is_empty() {
        write(dir.join("loss_curve.csv"), report.loss_curve_csv())?;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth { spec, seed, out } => {
            let spec: SynthSpec = serde_json::from_str(&fs::read_to_string(&spec)?)?;
            let ds = gen_synthetic(&spec, seed)?;
            fs::create_dir_all(&out)?;
            let path = out.join(format!("{}.csv", ds.split));
            save_csv(&ds, &path)?;
            eprintln!("wrote {} ({} recordings)", path.display(), ds.recordings.len());
        }
        Cmd::Preprocess { data, config, out } => {
            let cfg: PreprocConfig = read_json(config.as_deref())?;
            let ds = data.load()?;
            let recordings =
                ds.recordings.iter().map(|r| Ok(preprocess(r, &cfg)?.rec)).collect::<Result<Vec<_>>>()?;
            save_csv(&Dataset::new(recordings, ds.split)?, &out)?;
            eprintln!("wrote {}", out.display());
        }
        Cmd::Features { data, config, out } => {
            let cfg: SpectralConfig = read_json(config.as_deref())?;
            let ds = data.load()?;
            let blocks = ds
                .recordings
                .iter()
                .map(|r| {
                    let pr = PreprocRecording::prepared(r.clone());
                    Ok(FeatureBlock::from(&spectral_features(&pr, &cfg, &Channel::ALL)?))
                })
                .collect::<Result<Vec<_>>>()?;
            features_io::save(&out, &blocks)?;
            eprintln!("wrote {} ({} blocks)", out.display(), blocks.len());
        }
        Cmd::Train { train, val, exp, out } => {
            let cfg = exp.load()?;
            let (tr, va) = (load_data(&train, None)?, load_data(&val, None)?);
            let (params, report) = harness::train(&tr, &va, &cfg)?;
            fs::create_dir_all(&out)?;
            params.to_checkpoint().save(&out.join("model.ckpt"))?;
            write(out.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
            write_report(&out, &report)?;
            println!("validation accuracy {:.2}% over {} recordings", report.accuracy, report.n);
        }
        Cmd::Eval { data, model, exp, out } => {
            let cfg = exp.load()?;
            let params = ModelParams::from_checkpoint(&Checkpoint::load(&model)?)?;
            let report = harness::evaluate(&data.load()?, &params, &cfg)?;
            fs::create_dir_all(&out)?;
            write_report(&out, &report)?;
            println!("accuracy {:.2}% over {} recordings", report.accuracy, report.n);
        }
        Cmd::Predict { data, model, exp, out } => {
            let cfg = exp.load()?;
            let params = ModelParams::from_checkpoint(&Checkpoint::load(&model)?)?;
            let preds = harness::predict(&data.load()?, &params, &cfg)?;
            let mut w = csv::Writer::from_path(&out)?;
            let mut header = vec!["subject".to_string(), "trial".into(), "label".into()];
            header.extend(neurostream::Emotion::ALL.iter().map(|e| format!("p_{e}")));
            w.write_record(&header)?;
            for p in &preds {
                let mut row = vec![p.subject_id.clone(), p.trial_id.clone(), p.label.to_string()];
                row.extend(p.probabilities.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
            w.flush()?;
            eprintln!("wrote {} ({} predictions)", out.display(), preds.len());
        }
        Cmd::TemporalScan { train, val, exp, variants, out } => {
            let cfg = exp.load()?;
            let report = temporal_scan(&load_data(&train, None)?, &load_data(&val, None)?, &cfg, &variants)?;
            write(out, report.to_csv())?;
        }
        Cmd::Compare { train, val, exp, seeds, out } => {
            let cfg = exp.load()?;
            let table = harness::compare_variants(&load_data(&train, None)?, &load_data(&val, None)?, &cfg, seeds)?;
            write(out, table.to_csv())?;
            println!("bi − mono = {:.2} points", table.difference);
        }
        Cmd::Gradcheck { exp, frames, bins, batch, step, tolerance } => {
            let mut cfg = exp.load()?;
            if exp.config.is_none() {
                cfg.model = ModelConfig { conv_filters: 2, conv_kernel: 2, pool: 2, lstm_units: 2, dense_units: 3, ..cfg.model };
            }
            let r = model::grad_check_objective(cfg.variant, &cfg.model, frames, bins, batch, cfg.seed, step)?;
            println!(
                "{} objective: max relative error {:.3e}, max absolute error {:.3e} over {} coordinates ({} excluded at kinks)",
                cfg.variant, r.max_rel_error, r.max_abs_error, r.checked, r.excluded
            );
            if !(r.max_rel_error <= tolerance) {
                return Err(Error::Numerical(format!("gradient check exceeded tolerance {tolerance:e}")));
            }
        }
        Cmd::Inspect { partition, model, fs } => {
            if !partition && model.is_none() {
                return Err(Error::Config("inspect needs --partition or --model".into()));
            }
            if partition {
                let names = |s: &[Channel]| s.iter().map(|c| c.name()).collect::<Vec<_>>().join(" ");
                println!("left : {}", names(&LEFT));
                println!("right: {}", names(&RIGHT));
                let r = partition_check();
                println!("{r:#?}");
                if !r.ok() {
                    return Err(Error::Structural("partition invariants violated".into()));
                }
            }
            if let Some(p) = model {
                let cfg = ExperimentConfig::load(&p)?;
                cfg.spectral.validate(fs)?;
                let width = match cfg.variant {
                    Variant::Bi => LEFT.len(),
                    Variant::Mono => Channel::ALL.len(),
                };
                let n_features = width * cfg.spectral.retained_bins(fs).len();
                println!("{:<20} {:>16} {:>10}", "tensor", "shape", "values");
                for (name, shape) in cfg.model.tensor_shapes(cfg.variant, n_features) {
                    let dims = shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("×");
                    println!("{:<20} {:>16} {:>10}", name, dims, shape.iter().product::<usize>());
                }
                println!("param_count {}", model::param_count(&cfg.model, cfg.variant, n_features));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
