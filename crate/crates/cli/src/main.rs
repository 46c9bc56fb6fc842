//! Command-line entry point for the cyclostationary sensing toolkit.
//!
//! Every subcommand reads an optional TOML configuration (defaults apply
//! when omitted), applies flag overrides, validates, and dispatches to the
//! matching runner. Exit codes: 0 success, 2 configuration/usage error,
//! 3 data/file error, 4 numerical check failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use cyclosense_cli::config::ExperimentConfig;
use cyclosense_cli::error::{CliError, Result};
use cyclosense_cli::{dataset, experiments};

#[derive(Parser)]
#[command(
    name = "cyclosense",
    version,
    about = "Cyclostationary spectrum sensing and signal identification toolkit",
    propagate_version = true
)]
struct Cli {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Flag overrides applied on top of the configuration file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Classes to use, comma separated (noise,gsm,umts,lte).
    #[arg(long, value_delimiter = ',', value_name = "NAME")]
    classes: Vec<String>,
    /// SNR grid in dB, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "DB", allow_hyphen_values = true)]
    snr_db: Vec<f64>,
    /// Records per class per SNR point.
    #[arg(long, value_name = "N")]
    per_class_per_snr: Option<usize>,
    /// Samples per record.
    #[arg(long, value_name = "N")]
    record_len: Option<usize>,
    /// Fraction of records assigned to the train split.
    #[arg(long, value_name = "FRAC")]
    train_frac: Option<f64>,
    /// Pass signals through the multipath channel (true) or AWGN only (false).
    #[arg(long, value_name = "BOOL")]
    multipath: Option<bool>,
    /// Input representation: scf, iq, ap, or spectrum.
    #[arg(long, value_name = "KIND")]
    feature: Option<String>,
    /// Cyclic-frequency rows kept from the SCF (0 = all).
    #[arg(long, value_name = "N")]
    crop_rows: Option<usize>,
    /// Frequency columns kept from the SCF (0 = all).
    #[arg(long, value_name = "N")]
    crop_cols: Option<usize>,
    /// Window length for the sample-domain representations.
    #[arg(long, value_name = "N")]
    window_len: Option<usize>,
    /// Channelizer length N' of the SCF estimator.
    #[arg(long, value_name = "N")]
    n_prime: Option<usize>,
    /// Channelizer hop L of the SCF estimator.
    #[arg(long, value_name = "N")]
    l_hop: Option<usize>,
    /// Optimizer learning rate.
    #[arg(long, value_name = "LR")]
    learning_rate: Option<f64>,
    /// Training epoch cap.
    #[arg(long, value_name = "N")]
    max_epochs: Option<usize>,
    /// Mini-batch size.
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    /// Early-stopping patience in epochs (0 disables).
    #[arg(long, value_name = "N")]
    patience: Option<usize>,
    /// Fraction of the train split held out for validation.
    #[arg(long, value_name = "FRAC")]
    val_fraction: Option<f64>,
    /// CFAR calibration false-alarm target.
    #[arg(long, value_name = "P")]
    pfa: Option<f64>,
    /// Noise records used for CFAR calibration.
    #[arg(long, value_name = "N")]
    n_cal: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if !self.classes.is_empty() {
            cfg.dataset.classes = self.classes.clone();
        }
        if !self.snr_db.is_empty() {
            cfg.dataset.snr_db = self.snr_db.clone();
        }
        if let Some(v) = self.per_class_per_snr {
            cfg.dataset.per_class_per_snr = v;
        }
        if let Some(v) = self.record_len {
            cfg.dataset.record_len = v;
        }
        if let Some(v) = self.train_frac {
            cfg.dataset.train_frac = v;
        }
        if let Some(v) = self.multipath {
            cfg.dataset.multipath = v;
        }
        if let Some(v) = &self.feature {
            cfg.features.kind = v.clone();
        }
        if let Some(v) = self.crop_rows {
            cfg.features.crop_rows = v;
        }
        if let Some(v) = self.crop_cols {
            cfg.features.crop_cols = v;
        }
        if let Some(v) = self.window_len {
            cfg.features.window_len = v;
        }
        if let Some(v) = self.n_prime {
            cfg.features.n_prime = v;
        }
        if let Some(v) = self.l_hop {
            cfg.features.l_hop = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.max_epochs {
            cfg.train.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.patience {
            cfg.train.patience = v;
        }
        if let Some(v) = self.val_fraction {
            cfg.train.val_fraction = v;
        }
        if let Some(v) = self.pfa {
            cfg.detect.pfa = v;
        }
        if let Some(v) = self.n_cal {
            cfg.detect.n_cal = v;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled record set with a manifest.
    Generate {
        /// Directory the records and manifest are written to.
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        /// Dataset seed; the same seed reproduces the records byte for byte.
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compute the full spectral correlation magnitude of records.
    Scf {
        /// Input .iq record files.
        #[arg(required = true, value_name = "RECORD")]
        inputs: Vec<PathBuf>,
        /// Directory the .mtx matrices are written to.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train the classifier on the train split and save a checkpoint.
    Train {
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        /// Checkpoint file written on success.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        /// Checkpoint file to evaluate.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Joint classification: one classifier over every class, noise included.
    Case1 {
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sense-then-classify: occupancy detector followed by a signal classifier.
    Case2 {
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train identical classifiers on each input representation and compare.
    SweepFeatures {
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train at several SCF crop heights and compare accuracy and epoch time.
    SweepCrop {
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare the learned detector against the cyclic-feature CFAR baseline.
    SenseCompare {
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute every report from its prediction log and verify they match.
    Report {
        /// Directory holding the experiment artifacts.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path.as_deref())?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            data_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&data_dir)?;
            let manifest = dataset::generate_dataset(&cfg, seed, &data_dir)?;
            println!(
                "wrote {} records to {} (seed {seed})",
                manifest.entries.len(),
                data_dir.display()
            );
            Ok(())
        }
        Command::Scf {
            inputs,
            out_dir,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&out_dir)?;
            experiments::run_scf(&cfg, &inputs, &out_dir)
        }
        Command::Train {
            data_dir,
            model,
            out_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&out_dir)?;
            experiments::run_train(&cfg, &data_dir, &model, &out_dir, seed)
        }
        Command::Eval {
            data_dir,
            model,
            out_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&out_dir)?;
            experiments::run_eval(&cfg, &data_dir, &model, &out_dir, seed)
        }
        Command::Case1 {
            data_dir,
            out_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&out_dir)?;
            experiments::run_case1(&cfg, &data_dir, &out_dir, seed)
        }
        Command::Case2 {
            data_dir,
            out_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&out_dir)?;
            experiments::run_case2(&cfg, &data_dir, &out_dir, seed)
        }
        Command::SweepFeatures {
            data_dir,
            out_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&out_dir)?;
            experiments::run_feature_sweep(&cfg, &data_dir, &out_dir, seed)
        }
        Command::SweepCrop {
            data_dir,
            out_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&out_dir)?;
            experiments::run_crop_sweep(&cfg, &data_dir, &out_dir, seed)
        }
        Command::SenseCompare {
            data_dir,
            out_dir,
            seed,
            overrides,
        } => {
            let cfg = load_config(&cli.config, &overrides)?;
            ensure_dir(&out_dir)?;
            experiments::run_sense_compare(&cfg, &data_dir, &out_dir, seed)
        }
        Command::Report { out_dir } => {
            let verified = experiments::run_report(&out_dir)?;
            for v in &verified {
                println!("{v}: report matches its prediction log");
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
