//! Experiment configuration: a single TOML-loadable struct with validated
//! defaults. Every field has a default so an empty file (or no file) is a
//! runnable configuration; command-line flags override loaded values.

use std::path::Path;

use cyclosense_core::features::FeatureKind;
use cyclosense_core::scf::{FamConfig, WindowKind};
use cyclosense_core::waveform::WaveformClass;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Signal synthesis and dataset layout.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Classes to synthesize, lowercase names. Order fixes label order.
    pub classes: Vec<String>,
    /// SNR grid in dB; one stratum of records per (class, snr) pair.
    pub snr_db: Vec<f64>,
    /// Records per class per SNR level.
    pub per_class_per_snr: usize,
    /// Samples per record.
    pub record_len: usize,
    /// Fraction of each stratum that goes to the training split.
    pub train_frac: f64,
    /// Pass signals through the three-tap Rayleigh multipath channel before
    /// adding noise; disable for clean additive-noise-only data.
    pub multipath: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            classes: vec!["noise".into(), "gsm".into(), "umts".into(), "lte".into()],
            snr_db: (1..=15).map(f64::from).collect(),
            per_class_per_snr: 40,
            record_len: 16384,
            train_frac: 0.6,
            multipath: true,
        }
    }
}

/// Input representation fed to the classifier.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// One of "scf", "iq", "ap", "spectrum".
    pub kind: String,
    /// SCF crop height (cyclic-frequency rows); 0 keeps every row.
    pub crop_rows: usize,
    /// SCF crop width (spectral-frequency columns); 0 keeps every column.
    pub crop_cols: usize,
    /// Sample window for the non-SCF feature kinds (must be a power of two
    /// for "spectrum").
    pub window_len: usize,
    /// Channelizer length for the SCF estimator.
    pub n_prime: usize,
    /// Channelizer hop for the SCF estimator.
    pub l_hop: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            kind: "scf".into(),
            crop_rows: 16,
            crop_cols: 16,
            window_len: 128,
            n_prime: 16,
            l_hop: 1,
        }
    }
}

/// Optimizer and schedule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without validation improvement; 0 trains
    /// the full schedule.
    pub patience: usize,
    /// Share of the training split held out for early stopping.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 30,
            batch_size: 32,
            patience: 5,
            val_fraction: 0.2,
        }
    }
}

/// Energy-detector calibration for the sensing stage and baseline.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Target false-alarm probability for threshold calibration.
    pub pfa: f64,
    /// Noise-only trials used to calibrate detector thresholds.
    pub n_cal: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { pfa: 0.1, n_cal: 2000 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub detect: DetectConfig,
}

impl ExperimentConfig {
    /// Loads from a TOML file, or returns defaults when no path is given.
    /// Unknown keys and type mismatches are configuration errors.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field against its documented domain.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.classes.is_empty() {
            return Err(CliError::config("dataset.classes must not be empty"));
        }
        for name in &d.classes {
            class_from_name(name)?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &d.classes {
            if !seen.insert(name.to_ascii_lowercase()) {
                return Err(CliError::config(format!("duplicate class '{name}'")));
            }
        }
        if d.snr_db.is_empty() {
            return Err(CliError::config("dataset.snr_db must not be empty"));
        }
        if d.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(CliError::config("dataset.snr_db values must be finite"));
        }
        if d.per_class_per_snr == 0 {
            return Err(CliError::config("dataset.per_class_per_snr must be at least 1"));
        }
        if d.record_len < 64 {
            return Err(CliError::config("dataset.record_len must be at least 64"));
        }
        if !(d.train_frac > 0.0 && d.train_frac < 1.0) {
            return Err(CliError::config(format!(
                "dataset.train_frac must lie strictly between 0 and 1, got {}",
                d.train_frac
            )));
        }

        let f = &self.features;
        self.feature_kind()?;
        if f.window_len == 0 || !f.window_len.is_power_of_two() {
            return Err(CliError::config(format!(
                "features.window_len must be a power of two, got {}",
                f.window_len
            )));
        }
        if f.window_len > d.record_len {
            return Err(CliError::config(
                "features.window_len must not exceed dataset.record_len",
            ));
        }
        if f.n_prime < 2 || !f.n_prime.is_power_of_two() {
            return Err(CliError::config(format!(
                "features.n_prime must be a power of two of at least 2, got {}",
                f.n_prime
            )));
        }
        if f.l_hop == 0 {
            return Err(CliError::config("features.l_hop must be at least 1"));
        }
        if f.crop_cols > f.n_prime {
            return Err(CliError::config(
                "features.crop_cols must not exceed the SCF width features.n_prime",
            ));
        }

        let t = &self.train;
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(CliError::config(format!(
                "train.learning_rate must be positive, got {}",
                t.learning_rate
            )));
        }
        if t.max_epochs == 0 {
            return Err(CliError::config("train.max_epochs must be at least 1"));
        }
        if t.batch_size == 0 {
            return Err(CliError::config("train.batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&t.val_fraction) {
            return Err(CliError::config(format!(
                "train.val_fraction must lie in [0, 1), got {}",
                t.val_fraction
            )));
        }

        let det = &self.detect;
        if !(det.pfa > 0.0 && det.pfa < 1.0) {
            return Err(CliError::config(format!(
                "detect.pfa must lie strictly between 0 and 1, got {}",
                det.pfa
            )));
        }
        if det.n_cal < 10 {
            return Err(CliError::config("detect.n_cal must be at least 10"));
        }
        Ok(())
    }

    pub fn feature_kind(&self) -> Result<FeatureKind> {
        FeatureKind::from_name(&self.features.kind).map_err(|_| {
            CliError::config(format!(
                "features.kind must be one of scf, iq, ap, spectrum; got '{}'",
                self.features.kind
            ))
        })
    }

    pub fn fam(&self) -> FamConfig {
        FamConfig {
            n_prime: self.features.n_prime,
            l_hop: self.features.l_hop,
            demod_window: WindowKind::Hamming,
            one_sided: true,
        }
    }

    /// Classes in configured order as core enum values.
    pub fn classes(&self) -> Result<Vec<WaveformClass>> {
        self.dataset.classes.iter().map(|n| class_from_name(n)).collect()
    }

    /// Serializes back to TOML (used to record the effective configuration
    /// beside experiment outputs).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Maps a configured class name (case-insensitive) onto the core enum.
pub fn class_from_name(name: &str) -> Result<WaveformClass> {
    WaveformClass::ALL
        .iter()
        .copied()
        .find(|c| c.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            CliError::config(format!(
                "unknown class '{name}' (known: noise, gsm, umts, lte)"
            ))
        })
}
