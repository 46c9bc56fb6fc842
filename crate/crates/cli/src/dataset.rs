//! Dataset synthesis and feature loading.
//!
//! Each record is built from a per-record seed derived deterministically from
//! the dataset seed and the record's (class, snr-index, record-index) slot,
//! so regenerating with the same seed reproduces every file byte for byte and
//! records are independent of how many other records exist.
//!
//! Signal classes are frame-structured: a class-specific power-boosted
//! synchronization block repeats at the class's frame rate (payload between
//! the blocks is fresh randomness), so the received power is modulated
//! periodically. That envelope period plants cyclic-frequency lines at the
//! frame rate and its harmonics — the structure the SCF crop exposes to the
//! classifier — while the payload keeps every class's spectrum noise-flat.
//! Signal records pass through a per-record Rayleigh multipath channel with
//! a slowly drifting gain (optional) and receive noise scaled against the
//! clean transmit power, so the stratum's nominal SNR is exact at the
//! transmitter while fading spreads the received SNR per record; the powers
//! behind that ratio are stored in the manifest for auditing.

use std::path::Path;

use cyclosense_core::features::{
    amplitude_phase_features, iq_features, normalize_feature, scf_crop_features,
    spectrum_features, FeatureKind, FeatureMatrix, FeatureMeta, NormalizeMethod,
};
use cyclosense_core::num_complex::Complex64;
use cyclosense_core::scf::fam_scf_magnitude;
use cyclosense_core::waveform::{
    apply_channel_detailed, generate_dsss, generate_noise, generate_ofdm, tile_signal,
    ChannelConfig, ComplexSignal, WaveformClass,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::config::ExperimentConfig;
use crate::dataio::{self, Manifest, ManifestEntry};
use crate::error::{CliError, Result};

/// Chip-code seed shared by every spread-spectrum record, playing the role
/// of a cell-wide scrambling code (the data bits vary per record).
const DSSS_CODE_SEED: u64 = 77;

/// Synchronization blocks are transmitted about 1 dB hotter than payload,
/// the way real downlinks boost their sync and reference signals. The
/// boosted block repeating at the frame rate modulates the received power
/// periodically, which is what plants usable frame-rate cyclic lines: the
/// envelope period survives noise far better than phase structure does.
/// The boost is kept small on purpose — it sets where the classifier's
/// accuracy-vs-SNR transition lands, and a few percent of envelope
/// modulation over a 16384-sample record puts the knee mid-grid instead of
/// saturating the whole 1-15 dB range.
const PILOT_POWER_BOOST: f64 = 1.25;

/// Gsm frame layout (2048 samples): 2 fixed boosted sync symbols + 14
/// random payload symbols of prefix-free 128-carrier multicarrier
/// (256 + 1792 samples). The boosted block repeats every 2048 samples, so
/// the envelope line sits at 1/2048 with its first harmonic already outside
/// a 16-row crop — a single-line signature.
const GSM_SUBCARRIERS: usize = 128;
const GSM_PILOT_SYMBOLS: usize = 2;
const GSM_PAYLOAD_SYMBOLS: usize = 14;
const GSM_PILOT_SEED: u64 = 101;

/// Umts frame layout: 128 bits spread by 16 (2048-sample frame), all of it
/// repeated — a beacon-like fully periodic channel. Its chip code also
/// repeats every symbol, which is the feature the classical detector tests;
/// its classification signature is the chip-comb shape of the spectrum, not
/// an envelope line.
const UMTS_FRAME_BITS: usize = 128;

/// Lte frame layout (1280 samples): 2 fixed boosted sync symbols + 14
/// random payload symbols of CP-OFDM(64 subcarriers, 16-sample prefix), no
/// guard (continuous downlink). The frame rate does not divide the record
/// length, so the envelope line lands between two rows — a split-line
/// signature well separated from the other classes.
const LTE_PILOT_SYMBOLS: usize = 2;
const LTE_PAYLOAD_SYMBOLS: usize = 14;
const LTE_PILOT_SEED: u64 = 303;

/// Concatenates `boost * pilot ++ payload(rng)` frames until `record_len`
/// samples are available, then truncates and rescales by a deterministic
/// class constant so the expected record power is 1. The pilot block is
/// identical in every frame; payload blocks are drawn fresh per frame.
fn pilot_framed(
    record_len: usize,
    pilot: &ComplexSignal,
    rng: &mut ChaCha12Rng,
    mut payload: impl FnMut(&mut ChaCha12Rng) -> Result<ComplexSignal>,
) -> Result<ComplexSignal> {
    let boost = PILOT_POWER_BOOST.sqrt();
    let mut samples = Vec::with_capacity(record_len + pilot.len());
    let mut payload_len = 0usize;
    while samples.len() < record_len {
        samples.extend(pilot.samples.iter().map(|s| s * boost));
        if samples.len() >= record_len {
            break;
        }
        let block = payload(rng)?;
        payload_len = block.len();
        samples.extend_from_slice(&block.samples);
    }
    samples.truncate(record_len);
    // Expected frame power from unit-power pilot/payload blocks.
    let frame_len = (pilot.len() + payload_len) as f64;
    let power = (pilot.len() as f64 * PILOT_POWER_BOOST + payload_len as f64) / frame_len;
    let norm = 1.0 / power.sqrt();
    for s in &mut samples {
        *s *= norm;
    }
    Ok(ComplexSignal::new(samples))
}

/// Time-selective fading: on top of the static multipath taps, the channel
/// gain drifts over the record as a sum of `DOPPLER_PATHS` complex sinusoids
/// whose Doppler shifts span up to a per-record maximum drawn from
/// `DOPPLER_CYCLES_MIN..MAX` cycles per record. Slow drift leaves cyclic
/// lines sharp; faster drift smears each line over neighboring rows and
/// fills the lowest rows with signal-scaled clutter, capping how cleanly the
/// frame-rate signatures separate even at high SNR.
const DOPPLER_CYCLES_MIN: f64 = 0.25;
const DOPPLER_CYCLES_MAX: f64 = 0.75;
const DOPPLER_PATHS: usize = 8;

/// Unit-mean-power drifting channel gain sampled at every record instant.
fn doppler_gain(n: usize, rng: &mut ChaCha12Rng) -> Vec<Complex64> {
    use core::f64::consts::TAU;
    let n_dop = rng.gen_range(DOPPLER_CYCLES_MIN..DOPPLER_CYCLES_MAX);
    let norm = 1.0 / (DOPPLER_PATHS as f64).sqrt();
    let paths: Vec<(f64, f64)> = (0..DOPPLER_PATHS)
        .map(|_| {
            let aoa: f64 = rng.gen_range(0.0..TAU);
            let phase: f64 = rng.gen_range(0.0..TAU);
            (n_dop * aoa.cos(), phase)
        })
        .collect();
    (0..n)
        .map(|t| {
            let tt = t as f64 / n as f64;
            paths
                .iter()
                .map(|&(f, p)| Complex64::from_polar(norm, TAU * f * tt + p))
                .sum()
        })
        .collect()
}

/// Tolerance for the stored-power SNR audit, in dB.
pub const SNR_AUDIT_TOL_DB: f64 = 0.1;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-record seed: a hash chain over the dataset seed and the record's slot,
/// so every record draws from an independent stream regardless of generation
/// order or dataset size.
pub fn derive_record_seed(dataset_seed: u64, label: u8, snr_idx: usize, rec_idx: usize) -> u64 {
    let mut h = splitmix64(dataset_seed);
    h = splitmix64(h ^ label as u64);
    h = splitmix64(h ^ snr_idx as u64);
    h = splitmix64(h ^ rec_idx as u64);
    h
}

fn random_bits(n: usize, rng: &mut ChaCha12Rng) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

/// One clean, unit-power, frame-structured record of the given class.
///
/// The classes model cellular downlinks at the resolution the SCF crop can
/// see: wideband payloads whose spectra are all noise-flat, distinguished
/// by their frame cadence — repeating power-boosted synchronization blocks
/// modulate the envelope at the frame rate, planting cyclic lines there,
/// and the frame periods are pairwise distinct so the lines land on
/// distinct crop rows:
/// - `Gsm`: prefix-free multicarrier, 2048-sample frames, fixed boosted
///   2-symbol sync block — a single envelope line at 1/2048.
/// - `Umts`: direct-sequence spread spectrum (factor 16), fully periodic
///   2048-sample frames — flat envelope; its signature is the chip-comb
///   spectrum, plus the chip-code cyclic feature at 1/16 that the classical
///   detector tests.
/// - `Lte`: CP-OFDM (64 subcarriers, 16-sample prefix, 16-QAM), 1280-sample
///   frames, fixed boosted 2-symbol sync block — an envelope line at
///   1/1280, which falls between two rows of the record-rate grid.
/// - `Noise`: white circular Gaussian, no structure.
pub fn synthesize_clean(
    class: WaveformClass,
    record_len: usize,
    seed: u64,
) -> Result<ComplexSignal> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match class {
        WaveformClass::Noise => Ok(generate_noise(record_len, seed)?),
        WaveformClass::Gsm => {
            let pilot =
                generate_ofdm(GSM_SUBCARRIERS, 0, GSM_PILOT_SYMBOLS, 16, GSM_PILOT_SEED)?;
            pilot_framed(record_len, &pilot, &mut rng, |rng| {
                Ok(generate_ofdm(
                    GSM_SUBCARRIERS,
                    0,
                    GSM_PAYLOAD_SYMBOLS,
                    16,
                    rng.gen(),
                )?)
            })
        }
        WaveformClass::Umts => {
            let frame = generate_dsss(
                &random_bits(UMTS_FRAME_BITS, &mut rng),
                16,
                1,
                DSSS_CODE_SEED,
            )?;
            Ok(tile_signal(&frame, record_len)?)
        }
        WaveformClass::Lte => {
            let pilot = generate_ofdm(64, 16, LTE_PILOT_SYMBOLS, 16, LTE_PILOT_SEED)?;
            pilot_framed(record_len, &pilot, &mut rng, |rng| {
                Ok(generate_ofdm(64, 16, LTE_PAYLOAD_SYMBOLS, 16, rng.gen())?)
            })
        }
    }
}

/// A fully synthesized record plus the powers needed for SNR audits.
pub struct SynthesizedRecord {
    pub signal: ComplexSignal,
    /// Mean power of the clean transmitted signal (before fading); 0 for
    /// noise-class records, which have no signal component.
    pub signal_power: f64,
    /// Mean power of the additive noise component.
    pub noise_power: f64,
}

/// Synthesizes one record at the given nominal SNR. Signal classes pass
/// through static multipath taps plus a drifting per-record channel gain
/// (when `multipath` is set; a static scalar gain otherwise) and then noise
/// is added. The SNR is defined at the transmitter: noise power is scaled
/// against the clean (pre-channel) signal power, so
/// `signal_power / noise_power` equals the nominal SNR exactly while deep
/// fades push the received SNR of individual records below nominal — the
/// spread that makes low-SNR strata genuinely hard. Noise-class records are
/// unit-power noise regardless of the nominal SNR.
pub fn synthesize_record(
    class: WaveformClass,
    snr_db: f64,
    record_len: usize,
    multipath: bool,
    seed: u64,
) -> Result<SynthesizedRecord> {
    if class == WaveformClass::Noise {
        let signal = generate_noise(record_len, seed)?;
        let noise_power = signal.power();
        return Ok(SynthesizedRecord {
            signal,
            signal_power: 0.0,
            noise_power,
        });
    }
    let clean = synthesize_clean(class, record_len, seed)?;
    let signal_power = clean.power();
    let chan_seed = splitmix64(seed ^ 0xC4A2_11CE_5EED_0001);
    let chan = if multipath {
        ChannelConfig::new(f64::INFINITY, chan_seed)
    } else {
        ChannelConfig::flat(f64::INFINITY, chan_seed)
    };
    let (mut faded, _) = apply_channel_detailed(&clean, &chan)?;
    if multipath {
        let mut rng = ChaCha12Rng::seed_from_u64(splitmix64(seed ^ 0xD0BB_1E55_0000_0002));
        let gain = doppler_gain(faded.len(), &mut rng);
        for (s, g) in faded.samples.iter_mut().zip(&gain) {
            *s *= g;
        }
    }
    let noise = generate_noise(record_len, splitmix64(seed ^ 0xA10E_0000_0000_0003))?;
    let noise_power = signal_power / 10.0f64.powf(snr_db / 10.0);
    let scale = (noise_power / noise.power()).sqrt();
    let mut samples = faded.samples;
    for (s, w) in samples.iter_mut().zip(&noise.samples) {
        *s += w * scale;
    }
    Ok(SynthesizedRecord {
        signal: ComplexSignal::new(samples),
        signal_power,
        noise_power,
    })
}

/// Generates the full dataset described by `cfg` under `dir`: one `.iq` file
/// per (class, snr, index) slot plus a manifest with checksums and realized
/// powers. Returns the manifest it wrote.
pub fn generate_dataset(cfg: &ExperimentConfig, dataset_seed: u64, dir: &Path) -> Result<Manifest> {
    let classes = cfg.classes()?;
    let mut entries = Vec::new();
    for class in classes {
        let class_dir = class.name().to_ascii_lowercase();
        for (snr_idx, &snr_db) in cfg.dataset.snr_db.iter().enumerate() {
            for rec_idx in 0..cfg.dataset.per_class_per_snr {
                let seed = derive_record_seed(dataset_seed, class.label(), snr_idx, rec_idx);
                let rec = synthesize_record(
                    class,
                    snr_db,
                    cfg.dataset.record_len,
                    cfg.dataset.multipath,
                    seed,
                )?;
                let rel = format!(
                    "{class_dir}/{}",
                    dataio::record_file_name(&class_dir, snr_db, rec_idx, "iq")
                );
                dataio::write_iq(&dir.join(&rel), &rec.signal)?;
                entries.push(dataio::entry_for_file(
                    dir,
                    &rel,
                    "iq",
                    class.label(),
                    snr_db,
                    seed,
                    format!("{}", rec.signal.len()),
                    rec.signal_power,
                    rec.noise_power,
                )?);
            }
        }
    }
    let manifest = Manifest { entries };
    manifest.save(dir)?;
    Ok(manifest)
}

/// Checks every signal record's stored powers against its nominal SNR:
/// `10 log10(signal_power / noise_power)` must sit within
/// [`SNR_AUDIT_TOL_DB`] of the manifest SNR. Noise-class records (signal
/// power 0) and imported records (powers NaN) are skipped.
pub fn audit_snr(manifest: &Manifest) -> Result<()> {
    for e in &manifest.entries {
        if e.signal_power.is_nan() || e.noise_power.is_nan() {
            continue;
        }
        if e.signal_power == 0.0 {
            continue;
        }
        let realized = 10.0 * (e.signal_power / e.noise_power).log10();
        if (realized - e.snr_db).abs() > SNR_AUDIT_TOL_DB {
            return Err(CliError::data(format!(
                "{}: realized SNR {realized:.3} dB differs from nominal {} dB by more than {} dB",
                e.path, e.snr_db, SNR_AUDIT_TOL_DB
            )));
        }
    }
    Ok(())
}

/// Computes the configured feature representation for one record that is
/// already in memory. SCF features run the estimator and crop; the raw kinds
/// window the first `features.window_len` samples. All features are max-abs
/// normalized.
pub fn feature_from_signal(
    signal: &ComplexSignal,
    cfg: &ExperimentConfig,
    kind: FeatureKind,
    meta: FeatureMeta,
) -> Result<FeatureMatrix> {
    let mut feature = match kind {
        FeatureKind::ScfCrop => {
            let scf = fam_scf_magnitude(signal, &cfg.fam())?;
            let rows = effective_crop(cfg.features.crop_rows, scf.values.rows());
            let cols = effective_crop(cfg.features.crop_cols, scf.values.cols());
            scf_crop_features(&scf, rows, cols, meta)?
        }
        FeatureKind::Iq => iq_features(signal, cfg.features.window_len, meta)?,
        FeatureKind::AmplitudePhase => {
            amplitude_phase_features(signal, cfg.features.window_len, meta)?
        }
        FeatureKind::SpectrumReIm => spectrum_features(signal, cfg.features.window_len, meta)?,
    };
    normalize_feature(&mut feature.values, NormalizeMethod::MaxAbs);
    Ok(feature)
}

/// A crop size of 0 means "keep everything".
pub fn effective_crop(configured: usize, available: usize) -> usize {
    if configured == 0 {
        available
    } else {
        configured.min(available)
    }
}

/// Loads every record in a manifest and computes its features.
pub fn load_features(
    manifest: &Manifest,
    dir: &Path,
    cfg: &ExperimentConfig,
    kind: FeatureKind,
) -> Result<Vec<FeatureMatrix>> {
    manifest
        .entries
        .iter()
        .map(|e| feature_for_entry(e, dir, cfg, kind))
        .collect()
}

pub fn feature_for_entry(
    entry: &ManifestEntry,
    dir: &Path,
    cfg: &ExperimentConfig,
    kind: FeatureKind,
) -> Result<FeatureMatrix> {
    if entry.kind != "iq" {
        return Err(CliError::data(format!(
            "{}: feature extraction needs raw records, got kind '{}'",
            entry.path, entry.kind
        )));
    }
    let signal = dataio::read_iq(&dir.join(&entry.path))?;
    feature_from_signal(&signal, cfg, kind, dataio::meta_for_entry(entry))
}
