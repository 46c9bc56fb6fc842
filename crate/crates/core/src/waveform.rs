//! Synthetic baseband waveforms and the propagation channel.
//!
//! Four record classes stand in for the over-the-air captures a sensing
//! pipeline would see: GMSK bursts for GSM-like signals, direct-sequence
//! spread spectrum for UMTS-like signals, cyclic-prefix OFDM for LTE-like
//! signals, and circularly-symmetric white Gaussian noise for unoccupied
//! spectrum. Each generator is deterministic for a given seed (ChaCha12) and
//! produces unit-power output, so [`apply_channel`] alone decides the SNR.
//!
//! Frequencies are normalized: one sample is the time unit, so rates are in
//! cycles/sample and `sample_rate_hz` defaults to 1.0.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

// ── Types ────────────────────────────────────────────────────────────────

/// Complex baseband record.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl ComplexSignal {
    /// Wraps samples at the normalized rate of 1.0 (cycles/sample units).
    pub fn new(samples: Vec<Complex64>) -> Self {
        ComplexSignal {
            samples,
            sample_rate_hz: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean squared magnitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Scales the record to unit mean power. A zero record is left unchanged
    /// (there is no finite scale that fixes it).
    pub fn normalize_power(&mut self) {
        let p = self.power();
        if p > 0.0 {
            let scale = 1.0 / p.sqrt();
            for s in &mut self.samples {
                *s *= scale;
            }
        }
    }
}

/// Record classes. The numeric labels are the on-disk / in-manifest encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum WaveformClass {
    Noise = 0,
    Gsm = 1,
    Umts = 2,
    Lte = 3,
}

impl WaveformClass {
    pub const ALL: [WaveformClass; 4] = [
        WaveformClass::Noise,
        WaveformClass::Gsm,
        WaveformClass::Umts,
        WaveformClass::Lte,
    ];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Result<Self> {
        match label {
            0 => Ok(WaveformClass::Noise),
            1 => Ok(WaveformClass::Gsm),
            2 => Ok(WaveformClass::Umts),
            3 => Ok(WaveformClass::Lte),
            other => Err(Error::invalid(format!("unknown class label {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WaveformClass::Noise => "Noise",
            WaveformClass::Gsm => "Gsm",
            WaveformClass::Umts => "Umts",
            WaveformClass::Lte => "Lte",
        }
    }
}

/// Multipath + AWGN channel parameters.
///
/// Tap delays are in samples, nondecreasing, starting at 0. The power profile
/// is per-tap average power in dB relative to the first tap; profiles are
/// renormalized so the expected total channel gain is 1. `snr_db` may be
/// `f64::INFINITY` to disable noise injection.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub num_taps: usize,
    pub tap_delays_samples: Vec<usize>,
    pub tap_power_profile_db: Vec<f64>,
    pub snr_db: f64,
    pub seed: u64,
}

impl ChannelConfig {
    /// Three-tap urban-ish profile: delays {0, 2, 5} samples at {0, -3, -6} dB.
    pub fn new(snr_db: f64, seed: u64) -> Self {
        ChannelConfig {
            num_taps: 3,
            tap_delays_samples: vec![0, 2, 5],
            tap_power_profile_db: vec![0.0, -3.0, -6.0],
            snr_db,
            seed,
        }
    }

    /// Single unit tap: AWGN-only channel.
    pub fn flat(snr_db: f64, seed: u64) -> Self {
        ChannelConfig {
            num_taps: 1,
            tap_delays_samples: vec![0],
            tap_power_profile_db: vec![0.0],
            snr_db,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_taps == 0 {
            return Err(Error::invalid("channel needs at least one tap"));
        }
        if self.tap_delays_samples.len() != self.num_taps
            || self.tap_power_profile_db.len() != self.num_taps
        {
            return Err(Error::invalid(format!(
                "num_taps = {} but {} delays / {} powers given",
                self.num_taps,
                self.tap_delays_samples.len(),
                self.tap_power_profile_db.len()
            )));
        }
        if self.tap_delays_samples[0] != 0 {
            return Err(Error::invalid("first tap delay must be 0"));
        }
        if self.tap_delays_samples.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("tap delays must be nondecreasing"));
        }
        if self.snr_db.is_nan() {
            return Err(Error::invalid("snr_db is NaN"));
        }
        Ok(())
    }
}

/// What [`apply_channel_detailed`] actually did to a record, for SNR audits.
#[derive(Debug, Clone)]
pub struct ChannelAudit {
    /// Rayleigh tap gains drawn for this record.
    pub taps: Vec<Complex64>,
    /// Mean power of the faded signal before noise injection.
    pub signal_power: f64,
    /// Mean power of the injected noise (0.0 when `snr_db` is infinite).
    pub noise_power: f64,
    /// signal_power / noise_power in dB (infinite when no noise was added).
    pub realized_snr_db: f64,
}

// ── Generators ───────────────────────────────────────────────────────────

/// GMSK modulator: NRZ bits -> Gaussian-filtered frequency pulse -> phase
/// integrator with modulation index 1/2, i.e. +/- pi/2 of phase per symbol.
///
/// `bits` must contain only 0/1 values, `samples_per_symbol >= 2`, and
/// `bt_product` in (0, 1]. Output is constant-envelope, continuous-phase, and
/// unit power; length is `bits.len() * samples_per_symbol`.
///
/// ```
/// use cyclosense_core::waveform::generate_gmsk;
/// let s = generate_gmsk(&[1, 0, 1, 1], 8, 0.3).unwrap();
/// assert_eq!(s.len(), 32);
/// assert!(s.samples.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
/// ```
pub fn generate_gmsk(bits: &[u8], samples_per_symbol: usize, bt_product: f64) -> Result<ComplexSignal> {
    if bits.is_empty() {
        return Err(Error::invalid("GMSK bit vector is empty"));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::invalid("GMSK bits must be 0 or 1"));
    }
    if samples_per_symbol < 2 {
        return Err(Error::invalid(format!(
            "samples_per_symbol must be >= 2, got {samples_per_symbol}"
        )));
    }
    if !(bt_product > 0.0 && bt_product <= 1.0) {
        return Err(Error::invalid(format!(
            "bt_product must lie in (0, 1], got {bt_product}"
        )));
    }

    let sps = samples_per_symbol;
    let n = bits.len() * sps;
    let kernel = gaussian_frequency_kernel(sps, bt_product);
    let half = (kernel.len() - 1) / 2;

    // NRZ sample-and-hold, then smooth with the Gaussian pulse. Zero padding
    // at the edges gives the usual ramp-in/ramp-out transient.
    let nrz: Vec<f64> = (0..n)
        .map(|t| if bits[t / sps] == 1 { 1.0 } else { -1.0 })
        .collect();
    let mut phase = 0.0f64;
    let gain = PI / (2.0 * sps as f64);
    let samples = (0..n)
        .map(|t| {
            let mut freq = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                let idx = t as isize + j as isize - half as isize;
                if idx >= 0 && (idx as usize) < n {
                    freq += k * nrz[idx as usize];
                }
            }
            phase += gain * freq;
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect();
    Ok(ComplexSignal::new(samples))
}

/// Discrete Gaussian frequency pulse spanning 4 symbols, unit DC gain, as used
/// by [`generate_gmsk`]. Exposed so tests and docs can reason about the exact
/// smoothing the modulator applies.
pub fn gaussian_frequency_kernel(samples_per_symbol: usize, bt_product: f64) -> Vec<f64> {
    let sps = samples_per_symbol as f64;
    // Std dev of the Gaussian in symbol durations for a given BT product.
    let sigma_t = (2.0f64.ln()).sqrt() / (2.0 * PI * bt_product);
    let half = 2 * samples_per_symbol;
    let mut kernel: Vec<f64> = (-(half as isize)..=half as isize)
        .map(|i| {
            let t = i as f64 / sps;
            (-0.5 * (t / sigma_t) * (t / sigma_t)).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    kernel
}

/// The fixed QPSK chip code a DSSS record reuses every symbol. Chips are
/// (+/-1 +/- i)/sqrt(2), drawn once from the seed; reusing the code each
/// symbol is what creates the cyclic feature at the symbol rate.
pub fn dsss_chip_code(spreading_factor: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let r = core::f64::consts::FRAC_1_SQRT_2;
    (0..spreading_factor)
        .map(|_| {
            let i = if rng.gen::<bool>() { r } else { -r };
            let q = if rng.gen::<bool>() { r } else { -r };
            Complex64::new(i, q)
        })
        .collect()
}

/// Direct-sequence spread spectrum: each bit is mapped to +/-1 and multiplied
/// by the fixed chip code, each chip held for `samples_per_chip` samples.
///
/// Output length is `bits.len() * spreading_factor * samples_per_chip`; the
/// envelope is constant (unit-modulus chips times unit-modulus data).
pub fn generate_dsss(
    bits: &[u8],
    spreading_factor: usize,
    samples_per_chip: usize,
    seed: u64,
) -> Result<ComplexSignal> {
    if bits.is_empty() {
        return Err(Error::invalid("DSSS bit vector is empty"));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::invalid("DSSS bits must be 0 or 1"));
    }
    if spreading_factor < 4 {
        return Err(Error::invalid(format!(
            "spreading_factor must be >= 4, got {spreading_factor}"
        )));
    }
    if samples_per_chip == 0 {
        return Err(Error::invalid("samples_per_chip must be >= 1"));
    }

    let code = dsss_chip_code(spreading_factor, seed);
    let mut samples = Vec::with_capacity(bits.len() * spreading_factor * samples_per_chip);
    for &bit in bits {
        let sym = if bit == 1 { 1.0 } else { -1.0 };
        for &chip in &code {
            let v = chip * sym;
            for _ in 0..samples_per_chip {
                samples.push(v);
            }
        }
    }
    Ok(ComplexSignal::new(samples))
}

/// Builds a CP-OFDM stream from explicit per-symbol payloads (one complex
/// value per subcarrier). No normalization is applied, so an all-zero payload
/// yields an all-zero signal. `generate_ofdm` wraps this with random QAM.
pub fn ofdm_modulate(
    payloads: &[Vec<Complex64>],
    num_subcarriers: usize,
    cp_len: usize,
) -> Result<ComplexSignal> {
    if !num_subcarriers.is_power_of_two() || num_subcarriers == 0 {
        return Err(Error::invalid(format!(
            "num_subcarriers must be a power of two, got {num_subcarriers}"
        )));
    }
    if cp_len >= num_subcarriers {
        return Err(Error::invalid(format!(
            "cp_len {cp_len} must be < num_subcarriers {num_subcarriers}"
        )));
    }
    if payloads.is_empty() {
        return Err(Error::invalid("OFDM payload list is empty"));
    }
    let n = num_subcarriers;
    let mut samples = Vec::with_capacity(payloads.len() * (n + cp_len));
    for payload in payloads {
        if payload.len() != n {
            return Err(Error::Shape {
                expected: n.to_string(),
                got: payload.len().to_string(),
                context: "ofdm_modulate payload",
            });
        }
        let mut body = payload.clone();
        crate::fft::fft(&mut body, crate::fft::Direction::Inverse)?;
        // Cyclic prefix: the last cp_len body samples, copied to the front.
        samples.extend_from_slice(&body[n - cp_len..]);
        samples.extend_from_slice(&body);
    }
    Ok(ComplexSignal::new(samples))
}

/// CP-OFDM with random square-QAM payloads on every subcarrier.
///
/// `qam_order` must be 4, 16, or 64. Output length is
/// `num_symbols * (num_subcarriers + cp_len)`, normalized to unit power.
/// Within each symbol the first `cp_len` samples equal the last `cp_len`
/// samples exactly (cyclic-prefix identity).
pub fn generate_ofdm(
    num_subcarriers: usize,
    cp_len: usize,
    num_symbols: usize,
    qam_order: usize,
    seed: u64,
) -> Result<ComplexSignal> {
    if num_symbols == 0 {
        return Err(Error::invalid("num_symbols must be >= 1"));
    }
    if !matches!(qam_order, 4 | 16 | 64) {
        return Err(Error::invalid(format!(
            "qam_order must be one of 4, 16, 64, got {qam_order}"
        )));
    }
    let side = (qam_order as f64).sqrt() as usize;
    // Mean constellation power for levels +/-1, +/-3, ..., +/-(side-1):
    // 2 * (side^2 - 1) / 3 per complex point.
    let scale = 1.0 / ((2.0 * (side * side - 1) as f64 / 3.0).sqrt());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let level = |rng: &mut ChaCha12Rng| {
        let k = rng.gen_range(0..side);
        (2 * k as i64 - (side as i64 - 1)) as f64
    };
    let payloads: Vec<Vec<Complex64>> = (0..num_symbols)
        .map(|_| {
            (0..num_subcarriers)
                .map(|_| Complex64::new(level(&mut rng) * scale, level(&mut rng) * scale))
                .collect()
        })
        .collect();
    let mut sig = ofdm_modulate(&payloads, num_subcarriers, cp_len)?;
    sig.normalize_power();
    Ok(sig)
}

/// Circularly-symmetric complex white Gaussian noise with unit total variance
/// (I and Q each N(0, 1/2)).
pub fn generate_noise(num_samples: usize, seed: u64) -> Result<ComplexSignal> {
    if num_samples == 0 {
        return Err(Error::invalid("num_samples must be >= 1"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let s = core::f64::consts::FRAC_1_SQRT_2;
    let samples = (0..num_samples)
        .map(|_| {
            let i: f64 = rng.sample(StandardNormal);
            let q: f64 = rng.sample(StandardNormal);
            Complex64::new(i * s, q * s)
        })
        .collect();
    Ok(ComplexSignal::new(samples))
}

// ── Channel ──────────────────────────────────────────────────────────────

/// Rayleigh multipath fading plus AWGN at an exact SNR.
///
/// Tap gains are complex Gaussian with variance from the (renormalized) power
/// profile; the noise vector is rescaled against the measured post-fading
/// signal power, so realized SNR equals `cfg.snr_db` by construction. With
/// `snr_db = f64::INFINITY` the output is the faded signal alone.
pub fn apply_channel(signal: &ComplexSignal, cfg: &ChannelConfig) -> Result<ComplexSignal> {
    apply_channel_detailed(signal, cfg).map(|(sig, _)| sig)
}

/// [`apply_channel`] plus the audit record (taps, powers, realized SNR).
pub fn apply_channel_detailed(
    signal: &ComplexSignal,
    cfg: &ChannelConfig,
) -> Result<(ComplexSignal, ChannelAudit)> {
    cfg.validate()?;
    let n = signal.len();
    let max_delay = *cfg.tap_delays_samples.last().unwrap();
    if n <= max_delay {
        return Err(Error::invalid(format!(
            "signal of {n} samples is shorter than the {max_delay}-sample channel spread"
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    // Per-tap variances from the dB profile, normalized to unit total power.
    let linear: Vec<f64> = cfg
        .tap_power_profile_db
        .iter()
        .map(|db| 10.0f64.powf(db / 10.0))
        .collect();
    let total: f64 = linear.iter().sum();
    let taps: Vec<Complex64> = linear
        .iter()
        .map(|&p| {
            let sigma = (p / total / 2.0).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sigma, im * sigma)
        })
        .collect();

    let mut faded = vec![Complex64::new(0.0, 0.0); n];
    for (tap, &delay) in taps.iter().zip(&cfg.tap_delays_samples) {
        for t in delay..n {
            faded[t] += tap * signal.samples[t - delay];
        }
    }
    let signal_power = faded.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;

    if cfg.snr_db.is_infinite() && cfg.snr_db > 0.0 {
        let out = ComplexSignal {
            samples: faded,
            sample_rate_hz: signal.sample_rate_hz,
        };
        let audit = ChannelAudit {
            taps,
            signal_power,
            noise_power: 0.0,
            realized_snr_db: f64::INFINITY,
        };
        return Ok((out, audit));
    }

    // Scale a unit-noise draw so measured signal power over measured noise
    // power hits the target exactly.
    let target_noise_power = signal_power / 10.0f64.powf(cfg.snr_db / 10.0);
    let s = core::f64::consts::FRAC_1_SQRT_2;
    let mut noise: Vec<Complex64> = (0..n)
        .map(|_| {
            let i: f64 = rng.sample(StandardNormal);
            let q: f64 = rng.sample(StandardNormal);
            Complex64::new(i * s, q * s)
        })
        .collect();
    let raw_power = noise.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
    let scale = (target_noise_power / raw_power).sqrt();
    for (f, w) in faded.iter_mut().zip(&mut noise) {
        *w *= scale;
        *f += *w;
    }
    let noise_power = target_noise_power;
    let audit = ChannelAudit {
        taps,
        signal_power,
        noise_power,
        realized_snr_db: 10.0 * (signal_power / noise_power).log10(),
    };
    Ok((
        ComplexSignal {
            samples: faded,
            sample_rate_hz: signal.sample_rate_hz,
        },
        audit,
    ))
}

/// Repeats a record until it covers `target_len` samples (truncating the last
/// copy). Used to impose frame-like periodicity on synthetic records.
pub fn tile_signal(signal: &ComplexSignal, target_len: usize) -> Result<ComplexSignal> {
    if signal.is_empty() {
        return Err(Error::invalid("cannot tile an empty signal"));
    }
    if target_len == 0 {
        return Err(Error::invalid("target_len must be >= 1"));
    }
    let samples = (0..target_len)
        .map(|t| signal.samples[t % signal.len()])
        .collect();
    Ok(ComplexSignal {
        samples,
        sample_rate_hz: signal.sample_rate_hz,
    })
}
