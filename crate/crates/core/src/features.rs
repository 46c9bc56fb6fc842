//! Classifier input features.
//!
//! The main representation is a centered crop of the SCF magnitude: the rows
//! nearest cyclic frequency zero across all (or the innermost) frequency
//! channels, where the class-specific cyclic lines concentrate. Three raw
//! time-domain alternatives of matching tensor rank are provided for
//! comparison sweeps: I/Q pairs, amplitude/phase pairs, and the real and
//! imaginary parts of a short spectrum. All of them yield a 2-D matrix plus
//! bookkeeping (`FeatureKind`, label, nominal SNR, seed) so downstream code
//! can treat features uniformly.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::matrix::Matrix;
use crate::scf::ScfMatrix;
use crate::waveform::ComplexSignal;
use crate::{Error, Result};

/// Which extractor produced a feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Centered SCF magnitude crop (rows = cyclic frequency, cols = channel).
    ScfCrop,
    /// Raw in-phase / quadrature samples, 2 x window.
    Iq,
    /// Instantaneous amplitude and phase, 2 x window.
    AmplitudePhase,
    /// Real and imaginary parts of the window's DFT, 2 x window.
    SpectrumReIm,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::ScfCrop => "scf",
            FeatureKind::Iq => "iq",
            FeatureKind::AmplitudePhase => "ap",
            FeatureKind::SpectrumReIm => "spectrum",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "scf" => Ok(FeatureKind::ScfCrop),
            "iq" => Ok(FeatureKind::Iq),
            "ap" => Ok(FeatureKind::AmplitudePhase),
            "spectrum" => Ok(FeatureKind::SpectrumReIm),
            other => Err(Error::invalid(format!("unknown feature kind '{other}'"))),
        }
    }
}

/// Record bookkeeping carried with every feature matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMeta {
    /// Class label (see `WaveformClass::label`).
    pub label: u8,
    /// Nominal dataset SNR in dB (the grid value the record was generated
    /// for; noise records carry the grid value of their slot).
    pub snr_db: f64,
    /// Seed the record was generated from.
    pub seed: u64,
}

/// A 2-D feature with its provenance.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub kind: FeatureKind,
    pub meta: FeatureMeta,
}

/// Cuts the `rows x cols` region nearest (alpha = 0, f = 0) out of an SCF
/// magnitude matrix, keeping the axes of the kept rows and columns.
///
/// Rows: for a one-sided matrix the first `rows` rows (alpha ascending from
/// 0); for a two-sided matrix (detected by a negative leading alpha) `rows`
/// rows centered on the alpha = 0 row. Columns: all of them when
/// `cols == n_freq`, otherwise the `cols` channels nearest DC, reordered to
/// ascending frequency (negative frequencies first).
pub fn crop_center(scf: &ScfMatrix, rows: usize, cols: usize) -> Result<ScfMatrix> {
    let (nr, nc) = (scf.values.rows(), scf.values.cols());
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("crop dimensions must be positive"));
    }
    if cols > nc {
        return Err(Error::Shape {
            expected: format!("cols <= {nc}"),
            got: format!("{cols}"),
            context: "crop_center columns",
        });
    }
    let two_sided = scf.alpha_axis.first().is_some_and(|&a| a < 0.0);
    let row_start = if two_sided {
        let center = scf
            .alpha_axis
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if center < rows / 2 || center + (rows - rows / 2) > nr {
            return Err(Error::Shape {
                expected: format!("{rows} rows around alpha = 0"),
                got: format!("{nr} rows, center {center}"),
                context: "crop_center rows",
            });
        }
        center - rows / 2
    } else {
        if rows > nr {
            return Err(Error::Shape {
                expected: format!("rows <= {nr}"),
                got: format!("{rows}"),
                context: "crop_center rows",
            });
        }
        0
    };

    // Channel picks in ascending-frequency order. Natural DFT order puts
    // negative frequencies in the upper half, so the lowest-|f| channels are
    // nc - cols/2 .. nc and 0 .. cols - cols/2.
    let col_picks: Vec<usize> = if cols == nc {
        (0..nc).collect()
    } else {
        let neg = cols / 2;
        (nc - neg..nc).chain(0..cols - neg).collect()
    };

    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for (ci, &src) in col_picks.iter().enumerate() {
            out.set(r, ci, scf.values.get(row_start + r, src));
        }
    }
    let alpha_axis = scf.alpha_axis[row_start..row_start + rows].to_vec();
    let freq_axis = col_picks
        .iter()
        .map(|&k| {
            let f = scf.freq_axis[k];
            if f >= 0.5 {
                f - 1.0
            } else {
                f
            }
        })
        .collect();
    Ok(ScfMatrix {
        values: out,
        alpha_axis,
        freq_axis,
    })
}

/// SCF crop packaged as a classifier feature.
pub fn scf_crop_features(
    scf: &ScfMatrix,
    rows: usize,
    cols: usize,
    meta: FeatureMeta,
) -> Result<FeatureMatrix> {
    let crop = crop_center(scf, rows, cols)?;
    Ok(FeatureMatrix {
        values: crop.values,
        kind: FeatureKind::ScfCrop,
        meta,
    })
}

fn leading_window(signal: &ComplexSignal, window_len: usize) -> Result<&[Complex64]> {
    if window_len == 0 {
        return Err(Error::invalid("window_len must be >= 1"));
    }
    if signal.len() < window_len {
        return Err(Error::Shape {
            expected: format!(">= {window_len} samples"),
            got: format!("{}", signal.len()),
            context: "feature window",
        });
    }
    Ok(&signal.samples[..window_len])
}

/// First `window_len` samples as a 2 x window matrix: row 0 in-phase, row 1
/// quadrature.
pub fn iq_features(
    signal: &ComplexSignal,
    window_len: usize,
    meta: FeatureMeta,
) -> Result<FeatureMatrix> {
    let win = leading_window(signal, window_len)?;
    let mut m = Matrix::zeros(2, window_len);
    for (i, s) in win.iter().enumerate() {
        m.set(0, i, s.re);
        m.set(1, i, s.im);
    }
    Ok(FeatureMatrix {
        values: m,
        kind: FeatureKind::Iq,
        meta,
    })
}

/// First `window_len` samples as instantaneous amplitude (row 0) and phase in
/// (-pi, pi] (row 1).
pub fn amplitude_phase_features(
    signal: &ComplexSignal,
    window_len: usize,
    meta: FeatureMeta,
) -> Result<FeatureMatrix> {
    let win = leading_window(signal, window_len)?;
    let mut m = Matrix::zeros(2, window_len);
    for (i, s) in win.iter().enumerate() {
        m.set(0, i, s.norm());
        m.set(1, i, s.im.atan2(s.re));
    }
    Ok(FeatureMatrix {
        values: m,
        kind: FeatureKind::AmplitudePhase,
        meta,
    })
}

/// DFT of the first `window_len` samples (power of two) as real (row 0) and
/// imaginary (row 1) parts.
pub fn spectrum_features(
    signal: &ComplexSignal,
    window_len: usize,
    meta: FeatureMeta,
) -> Result<FeatureMatrix> {
    if !window_len.is_power_of_two() {
        return Err(Error::invalid(format!(
            "spectrum window must be a power of two, got {window_len}"
        )));
    }
    let win = leading_window(signal, window_len)?;
    let mut buf = win.to_vec();
    crate::fft::fft(&mut buf, crate::fft::Direction::Forward)?;
    let mut m = Matrix::zeros(2, window_len);
    for (i, s) in buf.iter().enumerate() {
        m.set(0, i, s.re);
        m.set(1, i, s.im);
    }
    Ok(FeatureMatrix {
        values: m,
        kind: FeatureKind::SpectrumReIm,
        meta,
    })
}

/// Feature scaling applied before the classifier sees a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizeMethod {
    /// Divide by the largest absolute value (no-op on an all-zero matrix).
    MaxAbs,
    /// Subtract the mean, divide by the standard deviation (mean removal
    /// only when the matrix is constant).
    ZScore,
}

/// In-place normalization of a feature matrix.
pub fn normalize_feature(values: &mut Matrix, method: NormalizeMethod) {
    match method {
        NormalizeMethod::MaxAbs => {
            let peak = values.max_abs();
            if peak > 0.0 {
                let inv = 1.0 / peak;
                for v in values.data_mut() {
                    *v *= inv;
                }
            }
        }
        NormalizeMethod::ZScore => {
            let n = (values.rows() * values.cols()) as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv_std = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
            for v in values.data_mut() {
                *v = if var > 0.0 { (*v - mean) * inv_std } else { *v - mean };
            }
        }
    }
}
