//! Dataset persistence: raw I/Q records, SCF/feature matrix containers,
//! model checkpoints, and the plain-text manifest that ties a dataset
//! directory together.
//!
//! All binary formats are little-endian with an explicit magic and version;
//! readers reject unknown magics and versions and report truncation with the
//! byte offset where data ran out. I/Q records store f64 pairs so a write
//! followed by a read is bit-exact. Matrix containers store f32 payloads
//! (read back within one f32 ulp); SCF containers carry the estimator
//! configuration so the cyclic/frequency axes can be rebuilt on import.
//! The manifest is one record per line, tab-separated, diff-able, with a
//! CRC32 (IEEE) of each file's complete contents.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use cyclosense_core::features::{FeatureKind, FeatureMatrix, FeatureMeta};
use cyclosense_core::matrix::Matrix;
use cyclosense_core::nn::{Cnn, ModelConfig};
use cyclosense_core::num_complex::Complex64;
use cyclosense_core::scf::{FamConfig, ScfMatrix, WindowKind};
use cyclosense_core::waveform::ComplexSignal;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{CliError, Result};

const IQ_MAGIC: &[u8; 4] = b"CSIQ";
const MATRIX_MAGIC: &[u8; 4] = b"CSMX";
const CHECKPOINT_MAGIC: &[u8; 4] = b"CSNN";
const FORMAT_VERSION: u16 = 1;

// --- CRC32 (IEEE 802.3, reflected, init/final 0xFFFFFFFF) ---

fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0usize;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

/// CRC32 of a byte slice (the IEEE polynomial used by zip/png/ethernet).
pub fn crc32(bytes: &[u8]) -> u32 {
    let table = crc32_table();
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = table[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

/// CRC32 of a file's complete contents.
pub fn crc32_file(path: &Path) -> Result<u32> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(crc32(&bytes))
}

// --- binary reader with offset-tracking errors ---

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Reader { bytes, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CliError::data(format!(
                "{}: truncated at byte {} (needed {} more, file has {})",
                self.path.display(),
                self.pos,
                n,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn magic(&mut self, expected: &[u8; 4], what: &str) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(CliError::data(format!(
                "{}: bad magic {:?}, not a {what} file",
                self.path.display(),
                got
            )));
        }
        let version = self.u16()?;
        if version != FORMAT_VERSION {
            return Err(CliError::data(format!(
                "{}: unsupported {what} version {version}",
                self.path.display()
            )));
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    f.write_all(bytes)?;
    Ok(())
}

// --- raw I/Q records ---

/// Writes an I/Q record: magic, version, sample count, then f64 (re, im)
/// pairs. Read-back is bit-exact.
pub fn write_iq(path: &Path, signal: &ComplexSignal) -> Result<()> {
    let mut buf = Vec::with_capacity(14 + signal.len() * 16);
    buf.extend_from_slice(IQ_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(signal.len() as u64).to_le_bytes());
    for s in &signal.samples {
        buf.extend_from_slice(&s.re.to_le_bytes());
        buf.extend_from_slice(&s.im.to_le_bytes());
    }
    write_file(path, &buf)
}

pub fn read_iq(path: &Path) -> Result<ComplexSignal> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if bytes.is_empty() {
        return Err(CliError::data(format!("{}: empty file", path.display())));
    }
    let mut r = Reader::new(&bytes, path);
    r.magic(IQ_MAGIC, "I/Q record")?;
    let n = r.u64()? as usize;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let re = r.f64()?;
        let im = r.f64()?;
        samples.push(Complex64::new(re, im));
    }
    Ok(ComplexSignal::new(samples))
}

// --- matrix containers ---

fn kind_code(kind: FeatureKind) -> u8 {
    match kind {
        FeatureKind::ScfCrop => 0,
        FeatureKind::Iq => 1,
        FeatureKind::AmplitudePhase => 2,
        FeatureKind::SpectrumReIm => 3,
    }
}

fn kind_from_code(code: u8, path: &Path) -> Result<FeatureKind> {
    Ok(match code {
        0 => FeatureKind::ScfCrop,
        1 => FeatureKind::Iq,
        2 => FeatureKind::AmplitudePhase,
        3 => FeatureKind::SpectrumReIm,
        other => {
            return Err(CliError::data(format!(
                "{}: unknown matrix kind code {other}",
                path.display()
            )))
        }
    })
}

fn window_code(kind: WindowKind) -> u8 {
    match kind {
        WindowKind::Hamming => 0,
        WindowKind::Rectangle => 1,
    }
}

fn window_from_code(code: u8, path: &Path) -> Result<WindowKind> {
    Ok(match code {
        0 => WindowKind::Hamming,
        1 => WindowKind::Rectangle,
        other => {
            return Err(CliError::data(format!(
                "{}: unknown window code {other}",
                path.display()
            )))
        }
    })
}

/// A matrix read back from disk: the payload plus whatever estimator
/// configuration the container carried (present only for SCF matrices).
#[derive(Debug)]
pub struct MatrixFile {
    pub kind: FeatureKind,
    pub values: Matrix,
    pub fam: Option<FamConfig>,
}

fn write_matrix_common(
    path: &Path,
    kind: FeatureKind,
    values: &Matrix,
    fam: Option<&FamConfig>,
) -> Result<()> {
    let (rows, cols) = (values.rows(), values.cols());
    let mut buf = Vec::with_capacity(28 + rows * cols * 4);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(kind_code(kind));
    buf.push(fam.is_some_and(|f| f.one_sided) as u8);
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    buf.extend_from_slice(&(fam.map_or(0, |f| f.n_prime) as u32).to_le_bytes());
    buf.extend_from_slice(&(fam.map_or(0, |f| f.l_hop) as u32).to_le_bytes());
    buf.push(fam.map_or(0, |f| window_code(f.demod_window)));
    buf.extend_from_slice(&[0u8; 3]);
    for &v in values.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_file(path, &buf)
}

/// Writes an SCF magnitude matrix with the estimator configuration that
/// produced it, so axes can be rebuilt on read.
pub fn write_scf_matrix(path: &Path, scf: &ScfMatrix, fam: &FamConfig) -> Result<()> {
    write_matrix_common(path, FeatureKind::ScfCrop, &scf.values, Some(fam))
}

/// Writes a feature matrix (any kind; SCF crops lose their axes, which the
/// classifier does not use).
pub fn write_feature_matrix(path: &Path, feature: &FeatureMatrix) -> Result<()> {
    write_matrix_common(path, feature.kind, &feature.values, None)
}

pub fn read_matrix(path: &Path) -> Result<MatrixFile> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if bytes.is_empty() {
        return Err(CliError::data(format!("{}: empty file", path.display())));
    }
    let mut r = Reader::new(&bytes, path);
    r.magic(MATRIX_MAGIC, "matrix")?;
    let kind = kind_from_code(r.u8()?, path)?;
    let one_sided = r.u8()? != 0;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let n_prime = r.u32()? as usize;
    let l_hop = r.u32()? as usize;
    let window = window_from_code(r.u8()?, path)?;
    r.take(3)?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let v = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
        data.push(v as f64);
    }
    let values = Matrix::from_vec(rows, cols, data)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let fam = (n_prime > 0).then_some(FamConfig {
        n_prime,
        l_hop,
        demod_window: window,
        one_sided,
    });
    Ok(MatrixFile { kind, values, fam })
}

/// Rebuilds an `ScfMatrix` (values plus axes) from an imported container.
pub fn scf_from_matrix_file(file: &MatrixFile, path: &Path) -> Result<ScfMatrix> {
    let fam = file.fam.as_ref().ok_or_else(|| {
        CliError::data(format!(
            "{}: matrix has no estimator configuration; not an SCF container",
            path.display()
        ))
    })?;
    let rows = file.values.rows();
    let p = if fam.one_sided { 2 * (rows - 1) } else { rows };
    let denom = (p * fam.l_hop) as f64;
    let alpha_axis: Vec<f64> = if fam.one_sided {
        (0..rows).map(|q| q as f64 / denom).collect()
    } else {
        (0..rows).map(|r| (r as f64 - (p / 2) as f64) / denom).collect()
    };
    let freq_axis: Vec<f64> = (0..file.values.cols())
        .map(|k| k as f64 / fam.n_prime as f64)
        .collect();
    Ok(ScfMatrix {
        values: file.values.clone(),
        alpha_axis,
        freq_axis,
    })
}

// --- model checkpoints ---

/// Saves a trained network: configuration followed by all parameters as f32.
/// Loading therefore reproduces weights within one f32 ulp.
pub fn save_checkpoint(path: &Path, model: &Cnn) -> Result<()> {
    let cfg = &model.cfg;
    let mut buf = Vec::with_capacity(64 + model.params.len() * 4);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(cfg.input_h as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.input_w as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.input_c as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.kernel_size as u32).to_le_bytes());
    buf.extend_from_slice(&cfg.leaky_slope.to_le_bytes());
    buf.extend_from_slice(&(cfg.dense_units as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.num_classes as u32).to_le_bytes());
    buf.extend_from_slice(&(cfg.conv_channels.len() as u32).to_le_bytes());
    for &c in &cfg.conv_channels {
        buf.extend_from_slice(&(c as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(model.params.len() as u64).to_le_bytes());
    for &p in &model.params {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    write_file(path, &buf)
}

pub fn load_checkpoint(path: &Path) -> Result<Cnn> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if bytes.is_empty() {
        return Err(CliError::data(format!("{}: empty file", path.display())));
    }
    let mut r = Reader::new(&bytes, path);
    r.magic(CHECKPOINT_MAGIC, "checkpoint")?;
    let input_h = r.u32()? as usize;
    let input_w = r.u32()? as usize;
    let input_c = r.u32()? as usize;
    let kernel_size = r.u32()? as usize;
    let leaky_slope = r.f64()?;
    let dense_units = r.u32()? as usize;
    let num_classes = r.u32()? as usize;
    let n_conv = r.u32()? as usize;
    let mut conv_channels = Vec::with_capacity(n_conv);
    for _ in 0..n_conv {
        conv_channels.push(r.u32()? as usize);
    }
    let cfg = ModelConfig {
        input_h,
        input_w,
        input_c,
        conv_channels,
        kernel_size,
        leaky_slope,
        dense_units,
        num_classes,
    };
    let mut model = Cnn::new(cfg)
        .map_err(|e| CliError::data(format!("{}: invalid model config: {e}", path.display())))?;
    let n_params = r.u64()? as usize;
    if n_params != model.params.len() {
        return Err(CliError::data(format!(
            "{}: parameter count {} does not match configuration ({})",
            path.display(),
            n_params,
            model.params.len()
        )));
    }
    for p in model.params.iter_mut() {
        *p = f32::from_le_bytes(r.take(4)?.try_into().unwrap()) as f64;
    }
    Ok(model)
}

// --- manifest ---

/// One dataset record: where it lives and how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path relative to the manifest's directory.
    pub path: String,
    /// "iq" for raw records, a `FeatureKind` name for matrices.
    pub kind: String,
    pub label: u8,
    pub snr_db: f64,
    pub seed: u64,
    /// "16384" for records, "8193x16" for matrices.
    pub shape: String,
    pub crc32: u32,
    /// Faded-signal and additive-noise powers at generation time; NaN when
    /// unknown (imported data) or not applicable (noise-class records store
    /// signal power 0).
    pub signal_power: f64,
    pub noise_power: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.tsv";
const MANIFEST_HEADER: &str = "# cyclosense-manifest v1";
const MANIFEST_COLUMNS: &str =
    "# path\tkind\tlabel\tsnr_db\tseed\tshape\tcrc32\tsignal_power\tnoise_power";

impl Manifest {
    /// Serializes to the documented tab-separated layout.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MANIFEST_HEADER);
        out.push('\n');
        out.push_str(MANIFEST_COLUMNS);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{:08x}\t{}\t{}\n",
                e.path, e.kind, e.label, e.snr_db, e.seed, e.shape, e.crc32,
                e.signal_power, e.noise_power
            ));
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.check_unique_paths()?;
        write_file(&dir.join(MANIFEST_NAME), self.to_text().as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 9 {
                return Err(CliError::data(format!(
                    "{}:{}: expected 9 tab-separated fields, got {}",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse_err = |what: &str| {
                CliError::data(format!("{}:{}: bad {what} field", path.display(), lineno + 1))
            };
            entries.push(ManifestEntry {
                path: fields[0].to_string(),
                kind: fields[1].to_string(),
                label: fields[2].parse().map_err(|_| parse_err("label"))?,
                snr_db: fields[3].parse().map_err(|_| parse_err("snr_db"))?,
                seed: fields[4].parse().map_err(|_| parse_err("seed"))?,
                shape: fields[5].to_string(),
                crc32: u32::from_str_radix(fields[6], 16).map_err(|_| parse_err("crc32"))?,
                signal_power: fields[7].parse().map_err(|_| parse_err("signal_power"))?,
                noise_power: fields[8].parse().map_err(|_| parse_err("noise_power"))?,
            });
        }
        let m = Manifest { entries };
        m.check_unique_paths()?;
        Ok(m)
    }

    fn check_unique_paths(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.path.as_str()) {
                return Err(CliError::data(format!("duplicate manifest path {}", e.path)));
            }
        }
        Ok(())
    }

    /// Record count per (label, snr) stratum, sorted by key.
    pub fn stratum_counts(&self) -> Vec<((u8, f64), usize)> {
        let mut counts: Vec<((u8, f64), usize)> = Vec::new();
        for e in &self.entries {
            match counts.iter_mut().find(|((l, s), _)| *l == e.label && *s == e.snr_db) {
                Some((_, n)) => *n += 1,
                None => counts.push(((e.label, e.snr_db), 1)),
            }
        }
        counts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        counts
    }

    /// Recomputes every file's CRC32 and compares with the recorded value.
    pub fn verify_checksums(&self, dir: &Path) -> Result<()> {
        for e in &self.entries {
            let got = crc32_file(&dir.join(&e.path))?;
            if got != e.crc32 {
                return Err(CliError::data(format!(
                    "{}: checksum mismatch (manifest {:08x}, file {:08x})",
                    e.path, e.crc32, got
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic dataset file name: class, SNR in dB (one decimal), record
/// index. Example: `gsm_snr+01.0_007.iq`.
pub fn record_file_name(class_name: &str, snr_db: f64, index: usize, ext: &str) -> String {
    format!("{class_name}_snr{snr_db:+05.1}_{index:03}.{ext}")
}

/// Parses `record_file_name` output back into (class, snr_db, index).
pub fn parse_record_file_name(file_name: &str) -> Option<(String, f64, usize)> {
    let stem = file_name.rsplit_once('.')?.0;
    let (rest, idx) = stem.rsplit_once('_')?;
    let (class, snr) = rest.rsplit_once("_snr")?;
    Some((class.to_string(), snr.parse().ok()?, idx.parse().ok()?))
}

/// Scans a directory tree for data files and reconstructs a manifest using
/// the file-name convention. Generation seeds and channel powers are not
/// recoverable from file contents, so they read back as 0 and NaN; this is
/// the import path for externally produced datasets.
pub fn build_manifest(dir: &Path) -> Result<Manifest> {
    let mut files: Vec<PathBuf> = Vec::new();
    collect_data_files(dir, dir, &mut files)?;
    files.sort();
    let mut entries = Vec::new();
    for rel in files {
        let full = dir.join(&rel);
        let name = rel
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| CliError::data(format!("{}: non-UTF8 file name", full.display())))?;
        let (class, snr_db, _) = parse_record_file_name(name).ok_or_else(|| {
            CliError::data(format!(
                "{}: file name does not follow class_snr<dB>_<idx> convention",
                full.display()
            ))
        })?;
        let label = cyclosense_core::waveform::WaveformClass::ALL
            .iter()
            .find(|c| c.name().eq_ignore_ascii_case(&class))
            .map(|c| c.label())
            .ok_or_else(|| CliError::data(format!("{}: unknown class '{class}'", full.display())))?;
        let is_iq = rel.extension().is_some_and(|e| e == "iq");
        let (kind, shape) = if is_iq {
            let sig = read_iq(&full)?;
            ("iq".to_string(), format!("{}", sig.len()))
        } else {
            let m = read_matrix(&full)?;
            (
                m.kind.name().to_string(),
                format!("{}x{}", m.values.rows(), m.values.cols()),
            )
        };
        entries.push(ManifestEntry {
            path: rel.to_str().unwrap().replace('\\', "/"),
            kind,
            label,
            snr_db,
            seed: 0,
            shape,
            crc32: crc32_file(&full)?,
            signal_power: f64::NAN,
            noise_power: f64::NAN,
        });
    }
    Ok(Manifest { entries })
}

fn collect_data_files(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let rd = fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    for entry in rd {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_data_files(base, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "iq" || e == "mtx") {
            out.push(path.strip_prefix(base).unwrap().to_path_buf());
        }
    }
    Ok(())
}

/// Splits a manifest into train and test parts, stratified per
/// (label, snr_db): each stratum is shuffled deterministically and the first
/// `round(train_frac * n)` records go to train, so per-stratum fractions are
/// within one example of the target and the parts are disjoint and complete.
pub fn stratified_split(
    manifest: &Manifest,
    train_frac: f64,
    seed: u64,
) -> Result<(Manifest, Manifest)> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(CliError::config(format!(
            "train_frac must lie in [0, 1], got {train_frac}"
        )));
    }
    let mut strata: Vec<((u8, u64), Vec<usize>)> = Vec::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        let key = (e.label, e.snr_db.to_bits());
        match strata.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => strata.push((key, vec![i])),
        }
    }
    strata.sort_by_key(|(k, _)| *k);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (si, (_, mut idx)) in strata.into_iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (si as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        idx.shuffle(&mut rng);
        let n_train = ((train_frac * idx.len() as f64).round() as usize).min(idx.len());
        train_idx.extend_from_slice(&idx[..n_train]);
        test_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |ids: &[usize]| Manifest {
        entries: ids.iter().map(|&i| manifest.entries[i].clone()).collect(),
    };
    Ok((pick(&train_idx), pick(&test_idx)))
}

/// Convenience used by generation: manifest entry for a just-written file.
pub fn entry_for_file(
    dir: &Path,
    rel_path: &str,
    kind: &str,
    label: u8,
    snr_db: f64,
    seed: u64,
    shape: String,
    signal_power: f64,
    noise_power: f64,
) -> Result<ManifestEntry> {
    Ok(ManifestEntry {
        path: rel_path.to_string(),
        kind: kind.to_string(),
        label,
        snr_db,
        seed,
        shape,
        crc32: crc32_file(&dir.join(rel_path))?,
        signal_power,
        noise_power,
    })
}

/// Feature metadata stored alongside matrices loaded through a manifest.
pub fn meta_for_entry(entry: &ManifestEntry) -> FeatureMeta {
    FeatureMeta {
        label: entry.label,
        snr_db: entry.snr_db,
        seed: entry.seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cyclosense_core::waveform::generate_noise;
    use std::sync::atomic::{AtomicU64, Ordering};

    static DIR_COUNTER: AtomicU64 = AtomicU64::new(0);

    fn temp_dir() -> PathBuf {
        let id = DIR_COUNTER.fetch_add(1, Ordering::SeqCst);
        let dir = std::env::temp_dir().join(format!(
            "cyclosense-dataio-{}-{id}",
            std::process::id()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    // --- crc32 ---

    #[test]
    fn crc32_matches_reference_vector() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
        assert_eq!(crc32(b""), 0);
    }

    // --- iq round trip ---

    #[test]
    fn iq_round_trip_is_bit_exact() {
        let dir = temp_dir();
        let sig = generate_noise(257, 9).unwrap();
        let path = dir.join("a.iq");
        write_iq(&path, &sig).unwrap();
        let back = read_iq(&path).unwrap();
        assert_eq!(back.len(), sig.len());
        for (a, b) in back.samples.iter().zip(&sig.samples) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn iq_rejects_empty_wrong_magic_and_truncation() {
        let dir = temp_dir();
        let path = dir.join("bad.iq");
        fs::write(&path, b"").unwrap();
        assert!(read_iq(&path).unwrap_err().to_string().contains("empty"));
        fs::write(&path, b"NOPE\x01\x00").unwrap();
        assert!(read_iq(&path).unwrap_err().to_string().contains("magic"));
        let sig = generate_noise(16, 1).unwrap();
        write_iq(&path, &sig).unwrap();
        let full = fs::read(&path).unwrap();
        fs::write(&path, &full[..full.len() - 5]).unwrap();
        let err = read_iq(&path).unwrap_err().to_string();
        assert!(err.contains("truncated at byte"), "{err}");
        fs::remove_dir_all(&dir).unwrap();
    }

    // --- matrix round trip ---

    #[test]
    fn scf_matrix_round_trip_within_f32_and_axes_rebuild() {
        use cyclosense_core::scf::fam_scf_magnitude;
        let dir = temp_dir();
        let sig = generate_noise(512, 3).unwrap();
        let fam = FamConfig::default();
        let scf = fam_scf_magnitude(&sig, &fam).unwrap();
        let path = dir.join("a.mtx");
        write_scf_matrix(&path, &scf, &fam).unwrap();
        let file = read_matrix(&path).unwrap();
        assert_eq!(file.values.rows(), scf.values.rows());
        assert_eq!(file.values.cols(), scf.values.cols());
        for (a, b) in file.values.iter().zip(scf.values.iter()) {
            let q = *b as f32 as f64;
            assert_eq!(*a, q, "stored value must be the f32 quantization");
        }
        let rebuilt = scf_from_matrix_file(&file, &path).unwrap();
        for (a, b) in rebuilt.alpha_axis.iter().zip(&scf.alpha_axis) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(rebuilt.freq_axis, scf.freq_axis);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn matrix_zeros_round_trip_exact_and_magic_checked() {
        let dir = temp_dir();
        let path = dir.join("z.mtx");
        let feature = FeatureMatrix {
            values: Matrix::zeros(3, 4),
            kind: FeatureKind::Iq,
            meta: FeatureMeta { label: 0, snr_db: 0.0, seed: 0 },
        };
        write_feature_matrix(&path, &feature).unwrap();
        let file = read_matrix(&path).unwrap();
        assert_eq!(file.kind, FeatureKind::Iq);
        assert!(file.fam.is_none());
        assert!(file.values.iter().all(|&v| v == 0.0));
        fs::write(&path, b"XXXX\x01\x00rest").unwrap();
        assert!(read_matrix(&path).unwrap_err().to_string().contains("magic"));
        fs::remove_dir_all(&dir).unwrap();
    }

    // --- checkpoint round trip ---

    #[test]
    fn checkpoint_round_trip_preserves_config_and_quantizes_params() {
        let dir = temp_dir();
        let mut model = Cnn::new(ModelConfig::standard(8, 8, 3)).unwrap();
        model.init_he_uniform(11);
        let path = dir.join("m.csnn");
        save_checkpoint(&path, &model).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.cfg.input_h, 8);
        assert_eq!(back.cfg.conv_channels, vec![64, 128, 64]);
        assert_eq!(back.params.len(), model.params.len());
        for (a, b) in back.params.iter().zip(&model.params) {
            assert_eq!(*a, *b as f32 as f64);
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    // --- manifest ---

    fn sample_manifest() -> Manifest {
        let mut entries = Vec::new();
        for label in 0..2u8 {
            for snr in [1.0, 5.0] {
                for idx in 0..10usize {
                    entries.push(ManifestEntry {
                        path: record_file_name(
                            if label == 0 { "noise" } else { "gsm" },
                            snr,
                            idx,
                            "iq",
                        ),
                        kind: "iq".into(),
                        label,
                        snr_db: snr,
                        seed: 42 + idx as u64,
                        shape: "16384".into(),
                        crc32: 0xDEAD_BEEF,
                        signal_power: 1.0,
                        noise_power: 0.5,
                    });
                }
            }
        }
        Manifest { entries }
    }

    #[test]
    fn manifest_text_round_trip() {
        let dir = temp_dir();
        let m = sample_manifest();
        m.save(&dir).unwrap();
        let back = Manifest::load(&dir).unwrap();
        assert_eq!(back.entries, m.entries);
        assert_eq!(back.stratum_counts().len(), 4);
        assert!(back.stratum_counts().iter().all(|(_, n)| *n == 10));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn manifest_rejects_duplicate_paths() {
        let mut m = sample_manifest();
        let dup = m.entries[0].clone();
        m.entries.push(dup);
        let dir = temp_dir();
        assert!(m.save(&dir).unwrap_err().to_string().contains("duplicate"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn file_name_round_trip() {
        let name = record_file_name("umts", -5.0, 7, "iq");
        assert_eq!(name, "umts_snr-05.0_007.iq");
        let (class, snr, idx) = parse_record_file_name(&name).unwrap();
        assert_eq!(class, "umts");
        assert_eq!(snr, -5.0);
        assert_eq!(idx, 7);
    }

    // --- stratified split ---

    #[test]
    fn split_is_stratified_disjoint_and_complete() {
        let m = sample_manifest();
        let (train, test) = stratified_split(&m, 0.6, 7).unwrap();
        assert_eq!(train.entries.len(), 24);
        assert_eq!(test.entries.len(), 16);
        for (_, n) in train.stratum_counts() {
            assert_eq!(n, 6, "10 per stratum at 0.6 must split 6/4");
        }
        for (_, n) in test.stratum_counts() {
            assert_eq!(n, 4);
        }
        let train_paths: std::collections::BTreeSet<_> =
            train.entries.iter().map(|e| e.path.clone()).collect();
        for e in &test.entries {
            assert!(!train_paths.contains(&e.path), "split must be disjoint");
        }
        assert_eq!(train.entries.len() + test.entries.len(), m.entries.len());
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let m = sample_manifest();
        let (a1, _) = stratified_split(&m, 0.6, 7).unwrap();
        let (a2, _) = stratified_split(&m, 0.6, 7).unwrap();
        assert_eq!(a1.entries, a2.entries);
        let (b1, _) = stratified_split(&m, 0.6, 8).unwrap();
        assert_ne!(a1.entries, b1.entries, "different seed should reshuffle");
    }

    // --- build_manifest import path ---

    #[test]
    fn build_manifest_recovers_entries_from_files() {
        let dir = temp_dir();
        let sig = generate_noise(64, 5).unwrap();
        write_iq(&dir.join("iq").join(record_file_name("noise", 3.0, 0, "iq")), &sig).unwrap();
        write_iq(&dir.join("iq").join(record_file_name("lte", 3.0, 1, "iq")), &sig).unwrap();
        let m = build_manifest(&dir).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert!(m.entries.iter().any(|e| e.label == 3));
        assert!(m.entries.iter().all(|e| e.shape == "64" && e.snr_db == 3.0));
        m.verify_checksums(&dir).unwrap();
        fs::remove_dir_all(&dir).unwrap();
    }
}
