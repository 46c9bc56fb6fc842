//! Report plumbing: the per-example prediction log, the metric tables
//! derived from it, and the audit that re-derives every reported number
//! from the persisted log.
//!
//! Each experiment persists a `*_predictions.csv` (one row per evaluated
//! record) and a `*_report.txt` whose metrics section below the
//! `== metrics ==` marker is a pure function of that log. The `report`
//! command recomputes the section from the log and demands byte equality,
//! so no reported number can exist that is not reproducible from persisted
//! predictions. Wall-clock measurements are intentionally kept out of
//! reports; they go to `timing.csv`, which is excluded from determinism
//! comparisons.

use std::collections::BTreeSet;
use std::path::Path;

use cyclosense_core::metrics::{detection_stats, overall_probability, ConfusionMatrix};
use cyclosense_core::waveform::WaveformClass;

use crate::error::{CliError, Result};

/// Marker separating the free-form report header from the metrics section
/// that must be recomputable from the prediction log.
pub const METRICS_MARKER: &str = "== metrics ==";

/// Fixed-precision float for report tables (deterministic formatting).
pub fn fmt4(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.4}")
    }
}

// --- prediction log ---

/// A named-column CSV table; the uniform carrier for per-example predictions
/// so every experiment's metrics can be rebuilt from disk the same way they
/// were built in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl PredictionTable {
    pub fn new(columns: &[&str]) -> Self {
        PredictionTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(CliError::data(format!(
                "prediction row has {} fields, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, what: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::data(format!("{what}: empty prediction log")))?;
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            if row.len() != columns.len() {
                return Err(CliError::data(format!(
                    "{what}:{}: expected {} fields, got {}",
                    i + 2,
                    columns.len(),
                    row.len()
                )));
            }
            rows.push(row);
        }
        Ok(PredictionTable { columns, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        Self::from_csv(&text, &path.display().to_string())
    }

    pub fn col(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::data(format!("prediction log has no column '{name}'")))
    }

    pub fn f64_col(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.col(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|_| CliError::data(format!("bad number '{}' in column {name}", r[c])))
            })
            .collect()
    }

    pub fn u8_col(&self, name: &str) -> Result<Vec<u8>> {
        let c = self.col(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<u8>()
                    .map_err(|_| CliError::data(format!("bad label '{}' in column {name}", r[c])))
            })
            .collect()
    }

    /// Boolean column stored as 0/1.
    pub fn bool_col(&self, name: &str) -> Result<Vec<bool>> {
        let c = self.col(name)?;
        self.rows
            .iter()
            .map(|r| match r[c].as_str() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(CliError::data(format!(
                    "bad boolean '{other}' in column {name} (expected 0 or 1)"
                ))),
            })
            .collect()
    }
}

pub fn bool_cell(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Sorted unique finite SNR values present in a log — the grid the metric
/// tables iterate over, derived from the data so recomputation needs no
/// configuration.
pub fn snr_grid_of(snrs: &[f64]) -> Vec<f64> {
    let mut set: BTreeSet<u64> = BTreeSet::new();
    for &s in snrs {
        if s.is_finite() {
            set.insert(s.to_bits());
        }
    }
    set.into_iter().map(f64::from_bits).collect()
}

fn rows_at_snr(snrs: &[f64], snr: f64) -> Vec<usize> {
    (0..snrs.len()).filter(|&i| snrs[i] == snr).collect()
}

/// Sorted unique core labels appearing anywhere in a classification log;
/// fixes confusion-matrix order so recomputation is self-contained.
pub fn observed_class_labels(labels: &[u8], predicted: &[u8]) -> Vec<u8> {
    let set: BTreeSet<u8> = labels.iter().chain(predicted).copied().collect();
    set.into_iter().collect()
}

/// Human name for a core label in report artifacts.
pub fn class_name_of(core: u8) -> String {
    match WaveformClass::from_label(core) {
        Ok(c) => c.name().to_ascii_lowercase(),
        Err(_) => format!("class{core}"),
    }
}

// --- classification metrics ---

fn confusion_for(
    labels: &[u8],
    predicted: &[u8],
    idx: &[usize],
    class_labels: &[u8],
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(class_labels.len())
        .map_err(|e| CliError::data(format!("confusion matrix: {e}")))?;
    let model_of = |core: u8| -> Result<usize> {
        class_labels
            .iter()
            .position(|&c| c == core)
            .ok_or_else(|| CliError::data(format!("label {core} not among experiment classes")))
    };
    for &i in idx {
        cm.record(model_of(labels[i])?, model_of(predicted[i])?)
            .map_err(|e| CliError::data(format!("confusion matrix: {e}")))?;
    }
    Ok(cm)
}

fn confusion_line(tag: &str, cm: &ConfusionMatrix) -> String {
    let flat: Vec<String> = cm
        .to_rows()
        .into_iter()
        .flatten()
        .map(|n| n.to_string())
        .collect();
    format!("confusion,{tag},{}\n", flat.join(","))
}

/// Per-SNR accuracy/macro-F1 rows (without header/overall) — the summary
/// CSV body shared by the metrics section and the plot-data file.
fn classification_rows(
    labels: &[u8],
    snrs: &[f64],
    predicted: &[u8],
    class_labels: &[u8],
) -> Result<String> {
    let mut out = String::new();
    for &snr in &snr_grid_of(snrs) {
        let idx = rows_at_snr(snrs, snr);
        let cm = confusion_for(labels, predicted, &idx, class_labels)?;
        out.push_str(&format!(
            "{snr},{},{},{}\n",
            idx.len(),
            fmt4(cm.accuracy()),
            fmt4(cm.macro_f1())
        ));
    }
    Ok(out)
}

/// Per-SNR macro-F1 values for one classification log.
pub fn per_snr_macro_f1(
    labels: &[u8],
    snrs: &[f64],
    predicted: &[u8],
) -> Result<Vec<(f64, f64)>> {
    let class_labels = observed_class_labels(labels, predicted);
    let mut out = Vec::new();
    for &snr in &snr_grid_of(snrs) {
        let idx = rows_at_snr(snrs, snr);
        let cm = confusion_for(labels, predicted, &idx, &class_labels)?;
        out.push((snr, cm.macro_f1()));
    }
    Ok(out)
}

/// Overall accuracy of a classification log.
pub fn overall_accuracy(labels: &[u8], predicted: &[u8]) -> Result<f64> {
    if labels.is_empty() || labels.len() != predicted.len() {
        return Err(CliError::data("no predictions to score"));
    }
    let correct = labels.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Everything derived from one log, ready to persist.
#[derive(Debug, Clone)]
pub struct Artifacts {
    /// The report's metrics section (recomputable, compared byte-for-byte).
    pub section: String,
    /// Per-SNR curve CSV (plot data).
    pub summary_csv: String,
    /// Per-(snr, class) precision/recall/F1 CSV, when the experiment
    /// classifies.
    pub class_metrics_csv: Option<String>,
}

/// Builds the artifacts of a plain classification experiment from its log
/// (columns: path,label,snr_db,predicted). The section carries the per-SNR
/// table, an overall line, and flattened per-SNR confusion matrices.
pub fn classification_artifacts(experiment: &str, table: &PredictionTable) -> Result<Artifacts> {
    let labels = table.u8_col("label")?;
    let snrs = table.f64_col("snr_db")?;
    let predicted = table.u8_col("predicted")?;
    if labels.is_empty() {
        return Err(CliError::data(format!("{experiment}: empty prediction log")));
    }
    let class_labels = observed_class_labels(&labels, &predicted);
    let rows = classification_rows(&labels, &snrs, &predicted, &class_labels)?;

    let mut section = String::from("snr_db,n,accuracy,macro_f1\n");
    section.push_str(&rows);
    let all: Vec<usize> = (0..labels.len()).collect();
    let cm = confusion_for(&labels, &predicted, &all, &class_labels)?;
    section.push_str(&format!(
        "overall: n={} accuracy={} macro_f1={}\n",
        all.len(),
        fmt4(cm.accuracy()),
        fmt4(cm.macro_f1())
    ));
    let names: Vec<String> = class_labels.iter().map(|&c| class_name_of(c)).collect();
    section.push_str(&format!("confusion classes: {}\n", names.join(",")));
    for &snr in &snr_grid_of(&snrs) {
        let idx = rows_at_snr(&snrs, snr);
        let snr_cm = confusion_for(&labels, &predicted, &idx, &class_labels)?;
        section.push_str(&confusion_line(&format!("{snr}"), &snr_cm));
    }
    section.push_str(&confusion_line("overall", &cm));

    let mut summary = String::from("snr_db,n,accuracy,macro_f1\n");
    summary.push_str(&rows);

    let mut class_csv = String::from("experiment,snr_db,class,precision,recall,f1\n");
    for &snr in &snr_grid_of(&snrs) {
        let idx = rows_at_snr(&snrs, snr);
        let cm = confusion_for(&labels, &predicted, &idx, &class_labels)?;
        for (k, name) in names.iter().enumerate() {
            let (p, r, f1) = cm.precision_recall_f1(k);
            out_class_row(&mut class_csv, experiment, snr, name, p, r, f1);
        }
    }
    Ok(Artifacts {
        section,
        summary_csv: summary,
        class_metrics_csv: Some(class_csv),
    })
}

fn out_class_row(
    csv: &mut String,
    experiment: &str,
    snr: f64,
    name: &str,
    p: f64,
    r: f64,
    f1: f64,
) {
    csv.push_str(&format!(
        "{experiment},{snr},{name},{},{},{}\n",
        fmt4(p),
        fmt4(r),
        fmt4(f1)
    ));
}

// --- two-stage chain metrics ---

/// Slack allowed between the measured chain accuracy and the P_S × P_C
/// product on balanced evaluation sets (Monte-Carlo wiggle plus the small
/// systematic term from empty-channel records that the product form ignores).
pub const CHAIN_GAP_TOL: f64 = 0.03;

#[derive(Debug, Clone)]
pub struct ChainMetrics {
    /// (snr, n, p_sensing, p_classification, p_overall, chain_accuracy, gap)
    pub per_snr: Vec<(f64, usize, f64, f64, f64, f64, f64)>,
    pub agg_p_sensing: f64,
    pub agg_p_classification: f64,
    pub agg_p_overall: f64,
    pub agg_chain_accuracy: f64,
    /// |aggregate chain accuracy − P_S·P_C|, bounded by [`CHAIN_GAP_TOL`].
    pub agg_gap: f64,
}

fn chain_point(
    labels: &[u8],
    detected: &[bool],
    predicted: &[u8],
    idx: &[usize],
    noise_label: u8,
) -> Result<(f64, f64, f64, f64)> {
    let truth: Vec<bool> = idx.iter().map(|&i| labels[i] != noise_label).collect();
    let decided: Vec<bool> = idx.iter().map(|&i| detected[i]).collect();
    let stats = detection_stats(&truth, &decided)
        .map_err(|e| CliError::data(format!("sensing stats: {e}")))?;
    let p_s = stats.prob_sensing;

    // Classification accuracy over occupied records the detector flagged —
    // the only records the second stage ever sees.
    let flagged: Vec<usize> = idx
        .iter()
        .copied()
        .filter(|&i| labels[i] != noise_label && detected[i])
        .collect();
    let p_c = if flagged.is_empty() {
        f64::NAN
    } else {
        flagged.iter().filter(|&&i| predicted[i] == labels[i]).count() as f64
            / flagged.len() as f64
    };

    // Chain accuracy: empty records are correct when not flagged; occupied
    // records when flagged and classified correctly. A missed detection ends
    // the chain at the empty verdict; a false alarm sends an empty record to
    // the classifier, whose signal-class output is always wrong.
    let chain = idx
        .iter()
        .filter(|&&i| {
            if labels[i] == noise_label {
                !detected[i]
            } else {
                detected[i] && predicted[i] == labels[i]
            }
        })
        .count() as f64
        / idx.len() as f64;
    let p_overall = overall_probability(p_s, p_c);
    Ok((p_s, p_c, p_overall, chain))
}

/// Computes the two-stage metrics from a chain log
/// (columns: path,label,snr_db,detected,predicted).
pub fn chain_metrics(
    labels: &[u8],
    snrs: &[f64],
    detected: &[bool],
    predicted: &[u8],
    noise_label: u8,
) -> Result<ChainMetrics> {
    if labels.len() != snrs.len()
        || labels.len() != detected.len()
        || labels.len() != predicted.len()
    {
        return Err(CliError::data("prediction columns have mismatched lengths"));
    }
    if labels.is_empty() {
        return Err(CliError::data("no predictions to score"));
    }
    let mut per_snr = Vec::new();
    for &snr in &snr_grid_of(snrs) {
        let idx = rows_at_snr(snrs, snr);
        let (p_s, p_c, p_o, chain) = chain_point(labels, detected, predicted, &idx, noise_label)?;
        per_snr.push((snr, idx.len(), p_s, p_c, p_o, chain, (chain - p_o).abs()));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let (p_s, p_c, p_o, chain) = chain_point(labels, detected, predicted, &all, noise_label)?;
    Ok(ChainMetrics {
        per_snr,
        agg_p_sensing: p_s,
        agg_p_classification: p_c,
        agg_p_overall: p_o,
        agg_chain_accuracy: chain,
        agg_gap: (chain - p_o).abs(),
    })
}

/// Builds the two-stage experiment's artifacts plus the chain metrics the
/// caller enforces its factorization check with. The per-class CSV scores
/// the classifier on the flagged-occupied subset only.
pub fn chain_artifacts(
    experiment: &str,
    table: &PredictionTable,
    noise_label: u8,
) -> Result<(Artifacts, ChainMetrics)> {
    let labels = table.u8_col("label")?;
    let snrs = table.f64_col("snr_db")?;
    let detected = table.bool_col("detected")?;
    let predicted = table.u8_col("predicted")?;
    let m = chain_metrics(&labels, &snrs, &detected, &predicted, noise_label)?;

    let mut rows = String::new();
    for &(snr, n, p_s, p_c, p_o, chain, gap) in &m.per_snr {
        rows.push_str(&format!(
            "{snr},{n},{},{},{},{},{}\n",
            fmt4(p_s),
            fmt4(p_c),
            fmt4(p_o),
            fmt4(chain),
            fmt4(gap)
        ));
    }
    let header = "snr_db,n,p_sensing,p_classification,p_overall,chain_accuracy,gap\n";
    let mut section = String::from(header);
    section.push_str(&rows);
    section.push_str(&format!(
        "aggregate: p_sensing={} p_classification={} p_overall={} chain_accuracy={} gap={}\n",
        fmt4(m.agg_p_sensing),
        fmt4(m.agg_p_classification),
        fmt4(m.agg_p_overall),
        fmt4(m.agg_chain_accuracy),
        fmt4(m.agg_gap)
    ));
    section.push_str(&format!(
        "check chain_factorization: {} (aggregate |chain - p_s*p_c| = {} <= {})\n",
        if m.agg_gap <= CHAIN_GAP_TOL { "PASS" } else { "FAIL" },
        fmt4(m.agg_gap),
        CHAIN_GAP_TOL
    ));

    // Classifier quality on the flagged-occupied subset.
    let flagged: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] != noise_label && detected[i])
        .collect();
    let class_csv = if flagged.is_empty() {
        None
    } else {
        let fl: Vec<u8> = flagged.iter().map(|&i| labels[i]).collect();
        let fs: Vec<f64> = flagged.iter().map(|&i| snrs[i]).collect();
        let fp: Vec<u8> = flagged.iter().map(|&i| predicted[i]).collect();
        let class_labels = observed_class_labels(&fl, &fp);
        let names: Vec<String> = class_labels.iter().map(|&c| class_name_of(c)).collect();
        let mut csv = String::from("experiment,snr_db,class,precision,recall,f1\n");
        for &snr in &snr_grid_of(&fs) {
            let idx = rows_at_snr(&fs, snr);
            let cm = confusion_for(&fl, &fp, &idx, &class_labels)?;
            for (k, name) in names.iter().enumerate() {
                let (p, r, f1) = cm.precision_recall_f1(k);
                out_class_row(&mut csv, experiment, snr, name, p, r, f1);
            }
        }
        Some(csv)
    };

    let mut summary = String::from(header);
    summary.push_str(&rows);
    Ok((
        Artifacts {
            section,
            summary_csv: summary,
            class_metrics_csv: class_csv,
        },
        m,
    ))
}

// --- detector comparison metrics ---

/// Slack allowed in the CNN-vs-CFAR detection ordering check.
pub const PD_ORDERING_SLACK: f64 = 0.05;
/// SNR (dB) from which the ordering check applies.
pub const PD_ORDERING_MIN_SNR: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct SenseMetrics {
    /// (snr, n_occupied, pd_cnn, pd_cfar_pfa05, pd_cfar_pfa10)
    pub per_snr: Vec<(f64, usize, f64, f64, f64)>,
    pub pfa_cnn: f64,
    pub pfa_cfar05: f64,
    pub pfa_cfar10: f64,
    pub n_noise: usize,
    /// Whether the CNN-vs-CFAR detection ordering held at every checked SNR.
    pub ordering_ok: bool,
}

/// Computes detector-comparison metrics from a sense log (columns:
/// path,label,snr_db,cnn_detected,cfar_pfa05_detected,cfar_pfa10_detected).
/// Noise rows (including synthetic audit records, which carry snr `nan`)
/// feed the false-alarm estimates; occupied rows feed the per-SNR detection
/// table.
pub fn sense_metrics(
    labels: &[u8],
    snrs: &[f64],
    cnn: &[bool],
    cfar05: &[bool],
    cfar10: &[bool],
    noise_label: u8,
) -> Result<SenseMetrics> {
    let n = labels.len();
    if [snrs.len(), cnn.len(), cfar05.len(), cfar10.len()] != [n, n, n, n] {
        return Err(CliError::data("prediction columns have mismatched lengths"));
    }
    if n == 0 {
        return Err(CliError::data("no predictions to score"));
    }
    let noise_idx: Vec<usize> = (0..n).filter(|&i| labels[i] == noise_label).collect();
    if noise_idx.is_empty() {
        return Err(CliError::data("sense log has no noise records"));
    }
    let rate = |dec: &[bool], idx: &[usize]| -> f64 {
        idx.iter().filter(|&&i| dec[i]).count() as f64 / idx.len() as f64
    };
    let occupied_snrs: Vec<f64> = (0..n)
        .filter(|&i| labels[i] != noise_label)
        .map(|i| snrs[i])
        .collect();
    let mut per_snr = Vec::new();
    let mut ordering_ok = true;
    for &snr in &snr_grid_of(&occupied_snrs) {
        let idx: Vec<usize> = (0..n)
            .filter(|&i| labels[i] != noise_label && snrs[i] == snr)
            .collect();
        let pd_cnn = rate(cnn, &idx);
        let pd_05 = rate(cfar05, &idx);
        let pd_10 = rate(cfar10, &idx);
        if snr >= PD_ORDERING_MIN_SNR && pd_cnn < pd_10 - PD_ORDERING_SLACK {
            ordering_ok = false;
        }
        per_snr.push((snr, idx.len(), pd_cnn, pd_05, pd_10));
    }
    Ok(SenseMetrics {
        per_snr,
        pfa_cnn: rate(cnn, &noise_idx),
        pfa_cfar05: rate(cfar05, &noise_idx),
        pfa_cfar10: rate(cfar10, &noise_idx),
        n_noise: noise_idx.len(),
        ordering_ok,
    })
}

/// Builds the detector-comparison artifacts plus the metrics the caller
/// enforces its ordering check with.
pub fn sense_artifacts(
    table: &PredictionTable,
    noise_label: u8,
) -> Result<(Artifacts, SenseMetrics)> {
    let labels = table.u8_col("label")?;
    let snrs = table.f64_col("snr_db")?;
    let cnn = table.bool_col("cnn_detected")?;
    let cfar05 = table.bool_col("cfar_pfa05_detected")?;
    let cfar10 = table.bool_col("cfar_pfa10_detected")?;
    let m = sense_metrics(&labels, &snrs, &cnn, &cfar05, &cfar10, noise_label)?;

    let header = "snr_db,n,pd_cnn,pd_cfar_pfa05,pd_cfar_pfa10\n";
    let mut rows = String::new();
    for &(snr, n, pd_cnn, pd_05, pd_10) in &m.per_snr {
        rows.push_str(&format!(
            "{snr},{n},{},{},{}\n",
            fmt4(pd_cnn),
            fmt4(pd_05),
            fmt4(pd_10)
        ));
    }
    let mut section = format!(
        "pfa over {} noise records: cfar@0.05={} cfar@0.10={} cnn={}\n",
        m.n_noise,
        fmt4(m.pfa_cfar05),
        fmt4(m.pfa_cfar10),
        fmt4(m.pfa_cnn)
    );
    section.push_str(header);
    section.push_str(&rows);
    section.push_str(&format!(
        "check pd_ordering: {} (pd_cnn >= pd_cfar@0.10 - {} at snr >= {})\n",
        if m.ordering_ok { "PASS" } else { "FAIL" },
        PD_ORDERING_SLACK,
        PD_ORDERING_MIN_SNR
    ));

    let mut summary = String::from(header);
    summary.push_str(&rows);
    Ok((
        Artifacts {
            section,
            summary_csv: summary,
            class_metrics_csv: None,
        },
        m,
    ))
}

// --- sweep combination tables ---

/// Combined feature-sweep artifacts from the per-kind logs, in the given
/// order. Returns the artifacts and whether the strongest feature's ordering
/// check held (first kind ≥ every other kind at every SNR ≥ `min_snr`).
pub fn features_combined_artifacts(
    per_kind: &[(String, PredictionTable)],
    lead_kind: &str,
    min_snr: f64,
) -> Result<(Artifacts, bool)> {
    if per_kind.is_empty() {
        return Err(CliError::data("feature sweep has no per-kind logs"));
    }
    let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (kind, table) in per_kind {
        let labels = table.u8_col("label")?;
        let snrs = table.f64_col("snr_db")?;
        let predicted = table.u8_col("predicted")?;
        curves.push((kind.clone(), per_snr_macro_f1(&labels, &snrs, &predicted)?));
    }
    let mut grid: BTreeSet<u64> = BTreeSet::new();
    for (_, curve) in &curves {
        for &(snr, _) in curve {
            grid.insert(snr.to_bits());
        }
    }
    let lookup = |curve: &[(f64, f64)], snr: f64| -> f64 {
        curve
            .iter()
            .find(|(s, _)| *s == snr)
            .map_or(f64::NAN, |(_, f1)| *f1)
    };

    let mut header_row = String::from("snr_db");
    for (kind, _) in &curves {
        header_row.push_str(&format!(",macro_f1_{kind}"));
    }
    header_row.push('\n');
    let mut rows = String::new();
    let mut ordering_ok = true;
    for &bits in &grid {
        let snr = f64::from_bits(bits);
        rows.push_str(&format!("{snr}"));
        let mut lead = f64::NAN;
        let mut others_max = f64::NEG_INFINITY;
        for (kind, curve) in &curves {
            let f1 = lookup(curve, snr);
            rows.push_str(&format!(",{}", fmt4(f1)));
            if kind == lead_kind {
                lead = f1;
            } else if f1.is_finite() {
                others_max = others_max.max(f1);
            }
        }
        rows.push('\n');
        if snr >= min_snr && others_max.is_finite() && !(lead >= others_max) {
            ordering_ok = false;
        }
    }
    let mut section = header_row.clone();
    section.push_str(&rows);
    section.push_str(&format!(
        "check {lead_kind}_leads: {} (macro_f1_{lead_kind} >= every other kind at snr >= {min_snr})\n",
        if ordering_ok { "PASS" } else { "FAIL" }
    ));
    let mut summary = header_row;
    summary.push_str(&rows);
    Ok((
        Artifacts {
            section,
            summary_csv: summary,
            class_metrics_csv: None,
        },
        ordering_ok,
    ))
}

/// Combined crop-sweep artifacts from per-arm logs keyed by crop rows.
/// Returns the artifacts and `accuracy(16) - accuracy(4)` when both arms are
/// present (the sweep's ordering check).
pub fn crop_combined_artifacts(
    per_arm: &[(usize, PredictionTable)],
) -> Result<(Artifacts, Option<f64>)> {
    if per_arm.is_empty() {
        return Err(CliError::data("crop sweep has no per-arm logs"));
    }
    let header = "crop_rows,n,accuracy,macro_f1\n";
    let mut rows_text = String::new();
    let mut acc4 = None;
    let mut acc16 = None;
    let mut arms: Vec<&(usize, PredictionTable)> = per_arm.iter().collect();
    arms.sort_by_key(|(rows, _)| *rows);
    for (rows, table) in arms {
        let labels = table.u8_col("label")?;
        let predicted = table.u8_col("predicted")?;
        let class_labels = observed_class_labels(&labels, &predicted);
        let all: Vec<usize> = (0..labels.len()).collect();
        let cm = confusion_for(&labels, &predicted, &all, &class_labels)?;
        let acc = cm.accuracy();
        if *rows == 4 {
            acc4 = Some(acc);
        }
        if *rows == 16 {
            acc16 = Some(acc);
        }
        rows_text.push_str(&format!(
            "{rows},{},{},{}\n",
            labels.len(),
            fmt4(acc),
            fmt4(cm.macro_f1())
        ));
    }
    let gap = match (acc4, acc16) {
        (Some(a4), Some(a16)) => Some(a16 - a4),
        _ => None,
    };
    let mut section = String::from(header);
    section.push_str(&rows_text);
    match gap {
        Some(g) => section.push_str(&format!(
            "check crop_16_beats_4: {} (accuracy(16) - accuracy(4) = {})\n",
            if g > 0.0 { "PASS" } else { "FAIL" },
            fmt4(g)
        )),
        None => section.push_str("check crop_16_beats_4: SKIPPED (arms missing)\n"),
    }
    let mut summary = String::from(header);
    summary.push_str(&rows_text);
    Ok((
        Artifacts {
            section,
            summary_csv: summary,
            class_metrics_csv: None,
        },
        gap,
    ))
}

// --- report files ---

/// Assembles a report: `# `-prefixed header lines, the marker, then the
/// metrics section that must be recomputable from the prediction log.
pub fn compose_report(header_lines: &[String], metrics_section: &str) -> String {
    let mut out = String::new();
    for line in header_lines {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(METRICS_MARKER);
    out.push('\n');
    out.push_str(metrics_section);
    out
}

/// Extracts the metrics section of a stored report.
pub fn metrics_section_of(report_text: &str) -> Result<String> {
    match report_text.split_once(&format!("{METRICS_MARKER}\n")) {
        Some((_, section)) => Ok(section.to_string()),
        None => Err(CliError::data(format!(
            "report has no '{METRICS_MARKER}' marker"
        ))),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Appends one wall-clock measurement to `timing.csv` in the output
/// directory. Timing lives outside the reports so determinism checks can
/// compare every other artifact byte for byte.
pub fn append_timing(out_dir: &Path, experiment: &str, phase: &str, seconds: f64) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("timing.csv");
    let mut text = if path.exists() {
        read_text(&path)?
    } else {
        String::from("experiment,phase,seconds\n")
    };
    text.push_str(&format!("{experiment},{phase},{seconds:.6}\n"));
    write_text(&path, &text)
}
