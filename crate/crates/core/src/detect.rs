//! Occupancy detectors: a cyclic-feature CFAR test and the classifier-based
//! decision rule.
//!
//! The CFAR statistic is the largest ratio between the SCF magnitude at a
//! candidate cyclic-frequency row and the median magnitude of the same
//! frequency channel over all nonzero cyclic frequencies. Ratios make the
//! statistic invariant to input scale, so one noise-calibrated threshold
//! works at every SNR. The threshold itself is the empirical (1 - Pfa)
//! quantile of the statistic over noise-only records.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::scf::ScfMatrix;
use crate::{Error, Result};

/// Outcome of an occupancy test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub occupied: bool,
    pub statistic: f64,
    pub threshold: f64,
}

fn median_of(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Rows of the SCF nearest each requested cyclic frequency.
pub fn candidate_rows_for_alphas(scf: &ScfMatrix, alphas: &[f64]) -> Result<Vec<usize>> {
    if alphas.is_empty() {
        return Err(Error::invalid("no candidate cyclic frequencies"));
    }
    alphas
        .iter()
        .map(|&a| {
            scf.alpha_axis
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - a).abs().partial_cmp(&(y.1 - a).abs()).unwrap())
                .map(|(i, _)| i)
                .ok_or_else(|| Error::invalid("empty cyclic-frequency axis"))
        })
        .collect()
}

/// Peak-to-median cyclic-feature statistic over the candidate rows.
///
/// For each frequency channel the reference level is the median of that
/// channel across all rows with nonzero cyclic frequency; the statistic is
/// the maximum, over candidate rows and channels, of value / reference. A
/// zero reference with a zero value contributes 0; a zero reference with a
/// positive value contributes infinity (a line over a silent floor).
pub fn cfd_statistic(scf: &ScfMatrix, candidate_rows: &[usize]) -> Result<f64> {
    let rows = scf.values.rows();
    let cols = scf.values.cols();
    if candidate_rows.is_empty() {
        return Err(Error::invalid("no candidate rows"));
    }
    for &r in candidate_rows {
        if r >= rows {
            return Err(Error::invalid(format!(
                "candidate row {r} out of range (matrix has {rows} rows)"
            )));
        }
        if scf.alpha_axis[r] == 0.0 {
            return Err(Error::invalid(
                "candidate rows must have nonzero cyclic frequency",
            ));
        }
    }
    let mut stat = 0.0f64;
    for c in 0..cols {
        let floor: Vec<f64> = (0..rows)
            .filter(|&r| scf.alpha_axis[r] != 0.0)
            .map(|r| scf.values.get(r, c))
            .collect();
        if floor.is_empty() {
            return Err(Error::invalid("matrix has no nonzero cyclic frequencies"));
        }
        let med = median_of(floor);
        for &r in candidate_rows {
            let v = scf.values.get(r, c);
            let ratio = if med > 0.0 {
                v / med
            } else if v > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            stat = stat.max(ratio);
        }
    }
    Ok(stat)
}

/// Empirical (1 - pfa) quantile of noise-only statistics: the smallest
/// calibration value that at most a `pfa` fraction of calibration records
/// exceed.
pub fn calibrate_threshold(noise_statistics: &[f64], pfa: f64) -> Result<f64> {
    if noise_statistics.is_empty() {
        return Err(Error::invalid("no calibration statistics"));
    }
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::invalid(format!("pfa must lie in (0, 1), got {pfa}")));
    }
    if noise_statistics.iter().any(|s| s.is_nan()) {
        return Err(Error::numerical("NaN in calibration statistics"));
    }
    let mut sorted = noise_statistics.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let idx = (((1.0 - pfa) * n as f64).ceil() as usize).clamp(1, n) - 1;
    Ok(sorted[idx])
}

/// CFAR occupancy test: occupied when the statistic strictly exceeds the
/// calibrated threshold.
pub fn cfar_detect(
    scf: &ScfMatrix,
    candidate_rows: &[usize],
    threshold: f64,
) -> Result<Decision> {
    let statistic = cfd_statistic(scf, candidate_rows)?;
    Ok(Decision {
        occupied: statistic > threshold,
        statistic,
        threshold,
    })
}

/// Classifier-based occupancy rule: occupied when the posterior mass of all
/// signal classes strictly exceeds the noise-class posterior.
pub fn cnn_detect(probs: &[f64], noise_label: usize) -> Result<bool> {
    if noise_label >= probs.len() {
        return Err(Error::invalid(format!(
            "noise label {noise_label} out of range for {} classes",
            probs.len()
        )));
    }
    let p_noise = probs[noise_label];
    let p_signal: f64 = probs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != noise_label)
        .map(|(_, &p)| p)
        .sum();
    Ok(p_signal > p_noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::scf::{fam_scf_magnitude, FamConfig};
    use crate::waveform::{generate_dsss, generate_noise};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn scf_from(values: Matrix) -> ScfMatrix {
        let rows = values.rows();
        let cols = values.cols();
        ScfMatrix {
            values,
            alpha_axis: (0..rows).map(|r| r as f64 / rows as f64).collect(),
            freq_axis: (0..cols).map(|c| c as f64 / cols as f64).collect(),
        }
    }

    // --- statistic ---

    #[test]
    fn constant_matrix_scores_one() {
        let m = Matrix::from_vec(8, 4, vec![2.5; 32]).unwrap();
        let scf = scf_from(m);
        let stat = cfd_statistic(&scf, &[3]).unwrap();
        assert!((stat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hot_cell_scores_its_ratio() {
        let mut m = Matrix::from_vec(9, 4, vec![1.0; 36]).unwrap();
        m.set(4, 2, 10.0);
        let scf = scf_from(m);
        let stat = cfd_statistic(&scf, &[4]).unwrap();
        assert!((stat - 10.0).abs() < 1e-12);
    }

    #[test]
    fn statistic_is_scale_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let vals: Vec<f64> = (0..64).map(|_| rng.gen_range(0.1..2.0)).collect();
        let a = scf_from(Matrix::from_vec(16, 4, vals.clone()).unwrap());
        let scaled: Vec<f64> = vals.iter().map(|v| v * 7.0).collect();
        let b = scf_from(Matrix::from_vec(16, 4, scaled).unwrap());
        let sa = cfd_statistic(&a, &[5, 9]).unwrap();
        let sb = cfd_statistic(&b, &[5, 9]).unwrap();
        assert!((sa - sb).abs() < 1e-12 * sa);
    }

    #[test]
    fn statistic_validates_candidates() {
        let scf = scf_from(Matrix::from_vec(4, 2, vec![1.0; 8]).unwrap());
        assert!(cfd_statistic(&scf, &[]).is_err());
        assert!(cfd_statistic(&scf, &[9]).is_err());
        // Row 0 has alpha = 0 in the synthetic axis.
        assert!(cfd_statistic(&scf, &[0]).is_err());
    }

    #[test]
    fn zero_floor_with_line_is_infinite() {
        let mut m = Matrix::zeros(6, 2);
        m.set(3, 1, 1.0);
        let scf = scf_from(m);
        let stat = cfd_statistic(&scf, &[3]).unwrap();
        assert!(stat.is_infinite());
        let silent = scf_from(Matrix::zeros(6, 2));
        assert_eq!(cfd_statistic(&silent, &[3]).unwrap(), 0.0);
    }

    // --- threshold ---

    #[test]
    fn threshold_is_empirical_quantile() {
        let stats: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        // 5% exceedance over 100 points: ceil(0.95 * 100) - 1 = index 94.
        assert_eq!(calibrate_threshold(&stats, 0.05).unwrap(), 95.0);
        assert_eq!(calibrate_threshold(&stats, 0.5).unwrap(), 50.0);
        // Order must not matter.
        let mut shuffled = stats.clone();
        shuffled.reverse();
        assert_eq!(calibrate_threshold(&shuffled, 0.05).unwrap(), 95.0);
    }

    #[test]
    fn threshold_validation() {
        assert!(calibrate_threshold(&[], 0.1).is_err());
        assert!(calibrate_threshold(&[1.0], 0.0).is_err());
        assert!(calibrate_threshold(&[1.0], 1.0).is_err());
        assert!(calibrate_threshold(&[f64::NAN], 0.1).is_err());
    }

    /// End-to-end false-alarm calibration on real noise SCFs: fresh noise
    /// records should trip the threshold at roughly the design rate.
    #[test]
    fn calibrated_pfa_holds_on_fresh_noise() {
        let cfg = FamConfig::default();
        let candidates = [16usize, 32, 48];
        let stat_for = |seed: u64| {
            let sig = generate_noise(256, seed).unwrap();
            let m = fam_scf_magnitude(&sig, &cfg).unwrap();
            cfd_statistic(&m, &candidates).unwrap()
        };
        let cal: Vec<f64> = (0..300).map(stat_for).collect();
        let thr = calibrate_threshold(&cal, 0.1).unwrap();
        let fresh: usize = (1000..1300)
            .filter(|&seed| stat_for(seed) > thr)
            .count();
        let rate = fresh as f64 / 300.0;
        assert!(
            (0.03..=0.19).contains(&rate),
            "false-alarm rate {rate} far from design 0.1"
        );
    }

    #[test]
    fn cfar_flags_dsss_but_not_noise() {
        let cfg = FamConfig::default();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let bits: Vec<u8> = (0..256).map(|_| rng.gen_range(0..2) as u8).collect();
        let dsss = generate_dsss(&bits, 16, 1, 5).unwrap();
        let scf = fam_scf_magnitude(&dsss, &cfg).unwrap();
        // 4096 samples -> alpha = 1/16 is row 256.
        let rows = candidate_rows_for_alphas(&scf, &[1.0 / 16.0]).unwrap();
        assert_eq!(rows, vec![256]);

        let cal: Vec<f64> = (0..200)
            .map(|seed| {
                let n = generate_noise(4096, 7000 + seed).unwrap();
                let m = fam_scf_magnitude(&n, &cfg).unwrap();
                cfd_statistic(&m, &rows).unwrap()
            })
            .collect();
        let thr = calibrate_threshold(&cal, 0.05).unwrap();

        let d = cfar_detect(&scf, &rows, thr).unwrap();
        assert!(d.occupied, "statistic {} vs threshold {}", d.statistic, d.threshold);

        let noise = generate_noise(4096, 99_999).unwrap();
        let m = fam_scf_magnitude(&noise, &cfg).unwrap();
        let dn = cfar_detect(&m, &rows, thr).unwrap();
        assert!(!dn.occupied || dn.statistic < d.statistic);
    }

    // --- classifier-based rule ---

    #[test]
    fn cnn_detect_compares_posterior_masses() {
        assert!(cnn_detect(&[0.4, 0.3, 0.2, 0.1], 0).unwrap());
        assert!(!cnn_detect(&[0.7, 0.1, 0.1, 0.1], 0).unwrap());
        // Strict: an exact tie is not occupied.
        assert!(!cnn_detect(&[0.5, 0.5], 0).unwrap());
        assert!(cnn_detect(&[0.2, 0.6, 0.2], 1).is_ok());
        assert!(cnn_detect(&[0.5, 0.5], 2).is_err());
    }
}
