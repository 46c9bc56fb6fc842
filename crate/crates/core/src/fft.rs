//! Radix-2 FFT used by the SCF estimator and the FFT feature extractor.
//!
//! Sizes in this crate are powers of two (demodulator banks of 16, hop
//! spectra of 16384), so an iterative in-place Cooley-Tukey transform with a
//! precomputed twiddle table covers everything. Non-power-of-two lengths fall
//! back to a direct O(n^2) transform via [`dft`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

use crate::Error;

/// Transform direction. Inverse applies the conjugate twiddles and the 1/n
/// scale, so `ifft(fft(x)) == x` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Reusable transform of a fixed power-of-two size.
///
/// Building a plan computes the twiddle table once; [`FftPlan::process`] then
/// runs in-place without allocating. The SCF estimator issues one small
/// transform per hop (thousands per record), which is why the table is hoisted
/// out of the loop.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    // Forward-direction twiddles e^(-2*pi*i*k/n) for k in 0..n/2.
    twiddles: Vec<Complex64>,
}

impl FftPlan {
    /// Plans a transform of size `n`. `n` must be a power of two and >= 1.
    pub fn new(n: usize) -> Result<Self, Error> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::invalid(alloc::format!(
                "FFT size must be a nonzero power of two, got {n}"
            )));
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Ok(FftPlan { n, twiddles })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform of exactly `self.len()` samples.
    pub fn process(&self, buf: &mut [Complex64], dir: Direction) -> Result<(), Error> {
        if buf.len() != self.n {
            return Err(Error::Shape {
                expected: alloc::format!("{}", self.n),
                got: alloc::format!("{}", buf.len()),
                context: "FftPlan::process",
            });
        }
        let n = self.n;
        if n == 1 {
            return Ok(());
        }

        // Bit-reversal permutation.
        let mut j = 0usize;
        for i in 0..n - 1 {
            if i < j {
                buf.swap(i, j);
            }
            let mut mask = n >> 1;
            while j & mask != 0 {
                j &= !mask;
                mask >>= 1;
            }
            j |= mask;
        }

        // Butterfly stages. The table holds forward twiddles; the inverse
        // transform conjugates on the fly.
        let mut len = 2usize;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if dir == Direction::Inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }

        if dir == Direction::Inverse {
            let scale = 1.0 / n as f64;
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
        Ok(())
    }
}

/// One-shot FFT for power-of-two input; allocates a plan internally.
pub fn fft(buf: &mut [Complex64], dir: Direction) -> Result<(), Error> {
    FftPlan::new(buf.len())?.process(buf, dir)
}

/// Direct O(n^2) discrete Fourier transform for any length. `Forward` matches
/// the unnormalized DFT sum; `Inverse` applies the 1/n scale.
pub fn dft(input: &[Complex64], dir: Direction) -> Vec<Complex64> {
    let n = input.len();
    if n == 0 {
        return vec![];
    }
    let sign = match dir {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, &x) in input.iter().enumerate() {
            let angle = sign * 2.0 * PI * (k * t) as f64 / n as f64;
            acc += x * Complex64::new(angle.cos(), angle.sin());
        }
        if dir == Direction::Inverse {
            acc /= n as f64;
        }
        *slot = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, bin: usize) -> Vec<Complex64> {
        (0..n)
            .map(|t| {
                let angle = 2.0 * PI * (bin * t) as f64 / n as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect()
    }

    /// Independent reference: textbook sum, no shared code with the FFT path.
    fn naive_dft(input: &[Complex64]) -> Vec<Complex64> {
        let n = input.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &x) in input.iter().enumerate() {
                    let angle = -2.0 * PI * (k as f64) * (t as f64) / n as f64;
                    acc += x * Complex64::new(angle.cos(), angle.sin());
                }
                acc
            })
            .collect()
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    // --- agreement with the direct sum ---

    #[test]
    fn fft_matches_naive_dft_across_sizes() {
        let mut rng_state = 0x2545f491_4f6cdd1du64;
        let mut next = move || {
            // splitmix64, plenty for test data
            rng_state = rng_state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = rng_state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            (z ^ (z >> 31)) as f64 / u64::MAX as f64 - 0.5
        };
        for n in [1usize, 2, 4, 16, 64, 256] {
            let input: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(next(), next())).collect();
            let expected = naive_dft(&input);
            let mut buf = input.clone();
            fft(&mut buf, Direction::Forward).unwrap();
            assert!(
                max_err(&buf, &expected) < 1e-9 * n as f64,
                "fft diverges from direct DFT at n={n}"
            );
        }
    }

    #[test]
    fn tone_lands_in_single_bin() {
        let n = 64;
        let mut buf = tone(n, 5);
        fft(&mut buf, Direction::Forward).unwrap();
        for (k, v) in buf.iter().enumerate() {
            let expected = if k == 5 { n as f64 } else { 0.0 };
            assert!(
                (v.norm() - expected).abs() < 1e-9,
                "bin {k} = {} for a bin-5 tone",
                v.norm()
            );
        }
    }

    #[test]
    fn dft_matches_fft_on_power_of_two() {
        let input = tone(32, 3);
        let direct = dft(&input, Direction::Forward);
        let mut buf = input.clone();
        fft(&mut buf, Direction::Forward).unwrap();
        assert!(max_err(&direct, &buf) < 1e-9);
    }

    // --- round trips ---

    #[test]
    fn inverse_round_trips() {
        let input = tone(128, 7);
        let mut buf = input.clone();
        fft(&mut buf, Direction::Forward).unwrap();
        fft(&mut buf, Direction::Inverse).unwrap();
        assert!(max_err(&buf, &input) < 1e-10);
    }

    #[test]
    fn dft_inverse_round_trips_non_power_of_two() {
        let input = tone(12, 1);
        let spec = dft(&input, Direction::Forward);
        let back = dft(&spec, Direction::Inverse);
        assert!(max_err(&back, &input) < 1e-10);
    }

    // --- validation ---

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FftPlan::new(12).is_err());
        assert!(FftPlan::new(0).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        let plan = FftPlan::new(8).unwrap();
        let mut buf = vec![Complex64::new(0.0, 0.0); 4];
        assert!(plan.process(&mut buf, Direction::Forward).is_err());
    }
}
