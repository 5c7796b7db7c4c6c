//! Amplitude spectra of uniformly sampled signals.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// One-sided amplitude spectrum of a uniformly sampled real signal with its
/// mean removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin spacing, in inverse units of the sample step.
    pub resolution: f64,
    pub amplitudes: Vec<f64>,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution
    }

    pub fn bin_of(&self, frequency: f64) -> usize {
        ((frequency / self.resolution).round() as usize).min(self.amplitudes.len() - 1)
    }

    /// Bin with the largest amplitude, ignoring the zero-frequency bin.
    pub fn peak_bin(&self) -> usize {
        (1..self.amplitudes.len())
            .max_by(|&a, &b| self.amplitudes[a].total_cmp(&self.amplitudes[b]))
            .unwrap_or(0)
    }

    pub fn peak_frequency(&self) -> f64 {
        self.frequency(self.peak_bin())
    }

    /// Largest amplitude within `±half_width` bins of `frequency`.
    pub fn amplitude_near(&self, frequency: f64, half_width: usize) -> f64 {
        let k = self.bin_of(frequency);
        let lo = k.saturating_sub(half_width).max(1);
        let hi = (k + half_width).min(self.amplitudes.len() - 1);
        (lo..=hi).map(|b| self.amplitudes[b]).fold(0.0, f64::max)
    }
}

pub fn amplitude_spectrum(samples: &[f64], step: f64) -> Result<Spectrum> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::validation("spectrum needs at least 4 samples"));
    }
    if !(step > 0.0) {
        return Err(Error::validation("sample step must be > 0"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let amplitudes = buf[..n / 2 + 1].iter().map(|z| 2.0 * z.norm() / n as f64).collect();
    Ok(Spectrum {
        resolution: 1.0 / (n as f64 * step),
        amplitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tone() {
        let step = 0.01;
        let f = 12.5;
        let x: Vec<f64> = (0..4000).map(|k| 0.3 + 0.7 * (std::f64::consts::TAU * f * k as f64 * step).cos()).collect();
        let s = amplitude_spectrum(&x, step).unwrap();
        assert!((s.peak_frequency() - f).abs() <= s.resolution);
        assert!((s.amplitudes[s.peak_bin()] - 0.7).abs() < 1e-9);
        assert!(s.amplitude_near(30.0, 1) < 1e-9);
    }

    #[test]
    fn rejects_short_input() {
        assert!(amplitude_spectrum(&[1.0, 2.0], 1.0).is_err());
    }
}
