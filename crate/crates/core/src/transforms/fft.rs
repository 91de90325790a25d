//! Real-input FFT in half-spectrum form, backed by `rustfft`'s mixed-radix
//! planner so arbitrary lengths (e.g. 360 = 2^3 3^2 5) are supported.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Non-negative-frequency bins of a real signal's DFT.
///
/// Unnormalised forward convention: `X[k] = sum_n x[n] e^{-2 pi i k n / N}`,
/// so Parseval reads `sum x^2 = (1/N) sum_k |X[k]|^2` over the full spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumHalf {
    pub bins: Vec<Complex64>,
    pub original_length: usize,
}

impl SpectrumHalf {
    pub fn expected_bins(n: usize) -> usize {
        n / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.original_length < 2 {
            return Err(Error::invalid(format!(
                "spectrum of length {} (need at least 2)",
                self.original_length
            )));
        }
        let want = Self::expected_bins(self.original_length);
        if self.bins.len() != want {
            return Err(Error::invalid(format!(
                "spectrum has {} bins, expected {want} for length {}",
                self.bins.len(),
                self.original_length
            )));
        }
        Ok(())
    }

    /// `sum_k |X[k]|^2` over the full (two-sided) spectrum.
    pub fn full_energy(&self) -> f64 {
        let n = self.original_length;
        self.bins
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let mirrored = k != 0 && !(n % 2 == 0 && k == n / 2);
                if mirrored {
                    2.0 * c.norm_sqr()
                } else {
                    c.norm_sqr()
                }
            })
            .sum()
    }

    /// Frequency in Hz of bin `k` at the given sampling rate.
    pub fn bin_frequency(&self, k: usize, sampling_rate_hz: f64) -> f64 {
        k as f64 * sampling_rate_hz / self.original_length as f64
    }
}

/// Cached forward/inverse plans for one transform length.
#[derive(Clone)]
pub struct RealFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RealFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealFft").field("n", &self.n).finish()
    }
}

impl RealFft {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "FFT length must be at least 2, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(RealFft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn forward(&self, x: &[f64]) -> Result<SpectrumHalf> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "input length {} does not match plan length {}",
                x.len(),
                self.n
            )));
        }
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf.truncate(SpectrumHalf::expected_bins(self.n));
        Ok(SpectrumHalf {
            bins: buf,
            original_length: self.n,
        })
    }

    /// Inverse of [`RealFft::forward`]. The half spectrum is extended by
    /// Hermitian symmetry; the imaginary residue of the result is discarded.
    pub fn inverse(&self, s: &SpectrumHalf) -> Result<Vec<f64>> {
        s.validate()?;
        if s.original_length != self.n {
            return Err(Error::invalid(format!(
                "spectrum length {} does not match plan length {}",
                s.original_length, self.n
            )));
        }
        let n = self.n;
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        full[..s.bins.len()].copy_from_slice(&s.bins);
        for k in 1..s.bins.len() {
            if n - k >= s.bins.len() {
                full[n - k] = s.bins[k].conj();
            }
        }
        self.inverse.process(&mut full);
        let scale = 1.0 / n as f64;
        Ok(full.into_iter().map(|c| c.re * scale).collect())
    }
}

pub fn fft_real(x: &[f64]) -> Result<SpectrumHalf> {
    RealFft::new(x.len())?.forward(x)
}

pub fn ifft_real(s: &SpectrumHalf) -> Result<Vec<f64>> {
    s.validate()?;
    RealFft::new(s.original_length)?.inverse(s)
}
