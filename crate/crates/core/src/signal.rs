//! Sampled signals, noise synthesis, windowing and the SNR/RMSE metrics.
//!
//! Standard deviation is the population form (divide by `N`) everywhere in
//! the crate.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty, uniformly sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    id: String,
    samples: Vec<f64>,
    sampling_rate_hz: f64,
}

impl Signal {
    pub fn new(id: impl Into<String>, samples: Vec<f64>, sampling_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("signal has no samples"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        if !(sampling_rate_hz > 0.0 && sampling_rate_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        Ok(Signal {
            id: id.into(),
            samples,
            sampling_rate_hz,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate_hz
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn stats(&self) -> (f64, f64) {
        // Non-empty by construction.
        mean_std(&self.samples)
    }
}

// Shifted by the first sample so a constant sequence has std exactly 0.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let shift = xs[0];
    let offset = xs.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = xs
        .iter()
        .map(|v| (v - shift - offset) * (v - shift - offset))
        .sum::<f64>()
        / n;
    (shift + offset, var.sqrt())
}

/// Arithmetic mean and population standard deviation.
pub fn signal_stats(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::invalid("statistics of an empty sequence"));
    }
    Ok(mean_std(samples))
}

/// Maps samples linearly onto `[0, 1]`.
pub fn minmax_normalize_slice(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot normalize an empty sequence"));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::DegenerateSignal(lo));
    }
    Ok(samples
        .iter()
        .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
        .collect())
}

pub fn minmax_normalize(s: &Signal) -> Result<Signal> {
    Ok(Signal {
        id: s.id.clone(),
        samples: minmax_normalize_slice(&s.samples)?,
        sampling_rate_hz: s.sampling_rate_hz,
    })
}

/// How additive noise is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// The Gaussian density evaluated at a uniform draw on `[0, 1)`:
    /// `g = exp(-(r - mu)^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`.
    #[default]
    PaperLiteral,
    /// Draws from `N(mu, sigma^2)`.
    Sampled,
}

impl NoiseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::PaperLiteral => "paper_literal",
            NoiseMode::Sampled => "sampled",
        }
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_literal" => Ok(NoiseMode::PaperLiteral),
            "sampled" => Ok(NoiseMode::Sampled),
            other => Err(Error::config(format!("unknown noise mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub mode: NoiseMode,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseConfig {
    /// Noise parameterised by the mean and standard deviation of `s` itself.
    pub fn for_signal(s: &Signal, mode: NoiseMode, seed: u64) -> Result<Self> {
        let (mu, sigma) = s.stats();
        let cfg = NoiseConfig {
            mode,
            mu,
            sigma,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!(
                "noise sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::config("noise mu must be finite"));
        }
        Ok(())
    }
}

pub fn gaussian_pdf(r: f64, mu: f64, sigma: f64) -> f64 {
    let z = (r - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Noise sequence with the same length and rate as `s`.
///
/// In paper-literal mode every value lies in `(0, 1/(sigma sqrt(2 pi))]`,
/// except that the density underflows to zero once `|r - mu|` exceeds about
/// `38 sigma`.
pub fn gaussian_noise(s: &Signal, cfg: &NoiseConfig) -> Result<Signal> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples: Vec<f64> = match cfg.mode {
        NoiseMode::PaperLiteral => (0..s.len())
            .map(|_| gaussian_pdf(rng.random::<f64>(), cfg.mu, cfg.sigma))
            .collect(),
        NoiseMode::Sampled => {
            let normal = Normal::new(cfg.mu, cfg.sigma)
                .map_err(|e| Error::config(format!("normal distribution: {e}")))?;
            (0..s.len()).map(|_| normal.sample(&mut rng)).collect()
        }
    };
    Signal::new(format!("{}-noise", s.id), samples, s.sampling_rate_hz)
}

pub fn add_noise(x: &Signal, g: &Signal) -> Result<Signal> {
    if x.len() != g.len() {
        return Err(Error::invalid(format!(
            "length mismatch: signal {} vs noise {}",
            x.len(),
            g.len()
        )));
    }
    if x.sampling_rate_hz != g.sampling_rate_hz {
        return Err(Error::invalid(format!(
            "sampling rate mismatch: {} vs {}",
            x.sampling_rate_hz, g.sampling_rate_hz
        )));
    }
    let samples = x.samples.iter().zip(&g.samples).map(|(a, b)| a + b).collect();
    Signal::new(x.id.clone(), samples, x.sampling_rate_hz)
}

/// `M` non-overlapping windows of `N` samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedMatrix {
    data: Vec<f64>,
    window_length: usize,
    source_id: String,
}

impl WindowedMatrix {
    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn num_windows(&self) -> usize {
        self.data.len() / self.window_length
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.window_length..(m + 1) * self.window_length]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.window_length)
    }

    /// Concatenates the rows back into one sequence.
    pub fn flatten(&self) -> Vec<f64> {
        self.data.clone()
    }
}

/// Reshapes `samples` into rows of `lambda` samples. Lengths that are not a
/// multiple of `lambda` are rejected rather than truncated.
pub fn window_slice(samples: &[f64], lambda: usize, source_id: &str) -> Result<WindowedMatrix> {
    if lambda < 2 {
        return Err(Error::invalid(format!(
            "window length must be at least 2, got {lambda}"
        )));
    }
    if samples.is_empty() || samples.len() % lambda != 0 {
        return Err(Error::NonDivisibleLength {
            len: samples.len(),
            lambda,
        });
    }
    Ok(WindowedMatrix {
        data: samples.to_vec(),
        window_length: lambda,
        source_id: source_id.to_owned(),
    })
}

pub fn window(s: &Signal, lambda: usize) -> Result<WindowedMatrix> {
    window_slice(&s.samples, lambda, &s.id)
}

fn check_same_len(x: &[f64], z: &[f64]) -> Result<()> {
    if x.len() != z.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            z.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("empty window"));
    }
    Ok(())
}

/// `10 log10(sum x^2 / sum (x - z)^2)` with `x` the reference.
///
/// Returns `f64::INFINITY` when `z == x` exactly.
pub fn snr_db(x: &[f64], z: &[f64]) -> Result<f64> {
    check_same_len(x, z)?;
    let signal: f64 = x.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::UndefinedReference);
    }
    let residual: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    if residual == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / residual).log10())
}

pub fn rmse(x: &[f64], z: &[f64]) -> Result<f64> {
    check_same_len(x, z)?;
    let ss: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

/// Root mean square of a single series.
pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn sig(xs: &[f64]) -> Signal {
        Signal::new("t", xs.to_vec(), 360.0).unwrap()
    }

    #[test]
    fn signal_rejects_bad_input() {
        assert!(Signal::new("e", vec![], 1.0).is_err());
        assert!(Signal::new("n", vec![1.0, f64::NAN], 1.0).is_err());
        assert!(Signal::new("r", vec![1.0], 0.0).is_err());
    }

    #[test]
    fn stats_hand_cases() {
        assert_eq!(signal_stats(&[1.0, 1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        assert_eq!(signal_stats(&[0.0, 2.0]).unwrap(), (1.0, 1.0));
        let (m, s) = signal_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((s - 1.1180).abs() < 1e-4);
        assert!(signal_stats(&[]).is_err());
    }

    #[test]
    fn minmax_cases() {
        let n = minmax_normalize(&sig(&[0.0, 5.0, 10.0])).unwrap();
        assert_eq!(n.samples(), &[0.0, 0.5, 1.0]);
        let n = minmax_normalize(&sig(&[-1.0, 0.0, 1.0])).unwrap();
        assert_eq!(n.samples(), &[0.0, 0.5, 1.0]);
        assert!(matches!(
            minmax_normalize(&sig(&[3.0, 3.0, 3.0])),
            Err(Error::DegenerateSignal(_))
        ));
    }

    #[test]
    fn paper_literal_peak_and_bounds() {
        let sigma = 0.4;
        let peak = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        assert_eq!(gaussian_pdf(0.3, 0.3, sigma), peak);

        let s = sig(&vec![0.0; 1000]);
        let cfg = NoiseConfig {
            mode: NoiseMode::PaperLiteral,
            mu: 0.3,
            sigma,
            seed: 7,
        };
        let g = gaussian_noise(&s, &cfg).unwrap();
        assert_eq!(g.len(), 1000);
        assert!(g.samples().iter().all(|&v| v > 0.0 && v <= peak));
    }

    #[test]
    fn noise_is_seeded() {
        let s = sig(&vec![0.0; 64]);
        for mode in [NoiseMode::PaperLiteral, NoiseMode::Sampled] {
            let cfg = NoiseConfig {
                mode,
                mu: 0.1,
                sigma: 0.5,
                seed: 42,
            };
            let a = gaussian_noise(&s, &cfg).unwrap();
            let b = gaussian_noise(&s, &cfg).unwrap();
            assert_eq!(a, b);
            let c = gaussian_noise(&s, &NoiseConfig { seed: 43, ..cfg }).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn sampled_noise_moments() {
        let s = sig(&vec![0.0; 20_000]);
        let cfg = NoiseConfig {
            mode: NoiseMode::Sampled,
            mu: 0.5,
            sigma: 2.0,
            seed: 1,
        };
        let (m, sd) = gaussian_noise(&s, &cfg).unwrap().stats();
        assert!((m - 0.5).abs() < 0.05);
        assert!((sd - 2.0).abs() < 0.05);
    }

    #[test]
    fn noise_rejects_bad_sigma() {
        let s = sig(&[1.0, 2.0]);
        for sigma in [0.0, -1.0] {
            let cfg = NoiseConfig {
                mode: NoiseMode::PaperLiteral,
                mu: 0.0,
                sigma,
                seed: 0,
            };
            assert!(matches!(
                gaussian_noise(&s, &cfg),
                Err(Error::InvalidConfig(_))
            ));
        }
        assert!(NoiseConfig::for_signal(&sig(&[2.0, 2.0]), NoiseMode::Sampled, 0).is_err());
    }

    #[test]
    fn add_noise_cases() {
        let x = sig(&[1.0, 2.0]);
        assert_eq!(add_noise(&x, &sig(&[0.0, 0.0])).unwrap().samples(), &[1.0, 2.0]);
        assert_eq!(add_noise(&x, &sig(&[0.5, -0.5])).unwrap().samples(), &[1.5, 1.5]);
        assert!(add_noise(&sig(&[1.0, 2.0, 3.0]), &sig(&[0.0; 4])).is_err());
        let other_rate = Signal::new("g", vec![0.0, 0.0], 250.0).unwrap();
        assert!(add_noise(&x, &other_rate).is_err());
    }

    #[test]
    fn window_cases() {
        let s = sig(&(0..3600).map(f64::from).collect::<Vec<_>>());
        let w = window(&s, 360).unwrap();
        assert_eq!((w.num_windows(), w.window_length()), (10, 360));
        assert_eq!(w.row(1)[0], 360.0);

        let w = window(&sig(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(w.rows().collect::<Vec<_>>(), vec![&[1.0, 2.0][..], &[3.0, 4.0][..]]);

        assert!(matches!(
            window(&sig(&[0.0; 10]), 3),
            Err(Error::NonDivisibleLength { len: 10, lambda: 3 })
        ));
        assert!(window(&sig(&[0.0; 10]), 1).is_err());
    }

    #[test]
    fn snr_hand_cases() {
        let v = snr_db(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((v - 10.0 * 4f64.log10()).abs() < 1e-12);
        assert!((v - 6.0206).abs() < 1e-4);
        assert_eq!(snr_db(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(snr_db(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), f64::INFINITY);
        assert!(matches!(
            snr_db(&[0.0, 0.0], &[1.0, 2.0]),
            Err(Error::UndefinedReference)
        ));
        assert!(snr_db(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn snr_is_not_symmetric() {
        let x = [1.0, 2.0, 3.0];
        let z = [2.0, 2.0, 2.0];
        let a = snr_db(&x, &z).unwrap();
        let b = snr_db(&z, &x).unwrap();
        // Same residual, different reference energy.
        assert!((a - 10.0 * (14.0f64 / 2.0).log10()).abs() < 1e-12);
        assert!((b - 10.0 * (12.0f64 / 2.0).log10()).abs() < 1e-12);
    }

    #[test]
    fn rmse_hand_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 0.0]).unwrap(), 0.5);
        let v = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn minmax_idempotent(xs in prop::collection::vec(-1e3f64..1e3, 2..64)) {
            prop_assume!(xs.iter().any(|&v| v != xs[0]));
            let once = minmax_normalize_slice(&xs).unwrap();
            let twice = minmax_normalize_slice(&once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            let lo = once.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = once.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!((lo, hi), (0.0, 1.0));
        }

        #[test]
        fn window_flatten_round_trip(m in 1usize..8, n in 2usize..16, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..m * n).map(|_| rng.random::<f64>()).collect();
            let w = window_slice(&xs, n, "p").unwrap();
            prop_assert_eq!(w.num_windows(), m);
            prop_assert_eq!(w.flatten(), xs);
        }

        #[test]
        fn snr_decreases_with_residual(
            x in prop::collection::vec(0.1f64..2.0, 4..32),
            a in 0.01f64..1.0,
            b in 0.01f64..1.0,
        ) {
            prop_assume!((a - b).abs() > 1e-6);
            let z1: Vec<f64> = x.iter().map(|v| v + a).collect();
            let z2: Vec<f64> = x.iter().map(|v| v + b).collect();
            let s1 = snr_db(&x, &z1).unwrap();
            let s2 = snr_db(&x, &z2).unwrap();
            prop_assert_eq!(a < b, s1 > s2);
        }

        #[test]
        fn rmse_symmetric(
            pairs in prop::collection::vec((-10f64..10.0, -10f64..10.0), 1..32),
        ) {
            let (x, z): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert_eq!(rmse(&x, &z).unwrap(), rmse(&z, &x).unwrap());
        }

        #[test]
        fn paper_literal_positive(
            mu in -2.0f64..2.0,
            sigma in 0.1f64..10.0,
            seed in any::<u64>(),
        ) {
            let s = sig(&[0.0; 128]);
            let cfg = NoiseConfig { mode: NoiseMode::PaperLiteral, mu, sigma, seed };
            let g = gaussian_noise(&s, &cfg).unwrap();
            prop_assert!(g.samples().iter().all(|&v| v > 0.0));
        }
    }
}
