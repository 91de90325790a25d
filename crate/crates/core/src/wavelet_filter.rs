//! Wavelet shrinkage: soft-threshold every detail coefficient with a single
//! universal threshold and reconstruct. Approximation coefficients are
//! never touched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::signal_stats;
use crate::transforms::{dwt_with, idwt, Boundary, WaveletCoeffs};

/// Decomposition depth used for labeling at N = 360.
pub const DEFAULT_LEVEL: usize = 4;

/// Where the noise scale in `sigma sqrt(2 ln N)` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseEstimate {
    /// Population standard deviation of the whole input window.
    #[default]
    WindowStd,
    /// `median(|d|) / 0.6745` over the finest detail band.
    FinestDetailMad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageConfig {
    pub level: usize,
    pub boundary: Boundary,
    pub noise_estimate: NoiseEstimate,
}

impl Default for ShrinkageConfig {
    fn default() -> Self {
        ShrinkageConfig {
            level: DEFAULT_LEVEL,
            boundary: Boundary::Symmetric,
            noise_estimate: NoiseEstimate::WindowStd,
        }
    }
}

/// `sigma sqrt(2 ln N)` with `sigma` the population std of `z`.
pub fn universal_threshold(z: &[f64]) -> Result<f64> {
    if z.len() < 2 {
        return Err(Error::invalid(format!(
            "threshold needs at least 2 samples, got {}",
            z.len()
        )));
    }
    let (_, sigma) = signal_stats(z)?;
    Ok(sigma * (2.0 * (z.len() as f64).ln()).sqrt())
}

pub fn soft_threshold(u: f64, threshold: f64) -> f64 {
    debug_assert!(threshold >= 0.0);
    let mag = u.abs() - threshold;
    if mag >= 0.0 {
        u.signum() * mag
    } else {
        0.0
    }
}

fn mad_threshold(c: &WaveletCoeffs, n: usize) -> f64 {
    let mut finest: Vec<f64> = c
        .details
        .last()
        .map(|d| d.iter().map(|v| v.abs()).collect())
        .unwrap_or_default();
    if finest.is_empty() {
        return 0.0;
    }
    finest.sort_by(f64::total_cmp);
    let mid = finest.len() / 2;
    let median = if finest.len() % 2 == 0 {
        0.5 * (finest[mid - 1] + finest[mid])
    } else {
        finest[mid]
    };
    median / 0.6745 * (2.0 * (n as f64).ln()).sqrt()
}

/// Soft-thresholds every detail band of `c` in place.
pub fn shrink_details(c: &mut WaveletCoeffs, threshold: f64) {
    for band in &mut c.details {
        for v in band.iter_mut() {
            *v = soft_threshold(*v, threshold);
        }
    }
}

pub fn apply_wavelet(z: &[f64], wavelet_code: usize) -> Result<Vec<f64>> {
    apply_wavelet_with(z, wavelet_code, &ShrinkageConfig::default())
}

pub fn apply_wavelet_with(z: &[f64], wavelet_code: usize, cfg: &ShrinkageConfig) -> Result<Vec<f64>> {
    if z.len() < 2 {
        return Err(Error::invalid(format!(
            "wavelet filtering needs at least 2 samples, got {}",
            z.len()
        )));
    }
    let mut c = dwt_with(z, wavelet_code, cfg.level, cfg.boundary)?;
    let threshold = match cfg.noise_estimate {
        NoiseEstimate::WindowStd => universal_threshold(z)?,
        NoiseEstimate::FinestDetailMad => mad_threshold(&c, z.len()),
    };
    shrink_details(&mut c, threshold);
    idwt(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::snr_db;
    use crate::transforms::{dwt, WAVELET_COUNT};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Window of length `n` whose population std is exactly `sigma`.
    fn with_std(n: usize, sigma: f64) -> Vec<f64> {
        (0..n).map(|i| if i % 2 == 0 { sigma } else { -sigma }).collect()
    }

    #[test]
    fn universal_threshold_values() {
        // sqrt(2 ln 360) = 3.431065...; the commonly quoted 3.4312 / 0.34312
        // are within 1.4e-4 relative.
        let want = (2.0 * 360f64.ln()).sqrt();
        assert!((universal_threshold(&with_std(360, 1.0)).unwrap() - want).abs() < 1e-12);
        assert!((want - 3.4312).abs() < 2e-4);
        let tenth = universal_threshold(&with_std(360, 0.1)).unwrap();
        assert!((tenth - 0.1 * want).abs() < 1e-13);
        assert!((tenth - 0.34312).abs() < 2e-5);
        assert_eq!(universal_threshold(&[0.4; 360]).unwrap(), 0.0);
        assert!(universal_threshold(&[1.0]).is_err());
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 3.0), 2.0);
        assert_eq!(soft_threshold(-5.0, 3.0), -2.0);
        assert_eq!(soft_threshold(2.0, 3.0), 0.0);
        assert_eq!(soft_threshold(-0.75, 0.0), -0.75);
        assert_eq!(soft_threshold(3.0, 3.0), 0.0);
    }

    #[test]
    fn constant_window_unchanged() {
        for code in 0..WAVELET_COUNT {
            let out = apply_wavelet(&[0.37; 360], code).unwrap();
            assert_eq!(out.len(), 360);
            assert!(out.iter().all(|v| (v - 0.37).abs() < 1e-8), "code {code}");
        }
    }

    #[test]
    fn unknown_code_rejected() {
        assert!(matches!(
            apply_wavelet(&[0.0, 1.0, 2.0, 3.0], 22),
            Err(Error::UnknownWavelet(22))
        ));
    }

    #[test]
    fn detail_energy_never_grows() {
        for code in [0, 3, 12, 21] {
            let z = random(360, code as u64);
            let out = apply_wavelet(&z, code).unwrap();
            let before = dwt(&z, code, DEFAULT_LEVEL).unwrap().detail_energy();
            let after = dwt(&out, code, DEFAULT_LEVEL).unwrap().detail_energy();
            assert!(after <= before + 1e-9, "code {code}: {after} > {before}");
        }
    }

    #[test]
    fn denoises_perturbed_sinusoid_with_haar() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let clean: Vec<f64> = (0..360)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 360.0).sin())
            .collect();
        let noisy: Vec<f64> = clean.iter().map(|v| v + 0.3 * rng.random_range(-1.0..1.0)).collect();
        let out = apply_wavelet(&noisy, 0).unwrap();
        assert!(snr_db(&clean, &out).unwrap() >= snr_db(&clean, &noisy).unwrap());
    }

    #[test]
    fn change_bounded_by_removed_detail_energy() {
        // Periodization makes the transform orthogonal, so the change in the
        // window equals the change in the detail coefficients.
        let cfg = ShrinkageConfig {
            boundary: Boundary::Periodization,
            ..ShrinkageConfig::default()
        };
        for code in [0, 1, 5, 14, 18] {
            let z = random(368, 40 + code as u64);
            let out = apply_wavelet_with(&z, code, &cfg).unwrap();
            let mut c = dwt_with(&z, code, DEFAULT_LEVEL, Boundary::Periodization).unwrap();
            let before = c.clone();
            shrink_details(&mut c, universal_threshold(&z).unwrap());
            let removed: f64 = before
                .details
                .iter()
                .flatten()
                .zip(c.details.iter().flatten())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let change: f64 = z.iter().zip(&out).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((change - removed).abs() <= 1e-6 * removed.max(1.0), "code {code}");
        }
    }

    #[test]
    fn constant_output_is_a_fixed_point() {
        let once = apply_wavelet(&[1.5; 360], 7).unwrap();
        let twice = apply_wavelet(&once, 7).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn mad_estimate_is_opt_in() {
        let noise = random(360, 3);
        let z: Vec<f64> = (0..360)
            .map(|t| (2.0 * std::f64::consts::PI * 3.0 * t as f64 / 360.0).sin() + 0.05 * noise[t])
            .collect();
        let cfg = ShrinkageConfig {
            noise_estimate: NoiseEstimate::FinestDetailMad,
            ..ShrinkageConfig::default()
        };
        let a = apply_wavelet(&z, 4).unwrap();
        let b = apply_wavelet_with(&z, 4, &cfg).unwrap();
        assert_eq!(b.len(), 360);
        assert!(a.iter().zip(&b).any(|(p, q)| (p - q).abs() > 1e-12));
    }

    proptest! {
        #[test]
        fn soft_threshold_is_odd_and_lipschitz(
            u in -100.0f64..100.0,
            v in -100.0f64..100.0,
            t in 0.0f64..50.0,
        ) {
            prop_assert_eq!(soft_threshold(-u, t), -soft_threshold(u, t));
            prop_assert!((soft_threshold(u, t) - soft_threshold(v, t)).abs() <= (u - v).abs() + 1e-12);
            prop_assert!(soft_threshold(u, t).abs() <= u.abs());
        }
    }
}
