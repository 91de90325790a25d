//! Multilevel discrete wavelet transform.
//!
//! The symmetric boundary mode reflects about the half-sample point
//! (`x[-1] = x[0]`, `x[N] = x[N-1]`) and produces `floor((N + F - 1) / 2)`
//! coefficients per band, the same layout PyWavelets uses for its
//! `symmetric` mode. Periodization is available for lengths divisible by
//! `2^level`; it is an orthogonal transform for every registered wavelet.

use serde::{Deserialize, Serialize};

use super::wavelet::{wavelet, Wavelet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Symmetric,
    Periodization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    /// Coarsest approximation band.
    pub approx: Vec<f64>,
    /// Detail bands, coarsest first and finest last.
    pub details: Vec<Vec<f64>>,
    pub wavelet_code: usize,
    pub level: usize,
    pub boundary: Boundary,
    pub original_length: usize,
}

impl WaveletCoeffs {
    pub fn total_len(&self) -> usize {
        self.approx.len() + self.details.iter().map(Vec::len).sum::<usize>()
    }

    pub fn energy(&self) -> f64 {
        let sq = |v: &Vec<f64>| v.iter().map(|c| c * c).sum::<f64>();
        sq(&self.approx) + self.details.iter().map(sq).sum::<f64>()
    }

    pub fn detail_energy(&self) -> f64 {
        self.details
            .iter()
            .flat_map(|d| d.iter())
            .map(|c| c * c)
            .sum()
    }
}

/// Length of each band produced from an input of `n` samples.
pub fn band_length(n: usize, filter_len: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Symmetric => (n + filter_len - 1) / 2,
        Boundary::Periodization => n / 2,
    }
}

/// Input length at each level, `[n, len_1, ..., len_level]`.
pub fn level_lengths(n: usize, filter_len: usize, level: usize, boundary: Boundary) -> Vec<usize> {
    let mut lens = Vec::with_capacity(level + 1);
    lens.push(n);
    for _ in 0..level {
        let last = *lens.last().unwrap();
        lens.push(band_length(last, filter_len, boundary));
    }
    lens
}

/// Deepest level whose nominal input length `n / 2^(level-1)` still spans
/// `F - 1` samples, i.e. one reflection of the boundary covers the filter.
pub fn max_level(n: usize, filter_len: usize) -> usize {
    let span = filter_len.saturating_sub(1).max(1);
    if n < span {
        return 0;
    }
    ((n as f64 / span as f64).log2().floor() as usize) + 1
}

fn max_level_for(n: usize, filter_len: usize, boundary: Boundary) -> usize {
    let base = max_level(n, filter_len);
    match boundary {
        Boundary::Symmetric => base,
        Boundary::Periodization => {
            let dyadic = if n == 0 { 0 } else { n.trailing_zeros() as usize };
            base.min(dyadic)
        }
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -1 - i;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn analyze_symmetric(x: &[f64], w: &Wavelet) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let f = w.filter_length();
    let out_len = band_length(n, f, Boundary::Symmetric);
    // ext[i + pad] = x~[i] for i in [-pad, n + pad).
    let pad = f;
    let ext: Vec<f64> = (0..n + 2 * pad)
        .map(|i| x[reflect(i as isize - pad as isize, n)])
        .collect();
    let mut lo = vec![0.0; out_len];
    let mut hi = vec![0.0; out_len];
    for o in 0..out_len {
        let base = 2 * o + 1 + pad;
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..f {
            let v = ext[base - j];
            a += w.dec_lo[j] * v;
            d += w.dec_hi[j] * v;
        }
        lo[o] = a;
        hi[o] = d;
    }
    (lo, hi)
}

fn synthesize_symmetric(a: &[f64], d: &[f64], w: &Wavelet, out_len: usize) -> Vec<f64> {
    let f = w.filter_length();
    let l = a.len();
    let mut out = vec![0.0; out_len];
    for (t, slot) in out.iter_mut().enumerate() {
        let k = t + f - 2;
        let n_lo = (k + 1).saturating_sub(f).div_ceil(2);
        let n_hi = (k / 2).min(l - 1);
        let mut s = 0.0;
        for n in n_lo..=n_hi {
            let j = k - 2 * n;
            s += a[n] * w.rec_lo[j] + d[n] * w.rec_hi[j];
        }
        *slot = s;
    }
    out
}

fn analyze_periodic(x: &[f64], w: &Wavelet) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let f = w.filter_length();
    let out_len = n / 2;
    let mut lo = vec![0.0; out_len];
    let mut hi = vec![0.0; out_len];
    for o in 0..out_len {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..f {
            let idx = (2 * o + 1 + n * f - j) % n;
            a += w.dec_lo[j] * x[idx];
            d += w.dec_hi[j] * x[idx];
        }
        lo[o] = a;
        hi[o] = d;
    }
    (lo, hi)
}

/// Adjoint of `analyze_periodic`, which is its inverse since the periodized
/// analysis operator is orthogonal.
fn synthesize_periodic(a: &[f64], d: &[f64], w: &Wavelet) -> Vec<f64> {
    let n = 2 * a.len();
    let f = w.filter_length();
    let mut out = vec![0.0; n];
    for o in 0..a.len() {
        for j in 0..f {
            let idx = (2 * o + 1 + n * f - j) % n;
            out[idx] += w.dec_lo[j] * a[o] + w.dec_hi[j] * d[o];
        }
    }
    out
}

pub fn dwt(x: &[f64], wavelet_code: usize, level: usize) -> Result<WaveletCoeffs> {
    dwt_with(x, wavelet_code, level, Boundary::Symmetric)
}

pub fn dwt_with(
    x: &[f64],
    wavelet_code: usize,
    level: usize,
    boundary: Boundary,
) -> Result<WaveletCoeffs> {
    let w = wavelet(wavelet_code)?;
    if x.len() < 2 {
        return Err(Error::invalid(format!(
            "DWT input must have at least 2 samples, got {}",
            x.len()
        )));
    }
    let max = max_level_for(x.len(), w.filter_length(), boundary);
    if level == 0 || level > max {
        return Err(Error::InvalidLevel { level, max });
    }
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(level);
    for _ in 0..level {
        let (a, d) = match boundary {
            Boundary::Symmetric => analyze_symmetric(&approx, w),
            Boundary::Periodization => analyze_periodic(&approx, w),
        };
        details.push(d);
        approx = a;
    }
    details.reverse();
    Ok(WaveletCoeffs {
        approx,
        details,
        wavelet_code,
        level,
        boundary,
        original_length: x.len(),
    })
}

pub fn idwt(c: &WaveletCoeffs) -> Result<Vec<f64>> {
    let w = wavelet(c.wavelet_code)?;
    let f = w.filter_length();
    if c.level == 0 || c.details.len() != c.level {
        return Err(Error::invalid(format!(
            "level {} with {} detail bands",
            c.level,
            c.details.len()
        )));
    }
    if c.boundary == Boundary::Periodization && c.original_length % (1 << c.level) != 0 {
        return Err(Error::invalid("periodized length not divisible by 2^level"));
    }
    let lens = level_lengths(c.original_length, f, c.level, c.boundary);
    if c.approx.len() != lens[c.level] {
        return Err(Error::invalid(format!(
            "approximation has {} coefficients, expected {}",
            c.approx.len(),
            lens[c.level]
        )));
    }
    // details[0] is the coarsest band, produced at depth `level`.
    for (i, d) in c.details.iter().enumerate() {
        let want = lens[c.level - i];
        if d.len() != want {
            return Err(Error::invalid(format!(
                "detail band {i} has {} coefficients, expected {want}",
                d.len()
            )));
        }
    }
    let mut approx = c.approx.clone();
    for (i, d) in c.details.iter().enumerate() {
        let target = lens[c.level - i - 1];
        approx = match c.boundary {
            Boundary::Symmetric => synthesize_symmetric(&approx, d, w, target),
            Boundary::Periodization => synthesize_periodic(&approx, d, w),
        };
    }
    Ok(approx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::wavelet::{registry, WAVELET_COUNT};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn haar_constant_has_no_detail() {
        let c = dwt(&[1.0; 4], 0, 1).unwrap();
        assert!(c.details[0].iter().all(|&d| d.abs() < 1e-15));
    }

    #[test]
    fn haar_alternating_has_no_approx() {
        let c = dwt(&[1.0, -1.0, 1.0, -1.0], 0, 1).unwrap();
        assert!(c.approx.iter().all(|&a| a.abs() < 1e-15));
        assert!(c.details[0].iter().all(|&d| (d.abs() - 2f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn band_lengths_follow_recurrence() {
        for w in registry() {
            let f = w.filter_length();
            let c = dwt(&random(360, 3), w.code, 4).unwrap();
            // Independent recurrence: L_{j+1} = floor((L_j + F - 1) / 2).
            let mut len = 360usize;
            let mut expect = Vec::new();
            for _ in 0..4 {
                len = (len + f - 1) / 2;
                expect.push(len);
            }
            assert_eq!(c.approx.len(), expect[3], "{}", w.name);
            let got: Vec<usize> = c.details.iter().rev().map(Vec::len).collect();
            assert_eq!(got, expect, "{}", w.name);
        }
    }

    #[test]
    fn matches_frozen_pywavelets_decomposition() {
        // pywt.wavedec(x, "db4", "symmetric", level=3) for
        // x[t] = sin(0.3 t) + 0.05 t, t = 0..40.
        let x: Vec<f64> = (0..40).map(|t| (0.3 * t as f64).sin() + 0.05 * t as f64).collect();
        let c = dwt(&x, 3, 3).unwrap();
        let approx = [
            1.7098872829210676, 1.8812803647807825, 1.7932460722262762, 2.083683774535033,
            1.3062828719856587, 3.2453159181058595, -0.48167110793858053, 3.9040495718511687,
            5.070083368261925, 3.0272714202623154, 2.6543110227739466,
        ];
        let d3 = [
            0.45149501758282495, 1.437816335619586, -0.49956866644066333, -0.16091441712854623,
            -0.1192936896395754, 0.7278233651042851, -1.2143967803459679, 0.5552452650420117,
            -0.23611132255509965, 0.8724163212771896, -0.8949767984031003,
        ];
        let d1_head = [0.013382163943290969, 0.021027561054577946, -0.024615417644455625];
        let d1_tail = [-0.007572532510204203, -0.013476366917667359, 0.02165874070844142];
        for (a, b) in c.approx.iter().zip(approx) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in c.details[0].iter().zip(d3) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(c.details[1].len(), 15);
        let d1 = &c.details[2];
        assert_eq!(d1.len(), 23);
        for (a, b) in d1.iter().zip(d1_head) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in d1[20..].iter().zip(d1_tail) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_reconstruction_all_wavelets_levels() {
        let x = random(360, 11);
        for code in 0..WAVELET_COUNT {
            for level in 1..=4 {
                let c = dwt(&x, code, level).unwrap();
                let y = idwt(&c).unwrap();
                assert_eq!(y.len(), 360);
                let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-8, "code {code} level {level}: {err}");
            }
        }
    }

    #[test]
    fn odd_and_short_lengths_reconstruct() {
        for n in [5, 17, 33, 101] {
            let x = random(n, n as u64);
            for code in [0, 3, 12, 21] {
                let w = wavelet(code).unwrap();
                let max = max_level(n, w.filter_length());
                for level in 1..=max.min(3) {
                    let y = idwt(&dwt(&x, code, level).unwrap()).unwrap();
                    for (a, b) in x.iter().zip(&y) {
                        assert!((a - b).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_coefficients_give_zero_signal() {
        let mut c = dwt(&random(360, 1), 5, 4).unwrap();
        c.approx.iter_mut().for_each(|v| *v = 0.0);
        c.details.iter_mut().flatten().for_each(|v| *v = 0.0);
        assert!(idwt(&c).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_survives_detail_removal() {
        for code in 0..WAVELET_COUNT {
            let mut c = dwt(&[0.42; 360], code, 4).unwrap();
            c.details.iter_mut().flatten().for_each(|v| *v = 0.0);
            let y = idwt(&c).unwrap();
            assert!(y.iter().all(|v| (v - 0.42).abs() < 1e-8), "code {code}");
        }
    }

    #[test]
    fn periodized_transform_conserves_energy() {
        let x = random(256, 5);
        let e: f64 = x.iter().map(|v| v * v).sum();
        for code in 0..WAVELET_COUNT {
            let c = dwt_with(&x, code, 4, Boundary::Periodization).unwrap();
            assert_eq!(c.total_len(), 256);
            assert!((c.energy() - e).abs() <= 1e-6 * e, "code {code}");
            let y = idwt(&c).unwrap();
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-8, "code {code}");
            }
        }
    }

    #[test]
    fn transform_is_linear() {
        let x = random(360, 21);
        let y = random(360, 22);
        let (a, b) = (1.7, -0.4);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        for code in [0, 7, 14, 20] {
            let cx = dwt(&x, code, 4).unwrap();
            let cy = dwt(&y, code, 4).unwrap();
            let cm = dwt(&mix, code, 4).unwrap();
            let check = |m: &[f64], p: &[f64], q: &[f64]| {
                for i in 0..m.len() {
                    assert!((m[i] - (a * p[i] + b * q[i])).abs() < 1e-9);
                }
            };
            check(&cm.approx, &cx.approx, &cy.approx);
            for j in 0..4 {
                check(&cm.details[j], &cx.details[j], &cy.details[j]);
            }
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(dwt(&[0.0; 8], 22, 1), Err(Error::UnknownWavelet(22))));
        assert!(matches!(dwt(&[0.0; 8], 0, 0), Err(Error::InvalidLevel { .. })));
        assert!(matches!(
            dwt(&[0.0; 8], 0, 5),
            Err(Error::InvalidLevel { level: 5, max: 4 })
        ));
        // db10 has 20 taps; 16 samples cannot be decomposed.
        assert!(matches!(dwt(&[0.0; 16], 9, 1), Err(Error::InvalidLevel { .. })));
        assert!(dwt(&[1.0], 0, 1).is_err());
        assert!(matches!(
            dwt_with(&[0.0; 360], 0, 4, Boundary::Periodization),
            Err(Error::InvalidLevel { max: 3, .. })
        ));

        let mut c = dwt(&random(64, 2), 2, 2).unwrap();
        c.details[1].pop();
        assert!(idwt(&c).is_err());
        let mut c = dwt(&random(64, 2), 2, 2).unwrap();
        c.approx.push(0.0);
        assert!(idwt(&c).is_err());
    }
}
