//! Per-window filter labels from an exhaustive parameter sweep, and the
//! labeled dataset built from them.
//!
//! For each window both filters are swept over their parameter domains and
//! scored by SNR against the clean window. The label records which filter
//! won (`alpha`), its SNR (`beta_db`) and the winning parameter (`delta`).

mod persist;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{apply_gains, EllipticDesign, EllipticPreset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, stream};
use crate::signal::{
    add_noise, gaussian_noise, minmax_normalize, snr_db, window, NoiseConfig, NoiseMode, Signal,
};
use crate::transforms::{registry_hash, wavelet, RealFft, WAVELET_COUNT};
use crate::wavelet_filter::{apply_wavelet_with, ShrinkageConfig};

pub use persist::{clean_path, metadata_path, read_dataset, write_dataset, DatasetMetadata};

/// Windows whose best SNR is at or below this are dropped as anomalies.
pub const REJECTION_DB: f64 = -3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Elliptic,
    Wavelet,
}

impl FilterKind {
    pub fn alpha(self) -> u8 {
        match self {
            FilterKind::Elliptic => 0,
            FilterKind::Wavelet => 1,
        }
    }

    pub fn from_alpha(alpha: u8) -> Result<Self> {
        match alpha {
            0 => Ok(FilterKind::Elliptic),
            1 => Ok(FilterKind::Wavelet),
            a => Err(Error::invalid(format!("filter label must be 0 or 1, got {a}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub elliptic_min_hz: u32,
    pub elliptic_max_hz: u32,
    pub elliptic_step_hz: u32,
    pub wavelet_codes: Vec<usize>,
    pub elliptic_preset: EllipticPreset,
    pub shrinkage: ShrinkageConfig,
    pub sampling_rate_hz: f64,
    /// Drives delta tie-breaks and the train/test split.
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            elliptic_min_hz: 1,
            elliptic_max_hz: 100,
            elliptic_step_hz: 1,
            wavelet_codes: (0..WAVELET_COUNT).collect(),
            elliptic_preset: EllipticPreset::default(),
            shrinkage: ShrinkageConfig::default(),
            sampling_rate_hz: 360.0,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.elliptic_min_hz == 0 || self.elliptic_step_hz == 0 {
            return Err(Error::config("elliptic sweep bounds and step must be positive"));
        }
        if self.elliptic_min_hz > self.elliptic_max_hz {
            return Err(Error::config(format!(
                "elliptic sweep is empty: min {} Hz > max {} Hz",
                self.elliptic_min_hz, self.elliptic_max_hz
            )));
        }
        if !(self.sampling_rate_hz > 0.0 && self.sampling_rate_hz.is_finite()) {
            return Err(Error::config("sampling rate must be positive"));
        }
        let nyquist = 0.5 * self.sampling_rate_hz;
        if f64::from(self.elliptic_max_hz) >= nyquist {
            return Err(Error::NyquistViolation {
                cutoff_hz: f64::from(self.elliptic_max_hz),
                nyquist_hz: nyquist,
            });
        }
        if self.wavelet_codes.is_empty() {
            return Err(Error::config("wavelet sweep is empty"));
        }
        for &c in &self.wavelet_codes {
            wavelet(c)?;
        }
        Ok(())
    }

    /// `min, min + step, ...` up to and including `max` when on the grid.
    pub fn elliptic_cutoffs(&self) -> Vec<u32> {
        (self.elliptic_min_hz..=self.elliptic_max_hz)
            .step_by(self.elliptic_step_hz as usize)
            .collect()
    }
}

/// `(alpha, beta, delta)` plus both filters' individual optima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowLabel {
    pub alpha: u8,
    pub beta_db: f64,
    pub delta: u32,
    pub beta0_db: f64,
    pub delta0_raw: u32,
    pub beta1_db: f64,
    pub delta1_raw: u32,
}

impl WindowLabel {
    /// Ties go to the elliptic filter.
    pub fn from_optima(best0: (f64, u32), best1: (f64, u32)) -> Self {
        let alpha = if best0.0 >= best1.0 { 0 } else { 1 };
        let (beta_db, delta) = if alpha == 0 { best0 } else { best1 };
        WindowLabel {
            alpha,
            beta_db,
            delta,
            beta0_db: best0.0,
            delta0_raw: best0.1,
            beta1_db: best1.0,
            delta1_raw: best1.1,
        }
    }

    pub fn filter(&self) -> FilterKind {
        if self.alpha == 0 {
            FilterKind::Elliptic
        } else {
            FilterKind::Wavelet
        }
    }
}

/// Whether candidate `a` beats `b`: higher SNR, then smaller parameter.
/// A total order, so the sweep result does not depend on visiting order.
fn beats(a: (f64, u32), b: (f64, u32)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Precomputed FFT plan and per-cutoff gain tables for one window length.
#[derive(Debug, Clone)]
pub struct Sweeper {
    cfg: SweepConfig,
    fft: RealFft,
    cutoffs: Vec<u32>,
    gains: Vec<Vec<f64>>,
}

impl Sweeper {
    pub fn new(cfg: &SweepConfig, window_length: usize) -> Result<Self> {
        cfg.validate()?;
        let fft = RealFft::new(window_length)?;
        let cutoffs = cfg.elliptic_cutoffs();
        let base = EllipticDesign::from_preset(
            &cfg.elliptic_preset,
            f64::from(cutoffs[0]),
            cfg.sampling_rate_hz,
        )?;
        let gains = cutoffs
            .iter()
            .map(|&c| Ok(base.with_cutoff(f64::from(c))?.bin_gains(window_length)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sweeper {
            cfg: cfg.clone(),
            fft,
            cutoffs,
            gains,
        })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.cfg
    }

    pub fn window_length(&self) -> usize {
        self.fft.len()
    }

    fn check(&self, x: &[f64], z: &[f64]) -> Result<()> {
        let n = self.window_length();
        if x.len() != n || z.len() != n {
            return Err(Error::invalid(format!(
                "windows of length {} and {} for a sweep of length {n}",
                x.len(),
                z.len()
            )));
        }
        Ok(())
    }

    /// Filter `z` with one filter at one parameter.
    pub fn filter(&self, z: &[f64], kind: FilterKind, param: u32) -> Result<Vec<f64>> {
        match kind {
            FilterKind::Elliptic => {
                let i = self
                    .cutoffs
                    .iter()
                    .position(|&c| c == param)
                    .ok_or_else(|| Error::invalid(format!("{param} Hz is not in the sweep")))?;
                apply_gains(&self.fft, z, &self.gains[i])
            }
            FilterKind::Wavelet => apply_wavelet_with(z, param as usize, &self.cfg.shrinkage),
        }
    }

    /// Best SNR over one filter's sweep domain and its argmax.
    pub fn sweep(&self, x: &[f64], z: &[f64], kind: FilterKind) -> Result<(f64, u32)> {
        self.check(x, z)?;
        let mut best: Option<(f64, u32)> = None;
        let mut consider = |cand: (f64, u32)| {
            if best.is_none_or(|b| beats(cand, b)) {
                best = Some(cand);
            }
        };
        match kind {
            FilterKind::Elliptic => {
                let spec = self.fft.forward(z)?;
                let mut buf = spec.clone();
                for (&cutoff, gains) in self.cutoffs.iter().zip(&self.gains) {
                    for ((b, s), g) in buf.bins.iter_mut().zip(&spec.bins).zip(gains) {
                        *b = s * g;
                    }
                    let r = self.fft.inverse(&buf)?;
                    consider((snr_db(x, &r)?, cutoff));
                }
            }
            FilterKind::Wavelet => {
                for &code in &self.cfg.wavelet_codes {
                    let r = apply_wavelet_with(z, code, &self.cfg.shrinkage)?;
                    consider((snr_db(x, &r)?, code as u32));
                }
            }
        }
        best.ok_or_else(|| Error::config("empty sweep domain"))
    }

    pub fn omega(&self, x: &[f64], z: &[f64]) -> Result<WindowLabel> {
        let best0 = self.sweep(x, z, FilterKind::Elliptic)?;
        let best1 = self.sweep(x, z, FilterKind::Wavelet)?;
        Ok(WindowLabel::from_optima(best0, best1))
    }
}

pub fn sweep_filter(x: &[f64], z: &[f64], kind: FilterKind, cfg: &SweepConfig) -> Result<(f64, u32)> {
    Sweeper::new(cfg, z.len())?.sweep(x, z, kind)
}

pub fn omega(x: &[f64], z: &[f64], cfg: &SweepConfig) -> Result<WindowLabel> {
    Sweeper::new(cfg, z.len())?.omega(x, z)
}

/// Most frequent value; ties (including all-distinct input) are broken by a
/// uniform draw from the tied values in ascending order.
pub fn modal_value<R: Rng>(values: &[u32], rng: &mut R) -> Result<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let top = counts
        .values()
        .copied()
        .max()
        .ok_or_else(|| Error::invalid("mode of an empty sequence"))?;
    let tied: Vec<u32> = counts
        .into_iter()
        .filter(|&(_, c)| c == top)
        .map(|(v, _)| v)
        .collect();
    if tied.len() == 1 {
        return Ok(tied[0]);
    }
    Ok(tied[rng.random_range(0..tied.len())])
}

/// Mean elliptic cutoff and modal wavelet code over all labels.
pub fn aggregate_deltas(labels: &[WindowLabel], seed: u64) -> Result<(f64, u32)> {
    if labels.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty label set"));
    }
    let delta0 = labels.iter().map(|l| f64::from(l.delta0_raw)).sum::<f64>() / labels.len() as f64;
    let codes: Vec<u32> = labels.iter().map(|l| l.delta1_raw).collect();
    let delta1 = modal_value(&codes, &mut rng_for(seed, stream::DELTA_TIE, 0))?;
    Ok((delta0, delta1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// How noise is generated for a corpus. `mu` and `sigma` are taken from each
/// clean signal; each signal gets its own seed derived from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusNoise {
    pub mode: NoiseMode,
    pub seed: u64,
}

/// A clean window and its noisy counterpart, both on the normalised scale.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub signal_id: String,
    pub window_index: usize,
    pub noisy: Vec<f64>,
    pub clean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub signal_id: String,
    pub window_index: usize,
    pub noisy: Vec<f64>,
    pub clean: Vec<f64>,
    pub label: WindowLabel,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub noise: CorpusNoise,
    pub sweep: SweepConfig,
    pub lambda: usize,
    pub split_fraction: f64,
    pub registry_hash: String,
    pub windows_before_rejection: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub windows: Vec<LabeledWindow>,
    pub delta0_agg: f64,
    pub delta1_agg: u32,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn window_length(&self) -> usize {
        self.provenance.lambda
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn split(&self, which: Split) -> impl Iterator<Item = &LabeledWindow> + '_ {
        self.windows.iter().filter(move |w| w.split == which)
    }

    pub fn split_len(&self, which: Split) -> usize {
        self.split(which).count()
    }

    /// Window counts per label, `[elliptic, wavelet]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0, 0];
        for w in &self.windows {
            counts[w.label.alpha as usize] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<WindowLabel> {
        self.windows.iter().map(|w| w.label).collect()
    }
}

/// `signal + noise` for the `index`-th corpus signal, before normalisation.
pub fn noisy_signal(s: &Signal, noise: &CorpusNoise, index: usize) -> Result<Signal> {
    let cfg = NoiseConfig::for_signal(s, noise.mode, derive_seed(noise.seed, stream::NOISE, index as u64))?;
    add_noise(s, &gaussian_noise(s, &cfg)?)
}

/// Adds noise to each signal, normalises clean and noisy signals to
/// `[0, 1]` independently, and cuts both into windows of `lambda`.
pub fn prepare_windows(signals: &[Signal], noise: &CorpusNoise, lambda: usize) -> Result<Vec<WindowPair>> {
    let per_signal = signals
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let z = noisy_signal(s, noise, i)?;
            let zw = window(&minmax_normalize(&z)?, lambda)?;
            let xw = window(&minmax_normalize(s)?, lambda)?;
            Ok(zw
                .rows()
                .zip(xw.rows())
                .enumerate()
                .map(|(m, (zr, xr))| WindowPair {
                    signal_id: s.id().to_owned(),
                    window_index: m,
                    noisy: zr.to_vec(),
                    clean: xr.to_vec(),
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_signal.into_iter().flatten().collect())
}

/// Labels every pair, dropping windows whose best SNR is at or below
/// [`REJECTION_DB`]. Output keeps input order.
pub fn label_windows(pairs: Vec<WindowPair>, sweeper: &Sweeper) -> Result<(Vec<(WindowPair, WindowLabel)>, usize)> {
    let labels = pairs
        .par_iter()
        .map(|p| sweeper.omega(&p.clean, &p.noisy))
        .collect::<Result<Vec<_>>>()?;
    let total = pairs.len();
    let kept: Vec<_> = pairs
        .into_iter()
        .zip(labels)
        .filter(|(_, l)| l.beta_db > REJECTION_DB)
        .collect();
    let rejected = total - kept.len();
    Ok((kept, rejected))
}

/// Seeded uniform shuffle; the first `round(fraction * n)` go to training.
pub fn split_assignment(n: usize, fraction: f64, seed: u64) -> Result<Vec<Split>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, stream::SPLIT, 0));
    let n_train = (fraction * n as f64).round() as usize;
    let mut out = vec![Split::Test; n];
    for &i in &order[..n_train] {
        out[i] = Split::Train;
    }
    Ok(out)
}

pub fn build_dataset(
    signals: &[Signal],
    cfg: &SweepConfig,
    noise: &CorpusNoise,
    lambda: usize,
    split_fraction: f64,
) -> Result<LabeledDataset> {
    if signals.is_empty() {
        return Err(Error::invalid("no signals to label"));
    }
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::config(format!(
            "split fraction must be in (0, 1), got {split_fraction}"
        )));
    }
    for s in signals {
        if s.len() % lambda != 0 {
            return Err(Error::NonDivisibleLength { len: s.len(), lambda });
        }
        if s.sampling_rate_hz() != cfg.sampling_rate_hz {
            return Err(Error::config(format!(
                "signal `{}` sampled at {} Hz, sweep configured for {} Hz",
                s.id(),
                s.sampling_rate_hz(),
                cfg.sampling_rate_hz
            )));
        }
    }
    let sweeper = Sweeper::new(cfg, lambda)?;
    let pairs = prepare_windows(signals, noise, lambda)?;
    let before = pairs.len();
    let (kept, rejected) = label_windows(pairs, &sweeper)?;
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels: Vec<WindowLabel> = kept.iter().map(|(_, l)| *l).collect();
    let (delta0_agg, delta1_agg) = aggregate_deltas(&labels, cfg.seed)?;
    let splits = split_assignment(kept.len(), split_fraction, cfg.seed)?;
    let windows = kept
        .into_iter()
        .zip(splits)
        .map(|((p, label), split)| LabeledWindow {
            signal_id: p.signal_id,
            window_index: p.window_index,
            noisy: p.noisy,
            clean: p.clean,
            label,
            split,
        })
        .collect();
    let ds = LabeledDataset {
        windows,
        delta0_agg,
        delta1_agg,
        provenance: Provenance {
            noise: *noise,
            sweep: cfg.clone(),
            lambda,
            split_fraction,
            registry_hash: registry_hash(),
            windows_before_rejection: before,
            rejected,
        },
    };
    verify_labels(&ds, &sweeper)?;
    Ok(ds)
}

/// Re-applies both filters at their recorded optima and checks the winner's
/// SNR is at least the loser's and that both match the stored values.
pub fn verify_labels(ds: &LabeledDataset, sweeper: &Sweeper) -> Result<()> {
    let violations: usize = ds
        .windows
        .par_iter()
        .map(|w| -> Result<usize> {
            let l = &w.label;
            let r0 = sweeper.filter(&w.noisy, FilterKind::Elliptic, l.delta0_raw)?;
            let r1 = sweeper.filter(&w.noisy, FilterKind::Wavelet, l.delta1_raw)?;
            let (s0, s1) = (snr_db(&w.clean, &r0)?, snr_db(&w.clean, &r1)?);
            let (win, lose) = if l.alpha == 0 { (s0, s1) } else { (s1, s0) };
            let consistent = win >= lose && s0 == l.beta0_db && s1 == l.beta1_db;
            Ok(usize::from(!consistent))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    if violations > 0 {
        return Err(Error::LabelVerification(violations));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
