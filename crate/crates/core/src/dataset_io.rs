//! Signal CSV files, corpus manifests and the synthetic ECG generator.
//!
//! Signal CSV:
//!
//! ```text
//! # sampling_rate_hz=360
//! index,value
//! 0,0.0132
//! 1,0.0141
//! ```
//!
//! Manifest CSV: optional `# key=value` lines, then `id,path` with paths
//! relative to the manifest's directory.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::signal::Signal;

const RATE_KEY: &str = "sampling_rate_hz";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        msg: msg.into(),
    }
}

pub fn signal_to_csv(s: &Signal) -> String {
    let mut out = format!("# {RATE_KEY}={}\nindex,value\n", s.sampling_rate_hz());
    for (i, v) in s.samples().iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

pub fn save_signal_csv(s: &Signal, path: &Path) -> Result<()> {
    fs::write(path, signal_to_csv(s))?;
    Ok(())
}

/// Parses signal CSV text; `path` is used for error messages and to derive
/// the signal id (the file stem).
pub fn parse_signal_csv(text: &str, path: &Path) -> Result<Signal> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let rate = match lines.next() {
        Some((_, l)) if l.starts_with('#') => {
            let kv = l.trim_start_matches('#').trim();
            let value = kv
                .strip_prefix(RATE_KEY)
                .and_then(|r| r.trim_start().strip_prefix('='))
                .ok_or_else(|| Error::Metadata {
                    path: path.to_owned(),
                    msg: format!("first line must be `# {RATE_KEY}=<hz>`"),
                })?;
            value.trim().parse::<f64>().map_err(|_| Error::Metadata {
                path: path.to_owned(),
                msg: format!("bad sampling rate `{}`", value.trim()),
            })?
        }
        _ => {
            return Err(Error::Metadata {
                path: path.to_owned(),
                msg: format!("missing `# {RATE_KEY}=<hz>` line"),
            })
        }
    };
    match lines.next() {
        Some((_, "index,value")) => {}
        Some((n, other)) => return Err(parse_err(path, n, format!("expected header `index,value`, found `{other}`"))),
        None => return Err(parse_err(path, 2, "missing header")),
    }
    let mut samples = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (idx, val) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, n, "expected `index,value`"))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| parse_err(path, n, format!("bad index `{idx}`")))?;
        if idx != samples.len() {
            return Err(parse_err(path, n, format!("index {idx} out of sequence, expected {}", samples.len())));
        }
        let v: f64 = val
            .trim()
            .parse()
            .map_err(|_| parse_err(path, n, format!("bad value `{val}`")))?;
        if !v.is_finite() {
            return Err(parse_err(path, n, "non-finite value"));
        }
        samples.push(v);
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "signal".to_owned());
    Signal::new(id, samples, rate).map_err(|e| Error::Metadata {
        path: path.to_owned(),
        msg: e.to_string(),
    })
}

pub fn load_signal_csv(path: &Path) -> Result<Signal> {
    parse_signal_csv(&fs::read_to_string(path)?, path)
}

/// Gaussian bump `(time offset from R in s at 60 bpm, amplitude, width in s)`.
const WAVES: [(f64, f64, f64); 5] = [
    (-0.20, 0.15, 0.025), // P
    (-0.035, -0.15, 0.010), // Q
    (0.0, 1.00, 0.012),   // R
    (0.035, -0.25, 0.010), // S
    (0.30, 0.35, 0.050),  // T
];

const MAX_JITTER: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcgParams {
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    pub heart_rate_bpm: f64,
    /// R-wave height in mV; all waves scale with it.
    pub amplitude_mv: f64,
    pub baseline_mv: f64,
    pub baseline_hz: f64,
}

impl Default for EcgParams {
    fn default() -> Self {
        EcgParams {
            duration_s: 10.0,
            sampling_rate_hz: 360.0,
            heart_rate_bpm: 60.0,
            amplitude_mv: 1.0,
            baseline_mv: 0.05,
            baseline_hz: 0.2,
        }
    }
}

impl EcgParams {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.duration_s) || !positive(self.sampling_rate_hz) || !positive(self.amplitude_mv) {
            return Err(Error::config("duration, sampling rate and amplitude must be positive"));
        }
        if !(40.0..=180.0).contains(&self.heart_rate_bpm) {
            return Err(Error::config(format!(
                "heart rate must be in [40, 180] bpm, got {}",
                self.heart_rate_bpm
            )));
        }
        if !(self.baseline_mv >= 0.0 && self.baseline_mv.is_finite() && self.baseline_hz >= 0.0) {
            return Err(Error::config("baseline amplitude and frequency must be non-negative"));
        }
        Ok(())
    }
}

/// Synthetic ECG: five Gaussian waves per beat on a slow sinusoidal
/// baseline. Each R peak is displaced from its nominal time by at most 2% of
/// the RR interval.
pub fn synth_ecg_with(id: impl Into<String>, seed: u64, p: &EcgParams) -> Result<Signal> {
    p.validate()?;
    let n = (p.duration_s * p.sampling_rate_hz).round() as usize;
    if n == 0 {
        return Err(Error::config("duration shorter than one sample"));
    }
    let mut rng = rng_for(seed, stream::CORPUS, 0);
    let rr = 60.0 / p.heart_rate_bpm;
    // Wave offsets and widths shrink with the RR interval.
    let scale = rr.sqrt();
    let first = rng.random_range(0.3..0.7) * rr;
    let phase = rng.random_range(0.0..2.0 * PI);
    let mut peaks = Vec::new();
    let mut k = -1i64;
    loop {
        let nominal = first + k as f64 * rr;
        if nominal > p.duration_s + rr {
            break;
        }
        peaks.push(nominal + rng.random_range(-MAX_JITTER..MAX_JITTER) * rr);
        k += 1;
    }
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / p.sampling_rate_hz;
            let mut v = p.baseline_mv * (2.0 * PI * p.baseline_hz * t + phase).sin();
            for &peak in &peaks {
                for &(offset, amp, width) in &WAVES {
                    let d = t - peak - offset * scale;
                    let w = width * scale;
                    v += p.amplitude_mv * amp * (-0.5 * d * d / (w * w)).exp();
                }
            }
            v
        })
        .collect();
    Signal::new(id, samples, p.sampling_rate_hz)
}

pub fn synth_ecg(seed: u64, duration_s: f64, sampling_rate_hz: f64, heart_rate_bpm: f64) -> Result<Signal> {
    let p = EcgParams {
        duration_s,
        sampling_rate_hz,
        heart_rate_bpm,
        ..EcgParams::default()
    };
    synth_ecg_with(format!("ecg-{seed}"), seed, &p)
}

/// Ranges the per-signal parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    pub heart_rate_bpm: (f64, f64),
    pub amplitude_mv: (f64, f64),
    pub baseline_mv: (f64, f64),
    pub baseline_hz: (f64, f64),
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            duration_s: 10.0,
            sampling_rate_hz: 360.0,
            heart_rate_bpm: (40.0, 140.0),
            amplitude_mv: (1.5, 2.5),
            baseline_mv: (0.0, 0.05),
            baseline_hz: (0.1, 0.4),
        }
    }
}

fn draw<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// `count` synthetic signals with ids `ecg_0000`, `ecg_0001`, ...
pub fn synth_corpus(seed: u64, count: usize, params: &CorpusParams) -> Result<Vec<Signal>> {
    if count == 0 {
        return Err(Error::config("corpus count must be at least 1"));
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, stream::CORPUS, 1 + i as u64);
            let p = EcgParams {
                duration_s: params.duration_s,
                sampling_rate_hz: params.sampling_rate_hz,
                heart_rate_bpm: draw(&mut rng, params.heart_rate_bpm),
                amplitude_mv: draw(&mut rng, params.amplitude_mv),
                baseline_mv: draw(&mut rng, params.baseline_mv),
                baseline_hz: draw(&mut rng, params.baseline_hz),
            };
            synth_ecg_with(format!("ecg_{i:04}"), rng.random(), &p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    /// `(id, path)`; paths are as written in the manifest.
    pub entries: Vec<(String, PathBuf)>,
    pub sampling_rate_hz: f64,
    pub notes: String,
}

impl CorpusManifest {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# {RATE_KEY}={}\n", self.sampling_rate_hz);
        for line in self.notes.lines() {
            let _ = writeln!(out, "# note={line}");
        }
        out.push_str("id,path\n");
        for (id, path) in &self.entries {
            let _ = writeln!(out, "{id},{}", path.display());
        }
        out
    }
}

/// Writes each signal as `<id>.csv` plus `manifest.csv` into `dir`.
pub fn write_corpus(signals: &[Signal], dir: &Path, notes: &str) -> Result<CorpusManifest> {
    let rate = signals
        .first()
        .map(Signal::sampling_rate_hz)
        .ok_or_else(|| Error::invalid("empty corpus"))?;
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(signals.len());
    for s in signals {
        if s.id().contains([',', '/', '\\', '\n']) {
            return Err(Error::invalid(format!("signal id `{}` is not a file name", s.id())));
        }
        let rel = PathBuf::from(format!("{}.csv", s.id()));
        save_signal_csv(s, &dir.join(&rel))?;
        entries.push((s.id().to_owned(), rel));
    }
    let m = CorpusManifest {
        entries,
        sampling_rate_hz: rate,
        notes: notes.to_owned(),
    };
    fs::write(dir.join("manifest.csv"), m.to_csv())?;
    Ok(m)
}

pub fn build_corpus(seed: u64, count: usize, params: &CorpusParams, dir: &Path) -> Result<CorpusManifest> {
    let signals = synth_corpus(seed, count, params)?;
    write_corpus(&signals, dir, &format!("synthetic corpus, seed {seed}"))
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = fs::read_to_string(path)?;
    let mut rate = None;
    let mut notes = Vec::new();
    let mut entries = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(kv) = line.strip_prefix('#') {
            match kv.trim().split_once('=') {
                Some((k, v)) if k.trim() == RATE_KEY => {
                    rate = Some(v.trim().parse::<f64>().map_err(|_| parse_err(path, n, format!("bad sampling rate `{v}`")))?);
                }
                Some((k, v)) if k.trim() == "note" => notes.push(v.to_owned()),
                _ => {}
            }
            continue;
        }
        if !header_seen {
            if line != "id,path" {
                return Err(parse_err(path, n, format!("expected header `id,path`, found `{line}`")));
            }
            header_seen = true;
            continue;
        }
        let (id, p) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, n, "expected `id,path`"))?;
        if entries.iter().any(|(e, _): &(String, PathBuf)| e == id) {
            return Err(parse_err(path, n, format!("duplicate id `{id}`")));
        }
        entries.push((id.to_owned(), PathBuf::from(p)));
    }
    if !header_seen {
        return Err(parse_err(path, 1, "missing header `id,path`"));
    }
    Ok(CorpusManifest {
        entries,
        sampling_rate_hz: rate.ok_or_else(|| Error::Metadata {
            path: path.to_owned(),
            msg: format!("missing `# {RATE_KEY}=<hz>` line"),
        })?,
        notes: notes.join("\n"),
    })
}

/// Loads every signal a manifest lists, in manifest order, with the
/// manifest's ids.
pub fn load_corpus(manifest_path: &Path) -> Result<Vec<Signal>> {
    let m = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    m.entries
        .iter()
        .map(|(id, rel)| {
            let s = load_signal_csv(&base.join(rel))?;
            if s.sampling_rate_hz() != m.sampling_rate_hz {
                return Err(Error::Metadata {
                    path: base.join(rel),
                    msg: format!(
                        "sampled at {} Hz, manifest says {}",
                        s.sampling_rate_hz(),
                        m.sampling_rate_hz
                    ),
                });
            }
            Ok(s.with_id(id.clone()))
        })
        .collect()
}
