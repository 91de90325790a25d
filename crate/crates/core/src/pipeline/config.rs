//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Keys not listed in [`RunConfig::KEYS`] are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::classifiers::{ModelKind, ModelSpec};
use crate::dataset_io::CorpusParams;
use crate::error::{Error, Result};
use crate::features::{FeatureMode, ICA_COMPONENTS, PCA_FRACTION};
use crate::labeling::{CorpusNoise, SweepConfig};
use crate::signal::NoiseMode;
use crate::transforms::wavelet::WAVELET_COUNT;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Base seed; every random stream is derived from it.
    pub seed: u64,
    pub signals: usize,
    pub corpus: CorpusParams,
    pub noise_mode: NoiseMode,
    pub lambda: usize,
    pub split_fraction: f64,
    pub sweep: SweepConfig,
    pub models: Vec<ModelKind>,
    pub features: Vec<FeatureMode>,
    pub epochs: usize,
    pub batch_size: usize,
    pub knn_k: usize,
    pub pca_fraction: f64,
    pub ica_components: usize,
    /// Labeled test windows rendered by the plot stage.
    pub plot_windows: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            signals: 358,
            corpus: CorpusParams::default(),
            noise_mode: NoiseMode::PaperLiteral,
            lambda: 360,
            split_fraction: 0.67,
            sweep: SweepConfig::default(),
            models: ModelKind::ALL.to_vec(),
            features: FeatureMode::ALL.to_vec(),
            epochs: 20,
            batch_size: 16,
            knn_k: 5,
            pca_fraction: PCA_FRACTION,
            ica_components: ICA_COMPONENTS,
            plot_windows: 2,
            out: PathBuf::from("out"),
        }
    }
}

fn range(value: &str) -> Option<(f64, f64)> {
    let (lo, hi) = value.split_once(':')?;
    let (lo, hi) = (lo.trim().parse().ok()?, hi.trim().parse().ok()?);
    (lo <= hi).then_some((lo, hi))
}

fn list<T, F: Fn(&str) -> Result<T>>(value: &str, all: &[T], parse: F) -> Result<Vec<T>>
where
    T: Clone + PartialEq,
{
    if value.trim() == "all" {
        return Ok(all.to_vec());
    }
    let mut out: Vec<T> = Vec::new();
    for item in value.split(',') {
        let v = parse(item.trim())?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

impl RunConfig {
    pub const KEYS: [&'static str; 24] = [
        "seed",
        "signals",
        "duration_s",
        "sampling_rate_hz",
        "heart_rate_bpm",
        "amplitude_mv",
        "baseline_mv",
        "baseline_hz",
        "noise_mode",
        "lambda",
        "split_fraction",
        "elliptic_min_hz",
        "elliptic_max_hz",
        "elliptic_step_hz",
        "wavelet_codes",
        "wavelet_level",
        "model",
        "features",
        "epochs",
        "batch_size",
        "knn_k",
        "pca_fraction",
        "ica_components",
        "plot_windows",
    ];

    /// Applies one `key = value` assignment. `out` is accepted as well.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = || Error::config(format!("invalid value `{value}` for `{key}`"));
        macro_rules! num {
            () => {
                value.parse().map_err(|_| bad())?
            };
        }
        match key {
            "seed" => self.seed = num!(),
            "signals" => self.signals = num!(),
            "duration_s" => self.corpus.duration_s = num!(),
            "sampling_rate_hz" => {
                self.corpus.sampling_rate_hz = num!();
                self.sweep.sampling_rate_hz = self.corpus.sampling_rate_hz;
            }
            "heart_rate_bpm" => self.corpus.heart_rate_bpm = range(value).ok_or_else(bad)?,
            "amplitude_mv" => self.corpus.amplitude_mv = range(value).ok_or_else(bad)?,
            "baseline_mv" => self.corpus.baseline_mv = range(value).ok_or_else(bad)?,
            "baseline_hz" => self.corpus.baseline_hz = range(value).ok_or_else(bad)?,
            "noise_mode" => self.noise_mode = value.parse().map_err(|_| bad())?,
            "lambda" => self.lambda = num!(),
            "split_fraction" => self.split_fraction = num!(),
            "elliptic_min_hz" => self.sweep.elliptic_min_hz = num!(),
            "elliptic_max_hz" => self.sweep.elliptic_max_hz = num!(),
            "elliptic_step_hz" => self.sweep.elliptic_step_hz = num!(),
            "wavelet_codes" => {
                let all: Vec<usize> = (0..WAVELET_COUNT).collect();
                self.sweep.wavelet_codes = list(value, &all, |s| s.parse().map_err(|_| bad()))?;
            }
            "wavelet_level" => self.sweep.shrinkage.level = num!(),
            "model" => self.models = list(value, &ModelKind::ALL, str::parse)?,
            "features" => self.features = list(value, &FeatureMode::ALL, str::parse)?,
            "epochs" => self.epochs = num!(),
            "batch_size" => self.batch_size = num!(),
            "knn_k" => self.knn_k = num!(),
            "pca_fraction" => self.pca_fraction = num!(),
            "ica_components" => self.ica_components = num!(),
            "plot_windows" => self.plot_windows = num!(),
            "out" => self.out = PathBuf::from(value),
            other => return Err(Error::config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_at(text, Path::new("<config>"))
    }

    fn parse_at(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_at(&std::fs::read_to_string(path)?, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        if self.signals == 0 || self.lambda == 0 {
            return Err(Error::config("signals and lambda must be positive"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::config("split_fraction must lie in (0, 1)"));
        }
        if self.models.is_empty() || self.features.is_empty() {
            return Err(Error::config("at least one model and one feature mode are required"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.knn_k == 0 {
            return Err(Error::config("epochs, batch_size and knn_k must be positive"));
        }
        if (self.corpus.sampling_rate_hz - self.sweep.sampling_rate_hz).abs() > 0.0 {
            return Err(Error::config("corpus and sweep sampling rates differ"));
        }
        Ok(())
    }

    /// The full configuration in the same `key = value` syntax.
    pub fn to_text(&self) -> String {
        let codes: Vec<String> = self.sweep.wavelet_codes.iter().map(ToString::to_string).collect();
        let models: Vec<&str> = self.models.iter().map(|m| m.as_str()).collect();
        let features: Vec<&str> = self.features.iter().map(|f| f.as_str()).collect();
        let c = &self.corpus;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("signals", self.signals.to_string());
        kv("duration_s", c.duration_s.to_string());
        kv("sampling_rate_hz", c.sampling_rate_hz.to_string());
        kv("heart_rate_bpm", format!("{}:{}", c.heart_rate_bpm.0, c.heart_rate_bpm.1));
        kv("amplitude_mv", format!("{}:{}", c.amplitude_mv.0, c.amplitude_mv.1));
        kv("baseline_mv", format!("{}:{}", c.baseline_mv.0, c.baseline_mv.1));
        kv("baseline_hz", format!("{}:{}", c.baseline_hz.0, c.baseline_hz.1));
        kv("noise_mode", self.noise_mode.as_str().to_owned());
        kv("lambda", self.lambda.to_string());
        kv("split_fraction", self.split_fraction.to_string());
        kv("elliptic_min_hz", self.sweep.elliptic_min_hz.to_string());
        kv("elliptic_max_hz", self.sweep.elliptic_max_hz.to_string());
        kv("elliptic_step_hz", self.sweep.elliptic_step_hz.to_string());
        kv("wavelet_codes", codes.join(","));
        kv("wavelet_level", self.sweep.shrinkage.level.to_string());
        kv("model", models.join(","));
        kv("features", features.join(","));
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("knn_k", self.knn_k.to_string());
        kv("pca_fraction", self.pca_fraction.to_string());
        kv("ica_components", self.ica_components.to_string());
        kv("plot_windows", self.plot_windows.to_string());
        s
    }

    pub fn corpus_seed(&self) -> u64 {
        crate::rng::derive_seed(self.seed, crate::rng::stream::CORPUS, 0)
    }

    pub fn noise(&self) -> CorpusNoise {
        CorpusNoise {
            mode: self.noise_mode,
            seed: self.seed,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            seed: self.seed,
            ..self.sweep.clone()
        }
    }

    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        let mut spec = ModelSpec::default_for(kind, self.seed);
        match &mut spec {
            ModelSpec::Knn { k } => *k = self.knn_k,
            ModelSpec::Dnn(n) | ModelSpec::Cnn(n) => {
                n.epochs = self.epochs;
                n.batch_size = self.batch_size;
            }
            _ => {}
        }
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(RunConfig { out: cfg.out.clone(), ..back }, cfg);
        for key in RunConfig::KEYS {
            assert!(cfg.to_text().contains(&format!("{key} = ")), "{key}");
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("seed = 3\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("`foo`"), "{err}");
    }

    #[test]
    fn parses_lists_ranges_and_comments() {
        let cfg = RunConfig::parse(
            "# reduced run\nmodel = cnn, knn\nfeatures = pca\nheart_rate_bpm = 60:80  # narrow\nwavelet_codes = 3,1\nnoise_mode = sampled\n",
        )
        .unwrap();
        assert_eq!(cfg.models, vec![ModelKind::Cnn, ModelKind::Knn]);
        assert_eq!(cfg.features, vec![FeatureMode::Pca]);
        assert_eq!(cfg.corpus.heart_rate_bpm, (60.0, 80.0));
        assert_eq!(cfg.sweep.wavelet_codes, vec![3, 1]);
        assert_eq!(cfg.noise_mode, NoiseMode::Sampled);
        assert_eq!(RunConfig::parse("model = all").unwrap().models.len(), 5);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "seed = -1",
            "heart_rate_bpm = 80:60",
            "model = forest",
            "features = lda",
            "split_fraction = 1.0",
            "elliptic_max_hz = 200",
            "epochs = 0",
            "just text",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }
}
