//! End-to-end orchestration: corpus synthesis, noise, labeling, feature
//! reduction, training, evaluation, denoising and report files. Each stage
//! reads and writes the documented file formats so it can also run alone.

pub mod config;
pub mod plot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::classifiers::{
    evaluate, majority_accuracy, read_model, train, write_model, DenoiseContext, Metrics, ModelFile, ModelKind,
};
use crate::dataset_io::{build_corpus, load_corpus, load_signal_csv, read_manifest, save_signal_csv, write_corpus, CorpusManifest};
use crate::elliptic::{apply_gains, EllipticDesign};
use crate::error::{Error, Result};
use crate::features::{ica_fit, pca_fit, write_projection, FeatureMode, Projection};
use crate::labeling::{
    build_dataset, noisy_signal, read_dataset, write_dataset, FilterKind, LabeledDataset, LabeledWindow, Split, Sweeper,
};
use crate::signal::{rmse, snr_db, Signal};
use crate::transforms::fft::RealFft;
use crate::wavelet_filter::apply_wavelet_with;
pub use config::{RunConfig, DEFAULT_SEED};

/// Tags errors from `f` with `stage`.
pub fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

/// Fixed layout of the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn manifest(&self) -> PathBuf {
        self.corpus_dir().join("manifest.csv")
    }

    pub fn noisy_dir(&self) -> PathBuf {
        self.root.join("noisy")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("labels.csv")
    }

    pub fn projection_stem(&self, mode: FeatureMode) -> PathBuf {
        self.root.join("features").join(mode.as_str())
    }

    pub fn model(&self, kind: ModelKind, mode: FeatureMode) -> PathBuf {
        self.root.join("models").join(format!("{kind}_{mode}.model"))
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn metrics_detail(&self) -> PathBuf {
        self.root.join("metrics_detail.csv")
    }

    pub fn denoise_summary(&self) -> PathBuf {
        self.root.join("denoise.csv")
    }

    pub fn table(&self) -> PathBuf {
        self.root.join("denoise_table.csv")
    }

    pub fn plots_dir(&self) -> PathBuf {
        self.root.join("plots")
    }

    pub fn denoised_dir(&self) -> PathBuf {
        self.root.join("denoised")
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig, dir: &Path) -> Result<CorpusManifest> {
    build_corpus(cfg.corpus_seed(), cfg.signals, &cfg.corpus, dir)
}

/// Writes `signal + noise` for every manifest entry, with the same noise
/// the labeling stage draws.
pub fn cmd_noise(cfg: &RunConfig, manifest: &Path, dir: &Path) -> Result<CorpusManifest> {
    let signals = load_corpus(manifest)?;
    let noise = cfg.noise();
    let noisy = signals
        .iter()
        .enumerate()
        .map(|(i, s)| noisy_signal(s, &noise, i))
        .collect::<Result<Vec<_>>>()?;
    let notes = format!("noise mode {} seed {}", noise.mode.as_str(), noise.seed);
    write_corpus(&noisy, dir, &notes)
}

pub fn cmd_label(cfg: &RunConfig, manifest: &Path, out: &Path) -> Result<LabeledDataset> {
    let signals = load_corpus(manifest)?;
    let ds = build_dataset(&signals, &cfg.sweep_config(), &cfg.noise(), cfg.lambda, cfg.split_fraction)?;
    ensure_parent(out)?;
    write_dataset(&ds, out)?;
    Ok(ds)
}

fn split_rows(ds: &LabeledDataset, which: Split) -> (Vec<Vec<f64>>, Vec<u8>) {
    ds.split(which).map(|w| (w.noisy.clone(), w.label.alpha)).unzip()
}

/// Fits the reduction on the training split only.
pub fn cmd_features(cfg: &RunConfig, ds: &LabeledDataset, mode: FeatureMode) -> Result<Option<Projection>> {
    let (train_x, _) = split_rows(ds, Split::Train);
    match mode {
        FeatureMode::None => Ok(None),
        FeatureMode::Pca => pca_fit(&train_x, cfg.pca_fraction).map(Some),
        FeatureMode::Ica => ica_fit(&train_x, cfg.ica_components, cfg.seed).map(Some),
    }
}

fn project(projection: Option<&Projection>, rows: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    match projection {
        Some(p) => p.transform_batch(&rows),
        None => Ok(rows),
    }
}

pub fn denoise_context(ds: &LabeledDataset, features: FeatureMode) -> DenoiseContext {
    let p = &ds.provenance;
    DenoiseContext {
        lambda: p.lambda,
        sampling_rate_hz: p.sweep.sampling_rate_hz,
        delta0_agg: ds.delta0_agg,
        delta1_agg: ds.delta1_agg,
        elliptic_preset: p.sweep.elliptic_preset,
        shrinkage: p.sweep.shrinkage,
        features,
    }
}

pub fn cmd_train(
    cfg: &RunConfig,
    ds: &LabeledDataset,
    kind: ModelKind,
    mode: FeatureMode,
    projection: Option<&Projection>,
) -> Result<ModelFile> {
    let (x, y) = split_rows(ds, Split::Train);
    let x = project(projection, x)?;
    let model = train(&x, &y, &cfg.model_spec(kind))?;
    Ok(ModelFile {
        model,
        projection: projection.cloned(),
        denoise: Some(denoise_context(ds, mode)),
    })
}

pub fn cmd_eval(file: &ModelFile, ds: &LabeledDataset) -> Result<Metrics> {
    let (x, y) = split_rows(ds, Split::Test);
    let x = project(file.projection.as_ref(), x)?;
    evaluate(&file.model, &x, &y)
}

/// Applies the aggregated filter parameters to windows of one length.
pub struct Denoiser {
    ctx: DenoiseContext,
    fft: RealFft,
    gains: Vec<f64>,
}

impl Denoiser {
    pub fn new(ctx: &DenoiseContext) -> Result<Self> {
        let design = EllipticDesign::from_preset(&ctx.elliptic_preset, ctx.delta0_agg, ctx.sampling_rate_hz)?;
        Ok(Denoiser {
            ctx: ctx.clone(),
            fft: RealFft::new(ctx.lambda)?,
            gains: design.bin_gains(ctx.lambda),
        })
    }

    pub fn apply(&self, z: &[f64], kind: FilterKind) -> Result<Vec<f64>> {
        match kind {
            FilterKind::Elliptic => apply_gains(&self.fft, z, &self.gains),
            FilterKind::Wavelet => apply_wavelet_with(z, self.ctx.delta1_agg as usize, &self.ctx.shrinkage),
        }
    }

    /// The cutoff in Hz or the wavelet code used for `kind`.
    pub fn parameter(&self, kind: FilterKind) -> f64 {
        match kind {
            FilterKind::Elliptic => self.ctx.delta0_agg,
            FilterKind::Wavelet => f64::from(self.ctx.delta1_agg),
        }
    }
}

fn model_context(file: &ModelFile) -> Result<&DenoiseContext> {
    file.denoise
        .as_ref()
        .ok_or_else(|| Error::ModelFormat("model file has no denoising context".into()))
}

/// Mean SNR over windows before filtering, after the predicted filter and
/// after the labeled (oracle) filter, both at the aggregated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseSummary {
    pub windows: usize,
    pub snr_before_db: f64,
    pub snr_predicted_db: f64,
    pub snr_oracle_db: f64,
}

impl DenoiseSummary {
    /// Predicted-filter gain as a fraction of the oracle gain.
    pub fn gain_ratio(&self) -> f64 {
        (self.snr_predicted_db - self.snr_before_db) / (self.snr_oracle_db - self.snr_before_db)
    }
}

pub fn denoise_windows(file: &ModelFile, windows: &[&LabeledWindow]) -> Result<DenoiseSummary> {
    if windows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let den = Denoiser::new(model_context(file)?)?;
    let rows = windows.iter().map(|w| w.noisy.clone()).collect();
    let features = project(file.projection.as_ref(), rows)?;
    let predicted = file.model.predict_batch(&features)?;
    let (mut before, mut pred, mut oracle) = (0.0, 0.0, 0.0);
    for (w, p) in windows.iter().zip(&predicted) {
        before += snr_db(&w.clean, &w.noisy)?;
        let r = den.apply(&w.noisy, FilterKind::from_alpha(p.label)?)?;
        pred += snr_db(&w.clean, &r)?;
        let r = den.apply(&w.noisy, w.label.filter())?;
        oracle += snr_db(&w.clean, &r)?;
    }
    let n = windows.len() as f64;
    Ok(DenoiseSummary {
        windows: windows.len(),
        snr_before_db: before / n,
        snr_predicted_db: pred / n,
        snr_oracle_db: oracle / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub window: usize,
    pub alpha: u8,
    pub p_wavelet: f64,
    pub parameter: f64,
    pub snr_before_db: Option<f64>,
    pub snr_after_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutcome {
    pub output: Signal,
    pub windows: Vec<WindowReport>,
}

impl DenoiseOutcome {
    pub fn report_csv(&self) -> String {
        let mut s = String::from("window,alpha,p_wavelet,parameter,snr_before_db,snr_after_db\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for w in &self.windows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                w.window,
                w.alpha,
                w.p_wavelet,
                w.parameter,
                opt(w.snr_before_db),
                opt(w.snr_after_db)
            );
        }
        s
    }

    fn mean(&self, f: impl Fn(&WindowReport) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self.windows.iter().filter_map(f).collect();
        (!v.is_empty() && v.len() == self.windows.len()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_snr_before_db(&self) -> Option<f64> {
        self.mean(|w| w.snr_before_db)
    }

    pub fn mean_snr_after_db(&self) -> Option<f64> {
        self.mean(|w| w.snr_after_db)
    }
}

/// Denoises a whole signal window by window. The signal is min-max
/// normalised as during labeling, filtered, and mapped back to its range.
pub fn denoise_signal(file: &ModelFile, noisy: &Signal, clean: Option<&Signal>) -> Result<DenoiseOutcome> {
    let ctx = model_context(file)?;
    let lambda = ctx.lambda;
    if noisy.len() % lambda != 0 {
        return Err(Error::NonDivisibleLength {
            len: noisy.len(),
            lambda,
        });
    }
    if let Some(c) = clean {
        if c.len() != noisy.len() {
            return Err(Error::invalid("clean reference and noisy signal differ in length"));
        }
    }
    let z = noisy.samples();
    let (lo, hi) = z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        return Err(Error::DegenerateSignal(lo));
    }
    let span = hi - lo;
    let den = Denoiser::new(ctx)?;
    let mut out = Vec::with_capacity(z.len());
    let mut reports = Vec::with_capacity(z.len() / lambda);
    for (m, chunk) in z.chunks(lambda).enumerate() {
        let normalised: Vec<f64> = chunk.iter().map(|v| (v - lo) / span).collect();
        let features = match &file.projection {
            Some(p) => p.transform(&normalised)?,
            None => normalised.clone(),
        };
        let pred = file.model.predict(&features)?;
        let kind = FilterKind::from_alpha(pred.label)?;
        let filtered: Vec<f64> = den.apply(&normalised, kind)?.iter().map(|v| v * span + lo).collect();
        let (before, after) = match clean {
            Some(c) => {
                let x = &c.samples()[m * lambda..(m + 1) * lambda];
                (Some(snr_db(x, chunk)?), Some(snr_db(x, &filtered)?))
            }
            None => (None, None),
        };
        reports.push(WindowReport {
            window: m,
            alpha: pred.label,
            p_wavelet: pred.probabilities[1],
            parameter: den.parameter(kind),
            snr_before_db: before,
            snr_after_db: after,
        });
        out.extend(filtered);
    }
    Ok(DenoiseOutcome {
        output: Signal::new(format!("{}_denoised", noisy.id()), out, noisy.sampling_rate_hz())?,
        windows: reports,
    })
}

/// Companion report path: `<out stem>.report.csv`.
pub fn report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.report.csv"))
}

pub fn cmd_denoise(model: &Path, signal: &Path, out: &Path, clean: Option<&Path>) -> Result<DenoiseOutcome> {
    let file = read_model(model)?;
    let noisy = load_signal_csv(signal)?;
    let clean = clean.map(load_signal_csv).transpose()?;
    let outcome = denoise_signal(&file, &noisy, clean.as_ref())?;
    ensure_parent(out)?;
    save_signal_csv(&outcome.output, out)?;
    fs::write(report_path(out), outcome.report_csv())?;
    Ok(outcome)
}

/// Per-window errors of the noisy window and of both filters at the
/// window's own optima: `signal_id,window_index,split,alpha,rmse_z,snr_z_db,
/// delta0,rmse_r0,snr_r0_db,delta1,rmse_r1,snr_r1_db`.
pub fn denoise_table_csv(ds: &LabeledDataset) -> Result<String> {
    let sweeper = Sweeper::new(&ds.provenance.sweep, ds.window_length())?;
    let mut s = String::from(
        "signal_id,window_index,split,alpha,rmse_z,snr_z_db,delta0,rmse_r0,snr_r0_db,delta1,rmse_r1,snr_r1_db\n",
    );
    for w in &ds.windows {
        let l = &w.label;
        let r0 = sweeper.filter(&w.noisy, FilterKind::Elliptic, l.delta0_raw)?;
        let r1 = sweeper.filter(&w.noisy, FilterKind::Wavelet, l.delta1_raw)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            w.signal_id,
            w.window_index,
            w.split.as_str(),
            l.alpha,
            rmse(&w.clean, &w.noisy)?,
            snr_db(&w.clean, &w.noisy)?,
            l.delta0_raw,
            rmse(&w.clean, &r0)?,
            snr_db(&w.clean, &r0)?,
            l.delta1_raw,
            rmse(&w.clean, &r1)?,
            snr_db(&w.clean, &r1)?
        );
    }
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct ModelReport {
    pub model: ModelKind,
    pub features: FeatureMode,
    pub metrics: Metrics,
    pub denoise: DenoiseSummary,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub layout: Layout,
    pub dataset: LabeledDataset,
    /// Majority-class accuracy on the test split.
    pub majority: f64,
    pub models: Vec<ModelReport>,
}

impl PipelineReport {
    pub fn find(&self, model: ModelKind, features: FeatureMode) -> Option<&ModelReport> {
        self.models.iter().find(|r| r.model == model && r.features == features)
    }
}

/// Test-split metrics and denoising summary for one trained model.
pub fn model_report(file: &ModelFile, ds: &LabeledDataset, features: FeatureMode) -> Result<ModelReport> {
    let test: Vec<&LabeledWindow> = ds.split(Split::Test).collect();
    Ok(ModelReport {
        model: file.model.kind(),
        features,
        metrics: cmd_eval(file, ds)?,
        denoise: denoise_windows(file, &test)?,
        final_loss: file.model.history.last().map(|h| h.loss),
    })
}

/// Writes the metrics, detailed metrics, denoising summary and per-window
/// table files under `layout`.
pub fn write_reports(layout: &Layout, ds: &LabeledDataset, models: &[ModelReport]) -> Result<()> {
    let labels: Vec<u8> = ds.split(Split::Test).map(|w| w.label.alpha).collect();
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    fs::create_dir_all(&layout.root)?;
    fs::write(layout.metrics(), metrics_csv(models))?;
    fs::write(layout.metrics_detail(), metrics_detail_csv(models, majority_accuracy(&labels)))?;
    fs::write(layout.denoise_summary(), denoise_summary_csv(models))?;
    Ok(fs::write(layout.table(), denoise_table_csv(ds)?)?)
}

/// `model,features,accuracy`, one row per trained model.
pub fn metrics_csv(rows: &[ModelReport]) -> String {
    let mut s = String::from("model,features,accuracy\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.4}", r.model, r.features, r.metrics.accuracy);
    }
    s
}

fn metrics_detail_csv(rows: &[ModelReport], majority: f64) -> String {
    let mut s = String::from(
        "model,features,accuracy,majority_baseline,tn,fp,fn,tp,precision0,recall0,precision1,recall1,final_loss\n",
    );
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.features,
            m.accuracy,
            majority,
            m.confusion[0][0],
            m.confusion[0][1],
            m.confusion[1][0],
            m.confusion[1][1],
            m.precision[0],
            m.recall[0],
            m.precision[1],
            m.recall[1],
            r.final_loss.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    s
}

fn denoise_summary_csv(rows: &[ModelReport]) -> String {
    let mut s = String::from("model,features,windows,snr_before_db,snr_predicted_db,snr_oracle_db,gain_ratio\n");
    for r in rows {
        let d = &r.denoise;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.model,
            r.features,
            d.windows,
            d.snr_before_db,
            d.snr_predicted_db,
            d.snr_oracle_db,
            d.gain_ratio()
        );
    }
    s
}

/// Parses a metrics CSV back into `(model, features, accuracy)` rows.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<(ModelKind, FeatureMode, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_owned(),
        line,
        msg,
    };
    match lines.next() {
        Some((_, "model,features,accuracy")) => {}
        _ => return Err(perr(1, "expected header `model,features,accuracy`".into())),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(perr(i + 1, format!("expected 3 fields, found {}", f.len())));
            }
            let acc: f64 = f[2].parse().map_err(|_| perr(i + 1, format!("bad accuracy `{}`", f[2])))?;
            Ok((
                f[0].parse().map_err(|e: Error| perr(i + 1, e.to_string()))?,
                f[1].parse().map_err(|e: Error| perr(i + 1, e.to_string()))?,
                acc,
            ))
        })
        .collect()
}

/// Runs every stage and writes all artifacts under `cfg.out`, then reads
/// each artifact back.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    stage("setup", || {
        fs::create_dir_all(&layout.root)?;
        Ok(fs::write(layout.root.join("config.txt"), cfg.to_text())?)
    })?;
    stage("synth", || cmd_synth(cfg, &layout.corpus_dir()))?;
    let noisy = stage("noise", || cmd_noise(cfg, &layout.manifest(), &layout.noisy_dir()))?;
    let ds = stage("label", || cmd_label(cfg, &layout.manifest(), &layout.dataset()))?;
    let test: Vec<&LabeledWindow> = ds.split(Split::Test).collect();
    let test_labels: Vec<u8> = test.iter().map(|w| w.label.alpha).collect();
    let majority = majority_accuracy(&test_labels);

    let mut models = Vec::new();
    let mut primary: Option<PathBuf> = None;
    for &mode in &cfg.features {
        let projection = stage("features", || {
            let p = cmd_features(cfg, &ds, mode)?;
            if let Some(p) = &p {
                let stem = layout.projection_stem(mode);
                ensure_parent(&stem)?;
                write_projection(p, &stem)?;
            }
            Ok(p)
        })?;
        for &kind in &cfg.models {
            let path = layout.model(kind, mode);
            let file = stage("train", || {
                let file = cmd_train(cfg, &ds, kind, mode, projection.as_ref())?;
                ensure_parent(&path)?;
                write_model(&file, &path)?;
                Ok(file)
            })?;
            let report = stage("eval", || model_report(&file, &ds, mode))?;
            if primary.is_none() || (kind == ModelKind::Cnn && mode == FeatureMode::None) {
                primary = Some(path);
            }
            models.push(report);
        }
    }

    stage("report", || write_reports(&layout, &ds, &models))?;
    stage("plot", || {
        plot::plot_dataset(&ds, cfg.plot_windows, &layout.plots_dir()).map(drop)
    })?;
    stage("denoise", || {
        let model = primary.as_ref().ok_or_else(|| Error::config("no model was trained"))?;
        let first = test.first().ok_or(Error::EmptyDataset)?;
        let id = &first.signal_id;
        let find = |m: &CorpusManifest, dir: &Path| {
            m.entries
                .iter()
                .find(|(eid, _)| eid == id)
                .map(|(_, p)| dir.join(p))
                .ok_or_else(|| Error::invalid(format!("signal `{id}` missing from manifest")))
        };
        let clean_manifest = read_manifest(&layout.manifest())?;
        let out = layout.denoised_dir().join(format!("{id}.csv"));
        let noisy_path = find(&noisy, &layout.noisy_dir())?;
        let clean_path = find(&clean_manifest, &layout.corpus_dir())?;
        cmd_denoise(model, &noisy_path, &out, Some(&clean_path)).map(drop)
    })?;
    stage("verify", || {
        if read_dataset(&layout.dataset())? != ds {
            return Err(Error::invalid("labeled dataset does not read back identically"));
        }
        if read_metrics_csv(&layout.metrics())?.len() != models.len() {
            return Err(Error::invalid("metrics CSV row count mismatch"));
        }
        for r in &models {
            read_model(&layout.model(r.model, r.features))?;
        }
        Ok(())
    })?;
    Ok(PipelineReport {
        layout,
        dataset: ds,
        majority,
        models,
    })
}
