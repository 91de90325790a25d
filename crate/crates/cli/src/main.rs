use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ecgsel_core::classifiers::{read_model, write_model};
use ecgsel_core::features::{read_projection, write_projection, FeatureMode};
use ecgsel_core::labeling::read_dataset;
use ecgsel_core::pipeline::{
    cmd_denoise, cmd_features, cmd_label, cmd_noise, cmd_pipeline, cmd_synth, cmd_train, model_report,
    plot::plot_dataset, report_path, stage, write_reports, Layout, RunConfig,
};

#[derive(Parser)]
#[command(name = "ecgsel", version, about = "ECG denoising filter selection")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

/// Configuration sources, applied in order: file, `--set`, named flags.
#[derive(Args)]
struct ConfigArgs {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// paper_literal or sampled.
    #[arg(long, global = true)]
    noise_mode: Option<String>,
    /// knn, logreg, svm, dnn, cnn, a comma-separated list, or all.
    #[arg(long, global = true)]
    model: Option<String>,
    /// none, pca, ica, a comma-separated list, or all.
    #[arg(long, global = true)]
    features: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<usize>,
    #[arg(long, global = true)]
    elliptic_max_hz: Option<u32>,
    /// Output directory for every artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{kv}`");
            };
            cfg.set(k.trim(), v.trim())?;
        }
        let named = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("noise_mode", self.noise_mode.clone()),
            ("model", self.model.clone()),
            ("features", self.features.clone()),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("elliptic_max_hz", self.elliptic_max_hz.map(|v| v.to_string())),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesizes the clean corpus into `<out>/corpus`.
    Synth,
    /// Writes noisy copies of the corpus into `<out>/noisy`.
    Noise,
    /// Labels every window of the corpus into `<out>/labels.csv`.
    Label,
    /// Fits the configured feature reductions on the training split.
    Features,
    /// Trains every configured model and feature mode.
    Train,
    /// Evaluates the trained models and writes the report CSVs.
    Eval,
    /// Denoises one signal CSV with a trained model.
    Denoise {
        #[arg(long = "model-file")]
        model_file: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Clean reference for per-window SNR before and after.
        #[arg(long)]
        clean: Option<PathBuf>,
    },
    /// Renders labeled test windows as SVG plus CSV into `<out>/plots`.
    Plot {
        /// Labeled dataset; defaults to `<out>/labels.csv`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Number of windows; defaults to `plot_windows`.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Runs every stage end to end.
    Pipeline,
    /// Prints the resolved configuration.
    Config,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = cli.config.resolve().context("configuration")?;
    let layout = Layout::new(&cfg.out);
    match cli.command {
        Command::Synth => {
            let m = stage("synth", || cmd_synth(&cfg, &layout.corpus_dir()))?;
            println!("wrote {} signals to {}", m.entries.len(), layout.corpus_dir().display());
        }
        Command::Noise => {
            let m = stage("noise", || cmd_noise(&cfg, &layout.manifest(), &layout.noisy_dir()))?;
            println!("wrote {} noisy signals to {}", m.entries.len(), layout.noisy_dir().display());
        }
        Command::Label => {
            let ds = stage("label", || cmd_label(&cfg, &layout.manifest(), &layout.dataset()))?;
            let [a, b] = ds.class_counts();
            println!(
                "{} windows (elliptic {a}, wavelet {b}), delta0 {} Hz, delta1 code {}",
                ds.len(),
                ds.delta0_agg,
                ds.delta1_agg
            );
        }
        Command::Features => {
            let ds = stage("label", || read_dataset(&layout.dataset()))?;
            for &mode in &cfg.features {
                stage("features", || {
                    if let Some(p) = cmd_features(&cfg, &ds, mode)? {
                        let stem = layout.projection_stem(mode);
                        std::fs::create_dir_all(stem.parent().unwrap_or(&layout.root))?;
                        write_projection(&p, &stem)?;
                        println!("{mode}: {} -> {} dimensions", p.input_dim(), p.output_dim());
                    }
                    Ok(())
                })?;
            }
        }
        Command::Train => {
            let ds = stage("label", || read_dataset(&layout.dataset()))?;
            for &mode in &cfg.features {
                let projection = stage("features", || match mode {
                    FeatureMode::None => Ok(None),
                    _ => read_projection(&layout.projection_stem(mode)).map(Some),
                })?;
                for &kind in &cfg.models {
                    let path = layout.model(kind, mode);
                    stage("train", || {
                        let file = cmd_train(&cfg, &ds, kind, mode, projection.as_ref())?;
                        std::fs::create_dir_all(path.parent().unwrap_or(&layout.root))?;
                        write_model(&file, &path)
                    })?;
                    println!("wrote {}", path.display());
                }
            }
        }
        Command::Eval => {
            let ds = stage("label", || read_dataset(&layout.dataset()))?;
            let mut reports = Vec::new();
            for &mode in &cfg.features {
                for &kind in &cfg.models {
                    let r = stage("eval", || model_report(&read_model(&layout.model(kind, mode))?, &ds, mode))?;
                    println!("{kind:>6} {mode:>4} accuracy {:.4}", r.metrics.accuracy);
                    reports.push(r);
                }
            }
            stage("report", || write_reports(&layout, &ds, &reports))?;
        }
        Command::Denoise {
            model_file,
            signal,
            output,
            clean,
        } => {
            let o = stage("denoise", || cmd_denoise(&model_file, &signal, &output, clean.as_deref()))?;
            let wavelet = o.windows.iter().filter(|w| w.alpha == 1).count();
            println!(
                "{} windows ({wavelet} wavelet), wrote {} and {}",
                o.windows.len(),
                output.display(),
                report_path(&output).display()
            );
            if let (Some(b), Some(a)) = (o.mean_snr_before_db(), o.mean_snr_after_db()) {
                println!("mean SNR {b:.3} dB -> {a:.3} dB");
            }
        }
        Command::Plot { dataset, count } => {
            let path = dataset.unwrap_or_else(|| layout.dataset());
            let ds = stage("plot", || read_dataset(&path))?;
            let files = stage("plot", || {
                plot_dataset(&ds, count.unwrap_or(cfg.plot_windows), &layout.plots_dir())
            })?;
            for (svg, csv) in files {
                println!("{} {}", svg.display(), csv.display());
            }
        }
        Command::Pipeline => {
            let r = cmd_pipeline(&cfg)?;
            println!("majority baseline {:.4}", r.majority);
            for m in &r.models {
                println!("{:>6} {:>4} accuracy {:.4}", m.model, m.features, m.metrics.accuracy);
            }
            println!("artifacts in {}", layout.root.display());
        }
        Command::Config => print!("{}", cfg.to_text()),
    }
    Ok(())
}
