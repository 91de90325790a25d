use std::fs;
use std::path::Path;

use ecgsel_core::classifiers::{read_model, ModelKind};
use ecgsel_core::features::FeatureMode;
use ecgsel_core::labeling::{FilterKind, Split};
use ecgsel_core::pipeline::{cmd_pipeline, denoise_signal, plot, read_metrics_csv, Denoiser, RunConfig};
use ecgsel_core::signal::rms;
use ecgsel_core::{Error, Signal};

fn reduced(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse(
        "signals = 12\nelliptic_max_hz = 40\nwavelet_codes = 0,1,2,5,9\nmodel = knn,logreg,cnn\nfeatures = none,pca\nepochs = 2\nplot_windows = 3\n",
    )
    .unwrap();
    cfg.out = out.to_owned();
    cfg
}

#[test]
fn reduced_pipeline_writes_every_artifact_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let report = cmd_pipeline(&reduced(&a)).unwrap();
    cmd_pipeline(&reduced(&b)).unwrap();

    assert_eq!(report.dataset.provenance.windows_before_rejection, 120);
    let rows = read_metrics_csv(&a.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!((rows[0].0, rows[0].1), (ModelKind::Knn, FeatureMode::None));
    for name in [
        "metrics.csv",
        "metrics_detail.csv",
        "denoise.csv",
        "denoise_table.csv",
        "labels.csv",
        "labels.clean.csv",
        "labels.meta.json",
        "config.txt",
    ] {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert!(x == y, "{name} differs between runs");
    }
    assert!(a.join("features/pca.components.csv").exists());
    assert!(a.join("models/cnn_pca.model").exists());
    assert_eq!(fs::read_dir(a.join("plots")).unwrap().count(), 6);
    assert_eq!(fs::read_dir(a.join("noisy")).unwrap().count(), 13);
    let denoised: Vec<_> = fs::read_dir(a.join("denoised")).unwrap().collect();
    assert_eq!(denoised.len(), 2);
}

#[test]
fn stage_errors_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = reduced(dir.path());
    // Ten-second signals do not split into windows of 7 samples.
    cfg.lambda = 7;
    let err = cmd_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "label", .. }), "{err}");
    assert!(err.to_string().starts_with("label: "));
}

#[test]
fn denoise_dispatches_on_the_predicted_label() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_pipeline(&reduced(dir.path())).unwrap();
    let file = read_model(&dir.path().join("models/knn_none.model")).unwrap();
    let ctx = file.denoise.clone().unwrap();
    assert_eq!(ctx.delta0_agg, report.dataset.delta0_agg);
    let den = Denoiser::new(&ctx).unwrap();

    let w = report.dataset.split(Split::Test).next().unwrap();
    // A signal already in [0, 1] with min 0 and max 1 is left unscaled.
    let mut samples = w.noisy.clone();
    let (lo, hi) = samples.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    samples.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
    let sig = Signal::new("one", samples.clone(), 360.0).unwrap();
    let out = denoise_signal(&file, &sig, Some(&sig)).unwrap();
    let alpha = out.windows[0].alpha;
    let kind = FilterKind::from_alpha(alpha).unwrap();
    let expect = den.apply(&samples, kind).unwrap();
    for (a, b) in out.output.samples().iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12);
    }
    let param = if alpha == 0 { ctx.delta0_agg } else { f64::from(ctx.delta1_agg) };
    assert_eq!(out.windows[0].parameter, param);

    let odd = Signal::new("odd", vec![0.0, 1.0, 0.5], 360.0).unwrap();
    assert!(matches!(
        denoise_signal(&file, &odd, None),
        Err(Error::NonDivisibleLength { .. })
    ));
}

#[test]
fn plot_files_and_rms_guides() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_pipeline(&reduced(dir.path())).unwrap();
    let out = dir.path().join("one");
    let files = plot::plot_dataset(&report.dataset, 1, &out).unwrap();
    assert_eq!(files.len(), 1);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 2);
    let (svg, csv) = &files[0];
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,x,z,r0,r1"));
    let mut cols = vec![Vec::new(); 4];
    for l in lines {
        let f: Vec<f64> = l.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        for (c, v) in cols.iter_mut().zip(f) {
            c.push(v);
        }
    }
    let svg = fs::read_to_string(svg).unwrap();
    let guides: Vec<f64> = svg
        .split("data-rms=\"")
        .skip(1)
        .map(|s| s[..s.find('"').unwrap()].parse().unwrap())
        .collect();
    assert_eq!(guides.len(), 4);
    for (g, c) in guides.iter().zip(&cols) {
        let direct = (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt();
        assert!((g - direct).abs() < 1e-9);
        assert!((g - rms(c)).abs() < 1e-12);
    }
}
