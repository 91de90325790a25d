//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Runs one full default pipeline (several minutes).

use std::f64::consts::PI;
use std::time::Instant;

use ecgsel_core::classifiers::nn::gradient_check;
use ecgsel_core::classifiers::{LayerSpec, ModelKind, NetSpec, Network};
use ecgsel_core::elliptic::{apply_elliptic, design_elliptic, elliptic_rational, magnitude_response};
use ecgsel_core::features::{ica_fit, read_projection, FeatureMode};
use ecgsel_core::labeling::{split_assignment, FilterKind, LabeledWindow, Split, Sweeper, WindowLabel};
use ecgsel_core::pipeline::{cmd_pipeline, PipelineReport, RunConfig};
use ecgsel_core::signal::{rmse, snr_db};
use ecgsel_core::transforms::{dwt, idwt, RealFft, WAVELET_COUNT};
use ecgsel_core::wavelet_filter::apply_wavelet_with;
use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

const RP_DB: f64 = 3.0;
const RS_DB: f64 = 4.0;

fn db_gain(db: f64) -> f64 {
    10f64.powf(-db / 20.0)
}

/// Golden-section search for an extremum of `f` on `[a, b]`; `sign` is 1 for
/// a maximum and -1 for a minimum.
fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, sign: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if sign * f(c) > sign * f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

fn elliptic_response() -> Check {
    let (edge, stop) = (db_gain(RP_DB), db_gain(RS_DB));
    let mut worst = 0.0f64;
    let mut extrema = 0;
    for cutoff in [1.0, 17.0, 40.0, 100.0, 170.0] {
        let d = design_elliptic(7, RP_DB, RS_DB, cutoff, 360.0)?;
        let g = |x: f64| magnitude_response(&d, x * cutoff).unwrap();
        worst = worst.max((g(0.0) - 1.0).abs() / 1e-9);
        // 0.70795 is 10^(-3/20) rounded to five digits; compare to the exact value.
        worst = worst.max((g(1.0) - edge).abs() / 1e-6);
        // Extrema crowd towards the band edge; sample x = 1 - e^-t.
        let xs: Vec<f64> = (0..=25_000).map(|i| 1.0 - (-(i as f64) * 1e-3).exp()).collect();
        let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        let mut found = Vec::new();
        for i in 1..xs.len() - 1 {
            let (l, m, r) = (gs[i - 1], gs[i], gs[i + 1]);
            if m >= l && m > r {
                found.push(golden(&g, xs[i - 1], xs[i + 1], 1.0));
            } else if m <= l && m < r {
                found.push(golden(&g, xs[i - 1], xs[i + 1], -1.0));
            }
        }
        extrema = found.len();
        for v in found {
            let off = (v - 1.0).abs().min((v - edge).abs());
            worst = worst.max(off / 1e-6);
        }
        let x0 = d.selectivity;
        for i in 0..=2000 {
            let x = x0 * (1e4f64).powf(i as f64 / 2000.0);
            let v = d.gain_at_ratio(x);
            if v > stop + 1e-12 {
                worst = worst.max(2.0);
            }
        }
    }
    Ok((
        worst <= 1.0 && extrema == 6,
        format!("{extrema} interior passband extrema, worst deviation {worst:.3} of tolerance"),
    ))
}

fn elliptic_rational_values() -> Check {
    let mut unit = 0.0f64;
    for p in 1..=8 {
        for xi in [1.1, 2.0, 10.0] {
            unit = unit.max((elliptic_rational(p, xi, 1.0)? - 1.0).abs());
        }
    }
    let mut closed = 0.0f64;
    for xi in [1.1f64, 2.0, 10.0] {
        let t = (1.0 - 1.0 / (xi * xi)).sqrt();
        for i in 0..100 {
            let x = 3.0 * i as f64 / 99.0;
            let want = ((t + 1.0) * x * x - 1.0) / ((t - 1.0) * x * x + 1.0);
            closed = closed.max((elliptic_rational(2, xi, x)? - want).abs() / want.abs().max(1.0));
        }
    }
    Ok((
        unit <= 1e-8 && closed <= 1e-10,
        format!("|R_p(1) - 1| max {unit:.2e}, R_2 closed-form error {closed:.2e}"),
    ))
}

fn transforms() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..360).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fft = RealFft::new(360)?;
    let back = fft.inverse(&fft.forward(&x)?)?;
    let fft_err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut dwt_err = 0.0f64;
    for code in 0..WAVELET_COUNT {
        let r = idwt(&dwt(&x, code, 4)?)?;
        dwt_err = dwt_err.max(x.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        WAVELET_COUNT == 22 && fft_err <= 1e-9 && dwt_err <= 1e-8 && secs < 1.0,
        format!("FFT {fft_err:.2e}, DWT over {WAVELET_COUNT} wavelets {dwt_err:.2e}, {secs:.3} s"),
    ))
}

fn metrics(report: &PipelineReport) -> Check {
    let snr = snr_db(&[1.0; 4], &[1.0, 1.0, 1.0, 0.0])?;
    let e = rmse(&[1.0; 4], &[1.0, 1.0, 1.0, 0.0])?;
    let pattern = WindowLabel::from_optima((8.505, 20), (7.809, 3)).alpha == 0
        && WindowLabel::from_optima((9.591, 20), (10.024, 3)).alpha == 1;
    // Demo windows: the first test window of each class.
    let ds = &report.dataset;
    let sweeper = Sweeper::new(&ds.provenance.sweep, ds.window_length())?;
    let mut consistent = 0;
    for alpha in [0u8, 1] {
        let Some(w) = ds.split(Split::Test).find(|w| w.label.alpha == alpha) else {
            continue;
        };
        let l = &w.label;
        let r0 = snr_db(&w.clean, &sweeper.filter(&w.noisy, FilterKind::Elliptic, l.delta0_raw)?)?;
        let r1 = snr_db(&w.clean, &sweeper.filter(&w.noisy, FilterKind::Wavelet, l.delta1_raw)?)?;
        let chosen = if alpha == 0 { r0 } else { r1 };
        if chosen == r0.max(r1) && chosen == l.beta_db && u8::from(r1 > r0) == alpha {
            consistent += 1;
        }
    }
    Ok((
        (snr - 6.0206).abs() <= 1e-4 && e == 0.5 && pattern && consistent == 2,
        format!("SNR {snr:.6} dB, RMSE {e}, reference label pattern {pattern}, {consistent}/2 demo windows consistent"),
    ))
}

/// Independent exhaustive sweep: a fresh design per cutoff and a direct
/// wavelet call per code, ties to the smaller parameter.
fn resweep(w: &LabeledWindow, report: &PipelineReport) -> Result<WindowLabel, Box<dyn std::error::Error>> {
    let cfg = &report.dataset.provenance.sweep;
    let mut best0: Option<(f64, u32)> = None;
    for cutoff in cfg.elliptic_cutoffs() {
        let r = apply_elliptic(&w.noisy, f64::from(cutoff), &cfg.elliptic_preset, cfg.sampling_rate_hz)?;
        let s = snr_db(&w.clean, &r)?;
        if best0.is_none_or(|b| s > b.0) {
            best0 = Some((s, cutoff));
        }
    }
    let mut best1: Option<(f64, u32)> = None;
    let mut codes = cfg.wavelet_codes.clone();
    codes.sort_unstable();
    for code in codes {
        let s = snr_db(&w.clean, &apply_wavelet_with(&w.noisy, code, &cfg.shrinkage)?)?;
        if best1.is_none_or(|b| s > b.0) {
            best1 = Some((s, code as u32));
        }
    }
    let (b0, b1) = (best0.ok_or("empty sweep")?, best1.ok_or("empty sweep")?);
    let alpha = u8::from(b1.0 > b0.0);
    let (beta_db, delta) = if alpha == 0 { b0 } else { b1 };
    Ok(WindowLabel {
        alpha,
        beta_db,
        delta,
        beta0_db: b0.0,
        delta0_raw: b0.1,
        beta1_db: b1.0,
        delta1_raw: b1.1,
    })
}

fn labeling_oracle(report: &PipelineReport) -> Check {
    let ds = &report.dataset;
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut matches = 0;
    for i in sample(&mut rng, ds.len(), 50) {
        let w = &ds.windows[i];
        let o = resweep(w, report)?;
        if (o.alpha, o.beta_db, o.delta) == (w.label.alpha, w.label.beta_db, w.label.delta) {
            matches += 1;
        }
    }
    let violations = ds
        .windows
        .iter()
        .filter(|w| {
            let l = &w.label;
            let (win, lose) = if l.alpha == 0 { (l.beta0_db, l.beta1_db) } else { (l.beta1_db, l.beta0_db) };
            win < lose || win != l.beta_db
        })
        .count();
    Ok((
        matches == 50 && violations == 0,
        format!("{matches}/50 re-sweeps match exactly, {violations} winner violations over {} windows", ds.len()),
    ))
}

fn dataset_arithmetic(report: &PipelineReport) -> Check {
    let ds = &report.dataset;
    let p = &ds.provenance;
    let ideal = split_assignment(3580, 0.67, 0)?;
    let ideal_train = ideal.iter().filter(|s| **s == Split::Train).count();
    let (train, test) = (ds.split_len(Split::Train), ds.split_len(Split::Test));
    let arithmetic = p.windows_before_rejection == 3580 && ideal_train == 2399 && ideal.len() - ideal_train == 1181;
    let realised = p.rejected != 0 || (train, test) == (2399, 1181);
    Ok((
        arithmetic && realised && train + test == 3580 - p.rejected,
        format!(
            "{} windows, {} rejected, split {train}/{test}",
            p.windows_before_rejection, p.rejected
        ),
    ))
}

fn shrink(layers: &[LayerSpec]) -> Vec<LayerSpec> {
    layers
        .iter()
        .map(|l| match l.clone() {
            LayerSpec::Conv1d { filters, kernel } => LayerSpec::Conv1d {
                filters: (filters / 16).max(1),
                kernel,
            },
            LayerSpec::Dense { units } if units > 2 => LayerSpec::Dense { units: units / 16 },
            other => other,
        })
        .collect()
}

fn gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_fn((4, 32), |_| rng.random_range(0.0..1.0));
    let y = [0, 1, 1, 0];
    let cnn = Network::new(&shrink(&NetSpec::cnn().without_dropout().layers), 32, 5)?;
    let dnn = Network::new(&shrink(&NetSpec::dnn().without_dropout().layers), 32, 5)?;
    let (c, d) = (gradient_check(&cnn, &x, &y)?, gradient_check(&dnn, &x, &y)?);
    Ok((
        c < 1e-4 && d < 1e-4,
        format!("max relative error CNN {c:.2e}, DNN {d:.2e}"),
    ))
}

fn classification(report: &PipelineReport, secs: f64) -> Check {
    let acc = |k| report.find(k, FeatureMode::None).map(|r| r.metrics.accuracy).ok_or("missing model");
    let (cnn, dnn, svm, lr) = (acc(ModelKind::Cnn)?, acc(ModelKind::Dnn)?, acc(ModelKind::Svm)?, acc(ModelKind::Logreg)?);
    let tol = 0.02;
    let a = cnn - report.majority >= 0.10;
    let b = cnn >= 0.85;
    let c = cnn >= dnn - tol && dnn >= svm - tol && svm > lr - tol;
    Ok((
        a && b && c && secs < 600.0,
        format!(
            "CNN {cnn:.4} vs majority {:.4} ({}), >= 0.85 ({}), ordering CNN {cnn:.4} DNN {dnn:.4} SVM {svm:.4} logreg {lr:.4} ({}), pipeline {secs:.0} s",
            report.majority,
            pass_word(a),
            pass_word(b),
            pass_word(c)
        ),
    ))
}

fn features(report: &PipelineReport) -> Check {
    let pca = read_projection(&report.layout.projection_stem(FeatureMode::Pca))?;
    let (k, n) = (pca.output_dim(), pca.input_dim());
    let mut ortho = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = pca.components[i].iter().zip(&pca.components[j]).map(|(a, b)| a * b).sum();
            ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let t: Vec<f64> = (0..2000).map(|i| i as f64 / 2000.0).collect();
    let s1: Vec<f64> = t.iter().map(|v| (2.0 * PI * 7.0 * v).sin()).collect();
    let s2: Vec<f64> = t.iter().map(|v| 2.0 * ((5.0 * v) % 1.0) - 1.0).collect();
    let mixed: Vec<Vec<f64>> = s1
        .iter()
        .zip(&s2)
        .map(|(a, b)| vec![0.6 * a + 0.4 * b, 0.45 * a - 0.7 * b])
        .collect();
    let ica = ica_fit(&mixed, 2, 9)?;
    let rec = ica.transform_batch(&mixed)?;
    let comp = |c: usize| rec.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let (c0, c1) = (comp(0), comp(1));
    let straight = corr(&c0, &s1).abs().min(corr(&c1, &s2).abs());
    let swapped = corr(&c0, &s2).abs().min(corr(&c1, &s1).abs());
    let recovery = straight.max(swapped);
    Ok((
        k == 18 && n == 360 && ortho <= 1e-8 && recovery >= 0.95,
        format!("PCA {k} components of {n}, orthonormality error {ortho:.2e}, ICA |corr| {recovery:.4}"),
    ))
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn denoise(report: &PipelineReport) -> Check {
    let r = report.find(ModelKind::Cnn, FeatureMode::None).ok_or("missing CNN")?;
    let d = &r.denoise;
    let ratio = d.gain_ratio();
    Ok((
        d.snr_predicted_db >= d.snr_before_db && ratio >= 0.95,
        format!(
            "{} test windows, SNR before {:.3} dB, predicted {:.3} dB, oracle {:.3} dB, gain ratio {ratio:.4}",
            d.windows, d.snr_before_db, d.snr_predicted_db, d.snr_oracle_db
        ),
    ))
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn main() {
    // Cargo passes harness flags such as `--list`; only a plain run executes.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let dir = tempfile::tempdir().expect("temporary directory");
    let cfg = RunConfig {
        out: dir.path().join("run"),
        ..RunConfig::default()
    };
    let start = Instant::now();
    let report = cmd_pipeline(&cfg);
    let secs = start.elapsed().as_secs_f64();

    let mut results: Vec<(&str, Check)> = vec![
        ("elliptic response", elliptic_response()),
        ("elliptic rational", elliptic_rational_values()),
        ("transforms", transforms()),
        ("gradient check", gradients()),
    ];
    match &report {
        Ok(r) => results.extend([
            ("metrics", metrics(r)),
            ("labeling oracle", labeling_oracle(r)),
            ("dataset arithmetic", dataset_arithmetic(r)),
            ("classification", classification(r, secs)),
            ("feature reduction", features(r)),
            ("end-to-end denoise", denoise(r)),
        ]),
        Err(e) => {
            for name in [
                "metrics",
                "labeling oracle",
                "dataset arithmetic",
                "classification",
                "feature reduction",
                "end-to-end denoise",
            ] {
                results.push((name, Err(format!("pipeline failed: {e}").into())));
            }
        }
    }
    let mut failed = 0;
    for (name, r) in results {
        match r {
            Ok((true, detail)) => println!("PASS {name}: {detail}"),
            Ok((false, detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    println!("{failed} of 10 criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
