use super::*;
use crate::elliptic::apply_elliptic;
use crate::wavelet_filter::apply_wavelet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = rng.random_range(1.0..4.0);
    let clean: Vec<f64> = (0..360)
        .map(|t| 0.5 + 0.4 * (2.0 * std::f64::consts::PI * f * t as f64 / 360.0).sin())
        .collect();
    let noisy = clean.iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
    (clean, noisy)
}

fn small_cfg() -> SweepConfig {
    SweepConfig {
        elliptic_min_hz: 1,
        elliptic_max_hz: 30,
        elliptic_step_hz: 1,
        ..SweepConfig::default()
    }
}

/// Exhaustive re-sweep written independently of [`Sweeper`].
fn brute_force(x: &[f64], z: &[f64], cfg: &SweepConfig) -> ((f64, u32), (f64, u32)) {
    let mut e: Vec<(f64, u32)> = (cfg.elliptic_min_hz..=cfg.elliptic_max_hz)
        .step_by(cfg.elliptic_step_hz as usize)
        .map(|c| {
            let r = apply_elliptic(z, f64::from(c), &cfg.elliptic_preset, cfg.sampling_rate_hz).unwrap();
            (snr_db(x, &r).unwrap(), c)
        })
        .collect();
    let mut w: Vec<(f64, u32)> = cfg
        .wavelet_codes
        .iter()
        .map(|&c| (snr_db(x, &apply_wavelet(z, c).unwrap()).unwrap(), c as u32))
        .collect();
    // Highest SNR first, then smallest parameter.
    let order = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    e.sort_by(order);
    w.sort_by(order);
    (e[0], w[0])
}

#[test]
fn default_sweep_domain() {
    let cfg = SweepConfig::default();
    cfg.validate().unwrap();
    let cutoffs = cfg.elliptic_cutoffs();
    assert_eq!(cutoffs.len(), 100);
    assert_eq!((cutoffs[0], cutoffs[99]), (1, 100));
    assert_eq!(cfg.wavelet_codes.len(), 22);
}

#[test]
fn invalid_sweeps() {
    let bad = |f: fn(&mut SweepConfig)| {
        let mut c = SweepConfig::default();
        f(&mut c);
        c.validate().is_err()
    };
    assert!(bad(|c| c.elliptic_min_hz = 0));
    assert!(bad(|c| c.elliptic_min_hz = 101));
    assert!(bad(|c| c.elliptic_max_hz = 180));
    assert!(bad(|c| c.wavelet_codes.clear()));
    assert!(bad(|c| c.wavelet_codes.push(22)));
    assert!(bad(|c| c.elliptic_step_hz = 0));
}

#[test]
fn single_point_domains() {
    let (x, z) = pair(1);
    let cfg = SweepConfig {
        elliptic_min_hz: 12,
        elliptic_max_hz: 12,
        wavelet_codes: vec![5],
        ..SweepConfig::default()
    };
    let r0 = apply_elliptic(&z, 12.0, &cfg.elliptic_preset, 360.0).unwrap();
    assert_eq!(sweep_filter(&x, &z, FilterKind::Elliptic, &cfg).unwrap(), (snr_db(&x, &r0).unwrap(), 12));
    let r1 = apply_wavelet(&z, 5).unwrap();
    assert_eq!(sweep_filter(&x, &z, FilterKind::Wavelet, &cfg).unwrap(), (snr_db(&x, &r1).unwrap(), 5));
}

#[test]
fn sweep_matches_brute_force() {
    let cfg = small_cfg();
    let sweeper = Sweeper::new(&cfg, 360).unwrap();
    for seed in 0..6 {
        let (x, z) = pair(seed);
        let (e, w) = brute_force(&x, &z, &cfg);
        let label = sweeper.omega(&x, &z).unwrap();
        assert_eq!(label, WindowLabel::from_optima(e, w), "seed {seed}");
    }
}

#[test]
fn label_rule() {
    let a = WindowLabel::from_optima((8.505, 20), (7.809, 3));
    assert_eq!((a.alpha, a.beta_db, a.delta), (0, 8.505, 20));
    let b = WindowLabel::from_optima((9.591, 20), (10.024, 3));
    assert_eq!((b.alpha, b.beta_db, b.delta), (1, 10.024, 3));
    let tie = WindowLabel::from_optima((4.0, 9), (4.0, 2));
    assert_eq!((tie.alpha, tie.delta), (0, 9));
    assert_eq!(tie.filter(), FilterKind::Elliptic);
}

#[test]
fn omega_ignores_candidate_order() {
    let (x, z) = pair(11);
    let cfg = small_cfg();
    let mut rev = cfg.clone();
    rev.wavelet_codes.reverse();
    assert_eq!(omega(&x, &z, &cfg).unwrap(), omega(&x, &z, &rev).unwrap());
}

#[test]
fn ties_break_toward_smaller_parameter() {
    assert!(beats((1.0, 3), (1.0, 5)));
    assert!(!beats((1.0, 5), (1.0, 3)));
    assert!(beats((f64::INFINITY, 9), (50.0, 1)));
    // An exact copy of the clean window scores +inf for every cutoff that
    // leaves it unchanged; a constant is passed exactly by every cutoff.
    let x = vec![0.5; 360];
    let cfg = small_cfg();
    assert_eq!(sweep_filter(&x, &x, FilterKind::Elliptic, &cfg).unwrap().1, 1);
}

#[test]
fn aggregates() {
    let mk = |d0: u32, d1: u32| WindowLabel::from_optima((0.0, d0), (0.0, d1));
    let labels = [mk(10, 3), mk(20, 5), mk(30, 5), mk(20, 7)];
    let (d0, d1) = aggregate_deltas(&labels, 1).unwrap();
    assert_eq!(d0, 20.0);
    assert_eq!(d1, 5);
    assert!(aggregate_deltas(&[], 1).is_err());

    let tied = [mk(1, 3), mk(1, 3), mk(1, 5), mk(1, 5)];
    let first = aggregate_deltas(&tied, 42).unwrap().1;
    assert!(first == 3 || first == 5);
    for _ in 0..5 {
        assert_eq!(aggregate_deltas(&tied, 42).unwrap().1, first);
    }
    // Different seeds reach both tied values.
    let seen: std::collections::BTreeSet<u32> =
        (0..40).map(|s| aggregate_deltas(&tied, s).unwrap().1).collect();
    assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![3, 5]);
    let distinct = [mk(1, 2), mk(1, 4), mk(1, 9)];
    assert!([2, 4, 9].contains(&aggregate_deltas(&distinct, 3).unwrap().1));
}

#[test]
fn split_sizes() {
    let s = split_assignment(3580, 0.67, 9).unwrap();
    let train = s.iter().filter(|&&v| v == Split::Train).count();
    assert_eq!((train, s.len() - train), (2399, 1181));
    assert_eq!(s, split_assignment(3580, 0.67, 9).unwrap());
    assert!(split_assignment(10, 1.0, 0).is_err());
}

#[test]
fn anomalous_window_is_rejected() {
    // Both filters pass DC, so a large offset can never be removed.
    let (x, _) = pair(2);
    let x: Vec<f64> = x.iter().map(|v| 0.05 * v).collect();
    let z: Vec<f64> = x.iter().map(|v| v + 0.9).collect();
    let (good_x, good_z) = pair(3);
    let sweeper = Sweeper::new(&small_cfg(), 360).unwrap();
    let bad = WindowPair {
        signal_id: "bad".into(),
        window_index: 0,
        noisy: z,
        clean: x,
    };
    let good = WindowPair {
        signal_id: "good".into(),
        window_index: 0,
        noisy: good_z,
        clean: good_x,
    };
    assert!(sweeper.omega(&bad.clean, &bad.noisy).unwrap().beta_db <= REJECTION_DB);
    let (kept, rejected) = label_windows(vec![bad, good], &sweeper).unwrap();
    assert_eq!(rejected, 1);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].0.signal_id, "good");
}

fn toy_signals(count: usize) -> Vec<Signal> {
    (0..count)
        .map(|i| {
            let f = 1.0 + i as f64 * 0.3;
            let samples = (0..720)
                .map(|t| {
                    let t = t as f64 / 360.0;
                    (2.0 * std::f64::consts::PI * f * t).sin() + 0.3 * (2.0 * std::f64::consts::PI * 7.0 * t).cos()
                })
                .collect();
            Signal::new(format!("s{i}"), samples, 360.0).unwrap()
        })
        .collect()
}

#[test]
fn dataset_build_and_round_trip() {
    let cfg = small_cfg();
    let noise = CorpusNoise {
        mode: NoiseMode::Sampled,
        seed: 5,
    };
    let ds = build_dataset(&toy_signals(4), &cfg, &noise, 360, 0.5).unwrap();
    assert_eq!(ds.provenance.windows_before_rejection, 8);
    assert_eq!(ds.len() + ds.provenance.rejected, 8);
    assert_eq!(ds.split_len(Split::Train) + ds.split_len(Split::Test), ds.len());
    assert!(ds.delta0_agg >= 1.0 && ds.delta0_agg <= 30.0);
    assert!((ds.delta1_agg as usize) < WAVELET_COUNT);
    for w in &ds.windows {
        assert!(w.label.beta_db > REJECTION_DB);
        assert_eq!(w.label.beta_db, w.label.beta0_db.max(w.label.beta1_db));
    }

    let again = build_dataset(&toy_signals(4), &cfg, &noise, 360, 0.5).unwrap();
    assert_eq!(ds, again);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    write_dataset(&ds, &path).unwrap();
    assert!(clean_path(&path).exists() && metadata_path(&path).exists());
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn dataset_errors() {
    let cfg = small_cfg();
    let noise = CorpusNoise {
        mode: NoiseMode::PaperLiteral,
        seed: 0,
    };
    let odd = vec![Signal::new("odd", vec![0.0, 1.0, 0.5], 360.0).unwrap()];
    assert!(matches!(
        build_dataset(&odd, &cfg, &noise, 360, 0.5),
        Err(Error::NonDivisibleLength { .. })
    ));
    assert!(build_dataset(&toy_signals(1), &cfg, &noise, 360, 0.0).is_err());
    assert!(build_dataset(&[], &cfg, &noise, 360, 0.5).is_err());
}

#[test]
fn corrupted_file_reports_line() {
    let cfg = small_cfg();
    let noise = CorpusNoise {
        mode: NoiseMode::Sampled,
        seed: 1,
    };
    let ds = build_dataset(&toy_signals(2), &cfg, &noise, 360, 0.5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_dataset(&ds, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let broken: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 2 { l.replacen(",train", ",bogus", 1).replacen(",test", ",bogus", 1) } else { l.to_owned() })
        .collect();
    std::fs::write(&path, broken.join("\n")).unwrap();
    match read_dataset(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}
