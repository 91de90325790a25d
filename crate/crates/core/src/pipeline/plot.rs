//! Four-panel window plots (clean, noisy, elliptic-filtered,
//! wavelet-filtered) as standalone SVG with a dotted RMS line per panel,
//! plus the plotted series as CSV `n,x,z,r0,r1`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::labeling::{FilterKind, LabeledDataset, LabeledWindow, Split, Sweeper};
use crate::signal::rms;

const WIDTH: f64 = 900.0;
const PANEL: f64 = 150.0;
const MARGIN: f64 = 40.0;

pub struct Panel<'a> {
    pub title: String,
    pub series: &'a [f64],
}

/// SVG with one panel per series, stacked vertically. Each RMS line carries
/// its exact value in a `data-rms` attribute.
pub fn render_svg(title: &str, panels: &[Panel<'_>]) -> String {
    let height = MARGIN + panels.len() as f64 * (PANEL + MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-size="14">{}</text>"#, escape(title));
    let plot_w = WIDTH - 2.0 * MARGIN;
    for (i, p) in panels.iter().enumerate() {
        let top = MARGIN + i as f64 * (PANEL + MARGIN);
        let level = rms(p.series);
        let (lo, hi) = p
            .series
            .iter()
            .chain(std::iter::once(&level))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let y = |v: f64| top + PANEL - (v - lo) / span * PANEL;
        let n = p.series.len().max(2) - 1;
        let x = |k: usize| MARGIN + k as f64 / n as f64 * plot_w;
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN}" y="{top}" width="{plot_w}" height="{PANEL}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="{:.1}">{} (RMS {:.4})</text>"#,
            top - 6.0,
            escape(&p.title),
            level
        );
        let points: Vec<String> = p
            .series
            .iter()
            .enumerate()
            .map(|(k, &v)| format!("{:.2},{:.2}", x(k), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<line class="rms" data-rms="{level}" x1="{MARGIN}" x2="{:.2}" y1="{:.2}" y2="{:.2}" stroke="green" stroke-dasharray="2 3"/>"#,
            MARGIN + plot_w,
            y(level),
            y(level)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn series_csv(x: &[f64], z: &[f64], r0: &[f64], r1: &[f64]) -> String {
    let mut s = String::from("n,x,z,r0,r1\n");
    for n in 0..x.len() {
        let _ = writeln!(s, "{n},{},{},{},{}", x[n], z[n], r0[n], r1[n]);
    }
    s
}

/// Writes `<signal>_w<index>.svg` and `.csv` for one labeled window, with
/// both filters at the window's own optima.
pub fn plot_window(w: &LabeledWindow, sweeper: &Sweeper, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let l = &w.label;
    let r0 = sweeper.filter(&w.noisy, FilterKind::Elliptic, l.delta0_raw)?;
    let r1 = sweeper.filter(&w.noisy, FilterKind::Wavelet, l.delta1_raw)?;
    let panels = [
        Panel {
            title: "clean x".into(),
            series: &w.clean,
        },
        Panel {
            title: "noisy z".into(),
            series: &w.noisy,
        },
        Panel {
            title: format!("elliptic r0, cutoff {} Hz, {:.3} dB", l.delta0_raw, l.beta0_db),
            series: &r0,
        },
        Panel {
            title: format!("wavelet r1, code {}, {:.3} dB", l.delta1_raw, l.beta1_db),
            series: &r1,
        },
    ];
    let title = format!("{} window {} (alpha = {})", w.signal_id, w.window_index, l.alpha);
    fs::create_dir_all(dir)?;
    let stem = format!("{}_w{}", w.signal_id, w.window_index);
    let svg = dir.join(format!("{stem}.svg"));
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&svg, render_svg(&title, &panels))?;
    fs::write(&csv, series_csv(&w.clean, &w.noisy, &r0, &r1))?;
    Ok((svg, csv))
}

/// Plots up to `count` test windows, alternating between the two labels
/// while both remain.
pub fn plot_dataset(ds: &LabeledDataset, count: usize, dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sweeper = Sweeper::new(&ds.provenance.sweep, ds.window_length())?;
    let mut by_class: [Vec<&LabeledWindow>; 2] = [Vec::new(), Vec::new()];
    for w in ds.split(Split::Test) {
        by_class[usize::from(w.label.alpha)].push(w);
    }
    let mut picked = Vec::with_capacity(count);
    let (mut a, mut b) = (by_class[0].iter(), by_class[1].iter());
    while picked.len() < count {
        let before = picked.len();
        for it in [&mut a, &mut b] {
            if picked.len() < count {
                if let Some(w) = it.next() {
                    picked.push(*w);
                }
            }
        }
        if picked.len() == before {
            break;
        }
    }
    picked.iter().map(|w| plot_window(w, &sweeper, dir)).collect()
}
