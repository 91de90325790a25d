//! Labeled dataset files.
//!
//! `<name>.csv` holds one noisy window per row:
//! `signal_id,window_index,alpha,beta_db,delta,beta0_db,delta0,beta1_db,delta1,split,sample_0..`.
//! `<name>.clean.csv` holds the matching clean windows
//! (`signal_id,window_index,sample_0..`) and `<name>.meta.json` the
//! provenance and aggregates. Floats are written in shortest round-trip
//! form, so a write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FilterKind, LabeledDataset, LabeledWindow, Provenance, Split, WindowLabel};
use crate::error::{Error, Result};

const FORMAT: &str = "ecgsel-dataset/1";
const LABEL_COLUMNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub format: String,
    pub provenance: Provenance,
    pub delta0_agg: f64,
    pub delta1_agg: u32,
    pub windows: usize,
    pub train_windows: usize,
    pub test_windows: usize,
    /// `[elliptic, wavelet]` label counts over the whole dataset.
    pub class_counts: [usize; 2],
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn clean_path(dataset_csv: &Path) -> PathBuf {
    sibling(dataset_csv, ".clean.csv")
}

pub fn metadata_path(dataset_csv: &Path) -> PathBuf {
    sibling(dataset_csv, ".meta.json")
}

fn sample_header(out: &mut String, n: usize) {
    for i in 0..n {
        let _ = write!(out, ",sample_{i}");
    }
    out.push('\n');
}

fn push_samples(out: &mut String, xs: &[f64]) {
    for v in xs {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

/// Writes the dataset CSV and its two sidecars.
pub fn write_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let n = ds.window_length();
    let mut main = String::from(
        "signal_id,window_index,alpha,beta_db,delta,beta0_db,delta0,beta1_db,delta1,split",
    );
    sample_header(&mut main, n);
    let mut clean = String::from("signal_id,window_index");
    sample_header(&mut clean, n);
    for w in &ds.windows {
        if w.signal_id.contains([',', '\n', '"']) {
            return Err(Error::invalid(format!(
                "signal id `{}` cannot be written to CSV",
                w.signal_id
            )));
        }
        let l = &w.label;
        let _ = write!(
            main,
            "{},{},{},{},{},{},{},{},{},{}",
            w.signal_id,
            w.window_index,
            l.alpha,
            l.beta_db,
            l.delta,
            l.beta0_db,
            l.delta0_raw,
            l.beta1_db,
            l.delta1_raw,
            w.split.as_str()
        );
        push_samples(&mut main, &w.noisy);
        let _ = write!(clean, "{},{}", w.signal_id, w.window_index);
        push_samples(&mut clean, &w.clean);
    }
    let meta = DatasetMetadata {
        format: FORMAT.to_owned(),
        provenance: ds.provenance.clone(),
        delta0_agg: ds.delta0_agg,
        delta1_agg: ds.delta1_agg,
        windows: ds.len(),
        train_windows: ds.split_len(Split::Train),
        test_windows: ds.split_len(Split::Test),
        class_counts: ds.class_counts(),
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::invalid(format!("metadata serialisation: {e}")))?;
    fs::write(path, main)?;
    fs::write(clean_path(path), clean)?;
    fs::write(metadata_path(path), meta_json + "\n")?;
    Ok(())
}

struct Rows<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Rows<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Rows {
            path,
            lines: text.lines().enumerate(),
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_owned(),
            line,
            msg: msg.into(),
        }
    }

    fn next_row(&mut self) -> Option<(usize, Vec<&'a str>)> {
        self.lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.split(',').collect()))
    }
}

fn parse<T: std::str::FromStr>(rows: &Rows<'_>, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| rows.err(line, format!("bad {what} `{field}`")))
}

fn check_header(rows: &mut Rows<'_>, fixed: &[&str]) -> Result<usize> {
    let (line, header) = rows
        .next_row()
        .ok_or_else(|| rows.err(1, "missing header"))?;
    if header.len() <= fixed.len() || header[..fixed.len()] != *fixed {
        return Err(rows.err(line, format!("header must start with {}", fixed.join(","))));
    }
    for (i, h) in header[fixed.len()..].iter().enumerate() {
        if *h != format!("sample_{i}") {
            return Err(rows.err(line, format!("expected column sample_{i}, found `{h}`")));
        }
    }
    Ok(header.len() - fixed.len())
}

fn parse_samples(rows: &Rows<'_>, line: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            let v: f64 = parse(rows, line, f, "sample")?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(rows.err(line, "non-finite sample"))
            }
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let meta_path = metadata_path(path);
    let meta_text = fs::read_to_string(&meta_path)?;
    let meta: DatasetMetadata = serde_json::from_str(&meta_text).map_err(|e| Error::Metadata {
        path: meta_path.clone(),
        msg: e.to_string(),
    })?;
    if meta.format != FORMAT {
        return Err(Error::Metadata {
            path: meta_path,
            msg: format!("unsupported format `{}`", meta.format),
        });
    }

    let text = fs::read_to_string(path)?;
    let mut rows = Rows::new(path, &text);
    let fixed = [
        "signal_id",
        "window_index",
        "alpha",
        "beta_db",
        "delta",
        "beta0_db",
        "delta0",
        "beta1_db",
        "delta1",
        "split",
    ];
    let n = check_header(&mut rows, &fixed)?;
    if n != meta.provenance.lambda {
        return Err(rows.err(1, format!("{n} sample columns, metadata says {}", meta.provenance.lambda)));
    }
    let mut windows = Vec::with_capacity(meta.windows);
    while let Some((line, f)) = rows.next_row() {
        if f.len() != LABEL_COLUMNS + n {
            return Err(rows.err(line, format!("expected {} fields, found {}", LABEL_COLUMNS + n, f.len())));
        }
        let alpha: u8 = parse(&rows, line, f[2], "alpha")?;
        FilterKind::from_alpha(alpha).map_err(|e| rows.err(line, e.to_string()))?;
        let split = match f[9] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(rows.err(line, format!("bad split `{other}`"))),
        };
        windows.push(LabeledWindow {
            signal_id: f[0].to_owned(),
            window_index: parse(&rows, line, f[1], "window index")?,
            noisy: parse_samples(&rows, line, &f[LABEL_COLUMNS..])?,
            clean: Vec::new(),
            label: WindowLabel {
                alpha,
                beta_db: parse(&rows, line, f[3], "beta_db")?,
                delta: parse(&rows, line, f[4], "delta")?,
                beta0_db: parse(&rows, line, f[5], "beta0_db")?,
                delta0_raw: parse(&rows, line, f[6], "delta0")?,
                beta1_db: parse(&rows, line, f[7], "beta1_db")?,
                delta1_raw: parse(&rows, line, f[8], "delta1")?,
            },
            split,
        });
    }

    let cpath = clean_path(path);
    let ctext = fs::read_to_string(&cpath)?;
    let mut crows = Rows::new(&cpath, &ctext);
    let cn = check_header(&mut crows, &["signal_id", "window_index"])?;
    if cn != n {
        return Err(crows.err(1, format!("{cn} sample columns, dataset has {n}")));
    }
    let mut k = 0;
    while let Some((line, f)) = crows.next_row() {
        let w = windows
            .get_mut(k)
            .ok_or_else(|| crows.err(line, "more clean rows than dataset rows"))?;
        if f.len() != 2 + n {
            return Err(crows.err(line, format!("expected {} fields, found {}", 2 + n, f.len())));
        }
        let idx: usize = parse(&crows, line, f[1], "window index")?;
        if f[0] != w.signal_id || idx != w.window_index {
            return Err(crows.err(line, "clean row does not match dataset row"));
        }
        w.clean = parse_samples(&crows, line, &f[2..])?;
        k += 1;
    }
    if k != windows.len() {
        return Err(crows.err(k + 1, format!("{k} clean rows for {} windows", windows.len())));
    }
    if windows.len() != meta.windows {
        return Err(Error::Metadata {
            path: metadata_path(path),
            msg: format!("metadata lists {} windows, file has {}", meta.windows, windows.len()),
        });
    }
    Ok(LabeledDataset {
        windows,
        delta0_agg: meta.delta0_agg,
        delta1_agg: meta.delta1_agg,
        provenance: meta.provenance,
    })
}
