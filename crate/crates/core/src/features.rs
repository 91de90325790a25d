//! Linear feature reduction fitted on training windows: PCA keeping the
//! leading `round(fraction * N)` components, and FastICA (log-cosh contrast,
//! symmetric decorrelation) on PCA-whitened data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

pub const PCA_FRACTION: f64 = 0.05;
pub const ICA_COMPONENTS: usize = 36;
pub const ICA_MAX_ITER: usize = 500;
pub const ICA_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Pca,
    Ica,
}

/// Which reduction, if any, precedes classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    #[default]
    None,
    Pca,
    Ica,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::None, FeatureMode::Pca, FeatureMode::Ica];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::None => "none",
            FeatureMode::Pca => "pca",
            FeatureMode::Ica => "ica",
        }
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FeatureMode::None),
            "pca" => Ok(FeatureMode::Pca),
            "ica" => Ok(FeatureMode::Ica),
            other => Err(Error::config(format!("unknown feature mode `{other}`"))),
        }
    }
}

/// A fitted linear map `x -> components * (x - mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub kind: ProjectionKind,
    pub mean: Vec<f64>,
    /// `k` rows of length `N`. For ICA this is `unmixing * whitening`.
    pub components: Vec<Vec<f64>>,
    /// PCA: variance along each component. ICA: variance of each whitened
    /// direction before unmixing.
    pub explained_variance: Vec<f64>,
    /// ICA only: `k x N` whitening rows.
    pub whitening: Option<Vec<Vec<f64>>>,
    /// ICA only: `k x k` unmixing rows acting on whitened data.
    pub unmixing: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

impl Projection {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, window: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            ProjectionKind::Pca => pca_transform(self, window),
            ProjectionKind::Ica => ica_transform(self, window),
        }
    }

    pub fn transform_batch(&self, windows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        windows.iter().map(|w| self.transform(w)).collect()
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(Error::invalid("no training windows"));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("training windows differ in length"));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

fn column_mean(x: &DMatrix<f64>) -> Vec<f64> {
    let m = x.nrows() as f64;
    (0..x.ncols()).map(|j| x.column(j).sum() / m).collect()
}

fn center(x: &mut DMatrix<f64>, mean: &[f64]) {
    for (j, mu) in mean.iter().enumerate() {
        for v in x.column_mut(j).iter_mut() {
            *v -= mu;
        }
    }
}

/// Flips `row` so its largest-magnitude entry is positive.
fn fix_sign(row: &mut [f64]) {
    let pivot = row
        .iter()
        .copied()
        .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
    if pivot < 0.0 {
        row.iter_mut().for_each(|v| *v = -*v);
    }
}

fn check_len(p: &Projection, window: &[f64]) -> Result<()> {
    if window.len() != p.input_dim() {
        return Err(Error::invalid(format!(
            "window of length {} for a projection fitted on {}",
            window.len(),
            p.input_dim()
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn pca_component_count(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).round() as usize
}

pub fn pca_fit(train: &[Vec<f64>], fraction: f64) -> Result<Projection> {
    let mut x = to_matrix(train)?;
    let (m, n) = x.shape();
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("PCA fraction must be in (0, 1], got {fraction}")));
    }
    let k = pca_component_count(n, fraction);
    if k == 0 {
        return Err(Error::config(format!("fraction {fraction} keeps no components of {n}")));
    }
    if m < k {
        return Err(Error::InsufficientData { needed: k, got: m });
    }
    let mean = column_mean(&x);
    center(&mut x, &mean);
    let svd = x.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::invalid("SVD did not produce right singular vectors"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut row: Vec<f64> = v_t.row(i).iter().copied().collect();
        fix_sign(&mut row);
        components.push(row);
        explained_variance.push(svd.singular_values[i].powi(2) / m as f64);
    }
    Ok(Projection {
        kind: ProjectionKind::Pca,
        mean,
        components,
        explained_variance,
        whitening: None,
        unmixing: None,
        seed: 0,
        iterations: 0,
        converged: true,
    })
}

pub fn pca_transform(p: &Projection, window: &[f64]) -> Result<Vec<f64>> {
    if p.kind != ProjectionKind::Pca {
        return Err(Error::invalid("not a PCA projection"));
    }
    check_len(p, window)?;
    let centered: Vec<f64> = window.iter().zip(&p.mean).map(|(a, b)| a - b).collect();
    Ok(p.components.iter().map(|c| dot(c, &centered)).collect())
}

/// Back-projection `components^T y + mean` of PCA coordinates.
pub fn pca_reconstruct(p: &Projection, coords: &[f64]) -> Result<Vec<f64>> {
    if coords.len() > p.output_dim() {
        return Err(Error::invalid("more coordinates than components"));
    }
    let mut out = p.mean.clone();
    for (c, y) in p.components.iter().zip(coords) {
        for (o, v) in out.iter_mut().zip(c) {
            *o += y * v;
        }
    }
    Ok(out)
}

/// `(W W^T)^{-1/2} W`.
fn symmetric_decorrelate(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.max(1e-300).sqrt()));
    &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w
}

pub fn ica_fit(train: &[Vec<f64>], n_components: usize, seed: u64) -> Result<Projection> {
    let mut x = to_matrix(train)?;
    let (m, n) = x.shape();
    if n_components == 0 || n_components > n {
        return Err(Error::config(format!(
            "ICA needs 1..={n} components, got {n_components}"
        )));
    }
    if m <= n_components {
        return Err(Error::InsufficientData {
            needed: n_components + 1,
            got: m,
        });
    }
    let mean = column_mean(&x);
    center(&mut x, &mean);

    // Whitening from the leading eigenpairs of the covariance.
    let cov = x.transpose() * &x / m as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = &order[..n_components];
    let smallest = eig.eigenvalues[top[n_components - 1]];
    if smallest <= 1e-12 * eig.eigenvalues[top[0]].max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "training data has rank below {n_components}; cannot whiten"
        )));
    }
    let mut whitening = DMatrix::zeros(n_components, n);
    let mut explained_variance = Vec::with_capacity(n_components);
    for (r, &i) in top.iter().enumerate() {
        let mut row: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_sign(&mut row);
        let scale = 1.0 / eig.eigenvalues[i].sqrt();
        for (j, v) in row.iter().enumerate() {
            whitening[(r, j)] = v * scale;
        }
        explained_variance.push(eig.eigenvalues[i]);
    }
    // Whitened data, one column per sample.
    let z = &whitening * x.transpose();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::ICA, 0));
    let init = DMatrix::from_fn(n_components, n_components, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelate(&init);
    let mut converged = false;
    let mut iterations = 0;
    let inv_m = 1.0 / m as f64;
    while iterations < ICA_MAX_ITER {
        iterations += 1;
        // g(u) = tanh(u), g'(u) = 1 - tanh(u)^2 for the log-cosh contrast.
        let u = &w * &z;
        let g = u.map(f64::tanh);
        let g_prime_mean = DVector::from_fn(n_components, |i, _| {
            g.row(i).iter().map(|t| 1.0 - t * t).sum::<f64>() * inv_m
        });
        let mut next = &g * z.transpose() * inv_m;
        for i in 0..n_components {
            let gp = g_prime_mean[i];
            for j in 0..n_components {
                next[(i, j)] -= gp * w[(i, j)];
            }
        }
        let next = symmetric_decorrelate(&next);
        let max_angle = (0..n_components)
            .map(|i| next.row(i).dot(&w.row(i)).abs().min(1.0).acos())
            .fold(0.0f64, f64::max);
        w = next;
        if max_angle < ICA_TOLERANCE {
            converged = true;
            break;
        }
    }

    let mut unmixing: Vec<Vec<f64>> = (0..n_components)
        .map(|i| w.row(i).iter().copied().collect())
        .collect();
    for row in &mut unmixing {
        fix_sign(row);
    }
    let w = DMatrix::from_fn(n_components, n_components, |i, j| unmixing[i][j]);
    let combined = &w * &whitening;
    let rows = |mat: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..mat.nrows()).map(|i| mat.row(i).iter().copied().collect()).collect()
    };
    Ok(Projection {
        kind: ProjectionKind::Ica,
        mean,
        components: rows(&combined),
        explained_variance,
        whitening: Some(rows(&whitening)),
        unmixing: Some(unmixing),
        seed,
        iterations,
        converged,
    })
}

pub fn ica_transform(p: &Projection, window: &[f64]) -> Result<Vec<f64>> {
    if p.kind != ProjectionKind::Ica {
        return Err(Error::invalid("not an ICA projection"));
    }
    check_len(p, window)?;
    let (Some(k), Some(w)) = (&p.whitening, &p.unmixing) else {
        return Err(Error::invalid("ICA projection lacks whitening or unmixing"));
    };
    let centered: Vec<f64> = window.iter().zip(&p.mean).map(|(a, b)| a - b).collect();
    let white: Vec<f64> = k.iter().map(|row| dot(row, &centered)).collect();
    Ok(w.iter().map(|row| dot(row, &white)).collect())
}

/// Sidecar describing a projection written by [`write_projection`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProjectionMeta {
    kind: ProjectionKind,
    input_dim: usize,
    output_dim: usize,
    explained_variance: Vec<f64>,
    seed: u64,
    iterations: usize,
    converged: bool,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

fn parse_matrix(path: &Path, cols: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let row: Vec<f64> = l
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            if row.len() != cols {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    msg: format!("expected {cols} values, found {}", row.len()),
                });
            }
            Ok(row)
        })
        .collect()
}

/// Writes `<stem>.mean.csv`, `<stem>.components.csv`, `<stem>.json` and,
/// for ICA, `<stem>.whitening.csv` and `<stem>.unmixing.csv`.
pub fn write_projection(p: &Projection, stem: &Path) -> Result<()> {
    fs::write(with_suffix(stem, ".mean.csv"), matrix_csv(std::slice::from_ref(&p.mean)))?;
    fs::write(with_suffix(stem, ".components.csv"), matrix_csv(&p.components))?;
    if let (Some(k), Some(w)) = (&p.whitening, &p.unmixing) {
        fs::write(with_suffix(stem, ".whitening.csv"), matrix_csv(k))?;
        fs::write(with_suffix(stem, ".unmixing.csv"), matrix_csv(w))?;
    }
    let meta = ProjectionMeta {
        kind: p.kind,
        input_dim: p.input_dim(),
        output_dim: p.output_dim(),
        explained_variance: p.explained_variance.clone(),
        seed: p.seed,
        iterations: p.iterations,
        converged: p.converged,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(with_suffix(stem, ".json"), json + "\n")?;
    Ok(())
}

pub fn read_projection(stem: &Path) -> Result<Projection> {
    let meta_path = with_suffix(stem, ".json");
    let meta: ProjectionMeta =
        serde_json::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| Error::Metadata {
            path: meta_path,
            msg: e.to_string(),
        })?;
    let n = meta.input_dim;
    let mean = parse_matrix(&with_suffix(stem, ".mean.csv"), n)?
        .pop()
        .ok_or_else(|| Error::invalid("empty mean vector file"))?;
    let components = parse_matrix(&with_suffix(stem, ".components.csv"), n)?;
    let (whitening, unmixing) = match meta.kind {
        ProjectionKind::Pca => (None, None),
        ProjectionKind::Ica => (
            Some(parse_matrix(&with_suffix(stem, ".whitening.csv"), n)?),
            Some(parse_matrix(&with_suffix(stem, ".unmixing.csv"), meta.output_dim)?),
        ),
    };
    if components.len() != meta.output_dim {
        return Err(Error::invalid("component count does not match metadata"));
    }
    Ok(Projection {
        kind: meta.kind,
        mean,
        components,
        explained_variance: meta.explained_variance,
        whitening,
        unmixing,
        seed: meta.seed,
        iterations: meta.iterations,
        converged: meta.converged,
    })
}

/// Fits the reduction named by `mode` on `train`; `None` for no reduction.
pub fn fit_feature_mode(mode: FeatureMode, train: &[Vec<f64>], seed: u64) -> Result<Option<Projection>> {
    match mode {
        FeatureMode::None => Ok(None),
        FeatureMode::Pca => pca_fit(train, PCA_FRACTION).map(Some),
        FeatureMode::Ica => ica_fit(train, ICA_COMPONENTS, seed).map(Some),
    }
}
