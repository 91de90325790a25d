//! Model files.
//!
//! Layout: the magic line `ECGSEL-MODEL/1\n`, a little-endian `u64` header
//! length, a JSON header (model spec, training history, optional feature
//! projection and denoising context, and a block table), then each block of
//! the table as little-endian `f64` values in table order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{EpochStats, Knn, LogReg, ModelSpec, Network, Params, Svm, TrainedModel};
use crate::classifiers::nn::Param;
use crate::elliptic::EllipticPreset;
use crate::error::{Error, Result};
use crate::features::{FeatureMode, Projection, ProjectionKind};
use crate::wavelet_filter::ShrinkageConfig;

pub const MAGIC: &[u8] = b"ECGSEL-MODEL/1\n";

/// What `denoise` needs besides the classifier: window length, the
/// aggregated filter parameters and the filter settings used for labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseContext {
    pub lambda: usize,
    pub sampling_rate_hz: f64,
    pub delta0_agg: f64,
    pub delta1_agg: u32,
    pub elliptic_preset: EllipticPreset,
    pub shrinkage: ShrinkageConfig,
    pub features: FeatureMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: TrainedModel,
    pub projection: Option<Projection>,
    pub denoise: Option<DenoiseContext>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FitInfo {
    iterations: usize,
    converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProjectionHeader {
    kind: ProjectionKind,
    seed: u64,
    iterations: usize,
    converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    input_dim: usize,
    history: Vec<EpochStats>,
    fit: Option<FitInfo>,
    projection: Option<ProjectionHeader>,
    denoise: Option<DenoiseContext>,
    blocks: Vec<BlockInfo>,
}

#[derive(Default)]
struct BlockWriter {
    info: Vec<BlockInfo>,
    data: Vec<f64>,
}

impl BlockWriter {
    fn push<'a>(&mut self, name: impl Into<String>, shape: Vec<usize>, values: impl IntoIterator<Item = &'a f64>) {
        let before = self.data.len();
        self.data.extend(values);
        debug_assert_eq!(self.data.len() - before, shape.iter().product::<usize>());
        self.info.push(BlockInfo {
            name: name.into(),
            shape,
        });
    }

    fn rows(&mut self, name: &str, rows: &[Vec<f64>], cols: usize) {
        self.push(name, vec![rows.len(), cols], rows.iter().flatten());
    }
}

struct BlockReader {
    blocks: HashMap<String, (Vec<usize>, Vec<f64>)>,
}

impl BlockReader {
    fn take(&mut self, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        self.blocks
            .remove(name)
            .ok_or_else(|| Error::ModelFormat(format!("missing block `{name}`")))
    }

    fn vector(&mut self, name: &str) -> Result<Vec<f64>> {
        Ok(self.take(name)?.1)
    }

    fn scalar(&mut self, name: &str) -> Result<f64> {
        match self.vector(name)?.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::ModelFormat(format!("block `{name}` is not a scalar"))),
        }
    }

    fn rows(&mut self, name: &str) -> Result<Vec<Vec<f64>>> {
        let (shape, data) = self.take(name)?;
        match shape.as_slice() {
            [_, 0] => Ok(vec![Vec::new(); shape[0]]),
            [_, c] => Ok(data.chunks(*c).map(<[f64]>::to_vec).collect()),
            _ => Err(Error::ModelFormat(format!("block `{name}` is not a matrix"))),
        }
    }
}

fn write_params(params: &Params, w: &mut BlockWriter) -> Option<FitInfo> {
    match params {
        Params::Knn(m) => {
            let d = m.x.first().map_or(0, Vec::len);
            w.rows("knn.x", &m.x, d);
            let y: Vec<f64> = m.y.iter().map(|&v| f64::from(v)).collect();
            w.push("knn.y", vec![y.len()], &y);
            None
        }
        Params::Logreg(m) => {
            w.push("logreg.w", vec![m.w.len()], &m.w);
            w.push("logreg.b", vec![1], [&m.b]);
            Some(FitInfo {
                iterations: m.iterations,
                converged: m.converged,
            })
        }
        Params::Svm(m) => {
            let d = m.support.first().map_or(0, Vec::len);
            w.rows("svm.support", &m.support, d);
            w.push("svm.coef", vec![m.coef.len()], &m.coef);
            w.push("svm.rho", vec![1], [&m.rho]);
            w.push("svm.gamma", vec![1], [&m.gamma]);
            Some(FitInfo {
                iterations: m.iterations,
                converged: m.converged,
            })
        }
        Params::Net(net) => {
            for (i, p) in net.params().iter().enumerate() {
                let (r, c) = p.w.dim();
                w.push(format!("net.{i}.w"), vec![r, c], p.w.iter());
                w.push(format!("net.{i}.b"), vec![p.b.len()], p.b.iter());
            }
            None
        }
    }
}

fn read_params(h: &Header, r: &mut BlockReader) -> Result<Params> {
    let fit = || {
        h.fit
            .clone()
            .ok_or_else(|| Error::ModelFormat("missing fit record".into()))
    };
    Ok(match &h.spec {
        ModelSpec::Knn { k } => {
            let y = r
                .vector("knn.y")?
                .into_iter()
                .map(|v| if v == 1.0 { 1 } else { 0 })
                .collect();
            Params::Knn(Knn {
                k: *k,
                x: r.rows("knn.x")?,
                y,
            })
        }
        ModelSpec::Logreg { .. } => {
            let f = fit()?;
            Params::Logreg(LogReg {
                w: r.vector("logreg.w")?,
                b: r.scalar("logreg.b")?,
                iterations: f.iterations,
                converged: f.converged,
            })
        }
        ModelSpec::Svm { .. } => {
            let f = fit()?;
            Params::Svm(Svm {
                gamma: r.scalar("svm.gamma")?,
                support: r.rows("svm.support")?,
                coef: r.vector("svm.coef")?,
                rho: r.scalar("svm.rho")?,
                iterations: f.iterations,
                converged: f.converged,
            })
        }
        ModelSpec::Dnn(spec) | ModelSpec::Cnn(spec) => {
            let count = spec
                .layers
                .iter()
                .filter(|l| matches!(l, super::LayerSpec::Conv1d { .. } | super::LayerSpec::Dense { .. }))
                .count();
            let mut params = Vec::with_capacity(count);
            for i in 0..count {
                let (shape, w) = r.take(&format!("net.{i}.w"))?;
                let [rows, cols] = shape[..] else {
                    return Err(Error::ModelFormat(format!("block `net.{i}.w` is not a matrix")));
                };
                let w = Array2::from_shape_vec((rows, cols), w).map_err(|e| Error::ModelFormat(e.to_string()))?;
                let b = Array1::from(r.vector(&format!("net.{i}.b"))?);
                params.push(Param { w, b });
            }
            Params::Net(Network::from_params(&spec.layers, h.input_dim, params)?)
        }
    })
}

pub fn write_model(file: &ModelFile, path: &Path) -> Result<()> {
    let mut blocks = BlockWriter::default();
    let fit = write_params(&file.model.params, &mut blocks);
    let projection = file.projection.as_ref().map(|p| {
        let n = p.input_dim();
        blocks.push("projection.mean", vec![n], &p.mean);
        blocks.rows("projection.components", &p.components, n);
        blocks.push("projection.explained_variance", vec![p.explained_variance.len()], &p.explained_variance);
        if let (Some(k), Some(u)) = (&p.whitening, &p.unmixing) {
            blocks.rows("projection.whitening", k, n);
            blocks.rows("projection.unmixing", u, u.len());
        }
        ProjectionHeader {
            kind: p.kind,
            seed: p.seed,
            iterations: p.iterations,
            converged: p.converged,
        }
    });
    let header = Header {
        spec: file.model.spec.clone(),
        input_dim: file.model.input_dim,
        history: file.model.history.clone(),
        fit,
        projection,
        denoise: file.denoise.clone(),
        blocks: blocks.info,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + 8 * blocks.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in &blocks.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path)?;
    let body = bytes
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::ModelFormat(format!("{} is not a model file", path.display())))?;
    if body.len() < 8 {
        return Err(Error::ModelFormat("truncated header length".into()));
    }
    let (len, rest) = body.split_at(8);
    let len = u64::from_le_bytes(len.try_into().expect("eight bytes")) as usize;
    if rest.len() < len {
        return Err(Error::ModelFormat("truncated header".into()));
    }
    let (json, mut data) = rest.split_at(len);
    let header: Header = serde_json::from_slice(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let mut blocks = HashMap::new();
    for b in &header.blocks {
        let n: usize = b.shape.iter().product();
        if data.len() < 8 * n {
            return Err(Error::ModelFormat(format!("truncated block `{}`", b.name)));
        }
        let (head, tail) = data.split_at(8 * n);
        let values = head
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect();
        blocks.insert(b.name.clone(), (b.shape.clone(), values));
        data = tail;
    }
    if !data.is_empty() {
        return Err(Error::ModelFormat(format!("{} trailing bytes", data.len())));
    }
    let mut reader = BlockReader { blocks };
    let params = read_params(&header, &mut reader)?;
    let projection = match &header.projection {
        None => None,
        Some(ph) => {
            let (whitening, unmixing) = match ph.kind {
                ProjectionKind::Pca => (None, None),
                ProjectionKind::Ica => (
                    Some(reader.rows("projection.whitening")?),
                    Some(reader.rows("projection.unmixing")?),
                ),
            };
            Some(Projection {
                kind: ph.kind,
                mean: reader.vector("projection.mean")?,
                components: reader.rows("projection.components")?,
                explained_variance: reader.vector("projection.explained_variance")?,
                whitening,
                unmixing,
                seed: ph.seed,
                iterations: ph.iterations,
                converged: ph.converged,
            })
        }
    };
    Ok(ModelFile {
        model: TrainedModel {
            spec: header.spec,
            input_dim: header.input_dim,
            params,
            history: header.history,
        },
        projection,
        denoise: header.denoise,
    })
}
