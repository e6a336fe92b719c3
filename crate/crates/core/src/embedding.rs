//! Embedding matrices, the `EMB1` file format, multi-view mean pooling and
//! a deterministic toy view encoder.
//!
//! `EMB1` layout (all little-endian):
//!
//! | bytes | content                          |
//! |-------|----------------------------------|
//! | 0..4  | ASCII `EMB1`                     |
//! | 4..8  | row count, `u32`                 |
//! | 8..12 | dimension, `u32`                 |
//! | 12..  | `rows * dim` `f32` values, row-major |
//!
//! Row labels live in an optional UTF-8 sidecar next to the file with the
//! extension replaced by `.labels`, one label per line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::foveation::FoveatedView;

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::dims(rows * dim, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "embedding matrix",
                index: i,
            });
        }
        Ok(Self {
            rows,
            dim,
            data,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::dims(dim, bad.len()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(Error::dims(format!("{} labels", self.rows), labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    /// New matrix holding the given rows (labels follow).
    pub fn select(&self, indices: &[usize]) -> EmbeddingMatrix {
        let data = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        EmbeddingMatrix {
            rows: indices.len(),
            dim: self.dim,
            data,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut matrix = decode_emb1(&bytes).map_err(|reason| Error::Decode {
            path: path.to_path_buf(),
            reason,
        })?;
        let sidecar = labels_path(path);
        if sidecar.exists() {
            let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            let labels: Vec<String> = text.lines().map(str::to_owned).collect();
            matrix = matrix.with_labels(labels)?;
        }
        Ok(matrix)
    }

    /// Writes the matrix, plus the label sidecar when labels are present.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, encode_emb1(self)).map_err(|e| Error::io(path, e))?;
        if let Some(labels) = &self.labels {
            let sidecar = labels_path(path);
            let mut text = String::new();
            for l in labels {
                text.push_str(l);
                text.push('\n');
            }
            fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
        }
        Ok(())
    }
}

pub fn labels_path(path: &Path) -> PathBuf {
    path.with_extension("labels")
}

pub fn encode_emb1(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * m.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim as u32).to_le_bytes());
    for &v in &m.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_emb1(bytes: &[u8]) -> Result<EmbeddingMatrix, String> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err("missing EMB1 header".into());
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (rows, dim) = (word(4), word(8));
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(12))
        .ok_or("header sizes overflow")?;
    if bytes.len() != expected {
        return Err(format!(
            "{rows}x{dim} payload needs {expected} bytes, file has {}",
            bytes.len()
        ));
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    EmbeddingMatrix::new(rows, dim, data).map_err(|e| e.to_string())
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Mean of the L2-normalised rows.
pub fn aggregate_views(views: &EmbeddingMatrix) -> Result<Vec<f64>> {
    if views.rows() == 0 {
        return Err(Error::Argument("cannot aggregate zero views".into()));
    }
    let mut out = vec![0.0; views.dim()];
    for (k, row) in views.iter_rows().enumerate() {
        let norm = l2_norm(row);
        if norm == 0.0 {
            return Err(Error::DegenerateEmbedding { row: k });
        }
        for (o, v) in out.iter_mut().zip(row) {
            *o += v / norm;
        }
    }
    let k = views.rows() as f64;
    out.iter_mut().for_each(|v| *v /= k);
    Ok(out)
}

/// Grayscale, area-average to `g x g` with `g * g = dim`, flatten, centre.
pub fn toy_view_encoder(view: &FoveatedView, dim: usize) -> Result<Vec<f64>> {
    let g = (dim as f64).sqrt().round() as usize;
    if dim == 0 || g * g != dim {
        return Err(Error::Argument(format!(
            "toy encoder dimension must be a positive perfect square, got {dim}"
        )));
    }
    let gray = view.image.to_gray();
    let (w, h) = (gray.width(), gray.height());
    if w == 0 || h == 0 {
        return Err(Error::Argument("cannot encode an empty view".into()));
    }

    // Exact area averaging: each output cell covers a w/g by h/g box and
    // integrates the fractional overlap with every source pixel. Offsetting
    // by one pixel value first makes constant views encode to exact zeros;
    // the final centring removes the offset anyway.
    let base = gray.get(0, 0);
    let mut out = Vec::with_capacity(dim);
    for gy in 0..g {
        let (y0, y1) = (gy as f64 * h as f64 / g as f64, (gy + 1) as f64 * h as f64 / g as f64);
        for gx in 0..g {
            let (x0, x1) = (gx as f64 * w as f64 / g as f64, (gx + 1) as f64 * w as f64 / g as f64);
            let mut acc = 0.0;
            for y in y0.floor() as usize..(y1.ceil() as usize).min(h) {
                let oy = (y1.min(y as f64 + 1.0) - y0.max(y as f64)).max(0.0);
                for x in x0.floor() as usize..(x1.ceil() as usize).min(w) {
                    let ox = (x1.min(x as f64 + 1.0) - x0.max(x as f64)).max(0.0);
                    acc += ox * oy * (gray.get(x, y) - base);
                }
            }
            out.push(acc / ((x1 - x0) * (y1 - y0)));
        }
    }
    let mean = out.iter().sum::<f64>() / dim as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    Ok(out)
}
