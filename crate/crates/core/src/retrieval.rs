//! Zero-shot retrieval: rank a gallery for each query and report Top-k accuracy.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::align::AlignParams;
use crate::embedding::{l2_norm, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::lorentz::{matvec, LorentzManifold, LorentzPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// Rank by `-d^2` after lifting onto the Lorentz model of curvature `-c`.
    Hyperbolic { curvature: f64 },
    Cosine,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Hyperbolic { .. } => f.write_str("hyperbolic"),
            Metric::Cosine => f.write_str("cosine"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Parses `cosine` or `hyperbolic` (curvature 1; set it afterwards).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "hyperbolic" => Ok(Metric::Hyperbolic { curvature: 1.0 }),
            other => Err(Error::Config(format!("unknown retrieval metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub ks: Vec<usize>,
    pub accuracy_at_k: Vec<f64>,
    /// 1-based rank of the true item for each query.
    pub per_query_rank: Vec<usize>,
}

impl RetrievalReport {
    pub fn accuracy(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.accuracy_at_k[i])
    }

    /// `k,accuracy` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,accuracy\n");
        for (k, a) in self.ks.iter().zip(&self.accuracy_at_k) {
            out.push_str(&format!("{k},{a:?}\n"));
        }
        out
    }
}

enum Prepared {
    Hyperbolic {
        manifold: LorentzManifold,
        points: Vec<LorentzPoint>,
        alpha_query: f64,
    },
    Cosine {
        rows: Vec<Vec<f64>>,
    },
}

/// A gallery prepared once for ranking many queries.
pub struct Ranker {
    prepared: Prepared,
    query_dim: usize,
}

impl Ranker {
    /// Gallery rows are visual embeddings; with `params` they are projected by
    /// `W_v` (and lifted with `alpha_v`), queries are lifted with `alpha_b`.
    pub fn new(gallery: &EmbeddingMatrix, metric: Metric, params: Option<&AlignParams>) -> Result<Self> {
        if gallery.rows() == 0 {
            return Err(Error::Argument("empty retrieval gallery".into()));
        }
        if let Some(p) = params {
            if p.input_dim() != gallery.dim() {
                return Err(Error::dims(format!("gallery dim {}", p.input_dim()), gallery.dim()));
            }
        }
        let projected: Vec<Vec<f64>> = gallery
            .iter_rows()
            .map(|z| match params {
                Some(p) => matvec(&p.w_v, z),
                None => z.to_vec(),
            })
            .collect();
        let query_dim = params.map_or(gallery.dim(), AlignParams::manifold_dim);
        let prepared = match metric {
            Metric::Hyperbolic { curvature } => {
                let manifold = LorentzManifold::new(curvature, query_dim)?;
                let alpha_v = params.map_or(1.0, AlignParams::alpha_v);
                let points = projected
                    .iter()
                    .map(|v| manifold.lift(v, alpha_v, None))
                    .collect::<Result<Vec<_>>>()?;
                Prepared::Hyperbolic {
                    manifold,
                    points,
                    alpha_query: params.map_or(1.0, AlignParams::alpha_b),
                }
            }
            Metric::Cosine => Prepared::Cosine { rows: projected },
        };
        Ok(Self { prepared, query_dim })
    }

    /// Similarity of the query to every gallery item.
    pub fn scores(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.query_dim {
            return Err(Error::dims(self.query_dim, query.len()));
        }
        Ok(match &self.prepared {
            Prepared::Hyperbolic {
                manifold,
                points,
                alpha_query,
            } => {
                let q = manifold.lift(query, *alpha_query, None)?;
                points
                    .iter()
                    .map(|p| {
                        let d = manifold.dist_unchecked(&q.coords, &p.coords);
                        -d * d
                    })
                    .collect()
            }
            Prepared::Cosine { rows } => {
                let qn = l2_norm(query);
                rows.iter()
                    .map(|r| {
                        let denom = qn * l2_norm(r);
                        if denom == 0.0 {
                            0.0
                        } else {
                            r.iter().zip(query).map(|(a, b)| a * b).sum::<f64>() / denom
                        }
                    })
                    .collect()
            }
        })
    }

    /// Gallery indices by descending similarity, ties to the smaller index.
    pub fn rank(&self, query: &[f64]) -> Result<Vec<usize>> {
        let scores = self.scores(query)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(order)
    }
}

pub fn rank(
    query: &[f64],
    gallery: &EmbeddingMatrix,
    metric: Metric,
    params: Option<&AlignParams>,
) -> Result<Vec<usize>> {
    Ranker::new(gallery, metric, params)?.rank(query)
}

pub fn topk_accuracy(
    queries: &EmbeddingMatrix,
    gallery: &EmbeddingMatrix,
    truth: &[usize],
    ks: &[usize],
    metric: Metric,
    params: Option<&AlignParams>,
) -> Result<RetrievalReport> {
    if truth.len() != queries.rows() {
        return Err(Error::dims(format!("{} truth entries", queries.rows()), truth.len()));
    }
    if queries.rows() == 0 {
        return Err(Error::Argument("no retrieval queries".into()));
    }
    if let Some(bad) = truth.iter().position(|&t| t >= gallery.rows()) {
        return Err(Error::Argument(format!(
            "truth index {} for query {bad} exceeds gallery size {}",
            truth[bad],
            gallery.rows()
        )));
    }
    if ks.contains(&0) {
        return Err(Error::Argument("cutoffs must be >= 1".into()));
    }
    let ranker = Ranker::new(gallery, metric, params)?;
    let per_query_rank = (0..queries.rows())
        .into_par_iter()
        .map(|q| {
            let order = ranker.rank(queries.row(q))?;
            Ok(order.iter().position(|&g| g == truth[q]).expect("permutation") + 1)
        })
        .collect::<Result<Vec<usize>>>()?;
    let n = queries.rows() as f64;
    let accuracy_at_k = ks
        .iter()
        .map(|&k| per_query_rank.iter().filter(|&&r| r <= k).count() as f64 / n)
        .collect();
    Ok(RetrievalReport {
        ks: ks.to_vec(),
        accuracy_at_k,
        per_query_rank,
    })
}
