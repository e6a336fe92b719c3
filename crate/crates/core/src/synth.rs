//! Deterministic synthetic corpora with known answers.
//!
//! Each image carries Gaussian-blob saliency, a union-of-disks foreground
//! matte and a textured colour image. Maps are quantised to 16-bit codes at
//! generation time so that the in-memory corpus and its PNG files are the
//! same data. Ground truth comprises the analytic blob centroid and the
//! fixations of [`oracle_sas`], an exhaustive re-implementation of the
//! saliency-aware sampler kept separate from [`crate::sas`].
//!
//! The module also generates paired embedding sets `z_brain = R z + noise`
//! for alignment and retrieval experiments.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::imaging::{GrayMap, Image, Pixel, PixelPoint};
use crate::sas::SamplingConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub center: PixelPoint,
    pub radius: f64,
    pub peak: f64,
}

impl Blob {
    fn sigma(&self) -> f64 {
        self.radius / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    /// Explicit per-image blob layouts; when empty, layouts are drawn from `rng_seed`.
    pub layouts: Vec<Vec<Blob>>,
    pub max_blobs: usize,
    pub rng_seed: u64,
    /// Sampler settings used for the oracle ground truth.
    pub sampling: SamplingConfig,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            count: 20,
            width: 64,
            height: 64,
            layouts: Vec::new(),
            max_blobs: 3,
            rng_seed: 0,
            sampling: SamplingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub id: String,
    pub image: Image,
    pub matte: GrayMap,
    pub saliency: GrayMap,
    pub blobs: Vec<Blob>,
    /// Peak-mass-weighted mean of the blob centers.
    pub centroid: PixelPoint,
    pub oracle: Vec<Pixel>,
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 65535.0).round() / 65535.0
}

fn check_blob(b: &Blob, width: usize, height: usize) -> Result<()> {
    let fits = |c: f64, extent: usize| c - b.radius >= 0.0 && c + b.radius <= extent as f64 - 1.0;
    if !(b.radius > 0.0) || !(b.peak > 0.0 && b.peak <= 1.0) || !fits(b.center.x, width) || !fits(b.center.y, height) {
        return Err(Error::Argument(format!(
            "blob at ({}, {}) radius {} peak {} does not fit a {width}x{height} frame",
            b.center.x, b.center.y, b.radius, b.peak
        )));
    }
    Ok(())
}

fn random_layout(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Vec<Blob> {
    let short = spec.width.min(spec.height) as f64;
    let count = rng.gen_range(1..=spec.max_blobs.max(1));
    (0..count)
        .map(|_| {
            let radius = rng
                .gen_range(short / 12.0..short / 5.0)
                .max(1.0)
                .min(((short - 1.0) / 2.0).max(0.5));
            let mut coord = |extent: usize| {
                let lo = radius.ceil() as usize;
                let hi = (extent as f64 - 1.0 - radius).floor().max(0.0) as usize;
                if lo <= hi { rng.gen_range(lo..=hi) as f64 } else { (extent as f64 - 1.0) / 2.0 }
            };
            let x = coord(spec.width);
            let y = coord(spec.height);
            let peak = rng.gen_range(0.5..=1.0);
            Blob {
                center: PixelPoint::new(x, y),
                radius,
                peak,
            }
        })
        .collect()
}

fn render(id: String, blobs: Vec<Blob>, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<SynthImage> {
    let (w, h) = (spec.width, spec.height);
    let saliency = GrayMap::from_fn(h, w, |x, y| {
        let p = PixelPoint::new(x as f64, y as f64);
        let v: f64 = blobs
            .iter()
            .map(|b| {
                let d = p.distance(&b.center);
                b.peak * (-d * d / (2.0 * b.sigma() * b.sigma())).exp()
            })
            .sum();
        quantize(v)
    })?;
    let matte = GrayMap::from_fn(h, w, |x, y| {
        let p = PixelPoint::new(x as f64, y as f64);
        let v = blobs
            .iter()
            .map(|b| (b.radius + 0.5 - p.distance(&b.center)).clamp(0.0, 1.0))
            .fold(0.0, f64::max);
        quantize(v)
    })?;

    let background: [f64; 3] = [rng.gen_range(0.1..0.4), rng.gen_range(0.1..0.4), rng.gen_range(0.1..0.4)];
    let tint: [f64; 3] = [rng.gen_range(0.5..0.9), rng.gen_range(0.5..0.9), rng.gen_range(0.5..0.9)];
    let freq = rng.gen_range(0.3..0.9);
    let image = Image::from_fn(h, w, 3, |x, y, c| {
        let stripes = 0.1 * ((x as f64 * freq + y as f64 * 0.37 * (c + 1) as f64).sin());
        let a = matte.get(x, y);
        quantize(a * tint[c] + (1.0 - a) * background[c] + stripes)
    })?;

    let mass: f64 = blobs.iter().map(|b| b.peak * b.sigma() * b.sigma()).sum();
    let centroid = PixelPoint::new(
        blobs.iter().map(|b| b.peak * b.sigma() * b.sigma() * b.center.x).sum::<f64>() / mass,
        blobs.iter().map(|b| b.peak * b.sigma() * b.sigma() * b.center.y).sum::<f64>() / mass,
    );
    let oracle = oracle_sas(&saliency, &matte, &spec.sampling)?;
    Ok(SynthImage {
        id,
        image,
        matte,
        saliency,
        blobs,
        centroid,
        oracle,
    })
}

pub fn generate_corpus(spec: &SynthSpec) -> Result<Vec<SynthImage>> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::Argument("synthetic images need positive dimensions".into()));
    }
    if !spec.layouts.is_empty() && spec.layouts.len() != spec.count {
        return Err(Error::dims(format!("{} layouts", spec.count), spec.layouts.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let width = spec.count.max(1).to_string().len().max(3);
    let mut out = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let blobs = if spec.layouts.is_empty() {
            random_layout(&mut rng, spec)
        } else {
            spec.layouts[i].clone()
        };
        if blobs.is_empty() {
            return Err(Error::Argument(format!("image {i} has no blobs")));
        }
        for b in &blobs {
            check_blob(b, spec.width, spec.height)?;
        }
        out.push(render(format!("img{i:0width$}"), blobs, spec, &mut rng)?);
    }
    Ok(out)
}

/// Writes `images/`, `saliency/`, `masks/` PNGs plus `centroids.csv` and
/// `oracle_fixations.csv` under `dir`. `gamma` must match the sampler
/// settings the oracle ran with; it only affects the recorded scores.
pub fn write_corpus(corpus: &[SynthImage], gamma: f64, dir: &Path) -> Result<()> {
    for sub in ["images", "saliency", "masks"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut centroids = String::from("image_id,x,y\n");
    let mut fixations = String::from("image_id,k,x,y,score\n");
    for item in corpus {
        item.image.save(dir.join("images").join(format!("{}.png", item.id)))?;
        item.saliency.save(dir.join("saliency").join(format!("{}.png", item.id)))?;
        item.matte.save(dir.join("masks").join(format!("{}.png", item.id)))?;
        centroids.push_str(&format!("{},{:?},{:?}\n", item.id, item.centroid.x, item.centroid.y));
        for (k, p) in item.oracle.iter().enumerate() {
            let score = if k == 0 {
                0.0
            } else {
                oracle_score(&item.saliency, &item.oracle[..k], *p, gamma)
            };
            fixations.push_str(&format!("{},{},{},{},{score:?}\n", item.id, k + 1, p.x, p.y));
        }
    }
    for (name, text) in [("centroids.csv", centroids), ("oracle_fixations.csv", fixations)] {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

fn oracle_score(s: &GrayMap, centers: &[Pixel], p: Pixel, gamma: f64) -> f64 {
    let mut d = f64::INFINITY;
    for c in centers {
        let dx = p.x as f64 - c.x as f64;
        let dy = p.y as f64 - c.y as f64;
        d = d.min((dx * dx + dy * dy).sqrt());
    }
    d * s.get(p.x, p.y).powf(gamma)
}

/// Exhaustive saliency-aware sampling: every step rescans all candidates
/// against all chosen centers.
pub fn oracle_sas(s_att: &GrayMap, m_fg: &GrayMap, config: &SamplingConfig) -> Result<Vec<Pixel>> {
    let (w, h) = (s_att.width(), s_att.height());
    let mut region: Vec<Pixel> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if m_fg.get(x, y) > config.tau {
                region.push(Pixel::new(x, y));
            }
        }
    }
    if region.is_empty() {
        for y in 0..h {
            for x in 0..w {
                region.push(Pixel::new(x, y));
            }
        }
    }
    if config.k > region.len() {
        return Err(Error::RegionTooSmall {
            requested: config.k,
            available: region.len(),
            deficit: config.k - region.len(),
        });
    }

    let mut mass = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for p in &region {
        let v = s_att.get(p.x, p.y);
        mass += v;
        mx += v * p.x as f64;
        my += v * p.y as f64;
    }
    let target = if mass > 0.0 {
        (mx / mass, my / mass)
    } else {
        let n = region.len() as f64;
        (
            region.iter().map(|p| p.x as f64).sum::<f64>() / n,
            region.iter().map(|p| p.y as f64).sum::<f64>() / n,
        )
    };
    let mut seed = region[0];
    let mut seed_d = f64::INFINITY;
    for p in &region {
        let d = (p.x as f64 - target.0).hypot(p.y as f64 - target.1);
        if d < seed_d {
            seed_d = d;
            seed = *p;
        }
    }

    let mut centers = vec![seed];
    while centers.len() < config.k {
        let mut best: Option<(f64, Pixel)> = None;
        for p in &region {
            if centers.contains(p) {
                continue;
            }
            let j = oracle_score(s_att, &centers, *p, config.gamma);
            if best.is_none_or(|(b, _)| j > b) {
                best = Some((j, *p));
            }
        }
        centers.push(best.expect("capacity checked").1);
    }
    Ok(centers)
}

/// Paired embeddings `z_brain = R z_semantic + N(0, noise^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub semantic: EmbeddingMatrix,
    pub brain: EmbeddingMatrix,
    pub rotation: Vec<f64>,
}

/// Random orthogonal `d x d` matrix (Gram-Schmidt on a Gaussian draw), row-major.
pub fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        let mut ok = true;
        for i in 0..d {
            for j in 0..i {
                let proj: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                let prev = rows[j].clone();
                rows[i].iter_mut().zip(&prev).for_each(|(a, b)| *a -= proj * b);
            }
            let norm = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            rows[i].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            return rows.concat();
        }
    }
}

/// Applies `R` and adds Gaussian noise to every row of `semantic`.
pub fn brain_from_semantic(
    semantic: &EmbeddingMatrix,
    rotation: &[f64],
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<EmbeddingMatrix> {
    let d = semantic.dim();
    if rotation.len() != d * d {
        return Err(Error::dims(d * d, rotation.len()));
    }
    let normal = Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::Argument(e.to_string()))?;
    let mut data = Vec::with_capacity(semantic.rows() * d);
    for z in semantic.iter_rows() {
        for r in 0..d {
            let v: f64 = rotation[r * d..(r + 1) * d].iter().zip(z).map(|(a, b)| a * b).sum();
            data.push(v + if noise > 0.0 { normal.sample(rng) } else { 0.0 });
        }
    }
    let m = EmbeddingMatrix::new(semantic.rows(), d, data)?;
    Ok(match semantic.labels() {
        Some(l) => m.with_labels(l.to_vec())?,
        None => m,
    })
}

/// `count` unit-norm semantic rows of dimension `d` and their noisy rotations.
pub fn generate_pairs(count: usize, d: usize, noise: f64, seed: u64) -> Result<PairSet> {
    if d == 0 {
        return Err(Error::Argument("pair dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = random_rotation(&mut rng, d);
    let mut data = Vec::with_capacity(count * d);
    for _ in 0..count {
        let row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        data.extend(row.iter().map(|v| v / norm));
    }
    let semantic = EmbeddingMatrix::new(count, d, data)?;
    let brain = brain_from_semantic(&semantic, &rotation, noise, &mut rng)?;
    Ok(PairSet {
        semantic,
        brain,
        rotation,
    })
}
