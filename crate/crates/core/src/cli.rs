//! Command-line front end.
//!
//! Corpus directories are paired by filename stem: `images/cat.png`,
//! `saliency/cat.png` and `masks/cat.png` describe the same image `cat`.
//! Every command writes its outputs sorted by image id.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::align::{train_align, AlignBatch};
use crate::config::RunConfig;
use crate::dissociation::{
    bucket_offsets, corpus_report, mask_stability, semantic_offset, OffsetRecord,
};
use crate::embedding::{aggregate_views, toy_view_encoder, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::foveation::{generate_views, FoveatedView};
use crate::imaging::{load_image, GrayMap, Pixel, PixelPoint};
use crate::retrieval::topk_accuracy;
use crate::sas::{sample, FixationSet};
use crate::synth::{generate_corpus, generate_pairs, write_corpus, SynthSpec};

const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "ppm", "pnm"];

#[derive(Debug, Parser)]
#[command(name = "simon", version, about = "Saliency-aware multi-view encoding and hyperbolic alignment")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per logical core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Configuration override, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select fixation centers for every image.
    Sample(SampleArgs),
    /// Render foveated views at the sampled fixations.
    Foveate(FoveateArgs),
    /// Pool per-view embeddings into one row per image.
    Aggregate(AggregateArgs),
    /// Train the hyperbolic alignment.
    Align(AlignArgs),
    /// Top-k retrieval of gallery items for each query.
    Retrieve(RetrieveArgs),
    /// Geometric-center to fixation offsets and their statistics.
    Offsets(OffsetsArgs),
    /// Threshold stability of soft foreground masks.
    MaskStability(MaskStabilityArgs),
    /// Generate synthetic inputs.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub saliency: PathBuf,
    #[arg(long)]
    pub masks: PathBuf,
    /// Output CSV `image_id,k,x,y,score`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FoveateArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub fixations: PathBuf,
    /// Output directory for `<image_id>_view<k>.png`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Directory of view images, encoded with the toy encoder.
    #[arg(long, conflicts_with = "embeddings", required_unless_present = "embeddings")]
    pub views: Option<PathBuf>,
    /// Per-view EMB1 file labelled `<image_id>:<k>`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub semantic: PathBuf,
    #[arg(long)]
    pub brain: PathBuf,
    #[arg(long)]
    pub perceptual: Option<PathBuf>,
    /// Output parameter file (EMB1).
    #[arg(long)]
    pub out: PathBuf,
    /// Output CSV `epoch,mean_loss`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub gallery: PathBuf,
    /// CSV `query_index,gallery_index`; defaults to query i matching gallery i.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Trained parameters from `align`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output CSV `k,accuracy`.
    #[arg(long)]
    pub out: PathBuf,
    /// Output CSV `query_index,rank`.
    #[arg(long)]
    pub ranks: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OffsetsArgs {
    #[arg(long)]
    pub saliency: PathBuf,
    #[arg(long)]
    pub masks: PathBuf,
    /// Output CSV `image_id,offset,bucket`.
    #[arg(long)]
    pub out: PathBuf,
    /// Output CSV `bin_left,count`.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Output CSV `bucket,count,mean,std`.
    #[arg(long)]
    pub buckets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaskStabilityArgs {
    #[arg(long)]
    pub masks: PathBuf,
    /// Output CSV `image_id,uncertain_fraction,area_diff_fraction`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// Images, saliency maps, mattes and ground-truth CSVs.
    Corpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired semantic/brain embeddings split into train and test files.
    Pairs {
        #[arg(long)]
        out: PathBuf,
    },
}

impl Cli {
    /// Merges defaults, the config file, `--set` overrides, then `--seed`/`--jobs`.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(jobs) = self.jobs {
            overrides.push(format!("jobs={jobs}"));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Sample(a) => cmd_sample(a, &cfg),
        Command::Foveate(a) => cmd_foveate(a, &cfg),
        Command::Aggregate(a) => cmd_aggregate(a, &cfg),
        Command::Align(a) => cmd_align(a, &cfg),
        Command::Retrieve(a) => cmd_retrieve(a, &cfg),
        Command::Offsets(a) => cmd_offsets(a, &cfg),
        Command::MaskStability(a) => cmd_mask_stability(a, &cfg),
        Command::Synth(a) => match &a.kind {
            SynthKind::Corpus { out } => cmd_synth_corpus(out, &cfg),
            SynthKind::Pairs { out } => cmd_synth_pairs(out, &cfg),
        },
    })
}

/// Image files in `dir` keyed by stem.
pub fn list_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if !path.is_file() || !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if out.insert(stem.to_owned(), path.clone()).is_some() {
                return Err(Error::Argument(format!(
                    "two files share the stem '{stem}' in {}",
                    dir.display()
                )));
            }
        }
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs `f` for every id in parallel, keeps successes in id order, and turns
/// any failures into one error after logging each of them.
fn per_image<T: Send>(
    ids: Vec<String>,
    what: &str,
    f: impl Fn(&str) -> Result<T> + Sync,
) -> (Vec<(String, T)>, Vec<String>) {
    let results: Vec<(String, Result<T>)> = ids
        .into_par_iter()
        .map(|id| {
            let r = f(&id);
            (id, r)
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (id, r) in results {
        match r {
            Ok(v) => ok.push((id, v)),
            Err(e) => {
                log::error!("{what} failed for {id}: {e}");
                failed.push(id);
            }
        }
    }
    (ok, failed)
}

fn failure_summary(what: &str, failed: &[String], total: usize) -> Result<()> {
    if failed.is_empty() {
        return Ok(());
    }
    Err(Error::Argument(format!(
        "{what} failed for {} of {total} images: {}",
        failed.len(),
        failed.join(", ")
    )))
}

fn lookup<'a>(map: &'a BTreeMap<String, PathBuf>, id: &str, kind: &str) -> Result<&'a PathBuf> {
    map.get(id)
        .ok_or_else(|| Error::Argument(format!("no {kind} file for '{id}'")))
}

fn cmd_sample(a: &SampleArgs, cfg: &RunConfig) -> Result<()> {
    let images = list_by_stem(&a.images)?;
    if images.is_empty() {
        return Err(Error::Argument(format!("no images in {}", a.images.display())));
    }
    let saliency = list_by_stem(&a.saliency)?;
    let masks = list_by_stem(&a.masks)?;
    let ids: Vec<String> = images.keys().cloned().collect();
    let total = ids.len();
    let (done, failed) = per_image(ids, "sampling", |id| {
        let image = load_image(&images[id])?;
        let s = GrayMap::load(lookup(&saliency, id, "saliency")?)?;
        let m = GrayMap::load(lookup(&masks, id, "mask")?)?;
        if s.width() != image.width() || s.height() != image.height() || !s.same_shape(&m) {
            return Err(Error::dims(
                format!("{}x{}", image.width(), image.height()),
                format!("saliency {}x{}, mask {}x{}", s.width(), s.height(), m.width(), m.height()),
            ));
        }
        sample(&s, &m, &cfg.sampling)
    });
    write_text(&a.out, &fixations_csv(&done))?;
    log::info!("wrote fixations for {} images to {}", done.len(), a.out.display());
    failure_summary("sampling", &failed, total)
}

/// `image_id,k,x,y,score` with 1-based `k`.
pub fn fixations_csv(sets: &[(String, FixationSet)]) -> String {
    let mut out = String::from("image_id,k,x,y,score\n");
    for (id, set) in sets {
        for (k, (c, s)) in set.centers.iter().zip(&set.scores).enumerate() {
            out.push_str(&format!("{id},{},{},{},{s:?}\n", k + 1, c.x, c.y));
        }
    }
    out
}

/// Parses a fixations CSV into per-image center lists ordered by `k`.
pub fn read_fixations(path: &Path) -> Result<BTreeMap<String, FixationSet>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut rows: BTreeMap<String, Vec<(usize, Pixel, f64)>> = BTreeMap::new();
    for record in reader.deserialize() {
        let (id, k, x, y, score): (String, usize, usize, usize, f64) =
            record.map_err(|e| csv_error(path, e))?;
        rows.entry(id).or_default().push((k, Pixel::new(x, y), score));
    }
    Ok(rows
        .into_iter()
        .map(|(id, mut v)| {
            v.sort_by_key(|r| r.0);
            let set = FixationSet {
                centers: v.iter().map(|r| r.1).collect(),
                scores: v.iter().map(|r| r.2).collect(),
            };
            (id, set)
        })
        .collect())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn view_name(id: &str, k: usize) -> String {
    format!("{id}_view{k}.png")
}

fn cmd_foveate(a: &FoveateArgs, cfg: &RunConfig) -> Result<()> {
    let images = list_by_stem(&a.images)?;
    let masks = list_by_stem(&a.masks)?;
    let fixations = read_fixations(&a.fixations)?;
    if fixations.is_empty() {
        return Err(Error::Argument(format!("no fixations in {}", a.fixations.display())));
    }
    create_dir(&a.out)?;
    let ids: Vec<String> = fixations.keys().cloned().collect();
    let total = ids.len();
    let (done, failed) = per_image(ids, "foveation", |id| {
        let image = load_image(lookup(&images, id, "image")?)?;
        let m = GrayMap::load(lookup(&masks, id, "mask")?)?;
        let views = generate_views(&image, &m, &fixations[id], &cfg.foveation)?;
        for (k, v) in views.iter().enumerate() {
            v.image.save(a.out.join(view_name(id, k + 1)))?;
        }
        Ok(views.len())
    });
    let count: usize = done.iter().map(|(_, n)| n).sum();
    log::info!("wrote {count} views to {}", a.out.display());
    failure_summary("foveation", &failed, total)
}

/// Splits `<image_id>_view<k>` into its parts.
fn parse_view_stem(stem: &str) -> Option<(String, usize)> {
    let (id, k) = stem.rsplit_once("_view")?;
    Some((id.to_owned(), k.parse().ok()?))
}

fn parse_view_label(label: &str) -> Option<(String, usize)> {
    let (id, k) = label.rsplit_once(':')?;
    Some((id.to_owned(), k.parse().ok()?))
}

fn cmd_aggregate(a: &AggregateArgs, cfg: &RunConfig) -> Result<()> {
    let mut groups: BTreeMap<String, Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    let dim;
    if let Some(dir) = &a.views {
        let mut files: BTreeMap<String, Vec<(usize, PathBuf)>> = BTreeMap::new();
        for (stem, path) in list_by_stem(dir)? {
            let (id, k) = parse_view_stem(&stem)
                .ok_or_else(|| Error::Argument(format!("view file '{stem}' is not <id>_view<k>")))?;
            files.entry(id).or_default().push((k, path));
        }
        let ids: Vec<String> = files.keys().cloned().collect();
        let total = ids.len();
        let (done, failed) = per_image(ids, "encoding", |id| {
            files[id]
                .iter()
                .map(|(k, path)| {
                    let view = FoveatedView {
                        image: load_image(path)?,
                        center: PixelPoint::new(0.0, 0.0),
                    };
                    Ok((*k, toy_view_encoder(&view, cfg.embedding_dim)?))
                })
                .collect::<Result<Vec<_>>>()
        });
        failure_summary("encoding", &failed, total)?;
        groups.extend(done);
        dim = cfg.embedding_dim;
    } else {
        let path = a.embeddings.as_ref().expect("clap enforces one input");
        let m = EmbeddingMatrix::read(path)?;
        let labels = m.labels().ok_or_else(|| {
            Error::Format(format!("{} has no labels sidecar", path.display()))
        })?;
        for (i, label) in labels.iter().enumerate() {
            let (id, k) = parse_view_label(label)
                .ok_or_else(|| Error::Format(format!("label '{label}' is not <id>:<k>")))?;
            groups.entry(id).or_default().push((k, m.row(i).to_vec()));
        }
        dim = m.dim();
    }
    if groups.is_empty() {
        return Err(Error::Argument("no views to aggregate".into()));
    }

    let mut rows = Vec::with_capacity(groups.len());
    let mut labels = Vec::with_capacity(groups.len());
    for (id, mut views) in groups {
        views.sort_by_key(|v| v.0);
        let rows_k: Vec<Vec<f64>> = views.into_iter().map(|v| v.1).collect();
        let matrix = EmbeddingMatrix::from_rows(&rows_k)?;
        let z = aggregate_views(&matrix).map_err(|e| match e {
            Error::DegenerateEmbedding { row } => Error::Argument(format!(
                "view {} of '{id}' has a zero embedding (constant view under the toy encoder?)",
                row + 1
            )),
            other => other,
        })?;
        rows.push(z);
        labels.push(id);
    }
    let out = if rows.is_empty() {
        EmbeddingMatrix::new(0, dim, Vec::new())?
    } else {
        EmbeddingMatrix::from_rows(&rows)?
    };
    out.with_labels(labels)?.write(&a.out)?;
    log::info!("wrote {} aggregated rows to {}", rows.len(), a.out.display());
    Ok(())
}

fn cmd_align(a: &AlignArgs, cfg: &RunConfig) -> Result<()> {
    let semantic = EmbeddingMatrix::read(&a.semantic)?;
    let brain = EmbeddingMatrix::read(&a.brain)?;
    let perceptual = a.perceptual.as_ref().map(EmbeddingMatrix::read).transpose()?;
    let batch = AlignBatch::new(semantic, perceptual, brain, cfg.train.t)?;
    let outcome = train_align(&batch, &cfg.train, cfg.curvature)?;
    outcome.params.write(&a.out)?;
    if let Some(h) = &a.history {
        outcome.write_history(h)?;
    }
    log::info!(
        "loss {:.6} -> {:.6}",
        outcome.history[0],
        outcome.history[outcome.history.len() - 1]
    );
    Ok(())
}

/// Reads `query_index,gallery_index` rows into a per-query vector.
pub fn read_truth(path: &Path, queries: usize) -> Result<Vec<usize>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut truth = vec![None; queries];
    for record in reader.deserialize() {
        let (q, g): (usize, usize) = record.map_err(|e| csv_error(path, e))?;
        let slot = truth
            .get_mut(q)
            .ok_or_else(|| Error::Argument(format!("truth row for query {q} but only {queries} queries")))?;
        *slot = Some(g);
    }
    truth
        .into_iter()
        .enumerate()
        .map(|(q, g)| g.ok_or_else(|| Error::Argument(format!("no truth entry for query {q}"))))
        .collect()
}

fn cmd_retrieve(a: &RetrieveArgs, cfg: &RunConfig) -> Result<()> {
    let queries = EmbeddingMatrix::read(&a.queries)?;
    let gallery = EmbeddingMatrix::read(&a.gallery)?;
    let truth = match &a.truth {
        Some(p) => read_truth(p, queries.rows())?,
        None => (0..queries.rows()).collect(),
    };
    let params = a.params.as_ref().map(crate::align::AlignParams::read).transpose()?;
    let report = topk_accuracy(&queries, &gallery, &truth, &cfg.ks, cfg.metric, params.as_ref())?;
    write_text(&a.out, &report.to_csv())?;
    if let Some(p) = &a.ranks {
        let mut text = String::from("query_index,rank\n");
        for (q, r) in report.per_query_rank.iter().enumerate() {
            text.push_str(&format!("{q},{r}\n"));
        }
        write_text(p, &text)?;
    }
    for (k, acc) in report.ks.iter().zip(&report.accuracy_at_k) {
        log::info!("top-{k} accuracy {acc:.4}");
    }
    Ok(())
}

fn cmd_offsets(a: &OffsetsArgs, cfg: &RunConfig) -> Result<()> {
    let saliency = list_by_stem(&a.saliency)?;
    if saliency.is_empty() {
        return Err(Error::Argument(format!("no saliency maps in {}", a.saliency.display())));
    }
    let masks = list_by_stem(&a.masks)?;
    let ids: Vec<String> = saliency.keys().cloned().collect();
    let total = ids.len();
    let (done, failed) = per_image(ids, "offset", |id| {
        let s = GrayMap::load(&saliency[id])?;
        let m = GrayMap::load(lookup(&masks, id, "mask")?)?;
        OffsetRecord::new(id, semantic_offset(&s, &m, &cfg.sampling)?)
    });
    let records: Vec<OffsetRecord> = done.into_iter().map(|(_, r)| r).collect();
    let mut text = String::from("image_id,offset,bucket\n");
    for r in &records {
        text.push_str(&format!("{},{:?},{}\n", r.image_id, r.offset, r.bucket));
    }
    write_text(&a.out, &text)?;
    if !records.is_empty() {
        let report = corpus_report(&records)?;
        log::info!("mean offset {:.3} +- {:.3} over {} images", report.mean, report.std, report.n);
        if let Some(p) = &a.histogram {
            write_text(p, &report.histogram_csv())?;
        }
        if let Some(p) = &a.buckets {
            let mut text = String::from("bucket,count,mean,std\n");
            for b in bucket_offsets(&records) {
                text.push_str(&format!("{},{},{:?},{:?}\n", b.bucket, b.count, b.mean, b.std));
            }
            write_text(p, &text)?;
        }
    }
    failure_summary("offset", &failed, total)
}

fn cmd_mask_stability(a: &MaskStabilityArgs, cfg: &RunConfig) -> Result<()> {
    let masks = list_by_stem(&a.masks)?;
    if masks.is_empty() {
        return Err(Error::Argument(format!("no masks in {}", a.masks.display())));
    }
    let ids: Vec<String> = masks.keys().cloned().collect();
    let total = ids.len();
    let (done, failed) = per_image(ids, "mask stability", |id| {
        mask_stability(&GrayMap::load(&masks[id])?, cfg.tau_lo, cfg.tau_hi)
    });
    let mut text = String::from("image_id,uncertain_fraction,area_diff_fraction\n");
    for (id, s) in &done {
        text.push_str(&format!("{id},{:?},{:?}\n", s.uncertain_fraction, s.area_diff_fraction));
    }
    write_text(&a.out, &text)?;
    failure_summary("mask stability", &failed, total)
}

fn cmd_synth_corpus(out: &Path, cfg: &RunConfig) -> Result<()> {
    let spec = SynthSpec {
        count: cfg.synth.count,
        width: cfg.synth.width,
        height: cfg.synth.height,
        layouts: Vec::new(),
        max_blobs: cfg.synth.max_blobs,
        rng_seed: cfg.seed,
        sampling: cfg.sampling.clone(),
    };
    let corpus = generate_corpus(&spec)?;
    create_dir(out)?;
    write_corpus(&corpus, cfg.sampling.gamma, out)?;
    log::info!("wrote {} synthetic images to {}", corpus.len(), out.display());
    Ok(())
}

fn cmd_synth_pairs(out: &Path, cfg: &RunConfig) -> Result<()> {
    let s = &cfg.synth;
    let pairs = generate_pairs(s.pairs + s.holdout, s.pair_dim, s.noise, cfg.seed)?;
    create_dir(out)?;
    let train: Vec<usize> = (0..s.pairs).collect();
    let test: Vec<usize> = (s.pairs..s.pairs + s.holdout).collect();
    pairs.semantic.select(&train).write(out.join("train_semantic.emb1"))?;
    pairs.brain.select(&train).write(out.join("train_brain.emb1"))?;
    pairs.semantic.select(&test).write(out.join("test_semantic.emb1"))?;
    pairs.brain.select(&test).write(out.join("test_brain.emb1"))?;
    log::info!("wrote {} training and {} held-out pairs to {}", s.pairs, s.holdout, out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_names_round_trip() {
        assert_eq!(view_name("img003", 2), "img003_view2.png");
        assert_eq!(parse_view_stem("img003_view2"), Some(("img003".into(), 2)));
        assert_eq!(parse_view_stem("a_view_view10"), Some(("a_view".into(), 10)));
        assert_eq!(parse_view_stem("plain"), None);
        assert_eq!(parse_view_label("x:y:3"), Some(("x:y".into(), 3)));
    }

    #[test]
    fn fixations_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let sets = vec![(
            "a".to_string(),
            FixationSet {
                centers: vec![Pixel::new(1, 2), Pixel::new(3, 4)],
                scores: vec![0.0, 2.5],
            },
        )];
        let text = fixations_csv(&sets);
        assert_eq!(text, "image_id,k,x,y,score\na,1,1,2,0.0\na,2,3,4,2.5\n");
        let path = dir.path().join("f.csv");
        fs::write(&path, &text).unwrap();
        let back = read_fixations(&path).unwrap();
        assert_eq!(back["a"], sets[0].1);
    }

    #[test]
    fn truth_requires_every_query() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "query_index,gallery_index\n1,0\n0,1\n").unwrap();
        assert_eq!(read_truth(&path, 2).unwrap(), vec![1, 0]);
        assert!(read_truth(&path, 3).is_err());
        assert!(read_truth(&path, 1).is_err());
    }

    #[test]
    fn seed_flag_overrides_file() {
        let cli = Cli::parse_from(["simon", "--seed", "9", "--set", "seed=3", "synth", "pairs", "--out", "x"]);
        assert_eq!(cli.run_config().unwrap().seed, 9);
    }
}
