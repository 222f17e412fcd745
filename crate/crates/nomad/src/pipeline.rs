//! File-level steps behind the subcommands: triplet files, training,
//! scoring and evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use nomad_core::dataset::ManifestRow;
use nomad_core::eval::{aggregate_per_condition, monotonicity_report, EvalReport, FamilyMonotonicity};
use nomad_core::net::SpecTriplet;
use nomad_core::score::{ReferencePool, ScoreMode, ScoreRow, Scorer};
use nomad_core::spectrogram::FrontEnd;
use nomad_core::train::{fit, TrainConfig, TrainReport};
use nomad_core::triplet::{build_sample_sets, generate_triplets, split_sources, SamplerConfig, TripletRecord};
use nomad_core::{Embedding, EmbeddingModel, EncoderConfig, Spectrogram, SpectrogramConfig};
use rayon::prelude::*;

use crate::synth::{list_wavs, thread_pool};
use crate::{checkpoint, tables, wav, Error, Result};

pub const TRAIN_FILE: &str = "train.csv";
pub const VAL_FILE: &str = "val.csv";

fn path_string(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

/// Manifest rows with clip paths joined onto the manifest's directory.
pub fn read_manifest_resolved(manifest: &Path) -> Result<Vec<ManifestRow>> {
    let base = manifest.parent().unwrap_or(Path::new(""));
    let mut rows = tables::read_manifest(manifest)?;
    for r in &mut rows {
        r.clip_path = path_string(&base.join(&r.clip_path));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletOptions {
    pub count: usize,
    pub sampler: SamplerConfig,
    pub train_fraction: f64,
}

/// Builds source-disjoint train and validation triplets from a manifest and
/// writes them as `train.csv` and `val.csv` under `out_dir`.
pub fn make_triplets(manifest: &Path, out_dir: &Path, opts: &TripletOptions) -> Result<(Vec<TripletRecord>, Vec<TripletRecord>)> {
    if !(opts.train_fraction > 0.0 && opts.train_fraction < 1.0) {
        return Err(Error::Usage("--split must lie strictly between 0 and 1".into()));
    }
    let rows = read_manifest_resolved(manifest)?;
    let sets = build_sample_sets(&rows);
    if sets.len() < 2 {
        return Err(Error::Data(format!("need at least two usable sources, found {}", sets.len())));
    }
    let (train_sets, val_sets) = split_sources(&sets, opts.train_fraction, opts.sampler.rng_seed)?;
    let n_train = ((opts.count as f64 * opts.train_fraction).round() as usize).clamp(1, opts.count.max(2) - 1);
    let n_val = opts.count.max(2) - n_train;
    let train = generate_triplets(&train_sets, &opts.sampler, n_train)?;
    let val_cfg = SamplerConfig { rng_seed: nomad_core::seed::mix(&[opts.sampler.rng_seed, 1]), ..opts.sampler.clone() };
    let val = generate_triplets(&val_sets, &val_cfg, n_val)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    tables::write_triplets(&out_dir.join(TRAIN_FILE), &train)?;
    tables::write_triplets(&out_dir.join(VAL_FILE), &val)?;
    log::info!("{} training and {} validation triplets", train.len(), val.len());
    Ok((train, val))
}

/// Spectrograms of every distinct clip referenced by the triplets, in path
/// order, plus each clip's index.
pub fn load_spectrograms(paths: &BTreeSet<String>, jobs: usize) -> Result<(Vec<Spectrogram>, HashMap<String, usize>)> {
    let fe = FrontEnd::new(SpectrogramConfig::default())?;
    let list: Vec<&String> = paths.iter().collect();
    let specs = thread_pool(jobs)?.install(|| {
        list.par_iter()
            .map(|p| Ok(fe.compute(&wav::load_wav(Path::new(p.as_str()))?)?))
            .collect::<Result<Vec<_>>>()
    })?;
    let index = list.iter().enumerate().map(|(i, p)| ((*p).clone(), i)).collect();
    Ok((specs, index))
}

fn spec_triplets(records: &[TripletRecord], index: &HashMap<String, usize>) -> Vec<SpecTriplet> {
    records
        .iter()
        .map(|t| SpecTriplet { anchor: index[&t.anchor], positive: index[&t.positive], negative: index[&t.negative] })
        .collect()
}

/// Trains from in-memory triplet records whose clip paths point at WAV files.
pub fn train_records(
    train: &[TripletRecord],
    val: &[TripletRecord],
    encoder: EncoderConfig,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<(EmbeddingModel, TrainReport)> {
    let train_sources: BTreeSet<&str> = train.iter().map(|t| t.source_id.as_str()).collect();
    if let Some(shared) = val.iter().find(|t| train_sources.contains(t.source_id.as_str())) {
        return Err(Error::Data(format!("source {} appears in both training and validation triplets", shared.source_id)));
    }
    let paths: BTreeSet<String> = train
        .iter()
        .chain(val)
        .flat_map(|t| [t.anchor.clone(), t.positive.clone(), t.negative.clone()])
        .collect();
    let (specs, index) = load_spectrograms(&paths, jobs)?;
    let model = EmbeddingModel::init(encoder)?;
    let start = Instant::now();
    let (best, mut report) = fit(model, &specs, &spec_triplets(train, &index), &spec_triplets(val, &index), cfg)?;
    report.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok((best, report))
}

/// Trains from triplet CSV files, then writes the checkpoint and the
/// per-epoch report.
pub fn train_files(
    train_csv: &Path,
    val_csv: &Path,
    encoder: EncoderConfig,
    cfg: &TrainConfig,
    checkpoint_out: &Path,
    report_out: &Path,
    jobs: usize,
) -> Result<(EmbeddingModel, TrainReport)> {
    let train = tables::read_triplets(train_csv)?;
    let val = tables::read_triplets(val_csv)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data("training and validation triplet files must be nonempty".into()));
    }
    let (model, report) = train_records(&train, &val, encoder, cfg, jobs)?;
    checkpoint::save_checkpoint(&model, checkpoint_out)?;
    tables::write_train_report(report_out, &report, cfg.lr)?;
    log::info!(
        "best epoch {} validation loss {:.6} (initial {:.6}) in {:.1} s",
        report.best_epoch,
        report.best_val_loss,
        report.initial_val_loss,
        report.wall_time_s.unwrap_or(0.0)
    );
    Ok((model, report))
}

/// Embeddings keyed by (checkpoint hash, clip path), so every reference is
/// embedded once per model.
#[derive(Debug)]
pub struct EmbeddingCache {
    model_hash: String,
    entries: Mutex<HashMap<(String, PathBuf), Embedding>>,
}

impl EmbeddingCache {
    pub fn new(model: &EmbeddingModel) -> Self {
        Self { model_hash: checkpoint::checkpoint_hash(model), entries: Mutex::new(HashMap::new()) }
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn embed(&self, scorer: &Scorer, path: &Path) -> Result<Embedding> {
        let key = (self.model_hash.clone(), path.to_path_buf());
        if let Some(e) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(e.clone());
        }
        let e = scorer.embed(&wav::load_wav(path)?)?;
        self.entries.lock().expect("cache lock").insert(key, e.clone());
        Ok(e)
    }
}

/// Clean reference for `clip` in full-reference mode: `<pool>/<parent>.wav`
/// when the clip sits in a per-source directory, else `<pool>/<file name>`.
pub fn fr_reference(clip: &Path, pool_dir: &Path) -> Option<PathBuf> {
    let by_parent = clip.parent().and_then(|p| p.file_name()).map(|n| pool_dir.join(n).with_extension("wav"));
    let by_name = clip.file_name().map(|n| pool_dir.join(n));
    by_parent.into_iter().chain(by_name).find(|p| p.is_file())
}

pub fn pool_id(pool_dir: &Path) -> String {
    pool_dir.file_name().map_or_else(|| path_string(pool_dir), |n| n.to_string_lossy().into_owned())
}

/// Scores clips against a non-matching reference pool or their own clean
/// references.
pub fn score_clips(
    model: EmbeddingModel,
    clips: &[PathBuf],
    pool_dir: &Path,
    mode: ScoreMode,
    cache: &EmbeddingCache,
    jobs: usize,
) -> Result<Vec<ScoreRow>> {
    let scorer = Scorer::new(model)?;
    let pool_threads = thread_pool(jobs)?;
    let pool = match mode {
        ScoreMode::Nmr => {
            let refs = list_wavs(pool_dir, false)?;
            if refs.is_empty() {
                return Err(Error::EmptyCorpus(pool_dir.to_path_buf()));
            }
            let embeddings = pool_threads
                .install(|| refs.par_iter().map(|r| cache.embed(&scorer, r)).collect::<Result<Vec<_>>>())?;
            Some(ReferencePool::from_embeddings(pool_id(pool_dir), embeddings)?)
        }
        ScoreMode::Fr => None,
    };
    pool_threads.install(|| {
        clips
            .par_iter()
            .map(|clip| {
                let e = cache.embed(&scorer, clip)?;
                let (nomad, pool_id) = match &pool {
                    Some(pool) => (pool.mean_distance(&e)?, pool.pool_id.clone()),
                    None => {
                        let r = fr_reference(clip, pool_dir).ok_or_else(|| {
                            Error::Data(format!("no clean reference for {} in {}", clip.display(), pool_dir.display()))
                        })?;
                        (e.distance(&cache.embed(&scorer, &r)?), path_string(&r))
                    }
                };
                Ok(ScoreRow { clip_path: path_string(clip), nomad, mode, pool_id })
            })
            .collect()
    })
}

pub fn score_dir(
    model_path: &Path,
    input_dir: &Path,
    pool_dir: &Path,
    mode: ScoreMode,
    out: &Path,
    jobs: usize,
) -> Result<Vec<ScoreRow>> {
    let model = checkpoint::load_checkpoint(model_path)?;
    let clips = list_wavs(input_dir, true)?;
    if clips.is_empty() {
        return Err(Error::EmptyCorpus(input_dir.to_path_buf()));
    }
    let cache = EmbeddingCache::new(&model);
    let rows = score_clips(model, &clips, pool_dir, mode, &cache, jobs)?;
    tables::write_scores(out, &rows)?;
    log::info!("scored {} clips ({} embeddings computed)", rows.len(), cache.len());
    Ok(rows)
}

/// Join key for clip paths written by different tools: the canonical path
/// when the file exists, else the path as written.
fn join_key(p: &str) -> String {
    std::fs::canonicalize(p).map_or_else(|_| p.replace('\\', "/"), |c| path_string(&c))
}

pub fn eval_mos(scores: &Path, mos: &Path) -> Result<EvalReport> {
    let mut scores = tables::read_scores(scores)?;
    let mut mos = tables::read_mos(mos)?;
    scores.iter_mut().for_each(|s| s.clip_path = join_key(&s.clip_path));
    mos.iter_mut().for_each(|m| m.clip_path = join_key(&m.clip_path));
    Ok(aggregate_per_condition(&scores, &mos)?)
}

pub fn eval_rank(scores: &Path, manifest: &Path, threshold: f64) -> Result<Vec<FamilyMonotonicity>> {
    let mut scores = tables::read_scores(scores)?;
    let mut rows = read_manifest_resolved(manifest)?;
    scores.iter_mut().for_each(|s| s.clip_path = join_key(&s.clip_path));
    rows.iter_mut().for_each(|r| r.clip_path = join_key(&r.clip_path));
    let report = monotonicity_report(&scores, &rows, threshold);
    if report.is_empty() {
        return Err(nomad_core::Error::JoinEmpty.into());
    }
    Ok(report)
}

/// Mean score per `family/level` condition, for quick inspection.
pub fn condition_means(scores: &[ScoreRow], manifest: &[ManifestRow]) -> BTreeMap<String, f64> {
    let by_clip: HashMap<&str, f64> = scores.iter().map(|s| (s.clip_path.as_str(), s.nomad)).collect();
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in manifest.iter().filter(|r| !r.is_clean()) {
        if let Some(&v) = by_clip.get(r.clip_path.as_str()) {
            let e = acc.entry(r.condition_id()).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}
