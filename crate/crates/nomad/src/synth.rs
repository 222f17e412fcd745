//! Degraded-dataset synthesis from a directory of clean WAV files.
//!
//! Output layout under the output directory:
//!
//! ```text
//! manifest.csv
//! clean/<source>.wav
//! degraded/<source>/<family>_<level>.wav
//! ```
//!
//! Manifest paths are relative to the output directory.

use std::path::{Path, PathBuf};

use nomad_core::dataset::ManifestRow;
use nomad_core::degrade::{apply_condition, DegradationCondition, DegradeOptions, Family};
use nomad_core::nsim::{NsimConfig, NsimScorer};
use nomad_core::signal::to_canonical;
use nomad_core::SpectrogramConfig;
use rayon::prelude::*;

use crate::{tables, wav, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug)]
pub struct SynthOptions {
    pub seed: u64,
    pub families: Vec<Family>,
    pub degrade: DegradeOptions,
    pub jobs: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { seed: 0, families: Family::BUILT_IN.to_vec(), degrade: DegradeOptions::default(), jobs: 1 }
    }
}

/// `*.wav` files in `dir` (and below when `recursive`), in lexicographic
/// path order.
pub fn list_wavs(dir: &Path, recursive: bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                if recursive {
                    stack.push(path);
                }
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Data(format!("cannot start worker threads: {e}")))
}

fn source_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn synth_source(path: &Path, out_dir: &Path, opts: &SynthOptions, scorer: &NsimScorer) -> Result<Vec<ManifestRow>> {
    let sid = source_id(path);
    let clean = to_canonical(&wav::load_wav(path)?)?.quantized_pcm16();
    let clean_spec = scorer.front_end().compute(&clean)?;
    let clean_rel = format!("clean/{sid}.wav");
    wav::write_wav(&out_dir.join(&clean_rel), &clean)?;
    let deg_dir = out_dir.join("degraded").join(&sid);
    std::fs::create_dir_all(&deg_dir).map_err(|e| Error::io(&deg_dir, e))?;
    let mut rows = vec![ManifestRow::clean(clean_rel, sid.clone())];
    for c in DegradationCondition::grid(&opts.families) {
        let d = apply_condition(&clean, &c, opts.seed, &sid, &opts.degrade)?.quantized_pcm16();
        let q = scorer.score_spectrograms(&clean_spec, &scorer.front_end().compute(&d)?)?;
        let rel = format!("degraded/{sid}/{}_{}.wav", c.family.name(), c.level_index);
        wav::write_wav(&out_dir.join(&rel), &d)?;
        rows.push(ManifestRow::degraded(rel, sid.clone(), &c, q.utterance));
    }
    Ok(rows)
}

/// Writes every degraded version of every clean file plus `manifest.csv`.
/// Sources that fail are logged and skipped; the run fails only when none
/// succeeds.
pub fn synth_dataset(clean_dir: &Path, out_dir: &Path, opts: &SynthOptions) -> Result<Vec<ManifestRow>> {
    let files = list_wavs(clean_dir, false)?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus(clean_dir.to_path_buf()));
    }
    if opts.families.is_empty() {
        return Err(Error::Usage("at least one degradation family is required".into()));
    }
    std::fs::create_dir_all(out_dir.join("clean")).map_err(|e| Error::io(out_dir, e))?;
    let scorer = NsimScorer::new(SpectrogramConfig::default(), NsimConfig::default())?;
    let results: Vec<Result<Vec<ManifestRow>>> = thread_pool(opts.jobs)?
        .install(|| files.par_iter().map(|f| synth_source(f, out_dir, opts, &scorer)).collect());
    let mut rows = Vec::new();
    for (f, r) in files.iter().zip(results) {
        match r {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => log::warn!("skipping {}: {e}", f.display()),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyCorpus(clean_dir.to_path_buf()));
    }
    nomad_core::dataset::validate_manifest(&rows)?;
    tables::write_manifest(&out_dir.join(MANIFEST_FILE), &rows)?;
    log::info!("wrote {} manifest rows for {} sources", rows.len(), rows.iter().filter(|r| r.is_clean()).count());
    Ok(rows)
}
