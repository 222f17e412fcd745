//! CSV tables: manifest, triplets, scores, MOS ratings and reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nomad_core::dataset::{ManifestRow, CLEAN_LABEL};
use nomad_core::degrade::Family;
use nomad_core::eval::{EvalReport, FamilyMonotonicity, MosRecord};
use nomad_core::score::ScoreRow;
use nomad_core::train::TrainReport;
use nomad_core::triplet::TripletRecord;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MANIFEST_HEADER: &str = "clip_path,source_id,family,level_index,level_param,nsim";
pub const TRIPLET_HEADER: &str = "source_id,anchor_path,positive_path,negative_path,q_a,q_p,q_n,strategy";
pub const SCORE_HEADER: &str = "clip_path,nomad,mode,pool_id";
pub const MOS_HEADER: &str = "clip_path,condition_id,mos";
pub const REPORT_HEADER: &str = "epoch,train_loss,val_loss,lr";

#[derive(Debug, Serialize, Deserialize)]
struct ManifestCsv {
    clip_path: String,
    source_id: String,
    family: String,
    level_index: usize,
    level_param: f64,
    nsim: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TripletCsv {
    source_id: String,
    anchor_path: String,
    positive_path: String,
    negative_path: String,
    q_a: f64,
    q_p: f64,
    q_n: f64,
    strategy: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreCsv {
    clip_path: String,
    nomad: f64,
    mode: String,
    pool_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct MosCsv {
    clip_path: String,
    condition_id: String,
    mos: f64,
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(f)))
}

fn write_all<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::table(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_all<T: for<'de> Deserialize<'de>>(path: &Path, header: &str) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let got = r.headers().map_err(|e| Error::table(path, e))?.iter().collect::<Vec<_>>().join(",");
    if got != header {
        return Err(Error::table(path, format!("expected header `{header}`, found `{got}`")));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::table(path, format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    write_all(
        path,
        rows.iter().map(|r| ManifestCsv {
            clip_path: r.clip_path.clone(),
            source_id: r.source_id.clone(),
            family: r.family_label().into(),
            level_index: r.level_index,
            level_param: r.level_param,
            nsim: r.nsim,
        }),
    )
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    read_all::<ManifestCsv>(path, MANIFEST_HEADER)?
        .into_iter()
        .map(|r| {
            let family = if r.family == CLEAN_LABEL {
                None
            } else {
                Some(r.family.parse::<Family>().map_err(|e| Error::table(path, e))?)
            };
            Ok(ManifestRow {
                clip_path: r.clip_path,
                source_id: r.source_id,
                family,
                level_index: r.level_index,
                level_param: r.level_param,
                nsim: r.nsim,
            })
        })
        .collect()
}

pub fn write_triplets(path: &Path, rows: &[TripletRecord]) -> Result<()> {
    write_all(
        path,
        rows.iter().map(|t| TripletCsv {
            source_id: t.source_id.clone(),
            anchor_path: t.anchor.clone(),
            positive_path: t.positive.clone(),
            negative_path: t.negative.clone(),
            q_a: t.q_a,
            q_p: t.q_p,
            q_n: t.q_n,
            strategy: t.strategy.name().into(),
        }),
    )
}

pub fn read_triplets(path: &Path) -> Result<Vec<TripletRecord>> {
    read_all::<TripletCsv>(path, TRIPLET_HEADER)?
        .into_iter()
        .map(|t| {
            Ok(TripletRecord {
                source_id: t.source_id,
                anchor: t.anchor_path,
                positive: t.positive_path,
                negative: t.negative_path,
                q_a: t.q_a,
                q_p: t.q_p,
                q_n: t.q_n,
                strategy: t.strategy.parse().map_err(|e| Error::table(path, e))?,
            })
        })
        .collect()
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    write_all(
        path,
        rows.iter().map(|r| ScoreCsv {
            clip_path: r.clip_path.clone(),
            nomad: r.nomad,
            mode: r.mode.name().into(),
            pool_id: r.pool_id.clone(),
        }),
    )
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    read_all::<ScoreCsv>(path, SCORE_HEADER)?
        .into_iter()
        .map(|r| {
            if !r.nomad.is_finite() || r.nomad < 0.0 {
                return Err(Error::table(path, format!("invalid score {} for {}", r.nomad, r.clip_path)));
            }
            Ok(ScoreRow {
                clip_path: r.clip_path,
                nomad: r.nomad,
                mode: r.mode.parse().map_err(|e| Error::table(path, e))?,
                pool_id: r.pool_id,
            })
        })
        .collect()
}

pub fn write_mos(path: &Path, rows: &[MosRecord]) -> Result<()> {
    write_all(
        path,
        rows.iter().map(|r| MosCsv { clip_path: r.clip_path.clone(), condition_id: r.condition_id.clone(), mos: r.mos }),
    )
}

pub fn read_mos(path: &Path) -> Result<Vec<MosRecord>> {
    read_all::<MosCsv>(path, MOS_HEADER)?
        .into_iter()
        .map(|r| {
            if !r.mos.is_finite() || r.condition_id.is_empty() {
                return Err(Error::table(path, format!("invalid MOS row for {}", r.clip_path)));
            }
            Ok(MosRecord { clip_path: r.clip_path, condition_id: r.condition_id, mos: r.mos })
        })
        .collect()
}

/// One line per trained epoch; epoch 0 holds the untrained validation loss.
pub fn write_train_report(path: &Path, report: &TrainReport, initial_lr: f64) -> Result<()> {
    let mut w = create(path)?;
    let io = |e: csv::Error| Error::table(path, e);
    w.write_record(REPORT_HEADER.split(',')).map_err(io)?;
    w.write_record(["0".into(), String::new(), report.initial_val_loss.to_string(), initial_lr.to_string()])
        .map_err(io)?;
    for e in &report.epochs {
        w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.to_string(), e.lr.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = create(path)?;
    let io = |e: csv::Error| Error::table(path, e);
    w.write_record(["condition_id", "mean_score", "mean_mos", "clips"]).map_err(io)?;
    for c in &report.conditions {
        w.write_record([c.condition_id.clone(), c.mean_score.to_string(), c.mean_mos.to_string(), c.clips.to_string()])
            .map_err(io)?;
    }
    w.write_record(["pc".into(), report.pc.to_string(), String::new(), String::new()]).map_err(io)?;
    w.write_record(["sc".into(), report.sc.to_string(), String::new(), String::new()]).map_err(io)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_rank_report(path: &Path, families: &[FamilyMonotonicity]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e: csv::Error| Error::table(path, e);
    w.write_record(["family", "direction", "clips", "sc_clip", "sc_condition", "flagged"]).map_err(io)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| v.to_string());
    for f in families {
        w.write_record([
            f.family.name().to_string(),
            f.direction.to_string(),
            f.clips.to_string(),
            opt(f.sc_clip),
            opt(f.sc_condition),
            f.flagged.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plain text table for terminals.
pub fn render_eval(report: &EvalReport) -> String {
    let mut out = String::new();
    let width = report.conditions.iter().map(|c| c.condition_id.len()).max().unwrap_or(9).max(9);
    out += &format!("{:<width$}  {:>10}  {:>8}  {:>5}\n", "condition", "mean_score", "mean_mos", "clips");
    for c in &report.conditions {
        out += &format!("{:<width$}  {:>10.6}  {:>8.4}  {:>5}\n", c.condition_id, c.mean_score, c.mean_mos, c.clips);
    }
    out += &format!("PC {:.6}  SC {:.6}  conditions {}  unmatched {}\n", report.pc, report.sc, report.n_conditions, report.unmatched);
    out
}

pub fn render_rank(families: &[FamilyMonotonicity]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
    let mut out = format!("{:<22}  {:>9}  {:>5}  {:>12}  {:>12}  flagged\n", "family", "direction", "clips", "sc_clip", "sc_condition");
    for f in families {
        out += &format!(
            "{:<22}  {:>9}  {:>5}  {:>12}  {:>12}  {}\n",
            f.family.name(),
            f.direction,
            f.clips,
            opt(f.sc_clip),
            opt(f.sc_condition),
            if f.flagged { "yes" } else { "no" }
        );
    }
    out
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
