//! In-memory form of the degraded-speech manifest.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;


use crate::degrade::{DegradationCondition, Family};
use crate::{Error, Result};

/// Family label written for the clean row of each source.
pub const CLEAN_LABEL: &str = "clean";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub clip_path: String,
    pub source_id: String,
    /// `None` marks the clean reference row.
    pub family: Option<Family>,
    pub level_index: usize,
    pub level_param: f64,
    pub nsim: f64,
}

impl ManifestRow {
    pub fn clean(clip_path: String, source_id: String) -> Self {
        Self { clip_path, source_id, family: None, level_index: 0, level_param: 0.0, nsim: 1.0 }
    }

    pub fn degraded(clip_path: String, source_id: String, c: &DegradationCondition, nsim: f64) -> Self {
        Self {
            clip_path,
            source_id,
            family: Some(c.family),
            level_index: c.level_index,
            level_param: c.level_param,
            nsim,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.family.is_none()
    }

    pub fn family_label(&self) -> &'static str {
        self.family.map_or(CLEAN_LABEL, Family::name)
    }

    /// `family/level_index`, the key used for per-condition aggregation.
    pub fn condition_id(&self) -> String {
        format!("{}/{}", self.family_label(), self.level_index)
    }
}

/// Checks NSIM ranges and that every source has one clean row and the same
/// number of degraded rows.
pub fn validate_manifest(rows: &[ManifestRow]) -> Result<()> {
    let mut per_source: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in rows {
        if !(0.0..=1.0).contains(&r.nsim) {
            return Err(Error::InvalidParameter(format!("nsim {} out of range for {}", r.nsim, r.clip_path)));
        }
        let e = per_source.entry(&r.source_id).or_default();
        if r.is_clean() {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let mut degraded_counts = per_source.values().map(|c| c.1);
    let first = degraded_counts.next();
    for (src, (clean, _)) in &per_source {
        if *clean != 1 {
            return Err(Error::InvalidParameter(format!("source {src} has {clean} clean rows")));
        }
    }
    if degraded_counts.any(|c| Some(c) != first) {
        return Err(Error::InvalidParameter("sources have different numbers of degraded rows".into()));
    }
    Ok(())
}
