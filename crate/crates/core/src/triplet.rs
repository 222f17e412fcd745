//! NSIM-guided triplet sampling.
//!
//! All three members of a triplet come from the degraded versions of a
//! single clean source. The positive is the entry whose NSIM is closest to
//! the anchor's. The negative is either drawn uniformly from entries that
//! are farther than the positive by more than a margin `s` (easy), or is the
//! closest entry strictly farther than the positive (hard).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::ManifestRow;
use crate::{Error, Result};

/// Retry budget per requested triplet.
pub const ATTEMPTS_PER_TRIPLET: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEntry {
    pub clip: String,
    pub q: f64,
}

/// Degraded versions of one clean source with their NSIM scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub source_id: String,
    pub entries: Vec<SampleEntry>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn dist(&self, i: usize, anchor: usize) -> f64 {
        (self.entries[i].q - self.entries[anchor].q).abs()
    }
}

/// Groups degraded manifest rows by source (sorted by source id). Clean
/// rows are left out; sources with fewer than three entries are skipped.
pub fn build_sample_sets(rows: &[ManifestRow]) -> Vec<SampleSet> {
    let mut groups: BTreeMap<&str, Vec<SampleEntry>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_clean()) {
        groups
            .entry(&r.source_id)
            .or_default()
            .push(SampleEntry { clip: r.clip_path.clone(), q: r.nsim });
    }
    groups
        .into_iter()
        .filter_map(|(source_id, entries)| {
            if entries.len() < 3 {
                let e = Error::TooFewEntries { source_id: source_id.into(), count: entries.len(), needed: 3 };
                log::warn!("skipping source: {e}");
                None
            } else {
                Some(SampleSet { source_id: source_id.into(), entries })
            }
        })
        .collect()
}

/// Index of the entry (other than the anchor) with the NSIM closest to the
/// anchor's; ties go to the lower index.
pub fn pick_positive(set: &SampleSet, anchor: usize) -> Result<usize> {
    if set.len() < 2 || anchor >= set.len() {
        return Err(Error::InvalidParameter("positive selection needs two entries and a valid anchor".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for i in (0..set.len()).filter(|&i| i != anchor) {
        let d = set.dist(i, anchor);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    Ok(best.expect("at least one candidate").0)
}

/// Entries farther from the anchor than the positive by more than `s`.
pub fn easy_negative_candidates(set: &SampleSet, anchor: usize, positive: usize, s: f64) -> Vec<usize> {
    let bound = set.dist(positive, anchor) + s;
    (0..set.len())
        .filter(|&i| i != anchor && i != positive && set.dist(i, anchor) > bound)
        .collect()
}

pub fn sample_easy_negative(set: &SampleSet, anchor: usize, positive: usize, s: f64, rng: &mut impl Rng) -> Result<usize> {
    easy_negative_candidates(set, anchor, positive, s)
        .choose(rng)
        .copied()
        .ok_or(Error::EmptyNegativeSet)
}

/// Closest entry whose distance to the anchor strictly exceeds the
/// positive's; ties go to the lower index.
pub fn sample_hard_negative(set: &SampleSet, anchor: usize, positive: usize) -> Result<usize> {
    let dp = set.dist(positive, anchor);
    let mut best: Option<(usize, f64)> = None;
    for i in (0..set.len()).filter(|&i| i != anchor && i != positive) {
        let d = set.dist(i, anchor);
        if d > dp && best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyNegativeSet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Easy,
    Hard,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Easy => "easy",
            Strategy::Hard => "hard",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Strategy::Easy),
            "hard" => Ok(Strategy::Hard),
            _ => Err(Error::InvalidParameter(format!("unknown strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletRecord {
    pub source_id: String,
    pub anchor: String,
    pub positive: String,
    pub negative: String,
    pub q_a: f64,
    pub q_p: f64,
    pub q_n: f64,
    pub strategy: Strategy,
}

impl TripletRecord {
    /// Whether the NSIM ordering constraints of the record hold for margin `s`.
    pub fn satisfies_ordering(&self, s: f64) -> bool {
        let dp = (self.q_p - self.q_a).abs();
        let dn = (self.q_n - self.q_a).abs();
        match self.strategy {
            Strategy::Easy => dn > dp + s,
            Strategy::Hard => dn > dp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Extra NSIM margin for easy negatives.
    pub s: f64,
    /// Probability that a triplet uses the easy strategy.
    pub strategy_mix: f64,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { s: 0.05, strategy_mix: 0.5, rng_seed: 0 }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0) || !(0.0..=1.0).contains(&self.strategy_mix) {
            return Err(Error::InvalidParameter("need s >= 0 and strategy_mix in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Draws `count` triplets: source uniform, anchor uniform within the source,
/// strategy by `strategy_mix`. Anchors without a valid negative are retried,
/// up to [`ATTEMPTS_PER_TRIPLET`] attempts per requested triplet overall.
pub fn generate_triplets(sets: &[SampleSet], cfg: &SamplerConfig, count: usize) -> Result<Vec<TripletRecord>> {
    cfg.validate()?;
    if count == 0 {
        return Err(Error::InvalidParameter("triplet count must be at least 1".into()));
    }
    let usable: Vec<&SampleSet> = sets.iter().filter(|s| s.len() >= 3).collect();
    if usable.is_empty() {
        return Err(Error::ExhaustedSampler { found: 0, requested: count });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut out = Vec::with_capacity(count);
    let budget = count.saturating_mul(ATTEMPTS_PER_TRIPLET);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == budget {
            return Err(Error::ExhaustedSampler { found: out.len(), requested: count });
        }
        attempts += 1;
        let set = usable[rng.gen_range(0..usable.len())];
        let anchor = rng.gen_range(0..set.len());
        let strategy = if rng.gen::<f64>() < cfg.strategy_mix { Strategy::Easy } else { Strategy::Hard };
        let positive = pick_positive(set, anchor)?;
        let negative = match strategy {
            Strategy::Easy => sample_easy_negative(set, anchor, positive, cfg.s, &mut rng),
            Strategy::Hard => sample_hard_negative(set, anchor, positive),
        };
        let Ok(negative) = negative else { continue };
        let e = &set.entries;
        out.push(TripletRecord {
            source_id: set.source_id.clone(),
            anchor: e[anchor].clip.clone(),
            positive: e[positive].clip.clone(),
            negative: e[negative].clip.clone(),
            q_a: e[anchor].q,
            q_p: e[positive].q,
            q_n: e[negative].q,
            strategy,
        });
    }
    Ok(out)
}

/// Shuffles sources with `seed` and assigns the first
/// `round(n * train_fraction)` to training (at least one per side when
/// there are two or more sources).
pub fn split_sources(sets: &[SampleSet], train_fraction: f64, seed: u64) -> Result<(Vec<SampleSet>, Vec<SampleSet>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidParameter("train fraction must be in [0, 1]".into()));
    }
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = sets.len();
    let mut n_train = libm::round(n as f64 * train_fraction) as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let pick = |idx: &[usize]| {
        let mut v: Vec<SampleSet> = idx.iter().map(|&i| sets[i].clone()).collect();
        v.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        v
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::{DegradationCondition, Family};
    use alloc::string::ToString;
    use alloc::vec;

    fn set(qs: &[f64]) -> SampleSet {
        SampleSet {
            source_id: "s".into(),
            entries: qs.iter().enumerate().map(|(i, &q)| SampleEntry { clip: format!("c{i}"), q }).collect(),
        }
    }

    const WORKED: [f64; 5] = [0.80, 0.78, 0.70, 0.83, 0.95];

    #[test]
    fn worked_example_positive() {
        let s = set(&WORKED);
        assert_eq!(pick_positive(&s, 0).unwrap(), 1);
    }

    #[test]
    fn worked_example_easy_candidates() {
        let s = set(&WORKED);
        assert_eq!(easy_negative_candidates(&s, 0, 1, 0.05), vec![2, 4]);
        assert_eq!(easy_negative_candidates(&s, 0, 1, 0.0), vec![2, 3, 4]);
    }

    #[test]
    fn worked_example_hard_negative() {
        let s = set(&WORKED);
        assert_eq!(sample_hard_negative(&s, 0, 1).unwrap(), 3);
    }

    #[test]
    fn positive_prefers_exact_duplicate_and_lower_index() {
        let s = set(&[0.5, 0.6, 0.5, 0.4]);
        assert_eq!(pick_positive(&s, 0).unwrap(), 2);
        let s = set(&[0.5, 0.6, 0.4, 0.7]);
        assert_eq!(pick_positive(&s, 0).unwrap(), 1);
        assert!(pick_positive(&set(&[0.5]), 0).is_err());
    }

    #[test]
    fn empty_negative_sets() {
        let s = set(&[0.5, 0.4, 0.6, 0.3, 0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_easy_negative(&s, 0, 1, 0.5, &mut rng), Err(Error::EmptyNegativeSet));
        let flat = set(&[0.5, 0.7, 0.7, 0.7]);
        assert_eq!(sample_hard_negative(&flat, 0, 1), Err(Error::EmptyNegativeSet));
        let three = set(&[0.5, 0.52, 0.9]);
        assert_eq!(sample_hard_negative(&three, 0, 1).unwrap(), 2);
    }

    fn manifest(sources: usize, per_source: usize) -> Vec<ManifestRow> {
        let mut rows = Vec::new();
        for s in 0..sources {
            let id = format!("src{s}");
            rows.push(ManifestRow::clean(format!("{id}/clean.wav"), id.clone()));
            for k in 0..per_source {
                let c = DegradationCondition::new(Family::BUILT_IN[k / 5 % 4], k % 5).unwrap();
                let q = 0.3 + 0.6 * ((k * 7 + s * 3) % 20) as f64 / 20.0 + 0.001 * k as f64;
                rows.push(ManifestRow::degraded(format!("{id}/{k}.wav"), id.clone(), &c, q));
            }
        }
        rows
    }

    #[test]
    fn sample_sets_group_and_filter() {
        let sets = build_sample_sets(&manifest(2, 20));
        assert_eq!(sets.len(), 2);
        assert!(sets.iter().all(|s| s.len() == 20));
        let rows = manifest(1, 20);
        assert_eq!(sets[0].entries[4].q.to_bits(), rows[5].nsim.to_bits());
        let mut rows = manifest(2, 20);
        rows.retain(|r| r.source_id == "src0" || r.is_clean() || r.clip_path.ends_with("/0.wav") || r.clip_path.ends_with("/1.wav"));
        let sets = build_sample_sets(&rows);
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].source_id, "src0".to_string());
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let sets = build_sample_sets(&manifest(5, 20));
        let cfg = SamplerConfig { rng_seed: 9, ..SamplerConfig::default() };
        let a = generate_triplets(&sets, &cfg, 500).unwrap();
        let b = generate_triplets(&sets, &cfg, 500).unwrap();
        assert_eq!(a, b);
        for t in &a {
            assert!(t.satisfies_ordering(cfg.s));
            assert!(t.anchor.starts_with(&t.source_id) && t.positive.starts_with(&t.source_id) && t.negative.starts_with(&t.source_id));
        }
        let easy = a.iter().filter(|t| t.strategy == Strategy::Easy).count();
        assert!((200..300).contains(&easy), "easy {easy}");
    }

    #[test]
    fn exhausted_sampler() {
        let sets = vec![set(&[0.5, 0.5, 0.5])];
        let cfg = SamplerConfig::default();
        assert!(matches!(generate_triplets(&sets, &cfg, 3), Err(Error::ExhaustedSampler { found: 0, requested: 3 })));
    }

    #[test]
    fn split_is_source_disjoint() {
        let sets = build_sample_sets(&manifest(10, 20));
        let (train, val) = split_sources(&sets, 0.8, 3).unwrap();
        assert_eq!((train.len(), val.len()), (8, 2));
        assert!(train.iter().all(|t| val.iter().all(|v| v.source_id != t.source_id)));
        let (t2, v2) = split_sources(&sets, 0.8, 3).unwrap();
        assert_eq!((train, val), (t2, v2));
    }

    #[test]
    fn strategy_names() {
        assert_eq!("easy".parse::<Strategy>().unwrap(), Strategy::Easy);
        assert_eq!(Strategy::Hard.to_string(), "hard");
        assert!("medium".parse::<Strategy>().is_err());
    }
}
