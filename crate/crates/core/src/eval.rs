//! Rank and linear correlations, per-condition aggregation against MOS and
//! degradation-monotonicity reports.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::ManifestRow;
use crate::degrade::Family;
use crate::score::ScoreRow;
use crate::{Error, Result};

/// Sample Pearson correlation. Constant or shorter-than-two inputs have no
/// defined correlation and yield [`Error::DegenerateInput`].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("correlation inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson correlation of fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("correlation inputs differ in length".into()));
    }
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MosRecord {
    pub clip_path: String,
    pub condition_id: String,
    pub mos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub condition_id: String,
    pub mean_score: f64,
    pub mean_mos: f64,
    pub clips: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub pc: f64,
    pub sc: f64,
    pub n_conditions: usize,
    /// Sorted by condition id.
    pub conditions: Vec<ConditionSummary>,
    /// Score rows and MOS rows that found no partner.
    pub unmatched: usize,
}

/// Joins scores with MOS labels on clip path, averages both per condition
/// and correlates the condition means.
pub fn aggregate_per_condition(scores: &[ScoreRow], mos: &[MosRecord]) -> Result<EvalReport> {
    let labels: BTreeMap<&str, &MosRecord> = mos.iter().map(|m| (m.clip_path.as_str(), m)).collect();
    let mut sums: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    let mut matched_labels = BTreeMap::new();
    for s in scores {
        if let Some(m) = labels.get(s.clip_path.as_str()) {
            let e = sums.entry(m.condition_id.as_str()).or_default();
            e.0 += s.nomad;
            e.1 += m.mos;
            e.2 += 1;
            matched_labels.insert(m.clip_path.as_str(), ());
        }
    }
    let matched_scores = scores.iter().filter(|s| labels.contains_key(s.clip_path.as_str())).count();
    if matched_scores == 0 {
        return Err(Error::JoinEmpty);
    }
    let unmatched = (scores.len() - matched_scores) + (labels.len() - matched_labels.len());
    if unmatched > 0 {
        log::info!("{unmatched} rows without a score/MOS partner were dropped");
    }
    let conditions: Vec<ConditionSummary> = sums
        .into_iter()
        .map(|(id, (s, m, n))| ConditionSummary {
            condition_id: id.into(),
            mean_score: s / n as f64,
            mean_mos: m / n as f64,
            clips: n,
        })
        .collect();
    let xs: Vec<f64> = conditions.iter().map(|c| c.mean_score).collect();
    let ys: Vec<f64> = conditions.iter().map(|c| c.mean_mos).collect();
    Ok(EvalReport {
        pc: pearson(&xs, &ys)?,
        sc: spearman(&xs, &ys)?,
        n_conditions: conditions.len(),
        conditions,
        unmatched,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMonotonicity {
    pub family: Family,
    /// See [`Family::intensity_direction`]; values are reported unflipped.
    pub direction: i8,
    pub clips: usize,
    /// Spearman of per-clip scores against the level parameter.
    pub sc_clip: Option<f64>,
    /// Spearman of per-level mean scores against the level parameter.
    pub sc_condition: Option<f64>,
    /// `(level_param, mean score)` sorted by level.
    pub level_means: Vec<(f64, f64)>,
    /// Set when `sc_condition` is undefined or its magnitude is below the threshold.
    pub flagged: bool,
}

/// Per-family Spearman of scores against the degradation parameter, joined
/// on clip path. Clean rows are ignored.
pub fn monotonicity_report(scores: &[ScoreRow], manifest: &[ManifestRow], threshold: f64) -> Vec<FamilyMonotonicity> {
    let by_clip: BTreeMap<&str, f64> = scores.iter().map(|s| (s.clip_path.as_str(), s.nomad)).collect();
    let mut per_family: BTreeMap<Family, Vec<(f64, f64)>> = BTreeMap::new();
    for row in manifest {
        let (Some(family), Some(&score)) = (row.family, by_clip.get(row.clip_path.as_str())) else { continue };
        per_family.entry(family).or_default().push((row.level_param, score));
    }
    per_family
        .into_iter()
        .map(|(family, pairs)| {
            let (levels, values): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let sc_clip = spearman(&levels, &values).ok();
            let mut grouped: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
            for &(l, v) in &pairs {
                let e = grouped.entry(ordered_key(l)).or_insert((l, 0.0, 0));
                e.1 += v;
                e.2 += 1;
            }
            let level_means: Vec<(f64, f64)> = grouped.into_values().map(|(l, s, n)| (l, s / n as f64)).collect();
            let (ls, ms): (Vec<f64>, Vec<f64>) = level_means.iter().copied().unzip();
            let sc_condition = spearman(&ls, &ms).ok();
            FamilyMonotonicity {
                family,
                direction: family.intensity_direction(),
                clips: pairs.len(),
                sc_clip,
                sc_condition,
                level_means,
                flagged: sc_condition.map_or(true, |s| s.abs() < threshold),
            }
        })
        .collect()
}

// monotone map from f64 to u64 so BTreeMap keys sort numerically
fn ordered_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::DegradationCondition;
    use crate::score::ScoreMode;
    use alloc::format;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spearman_fixtures() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), -0.5);
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 5.0, 9.0, 100.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap(), -1.0);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateInput));
        assert_eq!(spearman(&[1.0], &[1.0]), Err(Error::DegenerateInput));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(fractional_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn pearson_fixtures() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let sym = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let flipped = [-2.0, -1.0, 0.0, 1.0, -2.0];
        // sxy = 4 + 1 + 1 - 4 = 2 after centering flipped (mean -0.8)
        let r = pearson(&sym, &flipped).unwrap();
        assert!(r < 1.0);
        let my = -0.8;
        let sxy: f64 = sym.iter().zip(&flipped).map(|(a, b)| a * (b - my)).sum();
        let syy: f64 = flipped.iter().map(|b| (b - my) * (b - my)).sum();
        assert!((r - sxy / libm::sqrt(10.0 * syy)).abs() < 1e-15);
        assert_eq!(pearson(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::DegenerateInput));
    }

    proptest::proptest! {
        #[test]
        fn correlation_invariances(v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40), a in 0.1f64..10.0, b in -10.0f64..10.0) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(p) = pearson(&x, &y) {
                let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                proptest::prop_assert!((pearson(&xt, &y).unwrap() - p).abs() < 1e-12);
                proptest::prop_assert!((pearson(&y, &x).unwrap() - p).abs() < 1e-15);
            }
            if let Ok(s) = spearman(&x, &y) {
                let xe: Vec<f64> = x.iter().map(|v| libm::exp(*v)).collect();
                let yc: Vec<f64> = y.iter().map(|v| v * v * v + 3.0 * v).collect();
                proptest::prop_assert!((spearman(&xe, &yc).unwrap() - s).abs() < 1e-12);
                proptest::prop_assert!((spearman(&y, &x).unwrap() - s).abs() < 1e-15);
                proptest::prop_assert!((-1.0..=1.0).contains(&s));
            }
        }
    }

    fn row(clip: &str, score: f64) -> ScoreRow {
        ScoreRow { clip_path: clip.into(), nomad: score, mode: ScoreMode::Nmr, pool_id: "p".into() }
    }

    fn mos(clip: &str, cond: &str, m: f64) -> MosRecord {
        MosRecord { clip_path: clip.into(), condition_id: cond.into(), mos: m }
    }

    #[test]
    fn two_condition_anticorrelation() {
        let scores = [row("a", 1.0), row("b", 1.0), row("c", 3.0), row("d", 3.0)];
        let labels = [mos("a", "c1", 4.5), mos("b", "c1", 4.5), mos("c", "c2", 2.0), mos("d", "c2", 2.0)];
        let r = aggregate_per_condition(&scores, &labels).unwrap();
        assert_eq!(r.sc, -1.0);
        assert_eq!(r.n_conditions, 2);
    }

    #[test]
    fn six_row_fixture_by_hand() {
        let scores = [row("1", 0.2), row("2", 0.4), row("3", 0.9), row("4", 1.1), row("5", 0.6), row("6", 0.5), row("x", 9.0)];
        let labels = [
            mos("1", "A", 4.0),
            mos("2", "A", 5.0),
            mos("3", "B", 2.0),
            mos("4", "B", 1.0),
            mos("5", "C", 3.0),
            mos("6", "C", 3.5),
            mos("missing", "C", 1.0),
        ];
        let r = aggregate_per_condition(&scores, &labels).unwrap();
        let got: Vec<(&str, f64, f64)> = r.conditions.iter().map(|c| (c.condition_id.as_str(), c.mean_score, c.mean_mos)).collect();
        let want = [("A", 0.3, 4.5), ("B", 1.0, 1.5), ("C", 0.55, 3.25)];
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.0, w.0);
            assert!((g.1 - w.1).abs() < 1e-12 && (g.2 - w.2).abs() < 1e-12);
        }
        assert_eq!(r.unmatched, 2);
        assert_eq!(r.sc, -1.0);
        let mut shuffled = scores.to_vec();
        shuffled.reverse();
        assert_eq!(aggregate_per_condition(&shuffled, &labels).unwrap(), r);
        assert_eq!(aggregate_per_condition(&[row("q", 1.0)], &labels), Err(Error::JoinEmpty));
    }

    fn noise_manifest(sources: usize) -> Vec<ManifestRow> {
        let mut rows = Vec::new();
        for s in 0..sources {
            rows.push(ManifestRow::clean(format!("s{s}/clean.wav"), format!("s{s}")));
            for i in 0..5 {
                let c = DegradationCondition::new(Family::Noise, i).unwrap();
                rows.push(ManifestRow::degraded(format!("s{s}/noise_{i}.wav"), format!("s{s}"), &c, 0.3 + 0.1 * i as f64 + 0.01 * s as f64));
            }
        }
        rows
    }

    #[test]
    fn nsim_oracle_is_perfectly_monotone() {
        let m = noise_manifest(4);
        let as_distance: Vec<ScoreRow> = m.iter().map(|r| row(&r.clip_path, 1.0 - r.nsim)).collect();
        let rep = monotonicity_report(&as_distance, &m, 0.8);
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].sc_condition, Some(-1.0));
        assert_eq!(rep[0].clips, 20);
        assert!(!rep[0].flagged);
        let as_similarity: Vec<ScoreRow> = m.iter().map(|r| row(&r.clip_path, r.nsim)).collect();
        assert_eq!(monotonicity_report(&as_similarity, &m, 0.8)[0].sc_condition, Some(1.0));
    }

    #[test]
    fn random_scores_are_weakly_correlated() {
        let m = noise_manifest(200);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let scores: Vec<ScoreRow> = m.iter().map(|r| row(&r.clip_path, rng.gen::<f64>())).collect();
        let rep = monotonicity_report(&scores, &m, 0.8);
        assert!(rep[0].sc_clip.unwrap().abs() < 0.1);
    }
}
