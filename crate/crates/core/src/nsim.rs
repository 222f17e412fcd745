//! Neurogram Similarity Index Measure (NSIM) between a clean reference
//! spectrogram and a degraded one.
//!
//! Each valid `patch_t x patch_b` window (stride 1, uniform weights,
//! population statistics) gets
//!
//! ```text
//! Q = (2 mu_r mu_d + C1) / (mu_r^2 + mu_d^2 + C1) * (sigma_rd + C3) / (sigma_r sigma_d + C3)
//! ```
//!
//! with `C1 = 0.01 L` and `C3 = (0.03 L)^2`, where `L` is the intensity range
//! (max - min) of the reference. `C1` appears in both numerator and
//! denominator of the luminance term so that `Q(r, r) = 1` exactly.
//! Values are measured relative to the log floor so both operands are
//! non-negative. Patch scores are clamped to `[0, 1]` and the utterance
//! score is their mean.

use alloc::vec::Vec;

use crate::signal::Waveform;
use crate::spectrogram::{FrontEnd, Spectrogram, SpectrogramConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NsimConfig {
    pub patch_t: usize,
    pub patch_b: usize,
    pub c1_scale: f64,
    pub c23_scale: f64,
}

impl Default for NsimConfig {
    fn default() -> Self {
        Self { patch_t: 3, patch_b: 3, c1_scale: 0.01, c23_scale: 0.03 }
    }
}

impl NsimConfig {
    fn validate(&self) -> Result<()> {
        if self.patch_t == 0 || self.patch_b == 0 || self.patch_t % 2 == 0 || self.patch_b % 2 == 0 {
            return Err(Error::InvalidParameter("patch dimensions must be odd and >= 1".into()));
        }
        if !(self.c1_scale > 0.0 && self.c23_scale > 0.0) {
            return Err(Error::InvalidParameter("NSIM constant scales must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsimScore {
    /// Mean of the clamped patch scores.
    pub utterance: f64,
    /// Row-major `rows x cols` grid of clamped patch scores.
    pub patch_scores: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    /// Largest distance any raw patch score fell outside `[0, 1]`.
    pub max_excursion: f64,
}

/// Similarity of one patch pair given the reference intensity range.
/// Returns the raw (unclamped) score.
pub fn patch_similarity(r: &[f64], d: &[f64], range: f64, cfg: &NsimConfig) -> f64 {
    debug_assert_eq!(r.len(), d.len());
    let n = r.len() as f64;
    let mu_r = r.iter().sum::<f64>() / n;
    let mu_d = d.iter().sum::<f64>() / n;
    let (mut var_r, mut var_d, mut cov) = (0.0, 0.0, 0.0);
    for (&a, &b) in r.iter().zip(d) {
        let (da, db) = (a - mu_r, b - mu_d);
        var_r += da * da;
        var_d += db * db;
        cov += da * db;
    }
    let (var_r, var_d, cov) = (var_r / n, var_d / n, cov / n);
    let c1 = cfg.c1_scale * range;
    let c3 = (cfg.c23_scale * range) * (cfg.c23_scale * range);
    let luminance = (2.0 * mu_r * mu_d + c1) / (mu_r * mu_r + mu_d * mu_d + c1);
    let structure = (cov + c3) / (libm::sqrt(var_r) * libm::sqrt(var_d) + c3);
    luminance * structure
}

/// Patchwise NSIM of `deg` against `reference`.
pub fn nsim(reference: &Spectrogram, deg: &Spectrogram, cfg: &NsimConfig) -> Result<NsimScore> {
    cfg.validate()?;
    if reference.shape() != deg.shape() {
        return Err(Error::ShapeMismatch(reference.shape(), deg.shape()));
    }
    let (frames, bands) = reference.shape();
    if frames < cfg.patch_t || bands < cfg.patch_b {
        return Err(Error::PatchTooLarge { patch: (cfg.patch_t, cfg.patch_b), shape: (frames, bands) });
    }
    let rows = frames - cfg.patch_t + 1;
    let cols = bands - cfg.patch_b + 1;
    let (lo, hi) = reference.min_max();
    let range = hi - lo;

    if range <= 0.0 {
        let same = reference.values() == deg.values();
        log::warn!("NSIM reference is constant; scoring {}", if same { 1 } else { 0 });
        let q = if same { 1.0 } else { 0.0 };
        return Ok(NsimScore { utterance: q, patch_scores: alloc::vec![q; rows * cols], rows, cols, max_excursion: 0.0 });
    }

    let offset = reference.log_floor();
    let size = cfg.patch_t * cfg.patch_b;
    let mut r = Vec::with_capacity(size);
    let mut d = Vec::with_capacity(size);
    let mut patch_scores = Vec::with_capacity(rows * cols);
    let mut max_excursion: f64 = 0.0;
    for t in 0..rows {
        for b in 0..cols {
            r.clear();
            d.clear();
            for dt in 0..cfg.patch_t {
                for db in 0..cfg.patch_b {
                    r.push(reference.get(t + dt, b + db) - offset);
                    d.push(deg.get(t + dt, b + db) - offset);
                }
            }
            let q = patch_similarity(&r, &d, range, cfg);
            let clamped = q.clamp(0.0, 1.0);
            max_excursion = max_excursion.max((q - clamped).abs());
            patch_scores.push(clamped);
        }
    }
    if max_excursion > 0.0 {
        log::debug!("NSIM patch scores clamped, max excursion {max_excursion:.4}");
    }
    let utterance = (patch_scores.iter().sum::<f64>() / patch_scores.len() as f64).clamp(0.0, 1.0);
    Ok(NsimScore { utterance, patch_scores, rows, cols, max_excursion })
}

/// Computes NSIM from waveforms, reusing one front-end.
#[derive(Debug, Clone)]
pub struct NsimScorer {
    front: FrontEnd,
    cfg: NsimConfig,
}

impl Default for NsimScorer {
    fn default() -> Self {
        Self::new(SpectrogramConfig::default(), NsimConfig::default()).expect("default configs are valid")
    }
}

impl NsimScorer {
    pub fn new(spec: SpectrogramConfig, cfg: NsimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { front: FrontEnd::new(spec)?, cfg })
    }

    pub fn front_end(&self) -> &FrontEnd {
        &self.front
    }

    /// Full score for two waveforms whose frame counts differ by at most
    /// one; the longer spectrogram is trimmed.
    pub fn score(&self, reference: &Waveform, deg: &Waveform) -> Result<NsimScore> {
        let r = self.front.compute(reference)?;
        let d = self.front.compute(deg)?;
        self.score_spectrograms(&r, &d)
    }

    pub fn score_spectrograms(&self, r: &Spectrogram, d: &Spectrogram) -> Result<NsimScore> {
        if r.frames().abs_diff(d.frames()) > 1 {
            return Err(Error::ShapeMismatch(r.shape(), d.shape()));
        }
        let frames = r.frames().min(d.frames());
        nsim(&r.truncated(frames), &d.truncated(frames), &self.cfg)
    }

    pub fn utterance(&self, reference: &Waveform, deg: &Waveform) -> Result<f64> {
        Ok(self.score(reference, deg)?.utterance)
    }
}

/// Utterance-level NSIM with the default front-end and constants.
pub fn utterance_nsim(reference: &Waveform, deg: &Waveform) -> Result<f64> {
    NsimScorer::default().utterance(reference, deg)
}
