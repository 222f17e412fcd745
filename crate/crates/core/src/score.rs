//! NOMAD scores: Euclidean distance between embeddings, averaged over a
//! pool of non-matching clean references, or taken against the clean
//! counterpart in full-reference mode.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::net::{EmbeddingModel, FeatureLoss};
use crate::signal::Waveform;
use crate::spectrogram::{FrontEnd, SpectrogramConfig};
use crate::{Embedding, Error, Result};

/// Model plus the front-end that feeds it.
#[derive(Debug, Clone)]
pub struct Scorer {
    model: EmbeddingModel,
    front: FrontEnd,
}

impl Scorer {
    pub fn new(model: EmbeddingModel) -> Result<Self> {
        let spec = SpectrogramConfig { bands: model.config().bands, ..SpectrogramConfig::default() };
        Ok(Self { model, front: FrontEnd::new(spec)? })
    }

    pub fn model(&self) -> &EmbeddingModel {
        &self.model
    }

    pub fn front_end(&self) -> &FrontEnd {
        &self.front
    }

    pub fn embed(&self, w: &Waveform) -> Result<Embedding> {
        self.model.embed(&self.front.compute(w)?)
    }

    pub fn nomad_distance(&self, a: &Waveform, b: &Waveform) -> Result<f64> {
        Ok(self.embed(a)?.distance(&self.embed(b)?))
    }

    pub fn pooled_score(&self, test: &Waveform, pool: &ReferencePool) -> Result<f64> {
        pool.mean_distance(&self.embed(test)?)
    }

    pub fn full_reference_score(&self, test: &Waveform, clean: &Waveform) -> Result<f64> {
        self.nomad_distance(test, clean)
    }

    /// Multi-layer L1 feature loss between a clean signal and an estimate;
    /// the longer waveform is trimmed first.
    pub fn feature_loss(&self, clean: &Waveform, estimate: &Waveform) -> Result<FeatureLoss> {
        let len = clean.len().min(estimate.len());
        let c = self.front.compute(&clean.truncated(len))?;
        let e = self.front.compute(&estimate.truncated(len))?;
        self.model.feature_loss(&c, &e)
    }
}

/// `|f(a) - f(b)|_2`.
pub fn nomad_distance(model: &EmbeddingModel, a: &Waveform, b: &Waveform) -> Result<f64> {
    Scorer::new(model.clone())?.nomad_distance(a, b)
}

/// Embeddings of `I >= 1` clean references.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePool {
    pub pool_id: String,
    embeddings: Vec<Embedding>,
}

impl ReferencePool {
    pub fn from_embeddings(pool_id: impl Into<String>, embeddings: Vec<Embedding>) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::EmptyPool);
        }
        if embeddings.iter().any(|e| (e.norm() - 1.0).abs() > 1e-6) {
            return Err(Error::InvalidParameter("pool embeddings must be unit norm".into()));
        }
        Ok(Self { pool_id: pool_id.into(), embeddings })
    }

    pub fn from_waveforms(scorer: &Scorer, pool_id: impl Into<String>, refs: &[Waveform]) -> Result<Self> {
        let embeddings = refs.iter().map(|w| scorer.embed(w)).collect::<Result<Vec<_>>>()?;
        Self::from_embeddings(pool_id, embeddings)
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    /// `1/I * sum_i |e - r_i|_2`.
    pub fn mean_distance(&self, e: &Embedding) -> Result<f64> {
        if self.embeddings.is_empty() {
            return Err(Error::EmptyPool);
        }
        Ok(self.embeddings.iter().map(|r| e.distance(r)).sum::<f64>() / self.embeddings.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Nmr,
    Fr,
}

impl ScoreMode {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMode::Nmr => "nmr",
            ScoreMode::Fr => "fr",
        }
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nmr" => Ok(ScoreMode::Nmr),
            "fr" => Ok(ScoreMode::Fr),
            _ => Err(Error::InvalidParameter(format!("unknown score mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub clip_path: String,
    pub nomad: f64,
    pub mode: ScoreMode,
    /// Pool id in NMR mode, the clean reference path in FR mode.
    pub pool_id: String,
}
