use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },
    #[error("spectrogram shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("patch {patch:?} larger than spectrogram {shape:?}")]
    PatchTooLarge { patch: (usize, usize), shape: (usize, usize) },
    #[error("signal is degenerate (all samples equal)")]
    DegenerateSignal,
    #[error("input has zero power")]
    SilentInput,
    #[error("unsupported bitrate {0} kbps")]
    UnsupportedBitrate(f64),
    #[error("no external encoder configured")]
    MissingEncoder,
    #[error("external encoder failed: {0}")]
    EncoderFailed(String),
    #[error("source {source_id} has {count} entries, need at least {needed}")]
    TooFewEntries { source_id: String, count: usize, needed: usize },
    #[error("no candidate negative for this anchor")]
    EmptyNegativeSet,
    #[error("sampler produced {found} of {requested} triplets before giving up")]
    ExhaustedSampler { found: usize, requested: usize },
    #[error("spectrogram has {got} bands, encoder expects {expected}")]
    BandMismatch { got: usize, expected: usize },
    #[error("reference pool is empty")]
    EmptyPool,
    #[error("correlation undefined: constant or too-short input")]
    DegenerateInput,
    #[error("no rows matched between scores and labels")]
    JoinEmpty,
}
