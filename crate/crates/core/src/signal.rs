//! Mono PCM waveform container and windowed-sinc resampling.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Mono signal with amplitudes nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Rejects empty signals, non-finite samples and a zero sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("waveform must contain at least one sample".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| f64::max(m, s.abs()))
    }

    /// Keeps the first `len` samples (at least one).
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.clamp(1, self.samples.len());
        Self { samples: self.samples[..len].to_vec(), sample_rate: self.sample_rate }
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(!samples.is_empty());
        Self { samples, sample_rate }
    }

    /// Round-trips every sample through 16-bit PCM, the same quantization a
    /// WAV file written and read back would apply.
    pub fn quantized_pcm16(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|&s| f64::from(to_pcm16(s)) / 32768.0)
            .collect();
        Self { samples, sample_rate: self.sample_rate }
    }
}

/// Nearest 16-bit PCM code for an amplitude, saturating outside `[-1, 1)`.
pub fn to_pcm16(x: f64) -> i16 {
    libm::round(x * 32768.0).clamp(-32768.0, 32767.0) as i16
}

pub(crate) fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64
}

/// Kaiser shape parameter of the resampling window.
pub const RESAMPLE_KAISER_BETA: f64 = 8.0;
/// Filter taps evaluated per output sample (per polyphase branch).
pub const RESAMPLE_TAPS: usize = 64;

/// Windowed-sinc polyphase resampler.
///
/// The rate ratio is reduced to `up/down`; each of the `up` phases owns a
/// 64-tap Kaiser-windowed (beta 8) sinc whose cutoff sits at the lower of
/// the two Nyquist frequencies. Output length is
/// `round(len * target / source)`. Equal rates return an exact copy.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::InvalidParameter("target rate must be positive".into()));
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let g = gcd(w.sample_rate as u64, target_rate as u64);
    let up = (target_rate as u64 / g) as usize;
    let down = (w.sample_rate as u64 / g) as usize;
    let cutoff = f64::min(1.0, target_rate as f64 / w.sample_rate as f64);
    let half = (RESAMPLE_TAPS / 2) as isize;
    let i0_beta = bessel_i0(RESAMPLE_KAISER_BETA);

    // table[phase * TAPS + j] holds the tap for input offset j - half + 1
    let mut table = alloc::vec![0.0; up * RESAMPLE_TAPS];
    for phase in 0..up {
        let frac = phase as f64 / up as f64;
        for j in 0..RESAMPLE_TAPS {
            let t = (j as isize - half + 1) as f64 - frac;
            table[phase * RESAMPLE_TAPS + j] = cutoff * sinc(cutoff * t) * kaiser(t, half as f64, i0_beta);
        }
    }

    let n_in = w.samples.len();
    let n_out = (libm::round(n_in as f64 * target_rate as f64 / w.sample_rate as f64) as usize).max(1);
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let pos = n as u64 * down as u64;
        let base = (pos / up as u64) as isize;
        let phase = (pos % up as u64) as usize;
        let taps = &table[phase * RESAMPLE_TAPS..(phase + 1) * RESAMPLE_TAPS];
        let mut acc = 0.0;
        for (j, &h) in taps.iter().enumerate() {
            let idx = base + j as isize - half + 1;
            if idx >= 0 && (idx as usize) < n_in {
                acc += h * w.samples[idx as usize];
            }
        }
        out.push(acc);
    }
    Ok(Waveform { samples: out, sample_rate: target_rate })
}

/// Resamples to the canonical analysis rate when needed.
pub fn to_canonical(w: &Waveform) -> Result<Waveform> {
    resample(w, crate::CANONICAL_RATE)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = core::f64::consts::PI * x;
        libm::sin(px) / px
    }
}

fn kaiser(t: f64, half: f64, i0_beta: f64) -> f64 {
    let r = t / half;
    if r.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(RESAMPLE_KAISER_BETA * libm::sqrt(1.0 - r * r)) / i0_beta
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
