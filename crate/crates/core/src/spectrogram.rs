//! Log mel-band spectrogram front-end.
//!
//! A 25 ms Hann window with a 10 ms hop is transformed with a 512-point FFT,
//! power is pooled into 32 mel-spaced triangular bands between 0 Hz and
//! Nyquist, and each band is mapped to `log10(max(power, 1e-10))`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::fft::{Complex, FftPlan};
use crate::signal::{to_canonical, Waveform};
use crate::{Error, Result, CANONICAL_RATE};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramConfig {
    pub window: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub bands: usize,
    pub power_floor: f64,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self { window: 400, hop: 160, fft_size: 512, bands: 32, power_floor: 1e-10 }
    }
}

impl SpectrogramConfig {
    pub fn log_floor(&self) -> f64 {
        libm::log10(self.power_floor)
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hop == 0 || self.bands == 0 {
            return Err(Error::InvalidParameter("window, hop and bands must be positive".into()));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.window {
            return Err(Error::InvalidParameter("fft size must be a power of two >= window".into()));
        }
        if !(self.power_floor > 0.0) {
            return Err(Error::InvalidParameter("power floor must be positive".into()));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> Option<usize> {
        (len >= self.window).then(|| (len - self.window) / self.hop + 1)
    }
}

/// Frame-major matrix of log band powers (`frames x bands`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Vec<f64>,
    frames: usize,
    bands: usize,
    frame_hop_s: f64,
    log_floor: f64,
}

impl Spectrogram {
    /// Builds a spectrogram from frame-major values.
    pub fn from_values(values: Vec<f64>, frames: usize, bands: usize, frame_hop_s: f64, log_floor: f64) -> Result<Self> {
        if frames == 0 || bands == 0 || values.len() != frames * bands {
            return Err(Error::InvalidParameter("spectrogram needs frames*bands finite values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("spectrogram values must be finite".into()));
        }
        Ok(Self { values, frames, bands, frame_hop_s, log_floor })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.bands)
    }

    pub fn frame_hop_s(&self) -> f64 {
        self.frame_hop_s
    }

    pub fn log_floor(&self) -> f64 {
        self.log_floor
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, frame: usize, band: usize) -> f64 {
        self.values[frame * self.bands + band]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.bands..(frame + 1) * self.bands]
    }

    /// Keeps the first `frames` frames.
    pub fn truncated(&self, frames: usize) -> Self {
        let frames = frames.clamp(1, self.frames);
        Self {
            values: self.values[..frames * self.bands].to_vec(),
            frames,
            ..self.clone()
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Reusable front-end: window, FFT plan and mel weights for one config.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    cfg: SpectrogramConfig,
    window: Vec<f64>,
    plan: FftPlan,
    // (first bin, weights) per band
    filters: Vec<(usize, Vec<f64>)>,
}

impl FrontEnd {
    pub fn new(cfg: SpectrogramConfig) -> Result<Self> {
        cfg.validate()?;
        let window = hann(cfg.window);
        let plan = FftPlan::new(cfg.fft_size);
        let filters = mel_filters(cfg.bands, cfg.fft_size, CANONICAL_RATE as f64);
        Ok(Self { cfg, window, plan, filters })
    }

    pub fn config(&self) -> &SpectrogramConfig {
        &self.cfg
    }

    pub fn compute(&self, w: &Waveform) -> Result<Spectrogram> {
        let w = to_canonical(w)?;
        let x = w.samples();
        let frames = self
            .cfg
            .frame_count(x.len())
            .ok_or(Error::SignalTooShort { len: x.len(), needed: self.cfg.window })?;
        let floor = self.cfg.power_floor;
        let mut values = Vec::with_capacity(frames * self.cfg.bands);
        let mut buf = alloc::vec![Complex::default(); self.cfg.fft_size];
        let mut power = alloc::vec![0.0; self.cfg.fft_size / 2 + 1];
        for f in 0..frames {
            let start = f * self.cfg.hop;
            for (i, c) in buf.iter_mut().enumerate() {
                *c = if i < self.cfg.window {
                    Complex::new(x[start + i] * self.window[i], 0.0)
                } else {
                    Complex::default()
                };
            }
            self.plan.forward(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (first, weights) in &self.filters {
                let e: f64 = weights.iter().zip(&power[*first..]).map(|(w, p)| w * p).sum();
                values.push(libm::log10(e.max(floor)));
            }
        }
        Ok(Spectrogram {
            values,
            frames,
            bands: self.cfg.bands,
            frame_hop_s: self.cfg.hop as f64 / CANONICAL_RATE as f64,
            log_floor: self.cfg.log_floor(),
        })
    }
}

/// One-shot spectrogram; prefer a cached [`FrontEnd`] in loops.
pub fn log_band_spectrogram(w: &Waveform, cfg: &SpectrogramConfig) -> Result<Spectrogram> {
    FrontEnd::new(cfg.clone())?.compute(w)
}

fn hann(n: usize) -> Vec<f64> {
    // periodic Hann
    (0..n).map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64)).collect()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * libm::log10(1.0 + f / 700.0)
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (libm::pow(10.0, m / 2595.0) - 1.0)
}

/// Triangular filters with unit peak on an HTK mel scale from 0 Hz to Nyquist.
fn mel_filters(bands: usize, fft_size: usize, rate: f64) -> Vec<(usize, Vec<f64>)> {
    let bins = fft_size / 2 + 1;
    let top = hz_to_mel(rate / 2.0);
    let edges: Vec<f64> = (0..bands + 2).map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64)).collect();
    let bin_hz = rate / fft_size as f64;
    (0..bands)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            let weight = |k: usize| {
                let f = k as f64 * bin_hz;
                if f <= lo || f >= hi {
                    0.0
                } else if f <= mid {
                    (f - lo) / (mid - lo)
                } else {
                    (hi - f) / (hi - mid)
                }
            };
            let mut first = (0..bins).find(|&k| weight(k) > 0.0).unwrap_or(0);
            let mut last = (0..bins).rev().find(|&k| weight(k) > 0.0).unwrap_or(first);
            if weight(first) == 0.0 {
                // band narrower than one bin: take the nearest bin at full weight
                first = libm::round(mid / bin_hz) as usize;
                last = first;
                return (first, alloc::vec![1.0]);
            }
            if last < first {
                last = first;
            }
            (first, (first..=last).map(weight).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.gen_range(-0.5..0.5)).collect(), 16000).unwrap()
    }

    #[test]
    fn every_band_has_weight() {
        for (_, w) in mel_filters(32, 512, 16000.0) {
            assert!(w.iter().any(|&x| x > 0.0));
        }
    }

    #[test]
    fn silence_sits_on_the_floor() {
        let w = Waveform::new(vec![0.0; 4000], 16000).unwrap();
        let s = log_band_spectrogram(&w, &SpectrogramConfig::default()).unwrap();
        assert!(s.values().iter().all(|&v| v == -10.0));
    }

    #[test]
    fn framing_arithmetic() {
        let cfg = SpectrogramConfig::default();
        let s = log_band_spectrogram(&noise(400, 1), &cfg).unwrap();
        assert_eq!(s.frames(), 1);
        assert_eq!(s.bands(), 32);
        for n in [400, 401, 559, 560, 561, 16000, 48123] {
            let s = log_band_spectrogram(&noise(n, 2), &cfg).unwrap();
            assert_eq!(s.frames(), (n - 400) / 160 + 1);
        }
        assert_eq!(
            log_band_spectrogram(&noise(399, 1), &cfg),
            Err(Error::SignalTooShort { len: 399, needed: 400 })
        );
    }

    #[test]
    fn halving_amplitude_shifts_log_power_uniformly() {
        let w = noise(8000, 7);
        let half = Waveform::new(w.samples().iter().map(|s| s * 0.5).collect(), 16000).unwrap();
        let cfg = SpectrogramConfig::default();
        let a = log_band_spectrogram(&w, &cfg).unwrap();
        let b = log_band_spectrogram(&half, &cfg).unwrap();
        let expected = libm::log10(0.25);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((y - x - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn resamples_on_entry() {
        let w = Waveform::new(noise(16000, 3).into_samples(), 32000).unwrap();
        let s = log_band_spectrogram(&w, &SpectrogramConfig::default()).unwrap();
        assert_eq!(s.frames(), (8000 - 400) / 160 + 1);
    }

    proptest::proptest! {
        #[test]
        fn gain_shifts_by_twice_log10(g in 0.01f64..4.0, seed in 0u64..1000) {
            let w = noise(1200, seed);
            let scaled = Waveform::new(w.samples().iter().map(|s| s * g).collect(), 16000).unwrap();
            let cfg = SpectrogramConfig::default();
            let a = log_band_spectrogram(&w, &cfg).unwrap();
            let b = log_band_spectrogram(&scaled, &cfg).unwrap();
            let shift = 2.0 * libm::log10(g);
            for (x, y) in a.values().iter().zip(b.values()) {
                if *x > -10.0 && *y > -10.0 {
                    proptest::prop_assert!((y - x - shift).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn entries_respect_floor(seed in 0u64..1000, amp in 0.0f64..1.0) {
            let w = Waveform::new(noise(900, seed).samples().iter().map(|s| s * amp).collect(), 16000).unwrap();
            let s = log_band_spectrogram(&w, &SpectrogramConfig::default()).unwrap();
            proptest::prop_assert!(s.values().iter().all(|v| v.is_finite() && *v >= -10.0));
        }
    }

    #[test]
    fn noise_band_energy_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: Vec<f64> = (0..1600).map(|_| rng.gen::<f64>() - 0.5).collect();
        let s = log_band_spectrogram(&Waveform::new(x, 16000).unwrap(), &SpectrogramConfig::default()).unwrap();
        assert!(s.values().iter().all(|&v| v > -10.0));
    }
}
