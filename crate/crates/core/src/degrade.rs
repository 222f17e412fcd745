//! Degradation families applied to clean speech at controlled intensities.
//!
//! Four families form the training set (clipping, additive noise and two
//! codec proxies, five levels each). A reverberation probe serves as an
//! unseen degradation, and `external_codec` defers to a user-supplied
//! encoder through [`ExternalEncoder`].

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fft::convolve;
use crate::seed;
use crate::signal::{mean_power, sinc, to_canonical, Waveform};
use crate::{Error, Result, CANONICAL_RATE};

pub const CLIP_PERCENT_LEVELS: [f64; 5] = [5.0, 10.0, 25.0, 40.0, 60.0];
pub const SNR_DB_LEVELS: [f64; 5] = [0.0, 8.0, 15.0, 25.0, 40.0];
pub const BITRATE_KBPS_LEVELS: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];
pub const RT60_S_LEVELS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// Peak level used when a mixture overflows full scale.
pub const OVERFLOW_PEAK: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Clip,
    Noise,
    CodecMp3Like,
    CodecOpusLike,
    ReverbProbe,
    ExternalCodec,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Clip,
        Family::Noise,
        Family::CodecMp3Like,
        Family::CodecOpusLike,
        Family::ReverbProbe,
        Family::ExternalCodec,
    ];

    /// The four families used to build training data.
    pub const BUILT_IN: [Family; 4] = [Family::Clip, Family::Noise, Family::CodecMp3Like, Family::CodecOpusLike];

    pub fn name(self) -> &'static str {
        match self {
            Family::Clip => "clip",
            Family::Noise => "noise",
            Family::CodecMp3Like => "codec_proxy_mp3like",
            Family::CodecOpusLike => "codec_proxy_opuslike",
            Family::ReverbProbe => "reverb_probe",
            Family::ExternalCodec => "external_codec",
        }
    }

    pub fn levels(self) -> &'static [f64; 5] {
        match self {
            Family::Clip => &CLIP_PERCENT_LEVELS,
            Family::Noise => &SNR_DB_LEVELS,
            Family::CodecMp3Like | Family::CodecOpusLike | Family::ExternalCodec => &BITRATE_KBPS_LEVELS,
            Family::ReverbProbe => &RT60_S_LEVELS,
        }
    }

    /// `+1` when a larger level parameter means a stronger degradation
    /// (clip percentage, RT60), `-1` when it means a milder one (SNR, bitrate).
    pub fn intensity_direction(self) -> i8 {
        match self {
            Family::Clip | Family::ReverbProbe => 1,
            Family::Noise | Family::CodecMp3Like | Family::CodecOpusLike | Family::ExternalCodec => -1,
        }
    }

    fn code(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown degradation family `{s}`")))
    }
}

/// One cell of the family x level grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationCondition {
    pub family: Family,
    pub level_index: usize,
    pub level_param: f64,
}

impl DegradationCondition {
    pub fn new(family: Family, level_index: usize) -> Result<Self> {
        let level_param = *family
            .levels()
            .get(level_index)
            .ok_or_else(|| Error::InvalidParameter(format!("{family} has no level {level_index}")))?;
        Ok(Self { family, level_index, level_param })
    }

    /// Every level of every family in `families`, family-major.
    pub fn grid(families: &[Family]) -> Vec<Self> {
        families
            .iter()
            .flat_map(|&f| (0..f.levels().len()).map(move |i| Self::new(f, i).expect("level in table")))
            .collect()
    }
}

/// Hard-clips the loudest `percent` of samples.
///
/// The threshold is the magnitude of the k-th largest sample with
/// `k = ceil(n * percent / 100)`, so at least `percent`% of the input reaches
/// it. The result is not renormalized.
pub fn clip_signal(w: &Waveform, percent: f64) -> Result<Waveform> {
    if !(percent > 0.0 && percent < 100.0) {
        return Err(Error::InvalidParameter(format!("clip percent {percent} outside (0, 100)")));
    }
    let x = w.samples();
    if x.iter().all(|&s| s == x[0]) {
        return Err(Error::DegenerateSignal);
    }
    let mut mags: Vec<f64> = x.iter().map(|s| s.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let n = mags.len();
    let k = (libm::ceil(n as f64 * percent / 100.0 - 1e-9).max(0.0) as usize).min(n);
    let tau = if k == 0 { mags[n - 1] } else { mags[n - k] };
    let out = x.iter().map(|&s| s.clamp(-tau, tau)).collect();
    Ok(Waveform::from_parts_unchecked(out, w.sample_rate()))
}

/// Gain applied to the noise so that `x + g s` has the requested SNR.
pub fn snr_gain(signal_power: f64, noise_power: f64, snr_db: f64) -> Result<f64> {
    if signal_power <= 0.0 || noise_power <= 0.0 {
        return Err(Error::SilentInput);
    }
    Ok(libm::sqrt(signal_power / (noise_power * libm::pow(10.0, snr_db / 10.0))))
}

/// `y = x + g s` at `snr_db`, with powers taken over the whole utterance.
/// The noise is looped or truncated to the length of `x`. The mixture is
/// scaled to a 0.99 peak only when it would otherwise exceed full scale.
pub fn mix_noise_at_snr(x: &Waveform, s: &Waveform, snr_db: f64) -> Result<Waveform> {
    if x.sample_rate() != s.sample_rate() {
        return Err(Error::InvalidParameter("signal and noise sample rates differ".into()));
    }
    let noise = fit_length(s.samples(), x.len());
    let g = snr_gain(x.power(), mean_power(&noise), snr_db)?;
    let mut y: Vec<f64> = x.samples().iter().zip(&noise).map(|(a, b)| a + g * b).collect();
    normalize_overflow(&mut y);
    Ok(Waveform::from_parts_unchecked(y, x.sample_rate()))
}

fn fit_length(s: &[f64], len: usize) -> Vec<f64> {
    s.iter().copied().cycle().take(len).collect()
}

fn normalize_overflow(y: &mut [f64]) {
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        let k = OVERFLOW_PEAK / peak;
        y.iter_mut().for_each(|v| *v *= k);
    }
}

/// Uniform white noise in `[-1, 1)`.
pub fn white_noise(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Pink (1/f) noise from the Voss-McCartney algorithm with 16 rows.
pub fn pink_noise(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    const ROWS: usize = 16;
    let mut rows: [f64; ROWS] = core::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let mut running: f64 = rows.iter().sum();
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        if n > 0 {
            let k = (n.trailing_zeros() as usize).min(ROWS - 1);
            let fresh = rng.gen_range(-1.0..1.0);
            running += fresh - rows[k];
            rows[k] = fresh;
        }
        out.push((running + rng.gen_range(-1.0..1.0)) / (ROWS + 1) as f64);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecFlavor {
    Mp3Like,
    OpusLike,
}

/// Lowpass cutoff of the codec proxy in Hz.
pub fn codec_cutoff_hz(kbps: f64, flavor: CodecFlavor) -> f64 {
    let k = match flavor {
        CodecFlavor::Mp3Like => 280.0,
        CodecFlavor::OpusLike => 340.0,
    };
    f64::min(7600.0, k * libm::sqrt(kbps))
}

/// Quantizer resolution of the codec proxy: `3 + 1.5 log2(kbps)` rounded
/// with halves going down, clamped to 4..=14 bits.
pub fn codec_bits(kbps: f64) -> u32 {
    let raw = 3.0 + 1.5 * libm::log2(kbps);
    (libm::ceil(raw - 0.5) as i64).clamp(4, 14) as u32
}

/// Bitrate-driven codec stand-in: linear-phase lowpass then uniform
/// quantization. Output is at the canonical rate.
pub fn codec_proxy(w: &Waveform, kbps: f64, flavor: CodecFlavor) -> Result<Waveform> {
    if !BITRATE_KBPS_LEVELS.contains(&kbps) {
        return Err(Error::UnsupportedBitrate(kbps));
    }
    let w = to_canonical(w)?;
    let filtered = lowpass(w.samples(), codec_cutoff_hz(kbps, flavor) / CANONICAL_RATE as f64);
    let step = libm::ldexp(1.0, 1 - codec_bits(kbps) as i32);
    let out = filtered
        .into_iter()
        .map(|v| (libm::round(v / step) * step).clamp(-1.0, 1.0 - step))
        .collect();
    Ok(Waveform::from_parts_unchecked(out, CANONICAL_RATE))
}

const LOWPASS_TAPS: usize = 255;

/// Zero-phase Blackman-windowed sinc lowpass; `cutoff` in cycles/sample.
fn lowpass(x: &[f64], cutoff: f64) -> Vec<f64> {
    let half = (LOWPASS_TAPS / 2) as f64;
    let taps: Vec<f64> = (0..LOWPASS_TAPS)
        .map(|i| {
            let t = i as f64 - half;
            let win = 0.42 - 0.5 * libm::cos(2.0 * PI * i as f64 / (LOWPASS_TAPS - 1) as f64)
                + 0.08 * libm::cos(4.0 * PI * i as f64 / (LOWPASS_TAPS - 1) as f64);
            2.0 * cutoff * sinc(2.0 * cutoff * t) * win
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / dc).collect();
    let full = convolve(x, &taps);
    full[LOWPASS_TAPS / 2..LOWPASS_TAPS / 2 + x.len()].to_vec()
}

/// Amplitude envelope of the reverb tail: `exp(-3 ln(10) t / rt60)`, i.e.
/// energy 60 dB down after `rt60` seconds.
pub fn reverb_envelope(t_s: f64, rt60_s: f64) -> f64 {
    libm::exp(-3.0 * core::f64::consts::LN_10 * t_s / rt60_s)
}

/// Synthetic room response: a unit direct path followed by white noise
/// under [`reverb_envelope`], `0.8 * rt60` seconds long, scaled to unit
/// energy.
pub fn reverb_impulse_response(rt60_s: f64, rate: u32, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(rt60_s > 0.0 && rt60_s <= 3.0) {
        return Err(Error::InvalidParameter(format!("rt60 {rt60_s} outside (0, 3]")));
    }
    let len = (libm::round(0.8 * rt60_s * rate as f64) as usize).max(1);
    let mut h = Vec::with_capacity(len);
    h.push(1.0);
    for n in 1..len {
        let t = n as f64 / rate as f64;
        h.push(rng.gen_range(-1.0..1.0) * reverb_envelope(t, rt60_s));
    }
    let norm = libm::sqrt(h.iter().map(|v| v * v).sum::<f64>());
    h.iter_mut().for_each(|v| *v /= norm);
    Ok(h)
}

/// Convolves with a seeded synthetic room response; keeps the input length.
pub fn reverb_probe(w: &Waveform, rt60_s: f64, seed: u64) -> Result<Waveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = reverb_impulse_response(rt60_s, w.sample_rate(), &mut rng)?;
    let mut y = if h.len() <= 64 { convolve_direct(w.samples(), &h) } else { convolve(w.samples(), &h) };
    y.truncate(w.len());
    normalize_overflow(&mut y);
    Ok(Waveform::from_parts_unchecked(y, w.sample_rate()))
}

fn convolve_direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = alloc::vec![0.0; x.len() + h.len() - 1];
    for (i, &a) in x.iter().enumerate() {
        for (j, &b) in h.iter().enumerate() {
            y[i + j] += a * b;
        }
    }
    y
}

/// A real encoder/decoder round trip, supplied by the host environment.
pub trait ExternalEncoder {
    fn encode(&self, w: &Waveform, kbps: f64) -> Result<Waveform>;
}

/// Noise used by the `noise` family.
pub enum NoiseSource {
    White,
    Pink,
    /// Recorded noise clips; each condition draws one clip and a random
    /// starting offset.
    Recordings(Vec<Waveform>),
}

pub struct DegradeOptions {
    pub noise: NoiseSource,
    pub external: Option<Box<dyn ExternalEncoder + Send + Sync>>,
}

impl Default for DegradeOptions {
    fn default() -> Self {
        Self { noise: NoiseSource::Pink, external: None }
    }
}

impl fmt::Debug for DegradeOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let noise = match &self.noise {
            NoiseSource::White => String::from("white"),
            NoiseSource::Pink => String::from("pink"),
            NoiseSource::Recordings(r) => format!("{} recordings", r.len()),
        };
        f.debug_struct("DegradeOptions")
            .field("noise", &noise)
            .field("external", &self.external.is_some())
            .finish()
    }
}

/// Seed of the random stream owned by one (source, condition) pair.
pub fn condition_seed(seed: u64, source_id: &str, c: &DegradationCondition) -> u64 {
    seed::mix(&[seed, seed::fnv1a(source_id.as_bytes()), c.family.code(), c.level_index as u64])
}

/// Applies one condition. All randomness comes from
/// [`condition_seed`], so the result is a pure function of the inputs.
pub fn apply_condition(
    w: &Waveform,
    c: &DegradationCondition,
    seed: u64,
    source_id: &str,
    opts: &DegradeOptions,
) -> Result<Waveform> {
    let w = to_canonical(w)?;
    let stream = condition_seed(seed, source_id, c);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    match c.family {
        Family::Clip => clip_signal(&w, c.level_param),
        Family::Noise => {
            let noise = match &opts.noise {
                NoiseSource::White => white_noise(w.len(), &mut rng),
                NoiseSource::Pink => pink_noise(w.len(), &mut rng),
                NoiseSource::Recordings(clips) => {
                    if clips.is_empty() {
                        return Err(Error::InvalidParameter("noise recording list is empty".into()));
                    }
                    let clip = to_canonical(&clips[rng.gen_range(0..clips.len())])?;
                    let offset = rng.gen_range(0..clip.len());
                    clip.samples().iter().copied().cycle().skip(offset).take(w.len()).collect()
                }
            };
            mix_noise_at_snr(&w, &Waveform::from_parts_unchecked(noise, w.sample_rate()), c.level_param)
        }
        Family::CodecMp3Like => codec_proxy(&w, c.level_param, CodecFlavor::Mp3Like),
        Family::CodecOpusLike => codec_proxy(&w, c.level_param, CodecFlavor::OpusLike),
        Family::ReverbProbe => reverb_probe(&w, c.level_param, rng.gen()),
        Family::ExternalCodec => match &opts.external {
            Some(enc) => to_canonical(&enc.encode(&w, c.level_param)?),
            None => Err(Error::MissingEncoder),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tone(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..len)
            .map(|n| 0.3 * libm::sin(n as f64 * 0.05) + 0.1 * rng.gen_range(-1.0..1.0))
            .collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn level_tables() {
        assert_eq!(CLIP_PERCENT_LEVELS, [5.0, 10.0, 25.0, 40.0, 60.0]);
        assert_eq!(SNR_DB_LEVELS, [0.0, 8.0, 15.0, 25.0, 40.0]);
        assert_eq!(BITRATE_KBPS_LEVELS, [8.0, 16.0, 32.0, 64.0, 128.0]);
        let c = DegradationCondition::new(Family::Noise, 4).unwrap();
        assert_eq!(c.level_param, 40.0);
        assert!(DegradationCondition::new(Family::Clip, 5).is_err());
        assert_eq!(DegradationCondition::grid(&Family::BUILT_IN).len(), 20);
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("mp3".parse::<Family>().is_err());
    }

    #[test]
    fn clip_ramp_enumeration() {
        let ramp: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let w = Waveform::new(ramp.clone(), 16000).unwrap();
        let out = clip_signal(&w, 200.0 / 11.0).unwrap();
        assert_eq!(&out.samples()[..9], &ramp[..9]);
        assert_eq!(out.samples()[9], 0.9);
        assert_eq!(out.samples()[10], 0.9);
    }

    #[test]
    fn tiny_clip_percent_is_identity() {
        let w = tone(1000, 1);
        assert_eq!(clip_signal(&w, 1e-6).unwrap(), w);
    }

    #[test]
    fn clip_reaches_requested_fraction() {
        let w = tone(2000, 3);
        for p in CLIP_PERCENT_LEVELS {
            let out = clip_signal(&w, p).unwrap();
            let tau = out.peak();
            let hit = w.samples().iter().filter(|s| s.abs() >= tau).count();
            assert!(hit as f64 >= p / 100.0 * w.len() as f64);
        }
    }

    #[test]
    fn clip_rejects_constant_signal() {
        let w = Waveform::new(vec![0.2; 50], 16000).unwrap();
        assert_eq!(clip_signal(&w, 10.0), Err(Error::DegenerateSignal));
    }

    #[test]
    fn snr_gain_identities() {
        assert!((snr_gain(1.0, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((snr_gain(0.5, 0.5, 20.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(snr_gain(0.0, 1.0, 0.0), Err(Error::SilentInput));
    }

    #[test]
    fn mixed_noise_measures_requested_snr() {
        let x = tone(16000, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Waveform::new(pink_noise(7000, &mut rng), 16000).unwrap();
        for snr in SNR_DB_LEVELS {
            let noise = fit_length(s.samples(), x.len());
            let g = snr_gain(x.power(), mean_power(&noise), snr).unwrap();
            let scaled: Vec<f64> = noise.iter().map(|v| v * g).collect();
            let measured = 10.0 * libm::log10(x.power() / mean_power(&scaled));
            assert!((measured - snr).abs() < 1e-6);
            let y = mix_noise_at_snr(&x, &s, snr).unwrap();
            assert!(y.peak() <= 1.0);
        }
    }

    #[test]
    fn mixing_silence_fails() {
        let x = Waveform::new(vec![0.0; 100], 16000).unwrap();
        let s = tone(100, 1);
        assert_eq!(mix_noise_at_snr(&x, &s, 10.0), Err(Error::SilentInput));
    }

    #[test]
    fn codec_parameters() {
        assert!((codec_cutoff_hz(8.0, CodecFlavor::Mp3Like) - 791.96).abs() < 0.01);
        assert_eq!(codec_bits(8.0), 7);
        assert_eq!(codec_bits(128.0), 13);
        assert_eq!(codec_bits(16.0), 9);
        assert!(codec_cutoff_hz(128.0, CodecFlavor::OpusLike) <= 7600.0);
        assert_eq!(codec_cutoff_hz(1e6, CodecFlavor::Mp3Like), 7600.0);
        assert_eq!(codec_proxy(&tone(100, 1), 24.0, CodecFlavor::Mp3Like), Err(Error::UnsupportedBitrate(24.0)));
    }

    #[test]
    fn codec_output_is_on_the_quantizer_grid() {
        let out = codec_proxy(&tone(4000, 2), 8.0, CodecFlavor::OpusLike).unwrap();
        let step = 1.0 / 64.0;
        assert_eq!(out.len(), 4000);
        assert!(out.samples().iter().all(|v| (v / step - libm::round(v / step)).abs() < 1e-9));
    }

    #[test]
    fn lowpass_passes_dc_and_blocks_high_tones() {
        let dc = vec![0.5; 2000];
        let y = lowpass(&dc, 0.05);
        assert!((y[1000] - 0.5).abs() < 1e-9);
        let hf: Vec<f64> = (0..4000).map(|n| libm::sin(2.0 * PI * 0.3 * n as f64)).collect();
        let y = lowpass(&hf, 0.05);
        assert!(mean_power(&y[500..3500]) < 1e-6);
    }

    #[test]
    fn reverb_envelope_drops_sixty_db_at_rt60() {
        let ratio = reverb_envelope(0.7, 0.7).powi(2) / reverb_envelope(0.0, 0.7).powi(2);
        assert!((10.0 * libm::log10(ratio) + 60.0).abs() < 1e-9);
    }

    #[test]
    fn short_rt60_is_a_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = reverb_impulse_response(1e-5, 16000, &mut rng).unwrap();
        assert_eq!(h, vec![1.0]);
        let w = tone(500, 9);
        assert_eq!(reverb_probe(&w, 1e-5, 3).unwrap(), w);
        assert!(reverb_probe(&w, 0.0, 3).is_err());
        assert!(reverb_probe(&w, 3.5, 3).is_err());
    }

    #[test]
    fn impulse_response_length_tracks_rt60() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(reverb_impulse_response(0.5, 16000, &mut rng).unwrap().len(), 6400);
    }

    #[test]
    fn apply_condition_is_deterministic() {
        let w = tone(6000, 11);
        let opts = DegradeOptions::default();
        for c in DegradationCondition::grid(&[Family::Clip, Family::Noise, Family::CodecMp3Like, Family::ReverbProbe]) {
            let a = apply_condition(&w, &c, 42, "src", &opts).unwrap();
            let b = apply_condition(&w, &c, 42, "src", &opts).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), w.len());
        }
        let c = DegradationCondition::new(Family::Noise, 0).unwrap();
        let a = apply_condition(&w, &c, 42, "src", &opts).unwrap();
        let b = apply_condition(&w, &c, 43, "src", &opts).unwrap();
        let d = apply_condition(&w, &c, 42, "other", &opts).unwrap();
        assert_ne!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn external_codec_without_encoder() {
        let c = DegradationCondition::new(Family::ExternalCodec, 2).unwrap();
        assert_eq!(
            apply_condition(&tone(100, 1), &c, 0, "s", &DegradeOptions::default()),
            Err(Error::MissingEncoder)
        );
    }

    #[test]
    fn external_codec_hook_is_called() {
        struct Halve;
        impl ExternalEncoder for Halve {
            fn encode(&self, w: &Waveform, kbps: f64) -> Result<Waveform> {
                assert_eq!(kbps, 32.0);
                Waveform::new(w.samples().iter().map(|s| s / 2.0).collect(), w.sample_rate())
            }
        }
        let opts = DegradeOptions { external: Some(Box::new(Halve)), ..DegradeOptions::default() };
        let c = DegradationCondition::new(Family::ExternalCodec, 2).unwrap();
        let w = tone(100, 1);
        let out = apply_condition(&w, &c, 0, "s", &opts).unwrap();
        assert_eq!(out.samples()[3], w.samples()[3] / 2.0);
    }

    #[test]
    fn pink_noise_has_more_low_than_high_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = pink_noise(1 << 15, &mut rng);
        let lo = lowpass(&p, 0.02);
        let hi: Vec<f64> = p.iter().zip(&lo).map(|(a, b)| a - b).collect();
        // 1/f: the bottom 2% of the band carries a sizable share of the energy
        assert!(mean_power(&lo) > 0.1 * mean_power(&hi));
        let w = white_noise(1 << 15, &mut rng);
        let wlo = lowpass(&w, 0.02);
        assert!(mean_power(&wlo) < 0.06 * mean_power(&w));
    }
}
