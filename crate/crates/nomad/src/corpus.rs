//! Seeded speech-like test signals: a jittered glottal pulse train shaped by
//! three formant resonators, alternating with fricative noise bursts and
//! short pauses.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nomad_core::{Waveform, CANONICAL_RATE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{wav, Result};

/// F1, F2, F3 in Hz.
const VOWELS: [[f64; 3]; 8] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
    [660.0, 1720.0, 2410.0],
    [440.0, 1020.0, 2240.0],
    [490.0, 1350.0, 1690.0],
];

const PEAK: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, rate: f64) -> Self {
        let mut r = Self { a1: 0.0, a2: 0.0, gain: 0.0, y1: 0.0, y2: 0.0 };
        r.tune(freq, bandwidth, rate);
        r
    }

    fn tune(&mut self, freq: f64, bandwidth: f64, rate: f64) {
        let radius = (-PI * bandwidth / rate).exp();
        self.a1 = 2.0 * radius * (2.0 * PI * freq / rate).cos();
        self.a2 = -radius * radius;
        self.gain = 1.0 - radius;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Speaker {
    pub f0_hz: f64,
    pub formant_scale: f64,
    pub rate_syll_per_s: f64,
}

impl Speaker {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            f0_hz: rng.gen_range(90.0..230.0),
            formant_scale: rng.gen_range(0.9..1.15),
            rate_syll_per_s: rng.gen_range(3.0..5.5),
        }
    }
}

/// One utterance of `duration_s` seconds at 16 kHz, peak-normalized to 0.5.
pub fn synthesize_utterance(duration_s: f64, seed: u64) -> Waveform {
    let rate = f64::from(CANONICAL_RATE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speaker = Speaker::random(&mut rng);
    let n = ((duration_s * rate).round() as usize).max(1);
    let mut out = vec![0.0; n];

    let mut formants: Vec<Resonator> = VOWELS[0]
        .iter()
        .zip([80.0, 100.0, 140.0])
        .map(|(&f, bw)| Resonator::new(f, bw, rate))
        .collect();
    let mut hiss = Resonator::new(4500.0, 2500.0, rate);
    let mut tilt = 0.0;
    let mut phase = 0.0;

    let mut pos = (rng.gen_range(0.05..0.2) * rate) as usize;
    while pos < n {
        let syll = (rate / speaker.rate_syll_per_s * rng.gen_range(0.7..1.3)) as usize;
        let end = (pos + syll).min(n);
        let frication = if rng.gen_bool(0.4) { (syll as f64 * rng.gen_range(0.15..0.35)) as usize } else { 0 };
        let from = VOWELS[rng.gen_range(0..VOWELS.len())];
        let to = VOWELS[rng.gen_range(0..VOWELS.len())];
        let f0_start = speaker.f0_hz * rng.gen_range(0.85..1.2);
        let f0_end = speaker.f0_hz * rng.gen_range(0.8..1.1);
        let loud = rng.gen_range(0.5..1.0);
        hiss.tune(rng.gen_range(3000.0..6000.0), rng.gen_range(1500.0..3000.0), rate);

        for i in pos..end {
            let local = (i - pos) as f64 / (end - pos) as f64;
            if i - pos < frication {
                let u = (i - pos) as f64 / frication as f64;
                let env = (PI * u).sin();
                out[i] += 0.35 * loud * env * hiss.step(rng.gen_range(-1.0..1.0)) * 6.0;
                continue;
            }
            let v = (i - pos - frication) as f64 / (end - pos - frication).max(1) as f64;
            if (i - pos - frication) % 64 == 0 {
                for (k, r) in formants.iter_mut().enumerate() {
                    let f = (from[k] + (to[k] - from[k]) * v) * speaker.formant_scale;
                    r.tune(f, [80.0, 100.0, 140.0][k], rate);
                }
            }
            let f0 = (f0_start + (f0_end - f0_start) * local) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0));
            phase += f0 / rate;
            let pulse = if phase >= 1.0 {
                phase -= 1.0;
                1.0
            } else {
                0.0
            };
            tilt = 0.9 * tilt + pulse + 0.02 * rng.gen_range(-1.0..1.0);
            let env = (PI * v).sin().powf(0.6);
            let mut y = tilt;
            for r in formants.iter_mut() {
                y = r.step(y) * 3.0 + 0.3 * y;
            }
            out[i] += loud * env * y;
        }
        pos = end;
        if rng.gen_bool(0.25) {
            pos += (rng.gen_range(0.08..0.3) * rate) as usize;
        }
    }

    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if peak > 0.0 { PEAK / peak } else { 0.0 };
    let samples = out.iter().map(|x| x * scale + 1e-4 * rng.gen_range(-1.0..1.0)).collect();
    Waveform::new(samples, CANONICAL_RATE).expect("finite samples")
}

/// Writes `count` utterances as `{prefix}_{i:03}.wav` into `dir` and returns
/// their paths.
pub fn write_corpus(dir: &Path, prefix: &str, count: usize, duration_s: f64, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    (0..count)
        .map(|i| {
            let path = dir.join(format!("{prefix}_{i:03}.wav"));
            let w = synthesize_utterance(duration_s, nomad_core::seed::mix(&[seed, i as u64]));
            wav::write_wav(&path, &w)?;
            Ok(path)
        })
        .collect()
}
