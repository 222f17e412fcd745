//! Convolutional embedding network with hand-written reverse-mode gradients.
//!
//! Architecture (default config): the log mel spectrogram, shifted by +5 and
//! scaled by 0.4, is read as a
//! 32-channel sequence over time, passed through four stride-2 temporal
//! convolutions (kernel 5, zero padding 2, ReLU) with 32, 64, 64 and 128
//! output channels, averaged over time, passed through a ReLU and an
//! affine 128 -> 256 head, and L2-normalized.
//!
//! Parameter layout, in order: for each conv layer the weights
//! `[out][in][k]` then biases `[out]`; then the head weights `[embed][in]`
//! and biases `[embed]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectrogram::Spectrogram;
use crate::{Error, Result};

/// Guard against dividing by a vanishing embedding norm.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub bands: usize,
    /// Output channels of each conv layer.
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub embed_dim: usize,
    pub init_seed: u64,
    /// Inputs enter the first layer as `(x + input_offset) * input_scale`.
    pub input_offset: f64,
    pub input_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { bands: 32, channels: vec![32, 64, 64, 128], kernel: 5, stride: 2, embed_dim: 256, init_seed: 0, input_offset: 5.0, input_scale: 0.4 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 || self.embed_dim == 0 || self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::InvalidParameter("encoder dimensions must be positive with at least one conv layer".into()));
        }
        if !self.input_offset.is_finite() || !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return Err(Error::InvalidParameter("input offset must be finite and input scale positive".into()));
        }
        if self.kernel % 2 == 0 || self.stride == 0 {
            return Err(Error::InvalidParameter("kernel must be odd and stride positive".into()));
        }
        Ok(())
    }

    pub fn padding(&self) -> usize {
        self.kernel / 2
    }

    /// Shortest input (in frames) the encoder accepts without padding;
    /// shorter inputs are zero-padded to this length.
    pub fn min_frames(&self) -> usize {
        2 * self.stride.pow(self.channels.len() as u32) + 1
    }

    fn out_frames(&self, t: usize) -> usize {
        (t + 2 * self.padding() - self.kernel) / self.stride + 1
    }

    pub fn last_channels(&self) -> usize {
        *self.channels.last().expect("validated")
    }

    /// Closed-form parameter count.
    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        let mut cin = self.bands;
        for &cout in &self.channels {
            n += cout * cin * self.kernel + cout;
            cin = cout;
        }
        n + self.embed_dim * cin + self.embed_dim
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvLayout {
    cin: usize,
    cout: usize,
    w: usize,
    b: usize,
}

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }

    pub fn squared_distance(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn distance(&self, other: &Embedding) -> f64 {
        libm::sqrt(self.squared_distance(other))
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Normalizes an arbitrary vector (no further checks).
    pub fn from_unnormalized(v: Vec<f64>) -> Self {
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(NORM_EPS);
        Self(v.into_iter().map(|x| x / n).collect())
    }
}

/// Channel-major `channels x frames` activation map.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub channels: usize,
    pub frames: usize,
    pub data: Vec<f64>,
}

impl Activation {
    fn zeros(channels: usize, frames: usize) -> Self {
        Self { channels, frames, data: vec![0.0; channels * frames] }
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `acts[0]` is the (padded) input, `acts[l + 1]` the ReLU output of
    /// conv layer `l`.
    acts: Vec<Activation>,
    /// Unfolded input of each conv layer, `[(in * kernel + k) * frames + t]`.
    cols: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    z: Vec<f64>,
    norm: f64,
    embedding: Embedding,
    input_frames: usize,
}

impl Forward {
    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    /// ReLU outputs of the conv layers, first to last.
    pub fn conv_activations(&self) -> &[Activation] {
        &self.acts[1..]
    }

    /// On/off state of every ReLU in the pass. A finite-difference step that
    /// changes this pattern crossed a kink.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.acts[1..]
            .iter()
            .flat_map(|a| a.data.iter().map(|&v| v > 0.0))
            .chain(self.pooled.iter().map(|&v| v > 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    config: EncoderConfig,
    params: Vec<f64>,
}

/// Output of [`EmbeddingModel::feature_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLoss {
    pub loss: f64,
    /// d loss / d estimate spectrogram, frame-major like [`Spectrogram::values`].
    pub input_gradient: Vec<f64>,
    /// d loss / d estimate activation for each conv layer, then the
    /// embedding layer.
    pub activation_gradients: Vec<Vec<f64>>,
}

impl EmbeddingModel {
    /// Glorot-uniform weights (`+-sqrt(6 / (fan_in + fan_out))`), zero biases,
    /// seeded by `config.init_seed`. Values are rounded to `f32` so that a
    /// saved checkpoint reproduces the model exactly.
    pub fn init(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = Vec::with_capacity(config.parameter_count());
        let mut cin = config.bands;
        let mut push_layer = |cout: usize, fan_in: usize, fan_out: usize, weights: usize| {
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            for _ in 0..weights {
                params.push(f64::from(rng.gen_range(-limit..limit) as f32));
            }
            params.extend(core::iter::repeat(0.0).take(cout));
        };
        for &cout in &config.channels {
            push_layer(cout, cin * config.kernel, cout * config.kernel, cout * cin * config.kernel);
            cin = cout;
        }
        push_layer(config.embed_dim, cin, config.embed_dim, config.embed_dim * cin);
        Ok(Self { config, params })
    }

    /// Rebuilds a model from a config and a flat parameter vector.
    pub fn from_parts(config: EncoderConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.parameter_count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameters, got {}",
                config.parameter_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `theta <- f32(theta - lr * grad)`.
    pub fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p = f64::from((*p - lr * g) as f32);
        }
    }

    fn layouts(&self) -> (Vec<ConvLayout>, usize, usize) {
        let cfg = &self.config;
        let mut out = Vec::with_capacity(cfg.channels.len());
        let mut off = 0;
        let mut cin = cfg.bands;
        for &cout in &cfg.channels {
            let w = off;
            let b = w + cout * cin * cfg.kernel;
            off = b + cout;
            out.push(ConvLayout { cin, cout, w, b });
            cin = cout;
        }
        let head_w = off;
        let head_b = head_w + cfg.embed_dim * cin;
        (out, head_w, head_b)
    }

    fn input_activation(&self, spec: &Spectrogram) -> Result<Activation> {
        if spec.bands() != self.config.bands {
            return Err(Error::BandMismatch { got: spec.bands(), expected: self.config.bands });
        }
        let frames = spec.frames().max(self.config.min_frames());
        let mut a = Activation::zeros(spec.bands(), frames);
        for t in 0..spec.frames() {
            for (b, &v) in spec.frame(t).iter().enumerate() {
                a.data[b * frames + t] = (v + self.config.input_offset) * self.config.input_scale;
            }
        }
        Ok(a)
    }

    pub fn forward(&self, spec: &Spectrogram) -> Result<Forward> {
        let cfg = &self.config;
        let (layers, head_w, head_b) = self.layouts();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(self.input_activation(spec)?);
        let (k, s, p) = (cfg.kernel, cfg.stride, cfg.padding());
        let mut cols = Vec::with_capacity(layers.len());
        for l in &layers {
            let x = acts.last().expect("input pushed");
            let t_out = cfg.out_frames(x.frames);
            let col = im2col(x, k, s, p, t_out);
            let mut y = Activation::zeros(l.cout, t_out);
            for o in 0..l.cout {
                let row = &mut y.data[o * t_out..(o + 1) * t_out];
                row.fill(self.params[l.b + o]);
                let w = &self.params[l.w + o * l.cin * k..l.w + (o + 1) * l.cin * k];
                for (&wv, c) in w.iter().zip(col.chunks_exact(t_out)) {
                    axpy(wv, c, row);
                }
                row.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
            cols.push(col);
        }
        let last = acts.last().expect("at least one layer");
        let pooled: Vec<f64> = last
            .data
            .chunks(last.frames)
            .map(|c| c.iter().sum::<f64>() / last.frames as f64)
            .collect();
        let cin = pooled.len();
        let z: Vec<f64> = (0..cfg.embed_dim)
            .map(|j| {
                let w = &self.params[head_w + j * cin..head_w + (j + 1) * cin];
                self.params[head_b + j] + w.iter().zip(&pooled).map(|(w, h)| w * h.max(0.0)).sum::<f64>()
            })
            .collect();
        let norm = libm::sqrt(z.iter().map(|v| v * v).sum::<f64>());
        let denom = norm.max(NORM_EPS);
        let embedding = Embedding(z.iter().map(|v| v / denom).collect());
        Ok(Forward { acts, cols, pooled, z, norm, embedding, input_frames: spec.frames() })
    }

    pub fn embed(&self, spec: &Spectrogram) -> Result<Embedding> {
        Ok(self.forward(spec)?.embedding)
    }

    /// Back-propagates `d_embedding` (and optional extra gradients on each
    /// conv layer's output) through one forward pass. Parameter gradients
    /// are accumulated into `grad` when given; the input gradient
    /// (channel-major, padded length) is returned when `want_input`.
    fn backward(
        &self,
        fwd: &Forward,
        d_embedding: &[f64],
        act_grads: Option<&[Vec<f64>]>,
        mut grad: Option<&mut [f64]>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let cfg = &self.config;
        let (layers, head_w, head_b) = self.layouts();
        let e = fwd.embedding.as_slice();
        let cin = fwd.pooled.len();

        // through the normalization
        let dz: Vec<f64> = if fwd.norm > NORM_EPS {
            let proj: f64 = e.iter().zip(d_embedding).map(|(a, b)| a * b).sum();
            d_embedding.iter().zip(e).map(|(d, e)| (d - e * proj) / fwd.norm).collect()
        } else {
            d_embedding.iter().map(|d| d / NORM_EPS).collect()
        };
        debug_assert_eq!(fwd.z.len(), dz.len());

        // through the head and the ReLU on the pooled vector
        let mut dh = vec![0.0; cin];
        for (j, &dzj) in dz.iter().enumerate() {
            if let Some(g) = grad.as_deref_mut() {
                g[head_b + j] += dzj;
                for (c, h) in fwd.pooled.iter().enumerate() {
                    g[head_w + j * cin + c] += dzj * h.max(0.0);
                }
            }
            let w = &self.params[head_w + j * cin..head_w + (j + 1) * cin];
            for (c, wc) in w.iter().enumerate() {
                dh[c] += dzj * wc;
            }
        }
        for (d, h) in dh.iter_mut().zip(&fwd.pooled) {
            if *h <= 0.0 {
                *d = 0.0;
            }
        }

        // through the temporal mean
        let last = fwd.acts.last().expect("forward has layers");
        let mut d_act = vec![0.0; last.data.len()];
        for (c, &g) in dh.iter().enumerate() {
            let v = g / last.frames as f64;
            d_act[c * last.frames..(c + 1) * last.frames].fill(v);
        }

        let (k, s, p) = (cfg.kernel, cfg.stride, cfg.padding());
        for (li, l) in layers.iter().enumerate().rev() {
            if let Some(extra) = act_grads {
                for (d, x) in d_act.iter_mut().zip(&extra[li]) {
                    *d += x;
                }
            }
            let y = &fwd.acts[li + 1];
            let x = &fwd.acts[li];
            // ReLU mask turns d_act into the pre-activation gradient
            for (d, &v) in d_act.iter_mut().zip(&y.data) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
            let need_dx = li > 0 || want_input;
            let col = &fwd.cols[li];
            let t_out = y.frames;
            let mut dcol = if need_dx { vec![0.0; col.len()] } else { Vec::new() };
            for o in 0..l.cout {
                let dy = &d_act[o * t_out..(o + 1) * t_out];
                let wr = l.w + o * l.cin * k..l.w + (o + 1) * l.cin * k;
                if let Some(g) = grad.as_deref_mut() {
                    g[l.b + o] += dy.iter().sum::<f64>();
                    for (gw, c) in g[wr.clone()].iter_mut().zip(col.chunks_exact(t_out)) {
                        *gw += dot(dy, c);
                    }
                }
                if need_dx {
                    for (&wv, dc) in self.params[wr].iter().zip(dcol.chunks_exact_mut(t_out)) {
                        axpy(wv, dy, dc);
                    }
                }
            }
            let dx = if need_dx { col2im(&dcol, x.channels, x.frames, k, s, p, t_out) } else { Vec::new() };
            d_act = dx;
        }
        want_input.then_some(d_act)
    }

    /// Mean triplet margin loss over `batch` and its gradient with respect
    /// to every parameter. Spectrograms are looked up in `store`.
    pub fn loss_and_gradients(&self, store: &[Spectrogram], batch: &[SpecTriplet], margin: f64) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for t in batch {
            let fa = self.forward(&store[t.anchor])?;
            let fp = self.forward(&store[t.positive])?;
            let fn_ = self.forward(&store[t.negative])?;
            let (a, p, n) = (fa.embedding.as_slice(), fp.embedding.as_slice(), fn_.embedding.as_slice());
            let loss = triplet_loss(&fa.embedding, &fp.embedding, &fn_.embedding, margin);
            total += loss;
            if loss > 0.0 {
                let da: Vec<f64> = n.iter().zip(p).map(|(n, p)| 2.0 * (n - p) * scale).collect();
                let dp: Vec<f64> = p.iter().zip(a).map(|(p, a)| 2.0 * (p - a) * scale).collect();
                let dn: Vec<f64> = a.iter().zip(n).map(|(a, n)| 2.0 * (a - n) * scale).collect();
                self.backward(&fa, &da, None, Some(&mut grad), false);
                self.backward(&fp, &dp, None, Some(&mut grad), false);
                self.backward(&fn_, &dn, None, Some(&mut grad), false);
            }
        }
        Ok((total * scale, grad))
    }

    /// Mean triplet loss without gradients.
    pub fn batch_loss(&self, store: &[Spectrogram], batch: &[SpecTriplet], margin: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        let mut total = 0.0;
        for t in batch {
            let a = self.embed(&store[t.anchor])?;
            let p = self.embed(&store[t.positive])?;
            let n = self.embed(&store[t.negative])?;
            total += triplet_loss(&a, &p, &n, margin);
        }
        Ok(total / batch.len() as f64)
    }

    /// Sum over every conv layer and the embedding layer of the frame-wise
    /// L1 distance between clean and estimate activations, averaged over
    /// frames within each layer. Both spectrograms are cut to the shorter
    /// frame count.
    pub fn feature_loss(&self, clean: &Spectrogram, estimate: &Spectrogram) -> Result<FeatureLoss> {
        let frames = clean.frames().min(estimate.frames());
        let (clean, estimate) = (clean.truncated(frames), estimate.truncated(frames));
        let fc = self.forward(&clean)?;
        let fe = self.forward(&estimate)?;
        let mut loss = 0.0;
        let mut activation_gradients = Vec::with_capacity(fc.acts.len());
        for (ac, ae) in fc.acts[1..].iter().zip(&fe.acts[1..]) {
            let inv = 1.0 / ae.frames as f64;
            let mut g = Vec::with_capacity(ae.data.len());
            for (c, e) in ac.data.iter().zip(&ae.data) {
                loss += (e - c).abs() * inv;
                g.push(sign(e - c) * inv);
            }
            activation_gradients.push(g);
        }
        let de: Vec<f64> = fe
            .embedding
            .as_slice()
            .iter()
            .zip(fc.embedding.as_slice())
            .map(|(e, c)| {
                loss += (e - c).abs();
                sign(e - c)
            })
            .collect();
        let d_input = self
            .backward(&fe, &de, Some(&activation_gradients), None, true)
            .expect("input gradient requested");
        activation_gradients.push(de);
        let padded = fe.acts[0].frames;
        let bands = self.config.bands;
        let mut input_gradient = vec![0.0; fe.input_frames * bands];
        for t in 0..fe.input_frames {
            for b in 0..bands {
                input_gradient[t * bands + b] = d_input[b * padded + t] * self.config.input_scale;
            }
        }
        Ok(FeatureLoss { loss, input_gradient, activation_gradients })
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn im2col(x: &Activation, k: usize, s: usize, p: usize, t_out: usize) -> Vec<f64> {
    let mut col = vec![0.0; x.channels * k * t_out];
    for i in 0..x.channels {
        let xi = &x.data[i * x.frames..(i + 1) * x.frames];
        for kk in 0..k {
            let dst = &mut col[(i * k + kk) * t_out..(i * k + kk + 1) * t_out];
            let (t0, t1) = valid_range(x.frames, t_out, kk, s, p);
            for t in t0..t1 {
                dst[t] = xi[t * s + kk - p];
            }
        }
    }
    col
}

fn col2im(dcol: &[f64], channels: usize, frames: usize, k: usize, s: usize, p: usize, t_out: usize) -> Vec<f64> {
    let mut dx = vec![0.0; channels * frames];
    for i in 0..channels {
        let dxi = &mut dx[i * frames..(i + 1) * frames];
        for kk in 0..k {
            let src = &dcol[(i * k + kk) * t_out..(i * k + kk + 1) * t_out];
            let (t0, t1) = valid_range(frames, t_out, kk, s, p);
            for t in t0..t1 {
                dxi[t * s + kk - p] += src[t];
            }
        }
    }
    dx
}

/// Output frames `t` for which input index `t*s + kk - p` lies in `0..t_in`.
fn valid_range(t_in: usize, t_out: usize, kk: usize, s: usize, p: usize) -> (usize, usize) {
    let t0 = if kk >= p { 0 } else { (p - kk).div_ceil(s) };
    let t1 = if t_in + p > kk { ((t_in + p - kk - 1) / s + 1).min(t_out) } else { 0 };
    (t0, t1.max(t0))
}

/// Indices of the anchor, positive and negative spectrograms in a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecTriplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// `max(0, |a - p|^2 - |a - n|^2 + margin)`.
pub fn triplet_loss(a: &Embedding, p: &Embedding, n: &Embedding, margin: f64) -> f64 {
    (a.squared_distance(p) - a.squared_distance(n) + margin).max(0.0)
}
