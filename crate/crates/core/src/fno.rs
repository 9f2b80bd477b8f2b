//! The 3D Fourier neural operator, its training loop, and a dense
//! baseline.
//!
//! The model maps the expanded sample frame `[tau_out x N x Y x C]`
//! (C = tau_in + 3) to a state trajectory `[tau_out x N x 3]`: a channel
//! encoder, a stack of Fourier layers `relu(batch_norm(W g + K g))` where
//! `K` is a spectral convolution over truncated modes of the first three
//! axes, and a channel decoder whose output is sliced to the three state
//! channels. Training minimizes the mean absolute percentage error with
//! Adam under a step-decay learning-rate schedule.
//!
//! Internally batches are carried as `[tau_out, N, Y, B, C]`: the three
//! transform axes first (the transform contract of `numcore`), the batch
//! axis fourth, channels last.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // resolves float math in the no_std build
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{Dataset, N_CHANNELS};
use crate::error::{CoreError, Result};
use crate::numcore::autodiff::{
    self, batch_norm_fixed, matmul_last, relu, spectral_conv_forward, spectral_weight_shape,
    Tape, ValueId,
};
use crate::numcore::{ComplexTensor, KeptModes, Tensor};

pub use crate::numcore::autodiff::mape;

/// Adam moment decay rates and epsilon.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Shape hyperparameters of the operator model.
#[derive(Debug, Clone, PartialEq)]
pub struct FnoHyper {
    pub n_buses: usize,
    pub tau_in: usize,
    pub tau_out: usize,
    pub n_layers: usize,
    /// Mode truncation per transform axis, in tensor-axis order
    /// `[time, bus, channel]`.
    pub kmax: [usize; 3],
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl FnoHyper {
    /// Channel count of the expanded frame.
    pub fn channels(&self) -> usize {
        self.tau_in + 3
    }

    pub fn modes(&self) -> Result<KeptModes> {
        KeptModes::new([self.tau_out, self.n_buses, N_CHANNELS], self.kmax)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_buses == 0 || self.tau_in == 0 || self.tau_out == 0 || self.n_layers == 0 {
            return Err(CoreError::InvalidModel(
                "model dimensions must be positive".into(),
            ));
        }
        if !(self.bn_eps > 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(CoreError::InvalidModel(
                "need bn_eps > 0 and bn_momentum in [0, 1]".into(),
            ));
        }
        self.modes().map(|_| ())
    }
}

/// One Fourier layer: spectral weights over the kept modes, a pointwise
/// channel map, and batch-norm state.
#[derive(Debug, Clone, PartialEq)]
pub struct FnoLayer {
    /// Complex spectral weights `[s1, s2, s3, C, C]` over the closed
    /// kept-mode grid.
    pub r: ComplexTensor,
    /// Pointwise channel weights `[C, C]`.
    pub w: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// Encoder, Fourier layers and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FnoModel {
    pub hyper: FnoHyper,
    /// Channel encoder `[C, C]`.
    pub encoder: Tensor,
    pub layers: Vec<FnoLayer>,
    /// Channel decoder `[C, 1]`.
    pub decoder: Tensor,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

fn glorot(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| uniform(rng, -bound, bound)).collect();
    Tensor::from_vec(shape, data).expect("init shape")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; the first uniform is kept away from zero.
    let u1 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let r = (-2.0 * (1.0 - u1).max(1e-300).ln()).sqrt();
    r * (core::f64::consts::TAU * u2).cos()
}

impl FnoModel {
    /// Initialize with uniform Glorot bounds for the real maps and a
    /// complex Gaussian scaled by `1/C` for the spectral weights.
    pub fn init(hyper: FnoHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let c = hyper.channels();
        let modes = hyper.modes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = glorot(&mut rng, &[c, c], c, c);
        let wshape = spectral_weight_shape(&modes, c);
        let scale = 1.0 / c as f64;
        let mut layers = Vec::with_capacity(hyper.n_layers);
        for _ in 0..hyper.n_layers {
            let len: usize = wshape.iter().product();
            let re = (0..len).map(|_| normal(&mut rng) * scale).collect();
            let im = (0..len).map(|_| normal(&mut rng) * scale).collect();
            layers.push(FnoLayer {
                r: ComplexTensor::from_parts(&wshape, re, im)?,
                w: glorot(&mut rng, &[c, c], c, c),
                gamma: Tensor::from_vec(&[c], vec![1.0; c])?,
                beta: Tensor::zeros(&[c]),
                running_mean: vec![0.0; c],
                running_var: vec![1.0; c],
            });
        }
        let decoder = glorot(&mut rng, &[c, 1], c, 1);
        Ok(FnoModel {
            hyper,
            encoder,
            layers,
            decoder,
        })
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let h = &self.hyper;
        let want_prefix = [h.tau_out, h.n_buses, N_CHANNELS];
        let s = x.shape();
        if s.len() != 5 || s[..3] != want_prefix || s[4] != h.channels() {
            return Err(CoreError::ShapeMismatch(format!(
                "model input {s:?}, expected [{}, {}, {}, B, {}]",
                h.tau_out,
                h.n_buses,
                N_CHANNELS,
                h.channels()
            )));
        }
        Ok(s[3])
    }

    /// Inference forward pass on a batch `[tau_out, N, Y, B, C]` using the
    /// stored running statistics; returns `[tau_out, N, 3, B]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let b = self.check_input(x)?;
        let h = &self.hyper;
        let modes = h.modes()?;
        let mut g = matmul_last(x, &self.encoder)?;
        for layer in &self.layers {
            let (spec, _) = spectral_conv_forward(&g, &layer.r, &modes)?;
            let point = matmul_last(&g, &layer.w)?;
            let sum_data: Vec<f64> = spec
                .data()
                .iter()
                .zip(point.data())
                .map(|(a, b)| a + b)
                .collect();
            let sum = Tensor::from_vec(spec.shape(), sum_data)?;
            let bn = batch_norm_fixed(
                &sum,
                &layer.gamma,
                &layer.beta,
                &layer.running_mean,
                &layer.running_var,
                h.bn_eps,
            )?;
            g = relu(&bn);
        }
        let dec = matmul_last(&g, &self.decoder)?;
        let dec = dec.reshaped(&[h.tau_out, h.n_buses, N_CHANNELS, b])?;
        autodiff::slice_axis(&dec, 2, 0, 3)
    }

    /// Training-mode forward pass on a tape. Returns the prediction node,
    /// the parameter nodes (same order as [`FnoModel::visit_params_mut`])
    /// and the batch-norm nodes per layer.
    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: Tensor,
    ) -> Result<(ValueId, Vec<ValueId>, Vec<ValueId>)> {
        let b = self.check_input(&x)?;
        let h = self.hyper.clone();
        let modes = h.modes()?;
        let mut params = Vec::new();
        let mut bn_nodes = Vec::new();
        let x = tape.leaf(x);
        let enc = tape.leaf(self.encoder.clone());
        params.push(enc);
        let mut g = tape.matmul_last(x, enc)?;
        for layer in &self.layers {
            let r = tape.leaf_complex(layer.r.clone());
            let w = tape.leaf(layer.w.clone());
            let gamma = tape.leaf(layer.gamma.clone());
            let beta = tape.leaf(layer.beta.clone());
            params.extend([r, w, gamma, beta]);
            let spec = tape.spectral_conv(g, r, &modes)?;
            let point = tape.matmul_last(g, w)?;
            let sum = tape.add(spec, point)?;
            let bn = tape.batch_norm(sum, gamma, beta, None, h.bn_eps)?;
            bn_nodes.push(bn);
            g = tape.relu(bn)?;
        }
        let dec = tape.leaf(self.decoder.clone());
        params.push(dec);
        let out = tape.matmul_last(g, dec)?;
        let out = tape.reshape(out, &[h.tau_out, h.n_buses, N_CHANNELS, b])?;
        let pred = tape.slice_axis(out, 2, 0, 3)?;
        Ok((pred, params, bn_nodes))
    }

    /// Training-mode forward pass plus loss on a fresh tape; returns the
    /// tape, the loss node and the parameter nodes in [`FnoModel::param_mut`]
    /// order. Used by gradient-validation tests and the trainer.
    pub fn forward_train_loss(
        &self,
        x: Tensor,
        target: &Tensor,
    ) -> Result<(Tape, ValueId, Vec<ValueId>, Vec<ValueId>)> {
        let mut tape = Tape::new();
        let (pred, params, bn_nodes) = self.forward_tape(&mut tape, x)?;
        let loss = tape.mape_loss(pred, target, 3)?;
        Ok((tape, loss, params, bn_nodes))
    }

    /// Number of trainable parameter tensors.
    pub fn n_params(&self) -> usize {
        2 + 4 * self.layers.len()
    }

    /// Mutable access to parameter tensor `i`, in the fixed order encoder,
    /// then (spectral, pointwise, gamma, beta) per layer, then decoder.
    pub fn param_mut(&mut self, i: usize) -> ParamMut<'_> {
        if i == 0 {
            return ParamMut::Real(&mut self.encoder);
        }
        let j = i - 1;
        let l = j / 4;
        if l < self.layers.len() {
            let layer = &mut self.layers[l];
            match j % 4 {
                0 => ParamMut::Complex(&mut layer.r),
                1 => ParamMut::Real(&mut layer.w),
                2 => ParamMut::Real(&mut layer.gamma),
                _ => ParamMut::Real(&mut layer.beta),
            }
        } else {
            ParamMut::Real(&mut self.decoder)
        }
    }

    /// Name of parameter tensor `i` (for diagnostics).
    pub fn param_name(&self, i: usize) -> alloc::string::String {
        if i == 0 {
            return "encoder".into();
        }
        let j = i - 1;
        let l = j / 4;
        if l < self.layers.len() {
            let kind = ["spectral", "pointwise", "gamma", "beta"][j % 4];
            format!("layer{l}.{kind}")
        } else {
            "decoder".into()
        }
    }

    /// Visit every trainable parameter in [`FnoModel::param_mut`] order.
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(ParamMut<'_>)) {
        for i in 0..self.n_params() {
            f(self.param_mut(i));
        }
    }
}

/// Mutable view of one parameter tensor.
pub enum ParamMut<'a> {
    Real(&'a mut Tensor),
    Complex(&'a mut ComplexTensor),
}

// ---------------------------------------------------------------------------
// Batch assembly.
// ---------------------------------------------------------------------------

/// Stack the expanded frames of the selected samples into the model's
/// batch layout `[tau_out, N, Y, B, C]`.
pub fn batch_input(ds: &Dataset, indices: &[usize]) -> Result<Tensor> {
    if indices.is_empty() {
        return Err(CoreError::EmptyInput("empty batch".into()));
    }
    let m = &ds.meta;
    let (t, n, c, bsz) = (m.tau_out, m.n_buses, m.tau_in + 3, indices.len());
    let mut data = vec![0.0f64; t * n * N_CHANNELS * bsz * c];
    for (b, &idx) in indices.iter().enumerate() {
        let frame = ds
            .samples
            .get(idx)
            .ok_or_else(|| CoreError::EmptyInput(format!("sample {idx} out of range")))?;
        let exp = frame.expanded4d(m); // [t, n, Y, c]
        for zo in 0..t {
            for bus in 0..n {
                for y in 0..N_CHANNELS {
                    let src = ((zo * n + bus) * N_CHANNELS + y) * c;
                    let dst = (((zo * n + bus) * N_CHANNELS + y) * bsz + b) * c;
                    data[dst..dst + c].copy_from_slice(&exp.data()[src..src + c]);
                }
            }
        }
    }
    Tensor::from_vec(&[t, n, N_CHANNELS, bsz, c], data)
}

/// Stack targets into `[tau_out, N, 3, B]`.
pub fn batch_target(ds: &Dataset, indices: &[usize]) -> Result<Tensor> {
    if indices.is_empty() {
        return Err(CoreError::EmptyInput("empty batch".into()));
    }
    let m = &ds.meta;
    let (t, n, bsz) = (m.tau_out, m.n_buses, indices.len());
    let mut data = vec![0.0f64; t * n * 3 * bsz];
    for (b, &idx) in indices.iter().enumerate() {
        let frame = &ds.samples[idx];
        for zo in 0..t {
            for bus in 0..n {
                for k in 0..3 {
                    data[((zo * n + bus) * 3 + k) * bsz + b] =
                        frame.target[(zo * n + bus) * 3 + k] as f64;
                }
            }
        }
    }
    Tensor::from_vec(&[t, n, 3, bsz], data)
}

// ---------------------------------------------------------------------------
// Optimizer and training loop.
// ---------------------------------------------------------------------------

/// Optimizer schedule and split configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub batch_size: usize,
    /// Initial learning rate.
    pub lr0: f64,
    /// Steps between learning-rate decays.
    pub decay_interval: usize,
    /// Multiplicative decay base.
    pub decay_base: f64,
    pub seed: u64,
    /// Leading fraction of the dataset used for training; the rest is the
    /// test split.
    pub split: f64,
    /// Episodes between test-loss evaluations (0 = never).
    pub eval_interval: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0
            || self.batch_size == 0
            || !(self.lr0 > 0.0)
            || self.decay_interval == 0
            || !(self.decay_base > 0.0)
        {
            return Err(CoreError::InvalidModel(
                "training config entries must be positive".into(),
            ));
        }
        if !(self.split > 0.0 && self.split <= 1.0) {
            return Err(CoreError::InvalidModel("split must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Step-decay schedule `lr0 * base^(step / interval)`.
    pub fn lr_at(&self, step: usize) -> f64 {
        self.lr0 * self.decay_base.powi((step / self.decay_interval) as i32)
    }

    fn n_train(&self, n: usize) -> usize {
        ((n as f64 * self.split).floor() as usize).clamp(1, n)
    }
}

/// One entry of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub episode: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    fn new(sizes: &[usize]) -> Self {
        Adam {
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            t: 0,
        }
    }

    /// Update one parameter buffer in place; call in fixed order, then
    /// [`Adam::advance`] once per step.
    fn update(&mut self, idx: usize, lr: f64, param: &mut [f64], grad: &[f64]) {
        let t = (self.t + 1) as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
        for i in 0..param.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            param[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }

    fn advance(&mut self) {
        self.t += 1;
    }
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic batch indices for an episode: a seeded partial shuffle
/// of the train split (sampling with replacement if the split is smaller
/// than the batch).
fn episode_indices(n_train: usize, batch: usize, seed: u64, episode: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, episode));
    if batch >= n_train {
        return (0..batch).map(|_| (rng.next_u64() % n_train as u64) as usize).collect();
    }
    let mut pool: Vec<usize> = (0..n_train).collect();
    for k in 0..batch {
        let j = k + (rng.next_u64() % (n_train - k) as u64) as usize;
        pool.swap(k, j);
    }
    pool.truncate(batch);
    pool
}

fn param_sizes(model: &mut FnoModel) -> Vec<usize> {
    let mut sizes = Vec::new();
    model.visit_params_mut(&mut |p| {
        sizes.push(match p {
            ParamMut::Real(t) => t.len(),
            ParamMut::Complex(t) => 2 * t.len(),
        })
    });
    sizes
}

/// Adam trainer for the operator model.
pub struct FnoTrainer {
    pub model: FnoModel,
    pub cfg: TrainConfig,
    adam: Adam,
    step: usize,
}

impl FnoTrainer {
    pub fn new(mut model: FnoModel, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        model.hyper.validate()?;
        let sizes = param_sizes(&mut model);
        Ok(FnoTrainer {
            model,
            cfg,
            adam: Adam::new(&sizes),
            step: 0,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn lr(&self) -> f64 {
        self.cfg.lr_at(self.step)
    }

    /// One optimization step on a seeded batch; returns the batch loss.
    pub fn train_episode(&mut self, ds: &Dataset) -> Result<f64> {
        if ds.samples.is_empty() {
            return Err(CoreError::EmptyInput("empty dataset".into()));
        }
        let n_train = self.cfg.n_train(ds.samples.len());
        let idx = episode_indices(
            n_train,
            self.cfg.batch_size.min(n_train.max(1)).max(1),
            self.cfg.seed,
            self.step as u64,
        );
        let x = batch_input(ds, &idx)?;
        let target = batch_target(ds, &idx)?;

        let mut tape = Tape::new();
        let (pred, params, bn_nodes) = self.model.forward_tape(&mut tape, x)?;
        let loss_node = tape.mape_loss(pred, &target, 3)?;
        let loss = tape.value(loss_node).item();
        if !loss.is_finite() {
            return Err(CoreError::NanLoss { episode: self.step });
        }
        let grads = tape.backward(loss_node)?;

        // Batch-norm running statistics.
        let momentum = self.model.hyper.bn_momentum;
        for (layer, &bn) in self.model.layers.iter_mut().zip(&bn_nodes) {
            if let Some((mean, var)) = tape.bn_batch_stats(bn) {
                for (r, &b) in layer.running_mean.iter_mut().zip(mean) {
                    *r = (1.0 - momentum) * *r + momentum * b;
                }
                for (r, &b) in layer.running_var.iter_mut().zip(var) {
                    *r = (1.0 - momentum) * *r + momentum * b;
                }
            }
        }

        // Adam update in parameter order; complex buffers are treated as
        // concatenated (re, im) vectors.
        let lr = self.lr();
        let adam = &mut self.adam;
        let mut i = 0usize;
        self.model.visit_params_mut(&mut |p| {
            let id = params[i];
            match p {
                ParamMut::Real(t) => {
                    if let Some(g) = grads.real(id) {
                        adam.update(i, lr, t.data_mut(), g.data());
                    }
                }
                ParamMut::Complex(t) => {
                    if let Some(g) = grads.complex(id) {
                        let n = t.len();
                        let mut buf = Vec::with_capacity(2 * n);
                        buf.extend_from_slice(t.re());
                        buf.extend_from_slice(t.im());
                        let mut gbuf = Vec::with_capacity(2 * n);
                        gbuf.extend_from_slice(g.re());
                        gbuf.extend_from_slice(g.im());
                        adam.update(i, lr, &mut buf, &gbuf);
                        let (re, im) = t.parts_mut();
                        re.copy_from_slice(&buf[..n]);
                        im.copy_from_slice(&buf[n..]);
                    }
                }
            }
            i += 1;
        });
        adam.advance();
        self.step += 1;
        Ok(loss)
    }

    /// Pooled MAPE over the test split in inference mode.
    pub fn test_loss(&self, ds: &Dataset) -> Result<Option<f64>> {
        let n_train = self.cfg.n_train(ds.samples.len());
        if n_train >= ds.samples.len() {
            return Ok(None);
        }
        let test: Vec<usize> = (n_train..ds.samples.len()).collect();
        Ok(Some(eval_mape(&self.model, ds, &test)?))
    }
}

/// Pooled MAPE of the model over the given sample indices (inference
/// mode), evaluated in fixed-size chunks.
pub fn eval_mape(model: &FnoModel, ds: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(CoreError::EmptyInput("no samples to evaluate".into()));
    }
    let chunk = 16usize;
    let mut acc = 0.0;
    for part in indices.chunks(chunk) {
        let x = batch_input(ds, part)?;
        let target = batch_target(ds, part)?;
        let pred = model.forward(&x)?;
        acc += mape(&pred, &target, 3)? * part.len() as f64;
    }
    Ok(acc / indices.len() as f64)
}

/// Convenience loop: train for `cfg.episodes` steps, recording the loss
/// history (test loss every `eval_interval` episodes and at the end).
pub fn train_fno(
    model: FnoModel,
    ds: &Dataset,
    cfg: TrainConfig,
) -> Result<(FnoModel, Vec<TrainRecord>)> {
    let mut trainer = FnoTrainer::new(model, cfg)?;
    let mut history = Vec::with_capacity(trainer.cfg.episodes);
    for ep in 0..trainer.cfg.episodes {
        let lr = trainer.lr();
        let train_loss = trainer.train_episode(ds)?;
        let eval_now = trainer.cfg.eval_interval != 0
            && (ep % trainer.cfg.eval_interval == trainer.cfg.eval_interval - 1
                || ep + 1 == trainer.cfg.episodes);
        let test_loss = if eval_now { trainer.test_loss(ds)? } else { None };
        history.push(TrainRecord {
            episode: ep,
            lr,
            train_loss,
            test_loss,
        });
    }
    Ok((trainer.model, history))
}

// ---------------------------------------------------------------------------
// Dense baseline.
// ---------------------------------------------------------------------------

/// A 7-layer dense network on the flattened measurement window; hidden
/// width equals the input width.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnBaseline {
    /// (weights `[in, out]`, bias `[out]`) per layer.
    pub layers: Vec<(Tensor, Tensor)>,
}

/// Number of dense layers in the baseline.
pub const DNN_LAYERS: usize = 7;

impl DnnBaseline {
    pub fn init(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(CoreError::InvalidModel(
                "baseline dims must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(DNN_LAYERS);
        for l in 0..DNN_LAYERS {
            let (fi, fo) = (
                input_dim,
                if l + 1 == DNN_LAYERS { output_dim } else { input_dim },
            );
            layers.push((glorot(&mut rng, &[fi, fo], fi, fo), Tensor::zeros(&[fo])));
        }
        Ok(DnnBaseline { layers })
    }

    /// Inference on a batch `[B, input_dim]` -> `[B, output_dim]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = x.clone();
        for (l, (w, b)) in self.layers.iter().enumerate() {
            g = autodiff::bias_last(&matmul_last(&g, w)?, b)?;
            if l + 1 != self.layers.len() {
                g = relu(&g);
            }
        }
        Ok(g)
    }

    fn forward_tape(&self, tape: &mut Tape, x: Tensor) -> Result<(ValueId, Vec<ValueId>)> {
        let mut params = Vec::new();
        let mut g = tape.leaf(x);
        for (l, (w, b)) in self.layers.iter().enumerate() {
            let wi = tape.leaf(w.clone());
            let bi = tape.leaf(b.clone());
            params.extend([wi, bi]);
            g = tape.matmul_last(g, wi)?;
            g = tape.bias_last(g, bi)?;
            if l + 1 != self.layers.len() {
                g = tape.relu(g)?;
            }
        }
        Ok((g, params))
    }
}

/// Flattened inputs `[B, N*Y*tau_in]` for the baseline.
pub fn batch_input_flat(ds: &Dataset, indices: &[usize]) -> Result<Tensor> {
    if indices.is_empty() {
        return Err(CoreError::EmptyInput("empty batch".into()));
    }
    let d = ds.meta.n_buses * N_CHANNELS * ds.meta.tau_in;
    let mut data = Vec::with_capacity(indices.len() * d);
    for &idx in indices {
        let frame = ds
            .samples
            .get(idx)
            .ok_or_else(|| CoreError::EmptyInput(format!("sample {idx} out of range")))?;
        data.extend(frame.input3d.iter().map(|&v| v as f64));
    }
    Tensor::from_vec(&[indices.len(), d], data)
}

/// Flattened targets `[B, tau_out*N*3]`.
pub fn batch_target_flat(ds: &Dataset, indices: &[usize]) -> Result<Tensor> {
    if indices.is_empty() {
        return Err(CoreError::EmptyInput("empty batch".into()));
    }
    let d = ds.meta.tau_out * ds.meta.n_buses * 3;
    let mut data = Vec::with_capacity(indices.len() * d);
    for &idx in indices {
        data.extend(ds.samples[idx].target.iter().map(|&v| v as f64));
    }
    Tensor::from_vec(&[indices.len(), d], data)
}

/// Adam trainer for the dense baseline (same loss and schedule contract
/// as the operator trainer).
pub struct DnnTrainer {
    pub model: DnnBaseline,
    pub cfg: TrainConfig,
    adam: Adam,
    step: usize,
}

impl DnnTrainer {
    pub fn new(model: DnnBaseline, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let sizes: Vec<usize> = model
            .layers
            .iter()
            .flat_map(|(w, b)| [w.len(), b.len()])
            .collect();
        Ok(DnnTrainer {
            model,
            cfg,
            adam: Adam::new(&sizes),
            step: 0,
        })
    }

    pub fn train_episode(&mut self, ds: &Dataset) -> Result<f64> {
        if ds.samples.is_empty() {
            return Err(CoreError::EmptyInput("empty dataset".into()));
        }
        let n_train = self.cfg.n_train(ds.samples.len());
        let idx = episode_indices(
            n_train,
            self.cfg.batch_size.min(n_train).max(1),
            self.cfg.seed,
            self.step as u64,
        );
        let x = batch_input_flat(ds, &idx)?;
        let target = batch_target_flat(ds, &idx)?;
        let mut tape = Tape::new();
        let (pred, params) = self.model.forward_tape(&mut tape, x)?;
        let loss_node = tape.mape_loss(pred, &target, 0)?;
        let loss = tape.value(loss_node).item();
        if !loss.is_finite() {
            return Err(CoreError::NanLoss { episode: self.step });
        }
        let grads = tape.backward(loss_node)?;
        let lr = self.cfg.lr_at(self.step);
        for (i, ((w, b), ids)) in self
            .model
            .layers
            .iter_mut()
            .zip(params.chunks(2))
            .enumerate()
        {
            if let Some(g) = grads.real(ids[0]) {
                self.adam.update(2 * i, lr, w.data_mut(), g.data());
            }
            if let Some(g) = grads.real(ids[1]) {
                self.adam.update(2 * i + 1, lr, b.data_mut(), g.data());
            }
        }
        self.adam.advance();
        self.step += 1;
        Ok(loss)
    }

    /// Pooled MAPE over the test split.
    pub fn test_loss(&self, ds: &Dataset) -> Result<Option<f64>> {
        let n_train = self.cfg.n_train(ds.samples.len());
        if n_train >= ds.samples.len() {
            return Ok(None);
        }
        let test: Vec<usize> = (n_train..ds.samples.len()).collect();
        let x = batch_input_flat(ds, &test)?;
        let target = batch_target_flat(ds, &test)?;
        let pred = self.model.forward(&x)?;
        Ok(Some(mape(&pred, &target, 0)?))
    }
}

/// Convenience loop for the baseline.
pub fn train_dnn(
    model: DnnBaseline,
    ds: &Dataset,
    cfg: TrainConfig,
) -> Result<(DnnBaseline, Vec<TrainRecord>)> {
    let mut trainer = DnnTrainer::new(model, cfg)?;
    let mut history = Vec::with_capacity(trainer.cfg.episodes);
    for ep in 0..trainer.cfg.episodes {
        let lr = trainer.cfg.lr_at(trainer.step);
        let train_loss = trainer.train_episode(ds)?;
        let eval_now = trainer.cfg.eval_interval != 0
            && (ep % trainer.cfg.eval_interval == trainer.cfg.eval_interval - 1
                || ep + 1 == trainer.cfg.episodes);
        let test_loss = if eval_now { trainer.test_loss(ds)? } else { None };
        history.push(TrainRecord {
            episode: ep,
            lr,
            train_loss,
            test_loss,
        });
    }
    Ok((trainer.model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{DatasetMeta, SampleFrame};

    fn tiny_hyper() -> FnoHyper {
        FnoHyper {
            n_buses: 3,
            tau_in: 4,
            tau_out: 5,
            n_layers: 2,
            kmax: [2, 1, 1],
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }

    fn tiny_dataset(n: usize) -> Dataset {
        let meta = DatasetMeta::identity(0.03, 1.0 / 600.0, 4, 5, 3);
        let mut samples = Vec::new();
        for i in 0..n {
            let scale = 0.5 + i as f64 * 0.1;
            let input3d = (0..3 * N_CHANNELS * 4)
                .map(|k| (scale * ((k % 13) as f64 * 0.37 - 1.0)) as f32)
                .collect();
            let extras = (0..5 * 3)
                .map(|k| if k % 3 == 0 { (k / 3) as f32 / 5.0 } else { 0.0 })
                .collect();
            let target = (0..5 * 3 * 3)
                .map(|k| (scale * (((k * 7) % 11) as f64 * 0.21 - 0.9)) as f32)
                .collect();
            samples.push(SampleFrame {
                input3d,
                extras,
                target,
                t_on: 1.0,
                stable: true,
            });
        }
        Dataset { meta, samples }
    }

    fn small_cfg(episodes: usize) -> TrainConfig {
        TrainConfig {
            episodes,
            batch_size: 2,
            lr0: 0.02,
            decay_interval: 100,
            decay_base: 0.85,
            seed: 3,
            split: 1.0,
            eval_interval: 0,
        }
    }

    #[test]
    fn lr_schedule_matches_hand_values() {
        let cfg = small_cfg(1);
        assert_eq!(cfg.lr_at(0), 0.02);
        assert!((cfg.lr_at(100) - 0.017).abs() < 1e-15);
        assert!((cfg.lr_at(250) - 0.02 * 0.85 * 0.85).abs() < 1e-15);
        assert!((cfg.lr_at(250) - 0.014450).abs() < 1e-6);
    }

    #[test]
    fn zero_decoder_predicts_zero() {
        let mut model = FnoModel::init(tiny_hyper(), 1).unwrap();
        model.decoder = Tensor::zeros(&[model.hyper.channels(), 1]);
        let ds = tiny_dataset(2);
        let x = batch_input(&ds, &[0, 1]).unwrap();
        let pred = model.forward(&x).unwrap();
        assert!(pred.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_frames_get_identical_predictions() {
        let model = FnoModel::init(tiny_hyper(), 1).unwrap();
        let ds = tiny_dataset(2);
        let x = batch_input(&ds, &[0, 0]).unwrap();
        let pred = model.forward(&x).unwrap();
        let s = pred.shape().to_vec(); // [5, 3, 3, 2]
        let d = pred.data();
        for block in 0..s[0] * s[1] * s[2] {
            assert_eq!(d[block * 2], d[block * 2 + 1]);
        }
    }

    #[test]
    fn forward_shapes() {
        let model = FnoModel::init(tiny_hyper(), 7).unwrap();
        let ds = tiny_dataset(3);
        let x = batch_input(&ds, &[0, 1, 2]).unwrap();
        assert_eq!(x.shape(), &[5, 3, N_CHANNELS, 3, 7]);
        let pred = model.forward(&x).unwrap();
        assert_eq!(pred.shape(), &[5, 3, 3, 3]);
        assert!(pred.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn overfit_single_sample() {
        // Teacher-student: the target is produced by a model of the same
        // architecture, so a perfect fit exists.
        let mut ds = tiny_dataset(1);
        let teacher = FnoModel::init(tiny_hyper(), 77).unwrap();
        let x = batch_input(&ds, &[0]).unwrap();
        let y = teacher.forward(&x).unwrap(); // [5, 3, 3, 1]
        for (dst, &v) in ds.samples[0].target.iter_mut().zip(y.data()) {
            *dst = v as f32;
        }
        let model = FnoModel::init(tiny_hyper(), 5).unwrap();
        let mut cfg = small_cfg(1000);
        cfg.batch_size = 1;
        // The absolute-error loss gives sign-like gradients, so descent is
        // steady but slow; require a large reduction, not a perfect fit.
        cfg.decay_interval = 200;
        cfg.decay_base = 0.7;
        let (_, history) = train_fno(model, &ds, cfg).unwrap();
        let last = history.last().unwrap().train_loss;
        assert!(last < 0.05, "final loss {last}");
        // Eventually monotone in a 50-episode moving average.
        let avg = |range: core::ops::Range<usize>| {
            history[range.clone()].iter().map(|r| r.train_loss).sum::<f64>()
                / range.len() as f64
        };
        assert!(avg(950..1000) < 0.2 * avg(0..50));
    }

    #[test]
    fn training_is_deterministic() {
        let ds = tiny_dataset(4);
        let a = train_fno(FnoModel::init(tiny_hyper(), 5).unwrap(), &ds, small_cfg(10)).unwrap();
        let b = train_fno(FnoModel::init(tiny_hyper(), 5).unwrap(), &ds, small_cfg(10)).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn dnn_zero_final_layer_predicts_zero() {
        let mut model = DnnBaseline::init(6, 4, 2).unwrap();
        let last = model.layers.last_mut().unwrap();
        last.0 = Tensor::zeros(last.0.shape());
        last.1 = Tensor::zeros(last.1.shape());
        let x = Tensor::from_vec(&[2, 6], (0..12).map(|i| i as f64).collect()).unwrap();
        let pred = model.forward(&x).unwrap();
        assert!(pred.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dnn_training_deterministic_and_learns() {
        let ds = tiny_dataset(2);
        let mut cfg = small_cfg(200);
        cfg.lr0 = 0.005;
        let dim_in = 3 * N_CHANNELS * 4;
        let dim_out = 5 * 3 * 3;
        let a = train_dnn(DnnBaseline::init(dim_in, dim_out, 9).unwrap(), &ds, cfg.clone())
            .unwrap();
        let b = train_dnn(DnnBaseline::init(dim_in, dim_out, 9).unwrap(), &ds, cfg).unwrap();
        assert_eq!(a.1, b.1);
        assert!(a.1.last().unwrap().train_loss < a.1[0].train_loss);
    }

    #[test]
    fn batch_loss_is_permutation_invariant() {
        let ds = tiny_dataset(3);
        let model = FnoModel::init(tiny_hyper(), 11).unwrap();
        let loss_of = |idx: &[usize]| {
            let x = batch_input(&ds, idx).unwrap();
            let t = batch_target(&ds, idx).unwrap();
            mape(&model.forward(&x).unwrap(), &t, 3).unwrap()
        };
        let a = loss_of(&[0, 1, 2]);
        let b = loss_of(&[2, 0, 1]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = Dataset {
            meta: DatasetMeta::identity(0.03, 1.0 / 600.0, 4, 5, 3),
            samples: Vec::new(),
        };
        let mut trainer =
            FnoTrainer::new(FnoModel::init(tiny_hyper(), 1).unwrap(), small_cfg(1)).unwrap();
        assert!(matches!(
            trainer.train_episode(&ds),
            Err(CoreError::EmptyInput(_))
        ));
    }

    #[test]
    fn spectral_conv_identity_and_zero() {
        // Zero spectral weights: layer output reduces to the pointwise path.
        let hyper = tiny_hyper();
        let modes = hyper.modes().unwrap();
        let c = hyper.channels();
        let wshape = spectral_weight_shape(&modes, c);
        let zero_w = ComplexTensor::zeros(&wshape);
        let ds = tiny_dataset(1);
        let x = batch_input(&ds, &[0]).unwrap();
        let (out, _) = spectral_conv_forward(&x, &zero_w, &modes).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));

        // Identity weights with full kmax reproduce the input.
        let full = KeptModes::new([4, 4, 4], [2, 2, 2]).unwrap();
        let cw = 3;
        let fshape = spectral_weight_shape(&full, cw);
        let mut re = vec![0.0; fshape.iter().product()];
        let im = vec![0.0; re.len()];
        let n_modes = fshape[0] * fshape[1] * fshape[2];
        for m in 0..n_modes {
            for i in 0..cw {
                re[(m * cw + i) * cw + i] = 1.0;
            }
        }
        let ident = ComplexTensor::from_parts(&fshape, re, im).unwrap();
        let data: Vec<f64> = (0..4 * 4 * 4 * cw).map(|k| ((k * 29) % 17) as f64 - 8.0).collect();
        let xin = Tensor::from_vec(&[4, 4, 4, cw], data).unwrap();
        let (out, _) = spectral_conv_forward(&xin, &ident, &full).unwrap();
        let err = xin
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "identity spectral conv error {err}");
    }
}
