//! Tape-based reverse-mode differentiation over tensor primitives.
//!
//! The tape records the forward pass of the operator primitives the models
//! are built from (affine maps, ReLU, batch normalization, the 3D Fourier
//! transforms, spectral convolution, and the percentage-error loss).
//! Gradients of a scalar node are obtained by replaying the records in
//! reverse; complex intermediate values carry adjoints on their real and
//! imaginary parts independently, so the adjoint of a linear transform is
//! its conjugate-transpose transform.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // resolves float math in the no_std build
use num_traits::Float;
use num_complex::Complex64;

use super::spectral::{self, KeptModes};
use super::tensor::{ComplexTensor, Tensor};
use crate::error::{CoreError, Result};

pub type ValueId = usize;

#[derive(Debug, Clone)]
enum Val {
    R(Tensor),
    C(ComplexTensor),
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(ValueId, ValueId),
    MatmulLast {
        x: ValueId,
        w: ValueId,
    },
    BiasLast {
        x: ValueId,
        b: ValueId,
    },
    Relu(ValueId),
    BatchNorm {
        x: ValueId,
        gamma: ValueId,
        beta: ValueId,
        eps: f64,
        /// Statistics actually used in the forward pass (batch statistics
        /// in training mode, running statistics otherwise).
        mean: Vec<f64>,
        var: Vec<f64>,
        training: bool,
    },
    Dft3(ValueId),
    Idft3(ValueId),
    ModeFilter {
        x: ValueId,
        kmax: [usize; 3],
    },
    SpectralConv {
        x: ValueId,
        w: ValueId,
        modes: KeptModes,
        /// Input spectrum on the closed kept-mode set, saved for the
        /// weight gradient.
        spectrum: ComplexTensor,
    },
    Reshape(ValueId),
    SliceAxis {
        x: ValueId,
        axis: usize,
        start: usize,
        len: usize,
    },
    Sum(ValueId),
    ComplexNormSq(ValueId),
    Mape {
        pred: ValueId,
        target: Tensor,
        batch_axis: usize,
    },
}

struct Node {
    val: Val,
    op: Op,
}

/// Gradients of every tape value with respect to a scalar loss node.
pub struct Gradients {
    grads: Vec<Option<Val>>,
}

impl Gradients {
    /// Gradient of a real-valued node; `None` if disconnected from the loss.
    pub fn real(&self, id: ValueId) -> Option<&Tensor> {
        match self.grads.get(id)? {
            Some(Val::R(t)) => Some(t),
            _ => None,
        }
    }

    /// Gradient of a complex-valued node (adjoints of re and im parts).
    pub fn complex(&self, id: ValueId) -> Option<&ComplexTensor> {
        match self.grads.get(id)? {
            Some(Val::C(t)) => Some(t),
            _ => None,
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, val: Val, op: Op) -> ValueId {
        self.nodes.push(Node { val, op });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, t: Tensor) -> ValueId {
        self.push(Val::R(t), Op::Leaf)
    }

    pub fn leaf_complex(&mut self, t: ComplexTensor) -> ValueId {
        self.push(Val::C(t), Op::Leaf)
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        match &self.nodes[id].val {
            Val::R(t) => t,
            Val::C(_) => panic!("value {id} is complex"),
        }
    }

    pub fn value_complex(&self, id: ValueId) -> &ComplexTensor {
        match &self.nodes[id].val {
            Val::C(t) => t,
            Val::R(_) => panic!("value {id} is real"),
        }
    }

    /// Batch statistics recorded by a training-mode batch-norm node.
    pub fn bn_batch_stats(&self, id: ValueId) -> Option<(&[f64], &[f64])> {
        match &self.nodes[id].op {
            Op::BatchNorm {
                mean,
                var,
                training: true,
                ..
            } => Some((mean, var)),
            _ => None,
        }
    }

    // -- forward primitives -------------------------------------------------

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::from_vec(ta.shape(), data)?;
        Ok(self.push(Val::R(out), Op::Add(a, b)))
    }

    pub fn matmul_last(&mut self, x: ValueId, w: ValueId) -> Result<ValueId> {
        let out = matmul_last(self.value(x), self.value(w))?;
        Ok(self.push(Val::R(out), Op::MatmulLast { x, w }))
    }

    pub fn bias_last(&mut self, x: ValueId, b: ValueId) -> Result<ValueId> {
        let out = bias_last(self.value(x), self.value(b))?;
        Ok(self.push(Val::R(out), Op::BiasLast { x, b }))
    }

    pub fn relu(&mut self, x: ValueId) -> Result<ValueId> {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| v.max(0.0)).collect();
        let out = Tensor::from_vec(t.shape(), data)?;
        Ok(self.push(Val::R(out), Op::Relu(x)))
    }

    /// Batch normalization over the last (channel) axis.
    ///
    /// In training mode the statistics are computed over all non-channel
    /// axes of this batch and saved on the node (see [`Tape::bn_batch_stats`]);
    /// otherwise the provided running statistics are used.
    pub fn batch_norm(
        &mut self,
        x: ValueId,
        gamma: ValueId,
        beta: ValueId,
        running: Option<(&[f64], &[f64])>,
        eps: f64,
    ) -> Result<ValueId> {
        let t = self.value(x);
        let c = *t
            .shape()
            .last()
            .ok_or_else(|| CoreError::ShapeMismatch("batch_norm on scalar".into()))?;
        let g = self.value(gamma);
        let b = self.value(beta);
        if g.len() != c || b.len() != c {
            return Err(CoreError::ShapeMismatch(format!(
                "batch_norm params len {}/{} vs {c} channels",
                g.len(),
                b.len()
            )));
        }
        let rows = t.len() / c;
        let (mean, var, training) = match running {
            Some((m, v)) => (m.to_vec(), v.to_vec(), false),
            None => {
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for r in 0..rows {
                    for ch in 0..c {
                        mean[ch] += t.data()[r * c + ch];
                    }
                }
                for m in mean.iter_mut() {
                    *m /= rows as f64;
                }
                for r in 0..rows {
                    for ch in 0..c {
                        let d = t.data()[r * c + ch] - mean[ch];
                        var[ch] += d * d;
                    }
                }
                for v in var.iter_mut() {
                    *v /= rows as f64;
                }
                (mean, var, true)
            }
        };
        let mut out = vec![0.0; t.len()];
        for r in 0..rows {
            for ch in 0..c {
                let inv_std = 1.0 / (var[ch] + eps).sqrt();
                let xhat = (t.data()[r * c + ch] - mean[ch]) * inv_std;
                out[r * c + ch] = g.data()[ch] * xhat + b.data()[ch];
            }
        }
        let out = Tensor::from_vec(t.shape(), out)?;
        Ok(self.push(
            Val::R(out),
            Op::BatchNorm {
                x,
                gamma,
                beta,
                eps,
                mean,
                var,
                training,
            },
        ))
    }

    pub fn dft3(&mut self, x: ValueId) -> Result<ValueId> {
        let out = spectral::dft3(self.value(x))?;
        Ok(self.push(Val::C(out), Op::Dft3(x)))
    }

    pub fn idft3(&mut self, x: ValueId) -> Result<ValueId> {
        let out = spectral::idft3(self.value_complex(x))?;
        Ok(self.push(Val::R(out), Op::Idft3(x)))
    }

    pub fn mode_filter(&mut self, x: ValueId, kmax: [usize; 3]) -> Result<ValueId> {
        let out = spectral::mode_filter(self.value_complex(x), kmax)?;
        Ok(self.push(Val::C(out), Op::ModeFilter { x, kmax }))
    }

    /// Spectral convolution: project onto kept modes, contract channels
    /// with complex weights (conjugate-paired at negated modes), and
    /// reconstruct a real tensor.
    pub fn spectral_conv(
        &mut self,
        x: ValueId,
        w: ValueId,
        modes: &KeptModes,
    ) -> Result<ValueId> {
        let (out, spectrum) =
            spectral_conv_forward(self.value(x), self.value_complex(w), modes)?;
        Ok(self.push(
            Val::R(out),
            Op::SpectralConv {
                x,
                w,
                modes: modes.clone(),
                spectrum,
            },
        ))
    }

    pub fn reshape(&mut self, x: ValueId, shape: &[usize]) -> Result<ValueId> {
        let out = self.value(x).reshaped(shape)?;
        Ok(self.push(Val::R(out), Op::Reshape(x)))
    }

    pub fn slice_axis(
        &mut self,
        x: ValueId,
        axis: usize,
        start: usize,
        len: usize,
    ) -> Result<ValueId> {
        let out = slice_axis(self.value(x), axis, start, len)?;
        Ok(self.push(Val::R(out), Op::SliceAxis { x, axis, start, len }))
    }

    pub fn sum(&mut self, x: ValueId) -> Result<ValueId> {
        let s: f64 = self.value(x).data().iter().sum();
        Ok(self.push(Val::R(Tensor::scalar(s)), Op::Sum(x)))
    }

    pub fn complex_norm_sq(&mut self, x: ValueId) -> Result<ValueId> {
        let t = self.value_complex(x);
        let s: f64 = t
            .re()
            .iter()
            .zip(t.im())
            .map(|(r, i)| r * r + i * i)
            .sum();
        Ok(self.push(Val::R(Tensor::scalar(s)), Op::ComplexNormSq(x)))
    }

    /// Mean absolute percentage error against a constant target, averaged
    /// over the samples along `batch_axis`.
    pub fn mape_loss(
        &mut self,
        pred: ValueId,
        target: &Tensor,
        batch_axis: usize,
    ) -> Result<ValueId> {
        let loss = mape(self.value(pred), target, batch_axis)?;
        Ok(self.push(
            Val::R(Tensor::scalar(loss)),
            Op::Mape {
                pred,
                target: target.clone(),
                batch_axis,
            },
        ))
    }

    // -- reverse pass -------------------------------------------------------

    /// Reverse-mode gradients of the scalar `loss` node for every tape
    /// value. Values the loss does not depend on get no gradient entry.
    pub fn backward(&self, loss: ValueId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(CoreError::ShapeMismatch(
                "backward requires a scalar loss node".into(),
            ));
        }
        let mut grads: Vec<Option<Val>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Val::R(Tensor::scalar(1.0)));
        for id in (0..=loss).rev() {
            let Some(gval) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &gval, &mut grads)?;
            grads[id] = Some(gval);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, id: ValueId, gval: &Val, grads: &mut [Option<Val>]) -> Result<()> {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let g = expect_real(gval);
                accumulate_real(grads, *a, g.data(), g.shape());
                accumulate_real(grads, *b, g.data(), g.shape());
            }
            Op::MatmulLast { x, w } => {
                let g = expect_real(gval);
                let xt = self.value(*x);
                let wt = self.value(*w);
                let (gx, gw) = matmul_last_backward(xt, wt, g);
                accumulate_real(grads, *x, gx.data(), gx.shape());
                accumulate_real(grads, *w, gw.data(), gw.shape());
            }
            Op::BiasLast { x, b } => {
                let g = expect_real(gval);
                let bt = self.value(*b);
                let c = bt.len();
                let mut gb = vec![0.0; c];
                for (i, &v) in g.data().iter().enumerate() {
                    gb[i % c] += v;
                }
                accumulate_real(grads, *x, g.data(), g.shape());
                accumulate_real(grads, *b, &gb, bt.shape());
            }
            Op::Relu(x) => {
                let g = expect_real(gval);
                let xt = self.value(*x);
                let gx: Vec<f64> = xt
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                accumulate_real(grads, *x, &gx, xt.shape());
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                eps,
                mean,
                var,
                training,
            } => {
                let g = expect_real(gval);
                let xt = self.value(*x);
                let gt = self.value(*gamma);
                let c = gt.len();
                let rows = xt.len() / c;
                let mut ggamma = vec![0.0; c];
                let mut gbeta = vec![0.0; c];
                let mut gx = vec![0.0; xt.len()];
                for ch in 0..c {
                    let inv_std = 1.0 / (var[ch] + eps).sqrt();
                    let mut sum_dy = 0.0;
                    let mut sum_dy_xhat = 0.0;
                    for r in 0..rows {
                        let p = r * c + ch;
                        let xhat = (xt.data()[p] - mean[ch]) * inv_std;
                        sum_dy += g.data()[p];
                        sum_dy_xhat += g.data()[p] * xhat;
                    }
                    ggamma[ch] = sum_dy_xhat;
                    gbeta[ch] = sum_dy;
                    let gch = gt.data()[ch];
                    if *training {
                        let n = rows as f64;
                        for r in 0..rows {
                            let p = r * c + ch;
                            let xhat = (xt.data()[p] - mean[ch]) * inv_std;
                            gx[p] = gch * inv_std / n
                                * (n * g.data()[p] - sum_dy - xhat * sum_dy_xhat);
                        }
                    } else {
                        for r in 0..rows {
                            let p = r * c + ch;
                            gx[p] = gch * inv_std * g.data()[p];
                        }
                    }
                }
                accumulate_real(grads, *x, &gx, xt.shape());
                accumulate_real(grads, *gamma, &ggamma, gt.shape());
                accumulate_real(grads, *beta, &gbeta, gt.shape());
            }
            Op::Dft3(x) => {
                // Adjoint of the forward transform: real part of the
                // unnormalized conjugate-sign transform of the cotangent.
                let g = expect_complex(gval);
                let xt = self.value(*x);
                let n: f64 = (xt.shape()[0] * xt.shape()[1] * xt.shape()[2]) as f64;
                let inv = spectral::transform3_complex(g, true, true);
                let gx: Vec<f64> = inv.re().iter().map(|&v| v * n).collect();
                accumulate_real(grads, *x, &gx, xt.shape());
            }
            Op::Idft3(x) => {
                // Adjoint of the normalized inverse: forward transform of
                // the real cotangent, scaled by 1/(n1*n2*n3).
                let g = expect_real(gval);
                let xt = self.value_complex(*x);
                let n: f64 = (xt.shape()[0] * xt.shape()[1] * xt.shape()[2]) as f64;
                let gc = ComplexTensor::from_parts(
                    g.shape(),
                    g.data().to_vec(),
                    vec![0.0; g.len()],
                )?;
                let mut fwd = spectral::transform3_complex(&gc, false, false);
                let (re, im) = fwd.parts_mut();
                for v in re.iter_mut() {
                    *v /= n;
                }
                for v in im.iter_mut() {
                    *v /= n;
                }
                accumulate_complex(grads, *x, &fwd);
            }
            Op::ModeFilter { x, kmax } => {
                let g = expect_complex(gval);
                let gx = spectral::mode_filter(g, *kmax)?;
                accumulate_complex(grads, *x, &gx);
            }
            Op::SpectralConv {
                x,
                w,
                modes,
                spectrum,
            } => {
                let g = expect_real(gval);
                let wt = self.value_complex(*w);
                let xt = self.value(*x);
                let (gx, gw) = spectral_conv_backward(g, wt, spectrum, modes, xt.shape())?;
                accumulate_real(grads, *x, gx.data(), gx.shape());
                accumulate_complex(grads, *w, &gw);
            }
            Op::Reshape(x) => {
                let g = expect_real(gval);
                let xt = self.value(*x);
                accumulate_real(grads, *x, g.data(), xt.shape());
            }
            Op::SliceAxis {
                x,
                axis,
                start,
                len,
            } => {
                let g = expect_real(gval);
                let xt = self.value(*x);
                let gx = slice_axis_scatter(g, xt.shape(), *axis, *start, *len);
                accumulate_real(grads, *x, gx.data(), xt.shape());
            }
            Op::Sum(x) => {
                let g = expect_real(gval).item();
                let xt = self.value(*x);
                let gx = vec![g; xt.len()];
                accumulate_real(grads, *x, &gx, xt.shape());
            }
            Op::ComplexNormSq(x) => {
                let g = expect_real(gval).item();
                let xt = self.value_complex(*x);
                let re: Vec<f64> = xt.re().iter().map(|&v| 2.0 * g * v).collect();
                let im: Vec<f64> = xt.im().iter().map(|&v| 2.0 * g * v).collect();
                let gc = ComplexTensor::from_parts(xt.shape(), re, im)?;
                accumulate_complex(grads, *x, &gc);
            }
            Op::Mape {
                pred,
                target,
                batch_axis,
            } => {
                let g = expect_real(gval).item();
                let pt = self.value(*pred);
                let gp = mape_backward(pt, target, *batch_axis, g)?;
                accumulate_real(grads, *pred, gp.data(), gp.shape());
            }
        }
        Ok(())
    }
}

fn shape_err(op: &str, a: &[usize], b: &[usize]) -> CoreError {
    CoreError::ShapeMismatch(format!("{op}: {a:?} vs {b:?}"))
}

fn expect_real(v: &Val) -> &Tensor {
    match v {
        Val::R(t) => t,
        Val::C(_) => panic!("expected real cotangent"),
    }
}

fn expect_complex(v: &Val) -> &ComplexTensor {
    match v {
        Val::C(t) => t,
        Val::R(_) => panic!("expected complex cotangent"),
    }
}

fn accumulate_real(grads: &mut [Option<Val>], id: ValueId, g: &[f64], shape: &[usize]) {
    match &mut grads[id] {
        Some(Val::R(acc)) => {
            for (a, &v) in acc.data_mut().iter_mut().zip(g) {
                *a += v;
            }
        }
        Some(Val::C(_)) => panic!("mixed real/complex gradient for value {id}"),
        slot @ None => {
            *slot = Some(Val::R(
                Tensor::from_vec(shape, g.to_vec()).expect("gradient shape"),
            ));
        }
    }
}

fn accumulate_complex(grads: &mut [Option<Val>], id: ValueId, g: &ComplexTensor) {
    match &mut grads[id] {
        Some(Val::C(acc)) => {
            let (re, im) = acc.parts_mut();
            for (a, &v) in re.iter_mut().zip(g.re()) {
                *a += v;
            }
            for (a, &v) in im.iter_mut().zip(g.im()) {
                *a += v;
            }
        }
        Some(Val::R(_)) => panic!("mixed real/complex gradient for value {id}"),
        slot @ None => {
            *slot = Some(Val::C(g.clone()));
        }
    }
}

// ---------------------------------------------------------------------------
// Kernels, shared by the tape and the inference path.
// ---------------------------------------------------------------------------

/// Contract the last axis of `x` with a `[K, M]` matrix.
pub fn matmul_last(x: &Tensor, w: &Tensor) -> Result<Tensor> {
    if w.shape().len() != 2 {
        return Err(CoreError::ShapeMismatch("matmul_last: weight must be 2D".into()));
    }
    let (k, m) = (w.shape()[0], w.shape()[1]);
    let Some(&xk) = x.shape().last() else {
        return Err(CoreError::ShapeMismatch("matmul_last on scalar".into()));
    };
    if xk != k {
        return Err(shape_err("matmul_last", x.shape(), w.shape()));
    }
    let rows = x.len() / k;
    let mut out_shape = x.shape().to_vec();
    *out_shape.last_mut().unwrap() = m;
    let mut out = vec![0.0; rows * m];
    let xd = x.data();
    let wd = w.data();
    for r in 0..rows {
        let xrow = &xd[r * k..(r + 1) * k];
        let orow = &mut out[r * m..(r + 1) * m];
        for (kk, &xv) in xrow.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wrow = &wd[kk * m..(kk + 1) * m];
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += xv * wv;
            }
        }
    }
    Tensor::from_vec(&out_shape, out)
}

fn matmul_last_backward(x: &Tensor, w: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let (k, m) = (w.shape()[0], w.shape()[1]);
    let rows = x.len() / k;
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; k * m];
    let xd = x.data();
    let wd = w.data();
    let gd = g.data();
    for r in 0..rows {
        let grow = &gd[r * m..(r + 1) * m];
        let xrow = &xd[r * k..(r + 1) * k];
        let gxrow = &mut gx[r * k..(r + 1) * k];
        for kk in 0..k {
            let wrow = &wd[kk * m..(kk + 1) * m];
            let mut acc = 0.0;
            for (gv, wv) in grow.iter().zip(wrow) {
                acc += gv * wv;
            }
            gxrow[kk] = acc;
            let xv = xrow[kk];
            if xv != 0.0 {
                let gwrow = &mut gw[kk * m..(kk + 1) * m];
                for (gwv, gv) in gwrow.iter_mut().zip(grow) {
                    *gwv += xv * gv;
                }
            }
        }
    }
    (
        Tensor::from_vec(x.shape(), gx).expect("grad shape"),
        Tensor::from_vec(w.shape(), gw).expect("grad shape"),
    )
}

/// Broadcast-add a bias over the last axis.
pub fn bias_last(x: &Tensor, b: &Tensor) -> Result<Tensor> {
    let Some(&c) = x.shape().last() else {
        return Err(CoreError::ShapeMismatch("bias_last on scalar".into()));
    };
    if b.len() != c {
        return Err(shape_err("bias_last", x.shape(), b.shape()));
    }
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v + b.data()[i % c])
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// ReLU activation.
pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

/// Batch normalization over the last axis with fixed statistics.
pub fn batch_norm_fixed(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mean: &[f64],
    var: &[f64],
    eps: f64,
) -> Result<Tensor> {
    let Some(&c) = x.shape().last() else {
        return Err(CoreError::ShapeMismatch("batch_norm on scalar".into()));
    };
    if gamma.len() != c || beta.len() != c || mean.len() != c || var.len() != c {
        return Err(CoreError::ShapeMismatch("batch_norm stats length".into()));
    }
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let ch = i % c;
            gamma.data()[ch] * (v - mean[ch]) * inv_std[ch] + beta.data()[ch]
        })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Slice `len` entries starting at `start` along `axis`.
pub fn slice_axis(x: &Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
    if axis >= x.shape().len() || start + len > x.shape()[axis] {
        return Err(CoreError::ShapeMismatch(format!(
            "slice axis {axis} [{start}, {start}+{len}) of shape {:?}",
            x.shape()
        )));
    }
    let n = x.shape()[axis];
    let stride: usize = x.shape()[axis + 1..].iter().product();
    let blocks: usize = x.shape()[..axis].iter().product();
    let mut out_shape = x.shape().to_vec();
    out_shape[axis] = len;
    let mut out = Vec::with_capacity(blocks * len * stride);
    for bl in 0..blocks {
        let base = (bl * n + start) * stride;
        out.extend_from_slice(&x.data()[base..base + len * stride]);
    }
    Tensor::from_vec(&out_shape, out)
}

fn slice_axis_scatter(
    g: &Tensor,
    full_shape: &[usize],
    axis: usize,
    start: usize,
    len: usize,
) -> Tensor {
    let n = full_shape[axis];
    let stride: usize = full_shape[axis + 1..].iter().product();
    let blocks: usize = full_shape[..axis].iter().product();
    let mut out = Tensor::zeros(full_shape);
    for bl in 0..blocks {
        let src = bl * len * stride;
        let dst = (bl * n + start) * stride;
        out.data_mut()[dst..dst + len * stride]
            .copy_from_slice(&g.data()[src..src + len * stride]);
    }
    out
}

/// Mean absolute percentage error (Eq.-(8)-style): the batch average of
/// `||pred_i - target_i||_1 / ||target_i||_1` over samples along
/// `batch_axis`.
pub fn mape(pred: &Tensor, target: &Tensor, batch_axis: usize) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(shape_err("mape", pred.shape(), target.shape()));
    }
    if batch_axis >= pred.shape().len() {
        return Err(CoreError::ShapeMismatch(format!(
            "mape batch axis {batch_axis} of shape {:?}",
            pred.shape()
        )));
    }
    let h = pred.shape()[batch_axis];
    let stride: usize = pred.shape()[batch_axis + 1..].iter().product();
    let blocks: usize = pred.shape()[..batch_axis].iter().product();
    let mut loss = 0.0;
    for i in 0..h {
        let mut err = 0.0;
        let mut norm = 0.0;
        for bl in 0..blocks {
            let base = (bl * h + i) * stride;
            for o in 0..stride {
                let t = target.data()[base + o];
                err += (pred.data()[base + o] - t).abs();
                norm += t.abs();
            }
        }
        if norm == 0.0 {
            return Err(CoreError::DegenerateTarget { sample: i });
        }
        loss += err / norm;
    }
    Ok(loss / h as f64)
}

fn mape_backward(
    pred: &Tensor,
    target: &Tensor,
    batch_axis: usize,
    g: f64,
) -> Result<Tensor> {
    let h = pred.shape()[batch_axis];
    let stride: usize = pred.shape()[batch_axis + 1..].iter().product();
    let blocks: usize = pred.shape()[..batch_axis].iter().product();
    let mut out = Tensor::zeros(pred.shape());
    for i in 0..h {
        let mut norm = 0.0;
        for bl in 0..blocks {
            let base = (bl * h + i) * stride;
            for o in 0..stride {
                norm += target.data()[base + o].abs();
            }
        }
        if norm == 0.0 {
            return Err(CoreError::DegenerateTarget { sample: i });
        }
        let scale = g / (h as f64 * norm);
        for bl in 0..blocks {
            let base = (bl * h + i) * stride;
            for o in 0..stride {
                let d = pred.data()[base + o] - target.data()[base + o];
                out.data_mut()[base + o] = if d > 0.0 {
                    scale
                } else if d < 0.0 {
                    -scale
                } else {
                    0.0
                };
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Spectral convolution kernel.
// ---------------------------------------------------------------------------

struct ModeGeometry {
    /// Closed kept frequencies per axis.
    freqs: [Vec<usize>; 3],
    /// Position of the negated frequency within each axis list.
    neg_pos: [Vec<usize>; 3],
}

impl ModeGeometry {
    fn new(modes: &KeptModes) -> Self {
        let dims = modes.dims();
        let mut freqs: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut neg_pos: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for a in 0..3 {
            let list = modes.axis_indices_closed(a);
            neg_pos[a] = list
                .iter()
                .map(|&f| {
                    let nf = (dims[a] - f) % dims[a];
                    list.iter().position(|&x| x == nf).expect("closed set")
                })
                .collect();
            freqs[a] = list;
        }
        ModeGeometry { freqs, neg_pos }
    }

    fn counts(&self) -> [usize; 3] {
        [self.freqs[0].len(), self.freqs[1].len(), self.freqs[2].len()]
    }
}

/// Weight-tensor shape for a spectral convolution with `c` channels:
/// closed kept-mode counts on the three transform axes, then `[c, c]`.
pub fn spectral_weight_shape(modes: &KeptModes, c: usize) -> Vec<usize> {
    let geo = ModeGeometry::new(modes);
    let s = geo.counts();
    vec![s[0], s[1], s[2], c, c]
}

/// Forward spectral convolution. Returns the real output together with
/// the kept-mode input spectrum (saved by the tape for the weight
/// gradient).
pub fn spectral_conv_forward(
    x: &Tensor,
    w: &ComplexTensor,
    modes: &KeptModes,
) -> Result<(Tensor, ComplexTensor)> {
    if x.shape().len() < 4 {
        return Err(CoreError::ShapeMismatch(
            "spectral_conv input needs [3 transform axes, ..., channels]".into(),
        ));
    }
    let c = *x.shape().last().unwrap();
    let want = spectral_weight_shape(modes, c);
    if w.shape() != want.as_slice() {
        return Err(CoreError::ShapeMismatch(format!(
            "spectral weights {:?}, expected {:?}",
            w.shape(),
            want
        )));
    }
    let geo = ModeGeometry::new(modes);
    let s = geo.counts();
    let spectrum = spectral::partial_dft3(x, modes);
    // Rows of length c: everything between the mode axes and the channel axis.
    let batch: usize = spectrum.shape()[3..spectrum.shape().len() - 1].iter().product();
    let mut out_spec = ComplexTensor::zeros(spectrum.shape());
    let mode_stride = batch * c;
    let mut o = vec![Complex64::new(0.0, 0.0); c];
    for i0 in 0..s[0] {
        for i1 in 0..s[1] {
            for i2 in 0..s[2] {
                let m = (i0 * s[1] + i1) * s[2] + i2;
                let neg = (geo.neg_pos[0][i0] * s[1] + geo.neg_pos[1][i1]) * s[2]
                    + geo.neg_pos[2][i2];
                if neg < m {
                    continue; // conjugate partner of an earlier mode
                }
                let self_paired = neg == m;
                let wbase = m * c * c;
                for b in 0..batch {
                    let sbase = m * mode_stride + b * c;
                    for (i, ov) in o.iter_mut().enumerate() {
                        let mut acc = Complex64::new(0.0, 0.0);
                        let wrow = wbase + i * c;
                        for v in 0..c {
                            let wre = w.re()[wrow + v];
                            let wim = w.im()[wrow + v];
                            let sre = spectrum.re()[sbase + v];
                            let sim = spectrum.im()[sbase + v];
                            acc.re += wre * sre - wim * sim;
                            acc.im += wre * sim + wim * sre;
                        }
                        *ov = acc;
                    }
                    let (ore, oim) = out_spec.parts_mut();
                    if self_paired {
                        for (i, ov) in o.iter().enumerate() {
                            ore[sbase + i] = ov.re;
                        }
                    } else {
                        let nbase = neg * mode_stride + b * c;
                        for (i, ov) in o.iter().enumerate() {
                            ore[sbase + i] = ov.re;
                            oim[sbase + i] = ov.im;
                            ore[nbase + i] = ov.re;
                            oim[nbase + i] = -ov.im;
                        }
                    }
                }
            }
        }
    }
    let out = spectral::partial_idft3(&out_spec, modes);
    Ok((out, spectrum))
}

fn spectral_conv_backward(
    g: &Tensor,
    w: &ComplexTensor,
    spectrum: &ComplexTensor,
    modes: &KeptModes,
    x_shape: &[usize],
) -> Result<(Tensor, ComplexTensor)> {
    let geo = ModeGeometry::new(modes);
    let s = geo.counts();
    let c = *x_shape.last().unwrap();
    let dims = modes.dims();
    let n_total = (dims[0] * dims[1] * dims[2]) as f64;
    // Adjoint of partial_idft3: kept-mode projection of the cotangent,
    // scaled by the inverse normalization.
    let mut tbar = spectral::partial_dft3(g, modes);
    {
        let (re, im) = tbar.parts_mut();
        for v in re.iter_mut() {
            *v /= n_total;
        }
        for v in im.iter_mut() {
            *v /= n_total;
        }
    }
    let batch: usize = spectrum.shape()[3..spectrum.shape().len() - 1].iter().product();
    let mode_stride = batch * c;
    let mut sbar = ComplexTensor::zeros(spectrum.shape());
    let mut wbar = ComplexTensor::zeros(w.shape());
    let mut obar = vec![Complex64::new(0.0, 0.0); c];
    for i0 in 0..s[0] {
        for i1 in 0..s[1] {
            for i2 in 0..s[2] {
                let m = (i0 * s[1] + i1) * s[2] + i2;
                let neg = (geo.neg_pos[0][i0] * s[1] + geo.neg_pos[1][i1]) * s[2]
                    + geo.neg_pos[2][i2];
                if neg < m {
                    continue;
                }
                let self_paired = neg == m;
                let wbase = m * c * c;
                for b in 0..batch {
                    let sbase = m * mode_stride + b * c;
                    let nbase = neg * mode_stride + b * c;
                    for (i, ov) in obar.iter_mut().enumerate() {
                        if self_paired {
                            // Forward kept only Re(o) at this mode.
                            *ov = Complex64::new(tbar.re()[sbase + i], 0.0);
                        } else {
                            // T[m] = o and T[neg] = conj(o).
                            *ov = Complex64::new(
                                tbar.re()[sbase + i] + tbar.re()[nbase + i],
                                tbar.im()[sbase + i] - tbar.im()[nbase + i],
                            );
                        }
                    }
                    let (sre, sim) = sbar.parts_mut();
                    for (i, ov) in obar.iter().enumerate() {
                        let wrow = wbase + i * c;
                        for v in 0..c {
                            let wre = w.re()[wrow + v];
                            let wim = w.im()[wrow + v];
                            // sbar[v] += conj(W[i,v]) * obar[i]
                            sre[sbase + v] += wre * ov.re + wim * ov.im;
                            sim[sbase + v] += wre * ov.im - wim * ov.re;
                        }
                    }
                    let (wre_b, wim_b) = wbar.parts_mut();
                    for (i, ov) in obar.iter().enumerate() {
                        let wrow = wbase + i * c;
                        for v in 0..c {
                            let xre = spectrum.re()[sbase + v];
                            let xim = spectrum.im()[sbase + v];
                            // wbar[i,v] += obar[i] * conj(S[v])
                            wre_b[wrow + v] += ov.re * xre + ov.im * xim;
                            wim_b[wrow + v] += ov.im * xre - ov.re * xim;
                        }
                    }
                }
            }
        }
    }
    // Adjoint of partial_dft3: synthesis from the kept-mode cotangent,
    // undoing the inverse normalization applied by partial_idft3.
    let mut gx = spectral::partial_idft3(&sbar, modes);
    for v in gx.data_mut().iter_mut() {
        *v *= n_total;
    }
    Ok((gx, wbar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[2, 2], vec![1.0, -2.0, 3.0, 4.0]).unwrap());
        let loss = tape.sum(x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.real(x).unwrap().data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn mape_hand_values() {
        // pred = target -> 0
        let t = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        assert_eq!(mape(&t, &t, 0).unwrap(), 0.0);
        // pred = 2*target, H = 1 -> 1.0
        let p2 = Tensor::from_vec(&[1, 2], vec![2.0, 4.0]).unwrap();
        assert!((mape(&p2, &t, 0).unwrap() - 1.0).abs() < 1e-15);
        // target = (1, 2), pred = (1.5, 2) -> 0.5/3
        let p = Tensor::from_vec(&[1, 2], vec![1.5, 2.0]).unwrap();
        assert!((mape(&p, &t, 0).unwrap() - 0.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mape_rejects_zero_norm_target() {
        let t = Tensor::from_vec(&[1, 2], vec![0.0, 0.0]).unwrap();
        let p = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            mape(&p, &t, 0),
            Err(CoreError::DegenerateTarget { sample: 0 })
        );
    }

    #[test]
    fn disconnected_leaf_has_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.0));
        let y = tape.leaf(Tensor::scalar(2.0));
        let loss = tape.sum(x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.real(y).is_none());
    }

    #[test]
    fn matmul_shapes_checked() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[2, 3]));
        let w = tape.leaf(Tensor::zeros(&[4, 5]));
        assert!(tape.matmul_last(x, w).is_err());
    }
}
