//! Multi-dimensional DFTs over the first three tensor axes and low-pass
//! mode bookkeeping.
//!
//! The first three axes of a tensor are the transform axes; any remaining
//! axes are treated as batch/channel and transformed independently. The
//! forward transform carries no normalization, the inverse divides by the
//! product of the three transform lengths.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // resolves float math in the no_std build
use num_traits::Float;
use num_complex::Complex64;

use super::fft::{fft, ifft};
use super::tensor::{strides_for, ComplexTensor, Tensor};
use crate::error::{CoreError, Result};

/// Maximum imaginary residue tolerated by [`idft3`] before the spectrum is
/// rejected as non-Hermitian.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// Kept-mode bookkeeping for a truncation `kmax` on three transform axes.
///
/// Per axis of length `n` with truncation `k`, the kept indices are the `k`
/// lowest nonnegative frequencies `0..k` and the `k` highest indices
/// `n-k..n` (the negative frequencies), `2k` in total.
#[derive(Debug, Clone, PartialEq)]
pub struct KeptModes {
    dims: [usize; 3],
    kmax: [usize; 3],
}

impl KeptModes {
    pub fn new(dims: [usize; 3], kmax: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if kmax[a] == 0 || 2 * kmax[a] > dims[a] {
                return Err(CoreError::ShapeMismatch(format!(
                    "kmax {:?} invalid for transform dims {:?} (need 1 <= 2k <= n)",
                    kmax, dims
                )));
            }
        }
        Ok(KeptModes { dims, kmax })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn kmax(&self) -> [usize; 3] {
        self.kmax
    }

    /// Kept frequency indices along `axis`: `0..k` plus `n-k..n`.
    pub fn axis_indices(&self, axis: usize) -> Vec<usize> {
        let (n, k) = (self.dims[axis], self.kmax[axis]);
        (0..k).chain(n - k..n).collect()
    }

    /// Kept indices closed under frequency negation.
    ///
    /// Negating index `f` gives `(n - f) % n`. The kept set `{0..k} ∪
    /// {n-k..n}` is closed under negation except for the single index
    /// `n-k` (whose negation `k` is not kept) whenever `2k < n`; that
    /// index is dropped here so that a spectrum synthesized on this set
    /// with conjugate pairing inverts to an exactly real signal.
    pub fn axis_indices_closed(&self, axis: usize) -> Vec<usize> {
        let (n, k) = (self.dims[axis], self.kmax[axis]);
        if 2 * k == n {
            self.axis_indices(axis)
        } else {
            (0..k).chain(n - k + 1..n).collect()
        }
    }

    /// True if the 3-axis frequency index is in the kept set.
    pub fn contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| {
            let (n, k) = (self.dims[a], self.kmax[a]);
            idx[a] < k || idx[a] >= n - k
        })
    }
}

fn check_transform_axes(shape: &[usize]) -> Result<()> {
    if shape.len() < 3 {
        return Err(CoreError::ShapeMismatch(format!(
            "need at least 3 axes for a 3D transform, got shape {shape:?}"
        )));
    }
    if shape.iter().any(|&n| n == 0) {
        return Err(CoreError::ShapeMismatch(format!(
            "zero-length axis in shape {shape:?}"
        )));
    }
    Ok(())
}

/// Apply a full-length 1D transform along `axis` of a complex buffer.
fn transform_axis(re: &mut [f64], im: &mut [f64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let blocks: usize = shape[..axis].iter().product();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for b in 0..blocks {
        for o in 0..stride {
            let base = b * n * stride + o;
            for (t, v) in line.iter_mut().enumerate() {
                let p = base + t * stride;
                *v = Complex64::new(re[p], im[p]);
            }
            let out = if inverse { ifft(&line) } else { fft(&line) };
            for (t, v) in out.iter().enumerate() {
                let p = base + t * stride;
                re[p] = v.re;
                im[p] = v.im;
            }
        }
    }
}

/// Complex-to-complex 3D transform over the first three axes, used for
/// the transform adjoints. With `inverse` and `normalize` the result
/// matches [`idft3`] without the realness check; with `inverse` alone the
/// `1/(n1*n2*n3)` factor is omitted (conjugate-sign forward transform).
pub(crate) fn transform3_complex(
    x: &ComplexTensor,
    inverse: bool,
    normalize: bool,
) -> ComplexTensor {
    let mut re = x.re().to_vec();
    let mut im = x.im().to_vec();
    for axis in 0..3 {
        transform_axis(&mut re, &mut im, x.shape(), axis, inverse);
    }
    if inverse && !normalize {
        let n = (x.shape()[0] * x.shape()[1] * x.shape()[2]) as f64;
        for v in re.iter_mut() {
            *v *= n;
        }
        for v in im.iter_mut() {
            *v *= n;
        }
    }
    ComplexTensor::from_parts(x.shape(), re, im).expect("same shape")
}

/// Forward 3D DFT over the first three axes; trailing axes are batch.
pub fn dft3(x: &Tensor) -> Result<ComplexTensor> {
    check_transform_axes(x.shape())?;
    let mut re = x.data().to_vec();
    let mut im = vec![0.0; re.len()];
    for axis in 0..3 {
        transform_axis(&mut re, &mut im, x.shape(), axis, false);
    }
    ComplexTensor::from_parts(x.shape(), re, im)
}

/// Inverse 3D DFT with `1/(n1*n2*n3)` normalization.
///
/// The spectrum must be Hermitian to within [`IMAG_RESIDUE_TOL`]; the
/// imaginary residue is checked and discarded.
pub fn idft3(x: &ComplexTensor) -> Result<Tensor> {
    check_transform_axes(x.shape())?;
    let mut re = x.re().to_vec();
    let mut im = x.im().to_vec();
    for axis in 0..3 {
        transform_axis(&mut re, &mut im, x.shape(), axis, true);
    }
    let max_imag = im.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_imag > IMAG_RESIDUE_TOL {
        return Err(CoreError::NonRealInverse { max_imag });
    }
    Tensor::from_vec(x.shape(), re)
}

/// Zero all modes outside the kept set of `kmax` on the first three axes.
pub fn mode_filter(x: &ComplexTensor, kmax: [usize; 3]) -> Result<ComplexTensor> {
    check_transform_axes(x.shape())?;
    let dims = [x.shape()[0], x.shape()[1], x.shape()[2]];
    let modes = KeptModes::new(dims, kmax)?;
    let rest: usize = x.shape()[3..].iter().product();
    let mut out = ComplexTensor::zeros(x.shape());
    let strides = strides_for(x.shape());
    let (ore, oim) = out.parts_mut();
    for f0 in modes.axis_indices(0) {
        for f1 in modes.axis_indices(1) {
            for f2 in modes.axis_indices(2) {
                let base = f0 * strides[0] + f1 * strides[1] + f2 * strides[2];
                ore[base..base + rest].copy_from_slice(&x.re()[base..base + rest]);
                oim[base..base + rest].copy_from_slice(&x.im()[base..base + rest]);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pruned transforms over a kept-mode set.
//
// When a spectrum is known to be zero outside a small kept set, both the
// projection onto the kept modes and the reconstruction from them can skip
// the full transform. Results are identical to dft3 -> filter -> idft3
// restricted to the same modes.
// ---------------------------------------------------------------------------

fn dft_matrix(n: usize, freqs: &[usize], sign: f64) -> Vec<Complex64> {
    let mut m = Vec::with_capacity(freqs.len() * n);
    for &f in freqs {
        for t in 0..n {
            let angle = sign * 2.0 * PI * ((f * t) % n) as f64 / n as f64;
            let (s, c) = angle.sin_cos();
            m.push(Complex64::new(c, s));
        }
    }
    m
}

/// Contract `axis` (length `n`) of a complex buffer against a `[F, n]`
/// matrix, producing length `F` along that axis.
fn project_axis(
    re: &[f64],
    im: &[f64],
    shape: &mut Vec<usize>,
    axis: usize,
    mat: &[Complex64],
    f_len: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let blocks: usize = shape[..axis].iter().product();
    let out_len = blocks * f_len * stride;
    let mut ore = vec![0.0; out_len];
    let mut oim = vec![0.0; out_len];
    for b in 0..blocks {
        for a in 0..f_len {
            let row = &mat[a * n..(a + 1) * n];
            let obase = (b * f_len + a) * stride;
            for (t, w) in row.iter().enumerate() {
                let ibase = (b * n + t) * stride;
                for o in 0..stride {
                    let xr = re[ibase + o];
                    let xi = im[ibase + o];
                    ore[obase + o] += w.re * xr - w.im * xi;
                    oim[obase + o] += w.re * xi + w.im * xr;
                }
            }
        }
    }
    shape[axis] = f_len;
    (ore, oim)
}

/// Project a real tensor onto the kept modes of the first three axes.
///
/// Output shape: kept counts on the three transform axes, batch axes
/// unchanged. Mode order along each axis follows `modes.axis_indices_closed`.
pub fn partial_dft3(x: &Tensor, modes: &KeptModes) -> ComplexTensor {
    let mut shape = x.shape().to_vec();
    let mut re = x.data().to_vec();
    let mut im = vec![0.0; re.len()];
    for axis in 0..3 {
        let freqs = modes.axis_indices_closed(axis);
        let mat = dft_matrix(shape[axis], &freqs, -1.0);
        let (nre, nim) = project_axis(&re, &im, &mut shape, axis, &mat, freqs.len());
        re = nre;
        im = nim;
    }
    ComplexTensor::from_parts(&shape, re, im).expect("internal shape bookkeeping")
}

/// Reconstruct a real tensor from coefficients on the closed kept-mode set,
/// including the `1/(n1*n2*n3)` inverse normalization.
///
/// The caller must supply coefficients whose implicit full spectrum is
/// Hermitian (conjugate values at negated modes); the imaginary part then
/// cancels and is dropped.
pub fn partial_idft3(coeff: &ComplexTensor, modes: &KeptModes) -> Tensor {
    let dims = modes.dims();
    let mut shape = coeff.shape().to_vec();
    let mut re = coeff.re().to_vec();
    let mut im = coeff.im().to_vec();
    let norm = 1.0 / (dims[0] * dims[1] * dims[2]) as f64;
    // Expand in reverse axis order so strides stay consistent.
    for axis in (0..3).rev() {
        let freqs = modes.axis_indices_closed(axis);
        let n = dims[axis];
        // Transposed synthesis matrix: out[t] = sum_a coeff[a] e^{+2pi i f_a t/n}.
        let mat = dft_matrix(n, &freqs, 1.0);
        let f_len = freqs.len();
        let stride: usize = shape[axis + 1..].iter().product();
        let blocks: usize = shape[..axis].iter().product();
        let out_len = blocks * n * stride;
        let mut ore = vec![0.0; out_len];
        let mut oim = vec![0.0; out_len];
        for b in 0..blocks {
            for (a, _) in freqs.iter().enumerate() {
                let ibase = (b * f_len + a) * stride;
                for t in 0..n {
                    let w = mat[a * n + t];
                    let obase = (b * n + t) * stride;
                    for o in 0..stride {
                        let xr = re[ibase + o];
                        let xi = im[ibase + o];
                        ore[obase + o] += w.re * xr - w.im * xi;
                        oim[obase + o] += w.re * xi + w.im * xr;
                    }
                }
            }
        }
        shape[axis] = n;
        re = ore;
        im = oim;
    }
    for v in re.iter_mut() {
        *v *= norm;
    }
    Tensor::from_vec(&shape, re).expect("internal shape bookkeeping")
}
