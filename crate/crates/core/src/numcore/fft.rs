//! One-dimensional discrete Fourier transforms of arbitrary length.
//!
//! Composite lengths go through a recursive mixed-radix Cooley-Tukey
//! decomposition; small prime lengths fall back to the direct sum and
//! large primes to Bluestein's chirp-z algorithm, so any axis length is
//! legal. Sign convention: forward uses `e^{-2*pi*i*...}`, the inverse
//! carries the `1/n` normalization.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // resolves float math in the no_std build
use num_traits::Float;
use num_complex::Complex64;

/// Largest prime length handled by the direct O(n^2) sum.
const NAIVE_PRIME_CUTOFF: usize = 31;

#[inline]
fn twiddle(num: u64, den: u64) -> Complex64 {
    // exp(-2 pi i num / den), with num reduced mod den for accuracy.
    let angle = -2.0 * PI * ((num % den) as f64) / (den as f64);
    let (s, c) = angle.sin_cos();
    Complex64::new(c, s)
}

fn smallest_prime_factor(n: usize) -> usize {
    if n % 2 == 0 {
        return 2;
    }
    let mut p = 3;
    while p * p <= n {
        if n % p == 0 {
            return p;
        }
        p += 2;
    }
    n
}

/// Direct O(n^2) DFT. Also serves as the independent oracle in tests.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len() as u64;
    (0..x.len())
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                acc += v * twiddle(k as u64 * j as u64, n);
            }
            acc
        })
        .collect()
}

/// Forward DFT of arbitrary length (no normalization).
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    let p = smallest_prime_factor(n);
    if p == n {
        if n <= NAIVE_PRIME_CUTOFF {
            return naive_dft(x);
        }
        return bluestein(x);
    }
    mixed_radix(x, p)
}

/// Inverse DFT with `1/n` normalization.
pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    if n <= 1 {
        return x.to_vec();
    }
    let conj: Vec<Complex64> = x.iter().map(|c| c.conj()).collect();
    let inv_n = 1.0 / n as f64;
    fft(&conj).iter().map(|c| c.conj() * inv_n).collect()
}

fn mixed_radix(x: &[Complex64], p: usize) -> Vec<Complex64> {
    let n = x.len();
    let m = n / p;
    // Decimation in time: transform the p interleaved subsequences.
    let mut sub = Vec::with_capacity(p);
    for l in 0..p {
        let xs: Vec<Complex64> = (0..m).map(|j| x[j * p + l]).collect();
        sub.push(fft(&xs));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut t = vec![Complex64::new(0.0, 0.0); p];
    for k1 in 0..m {
        for (l, ys) in sub.iter().enumerate() {
            t[l] = ys[k1] * twiddle((k1 * l) as u64, n as u64);
        }
        // p-point DFT across the branches (p is a small prime).
        for k2 in 0..p {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, &tl) in t.iter().enumerate() {
                acc += tl * twiddle((k2 * l) as u64, p as u64);
            }
            out[k1 + k2 * m] = acc;
        }
    }
    out
}

fn fft_pow2(x: &mut [Complex64], inverse: bool) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            x.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let (s, c) = ang.sin_cos();
        let wlen = Complex64::new(c, s);
        let mut i = 0;
        while i < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = x[i + k];
                let v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wlen;
            }
            i += len;
        }
        len <<= 1;
    }
    if inverse {
        let inv_n = 1.0 / n as f64;
        for v in x.iter_mut() {
            *v *= inv_n;
        }
    }
}

fn bluestein(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let m = (2 * n - 1).next_power_of_two();
    // chirp[j] = exp(-i pi j^2 / n), with j^2 taken mod 2n.
    let chirp: Vec<Complex64> = (0..n)
        .map(|j| {
            let q = ((j as u64) * (j as u64)) % (2 * n as u64);
            let angle = -PI * q as f64 / n as f64;
            let (s, c) = angle.sin_cos();
            Complex64::new(c, s)
        })
        .collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..n {
        a[j] = x[j] * chirp[j];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for j in 1..n {
        b[j] = chirp[j].conj();
        b[m - j] = chirp[j].conj();
    }
    fft_pow2(&mut a, false);
    fft_pow2(&mut b, false);
    for (av, bv) in a.iter_mut().zip(b.iter()) {
        *av *= *bv;
    }
    fft_pow2(&mut a, true);
    (0..n).map(|k| chirp[k] * a[k]).collect()
}
