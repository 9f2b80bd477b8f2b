//! Property-based checks: transform linearity, the Parseval adjoint
//! identity through the tape, loss permutation invariance, and envelope
//! bounds.

use gridfno_core::evalmetrics::envelope;
use gridfno_core::numcore::autodiff::{mape, Tape};
use gridfno_core::numcore::{dft3, Tensor};
use proptest::prelude::*;

fn dim() -> impl Strategy<Value = usize> {
    1usize..5
}

fn tensor3(extra: usize) -> impl Strategy<Value = Tensor> {
    (dim(), dim(), dim()).prop_flat_map(move |(a, b, c)| {
        let n = a * b * c * extra;
        proptest::collection::vec(-10.0f64..10.0, n).prop_map(move |data| {
            Tensor::from_vec(&[a, b, c, extra], data).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// dft3(a x + b y) = a dft3(x) + b dft3(y).
    #[test]
    fn dft3_linearity(
        x in tensor3(2),
        scale_a in -3.0f64..3.0,
        scale_b in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        // Second operand with the same shape, derived deterministically.
        let y = Tensor::from_vec(
            x.shape(),
            x.data()
                .iter()
                .enumerate()
                .map(|(i, v)| v * 0.37 + ((i as u64 + seed) % 7) as f64 - 3.0)
                .collect(),
        )
        .unwrap();
        let combo = Tensor::from_vec(
            x.shape(),
            x.data()
                .iter()
                .zip(y.data())
                .map(|(a, b)| scale_a * a + scale_b * b)
                .collect(),
        )
        .unwrap();
        let fx = dft3(&x).unwrap();
        let fy = dft3(&y).unwrap();
        let fc = dft3(&combo).unwrap();
        for i in 0..fc.len() {
            prop_assert!((fc.re()[i] - scale_a * fx.re()[i] - scale_b * fy.re()[i]).abs() < 1e-10);
            prop_assert!((fc.im()[i] - scale_a * fx.im()[i] - scale_b * fy.im()[i]).abs() < 1e-10);
        }
    }

    /// Parseval adjoint identity: the gradient of ||DFT(x)||^2 is exactly
    /// 2 N x, because the adjoint of the unnormalized transform composed
    /// with itself is N times the identity.
    #[test]
    fn dft3_parseval_adjoint(x in tensor3(1)) {
        let n: f64 = x.shape()[..3].iter().product::<usize>() as f64;
        let mut tape = Tape::new();
        let xi = tape.leaf(x.clone());
        let f = tape.dft3(xi).unwrap();
        let loss = tape.complex_norm_sq(f).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.real(xi).unwrap();
        for (gv, xv) in g.data().iter().zip(x.data()) {
            prop_assert!((gv - 2.0 * n * xv).abs() < 1e-9 * (1.0 + xv.abs() * n));
        }
    }

    /// The percentage-error loss does not depend on sample order.
    #[test]
    fn mape_permutation_invariant(
        vals in proptest::collection::vec((-5.0f64..5.0, 0.5f64..5.0), 2..20),
        rot in 1usize..5,
    ) {
        let n = vals.len();
        let pred: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let target: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let p = Tensor::from_vec(&[n, 1], pred.clone()).unwrap();
        let t = Tensor::from_vec(&[n, 1], target.clone()).unwrap();
        let base = mape(&p, &t, 0).unwrap();
        let rot = rot % n;
        let rp: Vec<f64> = (0..n).map(|i| pred[(i + rot) % n]).collect();
        let rt: Vec<f64> = (0..n).map(|i| target[(i + rot) % n]).collect();
        let p2 = Tensor::from_vec(&[n, 1], rp).unwrap();
        let t2 = Tensor::from_vec(&[n, 1], rt).unwrap();
        let rotated = mape(&p2, &t2, 0).unwrap();
        prop_assert!((base - rotated).abs() < 1e-12 * (1.0 + base));
    }

    /// The envelope bounds every member series pointwise.
    #[test]
    fn envelope_bounds_members(
        set in proptest::collection::vec(
            proptest::collection::vec(-100.0f64..100.0, 8),
            1..7,
        ),
    ) {
        let refs: Vec<&[f64]> = set.iter().map(|s| s.as_slice()).collect();
        let (lo, hi) = envelope(&refs).unwrap();
        for s in &set {
            for (i, &v) in s.iter().enumerate() {
                prop_assert!(lo[i] <= v && v <= hi[i]);
            }
        }
    }
}
