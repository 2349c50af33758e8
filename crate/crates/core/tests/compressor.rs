//! Quantization round trip, symmetry and idempotence over random tensors,
//! plus the accuracy ratio on the bundled network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teda_core::compressor::{
    accuracy_ratio, container, dequantize, quantize, unify_shape, unify_tensor, Layout, Tensor,
    TensorPayload,
};
use teda_core::fixtures;

/// Sizes and magnitudes drawn log-uniformly; signs mixed.
fn random_tensor(rng: &mut impl Rng, max_len: usize) -> Tensor {
    let len =
        (10f64.powf(rng.random_range(0.0..(max_len as f64).log10())) as usize).clamp(1, max_len);
    let top: f64 = rng.random_range(-6.0..6.0);
    let spread: f64 = rng.random_range(0.0..12.0);
    let data: Vec<f32> = (0..len)
        .map(|_| {
            let mag = 10f64.powf(rng.random_range((top - spread).max(-6.0)..=top)) as f32;
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::new([1, 1, 1, len], data).unwrap()
}

fn ulp(x: f32) -> f64 {
    let a = x.abs();
    (f32::from_bits(a.to_bits() + 1) - a) as f64
}

/// Half-away-from-zero rounding of `x / scale`, written out by hand.
fn expected_code(x: f32, max_abs: f64) -> i16 {
    let r = x as f64 * 32767.0 / max_abs;
    let m = (r.abs() + 0.5).floor().min(32767.0);
    (if r < 0.0 { -m } else { m }) as i16
}

#[test]
fn round_trip_error_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut tensors: Vec<Tensor> = (0..40).map(|_| random_tensor(&mut rng, 20_000)).collect();
    tensors.push(random_tensor(&mut rng, 1_000_000));
    for t in &tensors {
        let q = quantize(t).unwrap();
        let max_abs = t.data().iter().fold(0f64, |m, &v| m.max(v.abs() as f64));
        assert_eq!(q.scale(), max_abs / 32767.0);
        let back = dequantize(&q);
        for ((&x, &y), &c) in t.data().iter().zip(back.data()).zip(q.codes()) {
            assert_eq!(c, expected_code(x, max_abs));
            let err = (x as f64 - y as f64).abs();
            assert!(
                err <= q.scale() / 2.0 + ulp(x),
                "{x} -> {y}, scale {}",
                q.scale()
            );
        }
    }
}

#[test]
fn negation_and_idempotence() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..40 {
        let t = random_tensor(&mut rng, 5_000);
        let q = quantize(&t).unwrap();
        let n = quantize(&t.neg()).unwrap();
        assert_eq!(n.scale(), q.scale());
        assert!(q.codes().iter().zip(n.codes()).all(|(a, b)| *a == -*b));

        let again = quantize(&dequantize(&q)).unwrap();
        assert_eq!(again.codes(), q.codes());
        let a = container::to_bytes(&TensorPayload::Quantized(q.clone())).unwrap();
        let b = container::to_bytes(&TensorPayload::Quantized(again)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn hand_evaluated_codes() {
    let q = quantize(&Tensor::row(vec![2.0, -1.0, 0.5]).unwrap()).unwrap();
    assert_eq!(q.codes(), &[32767, -16384, 8192]);
    assert_eq!(q.scale(), 2.0 / 32767.0);
}

#[test]
fn shape_unification() {
    assert_eq!(unify_shape(&[7], Layout::Vector).unwrap().0, [1, 1, 1, 7]);
    assert_eq!(
        unify_shape(&[480, 640, 3], Layout::HwcImage).unwrap().0,
        [1, 3, 480, 640]
    );
    assert_eq!(
        unify_shape(&[1, 3, 8, 8], Layout::AlreadyNchw).unwrap().0,
        [1, 3, 8, 8]
    );
    assert!(unify_shape(&[1, 2, 3, 4, 5], Layout::AlreadyNchw).is_err());

    // (H, W, C) payload reordered channel-first by hand
    let (h, w, c) = (3, 4, 3);
    let raw: Vec<f32> = (0..h * w * c).map(|i| i as f32).collect();
    let t = unify_tensor(&[h, w, c], Layout::HwcImage, &raw).unwrap();
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                assert_eq!(t.data()[(ch * h + y) * w + x], raw[(y * w + x) * c + ch]);
            }
        }
    }
}

#[test]
fn bundled_network_keeps_its_accuracy() {
    let net = fixtures::reference_mlp();
    let quant = teda_core::policy::TinyMlp::from_named(&net.to_quantized_named().unwrap()).unwrap();
    let inputs = fixtures::reference_inputs();
    let truth = fixtures::reference_ground_truth().unwrap();
    let r = accuracy_ratio(
        &truth,
        &fixtures::forward_all(&net, &inputs).unwrap(),
        &fixtures::forward_all(&quant, &inputs).unwrap(),
    )
    .unwrap();
    assert_eq!(r.trials, 25);
    assert!(r.ratio >= 0.99, "{r:?}");
}

#[test]
fn ratio_by_hand() {
    let r = accuracy_ratio(&[vec![0.0]], &[vec![0.1]], &[vec![0.2]]).unwrap();
    assert!((r.e0 - 0.01).abs() < 1e-15 && (r.e1 - 0.04).abs() < 1e-15);
    assert!((r.ratio - 0.25).abs() < 1e-12);
}
