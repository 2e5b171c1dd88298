mod common;

use common::*;
use cpr_core::measurement::{mask_fields, mask_lift, measurement_vector};
use cpr_core::{
    build_masks, measure_vectors, recover_phases, split_result, Complex64, ComplexSignal, MaskConstants,
    RetrievalOptions, SamplingSet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lifted(rng: &mut ChaCha8Rng, l: usize, min_first: f64) -> ComplexSignal {
    let mut y = random_vector(rng, l + 1).into_vec();
    if y[0].norm() < min_first {
        y[0] = Complex64::from_polar(min_first + rng.random::<f64>(), y[0].arg());
    }
    ComplexSignal::new(y).unwrap()
}

#[test]
fn exact_for_all_lengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for l in [1, 4, 8, 64, 511] {
        for _ in 0..25 {
            let y = random_lifted(&mut rng, l, 1e-6);
            let r = recover_phases(&measure_vectors(&y).unwrap(), &RetrievalOptions::default()).unwrap();
            let err = phase_free_error(y.as_slice(), r.y_tilde.as_slice());
            assert!(err < 1e-10, "L={l}: {err}");
            assert_eq!(r.y_tilde[0].im, 0.0);
            assert!(r.y_tilde[0].re >= 0.0);
            assert!(!r.clamped);
            assert!(r.residual < 1e-12);
        }
    }
}

#[test]
fn magnitude_estimates_agree() {
    // |ỹ[l+1]|² from the cross term and from the sum equations coincide.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let y = random_lifted(&mut rng, 64, 0.1);
    let b = measure_vectors(&y).unwrap();
    let plain = recover_phases(&b, &RetrievalOptions::default()).unwrap();
    let renorm = recover_phases(
        &b,
        &RetrievalOptions {
            renormalize: true,
            ..Default::default()
        },
    )
    .unwrap();
    for (p, q) in plain.y_tilde.as_slice().iter().zip(renorm.y_tilde.as_slice()) {
        assert!((p.norm_sqr() - q.norm_sqr()).abs() < 1e-10);
    }
}

#[test]
fn worked_examples() {
    let k = MaskConstants::new();
    let (a2, b2) = (k.alpha * k.alpha, k.beta.norm_sqr());
    let b = cpr_core::IntensityMeasurements::new(2, cpr_core::SensingMode::Gaussian, None, 0.0, 0, vec![a2, b2, a2, b2])
        .unwrap();
    let r = recover_phases(&b, &RetrievalOptions::default()).unwrap();
    assert!(dist(r.y_tilde.as_slice(), &[c(1.0, 0.0), c(0.0, 0.0)]) < 1e-12);

    let r3 = 1.0 / 3f64.sqrt();
    let b = cpr_core::IntensityMeasurements::new(
        2,
        cpr_core::SensingMode::Gaussian,
        None,
        0.0,
        0,
        vec![1.0 - r3, 1.0 - r3, 1.0 + r3, 1.0 + r3],
    )
    .unwrap();
    let r = recover_phases(&b, &RetrievalOptions::default()).unwrap();
    assert!(dist(r.y_tilde.as_slice(), &[c(1.0, 0.0), c(1.0, 0.0)]) < 1e-12);
}

#[test]
fn split_then_rejoin() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let y = random_lifted(&mut rng, 9, 0.5);
    let r = recover_phases(&measure_vectors(&y).unwrap(), &RetrievalOptions::default()).unwrap();
    let n = 49;
    let (x1, rest) = split_result(&r, n);
    let mut joined = vec![x1 / (n as f64).sqrt()];
    joined.extend_from_slice(rest.as_slice());
    assert!(dist(&joined, r.y_tilde.as_slice()) < 1e-15);
}

#[test]
fn structural_identities() {
    let k = MaskConstants::new();
    assert!((k.alpha * k.alpha + k.beta.norm_sqr() - 1.0).abs() < 1e-15);
    assert!((k.alpha * k.beta.norm() - 1.0 / 6f64.sqrt()).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..100 {
        let n = 8 + trial % 40;
        let l = 1 + rng.random_range(0..n - 1);
        let x = random_vector(&mut rng, n);
        let set = SamplingSet::random(n, l, &mut rng).unwrap();

        // Energy per frequency.
        let y = mask_lift(&x, &set).unwrap();
        let b = measure_vectors(&y).unwrap();
        for j in 1..=l {
            let total: f64 = (1..=4).map(|s| b.get(s, j)).sum();
            let expect = 2.0 * (y[0].norm_sqr() + y[j].norm_sqr());
            assert!((total - expect).abs() < 1e-12 * expect.max(1.0));
        }

        // Mask path against inner products with the measurement vectors; the
        // fields agree up to conjugation, the intensities exactly.
        let fields = mask_fields(&x, &build_masks(n).unwrap(), &set).unwrap();
        for s in 1..=4 {
            for j in 1..=l {
                let psi = measurement_vector(s, j, l + 1).unwrap();
                let ip: Complex64 = y.as_slice().iter().zip(psi.as_slice()).map(|(p, q)| p * q.conj()).sum();
                let f = fields[(s - 1) * l + j - 1];
                assert!((f - ip.conj()).norm() < 1e-10, "field mismatch at s={s}, l={j}");
                assert!((f.norm_sqr() - b.get(s, j)).abs() < 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_exactness(seed in any::<u64>(), l in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_lifted(&mut rng, l, 1e-3);
        let r = recover_phases(&measure_vectors(&y).unwrap(), &RetrievalOptions::default()).unwrap();
        prop_assert!(phase_free_error(y.as_slice(), r.y_tilde.as_slice()) < 1e-10);
        prop_assert_eq!(r.y_tilde[0].im, 0.0);
    }

    #[test]
    fn phase_convention_under_noise(seed in any::<u64>(), sigma in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = random_lifted(&mut rng, 16, 0.8);
        let b = cpr_core::measurement::measure_vectors_noisy(&y, &mut rng, sigma).unwrap();
        if let Ok(r) = recover_phases(&b, &RetrievalOptions::default()) {
            prop_assert_eq!(r.y_tilde[0].im, 0.0);
            prop_assert!(r.y_tilde[0].re > 0.0);
            prop_assert!(r.residual.is_finite());
        }
    }
}
