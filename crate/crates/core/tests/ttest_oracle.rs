//! The t-test is checked against a p-value computed by direct numerical
//! integration of the Student t density, which shares no code with the
//! incomplete-beta route under test.

use chainstory_core::analytics::{t_two_sided_p, two_sample_t_test, TTestVariant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "support/t_oracle.rs"]
mod oracle;

fn sample(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(2..=25);
    let centre = rng.random_range(-5.0..5.0);
    let spread = rng.random_range(0.1..10.0);
    (0..n).map(|_| centre + spread * rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn oracle_reproduces_reference_value() {
    // reference for [1,2,3] vs [4,5,6]: t = -3/sqrt(2/3), df = 4
    let t = -3.0 / (2.0f64 / 3.0).sqrt();
    assert!((oracle::two_sided_p(t, 4.0) - 0.021_311_641_128_756_7).abs() < 1e-12);
}

#[test]
fn pooled_example_matches_oracle() {
    let r = two_sample_t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], TTestVariant::StudentPooled).unwrap();
    assert!((r.t_statistic + 3.674_234_614_174_767).abs() < 1e-12);
    assert_eq!(r.degrees_of_freedom, 4.0);
    assert!((r.p_value - 0.021_311_641_128_756_7).abs() < 1e-12);
    assert!((r.p_value - oracle::two_sided_p(r.t_statistic, 4.0)).abs() < 1e-9);
}

#[test]
fn hundred_random_pairs_agree_with_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (a, b) = (sample(&mut rng), sample(&mut rng));
        let variant = if i % 2 == 0 {
            TTestVariant::StudentPooled
        } else {
            TTestVariant::Welch
        };
        let r = two_sample_t_test(&a, &b, variant).unwrap();
        let want = oracle::two_sided_p(r.t_statistic, r.degrees_of_freedom);
        let diff = (r.p_value - want).abs();
        worst = worst.max(diff);
        assert!(
            diff < 1e-9,
            "pair {i}: t={} df={} p={} oracle={want}",
            r.t_statistic,
            r.degrees_of_freedom,
            r.p_value
        );
    }
    eprintln!("worst |p - oracle| = {worst:e}");
}

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 2..20)
}

proptest! {
    #[test]
    fn swapping_samples_negates_t(a in samples(), b in samples()) {
        for variant in [TTestVariant::StudentPooled, TTestVariant::Welch] {
            let ab = two_sample_t_test(&a, &b, variant).unwrap();
            let ba = two_sample_t_test(&b, &a, variant).unwrap();
            prop_assert_eq!(ab.t_statistic, -ba.t_statistic);
            prop_assert_eq!(ab.p_value, ba.p_value);
            prop_assert_eq!(ab.degrees_of_freedom, ba.degrees_of_freedom);
        }
    }

    #[test]
    fn positive_rescaling_preserves_t_and_p(a in samples(), b in samples(), c in 1e-3f64..1e3) {
        for variant in [TTestVariant::StudentPooled, TTestVariant::Welch] {
            let base = two_sample_t_test(&a, &b, variant).unwrap();
            let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
            let scaled = two_sample_t_test(&sa, &sb, variant).unwrap();
            prop_assert!((base.t_statistic - scaled.t_statistic).abs() <= 1e-12 * base.t_statistic.abs().max(1.0));
            prop_assert!((base.p_value - scaled.p_value).abs() <= 1e-12);
        }
    }

    #[test]
    fn larger_t_gives_smaller_p(df in 1.0f64..60.0, t in 0.0f64..20.0, gap in 0.01f64..5.0) {
        prop_assert!(t_two_sided_p(t + gap, df) < t_two_sided_p(t, df));
        prop_assert!(t_two_sided_p(-(t + gap), df) < t_two_sided_p(t, df));
    }

    #[test]
    fn p_is_a_probability(a in samples(), b in samples()) {
        let r = two_sample_t_test(&a, &b, TTestVariant::Welch).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }
}
