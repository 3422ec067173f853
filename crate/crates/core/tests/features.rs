use loopgrade_core::features::{
    csv_header, extract_features_unsettled, popular_subset, FEATURE_COUNT, FEATURE_NAMES,
};
use loopgrade_core::process::RejectionResponse;
use proptest::prelude::*;

fn features(dt: f64, r: Vec<f64>) -> [f64; FEATURE_COUNT] {
    extract_features_unsettled(&RejectionResponse::from_samples(dt, r, 1.0, 1.0, true))
        .unwrap()
        .to_f64()
}

fn sampled(dt: f64, horizon: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = (horizon / dt).round() as usize;
    (0..=n).map(|i| f(i as f64 * dt)).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Time exponent of each feature under `t -> a t`.
const TIME_POWER: [i32; FEATURE_COUNT] = [
    0, 1, 0, 1, 0, 1, 1, 1, 1, 2, 3, 1, 1, 0, 0, 1, 1, 1, 1, 0, 1, 1, 0, 1, 1, 1, 1, -1, -1, 0,
];

/// Zero-based indices of F5, F14, F15, F20, F23, F30.
const AMPLITUDE_INVARIANT: [usize; 6] = [4, 13, 14, 19, 22, 29];

fn assert_ratio_identities(f: &[f64; FEATURE_COUNT]) {
    let q = |n: f64, d: f64| if d == 0.0 { 0.0 } else { n / d };
    for (ratio, num, den) in [(4, 2, 0), (13, 12, 11), (19, 18, 17), (22, 20, 21), (29, 27, 28)] {
        assert!(
            close(f[ratio], q(f[num], f[den]), 1e-9),
            "F{} = {} but F{}/F{} = {}",
            ratio + 1,
            f[ratio],
            num + 1,
            den + 1,
            q(f[num], f[den])
        );
    }
}

#[test]
fn damped_sine_matches_closed_form() {
    let f = features(0.001, sampled(0.001, 40.0, |t| (-0.2 * t).exp() * t.sin()));
    let t_star = (1.0f64 / 0.2).atan();
    assert!((f[1] - t_star).abs() < 0.005);
    assert!((f[0] - (-0.2 * t_star).exp() * t_star.sin()).abs() < 1e-5);
    assert!((f[14] - (-0.2 * 2.0 * std::f64::consts::PI).exp()).abs() < 0.005);
    assert!((f[15] - 2.0 * std::f64::consts::PI).abs() < 0.01);
    assert_ratio_identities(&f);
}

#[test]
fn sine_pulse_matches_analytic_integrals() {
    use std::f64::consts::PI;
    let f = features(0.001, sampled(0.001, 10.0, |t| if t <= PI { t.sin() } else { 0.0 }));
    assert!((f[0] - 1.0).abs() < 1e-6);
    assert!((f[1] - PI / 2.0).abs() < 1e-3);
    assert_eq!((f[2], f[4]), (0.0, 0.0));
    assert!((f[7] - 2.0).abs() < 0.002);
    assert!((f[8] - PI / 2.0).abs() < 0.002);
    assert!((f[17] - PI).abs() < 0.01);
    assert_eq!((f[18], f[19]), (0.0, 0.0));
    let fv = extract_features_unsettled(&RejectionResponse::from_samples(
        0.001,
        sampled(0.001, 10.0, |t| if t <= PI { t.sin() } else { 0.0 }),
        1.0,
        1.0,
        true,
    ))
    .unwrap();
    let p = popular_subset(&fv);
    assert_eq!(p.len(), 12);
    assert!((p[0] - 1.0).abs() < 1e-6 && p[1] == 0.0 && p[2] == 0.0);
    assert!((p[4] - 2.0).abs() < 0.002);
}

#[test]
fn monotone_decay_conventions() {
    let f = features(0.001, sampled(0.001, 20.0, |t| (-t).exp()));
    assert_eq!([f[2], f[12], f[13], f[14]], [0.0; 4]);
    assert!((f[26] - 20.0).abs() < 1e-9);
    assert!((f[28] - 1.0).abs() < 0.01);
}

#[test]
fn settled_tail_does_not_add_signed_time() {
    let r = sampled(0.01, 20.0, |t| (-0.5 * t).exp() * (2.0 * t).sin());
    let short = features(0.01, r.clone());
    let mut long = r;
    long.extend((1..4000).map(|i| 1e-6 * (0.37 * i as f64).sin()));
    let long = features(0.01, long);
    for k in [17, 18, 19] {
        assert!((long[k] - short[k]).abs() <= 0.02 * short[k].abs().max(0.01), "F{}: {} vs {}", k + 1, long[k], short[k]);
    }
}

#[test]
fn header_is_the_frozen_name_list() {
    assert_eq!(csv_header(), FEATURE_NAMES.join(","));
    let expected: Vec<String> = (1..=30).map(|i| format!("F{i}")).collect();
    assert_eq!(FEATURE_NAMES.to_vec(), expected);
}

fn oscillation() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.1f64..3.0, 0.1f64..0.8, 0.5f64..3.0)
}

fn response(rise: f64, decay: f64, freq: f64) -> Vec<f64> {
    sampled(0.01, 40.0, |t| (1.0 - (-rise * t).exp()) * (-decay * t).exp() * (freq * t).cos())
}

#[test]
fn time_scaling_covariance_table() {
    let r = response(3.0, 0.4, 1.5);
    let base = features(0.01, r.clone());
    assert!(base[2] > 0.0 && base[14] > 0.0, "synthetic response needs undershoot and a second peak");
    for a in [0.5, 3.0] {
        let s = features(0.01 * a, r.clone());
        for i in 0..FEATURE_COUNT {
            let expected = base[i] * a.powi(TIME_POWER[i]);
            assert!(close(s[i], expected, 1e-9), "a = {a}: F{} = {} expected {}", i + 1, s[i], expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ratio_identities_hold((rise, decay, freq) in oscillation()) {
        assert_ratio_identities(&features(0.01, response(rise, decay, freq)));
    }

    #[test]
    fn amplitude_scaling_keeps_ratio_features(
        (rise, decay, freq) in oscillation(),
        c in 0.01f64..100.0,
    ) {
        let r = response(rise, decay, freq);
        let base = features(0.01, r.clone());
        let scaled = features(0.01, r.iter().map(|v| v * c).collect());
        for i in AMPLITUDE_INVARIANT {
            prop_assert!(close(scaled[i], base[i], 1e-9), "F{}: {} vs {}", i + 1, scaled[i], base[i]);
        }
    }

    #[test]
    fn features_are_finite_and_times_nonnegative((rise, decay, freq) in oscillation()) {
        let f = features(0.01, response(rise, decay, freq));
        prop_assert!(f.iter().all(|v| v.is_finite()));
        prop_assert!(f[0] > 0.0);
        for i in [1, 3, 6, 15, 16, 17, 18, 20, 21, 23, 24, 25, 26] {
            prop_assert!(f[i] >= 0.0, "F{} = {}", i + 1, f[i]);
        }
    }
}
