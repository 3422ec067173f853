use loopgrade_core::frequency::{chain_loop_response, margins, open_loop_response};
use loopgrade_core::process::{NormalizedProcess, PidTuning, SopdtModel};
use loopgrade_core::tuning::heuristic_start;
use num_complex::Complex;
use proptest::prelude::*;

/// Brute-force phase margin: unwrapped phase at the first of 10^5
/// log-spaced samples where the loop magnitude drops below one.
fn dense_phase_margin(model: &SopdtModel<f64>, tuning: &PidTuning<f64>) -> f64 {
    let n = 100_000;
    let (lo, hi): (f64, f64) = (1e-3, 1e3);
    let mut prev_arg = None::<f64>;
    let mut unwrapped = 0.0;
    for i in 0..=n {
        let w = lo * (hi / lo).powf(i as f64 / n as f64);
        let l = open_loop_response(model, tuning, w);
        let arg = l.arg();
        unwrapped = match prev_arg {
            None => arg,
            Some(p) => {
                let mut d = arg - p;
                while d > std::f64::consts::PI {
                    d -= 2.0 * std::f64::consts::PI;
                }
                while d < -std::f64::consts::PI {
                    d += 2.0 * std::f64::consts::PI;
                }
                unwrapped + d
            }
        };
        prev_arg = Some(arg);
        if l.norm() <= 1.0 {
            return 180.0 + unwrapped.to_degrees();
        }
    }
    f64::NAN
}

#[test]
fn loop_response_matches_direct_formula() {
    let model = SopdtModel::<f64>::new(1.0, 1.0, 0.5, 2.0 / 3.0).unwrap();
    let tuning = PidTuning::<f64>::new(1.0, 1.0, 0.0).unwrap();
    let j = Complex::new(0.0, 1.0);
    let w: f64 = 1.0;
    let s = j * w;
    let oracle = (1.0 + 1.0 / s) * (-s * (2.0 / 3.0)).exp() / ((1.0 + s) * (1.0 + 0.5 * s));
    let l = open_loop_response(&model, &tuning, w);
    assert!((l - oracle).norm() < 1e-12);
    assert!((chain_loop_response(&model.plant(), &tuning, w) - oracle).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gain_scaling_divides_the_gain_margin(
        l1 in 0.1f64..0.6,
        l2 in 0.1f64..1.0,
        c in 0.2f64..5.0,
    ) {
        let model = NormalizedProcess::new(l1, l2).unwrap().denormalize();
        let t = heuristic_start(&model);
        let m = margins(&model, &t).unwrap();
        let scaled = margins(&model, &PidTuning::new(t.kr * c, t.ti, t.td).unwrap()).unwrap();
        prop_assert!((scaled.gain_margin - m.gain_margin / c).abs() <= 1e-9 * m.gain_margin);
        prop_assert!((scaled.omega_pc - m.omega_pc).abs() <= 1e-9 * m.omega_pc);
    }

    #[test]
    fn time_scaling_keeps_margins_and_divides_crossovers(
        l1 in 0.1f64..0.6,
        l2 in 0.1f64..1.0,
        a in 0.1f64..10.0,
    ) {
        let model = NormalizedProcess::new(l1, l2).unwrap().denormalize();
        let t = heuristic_start(&model);
        let m = margins(&model, &t).unwrap();
        let ts = PidTuning::new(t.kr, t.ti * a, t.td * a).unwrap();
        let s = margins(&model.time_scaled(a), &ts).unwrap();
        prop_assert!((s.gain_margin - m.gain_margin).abs() <= 1e-7 * m.gain_margin);
        prop_assert!((s.phase_margin - m.phase_margin).abs() <= 1e-6);
        prop_assert!((s.omega_pc * a - m.omega_pc).abs() <= 1e-7 * m.omega_pc);
        prop_assert!((s.omega_gc * a - m.omega_gc).abs() <= 1e-7 * m.omega_gc);
    }

    #[test]
    fn phase_margin_agrees_with_dense_grid(
        l1 in 0.1f64..0.6,
        l2 in 0.1f64..1.0,
        gain in 0.5f64..2.0,
    ) {
        let model = NormalizedProcess::new(l1, l2).unwrap().denormalize();
        let h = heuristic_start(&model);
        let t = PidTuning::new(h.kr * gain, h.ti, h.td).unwrap();
        let m = margins(&model, &t).unwrap();
        let oracle = dense_phase_margin(&model, &t);
        prop_assert!((m.phase_margin - oracle).abs() < 0.5, "{} vs {}", m.phase_margin, oracle);
        prop_assert!(m.gain_margin > 0.0);
        if m.phase_margin > 0.0 && m.gain_margin > 1.0 {
            prop_assert!(m.omega_pc > m.omega_gc);
        }
    }
}
