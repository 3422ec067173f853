use loopgrade_core::frequency::{margins, phase_crossover};
use loopgrade_core::process::{
    iae, open_loop_step, simulate_rejection, HorizonPolicy, NormalizedProcess, PidTuning,
    RejectionResponse, SimError, SopdtModel,
};
use loopgrade_core::tuning::heuristic_start;
use proptest::prelude::*;

fn run(model: &SopdtModel<f64>, tuning: &PidTuning<f64>, delta_d: f64, dt: f64, t: f64) -> RejectionResponse<f64> {
    simulate_rejection(model, tuning, delta_d, dt, &HorizonPolicy::fixed(t)).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn time_scaling_reproduces_the_canonical_run() {
    let model = NormalizedProcess::new(0.4, 0.5).unwrap().denormalize();
    let tuning = heuristic_start(&model);
    let dt = 0.01;
    let base = run(&model, &tuning, 1.0, dt, 30.0);
    for a in [0.5, 2.0, 10.0] {
        let t = PidTuning::new(tuning.kr, tuning.ti * a, tuning.td * a).unwrap();
        let scaled = run(&model.time_scaled(a), &t, 1.0, dt * a, 30.0 * a);
        assert!(max_diff(&scaled.r, &base.r) <= 1e-9, "a = {a}");
        let ratio = iae(&scaled) / iae(&base);
        assert!((ratio - a).abs() <= 1e-9 * a, "a = {a}: IAE ratio {ratio}");
    }
}

#[test]
fn normalized_response_ignores_disturbance_amplitude() {
    let model = SopdtModel::new(1.7, 2.0, 0.8, 0.9).unwrap();
    let tuning = heuristic_start(&model);
    let base = run(&model, &tuning, 1.0, 0.01, 40.0);
    for dd in [0.1, 10.0, -3.0] {
        let r = run(&model, &tuning, dd, 0.01, 40.0);
        assert!(max_diff(&r.r, &base.r) <= 1e-9, "delta_d = {dd}");
    }
}

#[test]
fn vanishing_controller_leaves_the_open_loop_step() {
    let model = SopdtModel::new(1.0, 1.0, 0.5, 0.4).unwrap();
    let tuning = PidTuning::new(1e-9, 1.0, 0.0).unwrap();
    let r = run(&model, &tuning, 1.0, 0.01, 30.0);
    let open = open_loop_step(&model.plant(), 1.0, 0.01, 30.0).unwrap();
    assert!(max_diff(&r.r, &open) < 1e-6);
    assert!((r.r[r.r.len() - 1] - 1.0).abs() < 1e-3);
}

#[test]
fn proportional_gain_above_the_margin_limit_is_unstable() {
    let model = SopdtModel::new(1.0, 1.0, 1.0, 1.0).unwrap();
    let unit = PidTuning::new(1.0, 1e12, 0.0).unwrap();
    let plant = model.plant();
    let (_, limit): (f64, f64) = phase_crossover(&plant, &unit, (1e-3, 1e3)).unwrap();
    let policy = HorizonPolicy::for_model(&model);
    let above = PidTuning::new(1.2 * limit, 1e12, 0.0).unwrap();
    assert!(matches!(
        simulate_rejection(&model, &above, 1.0, 0.01, &policy),
        Err(SimError::Unstable { .. })
    ));
    let below = PidTuning::new(0.8 * limit, 1e12, 0.0).unwrap();
    assert!(simulate_rejection(&model, &below, 1.0, 0.01, &policy).is_ok());
    let m = margins(&model, &below).unwrap();
    assert!((m.gain_margin - 1.25).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gain_scaling_keeps_the_normalized_trajectory(
        l1 in 0.1f64..0.6,
        l2 in 0.1f64..1.0,
        c in prop_oneof![-20.0f64..-0.05, 0.05f64..20.0],
    ) {
        let model = NormalizedProcess::new(l1, l2).unwrap().denormalize();
        let tuning = heuristic_start(&model);
        let base = run(&model, &tuning, 1.0, 0.01, 25.0);
        let hot = SopdtModel::new(c, model.tau1, model.tau2, model.tau0).unwrap();
        let t = PidTuning::new(tuning.kr / c.abs(), tuning.ti, tuning.td).unwrap();
        let scaled = run(&hot, &t, 1.0, 0.01, 25.0);
        prop_assert!(max_diff(&scaled.r, &base.r) <= 1e-9);
    }

    #[test]
    fn disturbance_amplitude_invariance(
        l1 in 0.1f64..0.6,
        l2 in 0.1f64..1.0,
        dd in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
    ) {
        let model = NormalizedProcess::new(l1, l2).unwrap().denormalize();
        let tuning = heuristic_start(&model);
        let base = run(&model, &tuning, 1.0, 0.01, 25.0);
        let r = run(&model, &tuning, dd, 0.01, 25.0);
        prop_assert!(max_diff(&r.r, &base.r) <= 1e-9);
        prop_assert_eq!(r.r[0], 0.0);
    }
}
