use std::sync::OnceLock;

use loopgrade_classify::{train, FeatureSet, Hyper, Kind, Model, Samples};
use loopgrade_cli::assess::{assess_record, Assessment};
use loopgrade_core::datagen::{generate_dataset, Label};
use loopgrade_core::identify::{Family, HigherOrderProcess};
use loopgrade_core::process::{simulate_rejection, HorizonPolicy, NormalizedProcess, PidTuning, SopdtModel};
use loopgrade_core::seeding::derive_seed;
use loopgrade_core::tuning::{build_mesh, MeshSpec, ReferenceMesh, TuningSettings};

struct Fixture {
    mesh: ReferenceMesh,
    model: Model,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let spec = MeshSpec::from_ranges((0.3, 0.6), (0.4, 1.0), 0.1);
        let mesh = build_mesh(&spec, 42, &TuningSettings::default()).unwrap();
        let data = generate_dataset(&mesh, 2000, derive_seed(42, 1)).unwrap();
        let samples = Samples::from_labeled(&data.samples, &FeatureSet::All30.indices()).unwrap();
        let model = train(Hyper::default_for(Kind::Svm), &samples, 1).unwrap();
        Fixture { mesh, model }
    })
}

const DT: f64 = 0.01;

/// Assesses the physical SOPDT `plant` under the physical `tuning`.
fn assess_sopdt(plant: &SopdtModel<f64>, tuning: &PidTuning<f64>, delta_d: f64) -> Assessment {
    let policy = HorizonPolicy::fixed(40.0 * plant.time_scale());
    let resp = simulate_rejection(plant, tuning, delta_d, DT, &policy).unwrap();
    let y: Vec<f64> = resp.r.iter().map(|v| v * plant.k * delta_d).collect();
    let f = fixture();
    assess_record(&f.mesh, &f.model, &y, DT, tuning, delta_d).unwrap()
}

fn node_plant() -> SopdtModel<f64> {
    let n = NormalizedProcess::new(0.4, 0.5).unwrap().denormalize();
    SopdtModel::new(2.0, 3.0 * n.tau1, 3.0 * n.tau2, 3.0 * n.tau0).unwrap()
}

/// Left-rectangle quadrature of the normalized distance; the shorter
/// record is extended by zeros.
fn rectangle_e_dist(reference: &[f64], lab: &[f64]) -> f64 {
    let n = reference.len().max(lab.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let num: f64 = (0..n).map(|i| (at(reference, i) - at(lab, i)).abs()).sum();
    num / reference.iter().map(|v| v.abs()).sum::<f64>()
}

#[test]
fn reference_tuning_at_a_node_is_ok() {
    let plant = node_plant();
    let reference = fixture().mesh.entry(1, 1);
    assert_eq!((reference.process.l1, reference.process.l2), (0.4, 0.5));
    let a = assess_sopdt(&plant, &reference.tuning.to_physical(&plant), 0.5);
    assert!(a.e_dist < 0.05, "{}", a.e_dist);
    assert_eq!(a.criteria, Label::Ok);
    assert_eq!(a.verdict.label, Label::Ok);
}

#[test]
fn doubled_gain_at_a_node_is_nok() {
    let plant = node_plant();
    let reference = fixture().mesh.entry(1, 1);
    let hot = reference.tuning.scaled(2.0, 1.0, 1.0).to_physical(&plant);
    let a = assess_sopdt(&plant, &hot, 0.5);
    assert!(a.margins.gain_margin < 0.6 * reference.margins.gain_margin);
    assert_eq!(a.criteria, Label::Nok);
    assert_eq!(a.verdict.label, Label::Nok);
}

#[test]
fn sluggish_tuning_on_a_fourth_order_process_is_nok() {
    let f = fixture();
    let p = HigherOrderProcess::new(Family::G2, 0.5).unwrap();
    let fit = p.fit_step_test().unwrap();
    let reference = f.mesh.interpolate_tuning(&fit.normalized).unwrap();
    let tuning = reference.tuning.to_physical(&fit.model).scaled(0.25, 1.0, 1.0);
    let policy = HorizonPolicy::fixed(60.0 * p.plant().time_scale());
    let run = p.rejection(&tuning, 1.0, DT, &policy).unwrap();
    let a = assess_record(&f.mesh, &f.model, &run.response.r, DT, &tuning, 1.0).unwrap();

    let oracle = rectangle_e_dist(&a.reference.r, &a.response.r);
    assert!((a.e_dist - oracle).abs() < 1e-3 * oracle, "{} vs {oracle}", a.e_dist);
    assert!(a.e_dist > 0.1, "{}", a.e_dist);
    assert_eq!(a.criteria, Label::Nok);
    assert_eq!(a.verdict.label, Label::Nok);
}
