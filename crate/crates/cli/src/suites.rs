//! Validation suites: fixed SOPDT processes under the tuning bank, and the
//! higher-order processes P1..P7 identified from step tests.

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use loopgrade_classify::{predict, EvalReport, Model};
use loopgrade_core::datagen::{label_observation, observe_plant, Label};
use loopgrade_core::identify::HigherOrderProcess;
use loopgrade_core::process::{LagChain, NormalizedProcess, RejectionResponse};
use loopgrade_core::tuning::{ReferenceEntry, ReferenceMesh};

use crate::bank::{higher_order_bank, TUNING_BANK};

/// One tuning variant evaluated on one process.
#[derive(Debug, Clone, Serialize)]
pub struct Case {
    pub index: usize,
    pub multipliers: [f64; 3],
    /// Verdict of the labeling criteria (margins in band, `e_dist < 0.1`,
    /// stable).
    pub oracle: Label,
    pub predicted: Label,
    pub score: f64,
    pub e_dist: f64,
    #[serde(rename = "Am", serialize_with = "finite_or_null")]
    pub am: f64,
    pub phim: f64,
    pub stable: bool,
    #[serde(skip)]
    pub response: RejectionResponse<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    /// Process the reference is interpolated at.
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    /// Tabulated `(L1, L2)` for identified processes.
    pub tabulated: Option<(f64, f64)>,
    pub cases: Vec<Case>,
    /// Variants that could not be evaluated, with the reason.
    pub failures: Vec<(usize, String)>,
    /// Classifier against the oracle.
    pub agreement: EvalReport,
    #[serde(skip)]
    pub reference: RejectionResponse<f64>,
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn run_cases(
    entry: &ReferenceEntry<f64>,
    plant: &LagChain<f64>,
    model: &Model,
    variants: &[(usize, [f64; 3])],
) -> (Vec<Case>, Vec<(usize, String)>) {
    let outcomes: Vec<_> = variants
        .par_iter()
        .map(|&(index, a)| {
            let candidate = entry.tuning.scaled(a[0], a[1], a[2]);
            let obs = observe_plant(entry, plant, &candidate).map_err(|e| (index, e.to_string()))?;
            let sample = label_observation(entry, &obs.margins, &obs.response, obs.stable, a)
                .map_err(|e| (index, e.to_string()))?;
            let p = predict(model, &sample.features);
            Ok(Case {
                index,
                multipliers: a,
                oracle: sample.label,
                predicted: p.label,
                score: p.score,
                e_dist: sample.provenance.e_dist,
                am: sample.provenance.am,
                phim: sample.provenance.phim,
                stable: obs.stable,
                response: obs.response,
            })
        })
        .collect();
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(c) => cases.push(c),
            Err(f) => failures.push(f),
        }
    }
    (cases, failures)
}

fn agreement(cases: &[Case]) -> EvalReport {
    let truth: Vec<Label> = cases.iter().map(|c| c.oracle).collect();
    let pred: Vec<Label> = cases.iter().map(|c| c.predicted).collect();
    EvalReport::from_labels(&truth, &pred)
}

/// The full 35-variant bank on the SOPDT process `(l1, l2)`.
pub fn sopdt_suite(mesh: &ReferenceMesh, model: &Model, l1: f64, l2: f64) -> Result<SuiteReport> {
    let p = NormalizedProcess::new(l1, l2)?;
    let entry = mesh
        .interpolate_tuning(&p)
        .with_context(|| format!("reference at L1={l1}, L2={l2}"))?;
    let plant = entry.process.denormalize().plant();
    let variants: Vec<(usize, [f64; 3])> = TUNING_BANK.iter().copied().enumerate().collect();
    let (cases, failures) = run_cases(&entry, &plant, model, &variants);
    Ok(SuiteReport {
        name: format!("SOPDT L1={l1} L2={l2}"),
        l1,
        l2,
        tabulated: None,
        agreement: agreement(&cases),
        cases,
        failures,
        reference: entry.response_ref,
    })
}

/// Identifies `process` from a step test, interpolates the reference at
/// the fitted `(L1, L2)` and runs the 20-variant bank on the true plant.
pub fn higher_order_suite(
    mesh: &ReferenceMesh,
    model: &Model,
    name: &str,
    process: &HigherOrderProcess,
    tabulated: (f64, f64),
) -> Result<SuiteReport> {
    let fit = process
        .fit_step_test()
        .with_context(|| format!("step-test identification of {name}"))?;
    let entry = mesh
        .interpolate_tuning(&fit.normalized)
        .with_context(|| format!("reference for {name}"))?;
    let true_plant = process.plant();
    let (k, tau1) = (fit.model.k, fit.model.tau1);
    let plant = LagChain {
        gain: true_plant.gain / k,
        lags: true_plant.lags.iter().map(|l| l / tau1).collect(),
        delay: true_plant.delay / tau1,
    };
    let (cases, failures) = run_cases(&entry, &plant, model, &higher_order_bank());
    Ok(SuiteReport {
        name: name.to_string(),
        l1: fit.normalized.l1,
        l2: fit.normalized.l2,
        tabulated: Some(tabulated),
        agreement: agreement(&cases),
        cases,
        failures,
        reference: entry.response_ref,
    })
}
