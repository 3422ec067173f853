//! Assessment of one recorded disturbance-rejection response.

use anyhow::{bail, Context, Result};
use serde::Serialize;

use loopgrade_classify::{predict, Model, Prediction};
use loopgrade_core::datagen::{label_observation, Label};
use loopgrade_core::features::FeatureVector;
use loopgrade_core::frequency::{margins, MarginPair};
use loopgrade_core::identify::{fit_sopdt_closed_loop, FitResult};
use loopgrade_core::process::{PidTuning, RejectionResponse};
use loopgrade_core::tuning::ReferenceMesh;

#[derive(Debug, Clone, Serialize)]
pub struct Assessment {
    pub fit: FitResult,
    /// Applied tuning mapped onto the canonical fitted process.
    pub tuning_canonical: PidTuning<f64>,
    pub reference_tuning: PidTuning<f64>,
    pub reference_margins: MarginPair<f64>,
    pub margins: MarginPair<f64>,
    /// Applied over reference `(kr, Ti, Td)`.
    pub multipliers: [f64; 3],
    pub e_dist: f64,
    /// What the labeling criteria say about the fitted loop.
    pub criteria: Label,
    pub verdict: Prediction,
    pub features: FeatureVector<f64>,
    #[serde(skip)]
    pub response: RejectionResponse<f64>,
    #[serde(skip)]
    pub reference: RejectionResponse<f64>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// Fits an SOPDT to `y` (physical output deviation after a load step of
/// `delta_d`, sampled every `dt`) under the known physical `tuning`,
/// interpolates the reference, and classifies the normalized response.
pub fn assess_record(
    mesh: &ReferenceMesh,
    model: &Model,
    y: &[f64],
    dt: f64,
    tuning: &PidTuning<f64>,
    delta_d: f64,
) -> Result<Assessment> {
    let record = RejectionResponse::from_samples(dt, y.to_vec(), 1.0, 1.0, true);
    let fit = fit_sopdt_closed_loop(&record, tuning, delta_d).context(
        "closed-loop identification failed; check that the record starts at the load step, \
         is settled at its end and that the tuning and delta_d match the experiment",
    )?;
    let p = fit.normalized;
    if !mesh.contains(&p) {
        bail!(
            "identified process L1={:.3}, L2={:.3} lies outside the reference mesh \
             (L1 {:.2}..{:.2}, L2 {:.2}..{:.2}); rebuild the mesh with a wider --range",
            p.l1,
            p.l2,
            mesh.spec.l1[0],
            mesh.spec.l1[mesh.spec.l1.len() - 1],
            mesh.spec.l2[0],
            mesh.spec.l2[mesh.spec.l2.len() - 1],
        );
    }
    let entry = mesh.interpolate_tuning(&p)?;
    let candidate = tuning.to_canonical(&fit.model);
    let m = margins(&entry.process.denormalize(), &candidate)?;
    let scale = fit.model.k * delta_d;
    let normalized = RejectionResponse::from_samples(
        dt / fit.model.tau1,
        y.iter().map(|v| v / scale).collect(),
        1.0,
        1.0,
        true,
    )
    .resampled(entry.response_ref.dt);
    let a = [
        ratio(candidate.kr, entry.tuning.kr),
        ratio(candidate.ti, entry.tuning.ti),
        ratio(candidate.td, entry.tuning.td),
    ];
    let sample = label_observation(&entry, &m, &normalized, true, a)?;
    let verdict = predict(model, &sample.features);
    Ok(Assessment {
        fit,
        tuning_canonical: candidate,
        reference_tuning: entry.tuning,
        reference_margins: entry.margins,
        margins: m,
        multipliers: a,
        e_dist: sample.provenance.e_dist,
        criteria: sample.label,
        verdict,
        features: sample.features,
        response: normalized,
        reference: entry.response_ref,
    })
}
