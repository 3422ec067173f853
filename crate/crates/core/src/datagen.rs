//! Labeled dataset synthesis: random processes, perturbed reference
//! tunings, simulation, CPI extraction and OK/NOK labeling.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{extract_features_unsettled, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::frequency::{chain_margins, default_band, MarginPair};
use crate::process::{
    rejection_run, HorizonPolicy, LagChain, NormalizedProcess, PidTuning, RejectionResponse, Termination,
};
use crate::scalar::Real;
use crate::seeding::stream_rng;
use crate::tuning::{ReferenceEntry, ReferenceMesh, TuningError};

/// Standard deviation of the multiplicative tuning perturbation.
pub const PERTURBATION_STD: f64 = 0.15;
/// Multiplier draws at or below this are redrawn.
pub const MIN_MULTIPLIER: f64 = 0.05;
/// Relative half-width of the acceptable margin band.
pub const MARGIN_BAND: f64 = 0.1;
/// Labels require `e_dist` strictly below this.
pub const EDIST_LIMIT: f64 = 0.1;
/// Attempts allowed per requested sample.
pub const ATTEMPT_BUDGET: usize = 50;

const BATCH: usize = 256;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("reference response has (near) zero area")]
    ZeroReference,
    #[error("sample unusable: {0}")]
    Unusable(String),
    #[error("class quota unfilled after {attempts} attempts (OK {ok}, NOK {nok})")]
    BudgetExceeded { attempts: usize, ok: usize, nok: usize },
    #[error("sample count must be even and positive, got {0}")]
    OddCount(usize),
    #[error(transparent)]
    Tuning(#[from] TuningError),
    #[error("dataset file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "OK")]
    Ok,
    #[serde(rename = "NOK")]
    Nok,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Ok => "OK",
            Label::Nok => "NOK",
        })
    }
}

impl FromStr for Label {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        match s {
            "OK" => Ok(Label::Ok),
            "NOK" => Ok(Label::Nok),
            other => Err(DataError::Format(format!("unknown label {other:?}"))),
        }
    }
}

/// How a sample was produced and what the labeling criteria saw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    #[serde(rename = "Am")]
    pub am: f64,
    pub phim: f64,
    pub e_dist: f64,
    /// `(Am - Am_ref) / (0.1 Am_ref)`; unknown when read back from CSV.
    #[serde(skip)]
    pub am_norm: Option<f64>,
    #[serde(skip)]
    pub phim_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector<f64>,
    pub label: Label,
    pub provenance: Provenance,
}

/// Counters over every attempt made while generating a dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStats {
    pub attempts: usize,
    pub unusable: usize,
    pub ok: usize,
    pub nok: usize,
    /// Usable attempts with `e_dist < 0.1`.
    pub close: usize,
    /// Of those, how many also had both margins in band.
    pub close_in_band: usize,
}

impl RawStats {
    fn record(&mut self, outcome: &Result<LabeledSample, DataError>) {
        self.attempts += 1;
        match outcome {
            Ok(s) => {
                match s.label {
                    Label::Ok => self.ok += 1,
                    Label::Nok => self.nok += 1,
                }
                if s.provenance.e_dist < EDIST_LIMIT {
                    self.close += 1;
                    if margins_in_band(&s.provenance) {
                        self.close_in_band += 1;
                    }
                }
            }
            Err(_) => self.unusable += 1,
        }
    }

    pub fn ok_fraction(&self) -> f64 {
        self.ok as f64 / (self.ok + self.nok).max(1) as f64
    }

    /// `P(margins in band | e_dist < 0.1)`.
    pub fn band_given_close(&self) -> f64 {
        self.close_in_band as f64 / self.close.max(1) as f64
    }
}

fn margins_in_band(p: &Provenance) -> bool {
    matches!((p.am_norm, p.phim_norm), (Some(a), Some(b)) if a.abs() <= 1.0 && b.abs() <= 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub seed: u64,
    pub mesh_id: String,
    pub stats: RawStats,
}

/// Draw from `N(1, 0.15^2)`, redrawn while at or below `0.05`.
pub fn draw_multiplier<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let normal = Normal::new(1.0, PERTURBATION_STD).expect("valid normal");
    loop {
        let a = normal.sample(rng);
        if a > MIN_MULTIPLIER {
            return a;
        }
    }
}

/// Multiplies each reference parameter by an independent draw.
pub fn perturb_tuning<T: Real, R: Rng + ?Sized>(
    reference: &PidTuning<T>,
    rng: &mut R,
) -> (PidTuning<T>, [T; 3]) {
    let a = [(); 3].map(|_| T::lit(draw_multiplier(rng)));
    (reference.scaled(a[0], a[1], a[2]), a)
}

/// `∫|r_ref - r_lab| / ∫|r_ref|` over the longer of the two horizons.
pub fn e_dist<T: Real>(
    reference: &RejectionResponse<T>,
    lab: &RejectionResponse<T>,
) -> Result<T, DataError> {
    let lab = if lab.dt == reference.dt {
        std::borrow::Cow::Borrowed(lab)
    } else {
        std::borrow::Cow::Owned(lab.resampled(reference.dt))
    };
    let n = reference.r.len().max(lab.r.len());
    let at = |v: &[T], i: usize| v.get(i).copied().unwrap_or_else(T::zero);
    let den = crate::scalar::trapezoid(reference.dt, reference.r.iter().map(|v| v.abs()));
    if !(den.as_f64() >= 1e-9) {
        return Err(DataError::ZeroReference);
    }
    let num = crate::scalar::trapezoid(
        reference.dt,
        (0..n).map(|i| (at(&reference.r, i) - at(&lab.r, i)).abs()),
    );
    Ok(num / den)
}

/// Simulates `candidate` on the entry's process and labels it against the
/// entry's reference.
pub fn label_sample(
    entry: &ReferenceEntry<f64>,
    candidate: &PidTuning<f64>,
    multipliers: [f64; 3],
) -> Result<LabeledSample, DataError> {
    label_plant(entry, &entry.process.denormalize().plant(), candidate, multipliers)
}

/// Labels `candidate` acting on an arbitrary `plant` expressed on the
/// entry's canonical scales (see [`observe_plant`]).
pub fn label_plant(
    entry: &ReferenceEntry<f64>,
    plant: &LagChain<f64>,
    candidate: &PidTuning<f64>,
    multipliers: [f64; 3],
) -> Result<LabeledSample, DataError> {
    let obs = observe_plant(entry, plant, candidate)?;
    label_observation(entry, &obs.margins, &obs.response, obs.stable, multipliers)
}

/// Margins and rejection trajectory of a loop, ready for labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub margins: MarginPair<f64>,
    pub response: RejectionResponse<f64>,
    pub stable: bool,
}

/// Runs `candidate` on `plant`, where `plant` is on the entry's canonical
/// scales (unit nominal gain, time in units of the nominal `tau1`). The
/// response is normalized by the nominal gain, so a plant gain other than
/// one shows up in the trajectory.
pub fn observe_plant(
    entry: &ReferenceEntry<f64>,
    plant: &LagChain<f64>,
    candidate: &PidTuning<f64>,
) -> Result<Observation, DataError> {
    let margins = chain_margins(plant, candidate, default_band(plant))
        .map_err(|e| DataError::Unusable(e.to_string()))?;
    let model = entry.process.denormalize();
    let run = rejection_run(
        plant,
        candidate,
        1.0,
        entry.response_ref.dt,
        &HorizonPolicy::for_model(&model),
    )
    .map_err(|e| DataError::Unusable(e.to_string()))?;
    if run.termination == Termination::NonFinite {
        return Err(DataError::Unusable("non-finite simulation".into()));
    }
    let mut response = run.response;
    if plant.gain != 1.0 {
        response.r.iter_mut().for_each(|v| *v *= plant.gain);
        response.gain = 1.0;
    }
    Ok(Observation {
        margins,
        response,
        stable: run.termination != Termination::Unstable,
    })
}

/// Labels an observed normalized response with known loop margins against
/// the entry's reference.
pub fn label_observation(
    entry: &ReferenceEntry<f64>,
    m: &MarginPair<f64>,
    response: &RejectionResponse<f64>,
    stable: bool,
    multipliers: [f64; 3],
) -> Result<LabeledSample, DataError> {
    let features =
        extract_features_unsettled(response).map_err(|e| DataError::Unusable(e.to_string()))?;
    let ed = e_dist(&entry.response_ref, response)?;
    let am_ref = entry.margins.gain_margin;
    let pm_ref = entry.margins.phase_margin;
    let am_norm = (m.gain_margin - am_ref) / (MARGIN_BAND * am_ref);
    let phim_norm = (m.phase_margin - pm_ref) / (MARGIN_BAND * pm_ref);
    let provenance = Provenance {
        l1: entry.process.l1,
        l2: entry.process.l2,
        a1: multipliers[0],
        a2: multipliers[1],
        a3: multipliers[2],
        am: m.gain_margin,
        phim: m.phase_margin,
        e_dist: ed,
        am_norm: Some(am_norm),
        phim_norm: Some(phim_norm),
    };
    let label = if stable && margins_in_band(&provenance) && ed < EDIST_LIMIT {
        Label::Ok
    } else {
        Label::Nok
    };
    Ok(LabeledSample {
        features,
        label,
        provenance,
    })
}

/// Attempt number `index` of the stream `seed`: a uniform process over the
/// mesh range, its interpolated reference and a perturbed candidate.
pub fn draw_attempt(
    mesh: &ReferenceMesh,
    seed: u64,
    index: u64,
) -> Result<LabeledSample, DataError> {
    let mut rng = stream_rng(seed, index);
    let (l1s, l2s) = (&mesh.spec.l1, &mesh.spec.l2);
    let l1 = uniform(&mut rng, l1s[0], l1s[l1s.len() - 1]);
    let l2 = uniform(&mut rng, l2s[0], l2s[l2s.len() - 1]);
    let p = NormalizedProcess::new(l1, l2).map_err(TuningError::from)?;
    let entry = mesh.interpolate_tuning(&p)?;
    let (candidate, a) = perturb_tuning(&entry.tuning, &mut rng);
    label_sample(&entry, &candidate, a)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Re-derives a sample's label from its provenance.
pub fn relabel(mesh: &ReferenceMesh, p: &Provenance) -> Result<LabeledSample, DataError> {
    let process = NormalizedProcess::new(p.l1, p.l2).map_err(TuningError::from)?;
    let entry = mesh.interpolate_tuning(&process)?;
    let candidate = entry.tuning.scaled(p.a1, p.a2, p.a3);
    label_sample(&entry, &candidate, [p.a1, p.a2, p.a3])
}

/// Statistics of `count` raw attempts, without class balancing.
pub fn raw_statistics(mesh: &ReferenceMesh, count: usize, seed: u64) -> RawStats {
    let outcomes: Vec<_> = (0..count as u64)
        .into_par_iter()
        .map(|i| draw_attempt(mesh, seed, i))
        .collect();
    let mut stats = RawStats::default();
    for o in &outcomes {
        stats.record(o);
    }
    stats
}

/// Balanced dataset of `n` samples. Attempts are evaluated in parallel
/// batches but accepted strictly in index order, so the result depends
/// only on `seed`.
pub fn generate_dataset(mesh: &ReferenceMesh, n: usize, seed: u64) -> Result<Dataset, DataError> {
    if n == 0 || n % 2 != 0 {
        return Err(DataError::OddCount(n));
    }
    let quota = n / 2;
    let budget = ATTEMPT_BUDGET * n;
    let mut stats = RawStats::default();
    let (mut ok, mut nok) = (Vec::with_capacity(quota), Vec::with_capacity(quota));
    let mut next = 0usize;
    'outer: while next < budget {
        let end = (next + BATCH).min(budget);
        let batch: Vec<_> = (next..end)
            .into_par_iter()
            .map(|i| draw_attempt(mesh, seed, i as u64))
            .collect();
        for (offset, outcome) in batch.into_iter().enumerate() {
            stats.record(&outcome);
            if let Ok(s) = outcome {
                match s.label {
                    Label::Ok if ok.len() < quota => ok.push((next + offset, s)),
                    Label::Nok if nok.len() < quota => nok.push((next + offset, s)),
                    _ => {}
                }
            }
            if ok.len() == quota && nok.len() == quota {
                break 'outer;
            }
        }
        next = end;
    }
    if ok.len() < quota || nok.len() < quota {
        return Err(DataError::BudgetExceeded {
            attempts: stats.attempts,
            ok: ok.len(),
            nok: nok.len(),
        });
    }
    let mut all: Vec<_> = ok.into_iter().chain(nok).collect();
    all.sort_by_key(|(i, _)| *i);
    Ok(Dataset {
        samples: all.into_iter().map(|(_, s)| s).collect(),
        seed,
        mesh_id: mesh.mesh_id(),
        stats,
    })
}

/// `F1,...,F30,label,L1,L2,a1,a2,a3,Am,phim,e_dist`
pub fn dataset_header() -> String {
    format!(
        "{},label,L1,L2,a1,a2,a3,Am,phim,e_dist",
        FEATURE_NAMES.join(",")
    )
}

pub fn samples_to_csv(samples: &[LabeledSample]) -> String {
    let mut out = dataset_header();
    out.push('\n');
    for s in samples {
        let p = &s.provenance;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.features.csv_row(),
            s.label,
            p.l1,
            p.l2,
            p.a1,
            p.a2,
            p.a3,
            p.am,
            p.phim,
            p.e_dist
        );
    }
    out
}

pub fn samples_from_csv(text: &str) -> Result<Vec<LabeledSample>, DataError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| DataError::Format("empty file".into()))?;
    if header.trim_end() != dataset_header() {
        return Err(DataError::Format("header does not match the dataset schema".into()));
    }
    let mut out = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != FEATURE_COUNT + 9 {
            return Err(DataError::Format(format!("row {}: {} columns", row + 2, cols.len())));
        }
        let num = |s: &str| -> Result<f64, DataError> {
            s.trim()
                .parse()
                .map_err(|e| DataError::Format(format!("row {}: {e}", row + 2)))
        };
        let mut values = [0.0; FEATURE_COUNT];
        for (v, c) in values.iter_mut().zip(&cols) {
            *v = num(c)?;
        }
        let rest = &cols[FEATURE_COUNT..];
        out.push(LabeledSample {
            features: FeatureVector { values },
            label: rest[0].trim().parse()?,
            provenance: Provenance {
                l1: num(rest[1])?,
                l2: num(rest[2])?,
                a1: num(rest[3])?,
                a2: num(rest[4])?,
                a3: num(rest[5])?,
                am: num(rest[6])?,
                phim: num(rest[7])?,
                e_dist: num(rest[8])?,
                am_norm: None,
                phim_norm: None,
            },
        });
    }
    Ok(out)
}

/// Metadata written beside a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub seed: u64,
    pub mesh_id: String,
    pub samples: usize,
    pub ok: usize,
    pub nok: usize,
    pub raw: RawStats,
    /// SHA-256 of the CSV bytes.
    pub dataset_sha256: String,
}

impl Dataset {
    pub fn to_csv(&self) -> String {
        samples_to_csv(&self.samples)
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            seed: self.seed,
            mesh_id: self.mesh_id.clone(),
            samples: self.samples.len(),
            ok: self.count(Label::Ok),
            nok: self.count(Label::Nok),
            raw: self.stats,
            dataset_sha256: sha256_hex(self.to_csv().as_bytes()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
