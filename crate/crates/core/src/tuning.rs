//! IAE-optimal PID reference tunings under gain/phase margin constraints,
//! the normalized-process mesh and spline interpolation between its nodes.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frequency::{margins, FrequencyError, MarginPair};
use crate::process::{
    iae, parse_two_column_csv, simulate_rejection, HorizonPolicy, ModelError, NormalizedProcess,
    PidTuning, RejectionResponse, SimError, SopdtModel,
};
use crate::scalar::Real;
use crate::seeding::{derive_seed, stream_rng};
use crate::simplex::NelderMead;
use crate::spline::GridSpline;

/// Minimum gain margin of a reference tuning.
pub const MIN_GAIN_MARGIN: f64 = 2.5;
/// Minimum phase margin of a reference tuning, degrees.
pub const MIN_PHASE_MARGIN: f64 = 60.0;
/// Slack granted to the margin constraints when accepting an optimum.
pub const GAIN_MARGIN_SLACK: f64 = 0.01;
pub const PHASE_MARGIN_SLACK: f64 = 0.1;

pub const MESH_FORMAT: &str = "loopgrade-mesh/1";

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("no feasible tuning found for L1={l1}, L2={l2} (best Am={am}, phim={phim})")]
    Infeasible { l1: f64, l2: f64, am: f64, phim: f64 },
    #[error("process L1={l1}, L2={l2} lies outside the mesh range")]
    OutOfRange { l1: f64, l2: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Frequency(#[from] FrequencyError),
    #[error("mesh file: {0}")]
    Format(String),
    #[error("mesh i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Optimizer settings for [`optimize_reference`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningSettings {
    pub restarts: usize,
    /// Random restarts are drawn within `x/÷ restart_spread` of the
    /// heuristic start.
    pub restart_spread: f64,
    pub penalty: f64,
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for TuningSettings {
    fn default() -> Self {
        Self {
            restarts: 4,
            restart_spread: 3.0,
            penalty: 1e4,
            tolerance: 1e-3,
            max_evaluations: 600,
        }
    }
}

/// Reference tuning of one normalized process together with its margins,
/// optimal IAE and rejection trajectory. The tuning is expressed on the
/// canonical process (`k = 1`, `tau1 = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry<T = f64> {
    pub process: NormalizedProcess<T>,
    pub tuning: PidTuning<T>,
    pub margins: MarginPair<T>,
    pub iae_ref: T,
    pub response_ref: RejectionResponse<T>,
}

impl<T: Real> ReferenceEntry<T> {
    pub fn meets_constraints(&self) -> bool {
        margins_feasible(&self.margins)
    }
}

pub fn margins_feasible<T: Real>(m: &MarginPair<T>) -> bool {
    m.gain_margin.as_f64() >= MIN_GAIN_MARGIN - GAIN_MARGIN_SLACK
        && m.phase_margin.as_f64() >= MIN_PHASE_MARGIN - PHASE_MARGIN_SLACK
}

/// Graphical starting point on the canonical model.
pub fn heuristic_start<T: Real>(model: &SopdtModel<T>) -> PidTuning<T> {
    let kr = model.tau1 / (model.k.abs() * (model.tau0 + model.tau2));
    let ti = model.tau1 + model.tau2 * T::lit(0.5);
    let td = model.tau1 * model.tau2 / (model.tau1 + model.tau2);
    PidTuning {
        kr,
        ti,
        td,
        n: T::lit(crate::process::DEFAULT_FILTER_RATIO),
    }
}

/// Simulates the canonical rejection and evaluates margins for `tuning`.
pub fn evaluate_entry<T: Real>(
    process: NormalizedProcess<T>,
    tuning: PidTuning<T>,
) -> Result<ReferenceEntry<T>, TuningError> {
    let model = process.denormalize();
    let margins = margins(&model, &tuning)?;
    let response = simulate_rejection(
        &model,
        &tuning,
        T::one(),
        model.default_step(),
        &HorizonPolicy::for_model(&model),
    )?;
    Ok(ReferenceEntry {
        process,
        tuning,
        margins,
        iae_ref: iae(&response),
        response_ref: response,
    })
}

/// Penalized objective `IAE + w [max(0, 2.5 - Am)^2 + max(0, (60 - phim)/60)^2]`.
pub fn objective<T: Real>(model: &SopdtModel<T>, tuning: &PidTuning<T>, penalty: T) -> T {
    let m = match margins(model, tuning) {
        Ok(m) => m,
        Err(_) => return T::infinity(),
    };
    let am_short = (T::lit(MIN_GAIN_MARGIN) - m.gain_margin).max(T::zero());
    let pm_short =
        ((T::lit(MIN_PHASE_MARGIN) - m.phase_margin) / T::lit(MIN_PHASE_MARGIN)).max(T::zero());
    let pen = penalty * (am_short * am_short + pm_short * pm_short);
    // Loops far outside the feasible region are not worth simulating.
    if m.gain_margin < T::one() {
        return T::lit(1e6) + pen;
    }
    match simulate_rejection(
        model,
        tuning,
        T::one(),
        model.default_step(),
        &HorizonPolicy::for_model(model),
    ) {
        Ok(resp) => iae(&resp) + pen,
        Err(_) => T::infinity(),
    }
}

fn tuning_from_log<T: Real>(x: &[T]) -> PidTuning<T> {
    PidTuning {
        kr: x[0].exp(),
        ti: x[1].exp(),
        td: x[2].exp(),
        n: T::lit(crate::process::DEFAULT_FILTER_RATIO),
    }
}

/// Solves the constrained IAE problem for `p` from the heuristic start plus
/// seeded random restarts.
pub fn optimize_reference<T: Real>(
    p: NormalizedProcess<T>,
    seed: u64,
    settings: &TuningSettings,
) -> Result<ReferenceEntry<T>, TuningError> {
    let model = p.denormalize();
    let h = heuristic_start(&model);
    let base = [h.kr.ln(), h.ti.ln(), h.td.ln()];
    let mut rng = stream_rng(seed, 0);
    let spread = settings.restart_spread.ln();
    let mut starts = vec![base.to_vec()];
    for _ in 0..settings.restarts {
        starts.push(
            base.iter()
                .map(|b| *b + T::lit(rng.random_range(-spread..=spread)))
                .collect(),
        );
    }
    let nm = NelderMead::new(
        T::lit(0.25),
        T::lit(settings.tolerance),
        settings.max_evaluations,
    );
    let penalty = T::lit(settings.penalty);
    let f = |x: &[T]| objective(&model, &tuning_from_log(x), penalty);
    let mut best: Option<(Vec<T>, T)> = None;
    for start in &starts {
        let res = nm.minimize(f, start);
        if best.as_ref().is_none_or(|(_, v)| res.value < *v) {
            best = Some((res.x, res.value));
        }
    }
    let (x, value) = best.expect("at least one start");
    // Polish the winner with a fresh, smaller simplex.
    let polish = NelderMead::new(
        T::lit(0.05),
        T::lit(settings.tolerance * 0.1),
        settings.max_evaluations,
    );
    let res = polish.minimize(f, &x);
    let x = if res.value < value { res.x } else { x };
    let entry = evaluate_entry(p, tuning_from_log(&x))?;
    if !entry.meets_constraints() || !entry.response_ref.converged {
        return Err(TuningError::Infeasible {
            l1: p.l1.as_f64(),
            l2: p.l2.as_f64(),
            am: entry.margins.gain_margin.as_f64(),
            phim: entry.margins.phase_margin.as_f64(),
        });
    }
    Ok(entry)
}

/// Grid axes of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    #[serde(rename = "L1")]
    pub l1: Vec<f64>,
    #[serde(rename = "L2")]
    pub l2: Vec<f64>,
}

impl Default for MeshSpec {
    /// `L1 in {0.1..0.6}`, `L2 in {0.1..1.0}`, step 0.1.
    fn default() -> Self {
        Self::from_ranges((0.1, 0.6), (0.1, 1.0), 0.1)
    }
}

impl MeshSpec {
    /// Evenly spaced axes from inclusive ranges; node values are rounded to
    /// 12 decimals so they are exact decimal fractions.
    pub fn from_ranges(l1: (f64, f64), l2: (f64, f64), step: f64) -> Self {
        let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=n)
                .map(|i| ((lo + step * i as f64) * 1e12).round() / 1e12)
                .collect()
        };
        Self {
            l1: axis(l1),
            l2: axis(l2),
        }
    }

    pub fn len(&self) -> usize {
        self.l1.len() * self.l2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in row-major order (`L1` outer).
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        self.l1
            .iter()
            .flat_map(|&a| self.l2.iter().map(move |&b| (a, b)))
            .collect()
    }
}

/// Reference tunings on a rectangular grid of normalized processes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMesh {
    pub spec: MeshSpec,
    pub seed: u64,
    pub settings: TuningSettings,
    /// Row-major over `spec.nodes()`.
    pub entries: Vec<ReferenceEntry<f64>>,
    splines: [GridSpline; 3],
}

/// Optimizes every node of `spec` in parallel. Node `i` uses the stream
/// `derive_seed(seed, i)`, so the mesh does not depend on thread count.
pub fn build_mesh(
    spec: &MeshSpec,
    seed: u64,
    settings: &TuningSettings,
) -> Result<ReferenceMesh, TuningError> {
    let entries = spec
        .nodes()
        .into_par_iter()
        .enumerate()
        .map(|(i, (l1, l2))| {
            let p = NormalizedProcess::new(l1, l2)?;
            optimize_reference(p, derive_seed(seed, i as u64), settings)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ReferenceMesh::from_entries(spec.clone(), seed, *settings, entries)
}

impl ReferenceMesh {
    pub fn from_entries(
        spec: MeshSpec,
        seed: u64,
        settings: TuningSettings,
        entries: Vec<ReferenceEntry<f64>>,
    ) -> Result<Self, TuningError> {
        if entries.len() != spec.len() || spec.is_empty() {
            return Err(TuningError::Format(format!(
                "expected {} entries, found {}",
                spec.len(),
                entries.len()
            )));
        }
        for ((l1, l2), e) in spec.nodes().iter().zip(&entries) {
            if e.process.l1 != *l1 || e.process.l2 != *l2 {
                return Err(TuningError::Format(format!(
                    "entry ({}, {}) out of grid order",
                    e.process.l1, e.process.l2
                )));
            }
        }
        let spline = |f: fn(&PidTuning<f64>) -> f64| {
            GridSpline::new(
                &spec.l1,
                &spec.l2,
                entries.iter().map(|e| f(&e.tuning)).collect(),
            )
        };
        let splines = [spline(|t| t.kr), spline(|t| t.ti), spline(|t| t.td)];
        Ok(Self {
            spec,
            seed,
            settings,
            entries,
            splines,
        })
    }

    pub fn entry(&self, i1: usize, i2: usize) -> &ReferenceEntry<f64> {
        &self.entries[i1 * self.spec.l2.len() + i2]
    }

    pub fn contains(&self, p: &NormalizedProcess<f64>) -> bool {
        let eps = 1e-12;
        let (a, b) = (&self.spec.l1, &self.spec.l2);
        p.l1 >= a[0] - eps
            && p.l1 <= a[a.len() - 1] + eps
            && p.l2 >= b[0] - eps
            && p.l2 <= b[b.len() - 1] + eps
    }

    /// Spline-interpolated tuning, without simulation.
    pub fn tuning_at(&self, p: &NormalizedProcess<f64>) -> Result<PidTuning<f64>, TuningError> {
        if !self.contains(p) {
            return Err(TuningError::OutOfRange { l1: p.l1, l2: p.l2 });
        }
        let [kr, ti, td] = &self.splines;
        Ok(PidTuning::new(
            kr.eval(p.l1, p.l2),
            ti.eval(p.l1, p.l2),
            td.eval(p.l1, p.l2).max(0.0),
        )?)
    }

    /// Interpolated reference for `p` with margins and response recomputed
    /// by simulation.
    pub fn interpolate_tuning(
        &self,
        p: &NormalizedProcess<f64>,
    ) -> Result<ReferenceEntry<f64>, TuningError> {
        let tuning = self.tuning_at(p)?;
        evaluate_entry(*p, tuning)
    }

    /// SHA-256 of the canonical JSON document (hex).
    pub fn mesh_id(&self) -> String {
        let doc = self.document(None);
        let bytes = serde_json::to_vec(&doc).expect("mesh document serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn document(&self, mesh_id: Option<String>) -> MeshDocument {
        MeshDocument {
            format: MESH_FORMAT.to_string(),
            mesh_id,
            seed: self.seed,
            grid: self.spec.clone(),
            settings: self.settings,
            entries: self
                .entries
                .iter()
                .map(|e| NodeRecord {
                    l1: e.process.l1,
                    l2: e.process.l2,
                    tuning: e.tuning,
                    margins: e.margins,
                    iae: e.iae_ref,
                    dt: e.response_ref.dt,
                    converged: e.response_ref.converged,
                    response: response_file_name(e.process.l1, e.process.l2),
                })
                .collect(),
        }
    }

    /// Writes `mesh.json` into `dir` and one `t,r` CSV per node beside it.
    /// Returns the JSON path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, TuningError> {
        fs::create_dir_all(dir)?;
        let doc = self.document(Some(self.mesh_id()));
        let json = serde_json::to_string_pretty(&doc).map_err(|e| TuningError::Format(e.to_string()))?;
        let path = dir.join("mesh.json");
        fs::write(&path, json + "\n")?;
        for (rec, e) in doc.entries.iter().zip(&self.entries) {
            fs::write(dir.join(&rec.response), e.response_ref.to_csv())?;
        }
        Ok(path)
    }

    /// Loads a mesh written by [`ReferenceMesh::save`].
    pub fn load(path: &Path) -> Result<Self, TuningError> {
        let text = fs::read_to_string(path)?;
        let doc: MeshDocument =
            serde_json::from_str(&text).map_err(|e| TuningError::Format(e.to_string()))?;
        if doc.format != MESH_FORMAT {
            return Err(TuningError::Format(format!("unsupported format tag {}", doc.format)));
        }
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::with_capacity(doc.entries.len());
        for rec in &doc.entries {
            let csv = fs::read_to_string(dir.join(&rec.response))?;
            let (_, r) = parse_two_column_csv::<f64>(&csv).map_err(TuningError::Format)?;
            entries.push(ReferenceEntry {
                process: NormalizedProcess::new(rec.l1, rec.l2)?,
                tuning: rec.tuning,
                margins: rec.margins,
                iae_ref: rec.iae,
                response_ref: RejectionResponse::from_samples(rec.dt, r, 1.0, 1.0, rec.converged),
            });
        }
        let mesh = Self::from_entries(doc.grid, doc.seed, doc.settings, entries)?;
        if let Some(id) = doc.mesh_id {
            if id != mesh.mesh_id() {
                return Err(TuningError::Format("mesh_id does not match contents".into()));
            }
        }
        Ok(mesh)
    }
}

fn response_file_name(l1: f64, l2: f64) -> String {
    format!("ref_L1_{l1:.2}_L2_{l2:.2}.csv")
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshDocument {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mesh_id: Option<String>,
    seed: u64,
    grid: MeshSpec,
    settings: TuningSettings,
    entries: Vec<NodeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    #[serde(rename = "L1")]
    l1: f64,
    #[serde(rename = "L2")]
    l2: f64,
    tuning: PidTuning<f64>,
    margins: MarginPair<f64>,
    iae: f64,
    dt: f64,
    converged: bool,
    response: String,
}
