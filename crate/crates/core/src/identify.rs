//! SOPDT identification from step or rejection records, and the
//! higher-order process families used for validation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::process::{
    open_loop_step, rejection_run, HorizonPolicy, LagChain, ModelError, NormalizedProcess,
    PidTuning, RejectionResponse, RejectionRun, SimError, SopdtModel, Termination, MAX_LAGS,
};
use crate::seeding::stream_rng;
use crate::simplex::NelderMead;

/// Fits whose RMS residual exceeds this fraction of the record span fail.
pub const DIVERGENCE_RATIO: f64 = 0.1;
/// Jittered restarts on top of the initial point.
pub const FIT_RESTARTS: usize = 5;
/// Sampling step of the standard open-loop step test.
pub const STEP_TEST_DT: f64 = 0.01;
/// Length of the standard step test in units of the plant time scale.
pub const STEP_TEST_WINDOW: f64 = 6.0;
const POLISH_ROUNDS: usize = 8;

#[derive(Debug, Error)]
pub enum IdentError {
    #[error("record has not settled (tail moves {tail_change:.3} of span)")]
    NotSettled { tail_change: f64 },
    #[error("fit diverged: RMS residual {residual} exceeds 10% of span {span}")]
    FitDiverged { residual: f64, span: f64 },
    #[error("record too short or flat to identify")]
    Degenerate,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `1 / (1 + s)^alpha`, integer `alpha`.
    G1,
    /// `e^{-alpha s} / ((1 + s)(1 + alpha s)(1 + alpha^2 s)(1 + alpha^3 s))`.
    G2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderProcess {
    pub family: Family,
    pub alpha: f64,
}

impl HigherOrderProcess {
    pub fn new(family: Family, alpha: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::Plant(format!("alpha must be positive (alpha={alpha})")));
        }
        if family == Family::G1
            && (alpha.fract() != 0.0 || alpha < 1.0 || alpha > MAX_LAGS as f64)
        {
            return Err(ModelError::Plant(format!(
                "G1 needs an integer order in 1..={MAX_LAGS} (alpha={alpha})"
            )));
        }
        Ok(Self { family, alpha })
    }

    pub fn plant(&self) -> LagChain<f64> {
        let a = self.alpha;
        match self.family {
            Family::G1 => LagChain {
                gain: 1.0,
                lags: vec![1.0; a as usize],
                delay: 0.0,
            },
            Family::G2 => LagChain {
                gain: 1.0,
                lags: vec![1.0, a, a * a, a * a * a],
                delay: a,
            },
        }
    }

    /// Open-loop response to an input step of `amplitude` at `t = 0`.
    pub fn step_response(&self, amplitude: f64, dt: f64, duration: f64) -> Result<Vec<f64>, SimError> {
        open_loop_step(&self.plant(), amplitude, dt, duration)
    }

    /// Unit open-loop step test over [`STEP_TEST_WINDOW`] time scales,
    /// followed by an SOPDT fit.
    pub fn fit_step_test(&self) -> Result<FitResult, IdentError> {
        let duration = STEP_TEST_WINDOW * self.plant().time_scale();
        let y = self.step_response(1.0, STEP_TEST_DT, duration)?;
        fit_sopdt(&y, STEP_TEST_DT, 1.0)
    }

    /// Closed-loop load-disturbance rejection behind the PID.
    pub fn rejection(
        &self,
        tuning: &PidTuning<f64>,
        delta_d: f64,
        dt: f64,
        policy: &HorizonPolicy<f64>,
    ) -> Result<RejectionRun<f64>, SimError> {
        rejection_run(&self.plant(), tuning, delta_d, dt, policy)
    }
}

/// The seven validation processes P1..P7 with their tabulated `(L1, L2)`.
pub fn validation_processes() -> Vec<(&'static str, HigherOrderProcess, (f64, f64))> {
    let p = |f, a| HigherOrderProcess { family: f, alpha: a };
    vec![
        ("P1", p(Family::G1, 3.0), (0.27, 1.0)),
        ("P2", p(Family::G1, 4.0), (0.41, 1.0)),
        ("P3", p(Family::G2, 0.25), (0.24, 0.28)),
        ("P4", p(Family::G2, 0.3), (0.28, 0.33)),
        ("P5", p(Family::G2, 0.4), (0.37, 0.5)),
        ("P6", p(Family::G2, 0.5), (0.49, 1.0)),
        ("P7", p(Family::G2, 0.6), (0.53, 1.0)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: SopdtModel<f64>,
    /// RMS of the output residual.
    pub residual: f64,
    pub normalized: NormalizedProcess<f64>,
    /// Whether `normalized` lies in the design range.
    pub in_design_range: bool,
}

/// Centered moving average with the given odd-ish window; edges use the
/// available samples.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn check_settled(y: &[f64], target: f64, span: f64) -> Result<(), IdentError> {
    let tail = &y[y.len() - (y.len() / 10).max(2)..];
    let change = tail.iter().map(|v| (v - target).abs()).fold(0.0, f64::max) / span;
    if change > 0.02 {
        return Err(IdentError::NotSettled { tail_change: change });
    }
    Ok(())
}

fn first_time(y: &[f64], dt: f64, level: f64) -> Option<f64> {
    y.iter().position(|v| v.abs() >= level).map(|i| i as f64 * dt)
}

/// `[ln|k|, ln tau1, ln tau2, ln tau0]` with the gain sign kept aside.
fn to_params(m: &SopdtModel<f64>) -> Vec<f64> {
    vec![m.k.abs().ln(), m.tau1.ln(), m.tau2.ln(), m.tau0.ln()]
}

fn from_params(x: &[f64], sign: f64) -> Option<SopdtModel<f64>> {
    let v: Vec<f64> = x.iter().map(|p| p.exp()).collect();
    if v.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return None;
    }
    let (t1, t2) = if v[1] >= v[2] { (v[1], v[2]) } else { (v[2], v[1]) };
    SopdtModel::new(sign * v[0], t1, t2, v[3]).ok()
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(f64::NAN);
    (0..n).map(|i| (at(a, i) - at(b, i)).powi(2)).sum::<f64>().sqrt() / (n as f64).sqrt()
}

/// Runs the initial point plus jittered restarts and keeps the best.
fn multistart<F>(init: &SopdtModel<f64>, sign: f64, cost: F) -> (SopdtModel<f64>, f64)
where
    F: Fn(&SopdtModel<f64>) -> f64 + Sync,
{
    let base = to_params(init);
    let mut starts = vec![base.clone()];
    let mut rng = stream_rng(0x1D, 0);
    let spread = 2f64.ln();
    for _ in 0..FIT_RESTARTS {
        starts.push(base.iter().map(|b| b + rng.random_range(-spread..=spread)).collect());
    }
    let nm = NelderMead::new(0.3, 1e-7, 3000);
    let objective = |x: &[f64]| match from_params(x, sign) {
        Some(m) => cost(&m),
        None => f64::INFINITY,
    };
    let results: Vec<_> = starts.par_iter().map(|s| nm.minimize(objective, s)).collect();
    let mut best = results
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    for _ in 0..POLISH_ROUNDS {
        let again = nm.minimize(objective, &best.x);
        if !(again.value < best.value * (1.0 - 1e-9)) {
            break;
        }
        best = again;
    }
    let model = from_params(&best.x, sign).unwrap_or(*init);
    (model, best.value)
}

fn finish(model: SopdtModel<f64>, residual: f64, span: f64) -> Result<FitResult, IdentError> {
    if !(residual <= DIVERGENCE_RATIO * span) {
        return Err(IdentError::FitDiverged { residual, span });
    }
    let normalized = model.normalized();
    Ok(FitResult {
        model,
        residual,
        in_design_range: normalized.in_design_range(),
        normalized,
    })
}

/// Graphical start from an open-loop step: gain from the final value, dead
/// time from the 2% departure, `tau1 + tau2` from the 63% rise split 2:1.
pub fn graphical_start(y: &[f64], dt: f64, u_amplitude: f64) -> Result<SopdtModel<f64>, IdentError> {
    let y_end = *y.last().ok_or(IdentError::Degenerate)?;
    let span = y_end.abs();
    if span == 0.0 || u_amplitude == 0.0 {
        return Err(IdentError::Degenerate);
    }
    let tau0 = first_time(y, dt, 0.02 * span).unwrap_or(dt).max(dt);
    let t63 = first_time(y, dt, 0.632 * span).unwrap_or(tau0 + dt);
    let sum = (t63 - tau0).max(2.0 * dt);
    Ok(SopdtModel::new(y_end / u_amplitude, sum * 2.0 / 3.0, sum / 3.0, tau0)?)
}

/// Least-squares SOPDT fit to an open-loop step record `y` (raw output
/// deviation, sampled every `dt` from the step instant).
pub fn fit_sopdt(y: &[f64], dt: f64, u_amplitude: f64) -> Result<FitResult, IdentError> {
    if y.len() < 10 {
        return Err(IdentError::Degenerate);
    }
    let init = graphical_start(y, dt, u_amplitude)?;
    let span = y.last().copied().unwrap_or(0.0).abs();
    check_settled(y, *y.last().unwrap(), span)?;
    let duration = dt * (y.len() - 1) as f64;
    let cost = |m: &SopdtModel<f64>| match open_loop_step(&m.plant(), u_amplitude, dt, duration) {
        Ok(sim) => rms(&sim, y),
        Err(_) => f64::INFINITY,
    };
    let (model, residual) = multistart(&init, init.k.signum(), cost);
    finish(model, residual, span)
}

/// Rough start for closed-loop records: dead time from the 2% departure,
/// lag sum from the time to peak, gain from the peak height.
pub fn closed_loop_start(
    y: &[f64],
    dt: f64,
    delta_d: f64,
) -> Result<SopdtModel<f64>, IdentError> {
    let (ip, peak) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, v)| (i, *v))
        .ok_or(IdentError::Degenerate)?;
    if peak == 0.0 || delta_d == 0.0 {
        return Err(IdentError::Degenerate);
    }
    let tau0 = first_time(y, dt, 0.02 * peak.abs()).unwrap_or(dt).max(dt);
    let sum = (ip as f64 * dt - tau0).max(2.0 * dt);
    Ok(SopdtModel::new(2.0 * peak / delta_d, sum * 2.0 / 3.0, sum / 3.0, tau0)?)
}

/// SOPDT whose closed-loop rejection under the known physical `tuning`
/// best matches the recorded physical deviation `resp.r * resp.gain *
/// resp.delta_d`.
pub fn fit_sopdt_closed_loop(
    resp: &RejectionResponse<f64>,
    tuning: &PidTuning<f64>,
    delta_d: f64,
) -> Result<FitResult, IdentError> {
    let y: Vec<f64> = resp.r.iter().map(|v| v * resp.gain * resp.delta_d).collect();
    let init = closed_loop_start(&y, resp.dt, delta_d)?;
    fit_closed_loop_from(&y, resp.dt, tuning, delta_d, &init)
}

/// As [`fit_sopdt_closed_loop`] with an explicit initial model.
pub fn fit_closed_loop_from(
    y: &[f64],
    dt: f64,
    tuning: &PidTuning<f64>,
    delta_d: f64,
    init: &SopdtModel<f64>,
) -> Result<FitResult, IdentError> {
    if y.len() < 10 {
        return Err(IdentError::Degenerate);
    }
    let span = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if span == 0.0 {
        return Err(IdentError::Degenerate);
    }
    check_settled(y, 0.0, span)?;
    let duration = dt * (y.len() - 1) as f64;
    let policy = HorizonPolicy::fixed(duration);
    let cost = |m: &SopdtModel<f64>| match rejection_run(&m.plant(), tuning, delta_d, dt, &policy) {
        Ok(run) if run.termination == Termination::HorizonCap => {
            let scale = m.k * delta_d;
            let sim: Vec<f64> = run.response.r.iter().map(|v| v * scale).collect();
            rms(&sim, y)
        }
        _ => f64::INFINITY,
    };
    let (model, residual) = multistart(init, init.k.signum(), cost);
    finish(model, residual, span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g1_order_three_matches_closed_form() {
        let p = HigherOrderProcess::new(Family::G1, 3.0).unwrap();
        let dt = 0.01;
        let y = p.step_response(1.0, dt, 30.0).unwrap();
        for (i, v) in y.iter().enumerate().step_by(50) {
            let t = i as f64 * dt;
            let exact = 1.0 - (-t).exp() * (1.0 + t + t * t / 2.0);
            assert!((v - exact).abs() < 1e-3, "t={t}");
        }
        assert!((y.last().unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn g2_has_dead_time_and_monotone_rise() {
        let p = HigherOrderProcess::new(Family::G2, 0.25).unwrap();
        let dt = 0.005;
        let y = p.step_response(1.0, dt, 20.0).unwrap();
        let delay_steps = (0.25 / dt) as usize;
        assert!(y[..delay_steps].iter().all(|v| *v == 0.0));
        assert!(y.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!((y.last().unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn g2_small_alpha_is_first_order() {
        let p = HigherOrderProcess::new(Family::G2, 1e-6).unwrap();
        let dt = 0.001;
        let y = p.step_response(1.0, dt, 8.0).unwrap();
        for (i, v) in y.iter().enumerate() {
            let exact = 1.0 - (-(i as f64) * dt).exp();
            assert!((v - exact).abs() < 1e-3);
        }
    }

    #[test]
    fn g1_rejects_fractional_order() {
        assert!(HigherOrderProcess::new(Family::G1, 2.5).is_err());
        assert!(HigherOrderProcess::new(Family::G2, 0.0).is_err());
    }

    #[test]
    fn open_loop_self_recovery() {
        let truth = SopdtModel::new(1.0, 1.0, 0.5, 2.0 / 3.0).unwrap();
        let dt = 0.01;
        let y = open_loop_step(&truth.plant(), 1.0, dt, 15.0).unwrap();
        let fit = fit_sopdt(&y, dt, 1.0).unwrap();
        let m = fit.model;
        for (a, b) in [(m.k, 1.0), (m.tau1, 1.0), (m.tau2, 0.5), (m.tau0, 2.0 / 3.0)] {
            assert!((a / b - 1.0).abs() < 0.01, "{m:?}");
        }
    }

    #[test]
    fn unsettled_record_is_rejected() {
        let y: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        assert!(matches!(fit_sopdt(&y, 0.01, 1.0), Err(IdentError::NotSettled { .. })));
    }

    #[test]
    fn moving_average_smooths_constant_exactly() {
        assert_eq!(moving_average(&[2.0; 7], 3), vec![2.0; 7]);
        let v = moving_average(&[0.0, 3.0, 0.0], 3);
        assert_eq!(v, vec![1.5, 1.0, 1.5]);
    }
}
