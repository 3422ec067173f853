//! Closed-loop simulation of a PID controller acting on a lag chain with
//! input dead time, driven by a load-disturbance step at the plant input.
//!
//! The plant is a chain of first-order lags preceded by a pure transport
//! delay. A second-order-plus-dead-time (SOPDT) process is the two-lag case.
//! Lag states and controller states are integrated with classical fixed-step
//! RK4; the delayed plant input is read from a ring buffer of the input
//! history with linear interpolation between stored samples.
//!
//! Closed-loop outputs are reported as the normalized deviation
//! `r(t) = (y(t) - y_pre) / (k * delta_d)`, so the first peak is positive for
//! any sign of `k * delta_d`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{trapezoid, Real};

/// Largest supported lag-chain order.
pub const MAX_LAGS: usize = 8;
const MAX_STATES: usize = MAX_LAGS + 2;

/// Responses whose magnitude exceeds this are declared unstable.
pub const INSTABILITY_BOUND: f64 = 1000.0;

/// Default derivative filter ratio `N` (filter time constant `Td / N`).
pub const DEFAULT_FILTER_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid SOPDT parameters: {0}")]
    Sopdt(String),
    #[error("normalized parameters out of domain: L1={l1}, L2={l2}")]
    Normalized { l1: f64, l2: f64 },
    #[error("invalid PID tuning: {0}")]
    Tuning(String),
    #[error("invalid plant: {0}")]
    Plant(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("closed loop unstable: |r| exceeded {INSTABILITY_BOUND} at t={time}")]
    Unstable { time: f64 },
    #[error("non-finite simulator state at t={time}")]
    NumericalFailure { time: f64 },
    #[error("invalid simulation setup: {0}")]
    Setup(String),
}

/// Physical SOPDT process `k e^{-tau0 s} / ((tau1 s + 1)(tau2 s + 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SopdtModel<T = f64> {
    pub k: T,
    pub tau1: T,
    pub tau2: T,
    pub tau0: T,
}

impl<T: Real> SopdtModel<T> {
    pub fn new(k: T, tau1: T, tau2: T, tau0: T) -> Result<Self, ModelError> {
        let all_finite = [k, tau1, tau2, tau0].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(ModelError::Sopdt("non-finite parameter".into()));
        }
        if k == T::zero() {
            return Err(ModelError::Sopdt("gain must be non-zero".into()));
        }
        if !(tau2 > T::zero() && tau1 >= tau2) {
            return Err(ModelError::Sopdt(format!(
                "time constants must satisfy tau1 >= tau2 > 0 (tau1={tau1}, tau2={tau2})"
            )));
        }
        if !(tau0 > T::zero()) {
            return Err(ModelError::Sopdt(format!("dead time must be positive (tau0={tau0})")));
        }
        Ok(Self { k, tau1, tau2, tau0 })
    }

    /// `L1 = tau0 / (tau1 + tau0)`, `L2 = tau2 / tau1`.
    pub fn normalized(&self) -> NormalizedProcess<T> {
        NormalizedProcess {
            l1: self.tau0 / (self.tau1 + self.tau0),
            l2: self.tau2 / self.tau1,
        }
    }

    /// Characteristic time `tau1 + tau0` used by the horizon policy.
    pub fn time_scale(&self) -> T {
        self.tau1 + self.tau0
    }

    /// Default integration step: `min(tau2, tau0) / 50`, clamped to
    /// `[1e-3, 1e-2]` in time normalized by `tau1`.
    pub fn default_step(&self) -> T {
        let fastest = self.tau2.min(self.tau0) / self.tau1;
        let normalized = (fastest / T::lit(50.0)).max(T::lit(1e-3)).min(T::lit(1e-2));
        normalized * self.tau1
    }

    pub fn plant(&self) -> LagChain<T> {
        LagChain {
            gain: self.k,
            lags: vec![self.tau1, self.tau2],
            delay: self.tau0,
        }
    }

    /// Same model with every time constant multiplied by `a`.
    pub fn time_scaled(&self, a: T) -> Self {
        Self {
            k: self.k,
            tau1: self.tau1 * a,
            tau2: self.tau2 * a,
            tau0: self.tau0 * a,
        }
    }
}

/// Two relative dynamical parameters of an SOPDT process with unit gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedProcess<T = f64> {
    #[serde(rename = "L1")]
    pub l1: T,
    #[serde(rename = "L2")]
    pub l2: T,
}

impl<T: Real> NormalizedProcess<T> {
    pub const DESIGN_L1: (f64, f64) = (0.1, 0.6);
    pub const DESIGN_L2: (f64, f64) = (0.1, 1.0);

    /// Accepts `L1 in (0, 1)` and `L2 in (0, 1]`.
    pub fn new(l1: T, l2: T) -> Result<Self, ModelError> {
        let ok = l1 > T::zero() && l1 < T::one() && l2 > T::zero() && l2 <= T::one();
        if !ok {
            return Err(ModelError::Normalized {
                l1: l1.as_f64(),
                l2: l2.as_f64(),
            });
        }
        Ok(Self { l1, l2 })
    }

    /// Whether the pair lies in the design rectangle `[0.1, 0.6] x [0.1, 1.0]`.
    pub fn in_design_range(&self) -> bool {
        let (l1, l2) = (self.l1.as_f64(), self.l2.as_f64());
        let eps = 1e-12;
        l1 >= Self::DESIGN_L1.0 - eps
            && l1 <= Self::DESIGN_L1.1 + eps
            && l2 >= Self::DESIGN_L2.0 - eps
            && l2 <= Self::DESIGN_L2.1 + eps
    }

    /// Canonical model: `k = 1`, `tau1 = 1`, `tau2 = L2`, `tau0 = L1 / (1 - L1)`.
    pub fn denormalize(&self) -> SopdtModel<T> {
        SopdtModel {
            k: T::one(),
            tau1: T::one(),
            tau2: self.l2,
            tau0: self.l1 / (T::one() - self.l1),
        }
    }
}

/// Free-function form of [`NormalizedProcess::denormalize`] with domain checks.
pub fn denormalize<T: Real>(p: NormalizedProcess<T>) -> Result<SopdtModel<T>, ModelError> {
    NormalizedProcess::new(p.l1, p.l2).map(|p| p.denormalize())
}

/// Ideal parallel PID `kr (1 + 1/(Ti s) + Td s / (1 + Td s / N))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidTuning<T = f64> {
    pub kr: T,
    #[serde(rename = "Ti")]
    pub ti: T,
    #[serde(rename = "Td")]
    pub td: T,
    #[serde(rename = "N")]
    pub n: T,
}

impl<T: Real> PidTuning<T> {
    pub fn new(kr: T, ti: T, td: T) -> Result<Self, ModelError> {
        Self::with_filter(kr, ti, td, T::lit(DEFAULT_FILTER_RATIO))
    }

    pub fn with_filter(kr: T, ti: T, td: T, n: T) -> Result<Self, ModelError> {
        if !(kr > T::zero() && kr.is_finite()) {
            return Err(ModelError::Tuning(format!("kr must be positive (kr={kr})")));
        }
        if !(ti > T::zero()) {
            return Err(ModelError::Tuning(format!("Ti must be positive (Ti={ti})")));
        }
        if !(td >= T::zero() && td.is_finite()) {
            return Err(ModelError::Tuning(format!("Td must be non-negative (Td={td})")));
        }
        if !(n > T::zero() && n.is_finite()) {
            return Err(ModelError::Tuning(format!("N must be positive (N={n})")));
        }
        Ok(Self { kr, ti, td, n })
    }

    /// Multiplies `kr`, `Ti`, `Td` by the given factors.
    pub fn scaled(&self, a1: T, a2: T, a3: T) -> Self {
        Self {
            kr: self.kr * a1,
            ti: self.ti * a2,
            td: self.td * a3,
            n: self.n,
        }
    }

    /// Maps a tuning designed on the canonical (unit gain, `tau1 = 1`)
    /// process onto the physical `model`.
    pub fn to_physical(&self, model: &SopdtModel<T>) -> Self {
        Self {
            kr: self.kr / model.k.abs(),
            ti: self.ti * model.tau1,
            td: self.td * model.tau1,
            n: self.n,
        }
    }

    /// Inverse of [`PidTuning::to_physical`].
    pub fn to_canonical(&self, model: &SopdtModel<T>) -> Self {
        Self {
            kr: self.kr * model.k.abs(),
            ti: self.ti / model.tau1,
            td: self.td / model.tau1,
            n: self.n,
        }
    }
}

/// Lag chain `gain e^{-delay s} / prod(lag_i s + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagChain<T = f64> {
    pub gain: T,
    pub lags: Vec<T>,
    pub delay: T,
}

impl<T: Real> LagChain<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.lags.is_empty() || self.lags.len() > MAX_LAGS {
            return Err(ModelError::Plant(format!(
                "lag count {} outside 1..={MAX_LAGS}",
                self.lags.len()
            )));
        }
        if self.lags.iter().any(|&l| !(l > T::zero() && l.is_finite())) {
            return Err(ModelError::Plant("lag time constants must be positive".into()));
        }
        if !(self.delay >= T::zero() && self.delay.is_finite()) {
            return Err(ModelError::Plant("delay must be non-negative".into()));
        }
        if self.gain == T::zero() || !self.gain.is_finite() {
            return Err(ModelError::Plant("gain must be finite and non-zero".into()));
        }
        Ok(())
    }

    /// Characteristic time: sum of lags plus delay.
    pub fn time_scale(&self) -> T {
        self.lags.iter().fold(self.delay, |acc, &l| acc + l)
    }

    pub fn dominant_lag(&self) -> T {
        self.lags.iter().fold(T::zero(), |acc, &l| acc.max(l))
    }

    /// `min(fastest lag, delay) / 50` clamped to `[1e-3, 1e-2]` relative to
    /// the dominant lag.
    pub fn default_step(&self) -> T {
        let dominant = self.dominant_lag();
        let mut fastest = self.lags.iter().fold(T::infinity(), |acc, &l| acc.min(l));
        if self.delay > T::zero() {
            fastest = fastest.min(self.delay);
        }
        let normalized = (fastest / dominant / T::lit(50.0))
            .max(T::lit(1e-3))
            .min(T::lit(1e-2));
        normalized * dominant
    }
}

/// Uniformly sampled normalized rejection trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionResponse<T = f64> {
    pub dt: T,
    pub r: Vec<T>,
    pub horizon: T,
    pub delta_d: T,
    /// Process gain used for normalization; `|gain * delta_d|` converts `r`
    /// back to the physical control error.
    pub gain: T,
    pub converged: bool,
}

impl<T: Real> RejectionResponse<T> {
    /// Builds a response from raw normalized samples.
    pub fn from_samples(dt: T, r: Vec<T>, delta_d: T, gain: T, converged: bool) -> Self {
        let horizon = dt * T::from_usize_lossy(r.len().saturating_sub(1));
        Self {
            dt,
            r,
            horizon,
            delta_d,
            gain,
            converged,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        self.dt * T::from_usize_lossy(i)
    }

    /// Linear interpolation of `r` at time `t`; zero outside the record
    /// after its end (settled tail) and before zero.
    pub fn value_at(&self, t: T) -> T {
        if t < T::zero() || self.r.is_empty() {
            return T::zero();
        }
        let pos = t / self.dt;
        let i0 = pos.floor();
        let idx = i0.to_usize().unwrap_or(usize::MAX);
        if idx >= self.r.len() - 1 {
            if idx == self.r.len() - 1 && pos == i0 {
                return self.r[idx];
            }
            return T::zero();
        }
        let frac = pos - i0;
        self.r[idx] * (T::one() - frac) + self.r[idx + 1] * frac
    }

    /// Resamples onto a grid with step `dt` covering the same horizon.
    pub fn resampled(&self, dt: T) -> Self {
        let n = steps_for(self.horizon, dt);
        let r = (0..=n)
            .map(|i| self.value_at(dt * T::from_usize_lossy(i)))
            .collect();
        Self::from_samples(dt, r, self.delta_d, self.gain, self.converged)
    }

    /// Writes `t,r` CSV with full-precision decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.r.len() * 24 + 4);
        out.push_str("t,r\n");
        for (i, v) in self.r.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.time(i), v);
        }
        out
    }

    /// Parses `t,r` (or `t,y`) CSV; the time column must be uniform.
    pub fn from_csv(text: &str, delta_d: T, gain: T, converged: bool) -> Result<Self, SimError> {
        let (times, values) = parse_two_column_csv::<T>(text).map_err(SimError::Setup)?;
        let dt = uniform_step(&times).map_err(SimError::Setup)?;
        Ok(Self::from_samples(dt, values, delta_d, gain, converged))
    }
}

/// Parses a two-column numeric CSV with a header line.
pub fn parse_two_column_csv<T: Real>(text: &str) -> Result<(Vec<T>, Vec<T>), String> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let parse = |s: Option<&str>| -> Result<T, String> {
            let s = s.ok_or_else(|| format!("line {}: missing column", lineno + 1))?;
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
            Ok(T::lit(v))
        };
        times.push(parse(cols.next())?);
        values.push(parse(cols.next())?);
    }
    if times.len() < 2 {
        return Err("need at least two samples".into());
    }
    Ok((times, values))
}

fn uniform_step<T: Real>(times: &[T]) -> Result<T, String> {
    let n = times.len() - 1;
    let dt = (times[n] - times[0]) / T::from_usize_lossy(n);
    if !(dt > T::zero()) {
        return Err("time column must increase".into());
    }
    let tol = dt * T::lit(1e-6) + T::lit(1e-12);
    for (i, t) in times.iter().enumerate() {
        let expected = times[0] + dt * T::from_usize_lossy(i);
        if (*t - expected).abs() > tol.max(dt * T::lit(1e-3)) {
            return Err(format!("non-uniform sampling at row {}", i + 1));
        }
    }
    Ok(dt)
}

/// Number of `dt` steps covering `duration`, robust to rounding when the
/// ratio is integral.
pub fn steps_for<T: Real>(duration: T, dt: T) -> usize {
    let x = duration / dt;
    let rounded = x.round();
    let steps = if (x - rounded).abs() <= T::lit(1e-6) * rounded.max(T::one()) {
        rounded
    } else {
        x.ceil()
    };
    steps.to_usize().unwrap_or(0)
}

/// When to stop a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonPolicy<T = f64> {
    /// `|r|` below this counts as settled.
    pub settle_band: T,
    /// Required continuous time inside the band; `None` disables settling
    /// detection (fixed-length run).
    pub settle_window: Option<T>,
    /// Hard cap on simulated time.
    pub t_max: T,
}

impl<T: Real> HorizonPolicy<T> {
    /// Settled when `|r| < 1e-3` for `5 ts`; hard cap `200 ts`.
    pub fn for_time_scale(ts: T) -> Self {
        Self {
            settle_band: T::lit(1e-3),
            settle_window: Some(ts * T::lit(5.0)),
            t_max: ts * T::lit(200.0),
        }
    }

    pub fn for_model(model: &SopdtModel<T>) -> Self {
        Self::for_time_scale(model.time_scale())
    }

    pub fn fixed(duration: T) -> Self {
        Self {
            settle_band: T::lit(1e-3),
            settle_window: None,
            t_max: duration,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Settled,
    HorizonCap,
    Unstable,
    NonFinite,
}

/// A closed-loop run together with its termination cause. Unstable and
/// non-finite runs carry the samples collected up to the failure.
#[derive(Debug, Clone)]
pub struct RejectionRun<T = f64> {
    pub response: RejectionResponse<T>,
    pub termination: Termination,
}

impl<T: Real> RejectionRun<T> {
    pub fn into_result(self) -> Result<RejectionResponse<T>, SimError> {
        let time = self.response.horizon.as_f64();
        match self.termination {
            Termination::Settled | Termination::HorizonCap => Ok(self.response),
            Termination::Unstable => Err(SimError::Unstable { time }),
            Termination::NonFinite => Err(SimError::NumericalFailure { time }),
        }
    }
}

/// Load-disturbance rejection of `model` under `tuning`.
pub fn simulate_rejection<T: Real>(
    model: &SopdtModel<T>,
    tuning: &PidTuning<T>,
    delta_d: T,
    dt: T,
    policy: &HorizonPolicy<T>,
) -> Result<RejectionResponse<T>, SimError> {
    rejection_run(&model.plant(), tuning, delta_d, dt, policy)?.into_result()
}

/// Rejection run on an arbitrary lag chain; never fails on instability.
pub fn rejection_run<T: Real>(
    plant: &LagChain<T>,
    tuning: &PidTuning<T>,
    delta_d: T,
    dt: T,
    policy: &HorizonPolicy<T>,
) -> Result<RejectionRun<T>, SimError> {
    if delta_d == T::zero() || !delta_d.is_finite() {
        return Err(SimError::Setup("delta_d must be finite and non-zero".into()));
    }
    let mut engine = Engine::new(plant, Some(tuning), delta_d, dt)?;
    let scale = plant.gain * delta_d;
    let (samples, termination) = engine.run(
        scale,
        Some(T::lit(INSTABILITY_BOUND)),
        policy,
    );
    let converged = termination == Termination::Settled;
    Ok(RejectionRun {
        response: RejectionResponse::from_samples(dt, samples, delta_d, plant.gain, converged),
        termination,
    })
}

/// Open-loop response of `plant` to an input step of `amplitude` applied at
/// `t = 0`, sampled every `dt` over `duration` (raw output, not normalized).
pub fn open_loop_step<T: Real>(
    plant: &LagChain<T>,
    amplitude: T,
    dt: T,
    duration: T,
) -> Result<Vec<T>, SimError> {
    let mut engine = Engine::new(plant, None, amplitude, dt)?;
    let (samples, termination) = engine.run(T::one(), None, &HorizonPolicy::fixed(duration));
    match termination {
        Termination::NonFinite => Err(SimError::NumericalFailure {
            time: (dt * T::from_usize_lossy(samples.len())).as_f64(),
        }),
        _ => Ok(samples),
    }
}

/// Integral of the absolute physical control error, `∫ |r| |k Δd| dt`.
pub fn iae<T: Real>(resp: &RejectionResponse<T>) -> T {
    trapezoid(resp.dt, resp.r.iter().map(|v| v.abs())) * (resp.gain * resp.delta_d).abs()
}

struct Controller<T> {
    /// `sign(k) * kr`
    gain: T,
    inv_ti: T,
    /// `(N, N / Td)` when derivative action is present.
    derivative: Option<(T, T)>,
}

struct Engine<'a, T> {
    gain: T,
    lags: &'a [T],
    dynamic: [bool; MAX_LAGS],
    output_state: usize,
    n_lags: usize,
    dt: T,
    delay_whole: i64,
    delay_frac: T,
    controller: Option<Controller<T>>,
    excitation: T,
    history: Vec<T>,
}

impl<'a, T: Real> Engine<'a, T> {
    fn new(
        plant: &'a LagChain<T>,
        tuning: Option<&PidTuning<T>>,
        excitation: T,
        dt: T,
    ) -> Result<Self, SimError> {
        plant.validate().map_err(|e| SimError::Setup(e.to_string()))?;
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(SimError::Setup(format!("step must be positive (dt={dt})")));
        }
        // Lags much faster than the step collapse to unit static gain.
        let mut dynamic = [false; MAX_LAGS];
        let mut output_state = None;
        for (i, &lag) in plant.lags.iter().enumerate() {
            dynamic[i] = lag >= dt * T::lit(0.5);
            if dynamic[i] {
                output_state = Some(i);
            }
        }
        let output_state = output_state.ok_or_else(|| {
            SimError::Setup("no lag is slow enough to integrate at this step".into())
        })?;
        let mut delay_steps = plant.delay / dt;
        let nearest = delay_steps.round();
        if (delay_steps - nearest).abs() <= T::lit(1e-9) * nearest.max(T::one()) {
            delay_steps = nearest;
        }
        let delay_whole = delay_steps.floor();
        let controller = tuning.map(|t| {
            let direction = plant.gain.signum();
            Controller {
                gain: direction * t.kr,
                inv_ti: T::one() / t.ti,
                derivative: (t.td > T::zero()).then(|| (t.n, t.n / t.td)),
            }
        });
        let capacity = delay_whole.to_usize().unwrap_or(0) + 3;
        Ok(Self {
            gain: plant.gain,
            lags: &plant.lags,
            dynamic,
            output_state,
            n_lags: plant.lags.len(),
            dt,
            delay_whole: delay_whole.to_i64().unwrap_or(0),
            delay_frac: delay_steps - delay_whole,
            controller,
            excitation,
            history: vec![T::zero(); capacity],
        })
    }

    /// Signal entering the delay line: controller output plus load step, or
    /// the open-loop input step.
    fn drive(&self, s: &[T; MAX_STATES]) -> T {
        match &self.controller {
            None => self.excitation,
            Some(c) => {
                let e = -s[self.output_state];
                let n = self.n_lags;
                let d = match c.derivative {
                    Some((ratio, _)) => ratio * (e - s[n + 1]),
                    None => T::zero(),
                };
                c.gain * (e + s[n] * c.inv_ti + d) + self.excitation
            }
        }
    }

    /// Delayed drive at time `(k + c) dt - delay`. `None` when that instant
    /// lies inside the current step (delay shorter than the stage offset).
    fn delayed(&self, k: usize, c: T) -> Option<T> {
        let base = k as i64 - self.delay_whole;
        let offset = c - self.delay_frac;
        let (i0, frac) = if offset < T::zero() {
            (base - 1, T::one() + offset)
        } else if offset >= T::one() {
            (base + 1, offset - T::one())
        } else {
            (base, offset)
        };
        if i0 < 0 {
            return Some(T::zero());
        }
        let i0u = i0 as usize;
        if i0u > k || (i0u == k && frac > T::zero()) {
            return None;
        }
        let cap = self.history.len();
        let v0 = self.history[i0u % cap];
        if frac == T::zero() {
            return Some(v0);
        }
        let v1 = self.history[(i0u + 1) % cap];
        Some(v0 + (v1 - v0) * frac)
    }

    fn derivatives(&self, s: &[T; MAX_STATES], w_delayed: T, out: &mut [T; MAX_STATES]) {
        let n = self.n_lags;
        let mut signal = self.gain * w_delayed;
        for i in 0..n {
            if self.dynamic[i] {
                out[i] = (signal - s[i]) / self.lags[i];
                signal = s[i];
            } else {
                out[i] = T::zero();
            }
        }
        if let Some(c) = &self.controller {
            let e = -s[self.output_state];
            out[n] = e;
            out[n + 1] = match c.derivative {
                Some((_, rate)) => (e - s[n + 1]) * rate,
                None => T::zero(),
            };
        }
    }

    fn stage(&self, k: usize, c: T, s: &[T; MAX_STATES], out: &mut [T; MAX_STATES]) {
        let w = self.delayed(k, c).unwrap_or_else(|| self.drive(s));
        self.derivatives(s, w, out);
    }

    fn run(
        &mut self,
        normalization: T,
        blowup: Option<T>,
        policy: &HorizonPolicy<T>,
    ) -> (Vec<T>, Termination) {
        let n_states = self.n_lags + 2;
        let max_steps = steps_for(policy.t_max, self.dt);
        let window_steps = policy.settle_window.map(|w| steps_for(w, self.dt));
        let half = T::lit(0.5);
        let dt = self.dt;
        let sixth = dt / T::lit(6.0);

        let mut s = [T::zero(); MAX_STATES];
        let mut samples = Vec::with_capacity(max_steps.min(1 << 16) + 1);
        samples.push(T::zero());
        let cap = self.history.len();
        self.history[0] = self.drive(&s);
        let mut last_outside = 0usize;

        let mut k1 = [T::zero(); MAX_STATES];
        let mut k2 = [T::zero(); MAX_STATES];
        let mut k3 = [T::zero(); MAX_STATES];
        let mut k4 = [T::zero(); MAX_STATES];
        let mut tmp = [T::zero(); MAX_STATES];

        for k in 0..max_steps {
            if let Some(w) = window_steps {
                if k - last_outside >= w {
                    return (samples, Termination::Settled);
                }
            }
            self.stage(k, T::zero(), &s, &mut k1);
            for i in 0..n_states {
                tmp[i] = s[i] + k1[i] * dt * half;
            }
            self.stage(k, half, &tmp, &mut k2);
            for i in 0..n_states {
                tmp[i] = s[i] + k2[i] * dt * half;
            }
            self.stage(k, half, &tmp, &mut k3);
            for i in 0..n_states {
                tmp[i] = s[i] + k3[i] * dt;
            }
            self.stage(k, T::one(), &tmp, &mut k4);
            for i in 0..n_states {
                s[i] = s[i] + sixth * (k1[i] + (k2[i] + k3[i]) * T::lit(2.0) + k4[i]);
            }

            let value = s[self.output_state] / normalization;
            if !value.is_finite() || s[..n_states].iter().any(|v| !v.is_finite()) {
                return (samples, Termination::NonFinite);
            }
            samples.push(value);
            if let Some(limit) = blowup {
                if value.abs() > limit {
                    return (samples, Termination::Unstable);
                }
            }
            if value.abs() >= policy.settle_band {
                last_outside = k + 1;
            }
            self.history[(k + 1) % cap] = self.drive(&s);
        }
        if let Some(w) = window_steps {
            if max_steps - last_outside >= w {
                return (samples, Termination::Settled);
            }
        }
        (samples, Termination::HorizonCap)
    }
}
