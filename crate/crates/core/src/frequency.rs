//! Open-loop frequency response and first-crossover gain/phase margins.
//!
//! Phase is evaluated analytically so it is already unwrapped: the PID term
//! contributes its principal argument (its real part is always positive),
//! each lag contributes `-atan(w tau)` and the dead time `-w tau0`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::process::{LagChain, PidTuning, SopdtModel};
use crate::scalar::Real;

const POINTS_PER_DECADE: usize = 50;
const BISECTION_STEPS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrequencyError {
    #[error("no gain crossover inside the scanned frequency band")]
    NoGainCrossover,
}

/// Gain and phase margins with their crossover frequencies.
///
/// A loop whose phase never reaches -180 degrees in the band has
/// `gain_margin = omega_pc = +inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct MarginPair<T = f64> {
    #[serde(rename = "Am", with = "crate::serde_inf")]
    pub gain_margin: T,
    /// Degrees.
    #[serde(rename = "phim")]
    pub phase_margin: T,
    #[serde(with = "crate::serde_inf")]
    pub omega_pc: T,
    pub omega_gc: T,
}

impl<T: Real> MarginPair<T> {
    pub fn has_phase_crossover(&self) -> bool {
        self.gain_margin.is_finite()
    }
}

/// `C(jw)` of the filtered ideal PID.
pub fn controller_response<T: Real>(tuning: &PidTuning<T>, omega: T) -> Complex<T> {
    let jw = Complex::new(T::zero(), omega);
    let one = Complex::new(T::one(), T::zero());
    let integral = one / (jw * tuning.ti);
    let derivative = if tuning.td > T::zero() {
        (jw * tuning.td) / (one + jw * (tuning.td / tuning.n))
    } else {
        Complex::new(T::zero(), T::zero())
    };
    (one + integral + derivative) * tuning.kr
}

/// `G(jw)` of a lag chain.
pub fn plant_response<T: Real>(plant: &LagChain<T>, omega: T) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let mut g = Complex::from_polar(plant.gain, -omega * plant.delay);
    for &lag in &plant.lags {
        g = g / (one + Complex::new(T::zero(), omega * lag));
    }
    g
}

/// Loop transfer `C(jw) G(jw)` including the controller action direction
/// (`sign(k)`), so stable loops always show negative-feedback phase.
pub fn open_loop_response<T: Real>(
    model: &SopdtModel<T>,
    tuning: &PidTuning<T>,
    omega: T,
) -> Complex<T> {
    chain_loop_response(&model.plant(), tuning, omega)
}

pub fn chain_loop_response<T: Real>(
    plant: &LagChain<T>,
    tuning: &PidTuning<T>,
    omega: T,
) -> Complex<T> {
    controller_response(tuning, omega) * plant_response(plant, omega) * plant.gain.signum()
}

fn loop_magnitude<T: Real>(plant: &LagChain<T>, tuning: &PidTuning<T>, omega: T) -> T {
    let mut m = controller_response(tuning, omega).norm() * plant.gain.abs();
    for &lag in &plant.lags {
        m = m / (T::one() + omega * omega * lag * lag).sqrt();
    }
    m
}

/// Unwrapped loop phase in radians.
pub fn loop_phase<T: Real>(plant: &LagChain<T>, tuning: &PidTuning<T>, omega: T) -> T {
    let c = controller_response(tuning, omega);
    let mut phase = c.im.atan2(c.re) - omega * plant.delay;
    for &lag in &plant.lags {
        phase = phase - (omega * lag).atan();
    }
    phase
}

/// Default scan band `[1e-3, 1e3] / T` with `T = max(dominant lag, delay)`.
pub fn default_band<T: Real>(plant: &LagChain<T>) -> (T, T) {
    let t = plant.dominant_lag().max(plant.delay);
    (T::lit(1e-3) / t, T::lit(1e3) / t)
}

/// Margins of an SOPDT loop over the default band.
pub fn margins<T: Real>(
    model: &SopdtModel<T>,
    tuning: &PidTuning<T>,
) -> Result<MarginPair<T>, FrequencyError> {
    let plant = model.plant();
    chain_margins(&plant, tuning, default_band(&plant))
}

/// First-crossover margins of `plant` under `tuning` scanned over `band`.
pub fn chain_margins<T: Real>(
    plant: &LagChain<T>,
    tuning: &PidTuning<T>,
    band: (T, T),
) -> Result<MarginPair<T>, FrequencyError> {
    let grid = log_grid(band);
    let log_mag = |w: T| loop_magnitude(plant, tuning, w).ln();
    let omega_gc = first_crossing(&grid, log_mag).ok_or(FrequencyError::NoGainCrossover)?;
    let phase_margin =
        T::lit(180.0) + loop_phase(plant, tuning, omega_gc).to_degrees();
    let (omega_pc, gain_margin) = match phase_crossover(plant, tuning, band) {
        Some((w, am)) => (w, am),
        None => (T::infinity(), T::infinity()),
    };
    Ok(MarginPair {
        gain_margin,
        phase_margin,
        omega_pc,
        omega_gc,
    })
}

/// First frequency where the unwrapped phase reaches -180 degrees and the
/// gain margin `1 / |L|` there. Works for loops without integral action.
pub fn phase_crossover<T: Real>(
    plant: &LagChain<T>,
    tuning: &PidTuning<T>,
    band: (T, T),
) -> Option<(T, T)> {
    let grid = log_grid(band);
    let pi = T::PI();
    let w = first_crossing(&grid, |w| loop_phase(plant, tuning, w) + pi)?;
    Some((w, T::one() / loop_magnitude(plant, tuning, w)))
}

fn log_grid<T: Real>((lo, hi): (T, T)) -> Vec<T> {
    let (llo, lhi) = (lo.log10(), hi.log10());
    let decades = (lhi - llo).as_f64().max(0.0);
    let n = ((decades * POINTS_PER_DECADE as f64).ceil() as usize).max(2);
    (0..=n)
        .map(|i| {
            let frac = T::from_usize_lossy(i) / T::from_usize_lossy(n);
            T::lit(10.0).powf(llo + (lhi - llo) * frac)
        })
        .collect()
}

/// Smallest grid-bracketed root of a function that starts positive,
/// refined by bisection in log-frequency.
fn first_crossing<T: Real>(grid: &[T], f: impl Fn(T) -> T) -> Option<T> {
    let first = f(grid[0]);
    if !(first > T::zero()) {
        return None;
    }
    let mut prev = grid[0];
    for &w in &grid[1..] {
        if f(w) <= T::zero() {
            let (mut lo, mut hi) = (prev.ln(), w.ln());
            for _ in 0..BISECTION_STEPS {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid.exp()) > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(((lo + hi) * T::lit(0.5)).exp());
        }
        prev = w;
    }
    None
}
