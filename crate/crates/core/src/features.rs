//! The 30 control performance indices (CPIs) of a rejection response.
//!
//! All features are computed on the normalized trajectory `r(t)`, so they
//! do not depend on the process gain or the disturbance amplitude.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::process::RejectionResponse;
use crate::scalar::{trapezoid, Real};

pub const FEATURE_COUNT: usize = 30;

/// Column names, in frozen order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10", "F11", "F12", "F13", "F14",
    "F15", "F16", "F17", "F18", "F19", "F20", "F21", "F22", "F23", "F24", "F25", "F26", "F27",
    "F28", "F29", "F30",
];

/// Descriptive names matching [`FEATURE_NAMES`].
pub const FEATURE_LABELS: [&str; FEATURE_COUNT] = [
    "MaxPeak",
    "MaxPeakTime",
    "MinPeak",
    "MinPeakTime",
    "MinToMax",
    "MaxToMinTime",
    "SettlingTime",
    "IAE",
    "ISE",
    "ITAE",
    "IT2AE",
    "IAEPos",
    "IAENeg",
    "IAENegToPos",
    "DecayRatio",
    "DecayRatioTime",
    "PeakSettlingTime",
    "TimePos",
    "TimeNeg",
    "TimeNegToPos",
    "RisingTime",
    "FallingTime",
    "RisingToFallingTime",
    "25%DistRejected",
    "50%DistRejected",
    "75%DistRejected",
    "ZeroCrossingTime",
    "MaxDiff",
    "MinDiff",
    "DiffMaxToMin",
];

/// Zero-based indices of the popular twelve CPIs
/// (F1, F3, F5, F7, F8-F11, F15, F16, F28, F29).
pub const POPULAR_SUBSET: [usize; 12] = [0, 2, 4, 6, 7, 8, 9, 10, 14, 15, 27, 28];

/// Absolute settling band of F7 on `r`.
pub const SETTLING_BAND: f64 = 0.01;

/// Fraction of F1 below which a sample has no sign for F18 and F19.
pub const SIGN_DEAD_BAND: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("response peak {peak} is below 1e-6; nothing to assess")]
    DegenerateResponse { peak: f64 },
    #[error("response did not settle inside its horizon")]
    NotSettled,
    #[error("response contains non-finite samples")]
    NonFinite,
}

/// F1..F30 in frozen order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T = f64> {
    pub values: [T; FEATURE_COUNT],
}

impl<T: Real> FeatureVector<T> {
    /// Feature `Fi` with one-based `i`.
    pub fn f(&self, i: usize) -> T {
        self.values[i - 1]
    }

    pub fn popular_subset(&self) -> [T; 12] {
        POPULAR_SUBSET.map(|i| self.values[i])
    }

    pub fn to_f64(&self) -> [f64; FEATURE_COUNT] {
        self.values.map(|v| v.as_f64())
    }

    /// One CSV row (no newline) with full-precision values.
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v}");
        }
        s
    }
}

/// Projection onto the popular twelve CPIs.
pub fn popular_subset<T: Real>(fv: &FeatureVector<T>) -> [T; 12] {
    fv.popular_subset()
}

/// `F1,...,F30`
pub fn csv_header() -> String {
    FEATURE_NAMES.join(",")
}

/// Feature table with the frozen header, one row per vector.
pub fn features_to_csv<T: Real>(rows: &[FeatureVector<T>]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for fv in rows {
        out.push_str(&fv.csv_row());
        out.push('\n');
    }
    out
}

/// Features of a settled response.
pub fn extract_features<T: Real>(
    resp: &RejectionResponse<T>,
) -> Result<FeatureVector<T>, FeatureError> {
    if !resp.converged {
        return Err(FeatureError::NotSettled);
    }
    extract_features_unsettled(resp)
}

/// Features over whatever horizon the response covers.
pub fn extract_features_unsettled<T: Real>(
    resp: &RejectionResponse<T>,
) -> Result<FeatureVector<T>, FeatureError> {
    Ok(FeatureVector {
        values: compute(&resp.r, resp.dt)?,
    })
}

fn ratio<T: Real>(num: T, den: T) -> T {
    if den == T::zero() {
        T::zero()
    } else {
        num / den
    }
}

/// Time at which the segment `a -> b` (sample `i` to `i+1`) hits `level`.
fn crossing<T: Real>(i: usize, dt: T, a: T, b: T, level: T) -> T {
    let t = T::from_usize_lossy(i) * dt;
    if a == b {
        return t;
    }
    t + dt * ((a - level) / (a - b)).max(T::zero()).min(T::one())
}

/// Last time `|r| >= band`, interpolated on the exit segment; `0` if never.
fn last_exit<T: Real>(r: &[T], dt: T, band: T) -> T {
    let n = r.len();
    match r.iter().rposition(|v| v.abs() >= band) {
        None => T::zero(),
        Some(i) if i + 1 == n => T::from_usize_lossy(i) * dt,
        Some(i) => crossing(i, dt, r[i].abs(), r[i + 1].abs(), band),
    }
}

/// First downward crossing of `level` at or after sample `from`.
fn first_down<T: Real>(r: &[T], dt: T, from: usize, level: T) -> Option<T> {
    (from..r.len().saturating_sub(1))
        .find(|&i| r[i] > level && r[i + 1] <= level)
        .map(|i| crossing(i, dt, r[i], r[i + 1], level))
}

/// First upward crossing of `level` in `[0, until]`.
fn first_up<T: Real>(r: &[T], dt: T, until: usize, level: T) -> Option<T> {
    if r[0] >= level {
        return Some(T::zero());
    }
    (0..until.min(r.len() - 1))
        .find(|&i| r[i] < level && r[i + 1] >= level)
        .map(|i| crossing(i, dt, r[i], r[i + 1], level))
}

/// Duration with `r > 0` and with `r < 0`, using linear interpolation on
/// sign-changing segments. Samples with `|r| < dead` count as zero, so a
/// settled tail adds nothing however long the record runs.
fn signed_durations<T: Real>(r: &[T], dt: T, dead: T) -> (T, T) {
    let z = T::zero();
    let clip = |v: T| if v.abs() < dead { z } else { v };
    let (mut pos, mut neg) = (z, z);
    for w in r.windows(2) {
        let (a, b) = (clip(w[0]), clip(w[1]));
        if a >= z && b >= z {
            if a > z || b > z {
                pos = pos + dt;
            }
        } else if a <= z && b <= z {
            neg = neg + dt;
        } else {
            let frac = a.abs() / (a.abs() + b.abs());
            if a > z {
                pos = pos + dt * frac;
                neg = neg + dt * (T::one() - frac);
            } else {
                neg = neg + dt * frac;
                pos = pos + dt * (T::one() - frac);
            }
        }
    }
    (pos, neg)
}

/// First local maximum after `start` with positive value and a rise of at
/// least `prominence` above the preceding trough.
fn second_peak<T: Real>(r: &[T], start: usize, prominence: T) -> Option<usize> {
    let mut trough = r[start];
    for i in start + 1..r.len().saturating_sub(1) {
        trough = trough.min(r[i]);
        if r[i] > T::zero() && r[i] >= r[i - 1] && r[i] > r[i + 1] && r[i] - trough > prominence {
            return Some(i);
        }
    }
    None
}

fn compute<T: Real>(r: &[T], dt: T) -> Result<[T; FEATURE_COUNT], FeatureError> {
    if r.len() < 2 || r.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite);
    }
    let n = r.len();
    let zero = T::zero();
    let time = |i: usize| T::from_usize_lossy(i) * dt;
    let horizon = time(n - 1);

    // F1, F2: first occurrence of the global maximum.
    let mut ip = 0;
    for i in 1..n {
        if r[i] > r[ip] {
            ip = i;
        }
    }
    let f1 = r[ip];
    if !(f1.as_f64() >= 1e-6) {
        return Err(FeatureError::DegenerateResponse { peak: f1.as_f64() });
    }
    let f2 = time(ip);

    // F3, F4: deepest point after the peak.
    let mut im = ip;
    for i in ip + 1..n {
        if r[i] < r[im] {
            im = i;
        }
    }
    let f3 = if r[im] < zero { -r[im] } else { zero };
    let f4 = time(im);
    let f5 = ratio(f3, f1);
    let f6 = f4 - f2;

    let f7 = last_exit(r, dt, T::lit(SETTLING_BAND));

    let abs: Vec<T> = r.iter().map(|v| v.abs()).collect();
    let f8 = trapezoid(dt, abs.iter().copied());
    let f9 = trapezoid(dt, r.iter().map(|v| *v * *v));
    let f10 = trapezoid(dt, abs.iter().enumerate().map(|(i, v)| time(i) * *v));
    let f11 = trapezoid(
        dt,
        abs.iter().enumerate().map(|(i, v)| time(i) * time(i) * *v),
    );
    let f12 = trapezoid(dt, r.iter().map(|v| v.max(zero)));
    let f13 = trapezoid(dt, r.iter().map(|v| (-*v).max(zero)));
    let f14 = ratio(f13, f12);

    let (f15, f16) = match second_peak(r, ip, f1 * T::lit(1e-9)) {
        Some(i) => (r[i] / f1, time(i) - f2),
        None => (zero, zero),
    };
    let f17 = (f7 - f2).max(zero);

    let (f18, f19) = signed_durations(r, dt, f1 * T::lit(SIGN_DEAD_BAND));
    let f20 = ratio(f19, f18);

    let lo = f1 * T::lit(0.05);
    let hi = f1 * T::lit(0.95);
    let f21 = match (first_up(r, dt, ip, lo), first_up(r, dt, ip, hi)) {
        (Some(a), Some(b)) => (b - a).max(zero),
        (Some(a), None) => f2 - a,
        _ => zero,
    };
    let f22 = match first_down(r, dt, ip, hi) {
        Some(a) => first_down(r, dt, ip, lo).unwrap_or(horizon) - a,
        None => zero,
    }
    .max(zero);
    let f23 = ratio(f21, f22);

    let f24 = last_exit(r, dt, f1 * T::lit(0.25));
    let f25 = last_exit(r, dt, f1 * T::lit(0.5));
    let f26 = last_exit(r, dt, f1 * T::lit(0.75));

    let f27 = first_down(r, dt, ip, zero).unwrap_or(horizon);

    let two_dt = dt + dt;
    let slope = |i: usize| -> T {
        if i == 0 {
            (r[1] - r[0]) / dt
        } else if i == n - 1 {
            (r[n - 1] - r[n - 2]) / dt
        } else {
            (r[i + 1] - r[i - 1]) / two_dt
        }
    };
    let (mut dmax, mut dmin) = (T::neg_infinity(), T::infinity());
    for i in 0..n {
        let s = slope(i);
        dmax = dmax.max(s);
        dmin = dmin.min(s);
    }
    let f28 = dmax.max(zero);
    let f29 = (-dmin).max(zero);
    let f30 = ratio(f28, f29);

    Ok([
        f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, f12, f13, f14, f15, f16, f17, f18, f19, f20,
        f21, f22, f23, f24, f25, f26, f27, f28, f29, f30,
    ])
}
