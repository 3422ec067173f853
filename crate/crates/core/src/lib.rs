//! Control performance assessment of PID loops on SOPDT-like processes.
//!
//! The crate covers the numerical side of the pipeline: closed-loop
//! simulation under a load-disturbance step, open-loop frequency margins,
//! IAE-optimal reference tunings on a normalized process mesh, the 30 CPI
//! features of a rejection response, labeled dataset synthesis and SOPDT
//! identification.
//!
//! Numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod scalar;
pub mod process;
pub mod frequency;
pub mod identify;
pub mod datagen;
pub mod features;
pub mod seeding;
pub mod simplex;
pub mod spline;
pub mod tuning;
mod serde_inf;

pub use scalar::Real;

pub type SopdtModelF64 = process::SopdtModel<f64>;
pub type SopdtModelF32 = process::SopdtModel<f32>;
pub type PidTuningF64 = process::PidTuning<f64>;
pub type PidTuningF32 = process::PidTuning<f32>;
pub type RejectionResponseF64 = process::RejectionResponse<f64>;
pub type RejectionResponseF32 = process::RejectionResponse<f32>;
pub type MarginPairF64 = frequency::MarginPair<f64>;
pub type MarginPairF32 = frequency::MarginPair<f32>;
