//! Serializes non-finite scalars as JSON `null` (read back as `+inf`).

use serde::{Deserialize, Deserializer, Serializer};

use crate::scalar::Real;

pub fn serialize<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    let f = v.as_f64();
    if f.is_finite() {
        s.serialize_f64(f)
    } else {
        s.serialize_none()
    }
}

pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
    let v: Option<f64> = Option::deserialize(d)?;
    Ok(v.map(T::lit).unwrap_or_else(T::infinity))
}
