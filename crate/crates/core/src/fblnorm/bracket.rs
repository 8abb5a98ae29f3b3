use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Arithmetic;

/// Finite family of dual points, dense over the space's generators.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualConfig {
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperplanes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rays: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_status: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_vars: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<u64>,
    /// Rational optimum as `p/q`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_value: Option<String>,
    /// Rational certificate points as `p/q` strings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_points: Option<Vec<Vec<String>>>,
}

/// Output of every norm computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBracket {
    pub lower: f64,
    pub certificate: DualConfig,
    /// `+∞` (serialized as `null`) when no upper bound is known.
    #[serde(serialize_with = "ser_upper", deserialize_with = "de_upper")]
    pub upper: f64,
    pub exact: bool,
    pub arithmetic: Arithmetic,
    pub diagnostics: Diagnostics,
}

fn ser_upper<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_some(x)
    } else {
        s.serialize_none()
    }
}

fn de_upper<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}
