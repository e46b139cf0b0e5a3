//! Declared parameter spaces and concrete configurations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ClusterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    Clara,
    Hierarchical,
    Em,
    Spectral,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::KMeans,
        Algorithm::Clara,
        Algorithm::Hierarchical,
        Algorithm::Em,
        Algorithm::Spectral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Clara => "clara",
            Algorithm::Hierarchical => "hierarchical",
            Algorithm::Em => "em",
            Algorithm::Spectral => "spectral",
        }
    }

    pub fn descriptors(self) -> Vec<ParamDescriptor> {
        use ParamDescriptor as P;
        match self {
            Algorithm::KMeans => vec![
                P::int("iter_max", 10, 1, 1000, Spacing::Geometric),
                P::int("nstart", 1, 1, 100, Spacing::Geometric),
                P::categorical("algorithm", "lloyd", &["lloyd", "macqueen"]),
            ],
            Algorithm::Clara => vec![
                P::categorical("metric", "euclidean", &["euclidean", "manhattan"]),
                P::int("samples", 5, 1, 100, Spacing::Geometric),
                P::int_auto("sampsize", 2, i64::from(u32::MAX), Spacing::Linear),
            ],
            Algorithm::Hierarchical => vec![
                P::categorical("metric", "euclidean", &["euclidean", "manhattan"]),
                P::categorical(
                    "method",
                    "average",
                    &["average", "single", "complete", "ward", "weighted"],
                ),
                P::real("par_method", 0.0, 0.0, 1.0, Spacing::Linear),
            ],
            Algorithm::Em => vec![
                P::categorical(
                    "model",
                    "spherical-varying",
                    &["spherical-shared", "spherical-varying", "diagonal-varying", "full-varying"],
                ),
                P::categorical("init", "random-z", &["random-z", "kmeans-z"]),
            ],
            Algorithm::Spectral => vec![
                P::categorical("kernel", "rbf", &["rbf", "laplace", "polynomial", "linear"]),
                P::real_auto("kernel_param", 1e-9, 1e9, Spacing::Geometric),
                P::int("iter", 200, 1, 1000, Spacing::Geometric),
            ],
        }
    }

    pub fn descriptor(self, name: &str) -> Result<ParamDescriptor, ClusterError> {
        self.descriptors()
            .into_iter()
            .find(|d| d.name == name)
            .ok_or_else(|| ClusterError::UnknownParameter {
                algorithm: self.name().to_string(),
                name: name.to_string(),
            })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ClusterError::UnknownAlgorithm(s.to_string()))
    }
}

/// How one-dimensional sweep grids are laid out over a numeric range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParamKind {
    IntegerRange { min: i64, max: i64, spacing: Spacing },
    RealRange { min: f64, max: f64, spacing: Spacing },
    Categorical { choices: Vec<String> },
}

/// A parameter value. `Auto` defers to a data-dependent rule inside the
/// algorithm and is only legal where the descriptor allows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Choice(String),
}

pub const AUTO: &str = "automatic";

impl ParamValue {
    pub fn auto() -> Self {
        ParamValue::Choice(AUTO.to_string())
    }

    pub fn is_auto(&self) -> bool {
        matches!(self, ParamValue::Choice(s) if s == AUTO)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Real(r) => Some(*r),
            ParamValue::Choice(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Choice(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDescriptor {
    pub name: String,
    pub kind: ParamKind,
    pub default: ParamValue,
    pub allows_auto: bool,
}

impl ParamDescriptor {
    fn int(name: &str, default: i64, min: i64, max: i64, spacing: Spacing) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::IntegerRange { min, max, spacing },
            default: ParamValue::Int(default),
            allows_auto: false,
        }
    }

    fn int_auto(name: &str, min: i64, max: i64, spacing: Spacing) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::IntegerRange { min, max, spacing },
            default: ParamValue::auto(),
            allows_auto: true,
        }
    }

    fn real(name: &str, default: f64, min: f64, max: f64, spacing: Spacing) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::RealRange { min, max, spacing },
            default: ParamValue::Real(default),
            allows_auto: false,
        }
    }

    fn real_auto(name: &str, min: f64, max: f64, spacing: Spacing) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::RealRange { min, max, spacing },
            default: ParamValue::auto(),
            allows_auto: true,
        }
    }

    fn categorical(name: &str, default: &str, choices: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Categorical {
                choices: choices.iter().map(|c| c.to_string()).collect(),
            },
            default: ParamValue::Choice(default.into()),
            allows_auto: false,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ParamKind::Categorical { .. })
    }

    /// Checks kind and bounds, coercing integral reals for integer ranges.
    pub fn validate(&self, value: &ParamValue) -> Result<ParamValue, ClusterError> {
        let bad = |why: String| ClusterError::InvalidParameter {
            name: self.name.clone(),
            reason: why,
        };
        if value.is_auto() {
            return if self.allows_auto {
                Ok(value.clone())
            } else {
                Err(bad("does not accept `automatic`".into()))
            };
        }
        match (&self.kind, value) {
            (ParamKind::IntegerRange { min, max, .. }, v) => {
                let i = match v {
                    ParamValue::Int(i) => *i,
                    ParamValue::Real(r) if r.fract() == 0.0 && r.is_finite() => *r as i64,
                    other => return Err(bad(format!("expected an integer, got {other}"))),
                };
                if i < *min || i > *max {
                    return Err(bad(format!("{i} outside [{min}, {max}]")));
                }
                Ok(ParamValue::Int(i))
            }
            (ParamKind::RealRange { min, max, .. }, v) => {
                let r = v
                    .as_f64()
                    .ok_or_else(|| bad(format!("expected a number, got {v}")))?;
                if !(r >= *min && r <= *max) {
                    return Err(bad(format!("{r} outside [{min}, {max}]")));
                }
                Ok(ParamValue::Real(r))
            }
            (ParamKind::Categorical { choices }, ParamValue::Choice(c)) => {
                if choices.contains(c) {
                    Ok(value.clone())
                } else {
                    Err(bad(format!("`{c}` is not one of {choices:?}")))
                }
            }
            (ParamKind::Categorical { .. }, other) => {
                Err(bad(format!("expected a choice, got {other}")))
            }
        }
    }
}

/// An algorithm, the expected cluster count, and values for its parameters.
/// Parameters absent from `assignments` take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustererConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    #[serde(default)]
    pub assignments: BTreeMap<String, ParamValue>,
}

impl ClustererConfig {
    pub fn defaults(algorithm: Algorithm, k: usize) -> Self {
        Self {
            algorithm,
            k,
            assignments: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: ParamValue) -> Result<Self, ClusterError> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn set(&mut self, name: &str, value: ParamValue) -> Result<(), ClusterError> {
        let d = self.algorithm.descriptor(name)?;
        let v = d.validate(&value)?;
        self.assignments.insert(name.to_string(), v);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.k == 0 {
            return Err(ClusterError::InvalidK { k: 0, n: 0 });
        }
        for (name, value) in &self.assignments {
            self.algorithm.descriptor(name)?.validate(value)?;
        }
        Ok(())
    }

    /// Assigned value, or the descriptor default.
    pub fn value(&self, name: &str) -> Result<ParamValue, ClusterError> {
        let d = self.algorithm.descriptor(name)?;
        match self.assignments.get(name) {
            Some(v) => d.validate(v),
            None => Ok(d.default),
        }
    }

    pub(crate) fn int(&self, name: &str) -> Result<Option<i64>, ClusterError> {
        Ok(match self.value(name)? {
            ParamValue::Int(i) => Some(i),
            _ => None,
        })
    }

    pub(crate) fn real(&self, name: &str) -> Result<Option<f64>, ClusterError> {
        Ok(match self.value(name)? {
            ParamValue::Real(r) => Some(r),
            _ => None,
        })
    }

    pub(crate) fn choice(&self, name: &str) -> Result<String, ClusterError> {
        match self.value(name)? {
            ParamValue::Choice(c) => Ok(c),
            other => Err(ClusterError::InvalidParameter {
                name: name.into(),
                reason: format!("expected a choice, got {other}"),
            }),
        }
    }

    /// Canonical `name=value` list including defaults, for logs and records.
    pub fn describe(&self) -> String {
        self.algorithm
            .descriptors()
            .iter()
            .map(|d| {
                let v = self.assignments.get(&d.name).unwrap_or(&d.default);
                format!("{}={}", d.name, v)
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}
