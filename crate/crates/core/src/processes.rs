//! Seeded i.i.d. fields on group windows and the ball-indexed processes
//! evaluated on them.
//!
//! A [`Field`] assigns one value to every element of the window `B(M_w)`.
//! Values are counter-based: each value is a pure hash of the seed and the
//! element's canonical coordinates, so evaluation order never matters,
//! translated views cost nothing, and the translation identity
//! `eval(spec, field, g·h, r) = eval(spec, translate(field, h), g, r)`
//! holds exactly, bit for bit. That identity is the testable form of
//! stationarity.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cayley::{CayleyError, Element, GroupModel, NormTable};

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Cayley(#[from] CayleyError),

    #[error("field window too small: need radius {needed}, window has {window}")]
    WindowOverflow { needed: u32, window: u32 },

    #[error("field model does not match the norm table model")]
    ModelMismatch,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("explicit field has no value for {0}")]
    MissingValue(String),

    #[error("bad explicit field: {0}")]
    BadExplicitField(String),
}

/// The sampling distribution of one field value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    /// Uniform real on `[0, upper)`.
    Uniform { upper: f64 },
    /// 0/1 with success probability `p`.
    Bernoulli { p: f64 },
    /// Color ids `0..colors`, uniform.
    Colors { colors: u32 },
}

impl Distribution {
    fn validate(&self) -> Result<(), ProcessError> {
        match *self {
            Distribution::Uniform { upper } => {
                if !(upper > 0.0 && upper.is_finite()) {
                    return Err(ProcessError::InvalidDistribution(format!(
                        "uniform upper bound must be positive and finite, got {upper}"
                    )));
                }
            }
            Distribution::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ProcessError::InvalidDistribution(format!(
                        "bernoulli p must lie in [0, 1], got {p}"
                    )));
                }
            }
            Distribution::Colors { colors } => {
                if colors < 2 {
                    return Err(ProcessError::InvalidDistribution(format!(
                        "need at least 2 colors, got {colors}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Almost sure bound on a single value.
    pub fn value_bound(&self) -> f64 {
        match *self {
            Distribution::Uniform { upper } => upper,
            Distribution::Bernoulli { .. } => 1.0,
            Distribution::Colors { colors } => (colors - 1) as f64,
        }
    }

    fn value_from_hash(&self, h: u64) -> f64 {
        match *self {
            Distribution::Uniform { upper } => unit_from_hash(h) * upper,
            Distribution::Bernoulli { p } => {
                if unit_from_hash(h) < p {
                    1.0
                } else {
                    0.0
                }
            }
            Distribution::Colors { colors } => (h % colors as u64) as f64,
        }
    }
}

/// splitmix64 finalizer: full-avalanche 64-bit mix.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[inline]
fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Hash of (seed, canonical coordinates), independent of evaluation order.
#[inline]
fn element_hash(seed: u64, coords: &[i64]) -> u64 {
    let mut h = mix64(seed ^ 0x9e3779b97f4a7c15);
    for &c in coords {
        h = mix64(h ^ (c as u64).wrapping_mul(0xff51afd7ed558ccd) ^ 0xd1b54a32d192ed03);
    }
    h
}

/// Per-trial seed derivation from a master seed.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index ^ 0x5851f42d4c957f2d))
}

#[derive(Debug, Clone)]
enum FieldValues {
    Seeded {
        dist: Distribution,
        seed: u64,
    },
    /// Explicit per-element values, used for planted instances and for
    /// replaying dumped fields from audit bundles.
    Explicit {
        values: HashMap<Element, f64>,
    },
}

/// An i.i.d. (or explicitly given) real/color assignment on the window
/// `B(window_radius)`, plus a right-translation shift. Immutable after
/// construction; evaluation is pure.
#[derive(Debug, Clone)]
pub struct Field {
    model: GroupModel,
    window_radius: u32,
    values: FieldValues,
    shift: Element,
}

impl Field {
    pub fn new(
        model: &GroupModel,
        window_radius: u32,
        dist: Distribution,
        seed: u64,
    ) -> Result<Field, ProcessError> {
        dist.validate()?;
        Ok(Field {
            model: model.clone(),
            window_radius,
            values: FieldValues::Seeded { dist, seed },
            shift: model.identity(),
        })
    }

    /// Explicit field from a value map defined on exactly `B(window_radius)`.
    pub fn from_values(
        table: &NormTable,
        window_radius: u32,
        values: HashMap<Element, f64>,
    ) -> Result<Field, ProcessError> {
        if window_radius > table.max_radius() {
            return Err(ProcessError::WindowOverflow {
                needed: window_radius,
                window: table.max_radius(),
            });
        }
        let expected = table.ball_size(window_radius as f64)? as usize;
        if values.len() != expected {
            return Err(ProcessError::BadExplicitField(format!(
                "{} values for a window of {expected} elements",
                values.len()
            )));
        }
        for g in table.ball(&table.model().identity(), window_radius as f64)? {
            if !values.contains_key(&g) {
                return Err(ProcessError::BadExplicitField(format!("no value for {g}")));
            }
        }
        Ok(Field {
            model: table.model().clone(),
            window_radius,
            values: FieldValues::Explicit { values },
            shift: table.model().identity(),
        })
    }

    pub fn window_radius(&self) -> u32 {
        self.window_radius
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    /// Almost sure bound on values, when the field is distribution-backed.
    pub fn value_bound(&self) -> Option<f64> {
        match &self.values {
            FieldValues::Seeded { dist, .. } => Some(dist.value_bound()),
            FieldValues::Explicit { .. } => None,
        }
    }

    /// The translated view: the value of the view at `g` is the value of
    /// this field at `g·h`.
    pub fn translate(&self, h: &Element) -> Result<Field, ProcessError> {
        let shift = self.model.multiply(h, &self.shift)?;
        Ok(Field {
            model: self.model.clone(),
            window_radius: self.window_radius,
            values: self.values.clone(),
            shift,
        })
    }

    fn raw_value(&self, g: &Element) -> Result<f64, ProcessError> {
        match &self.values {
            FieldValues::Seeded { dist, seed } => {
                Ok(dist.value_from_hash(element_hash(*seed, g.coords())))
            }
            FieldValues::Explicit { values } => values
                .get(g)
                .copied()
                .ok_or_else(|| ProcessError::MissingValue(g.to_string())),
        }
    }

    /// Value at `g`, with the window check. `table` supplies the norms.
    pub fn value(&self, g: &Element, table: &NormTable) -> Result<f64, ProcessError> {
        let shifted = self.model.multiply(g, &self.shift)?;
        let norm = table.word_norm(&shifted)?;
        if norm > self.window_radius {
            return Err(ProcessError::WindowOverflow {
                needed: norm,
                window: self.window_radius,
            });
        }
        self.raw_value(&shifted)
    }

    /// Dump the field (element coordinates and value) in deterministic layer
    /// order, for audit bundles.
    pub fn dump(&self, table: &NormTable) -> Result<Vec<FieldSample>, ProcessError> {
        let mut out = Vec::new();
        for n in 0..=self.window_radius {
            for g in table.sphere(n) {
                out.push(FieldSample {
                    coords: g.coords().to_vec(),
                    value: self.raw_value(&self.model.multiply(g, &self.shift)?)?,
                });
            }
        }
        Ok(out)
    }
}

/// One dumped field entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSample {
    pub coords: Vec<i64>,
    pub value: f64,
}

/// Which ball statistic the process takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    /// Mean of the values on the ball (the normalized form of the sum).
    AdditiveAverage,
    /// Sum of the values on the ball.
    AdditiveSum,
    /// Maximum value on the ball.
    MaxValue,
    /// Number of distinct values on the ball.
    DistinctColors,
    /// Distinct count divided by the ball size.
    DistinctColorsNormalized,
}

impl ProcessKind {
    /// Sums, maxima, and distinct counts satisfy `S_V <= sum S_{V_i}` over
    /// exact disjoint decompositions; the normalized forms are the ones the
    /// averaged statements quantify over.
    pub fn is_subadditive(&self) -> bool {
        matches!(
            self,
            ProcessKind::AdditiveSum | ProcessKind::MaxValue | ProcessKind::DistinctColors
        )
    }
}

/// Accumulator for one radius-profile pass.
enum Accum {
    Sum(f64),
    Max(f64),
    Distinct(HashSet<u64>),
}

fn profile_inner(
    kind: ProcessKind,
    field: &Field,
    shifted_center: &Element,
    max_radius: u32,
    table: &NormTable,
) -> Result<Vec<f64>, ProcessError> {
    let model = field.model();
    let mut acc = match kind {
        ProcessKind::AdditiveAverage | ProcessKind::AdditiveSum => Accum::Sum(0.0),
        ProcessKind::MaxValue => Accum::Max(f64::NEG_INFINITY),
        ProcessKind::DistinctColors | ProcessKind::DistinctColorsNormalized => {
            Accum::Distinct(HashSet::new())
        }
    };
    let mut out = Vec::with_capacity(max_radius as usize + 1);
    for n in 0..=max_radius {
        // Sphere of radius n around the center: z·c for ||z|| = n.
        for z in table.sphere(n) {
            let y = model.multiply(z, shifted_center)?;
            let v = field.raw_value(&y)?;
            match &mut acc {
                Accum::Sum(s) => *s += v,
                Accum::Max(m) => *m = m.max(v),
                Accum::Distinct(set) => {
                    set.insert(v.to_bits());
                }
            }
        }
        let ball = table.ball_sizes()[n as usize] as f64;
        out.push(match &acc {
            Accum::Sum(s) => {
                if kind == ProcessKind::AdditiveAverage {
                    *s / ball
                } else {
                    *s
                }
            }
            Accum::Max(m) => *m,
            Accum::Distinct(set) => {
                if kind == ProcessKind::DistinctColorsNormalized {
                    set.len() as f64 / ball
                } else {
                    set.len() as f64
                }
            }
        });
    }
    Ok(out)
}

fn check_window(
    field: &Field,
    shifted_center: &Element,
    radius: u32,
    table: &NormTable,
) -> Result<(), ProcessError> {
    if field.model() != table.model() {
        return Err(ProcessError::ModelMismatch);
    }
    if field.window_radius() > table.max_radius() {
        return Err(ProcessError::WindowOverflow {
            needed: field.window_radius(),
            window: table.max_radius(),
        });
    }
    let center_norm = table.word_norm(shifted_center)?;
    let needed = center_norm + radius;
    if needed > field.window_radius() {
        return Err(ProcessError::WindowOverflow {
            needed,
            window: field.window_radius(),
        });
    }
    Ok(())
}

/// The whole radius profile `(S_{B(center, n)})_{n = 0..=max_radius}` in one
/// layered pass. Entry `n` is the process value on `B(center, n)`.
pub fn eval_profile(
    kind: ProcessKind,
    field: &Field,
    center: &Element,
    max_radius: u32,
    table: &NormTable,
) -> Result<Vec<f64>, ProcessError> {
    let shifted = field.model.multiply(center, &field.shift)?;
    check_window(field, &shifted, max_radius, table)?;
    profile_inner(kind, field, &shifted, max_radius, table)
}

/// The process value `S_{B(center, radius)}`. Equals the corresponding entry
/// of [`eval_profile`] exactly (identical accumulation order).
pub fn eval(
    kind: ProcessKind,
    field: &Field,
    center: &Element,
    radius: f64,
    table: &NormTable,
) -> Result<f64, ProcessError> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(ProcessError::InvalidDistribution(format!(
            "radius {radius} is not a nonnegative real"
        )));
    }
    let r = radius.floor() as u32;
    let shifted = field.model.multiply(center, &field.shift)?;
    check_window(field, &shifted, r, table)?;
    let profile = profile_inner(kind, field, &shifted, r, table)?;
    Ok(*profile.last().expect("profile has r + 1 entries"))
}
