//! Exact arithmetic, word norms, and ball tables for concrete groups of
//! polynomial growth.
//!
//! A [`GroupModel`] fixes the group law and an inverse-closed generating set;
//! a [`NormTable`] is the memoized breadth-first layering of the group around
//! the identity up to a chosen radius. Everything downstream (covering
//! algorithms, process evaluation) works through these two types. Norms are
//! computed by BFS, never by formula: the Heisenberg word norm has no usable
//! closed form, and exactness matters more than speed here.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from group arithmetic and norm-table queries.
#[derive(Debug, Error)]
pub enum CayleyError {
    #[error("element has {got} coordinates, model expects {expected}")]
    ModelMismatch { expected: usize, got: usize },

    #[error("integer overflow in group arithmetic")]
    Overflow,

    #[error("element {element} is outside the norm table window (max radius {max_radius})")]
    OutOfWindow { element: String, max_radius: u32 },

    #[error("ball of radius {radius} around a center of norm {center_norm} exceeds the window (max radius {max_radius})")]
    WindowOverflow {
        center_norm: u32,
        radius: f64,
        max_radius: u32,
    },

    #[error("invalid radius {0}: must be finite and nonnegative")]
    InvalidRadius(f64),

    #[error("norm table too small: max radius {max_radius}, need at least {needed}")]
    TableTooSmall { max_radius: u32, needed: u32 },

    #[error("invalid generating set: {0}")]
    InvalidGenerators(String),

    #[error("norm table cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A group element in canonical coordinates.
///
/// For the `Z^d` kinds the coordinates are the `d` integer entries; for the
/// discrete Heisenberg group they are the triple `(a, b, c)` of off-diagonal
/// entries of the upper unitriangular matrix. Serializes as the bare
/// coordinate list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Element {
    coords: Vec<i64>,
}

impl Element {
    pub fn new(coords: Vec<i64>) -> Self {
        Element { coords }
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Which concrete group a model describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    /// `Z^d` with the standard generators `±e_i`.
    ZdStandard { d: usize },
    /// `Z^d` with all nonzero sign vectors on subsets of coordinates, so
    /// balls are the boxes `[-n, n]^d` and `|B(n)| = (2n+1)^d`.
    ZdBox { d: usize },
    /// The discrete Heisenberg group of integer unitriangular 3x3 matrices,
    /// generated by `x = (1,0,0)` and `y = (0,1,0)` and their inverses.
    Heisenberg,
    /// `Z^d` with a caller-supplied generating set.
    ZdCustom { d: usize },
}

/// A finitely generated group with a designated inverse-closed generating set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupModel {
    kind: GroupKind,
    generators: Vec<Element>,
    degree_hint: Option<u32>,
}

impl GroupModel {
    /// `Z^d` with generators `±e_1, …, ±e_d`.
    pub fn zd_standard(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        let mut generators = Vec::with_capacity(2 * d);
        for i in 0..d {
            for sign in [1i64, -1] {
                let mut v = vec![0i64; d];
                v[i] = sign;
                generators.push(Element::new(v));
            }
        }
        generators.sort();
        GroupModel {
            kind: GroupKind::ZdStandard { d },
            generators,
            degree_hint: Some(d as u32),
        }
    }

    /// `Z^d` with every nonzero vector in `{-1, 0, 1}^d` as a generator.
    pub fn zd_box(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        assert!(
            d <= 16,
            "box generating set is 3^d - 1 elements; d too large"
        );
        let mut generators = Vec::new();
        let mut v = vec![-1i64; d];
        loop {
            if v.iter().any(|&c| c != 0) {
                generators.push(Element::new(v.clone()));
            }
            // odometer over {-1, 0, 1}^d
            let mut i = 0;
            loop {
                if i == d {
                    debug_assert_eq!(generators.len(), 3usize.pow(d as u32) - 1);
                    generators.sort();
                    return GroupModel {
                        kind: GroupKind::ZdBox { d },
                        generators,
                        degree_hint: Some(d as u32),
                    };
                }
                if v[i] < 1 {
                    v[i] += 1;
                    break;
                }
                v[i] = -1;
                i += 1;
            }
        }
    }

    /// The discrete Heisenberg group with the standard two generators and
    /// their inverses.
    pub fn heisenberg() -> Self {
        let generators = vec![
            Element::new(vec![-1, 0, 0]),
            Element::new(vec![0, -1, 0]),
            Element::new(vec![0, 1, 0]),
            Element::new(vec![1, 0, 0]),
        ];
        GroupModel {
            kind: GroupKind::Heisenberg,
            generators,
            degree_hint: Some(4),
        }
    }

    /// `Z^d` with a custom generating set. The set must be nonempty,
    /// inverse-closed, and must not contain the identity.
    pub fn zd_custom(
        d: usize,
        generators: Vec<Element>,
        degree_hint: Option<u32>,
    ) -> Result<Self, CayleyError> {
        if d == 0 {
            return Err(CayleyError::InvalidGenerators(
                "dimension must be at least 1".into(),
            ));
        }
        if generators.is_empty() {
            return Err(CayleyError::InvalidGenerators(
                "generating set is empty".into(),
            ));
        }
        let mut gens = generators;
        for g in &gens {
            if g.len() != d {
                return Err(CayleyError::InvalidGenerators(format!(
                    "generator {g} has {} coordinates, expected {d}",
                    g.len()
                )));
            }
            if g.coords.iter().all(|&c| c == 0) {
                return Err(CayleyError::InvalidGenerators(
                    "generating set contains the identity".into(),
                ));
            }
        }
        gens.sort();
        gens.dedup();
        for g in &gens {
            let inv = Element::new(g.coords.iter().map(|&c| -c).collect());
            if gens.binary_search(&inv).is_err() {
                return Err(CayleyError::InvalidGenerators(format!(
                    "generator {g} has no inverse in the set"
                )));
            }
        }
        Ok(GroupModel {
            kind: GroupKind::ZdCustom { d },
            generators: gens,
            degree_hint,
        })
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    /// Generators in canonical (sorted) order.
    pub fn generators(&self) -> &[Element] {
        &self.generators
    }

    /// Number of coordinates in an element of this model.
    pub fn coord_len(&self) -> usize {
        match self.kind {
            GroupKind::ZdStandard { d } | GroupKind::ZdBox { d } | GroupKind::ZdCustom { d } => d,
            GroupKind::Heisenberg => 3,
        }
    }

    /// The integer degree of polynomial growth: `d` for the `Z^d` kinds and
    /// `4` for the Heisenberg group. Custom models report their hint.
    pub fn growth_degree(&self) -> Option<u32> {
        self.degree_hint
    }

    pub fn identity(&self) -> Element {
        Element::new(vec![0; self.coord_len()])
    }

    fn check_dims(&self, g: &Element) -> Result<(), CayleyError> {
        if g.len() != self.coord_len() {
            return Err(CayleyError::ModelMismatch {
                expected: self.coord_len(),
                got: g.len(),
            });
        }
        Ok(())
    }

    /// Group law. `Z^d` kinds add componentwise; the Heisenberg law is
    /// `(a,b,c)(a',b',c') = (a+a', b+b', c+c'+a*b')`, read off the product of
    /// the two unitriangular matrices. Arithmetic is checked: overflow is an
    /// error, never a wrap.
    pub fn multiply(&self, g: &Element, h: &Element) -> Result<Element, CayleyError> {
        self.check_dims(g)?;
        self.check_dims(h)?;
        match self.kind {
            GroupKind::Heisenberg => {
                let (a, b, c) = (g.coords[0], g.coords[1], g.coords[2]);
                let (a2, b2, c2) = (h.coords[0], h.coords[1], h.coords[2]);
                let twist = a.checked_mul(b2).ok_or(CayleyError::Overflow)?;
                Ok(Element::new(vec![
                    a.checked_add(a2).ok_or(CayleyError::Overflow)?,
                    b.checked_add(b2).ok_or(CayleyError::Overflow)?,
                    c.checked_add(c2)
                        .and_then(|s| s.checked_add(twist))
                        .ok_or(CayleyError::Overflow)?,
                ]))
            }
            _ => {
                let coords = g
                    .coords
                    .iter()
                    .zip(&h.coords)
                    .map(|(&x, &y)| x.checked_add(y).ok_or(CayleyError::Overflow))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Element::new(coords))
            }
        }
    }

    /// Group inverse, so that `multiply(g, inverse(g))` is the identity.
    pub fn inverse(&self, g: &Element) -> Result<Element, CayleyError> {
        self.check_dims(g)?;
        match self.kind {
            GroupKind::Heisenberg => {
                let (a, b, c) = (g.coords[0], g.coords[1], g.coords[2]);
                let ab = a.checked_mul(b).ok_or(CayleyError::Overflow)?;
                Ok(Element::new(vec![
                    -a,
                    -b,
                    ab.checked_sub(c).ok_or(CayleyError::Overflow)?,
                ]))
            }
            _ => Ok(Element::new(g.coords.iter().map(|&c| -c).collect())),
        }
    }

    /// A short stable string key identifying the model and generating set,
    /// used for cache validation and report metadata.
    pub fn cache_key(&self) -> String {
        let kind = match self.kind {
            GroupKind::ZdStandard { d } => format!("z{d}-standard"),
            GroupKind::ZdBox { d } => format!("z{d}-box"),
            GroupKind::Heisenberg => "heisenberg".to_string(),
            GroupKind::ZdCustom { d } => format!("z{d}-custom"),
        };
        let gens: Vec<String> = self.generators.iter().map(|g| g.to_string()).collect();
        format!("{kind}|{}", gens.join(";"))
    }
}

/// Breadth-first word-norm table around the identity, up to `max_radius`.
///
/// Construction is single-threaded; after that the table is immutable and
/// freely shared across threads.
#[derive(Debug)]
pub struct NormTable {
    model: GroupModel,
    max_radius: u32,
    norms: HashMap<Element, u32>,
    /// Elements grouped by norm, in deterministic BFS discovery order.
    by_norm: Vec<Vec<Element>>,
    sphere_sizes: Vec<u64>,
    ball_sizes: Vec<u64>,
}

impl NormTable {
    /// Enumerate every element of norm at most `max_radius` by breadth-first
    /// layering from the identity over the generating set.
    pub fn build(model: &GroupModel, max_radius: u32) -> Result<NormTable, CayleyError> {
        let identity = model.identity();
        let mut norms = HashMap::new();
        norms.insert(identity.clone(), 0u32);
        let mut by_norm: Vec<Vec<Element>> = vec![vec![identity]];

        for n in 1..=max_radius {
            let mut layer = Vec::new();
            // Expanding the previous layer by right multiplication reaches
            // exactly the sphere of norm n; discovery order is deterministic
            // because both the previous layer and the generators are ordered.
            let prev = &by_norm[(n - 1) as usize];
            for g in prev {
                for gen in model.generators() {
                    let h = model.multiply(g, gen)?;
                    if !norms.contains_key(&h) {
                        norms.insert(h.clone(), n);
                        layer.push(h);
                    }
                }
            }
            if layer.is_empty() {
                // Finite group exhausted before max_radius.
                break;
            }
            by_norm.push(layer);
        }

        let sphere_sizes: Vec<u64> = by_norm.iter().map(|l| l.len() as u64).collect();
        let mut ball_sizes = Vec::with_capacity(sphere_sizes.len());
        let mut acc = 0u64;
        for &s in &sphere_sizes {
            acc += s;
            ball_sizes.push(acc);
        }
        Ok(NormTable {
            model: model.clone(),
            max_radius,
            norms,
            by_norm,
            sphere_sizes,
            ball_sizes,
        })
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn max_radius(&self) -> u32 {
        self.max_radius
    }

    /// Sizes of the spheres `{g : ||g|| = n}` for `n = 0..=max_radius`.
    pub fn sphere_sizes(&self) -> &[u64] {
        &self.sphere_sizes
    }

    /// Cumulative ball sizes `|B(n)|` for `n = 0..=max_radius`.
    pub fn ball_sizes(&self) -> &[u64] {
        &self.ball_sizes
    }

    /// Elements of norm exactly `n`, in deterministic discovery order.
    pub fn sphere(&self, n: u32) -> &[Element] {
        &self.by_norm[n as usize]
    }

    /// Word norm of `g`: the length of a shortest generator word. Errors if
    /// `g` was not reached by the BFS (norm above the window).
    pub fn word_norm(&self, g: &Element) -> Result<u32, CayleyError> {
        self.norms
            .get(g)
            .copied()
            .ok_or_else(|| CayleyError::OutOfWindow {
                element: g.to_string(),
                max_radius: self.max_radius,
            })
    }

    /// Right-invariant word distance `d(x, y) = ||x y^{-1}||`.
    pub fn distance(&self, x: &Element, y: &Element) -> Result<u32, CayleyError> {
        let y_inv = self.model.inverse(y)?;
        let diff = self.model.multiply(x, &y_inv)?;
        self.word_norm(&diff)
    }

    fn int_radius(radius: f64) -> Result<u32, CayleyError> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(CayleyError::InvalidRadius(radius));
        }
        Ok(radius.floor().min(u32::MAX as f64) as u32)
    }

    /// `|B(x, r)|`, independent of the center. Real radii are floored, since
    /// discrete norms are integers and membership is by `<=`.
    pub fn ball_size(&self, radius: f64) -> Result<u64, CayleyError> {
        let r = Self::int_radius(radius)?;
        if r > self.max_radius {
            return Err(CayleyError::WindowOverflow {
                center_norm: 0,
                radius,
                max_radius: self.max_radius,
            });
        }
        Ok(self.ball_sizes[(r.min(self.last_radius())) as usize])
    }

    fn last_radius(&self) -> u32 {
        (self.ball_sizes.len() - 1) as u32
    }

    /// The ball `B(center, r) = { y : d(center, y) <= r }` as an explicit
    /// element list, enumerated layer by layer: `B(center, r) = B(r) ·
    /// center`. Fails loudly if the ball could leave the window, i.e. if
    /// `||center|| + r > max_radius`.
    pub fn ball(&self, center: &Element, radius: f64) -> Result<Vec<Element>, CayleyError> {
        let r = Self::int_radius(radius)?;
        let center_norm = self.word_norm(center)?;
        if center_norm as u64 + r as u64 > self.max_radius as u64 {
            return Err(CayleyError::WindowOverflow {
                center_norm,
                radius,
                max_radius: self.max_radius,
            });
        }
        let mut out = Vec::with_capacity(self.ball_size(r as f64)? as usize);
        for layer in self.by_norm.iter().take(r as usize + 1) {
            for z in layer {
                out.push(self.model.multiply(z, center)?);
            }
        }
        Ok(out)
    }

    /// Whether `point` lies in `B(center, radius)`, by exact norm lookup.
    pub fn ball_contains(
        &self,
        center: &Element,
        radius: f64,
        point: &Element,
    ) -> Result<bool, CayleyError> {
        let r = Self::int_radius(radius)?;
        if r > self.max_radius {
            return Err(CayleyError::WindowOverflow {
                center_norm: 0,
                radius,
                max_radius: self.max_radius,
            });
        }
        let y_inv = self.model.inverse(point)?;
        let diff = self.model.multiply(center, &y_inv)?;
        Ok(self.norm_at_most(&diff, r))
    }

    /// Whether `||g|| <= bound`. The BFS reaches every element of norm up to
    /// `max_radius`, so for `bound <= max_radius` an element absent from the
    /// table has norm above the bound.
    pub fn norm_at_most(&self, g: &Element, bound: u32) -> bool {
        debug_assert!(bound <= self.max_radius);
        self.norms.get(g).is_some_and(|&n| n <= bound)
    }

    /// Log-log growth-degree fit and the normalized volume ratio
    /// `|B(n)| / n^degree`.
    ///
    /// The slope is fitted over the upper half of the table; the volume
    /// constant estimate uses the largest tabulated radius.
    pub fn estimate_growth(&self, degree: u32) -> Result<GrowthEstimate, CayleyError> {
        let r_max = self.last_radius();
        if r_max < 10 {
            return Err(CayleyError::TableTooSmall {
                max_radius: r_max,
                needed: 10,
            });
        }
        let lo = (r_max / 2).max(1);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for n in lo..=r_max {
            xs.push((n as f64).ln());
            ys.push((self.ball_sizes[n as usize] as f64).ln());
        }
        let (slope, _intercept) = least_squares(&xs, &ys);
        let per_n: Vec<GrowthRow> = (1..=r_max)
            .map(|n| {
                let size = self.ball_sizes[n as usize];
                GrowthRow {
                    radius: n,
                    ball_size: size,
                    ratio: size as f64 / (n as f64).powi(degree as i32),
                }
            })
            .collect();
        let pansu_hat = per_n.last().map(|row| row.ratio).unwrap_or(f64::NAN);
        Ok(GrowthEstimate {
            degree_hat: slope,
            pansu_hat,
            per_n,
        })
    }

    const CACHE_MAGIC: &'static [u8; 8] = b"UPXNT\x00\x00\x01";

    /// Persist the table to a versioned binary cache keyed by the model and
    /// max radius.
    pub fn save_cache(&self, path: &Path) -> Result<(), CayleyError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(Self::CACHE_MAGIC);
        let key = self.model.cache_key();
        buf.extend_from_slice(&(key.len() as u64).to_le_bytes());
        buf.extend_from_slice(key.as_bytes());
        buf.extend_from_slice(&self.max_radius.to_le_bytes());
        buf.extend_from_slice(&(self.by_norm.len() as u64).to_le_bytes());
        let dim = self.model.coord_len();
        buf.extend_from_slice(&(dim as u64).to_le_bytes());
        for layer in &self.by_norm {
            buf.extend_from_slice(&(layer.len() as u64).to_le_bytes());
            for el in layer {
                for &c in el.coords() {
                    buf.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)?.write_all(&buf)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Load a cached table, validating the version tag, model key, and
    /// radius.
    pub fn load_cache(
        path: &Path,
        model: &GroupModel,
        max_radius: u32,
    ) -> Result<NormTable, CayleyError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], CayleyError> {
            if *pos + n > buf.len() {
                return Err(CayleyError::Cache("truncated cache file".into()));
            }
            let s = &buf[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 8)? != Self::CACHE_MAGIC {
            return Err(CayleyError::Cache("bad magic or version tag".into()));
        }
        let key_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let key = String::from_utf8(take(&mut pos, key_len)?.to_vec())
            .map_err(|_| CayleyError::Cache("bad key encoding".into()))?;
        if key != model.cache_key() {
            return Err(CayleyError::Cache(format!(
                "cache key mismatch: file has {key:?}"
            )));
        }
        let cached_radius = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if cached_radius != max_radius {
            return Err(CayleyError::Cache(format!(
                "cache radius {cached_radius} != requested {max_radius}"
            )));
        }
        let n_layers = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let dim = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        if dim != model.coord_len() {
            return Err(CayleyError::Cache("dimension mismatch".into()));
        }
        let mut by_norm = Vec::with_capacity(n_layers);
        let mut norms = HashMap::new();
        for n in 0..n_layers {
            let count = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
            let mut layer = Vec::with_capacity(count);
            for _ in 0..count {
                let mut coords = Vec::with_capacity(dim);
                for _ in 0..dim {
                    coords.push(i64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
                }
                let el = Element::new(coords);
                norms.insert(el.clone(), n as u32);
                layer.push(el);
            }
            by_norm.push(layer);
        }
        let sphere_sizes: Vec<u64> = by_norm.iter().map(|l| l.len() as u64).collect();
        let mut ball_sizes = Vec::with_capacity(sphere_sizes.len());
        let mut acc = 0u64;
        for &s in &sphere_sizes {
            acc += s;
            ball_sizes.push(acc);
        }
        Ok(NormTable {
            model: model.clone(),
            max_radius,
            norms,
            by_norm,
            sphere_sizes,
            ball_sizes,
        })
    }
}

/// One row of the growth table: `(n, |B(n)|, |B(n)| / n^d)`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    pub radius: u32,
    pub ball_size: u64,
    pub ratio: f64,
}

/// Empirical growth summary: log-log slope and the volume-constant estimate
/// `|B(n_max)| / n_max^d`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthEstimate {
    pub degree_hat: f64,
    pub pansu_hat: f64,
    pub per_n: Vec<GrowthRow>,
}

/// Ordinary least squares fit `y = slope * x + intercept`.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn el(coords: &[i64]) -> Element {
        Element::new(coords.to_vec())
    }

    #[test]
    fn multiply_zd_is_componentwise() {
        let m = GroupModel::zd_standard(2);
        let g = m.multiply(&el(&[1, 2]), &el(&[3, -1])).unwrap();
        assert_eq!(g, el(&[4, 1]));
        let id = m.identity();
        assert_eq!(m.multiply(&el(&[5, -7]), &id).unwrap(), el(&[5, -7]));
    }

    #[test]
    fn multiply_heisenberg_matches_matrix_product() {
        let m = GroupModel::heisenberg();
        // x * y picks up the twist term.
        let xy = m.multiply(&el(&[1, 0, 0]), &el(&[0, 1, 0])).unwrap();
        assert_eq!(xy, el(&[1, 1, 1]));
        let yx = m.multiply(&el(&[0, 1, 0]), &el(&[1, 0, 0])).unwrap();
        assert_eq!(yx, el(&[1, 1, 0]));
        assert_eq!(
            m.multiply(&el(&[2, 3, 5]), &m.identity()).unwrap(),
            el(&[2, 3, 5])
        );
    }

    #[test]
    fn multiply_rejects_dimension_mismatch() {
        let m = GroupModel::zd_standard(2);
        let err = m.multiply(&el(&[1, 2, 3]), &el(&[0, 0])).unwrap_err();
        assert!(matches!(err, CayleyError::ModelMismatch { .. }));
    }

    #[test]
    fn inverse_zd_and_heisenberg() {
        let m = GroupModel::zd_standard(2);
        assert_eq!(m.inverse(&el(&[2, -3])).unwrap(), el(&[-2, 3]));

        let h = GroupModel::heisenberg();
        assert_eq!(h.inverse(&el(&[1, 1, 1])).unwrap(), el(&[-1, -1, 0]));
        assert_eq!(h.inverse(&h.identity()).unwrap(), h.identity());
        // g * g^{-1} = e on a sample of elements.
        for g in [el(&[3, -2, 7]), el(&[-1, 4, 0]), el(&[0, 0, -5])] {
            let inv = h.inverse(&g).unwrap();
            assert_eq!(h.multiply(&g, &inv).unwrap(), h.identity());
            assert_eq!(h.multiply(&inv, &g).unwrap(), h.identity());
        }
    }

    #[test]
    fn word_norms_standard_and_box() {
        let std2 = GroupModel::zd_standard(2);
        let t = NormTable::build(&std2, 8).unwrap();
        assert_eq!(t.word_norm(&el(&[2, 3])).unwrap(), 5);
        assert_eq!(t.word_norm(&std2.identity()).unwrap(), 0);

        let box2 = GroupModel::zd_box(2);
        let tb = NormTable::build(&box2, 8).unwrap();
        // Box generators move diagonally, so the norm is the sup norm.
        assert_eq!(tb.word_norm(&el(&[2, 3])).unwrap(), 3);
    }

    #[test]
    fn word_norm_out_of_window_errors() {
        let m = GroupModel::zd_standard(1);
        let t = NormTable::build(&m, 4).unwrap();
        let err = t.word_norm(&el(&[9])).unwrap_err();
        assert!(matches!(err, CayleyError::OutOfWindow { .. }));
    }

    #[test]
    fn distance_examples() {
        let m = GroupModel::zd_standard(2);
        let t = NormTable::build(&m, 6).unwrap();
        assert_eq!(t.distance(&el(&[1, 0]), &el(&[0, 1])).unwrap(), 2);
        assert_eq!(t.distance(&el(&[2, 2]), &el(&[2, 2])).unwrap(), 0);

        let h = GroupModel::heisenberg();
        let th = NormTable::build(&h, 6).unwrap();
        // (1,1,1) = x*y is a two-letter word.
        assert_eq!(th.distance(&el(&[1, 1, 1]), &h.identity()).unwrap(), 2);
    }

    #[test]
    fn distance_is_right_invariant() {
        let m = GroupModel::heisenberg();
        let t = NormTable::build(&m, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b2 = t.ball(&m.identity(), 2.0).unwrap();
        for _ in 0..100 {
            let x = b2.choose(&mut rng).unwrap();
            let y = b2.choose(&mut rng).unwrap();
            let g = b2.choose(&mut rng).unwrap();
            let xg = m.multiply(x, g).unwrap();
            let yg = m.multiply(y, g).unwrap();
            assert_eq!(
                t.distance(&xg, &yg).unwrap(),
                t.distance(x, y).unwrap(),
                "d({xg},{yg}) != d({x},{y})"
            );
        }
    }

    #[test]
    fn norm_axioms_on_window_sample() {
        let m = GroupModel::heisenberg();
        let t = NormTable::build(&m, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b3 = t.ball(&m.identity(), 3.0).unwrap();
        for _ in 0..200 {
            let g = b3.choose(&mut rng).unwrap();
            let h = b3.choose(&mut rng).unwrap();
            let ng = t.word_norm(g).unwrap();
            assert_eq!(t.word_norm(&m.inverse(g).unwrap()).unwrap(), ng);
            assert_eq!(ng == 0, *g == m.identity());
            let gh = m.multiply(g, h).unwrap();
            let ngh = t.word_norm(&gh).unwrap();
            assert!(ngh <= ng + t.word_norm(h).unwrap());
        }
    }

    #[test]
    fn ball_examples() {
        let z1 = GroupModel::zd_standard(1);
        let t1 = NormTable::build(&z1, 5).unwrap();
        let b = t1.ball(&z1.identity(), 3.0).unwrap();
        assert_eq!(b.len(), 7);
        let mut coords: Vec<i64> = b.iter().map(|e| e.coords()[0]).collect();
        coords.sort();
        assert_eq!(coords, vec![-3, -2, -1, 0, 1, 2, 3]);

        let b2 = GroupModel::zd_box(2);
        let t2 = NormTable::build(&b2, 4).unwrap();
        assert_eq!(t2.ball(&b2.identity(), 2.0).unwrap().len(), 25);

        let hm = GroupModel::heisenberg();
        let th = NormTable::build(&hm, 3).unwrap();
        let b1 = th.ball(&hm.identity(), 1.0).unwrap();
        assert_eq!(b1.len(), 5);
    }

    #[test]
    fn ball_size_examples() {
        let b3 = GroupModel::zd_box(3);
        let t = NormTable::build(&b3, 5).unwrap();
        assert_eq!(t.ball_size(4.0).unwrap(), 729);
        assert_eq!(t.ball_size(0.0).unwrap(), 1);
        // Real radii floor: |B(4.9)| = |B(4)|.
        assert_eq!(t.ball_size(4.9).unwrap(), 729);
    }

    #[test]
    fn ball_window_overflow_fails_loudly() {
        let m = GroupModel::zd_standard(1);
        let t = NormTable::build(&m, 5).unwrap();
        let err = t.ball(&el(&[3]), 4.0).unwrap_err();
        assert!(matches!(err, CayleyError::WindowOverflow { .. }));
    }

    #[test]
    fn ball_size_is_center_independent() {
        let m = GroupModel::heisenberg();
        let t = NormTable::build(&m, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let centers = t.ball(&m.identity(), 4.0).unwrap();
        for _ in 0..50 {
            let c = centers.choose(&mut rng).unwrap();
            let cn = t.word_norm(c).unwrap();
            for n in 0..=(8 - cn) {
                assert_eq!(
                    t.ball(c, n as f64).unwrap().len() as u64,
                    t.ball_size(n as f64).unwrap()
                );
            }
        }
    }

    #[test]
    fn balls_nest_and_spheres_partition() {
        let m = GroupModel::zd_box(2);
        let t = NormTable::build(&m, 6).unwrap();
        let c = el(&[1, -1]);
        let mut prev: Vec<Element> = Vec::new();
        let mut total = 0u64;
        for n in 0..=4u32 {
            let ball = t.ball(&c, n as f64).unwrap();
            for p in &prev {
                assert!(ball.contains(p), "B(c,{}) not nested in B(c,{n})", n - 1);
            }
            total += t.sphere_sizes()[n as usize];
            assert_eq!(ball.len() as u64, total);
            prev = ball;
        }
    }

    #[test]
    fn zd_box_growth_is_exact() {
        for d in 1..=3usize {
            let m = GroupModel::zd_box(d);
            let t = NormTable::build(&m, 10).unwrap();
            for n in 0..=10u32 {
                assert_eq!(
                    t.ball_size(n as f64).unwrap(),
                    (2 * n as u64 + 1).pow(d as u32),
                    "d={d}, n={n}"
                );
            }
        }
    }

    #[test]
    fn heisenberg_small_spheres() {
        let m = GroupModel::heisenberg();
        let t = NormTable::build(&m, 4).unwrap();
        assert_eq!(t.ball_sizes()[1], 5);
        assert_eq!(t.ball_sizes()[2], 17);
    }

    #[test]
    fn growth_estimates() {
        let b2 = GroupModel::zd_box(2);
        let t = NormTable::build(&b2, 40).unwrap();
        let g = t.estimate_growth(2).unwrap();
        assert!((g.degree_hat - 2.0).abs() < 0.1, "slope {}", g.degree_hat);
        assert!((g.pansu_hat - 4.0).abs() < 0.15, "pansu {}", g.pansu_hat);

        let z1 = GroupModel::zd_standard(1);
        let t1 = NormTable::build(&z1, 40).unwrap();
        let g1 = t1.estimate_growth(1).unwrap();
        assert!((g1.pansu_hat - 2.0).abs() < 0.05);
        assert!(g1.degree_hat > 0.0);

        let err = NormTable::build(&z1, 5).unwrap().estimate_growth(1);
        assert!(matches!(err, Err(CayleyError::TableTooSmall { .. })));
    }

    #[test]
    fn custom_generators_validated() {
        let bad = GroupModel::zd_custom(2, vec![el(&[1, 0])], None);
        assert!(bad.is_err(), "not inverse-closed");
        let bad2 = GroupModel::zd_custom(2, vec![el(&[0, 0])], None);
        assert!(bad2.is_err(), "identity in the set");
        let ok = GroupModel::zd_custom(
            2,
            vec![el(&[1, 0]), el(&[-1, 0]), el(&[0, 1]), el(&[0, -1])],
            Some(2),
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn cache_round_trip_and_key_guard() {
        let m = GroupModel::heisenberg();
        let t = NormTable::build(&m, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norms.bin");
        t.save_cache(&path).unwrap();

        let loaded = NormTable::load_cache(&path, &m, 5).unwrap();
        assert_eq!(loaded.ball_sizes(), t.ball_sizes());
        assert_eq!(loaded.sphere(3), t.sphere(3));

        let other = GroupModel::zd_standard(3);
        assert!(NormTable::load_cache(&path, &other, 5).is_err());
        assert!(NormTable::load_cache(&path, &m, 6).is_err());
    }
}
