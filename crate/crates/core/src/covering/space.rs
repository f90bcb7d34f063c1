//! Exact measure and containment backends for ball collections.
//!
//! Every covering decision (disjointness, inclusion, covered fraction) is
//! made by exact counting, never by triangle-inequality shortcuts: word-metric
//! balls are not Euclidean and the covering fractions asserted downstream
//! must be exact.
//!
//! Two backends implement the same interface:
//!
//! * [`WindowSpace`] enumerates ball point sets through a [`NormTable`] and
//!   works for any group model, limited to the table window.
//! * [`BoxSpace`] handles the `Z^d` box metrics analytically: balls are the
//!   integer boxes `[c - floor(r), c + floor(r)]^d`, and unions are counted
//!   by coordinate compression in big-integer arithmetic. This is the only
//!   backend that can host the tall geometrically expanding towers the
//!   effective covering theorem asks for, whose radii overflow any
//!   enumerable window.

use std::collections::HashSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Zero};

use crate::cayley::{Element, NormTable};

use super::{Ball, CoveringError};

/// Exact set-level queries on balls.
pub trait BallSpace: Sync {
    /// Counting measure of a single ball.
    fn measure(&self, ball: &Ball) -> Result<BigUint, CoveringError>;

    /// Whether the two balls have empty intersection.
    fn disjoint(&self, a: &Ball, b: &Ball) -> Result<bool, CoveringError>;

    /// Whether `inner` is a subset of `outer` as point sets.
    fn contains(&self, outer: &Ball, inner: &Ball) -> Result<bool, CoveringError>;

    /// Whether the point lies in the ball.
    fn contains_point(&self, ball: &Ball, point: &Element) -> Result<bool, CoveringError>;

    /// Counting measure of the union of the balls.
    fn union_measure(&self, balls: &[Ball]) -> Result<BigUint, CoveringError>;

    /// Counting measure of `target ∩ (∪ parts)`.
    fn covered_measure(&self, target: &Ball, parts: &[Ball]) -> Result<BigUint, CoveringError>;
}

/// `a / b >= threshold`, decided exactly (`b > 0`).
pub(crate) fn fraction_at_least(a: &BigUint, b: &BigUint, threshold: &BigRational) -> bool {
    let lhs = BigRational::new(BigInt::from(a.clone()), BigInt::from(b.clone()));
    lhs >= *threshold
}

/// Exact rational value of a finite nonnegative f64.
pub(crate) fn rational_from_f64(x: f64) -> Result<BigRational, CoveringError> {
    BigRational::from_float(x)
        .ok_or_else(|| CoveringError::InvalidParameter(format!("non-finite value {x}")))
}

/// Ball queries answered by explicit point enumeration within a norm-table
/// window.
pub struct WindowSpace<'a> {
    table: &'a NormTable,
}

impl<'a> WindowSpace<'a> {
    pub fn new(table: &'a NormTable) -> Self {
        WindowSpace { table }
    }

    pub fn table(&self) -> &'a NormTable {
        self.table
    }

    fn int_radius(ball: &Ball) -> Result<u32, CoveringError> {
        if !ball.radius.is_finite() || ball.radius < 0.0 {
            return Err(CoveringError::InvalidParameter(format!(
                "ball radius {} is not a nonnegative real",
                ball.radius
            )));
        }
        Ok(ball.radius.floor().min(u32::MAX as f64) as u32)
    }

    /// Point set of a ball; errors if the ball leaves the window.
    pub fn points(&self, ball: &Ball) -> Result<Vec<Element>, CoveringError> {
        Ok(self.table.ball(&ball.center, ball.radius)?)
    }

    fn membership_radius(&self, ball: &Ball) -> Result<u32, CoveringError> {
        let r = Self::int_radius(ball)?;
        if r > self.table.max_radius() {
            return Err(CoveringError::Cayley(
                crate::cayley::CayleyError::WindowOverflow {
                    center_norm: 0,
                    radius: ball.radius,
                    max_radius: self.table.max_radius(),
                },
            ));
        }
        Ok(r)
    }

    fn point_in(&self, ball: &Ball, r: u32, point: &Element) -> Result<bool, CoveringError> {
        let model = self.table.model();
        let inv = model.inverse(point)?;
        let diff = model.multiply(&ball.center, &inv)?;
        Ok(self.table.norm_at_most(&diff, r))
    }
}

impl BallSpace for WindowSpace<'_> {
    fn measure(&self, ball: &Ball) -> Result<BigUint, CoveringError> {
        Ok(BigUint::from(self.table.ball_size(ball.radius)?))
    }

    fn disjoint(&self, a: &Ball, b: &Ball) -> Result<bool, CoveringError> {
        // Walk the smaller ball and test membership in the other by norm.
        let (small, big) = if self.measure(a)? <= self.measure(b)? {
            (a, b)
        } else {
            (b, a)
        };
        let rb = self.membership_radius(big)?;
        for p in self.points(small)? {
            if self.point_in(big, rb, &p)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn contains(&self, outer: &Ball, inner: &Ball) -> Result<bool, CoveringError> {
        let ro = self.membership_radius(outer)?;
        for p in self.points(inner)? {
            if !self.point_in(outer, ro, &p)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn contains_point(&self, ball: &Ball, point: &Element) -> Result<bool, CoveringError> {
        let r = self.membership_radius(ball)?;
        self.point_in(ball, r, point)
    }

    fn union_measure(&self, balls: &[Ball]) -> Result<BigUint, CoveringError> {
        let mut seen: HashSet<Element> = HashSet::new();
        for b in balls {
            for p in self.points(b)? {
                seen.insert(p);
            }
        }
        Ok(BigUint::from(seen.len()))
    }

    fn covered_measure(&self, target: &Ball, parts: &[Ball]) -> Result<BigUint, CoveringError> {
        let rt = self.membership_radius(target)?;
        let mut seen: HashSet<Element> = HashSet::new();
        for part in parts {
            for p in self.points(part)? {
                if self.point_in(target, rt, &p)? {
                    seen.insert(p);
                }
            }
        }
        Ok(BigUint::from(seen.len()))
    }
}

/// Inclusive integer box `[lo_i, hi_i]` per axis.
struct IntBox {
    lo: Vec<BigInt>,
    hi: Vec<BigInt>,
}

/// Analytic backend for the `Z^d` box metric: `B(c, r)` is the box with
/// half-width `floor(r)` around `c`. Radii may exceed any enumerable window;
/// all counting is exact big-integer arithmetic.
pub struct BoxSpace {
    dim: usize,
}

impl BoxSpace {
    /// Dimensions above 3 are rejected: union counting is cell-grid based.
    pub fn new(dim: usize) -> Result<Self, CoveringError> {
        if dim == 0 || dim > 3 {
            return Err(CoveringError::InvalidParameter(format!(
                "box space supports dimensions 1..=3, got {dim}"
            )));
        }
        Ok(BoxSpace { dim })
    }

    fn to_box(&self, ball: &Ball) -> Result<IntBox, CoveringError> {
        if ball.center.len() != self.dim {
            return Err(CoveringError::InvalidParameter(format!(
                "ball center {} has wrong dimension for box space of dimension {}",
                ball.center, self.dim
            )));
        }
        if !ball.radius.is_finite() || ball.radius < 0.0 {
            return Err(CoveringError::InvalidParameter(format!(
                "ball radius {} is not a nonnegative real",
                ball.radius
            )));
        }
        let r = BigInt::from_f64(ball.radius.floor()).ok_or_else(|| {
            CoveringError::InvalidParameter(format!("radius {} not representable", ball.radius))
        })?;
        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        for &c in ball.center.coords() {
            lo.push(BigInt::from(c) - &r);
            hi.push(BigInt::from(c) + &r);
        }
        Ok(IntBox { lo, hi })
    }

    fn box_measure(b: &IntBox) -> BigUint {
        let mut m = BigInt::one();
        for (lo, hi) in b.lo.iter().zip(&b.hi) {
            m *= hi - lo + 1;
        }
        m.to_biguint().expect("nonnegative box measure")
    }

    fn boxes_disjoint(a: &IntBox, b: &IntBox) -> bool {
        a.lo.iter()
            .zip(&a.hi)
            .zip(b.lo.iter().zip(&b.hi))
            .any(|((alo, ahi), (blo, bhi))| ahi < blo || bhi < alo)
    }

    fn box_contains(outer: &IntBox, inner: &IntBox) -> bool {
        outer
            .lo
            .iter()
            .zip(&outer.hi)
            .zip(inner.lo.iter().zip(&inner.hi))
            .all(|((olo, ohi), (ilo, ihi))| olo <= ilo && ihi <= ohi)
    }

    /// Intersection of two boxes, if nonempty.
    fn clip(a: &IntBox, b: &IntBox) -> Option<IntBox> {
        let mut lo = Vec::with_capacity(a.lo.len());
        let mut hi = Vec::with_capacity(a.hi.len());
        for ((alo, ahi), (blo, bhi)) in a.lo.iter().zip(&a.hi).zip(b.lo.iter().zip(&b.hi)) {
            let l = alo.max(blo).clone();
            let h = ahi.min(bhi).clone();
            if l > h {
                return None;
            }
            lo.push(l);
            hi.push(h);
        }
        Some(IntBox { lo, hi })
    }

    /// Exact union measure by coordinate compression: cut each axis at every
    /// box boundary and count whole cells covered by at least one box.
    fn union_of_boxes(boxes: &[IntBox]) -> BigUint {
        if boxes.is_empty() {
            return BigUint::zero();
        }
        let dim = boxes[0].lo.len();
        let mut cuts: Vec<Vec<BigInt>> = vec![Vec::new(); dim];
        for b in boxes {
            for axis in 0..dim {
                cuts[axis].push(b.lo[axis].clone());
                cuts[axis].push(&b.hi[axis] + 1);
            }
        }
        for axis in &mut cuts {
            axis.sort();
            axis.dedup();
        }
        // Cell (i_1, .., i_d) spans [cuts[a][i_a], cuts[a][i_a + 1]) per axis;
        // cells never straddle a box boundary, so membership of the low
        // corner decides the whole cell.
        let mut total = BigUint::zero();
        let mut idx = vec![0usize; dim];
        'cells: loop {
            let corner: Vec<&BigInt> = (0..dim).map(|a| &cuts[a][idx[a]]).collect();
            let covered = boxes
                .iter()
                .any(|b| (0..dim).all(|a| &b.lo[a] <= corner[a] && corner[a] <= &b.hi[a]));
            if covered {
                let mut vol = BigInt::one();
                for a in 0..dim {
                    vol *= &cuts[a][idx[a] + 1] - &cuts[a][idx[a]];
                }
                total += vol.to_biguint().expect("positive cell volume");
            }
            // advance the cell odometer
            for a in 0..dim {
                idx[a] += 1;
                if idx[a] + 1 < cuts[a].len() {
                    continue 'cells;
                }
                idx[a] = 0;
            }
            break;
        }
        total
    }

    fn element_point(&self, point: &Element) -> Result<Vec<BigInt>, CoveringError> {
        if point.len() != self.dim {
            return Err(CoveringError::InvalidParameter(format!(
                "point {point} has wrong dimension for box space of dimension {}",
                self.dim
            )));
        }
        Ok(point.coords().iter().map(|&c| BigInt::from(c)).collect())
    }
}

impl BallSpace for BoxSpace {
    fn measure(&self, ball: &Ball) -> Result<BigUint, CoveringError> {
        Ok(Self::box_measure(&self.to_box(ball)?))
    }

    fn disjoint(&self, a: &Ball, b: &Ball) -> Result<bool, CoveringError> {
        Ok(Self::boxes_disjoint(&self.to_box(a)?, &self.to_box(b)?))
    }

    fn contains(&self, outer: &Ball, inner: &Ball) -> Result<bool, CoveringError> {
        Ok(Self::box_contains(
            &self.to_box(outer)?,
            &self.to_box(inner)?,
        ))
    }

    fn contains_point(&self, ball: &Ball, point: &Element) -> Result<bool, CoveringError> {
        let b = self.to_box(ball)?;
        let p = self.element_point(point)?;
        Ok((0..self.dim).all(|a| b.lo[a] <= p[a] && p[a] <= b.hi[a]))
    }

    fn union_measure(&self, balls: &[Ball]) -> Result<BigUint, CoveringError> {
        let boxes = balls
            .iter()
            .map(|b| self.to_box(b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::union_of_boxes(&boxes))
    }

    fn covered_measure(&self, target: &Ball, parts: &[Ball]) -> Result<BigUint, CoveringError> {
        let t = self.to_box(target)?;
        let mut clipped = Vec::new();
        for p in parts {
            if let Some(c) = Self::clip(&t, &self.to_box(p)?) {
                clipped.push(c);
            }
        }
        Ok(Self::union_of_boxes(&clipped))
    }
}
