//! Towers: per-base-point nested chains of balls.

use crate::cayley::Element;

use super::space::BallSpace;
use super::{Ball, CoveringError};

/// A finite family of nested ball chains `U_1(x) ⊆ … ⊆ U_n(x)` indexed by
/// base points `x`. Centered towers have every `U_i(x)` centered at `x`.
#[derive(Debug, Clone)]
pub struct Tower {
    base: Vec<Element>,
    /// `levels[i][j]` is the level `i+1` ball of `base[j]`.
    levels: Vec<Vec<Ball>>,
    centered: bool,
}

impl Tower {
    /// Build a tower from per-base chains, validating membership of the base
    /// point in every ball of its chain and the nesting of consecutive
    /// levels. `chains[j]` lists the balls of `base[j]` from level 1 up.
    pub fn new(
        base: Vec<Element>,
        chains: Vec<Vec<Ball>>,
        space: &dyn BallSpace,
    ) -> Result<Tower, CoveringError> {
        Self::build(base, chains, Some(space))
    }

    fn build(
        base: Vec<Element>,
        chains: Vec<Vec<Ball>>,
        space: Option<&dyn BallSpace>,
    ) -> Result<Tower, CoveringError> {
        if base.is_empty() {
            return Err(CoveringError::EmptyTower);
        }
        if chains.len() != base.len() {
            return Err(CoveringError::InvalidTower(format!(
                "{} chains for {} base points",
                chains.len(),
                base.len()
            )));
        }
        let height = chains[0].len();
        if height == 0 {
            return Err(CoveringError::InvalidTower("empty chain".into()));
        }
        let centered = chains
            .iter()
            .zip(&base)
            .all(|(chain, x)| chain.iter().all(|b| b.center == *x));
        for (chain, x) in chains.iter().zip(&base) {
            if chain.len() != height {
                return Err(CoveringError::InvalidTower(
                    "chains have differing heights".into(),
                ));
            }
            for (i, ball) in chain.iter().enumerate() {
                if !ball.radius.is_finite() || ball.radius < 0.0 {
                    return Err(CoveringError::InvalidTower(format!(
                        "level {} ball of {x} has invalid radius {}",
                        i + 1,
                        ball.radius
                    )));
                }
                if !centered {
                    let space = space.ok_or_else(|| {
                        CoveringError::InvalidTower("non-centered chain needs a ball space".into())
                    })?;
                    if !space.contains_point(ball, x)? {
                        return Err(CoveringError::InvalidTower(format!(
                            "base point {x} not in its level {} ball",
                            i + 1
                        )));
                    }
                }
            }
            for i in 0..height - 1 {
                let nested = if centered {
                    chain[i].radius.floor() <= chain[i + 1].radius.floor()
                } else {
                    let space = space.ok_or_else(|| {
                        CoveringError::InvalidTower("non-centered chain needs a ball space".into())
                    })?;
                    space.contains(&chain[i + 1], &chain[i])?
                };
                if !nested {
                    return Err(CoveringError::InvalidTower(format!(
                        "chain of {x} is not nested between levels {} and {}",
                        i + 1,
                        i + 2
                    )));
                }
            }
        }
        let mut levels = vec![Vec::with_capacity(base.len()); height];
        for chain in chains {
            for (i, ball) in chain.into_iter().enumerate() {
                levels[i].push(ball);
            }
        }
        Ok(Tower {
            base,
            levels,
            centered,
        })
    }

    /// Centered tower from per-base radius ladders (element `j` of `radii`
    /// lists the level radii for `base[j]`).
    pub fn centered(base: Vec<Element>, radii: Vec<Vec<f64>>) -> Result<Tower, CoveringError> {
        if base.is_empty() {
            return Err(CoveringError::EmptyTower);
        }
        if base.len() != radii.len() {
            return Err(CoveringError::InvalidTower(format!(
                "{} radius ladders for {} base points",
                radii.len(),
                base.len()
            )));
        }
        let chains = base
            .iter()
            .zip(&radii)
            .map(|(x, rs)| rs.iter().map(|&r| Ball::new(x.clone(), r)).collect())
            .collect();
        Self::build(base, chains, None)
    }

    pub fn base(&self) -> &[Element] {
        &self.base
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Balls of level `i` (1-based).
    pub fn level(&self, i: usize) -> &[Ball] {
        &self.levels[i - 1]
    }

    /// The chain of `base[j]`, bottom to top.
    pub fn chain(&self, j: usize) -> impl Iterator<Item = &Ball> {
        self.levels.iter().map(move |lvl| &lvl[j])
    }

    /// All balls of the tower.
    pub fn balls(&self) -> impl Iterator<Item = &Ball> {
        self.levels.iter().flatten()
    }

    /// Infimum of the radii present.
    pub fn rad(&self) -> f64 {
        self.balls().map(|b| b.radius).fold(f64::INFINITY, f64::min)
    }

    /// The sub-tower of levels `lo..=hi` (1-based, inclusive).
    pub fn sub_levels(&self, lo: usize, hi: usize) -> Tower {
        assert!(1 <= lo && lo <= hi && hi <= self.height());
        Tower {
            base: self.base.clone(),
            levels: self.levels[lo - 1..hi].to_vec(),
            centered: self.centered,
        }
    }

    /// The sub-tower over the base points with the given indexes.
    pub fn restrict_base(&self, keep: &[usize]) -> Result<Tower, CoveringError> {
        if keep.is_empty() {
            return Err(CoveringError::EmptyTower);
        }
        let base = keep.iter().map(|&j| self.base[j].clone()).collect();
        let levels = self
            .levels
            .iter()
            .map(|lvl| keep.iter().map(|&j| lvl[j].clone()).collect())
            .collect();
        Ok(Tower {
            base,
            levels,
            centered: self.centered,
        })
    }

    /// Whether every consecutive pair satisfies `U_i(x)^delta ⊆ U_{i+1}(x)`.
    /// For centered towers this is the radius test
    /// `(1 + delta) * r_i <= r_{i+1}`.
    pub fn is_delta_expanding(
        &self,
        delta: f64,
        space: &dyn BallSpace,
    ) -> Result<bool, CoveringError> {
        if !(delta >= 0.0) {
            return Err(CoveringError::InvalidParameter(format!(
                "expansion parameter must be nonnegative, got {delta}"
            )));
        }
        for j in 0..self.base.len() {
            for i in 1..self.height() {
                let lower = &self.levels[i - 1][j];
                let upper = &self.levels[i][j];
                let ok = if self.centered {
                    (1.0 + delta) * lower.radius <= upper.radius
                } else {
                    space.contains(upper, &lower.expanded(delta)?)?
                };
                if !ok {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}
