//! The constants driving the covering estimates.
//!
//! `C = 3^{q+1} / (3^{q+1} - 1)` is the per-pass shrink factor of the
//! uncovered remainder in iterated Vitali selection; `K` is the tower height
//! consumed per guaranteed growth factor in the sandwich dichotomy; `Delta`
//! caps the interleaving expansion; `D` is the chain thinning stride used
//! when turning upcrossing ball chains into towers.
//!
//! `K` and `D` are ceilings of log ratios. The log arguments are evaluated in
//! exact rational arithmetic (treating the inputs as their exact f64 values)
//! so a ceiling never comes out off by one from float rounding.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use super::space::rational_from_f64;
use super::CoveringError;

/// The covering constants for growth degree `q`.
#[derive(Debug, Clone, Serialize)]
pub struct CoveringConstants {
    pub q: u32,
    /// `3^{q+1} / (3^{q+1} - 1)`.
    pub c_const: f64,
    /// `max(144 q, 4)`.
    pub big_delta: f64,
}

impl CoveringConstants {
    pub fn new(q: u32) -> Self {
        let p = 3f64.powi(q as i32 + 1);
        CoveringConstants {
            q,
            c_const: p / (p - 1.0),
            big_delta: (144.0 * q as f64).max(4.0),
        }
    }

    /// `C` as an exact rational.
    fn c_rational(&self) -> BigRational {
        let p = BigInt::from(3u32).pow(self.q + 1);
        BigRational::new(p.clone(), p - 1)
    }

    /// Least `k >= 0` with `base^k >= value`, exactly (`base > 1`).
    fn ceil_log(base: &BigRational, value: &BigRational) -> u32 {
        let mut k = 0u32;
        let mut pow = BigRational::one();
        while pow < *value {
            pow *= base;
            k += 1;
        }
        k
    }

    /// `K = ceil(2 log_C (4 / eps))`, the number of levels per guaranteed
    /// growth factor. Requires `0 < eps`.
    pub fn k_levels(&self, eps: f64) -> Result<u32, CoveringError> {
        if !(eps > 0.0) {
            return Err(CoveringError::InvalidParameter(format!(
                "eps must be positive, got {eps}"
            )));
        }
        // ceil(2 log_C x) = least k with C^k >= x^2
        let x = rational_from_f64(4.0 / eps)?;
        Ok(Self::ceil_log(&self.c_rational(), &(&x * &x)).max(1))
    }

    /// Reference double-precision evaluation of `K`, for cross-checking the
    /// exact ceiling.
    pub fn k_levels_f64(&self, eps: f64) -> f64 {
        (2.0 * (4.0 / eps).ln() / self.c_const.ln()).ceil()
    }

    /// `D = q * ceil(log(2 + 576 q / delta) / (log(1+delta) - log(1+2delta/3))) + 1`,
    /// the chain-thinning stride. Requires `0 < delta`.
    pub fn d_spacing(&self, delta: f64) -> Result<u32, CoveringError> {
        if !(delta > 0.0) {
            return Err(CoveringError::InvalidParameter(format!(
                "delta must be positive, got {delta}"
            )));
        }
        // ceil(log(v) / log(b)) with b = (1+delta) / (1+2delta/3):
        // least m with b^m >= v.
        let b_num = rational_from_f64(1.0 + delta)?;
        let b_den = rational_from_f64(1.0 + 2.0 * delta / 3.0)?;
        let base = b_num / b_den;
        let v = rational_from_f64(2.0 + 576.0 * self.q as f64 / delta)?;
        let m = Self::ceil_log(&base, &v);
        Ok(self.q * m + 1)
    }

    /// Reference double-precision evaluation of `D`.
    pub fn d_spacing_f64(&self, delta: f64) -> f64 {
        let m = ((2.0 + 576.0 * self.q as f64 / delta).ln()
            / ((1.0 + delta).ln() - (1.0 + 2.0 * delta / 3.0).ln()))
        .ceil();
        self.q as f64 * m + 1.0
    }

    /// Exact test of `height >= 1 + log_C(2 / eps)` for the effective Vitali
    /// hypotheses: equivalent to `C^(height-1) >= 2 / eps`.
    pub fn height_sufficient(&self, height: u32, eps: f64) -> Result<bool, CoveringError> {
        if height == 0 {
            return Ok(false);
        }
        let c = self.c_rational();
        let target = rational_from_f64(2.0 / eps)?;
        Ok(Self::ceil_log(&c, &target) < height)
    }

    /// Exact test of `levels >= 2 log_C(4 / eps)`: equivalent to
    /// `C^levels >= (4 / eps)^2`.
    pub fn sandwich_levels_sufficient(&self, levels: u32, eps: f64) -> Result<bool, CoveringError> {
        let x = rational_from_f64(4.0 / eps)?;
        Ok(Self::ceil_log(&self.c_rational(), &(&x * &x)) <= levels)
    }
}
