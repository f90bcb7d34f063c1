//! Empirical radius thresholds.
//!
//! The covering estimates hold once ball radii are large enough; how large is
//! group-dependent and not effectively derivable, so each threshold is the
//! least radius from which the relevant inequality holds for every tabulated
//! radius in the window. A threshold that cannot be certified within the
//! window is absent and downgrades downstream guarantees to warnings.
//!
//! Scans are conservative about real radii: a real radius `r` floors to
//! `m = floor(r)` and its 3-expansion floors to at most `3m + 2`, so the
//! 3-expansion scan compares `|B(3m+2)|` against `3^{q+1} |B(m)|`.

use num_bigint::BigUint;
use num_rational::BigRational;
use serde::Serialize;

use crate::cayley::NormTable;

/// Empirical thresholds for one (group, q, eps, delta) combination.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdTable {
    pub q: u32,
    pub eps: f64,
    pub delta: f64,
    pub max_radius: u32,
    /// Least radius with `|B(3r+2)| < 3^{q+1} |B(r)|` for all larger radii
    /// (the measured-Vitali precondition).
    pub s_prime: Option<u32>,
    /// Least radius from which delta-expansions at the `eps/2` budget lose at
    /// most an `eps/2` fraction of measure.
    pub s_expansion: Option<u32>,
    /// Least radius from which delta-interiors at the `eps` budget keep at
    /// least a `1 - eps` fraction of measure.
    pub s_boundary: Option<u32>,
    /// `max(s_prime, s_expansion)`: the effective-Vitali radius floor.
    pub s_zero: Option<u32>,
    /// Least radius from which every ball contains two points further apart
    /// than two thirds of its radius.
    pub s_star: Option<u32>,
    /// Least radius from which measure ratios force the corresponding radius
    /// ratios.
    pub s_bang: Option<u32>,
    /// `max(s_zero, s_star, s_bang)`: the sandwich radius floor.
    pub s_one: Option<u32>,
    /// The same bundle recomputed at `eps = delta / 4`, which is the budget
    /// the upcrossing pipeline hands to the sandwich machinery.
    pub s_one_fill: Option<u32>,
    /// Names of thresholds that could not be certified within the window.
    pub uncertified: Vec<String>,
}

/// Least `s >= 1` such that `check(r)` holds for every `r` in `s..=hi`;
/// `None` when the range is empty or the largest radius fails.
fn least_from(hi: u32, mut check: impl FnMut(u32) -> bool) -> Option<u32> {
    if hi < 1 {
        return None;
    }
    let mut worst_fail = 0u32;
    for r in 1..=hi {
        if !check(r) {
            worst_fail = r;
        }
    }
    if worst_fail >= hi {
        return None;
    }
    Some(worst_fail + 1)
}

fn scan_s_prime(table: &NormTable, q: u32) -> Option<u32> {
    let sizes = table.ball_sizes();
    let last = (sizes.len() - 1) as u32;
    if last < 5 {
        return None;
    }
    let m_max = (last - 2) / 3;
    let factor = BigUint::from(3u32).pow(q + 1);
    least_from(m_max, |m| {
        let expanded = BigUint::from(sizes[(3 * m + 2) as usize]);
        let base = BigUint::from(sizes[m as usize]);
        expanded < base * &factor
    })
}

fn scan_s_expansion(table: &NormTable, q: u32, eps: f64) -> Option<u32> {
    if !(eps > 0.0 && eps < 1.0) {
        return None;
    }
    let sizes = table.ball_sizes();
    let last = (sizes.len() - 1) as u32;
    let cap = eps / (4.0 * q as f64);
    let grow = 1.0 + cap;
    let keep = BigRational::from_float(1.0 - eps).unwrap();
    // largest r whose capped expansion still floors inside the window
    let r_hi = (last as f64 / grow).floor() as u32;
    least_from(r_hi.min(last), |r| {
        let big = (r as f64 * grow).floor() as usize;
        let lhs = BigRational::from_integer(sizes[r as usize].into());
        let rhs = &keep * BigRational::from_integer(sizes[big].into());
        lhs >= rhs
    })
}

fn scan_s_boundary(table: &NormTable, q: u32, eps: f64) -> Option<u32> {
    if !(eps > 0.0 && eps < 1.0) {
        return None;
    }
    let sizes = table.ball_sizes();
    let last = (sizes.len() - 1) as u32;
    let cap = (eps / (4.0 * q as f64)).min(0.5);
    let keep = BigRational::from_float(1.0 - eps).unwrap();
    least_from(last, |r| {
        let inner = (r as f64 * (1.0 - cap)).floor() as usize;
        let lhs = BigRational::from_integer(sizes[inner].into());
        let rhs = &keep * BigRational::from_integer(sizes[r as usize].into());
        lhs >= rhs
    })
}

fn scan_s_star(table: &NormTable) -> Option<u32> {
    // A sphere point y at norm r and the identity witness d(y, e) = r > 2r/3.
    let spheres = table.sphere_sizes();
    let last = (spheres.len() - 1) as u32;
    least_from(last, |r| spheres[r as usize] > 0)
}

fn scan_s_bang(table: &NormTable, q: u32) -> Option<u32> {
    let sizes = table.ball_sizes();
    let last = (sizes.len() - 1) as u32;
    if last < 2 {
        return None;
    }
    // For every pair r1 > r2 >= s the measure ratio 1 + t = V1/V2 must force
    // (r1/r2)^q >= (1+t)/(1+2t/3) = 3 V1 / (V2 + 2 V1), i.e.
    // r1^q (V2 + 2 V1) >= 3 V1 r2^q.
    let mut worst_fail = 0u32;
    for r2 in 1..last {
        for r1 in (r2 + 1)..=last {
            let v1 = BigUint::from(sizes[r1 as usize]);
            let v2 = BigUint::from(sizes[r2 as usize]);
            if v1 <= v2 {
                continue;
            }
            let lhs = BigUint::from(r1).pow(q) * (&v2 + 2u32 * &v1);
            let rhs = 3u32 * &v1 * BigUint::from(r2).pow(q);
            if lhs < rhs {
                worst_fail = worst_fail.max(r2);
            }
        }
    }
    if worst_fail >= last {
        None
    } else {
        Some(worst_fail + 1)
    }
}

fn max_all(parts: &[Option<u32>]) -> Option<u32> {
    let mut m = 0u32;
    for p in parts {
        m = m.max((*p)?);
    }
    Some(m)
}

/// Scan the norm table for every threshold at the given budgets. Uncertified
/// thresholds are recorded by name, never fatal.
pub fn compute_thresholds(table: &NormTable, q: u32, eps: f64, delta: f64) -> ThresholdTable {
    let s_prime = scan_s_prime(table, q);
    let s_expansion = scan_s_expansion(table, q, eps / 2.0);
    let s_boundary = scan_s_boundary(table, q, eps);
    let s_zero = max_all(&[s_prime, s_expansion]);
    let s_star = scan_s_star(table);
    let s_bang = scan_s_bang(table, q);
    let s_one = max_all(&[s_zero, s_star, s_bang]);
    let fill_eps = delta / 4.0;
    let s_one_fill = max_all(&[
        s_prime,
        scan_s_expansion(table, q, fill_eps / 2.0),
        s_star,
        s_bang,
    ]);

    let mut uncertified = Vec::new();
    for (name, value) in [
        ("s_prime", s_prime),
        ("s_expansion", s_expansion),
        ("s_boundary", s_boundary),
        ("s_zero", s_zero),
        ("s_star", s_star),
        ("s_bang", s_bang),
        ("s_one", s_one),
        ("s_one_fill", s_one_fill),
    ] {
        if value.is_none() {
            uncertified.push(name.to_string());
        }
    }

    ThresholdTable {
        q,
        eps,
        delta,
        max_radius: table.max_radius(),
        s_prime,
        s_expansion,
        s_boundary,
        s_zero,
        s_star,
        s_bang,
        s_one,
        s_one_fill,
        uncertified,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley::GroupModel;

    #[test]
    fn z1_standard_thresholds() {
        let table = NormTable::build(&GroupModel::zd_standard(1), 60).unwrap();
        let t = compute_thresholds(&table, 1, 0.25, 0.1);
        // |B(3m+2)| = 6m+5 < 9(2m+1) for every m >= 1.
        assert_eq!(t.s_prime, Some(1));
        assert_eq!(t.s_star, Some(1));
        assert_eq!(t.s_bang, Some(1));
        assert!(t.s_one.is_some());
        assert!(t.uncertified.is_empty(), "{:?}", t.uncertified);
    }

    #[test]
    fn z2_box_thresholds() {
        let table = NormTable::build(&GroupModel::zd_box(2), 40).unwrap();
        let t = compute_thresholds(&table, 2, 0.25, 0.1);
        // (6m+5)^2 < 27 (2m+1)^2 for every m >= 1.
        assert_eq!(t.s_prime, Some(1));
        assert_eq!(t.s_star, Some(1));
        assert!(t.s_zero.is_some());
    }

    #[test]
    fn tiny_window_reports_uncertified() {
        let table = NormTable::build(&GroupModel::zd_standard(1), 3).unwrap();
        let t = compute_thresholds(&table, 1, 0.25, 0.1);
        assert_eq!(t.s_prime, None);
        assert!(t.uncertified.contains(&"s_prime".to_string()));
    }

    #[test]
    fn heisenberg_thresholds_exist() {
        let table = NormTable::build(&GroupModel::heisenberg(), 26).unwrap();
        let t = compute_thresholds(&table, 4, 0.5, 0.4);
        assert!(t.s_prime.is_some(), "{t:?}");
        assert_eq!(t.s_star, Some(1));
    }
}
