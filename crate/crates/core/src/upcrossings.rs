//! Upcrossing counting, Q/R event detection, transference density, Monte
//! Carlo tail estimation, and exponential-decay fitting.
//!
//! An upcrossing over `(alpha, beta)` is a strict dip below `alpha` followed
//! later by a strict rise above `beta`; values equal to either endpoint count
//! for neither side. The Q event asks for at least `k` upcrossings in the
//! radius-indexed process profile; the R event asks for a larger ball whose
//! process value exceeds `beta` while admitting a delta-fill by disjoint
//! sub-balls with values below `alpha`. The fill search is a documented
//! heuristic: a missing witness can only understate the R term.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cayley::{CayleyError, Element, NormTable};
use crate::covering::{
    find_delta_fill, radius_ratio_bound, Ball, BallCollection, BallSpace, CoveringConstants,
    CoveringError, Tower, WindowSpace,
};
use crate::processes::{derive_seed, eval_profile, Distribution, Field, ProcessError, ProcessKind};

/// 95% and 99% two-sided normal quantiles for binomial intervals.
pub const Z95: f64 = 1.959963984540054;
pub const Z99: f64 = 2.5758293035489004;

#[derive(Debug, Error)]
pub enum UpcrossingError {
    #[error(transparent)]
    Cayley(#[from] CayleyError),

    #[error(transparent)]
    Process(#[from] ProcessError),

    #[error(transparent)]
    Covering(#[from] CoveringError),

    #[error("invalid interval: alpha {alpha} must be below beta {beta}")]
    InvalidInterval { alpha: f64, beta: f64 },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("exponential fit needs at least two rows with 5+ hits, found {rows}")]
    InsufficientFit { rows: usize },

    #[error("ball chain violation: {0}")]
    ChainViolation(String),

    #[error("measure ratio |V_{level}| / |U_{level}| = {ratio} is not above 1 + delta = {required}; that pair is a delta-fill")]
    RatioViolation {
        level: usize,
        ratio: f64,
        required: f64,
    },

    #[error("trial {index} (seed {seed}) failed: {source}")]
    Trial {
        index: u64,
        seed: u64,
        #[source]
        source: Box<UpcrossingError>,
    },
}

fn trial_context(index: u64, seed: u64) -> impl FnOnce(UpcrossingError) -> UpcrossingError {
    move |source| UpcrossingError::Trial {
        index,
        seed,
        source: Box::new(source),
    }
}

/// Parameters of one upcrossing experiment.
#[derive(Debug, Clone, Serialize)]
pub struct UpcrossingQuery {
    pub alpha: f64,
    pub beta: f64,
    /// Upcrossing count threshold for the Q event.
    pub k: u32,
    /// Fill tolerance for the R event.
    pub delta: f64,
    /// Profile length: the Q sequence is `(S_{B(g, i)})_{i = 1..=l}`.
    pub l: u32,
    /// Search cap for the R event, `n = k+1 ..= n_max`.
    pub n_max: u32,
    /// Candidate radii for fill sub-balls.
    pub fill_radii: Vec<f64>,
}

impl UpcrossingQuery {
    pub fn validate(&self) -> Result<(), UpcrossingError> {
        if !(self.alpha < self.beta) {
            return Err(UpcrossingError::InvalidInterval {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        if self.k < 1 {
            return Err(UpcrossingError::InvalidQuery("k must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(UpcrossingError::InvalidQuery(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.l < 1 {
            return Err(UpcrossingError::InvalidQuery("l must be at least 1".into()));
        }
        if self.n_max <= self.k {
            return Err(UpcrossingError::InvalidQuery(format!(
                "n_max = {} must exceed k = {}",
                self.n_max, self.k
            )));
        }
        for &r in &self.fill_radii {
            if !(r.is_finite() && r >= 0.0) {
                return Err(UpcrossingError::InvalidQuery(format!(
                    "fill radius {r} is not a nonnegative real"
                )));
            }
        }
        Ok(())
    }
}

/// Maximal `n` such that the sequence has `n` upcrossings over
/// `(alpha, beta)`: indexes `i_1 < j_1 < … < i_n < j_n` with values strictly
/// below `alpha` at the `i`'s and strictly above `beta` at the `j`'s.
/// Two-state scan: seek a dip, then seek a rise, repeat.
pub fn count_upcrossings(seq: &[f64], alpha: f64, beta: f64) -> Result<u32, UpcrossingError> {
    if !(alpha < beta) {
        return Err(UpcrossingError::InvalidInterval { alpha, beta });
    }
    let mut count = 0u32;
    let mut seeking_dip = true;
    for &v in seq {
        if seeking_dip {
            if v < alpha {
                seeking_dip = false;
            }
        } else if v > beta {
            count += 1;
            seeking_dip = true;
        }
    }
    Ok(count)
}

/// Whether the radius profile `(S_{B(g, i)})_{i = 1..=l}` has at least `k`
/// upcrossings over the query interval.
pub fn detect_q(
    kind: ProcessKind,
    field: &Field,
    center: &Element,
    query: &UpcrossingQuery,
    table: &NormTable,
) -> Result<bool, UpcrossingError> {
    query.validate()?;
    let profile = eval_profile(kind, field, center, query.l, table)?;
    let count = count_upcrossings(&profile[1..], query.alpha, query.beta)?;
    Ok(count >= query.k)
}

/// A verified R-event witness: the radius `n` and the disjoint fill.
#[derive(Debug)]
pub struct RWitness {
    pub n: u32,
    pub fill: BallCollection,
}

/// Candidate sub-balls `B(h, r) ⊆ B(g, n)` with process value strictly below
/// `alpha`, for `r` on the configured grid. Containment is guaranteed through
/// the triangle inequality (`d(g, h) <= n - r`), which on the `Z^d` models is
/// exact and in general under-generates: a missed candidate can only make
/// the fill search more conservative.
fn fill_candidates(
    kind: ProcessKind,
    field: &Field,
    center: &Element,
    n: u32,
    query: &UpcrossingQuery,
    table: &NormTable,
) -> Result<Vec<Ball>, UpcrossingError> {
    let model = table.model();
    let mut candidates = Vec::new();
    let mut radii = query.fill_radii.clone();
    radii.sort_by(|a, b| b.partial_cmp(a).unwrap());
    radii.dedup();
    for &r in &radii {
        if r >= n as f64 {
            continue;
        }
        let max_center_dist = (n as f64 - r).floor() as u32;
        for layer in 0..=max_center_dist {
            for z in table.sphere(layer) {
                let h = model.multiply(z, center)?;
                let value = crate::processes::eval(kind, field, &h, r, table)?;
                if value < query.alpha {
                    candidates.push(Ball::new(h, r));
                }
            }
        }
    }
    Ok(candidates)
}

fn try_fill_at(
    kind: ProcessKind,
    field: &Field,
    center: &Element,
    n: u32,
    s_n: f64,
    query: &UpcrossingQuery,
    table: &NormTable,
) -> Result<Option<BallCollection>, UpcrossingError> {
    if !(s_n > query.beta) {
        return Ok(None);
    }
    let candidates = fill_candidates(kind, field, center, n, query, table)?;
    let space = WindowSpace::new(table);
    let target = Ball::new(center.clone(), n as f64);
    Ok(find_delta_fill(
        &target,
        &BallCollection::new(candidates),
        query.delta,
        &space,
    )?)
}

fn check_r_window(
    field: &Field,
    center: &Element,
    query: &UpcrossingQuery,
    table: &NormTable,
) -> Result<(), UpcrossingError> {
    let center_norm = table.word_norm(center)?;
    // Fill candidates B(h, r) have points out to 2 n_max from the center.
    let needed = center_norm + 2 * query.n_max;
    if needed > table.max_radius() {
        return Err(UpcrossingError::Cayley(CayleyError::WindowOverflow {
            center_norm,
            radius: (2 * query.n_max) as f64,
            max_radius: table.max_radius(),
        }));
    }
    if center_norm + query.n_max > field.window_radius() {
        return Err(UpcrossingError::Process(ProcessError::WindowOverflow {
            needed: center_norm + query.n_max,
            window: field.window_radius(),
        }));
    }
    Ok(())
}

/// Search `n = k+1 ..= n_max` for a ball with `S_{B(g,n)} > beta` admitting a
/// verified delta-fill by disjoint sub-balls with values below `alpha`.
/// Returns the first witness. Absence is heuristic: the fill search is
/// incomplete, which can only understate the R event.
pub fn detect_r(
    kind: ProcessKind,
    field: &Field,
    center: &Element,
    query: &UpcrossingQuery,
    table: &NormTable,
) -> Result<Option<RWitness>, UpcrossingError> {
    query.validate()?;
    check_r_window(field, center, query, table)?;
    let profile = eval_profile(kind, field, center, query.n_max, table)?;
    for n in (query.k + 1)..=query.n_max {
        if let Some(fill) = try_fill_at(kind, field, center, n, profile[n as usize], query, table)?
        {
            return Ok(Some(RWitness { n, fill }));
        }
    }
    Ok(None)
}

/// Largest `n` in `2..=n_max` with a verified fill, or `None`. One scan
/// serves every threshold `k`: the trial hits `R^k` exactly when this value
/// exceeds `k`.
fn detect_r_max_n(
    kind: ProcessKind,
    field: &Field,
    center: &Element,
    query: &UpcrossingQuery,
    table: &NormTable,
) -> Result<Option<u32>, UpcrossingError> {
    check_r_window(field, center, query, table)?;
    let profile = eval_profile(kind, field, center, query.n_max, table)?;
    for n in (2..=query.n_max).rev() {
        if try_fill_at(kind, field, center, n, profile[n as usize], query, table)?.is_some() {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Spatial density of `Q \ R` occurrences inside `B(M)`:
/// `|{g in B(M) : Q_g and not R_g}| / |B(M)|`.
pub fn transference_density(
    kind: ProcessKind,
    field: &Field,
    m_radius: u32,
    query: &UpcrossingQuery,
    table: &NormTable,
) -> Result<f64, UpcrossingError> {
    query.validate()?;
    let identity = table.model().identity();
    let centers = table.ball(&identity, m_radius as f64)?;
    let mut hits = 0u64;
    for g in &centers {
        if detect_q(kind, field, g, query, table)?
            && detect_r(kind, field, g, query, table)?.is_none()
        {
            hits += 1;
        }
    }
    Ok(hits as f64 / centers.len() as f64)
}

/// One tail-table row: `P(at least k upcrossings)` with a binomial interval.
#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub k: u32,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval at the given normal quantile.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The degenerate endpoints are exact; keep float residue out of them.
    let lo = if hits == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if hits == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Least-squares fit of `log p_hat` against `k`.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentialFit {
    pub c_hat: f64,
    pub rho_hat: f64,
    pub r2: f64,
    /// The k values of the rows used in the fit.
    pub rows_used: Vec<u32>,
}

impl ExponentialFit {
    /// Flag for a tail that shows no decay.
    pub fn no_decay(&self) -> bool {
        self.rho_hat >= 1.0
    }
}

/// Fit `p(k) ~= c * rho^k` by least squares on `log p_hat` over the rows
/// with at least 5 hits. Errors unless two such rows exist.
pub fn fit_exponential(rows: &[TailRow]) -> Result<ExponentialFit, UpcrossingError> {
    let used: Vec<&TailRow> = rows.iter().filter(|r| r.hits >= 5).collect();
    if used.len() < 2 {
        return Err(UpcrossingError::InsufficientFit { rows: used.len() });
    }
    let xs: Vec<f64> = used.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = used.iter().map(|r| r.p_hat.ln()).collect();
    let (slope, intercept) = crate::cayley::least_squares(&xs, &ys);
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        let fit = slope * x + intercept;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - my) * (y - my);
    }
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(ExponentialFit {
        c_hat: intercept.exp(),
        rho_hat: slope.exp(),
        r2,
        rows_used: used.iter().map(|r| r.k).collect(),
    })
}

/// Upcrossing tail table with the attempted exponential fit.
#[derive(Debug, Clone, Serialize)]
pub struct TailTable {
    pub rows: Vec<TailRow>,
    pub fit: Option<ExponentialFit>,
}

fn rows_from_counts(per_trial: &[u32], k_max: u32, z: f64) -> Vec<TailRow> {
    let trials = per_trial.len() as u64;
    (1..=k_max)
        .map(|k| {
            let hits = per_trial.iter().filter(|&&c| c >= k).count() as u64;
            let p_hat = hits as f64 / trials as f64;
            let (ci_low, ci_high) = wilson_interval(hits, trials, z);
            TailRow {
                k,
                trials,
                hits,
                p_hat,
                ci_low,
                ci_high,
            }
        })
        .collect()
}

/// Monte Carlo estimate of the Q-event tail at the identity: one fresh field
/// per trial, one trajectory serving every threshold `k <= k_max`.
///
/// Trials run in parallel over derived seeds; results are identical for any
/// degree of parallelism.
pub fn tail_estimate(
    table: &NormTable,
    kind: ProcessKind,
    dist: &Distribution,
    query: &UpcrossingQuery,
    trials: u64,
    k_max: u32,
    master_seed: u64,
) -> Result<TailTable, UpcrossingError> {
    tail_estimate_from(table, kind, dist, query, trials, k_max, master_seed, 1)
}

/// [`tail_estimate`] with a configurable first radius. The subadditive
/// normalized sequences are naturally indexed from radius 0; the Q events
/// start at radius 1.
#[allow(clippy::too_many_arguments)]
pub fn tail_estimate_from(
    table: &NormTable,
    kind: ProcessKind,
    dist: &Distribution,
    query: &UpcrossingQuery,
    trials: u64,
    k_max: u32,
    master_seed: u64,
    start_radius: u32,
) -> Result<TailTable, UpcrossingError> {
    query.validate()?;
    if trials < 1 {
        return Err(UpcrossingError::InvalidQuery(
            "trials must be positive".into(),
        ));
    }
    if start_radius > 1 {
        return Err(UpcrossingError::InvalidQuery(
            "start radius must be 0 or 1".into(),
        ));
    }
    let model = table.model();
    let identity = model.identity();
    let counts: Vec<u32> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<u32, UpcrossingError> {
            let seed = derive_seed(master_seed, i);
            (|| {
                let field = Field::new(model, query.l, dist.clone(), seed)?;
                let profile = eval_profile(kind, &field, &identity, query.l, table)?;
                count_upcrossings(&profile[start_radius as usize..], query.alpha, query.beta)
            })()
            .map_err(trial_context(i, seed))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = rows_from_counts(&counts, k_max, Z95);
    let fit = fit_exponential(&rows).ok();
    Ok(TailTable { rows, fit })
}

/// Joint Q/R tail estimates sharing trials: each trial contributes its
/// upcrossing count and its largest verified R radius.
pub struct QrTails {
    pub q_tail: TailTable,
    pub r_rows: Vec<TailRow>,
}

#[allow(clippy::too_many_arguments)]
pub fn tail_estimate_with_r(
    table: &NormTable,
    kind: ProcessKind,
    dist: &Distribution,
    query: &UpcrossingQuery,
    trials: u64,
    k_max: u32,
    master_seed: u64,
) -> Result<QrTails, UpcrossingError> {
    query.validate()?;
    if trials < 1 {
        return Err(UpcrossingError::InvalidQuery(
            "trials must be positive".into(),
        ));
    }
    let model = table.model();
    let identity = model.identity();
    let window = query.l.max(query.n_max);
    let results: Vec<(u32, u32)> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(u32, u32), UpcrossingError> {
            let seed = derive_seed(master_seed, i);
            (|| {
                let field = Field::new(model, window, dist.clone(), seed)?;
                let profile = eval_profile(kind, &field, &identity, query.l, table)?;
                let count = count_upcrossings(&profile[1..], query.alpha, query.beta)?;
                let r_max = detect_r_max_n(kind, &field, &identity, query, table)?.unwrap_or(0);
                Ok((count, r_max))
            })()
            .map_err(trial_context(i, seed))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let q_counts: Vec<u32> = results.iter().map(|&(c, _)| c).collect();
    let rows = rows_from_counts(&q_counts, k_max, Z95);
    let fit = fit_exponential(&rows).ok();
    let r_rows = (1..=k_max)
        .map(|k| {
            let hits = results.iter().filter(|&&(_, rm)| rm > k).count() as u64;
            let p_hat = hits as f64 / trials as f64;
            let (ci_low, ci_high) = wilson_interval(hits, trials, Z95);
            TailRow {
                k,
                trials,
                hits,
                p_hat,
                ci_low,
                ci_high,
            }
        })
        .collect();
    Ok(QrTails {
        q_tail: TailTable { rows, fit },
        r_rows,
    })
}

/// Result of thinning an alternating upcrossing chain into sandwich towers.
#[derive(Debug)]
pub struct SpacingOutcome {
    /// Skipped prefix length `max(ceil(s_1), ceil(k/2))`.
    pub k_prime: u32,
    /// Thinning stride.
    pub d: u32,
    /// Tower height `floor((k - k') / D)`.
    pub height: u32,
    /// The thinned tower pair, when the height is at least 1.
    pub towers: Option<(Tower, Tower)>,
}

/// Validate an alternating centered chain `U_1 ⊊ V_1 ⊊ … ⊊ U_k ⊊ V_k` and
/// thin it into a sandwich-ready tower pair: verify the +2 radius spacing
/// and the measure-versus-radius ratio bound, skip the first
/// `k' = max(ceil(s_1), ceil(k/2))` pairs, and keep every D-th of the rest.
///
/// A pair with `|V_i| / |U_i| <= 1 + delta` is rejected: such a `U_i` is
/// itself a delta-fill of `V_i`.
pub fn upcrossing_radius_spacing(
    chain: &[(Ball, Ball)],
    q: u32,
    delta: f64,
    s_one: f64,
    space: &dyn BallSpace,
) -> Result<SpacingOutcome, UpcrossingError> {
    if chain.is_empty() {
        return Err(UpcrossingError::ChainViolation("empty chain".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(UpcrossingError::InvalidQuery(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let center = &chain[0].0.center;
    for (u, v) in chain {
        if &u.center != center || &v.center != center {
            return Err(UpcrossingError::ChainViolation(
                "chain balls must share one center".into(),
            ));
        }
    }
    // Strictly increasing cardinalities along U_1, V_1, U_2, V_2, …
    let mut measures = Vec::with_capacity(2 * chain.len());
    for (u, v) in chain {
        measures.push(space.measure(u)?);
        measures.push(space.measure(v)?);
    }
    for w in measures.windows(2) {
        if w[0] >= w[1] {
            return Err(UpcrossingError::ChainViolation(
                "ball cardinalities must strictly increase along the chain".into(),
            ));
        }
    }
    // Radius spacing: +2 per upcrossing step in both ladders.
    for i in 1..chain.len() {
        let du = chain[i].0.radius.floor() - chain[i - 1].0.radius.floor();
        let dv = chain[i].1.radius.floor() - chain[i - 1].1.radius.floor();
        if du < 2.0 || dv < 2.0 {
            return Err(UpcrossingError::ChainViolation(format!(
                "radius spacing below +2 between pairs {i} and {}",
                i + 1
            )));
        }
    }
    // Measure ratio above 1 + delta on every pair, and the forced radius
    // ratio once both radii clear s_1.
    let one_plus = crate::covering::space::rational_from_f64(1.0 + delta)
        .map_err(UpcrossingError::Covering)?;
    for (i, (u, v)) in chain.iter().enumerate() {
        let mu = space.measure(u)?;
        let mv = space.measure(v)?;
        let lhs = num_rational::BigRational::from_integer(mv.clone().into());
        let rhs = &one_plus * num_rational::BigRational::from_integer(mu.clone().into());
        if lhs <= rhs {
            return Err(UpcrossingError::RatioViolation {
                level: i + 1,
                ratio: crate::covering::biguint_ratio(&mv, &mu),
                required: 1.0 + delta,
            });
        }
        if u.radius >= s_one && v.radius >= s_one {
            let bound = radius_ratio_bound(delta, q)?;
            let ratio = v.radius / u.radius;
            if ratio <= bound * (1.0 - 1e-12) {
                return Err(UpcrossingError::ChainViolation(format!(
                    "radius ratio {ratio} at pair {} below the forced bound {bound}",
                    i + 1
                )));
            }
        }
    }

    let k = chain.len() as u32;
    let k_prime = (s_one.ceil() as u32).max(k.div_ceil(2));
    let d = CoveringConstants::new(q).d_spacing(delta)?;
    let height = k.saturating_sub(k_prime) / d;
    let towers = if height >= 1 {
        let mut u_radii = Vec::with_capacity(height as usize);
        let mut v_radii = Vec::with_capacity(height as usize);
        for t in 0..height {
            let idx = (k_prime + d * t) as usize; // k' + D(t-1) + 1, 1-based
            u_radii.push(chain[idx].0.radius);
            v_radii.push(chain[idx].1.radius);
        }
        let u = Tower::centered(vec![center.clone()], vec![u_radii])
            .map_err(UpcrossingError::Covering)?;
        let v = Tower::centered(vec![center.clone()], vec![v_radii])
            .map_err(UpcrossingError::Covering)?;
        Some((u, v))
    } else {
        None
    };
    Ok(SpacingOutcome {
        k_prime,
        d,
        height,
        towers,
    })
}
