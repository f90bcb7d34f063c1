//! Geometry and probability on finitely generated groups of polynomial growth.
//!
//! The crate has four layers:
//!
//! * [`cayley`]: exact group arithmetic, breadth-first word-norm tables and
//!   ball enumeration for `Z^d` (two generating sets), the discrete Heisenberg
//!   group, and user-supplied generating sets.
//! * [`covering`]: the ball calculus (interiors, expansions, boundaries),
//!   greedy Vitali selection, towers, effective Vitali covering, delta-fill
//!   search, and the tower-sandwich dichotomy, all with exact counting.
//! * [`processes`]: seeded i.i.d. fields on group windows and the
//!   ball-indexed stationary/subadditive processes evaluated on them.
//! * [`upcrossings`]: upcrossing counting, Q/R event detection, transference
//!   density, and Monte Carlo tail estimation with exponential-decay fits.

pub mod cayley;
pub mod covering;
pub mod processes;
pub mod upcrossings;

/// Crate version embedded into reports and cache files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
