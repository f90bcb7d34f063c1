//! Declarative experiment configuration: TOML in, a validated
//! [`ExperimentConfig`] out. Validation reports every violation with the
//! path to the offending key, not just the first.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;

use upcross_core::cayley::{CayleyError, Element, GroupModel};
use upcross_core::processes::{Distribution, ProcessKind};
use upcross_core::upcrossings::UpcrossingQuery;

/// One validation finding, with the config path it concerns.
#[derive(Debug, Clone)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Syntax(String),

    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

/// Validated experiment parameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub group_kind: String,
    pub dimension: Option<usize>,
    pub generators: Option<Vec<Vec<i64>>>,
    pub degree_hint: Option<u32>,
    pub max_radius: u32,
    pub table_cache: Option<PathBuf>,
    pub process: ProcessKind,
    pub distribution: Distribution,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub l: u32,
    pub k_max: u32,
    pub n_max: Option<u32>,
    pub fill_radii: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    pub estimate_r: bool,
    pub transference_m: Option<u32>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Build the group model this config describes.
    pub fn build_model(&self) -> Result<GroupModel, CayleyError> {
        match self.group_kind.as_str() {
            "z-standard" => Ok(GroupModel::zd_standard(self.dimension.unwrap_or(1))),
            "z-box" => Ok(GroupModel::zd_box(self.dimension.unwrap_or(1))),
            "heisenberg" => Ok(GroupModel::heisenberg()),
            "z-custom" => {
                let gens = self
                    .generators
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .map(Element::new)
                    .collect();
                GroupModel::zd_custom(self.dimension.unwrap_or(1), gens, self.degree_hint)
            }
            other => Err(CayleyError::InvalidGenerators(format!(
                "unknown group kind {other}"
            ))),
        }
    }

    /// The upcrossing query these parameters describe, at threshold k = 1
    /// (tail rows cover k up to k_max).
    pub fn query(&self) -> UpcrossingQuery {
        UpcrossingQuery {
            alpha: self.alpha,
            beta: self.beta,
            k: 1,
            delta: self.delta,
            l: self.l,
            n_max: self.n_max.unwrap_or(2).max(2),
            fill_radii: self.fill_radii.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawConfig {
    group: RawGroup,
    process: RawProcess,
    distribution: RawDistribution,
    upcrossing: RawUpcrossing,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
struct RawGroup {
    kind: String,
    dimension: Option<usize>,
    generators: Option<Vec<Vec<i64>>>,
    degree_hint: Option<u32>,
    max_radius: u32,
    table_cache: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct RawProcess {
    kind: String,
}

#[derive(Debug, Deserialize)]
struct RawDistribution {
    kind: String,
    upper: Option<f64>,
    p: Option<f64>,
    colors: Option<u32>,
}

#[derive(Debug, Deserialize)]
struct RawUpcrossing {
    alpha: f64,
    beta: f64,
    delta: f64,
    l: u32,
    k_max: u32,
    n_max: Option<u32>,
    fill_radii: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct RawRun {
    trials: u64,
    master_seed: u64,
    estimate_r: Option<bool>,
    transference_m: Option<u32>,
    output_dir: PathBuf,
}

/// Known keys per config table; anything else is reported by path.
const KNOWN: &[(&str, &[&str])] = &[
    (
        "group",
        &[
            "kind",
            "dimension",
            "generators",
            "degree_hint",
            "max_radius",
            "table_cache",
        ],
    ),
    ("process", &["kind"]),
    ("distribution", &["kind", "upper", "p", "colors"]),
    (
        "upcrossing",
        &[
            "alpha",
            "beta",
            "delta",
            "l",
            "k_max",
            "n_max",
            "fill_radii",
        ],
    ),
    (
        "run",
        &[
            "trials",
            "master_seed",
            "estimate_r",
            "transference_m",
            "output_dir",
        ],
    ),
];

fn scan_unknown_keys(value: &toml::Value, violations: &mut Vec<Violation>) {
    let Some(root) = value.as_table() else {
        return;
    };
    for (section, entry) in root {
        match KNOWN.iter().find(|(name, _)| name == section) {
            None => violations.push(Violation {
                path: section.clone(),
                message: "unknown section".into(),
            }),
            Some((_, keys)) => {
                if let Some(table) = entry.as_table() {
                    for key in table.keys() {
                        if !keys.contains(&key.as_str()) {
                            violations.push(Violation {
                                path: format!("{section}.{key}"),
                                message: "unknown key".into(),
                            });
                        }
                    }
                }
            }
        }
    }
}

fn parse_process(raw: &RawProcess, violations: &mut Vec<Violation>) -> Option<ProcessKind> {
    match raw.kind.as_str() {
        "additive-average" => Some(ProcessKind::AdditiveAverage),
        "additive-sum" => Some(ProcessKind::AdditiveSum),
        "max-value" => Some(ProcessKind::MaxValue),
        "distinct-colors" => Some(ProcessKind::DistinctColors),
        "distinct-colors-normalized" => Some(ProcessKind::DistinctColorsNormalized),
        other => {
            violations.push(Violation {
                path: "process.kind".into(),
                message: format!(
                    "unknown process {other}; expected additive-average, additive-sum, \
                     max-value, distinct-colors, or distinct-colors-normalized"
                ),
            });
            None
        }
    }
}

fn parse_distribution(
    raw: &RawDistribution,
    violations: &mut Vec<Violation>,
) -> Option<Distribution> {
    let forbid = |field: Option<()>, name: &str, kind: &str, violations: &mut Vec<Violation>| {
        if field.is_some() {
            violations.push(Violation {
                path: format!("distribution.{name}"),
                message: format!("not a {kind} parameter"),
            });
        }
    };
    match raw.kind.as_str() {
        "uniform" => {
            forbid(raw.p.map(|_| ()), "p", "uniform", violations);
            forbid(raw.colors.map(|_| ()), "colors", "uniform", violations);
            let upper = raw.upper.unwrap_or(1.0);
            if !(upper > 0.0 && upper.is_finite()) {
                violations.push(Violation {
                    path: "distribution.upper".into(),
                    message: format!("must be positive and finite, got {upper}"),
                });
                return None;
            }
            Some(Distribution::Uniform { upper })
        }
        "bernoulli" => {
            forbid(raw.upper.map(|_| ()), "upper", "bernoulli", violations);
            forbid(raw.colors.map(|_| ()), "colors", "bernoulli", violations);
            let p = raw.p.unwrap_or(0.5);
            if !(0.0..=1.0).contains(&p) {
                violations.push(Violation {
                    path: "distribution.p".into(),
                    message: format!("must lie in [0, 1], got {p}"),
                });
                return None;
            }
            Some(Distribution::Bernoulli { p })
        }
        "colors" => {
            forbid(raw.upper.map(|_| ()), "upper", "colors", violations);
            forbid(raw.p.map(|_| ()), "p", "colors", violations);
            let colors = raw.colors.unwrap_or(8);
            if colors < 2 {
                violations.push(Violation {
                    path: "distribution.colors".into(),
                    message: format!("need at least 2 colors, got {colors}"),
                });
                return None;
            }
            Some(Distribution::Colors { colors })
        }
        other => {
            violations.push(Violation {
                path: "distribution.kind".into(),
                message: format!(
                    "unknown distribution {other}; expected uniform, bernoulli, or colors"
                ),
            });
            None
        }
    }
}

/// Parse and cross-validate a config, collecting every violation.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut violations = Vec::new();
    scan_unknown_keys(&value, &mut violations);

    let raw: RawConfig = match toml::from_str(text) {
        Ok(raw) => raw,
        Err(e) => {
            violations.push(Violation {
                path: "(config)".into(),
                message: e.to_string().trim().replace('\n', " "),
            });
            return Err(ConfigError::Invalid(violations));
        }
    };

    let process = parse_process(&raw.process, &mut violations);
    let distribution = parse_distribution(&raw.distribution, &mut violations);

    let g = &raw.group;
    match g.kind.as_str() {
        "z-standard" | "z-box" | "z-custom" => {
            match g.dimension {
                None => violations.push(Violation {
                    path: "group.dimension".into(),
                    message: format!("required for {}", g.kind),
                }),
                Some(0) => violations.push(Violation {
                    path: "group.dimension".into(),
                    message: "must be at least 1".into(),
                }),
                Some(d) if g.kind == "z-box" && d > 8 => violations.push(Violation {
                    path: "group.dimension".into(),
                    message: "box generating sets above dimension 8 are impractical".into(),
                }),
                _ => {}
            }
            if g.kind == "z-custom" {
                if g.degree_hint.is_none() {
                    violations.push(Violation {
                        path: "group.degree_hint".into(),
                        message: "required for z-custom: the growth degree cannot be derived"
                            .into(),
                    });
                }
                match &g.generators {
                    None => violations.push(Violation {
                        path: "group.generators".into(),
                        message: "required for z-custom".into(),
                    }),
                    Some(gens) => {
                        if let (Some(d), false) = (g.dimension, gens.is_empty()) {
                            let elements = gens.iter().cloned().map(Element::new).collect();
                            if let Err(e) = GroupModel::zd_custom(d, elements, None) {
                                violations.push(Violation {
                                    path: "group.generators".into(),
                                    message: e.to_string(),
                                });
                            }
                        }
                    }
                }
            } else {
                if g.generators.is_some() {
                    violations.push(Violation {
                        path: "group.generators".into(),
                        message: format!("only meaningful for z-custom, not {}", g.kind),
                    });
                }
                if g.degree_hint.is_some() {
                    violations.push(Violation {
                        path: "group.degree_hint".into(),
                        message: format!("only meaningful for z-custom, not {}", g.kind),
                    });
                }
            }
        }
        "heisenberg" => {
            if g.dimension.is_some() {
                violations.push(Violation {
                    path: "group.dimension".into(),
                    message: "heisenberg has no dimension parameter".into(),
                });
            }
        }
        other => violations.push(Violation {
            path: "group.kind".into(),
            message: format!(
                "unknown group kind {other}; expected z-standard, z-box, heisenberg, or z-custom"
            ),
        }),
    }
    if g.max_radius == 0 {
        violations.push(Violation {
            path: "group.max_radius".into(),
            message: "must be at least 1".into(),
        });
    }

    let u = &raw.upcrossing;
    if !(u.alpha < u.beta) {
        violations.push(Violation {
            path: "upcrossing.alpha".into(),
            message: format!("alpha = {} must be below beta = {}", u.alpha, u.beta),
        });
    }
    if !(u.delta > 0.0 && u.delta < 1.0) {
        violations.push(Violation {
            path: "upcrossing.delta".into(),
            message: format!("must lie in (0, 1), got {}", u.delta),
        });
    }
    if u.l < 1 {
        violations.push(Violation {
            path: "upcrossing.l".into(),
            message: "must be at least 1".into(),
        });
    }
    if u.k_max < 1 {
        violations.push(Violation {
            path: "upcrossing.k_max".into(),
            message: "must be at least 1".into(),
        });
    }
    if u.l > g.max_radius {
        violations.push(Violation {
            path: "upcrossing.l".into(),
            message: format!(
                "profile length {} exceeds the window budget max_radius = {}",
                u.l, g.max_radius
            ),
        });
    }
    let fill_radii = u
        .fill_radii
        .clone()
        .unwrap_or_else(|| (1..=5).map(|r| r as f64).collect());
    for &r in &fill_radii {
        if !(r.is_finite() && r >= 0.0) {
            violations.push(Violation {
                path: "upcrossing.fill_radii".into(),
                message: format!("radius {r} is not a nonnegative real"),
            });
        }
    }

    let r = &raw.run;
    if r.trials < 1 {
        violations.push(Violation {
            path: "run.trials".into(),
            message: "must be at least 1".into(),
        });
    }
    let estimate_r = r.estimate_r.unwrap_or(false);
    if estimate_r {
        match u.n_max {
            None => violations.push(Violation {
                path: "upcrossing.n_max".into(),
                message: "required when run.estimate_r is set".into(),
            }),
            Some(n_max) => {
                if n_max <= u.k_max {
                    violations.push(Violation {
                        path: "upcrossing.n_max".into(),
                        message: format!("must exceed k_max = {}", u.k_max),
                    });
                }
                if 2 * n_max > g.max_radius {
                    violations.push(Violation {
                        path: "upcrossing.n_max".into(),
                        message: format!(
                            "fill candidates need 2 * n_max = {} within max_radius = {}",
                            2 * n_max,
                            g.max_radius
                        ),
                    });
                }
                if fill_radii.is_empty() {
                    violations.push(Violation {
                        path: "upcrossing.fill_radii".into(),
                        message: "must be nonempty when run.estimate_r is set".into(),
                    });
                }
            }
        }
    }
    if let Some(m) = r.transference_m {
        // Density scans always run both detectors, so the per-center reach
        // is the larger of the Q profile and the R fill span.
        let n_eff = u.n_max.unwrap_or(2).max(2);
        let reach = u.l.max(2 * n_eff);
        if m + reach > g.max_radius {
            violations.push(Violation {
                path: "run.transference_m".into(),
                message: format!(
                    "window budget exceeded: m = {m} plus the per-center reach {reach} is above max_radius = {}",
                    g.max_radius
                ),
            });
        }
    }
    if let (Some(p), Some(d)) = (process, &distribution) {
        let color_process = matches!(
            p,
            ProcessKind::DistinctColors | ProcessKind::DistinctColorsNormalized
        );
        let color_dist = matches!(d, Distribution::Colors { .. });
        if color_process != color_dist {
            violations.push(Violation {
                path: "process.kind".into(),
                message:
                    "distinct-colors processes pair with the colors distribution and vice versa"
                        .into(),
            });
        }
    }

    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations));
    }
    Ok(ExperimentConfig {
        group_kind: raw.group.kind,
        dimension: raw.group.dimension,
        generators: raw.group.generators,
        degree_hint: raw.group.degree_hint,
        max_radius: raw.group.max_radius,
        table_cache: raw.group.table_cache,
        process: process.expect("validated"),
        distribution: distribution.expect("validated"),
        alpha: raw.upcrossing.alpha,
        beta: raw.upcrossing.beta,
        delta: raw.upcrossing.delta,
        l: raw.upcrossing.l,
        k_max: raw.upcrossing.k_max,
        n_max: raw.upcrossing.n_max,
        fill_radii,
        trials: raw.run.trials,
        master_seed: raw.run.master_seed,
        estimate_r,
        transference_m: raw.run.transference_m,
        output_dir: raw.run.output_dir,
    })
}
