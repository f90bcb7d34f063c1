//! Experiment orchestration: build the model and norm table, run the tail
//! estimates, fit the decay, check the main inequality, and write the
//! report bundle.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use upcross_core::cayley::{CayleyError, GroupModel, NormTable};
use upcross_core::covering::{compute_thresholds, CoveringConstants, ThresholdTable};
use upcross_core::processes::{derive_seed, Distribution, Field, ProcessError, ProcessKind};
use upcross_core::upcrossings::{
    tail_estimate, tail_estimate_with_r, transference_density, ExponentialFit, TailRow,
    UpcrossingError,
};

use crate::config::ExperimentConfig;
use crate::report::{sha256_hex, tail_csv, write_atomic};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Cayley(#[from] CayleyError),

    #[error(transparent)]
    Process(#[from] ProcessError),

    #[error(transparent)]
    Upcrossing(#[from] UpcrossingError),

    #[error("group has no declared growth degree; set a degree hint")]
    NoDegree,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One row of the main-inequality check: the Q tail against the fitted decay
/// term plus the R tail, with the Q side lowered and the R side raised by
/// their 95% intervals.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityRow {
    pub k: u32,
    pub q_p_hat: f64,
    pub q_ci_low: f64,
    pub decay_term: f64,
    pub r_p_hat: f64,
    pub r_ci_high: f64,
    pub rhs_high: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupInfo {
    pub kind: String,
    pub dimension: Option<usize>,
    pub max_radius: u32,
    pub growth_degree: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferenceInfo {
    pub m: u32,
    pub density: f64,
}

/// Everything report.json carries. Field order is the serialization order.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub group: GroupInfo,
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
    pub tail: Vec<TailRow>,
    pub fit: Option<ExponentialFit>,
    pub no_decay: Option<bool>,
    pub r_tail: Option<Vec<TailRow>>,
    pub main_inequality: Option<Vec<InequalityRow>>,
    pub transference: Option<TransferenceInfo>,
    pub constants: ConstantsInfo,
    pub thresholds: ThresholdTable,
    pub caveats: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsInfo {
    pub q: u32,
    pub c_const: f64,
    pub big_delta: f64,
    pub k_levels_at_quarter_delta: Option<u32>,
    pub d_spacing: Option<u32>,
}

/// thresholds.json wraps the table with the run identity, so every output
/// file carries the config hash and seed.
#[derive(Debug, Serialize)]
struct ThresholdsFile<'a> {
    config_hash: &'a str,
    master_seed: u64,
    thresholds: &'a ThresholdTable,
}

#[derive(Debug, Serialize)]
struct AuditBundle {
    version: String,
    config_hash: String,
    master_seed: u64,
    trials: u64,
    seed_rule: String,
    outputs: Vec<AuditOutput>,
}

#[derive(Debug, Serialize)]
struct AuditOutput {
    name: String,
    sha256: String,
}

#[derive(Debug)]
pub struct RunOutputs {
    pub out_dir: PathBuf,
    pub tail_csv: PathBuf,
    pub report_json: PathBuf,
    pub thresholds_json: PathBuf,
    pub audit_json: PathBuf,
    pub report: RunReport,
}

/// Build (or load from the configured cache) the norm table for a config.
pub fn build_table(config: &ExperimentConfig, model: &GroupModel) -> Result<NormTable, RunError> {
    if let Some(cache) = &config.table_cache {
        if cache.exists() {
            if let Ok(table) = NormTable::load_cache(cache, model, config.max_radius) {
                return Ok(table);
            }
            // Stale or mismatched cache: rebuild below and overwrite.
        }
        let table = NormTable::build(model, config.max_radius)?;
        table.save_cache(cache)?;
        return Ok(table);
    }
    Ok(NormTable::build(model, config.max_radius)?)
}

/// Run the full experiment and write `tail.csv`, `report.json`,
/// `thresholds.json`, `audit.json`, and a copy of the config into the
/// output directory. Nothing is written until every estimate has been
/// computed.
pub fn run_experiment(
    config: &ExperimentConfig,
    config_text: &str,
) -> Result<RunOutputs, RunError> {
    let model = config.build_model()?;
    let table = build_table(config, &model)?;
    let q = model.growth_degree().ok_or(RunError::NoDegree)?;
    let thresholds = compute_thresholds(&table, q, config.delta, config.delta);
    let query = config.query();

    let mut caveats = vec![
        "R-event detection uses an incomplete greedy fill search; a missing witness can only \
         understate the R tail"
            .to_string(),
    ];

    let (tail_table, r_rows) = if config.estimate_r {
        let qr = tail_estimate_with_r(
            &table,
            config.process,
            &config.distribution,
            &query,
            config.trials,
            config.k_max,
            config.master_seed,
        )?;
        (qr.q_tail, Some(qr.r_rows))
    } else {
        let t = tail_estimate(
            &table,
            config.process,
            &config.distribution,
            &query,
            config.trials,
            config.k_max,
            config.master_seed,
        )?;
        (t, None)
    };
    if tail_table.fit.is_none() {
        caveats.push("no exponential fit: fewer than two tail rows reached 5 hits".to_string());
    }

    let main_inequality = match (&tail_table.fit, &r_rows) {
        (Some(fit), Some(r_rows)) => Some(
            tail_table
                .rows
                .iter()
                .zip(r_rows)
                .map(|(qr, rr)| {
                    let decay_term = fit.c_hat * fit.rho_hat.powi(qr.k as i32);
                    let rhs_high = decay_term + rr.ci_high;
                    InequalityRow {
                        k: qr.k,
                        q_p_hat: qr.p_hat,
                        q_ci_low: qr.ci_low,
                        decay_term,
                        r_p_hat: rr.p_hat,
                        r_ci_high: rr.ci_high,
                        rhs_high,
                        holds: qr.ci_low <= rhs_high,
                    }
                })
                .collect(),
        ),
        _ => None,
    };

    let transference = match config.transference_m {
        Some(m) => {
            // A dedicated field one seed past the trial range.
            let field = Field::new(
                &model,
                table.max_radius(),
                config.distribution.clone(),
                derive_seed(config.master_seed, config.trials),
            )?;
            let density = transference_density(config.process, &field, m, &query, &table)?;
            Some(TransferenceInfo { m, density })
        }
        None => None,
    };

    let constants = CoveringConstants::new(q);
    let report = RunReport {
        version: upcross_core::VERSION.to_string(),
        config_hash: sha256_hex(config_text.as_bytes()),
        master_seed: config.master_seed,
        group: GroupInfo {
            kind: config.group_kind.clone(),
            dimension: config.dimension,
            max_radius: config.max_radius,
            growth_degree: q,
        },
        process: config.process,
        distribution: config.distribution.clone(),
        alpha: config.alpha,
        beta: config.beta,
        delta: config.delta,
        l: config.l,
        k_max: config.k_max,
        n_max: config.n_max,
        fill_radii: config.fill_radii.clone(),
        trials: config.trials,
        tail: tail_table.rows,
        no_decay: tail_table.fit.as_ref().map(|f| f.no_decay()),
        fit: tail_table.fit,
        r_tail: r_rows,
        main_inequality,
        transference,
        constants: ConstantsInfo {
            q,
            c_const: constants.c_const,
            big_delta: constants.big_delta,
            k_levels_at_quarter_delta: constants.k_levels(config.delta / 4.0).ok(),
            d_spacing: constants.d_spacing(config.delta).ok(),
        },
        thresholds,
        caveats,
    };

    // All estimates done; write the bundle.
    let out_dir = config.output_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let tail_path = out_dir.join("tail.csv");
    let report_path = out_dir.join("report.json");
    let thresholds_path = out_dir.join("thresholds.json");
    let audit_path = out_dir.join("audit.json");
    let config_copy = out_dir.join("config.toml");

    let csv = tail_csv(&report.tail);
    let report_bytes =
        serde_json::to_vec_pretty(&report).expect("report serialization cannot fail");
    let thresholds_bytes = serde_json::to_vec_pretty(&ThresholdsFile {
        config_hash: &report.config_hash,
        master_seed: config.master_seed,
        thresholds: &report.thresholds,
    })
    .expect("threshold serialization cannot fail");

    write_atomic(&tail_path, csv.as_bytes()).map_err(io_err(&tail_path))?;
    write_atomic(&report_path, &report_bytes).map_err(io_err(&report_path))?;
    write_atomic(&thresholds_path, &thresholds_bytes).map_err(io_err(&thresholds_path))?;
    write_atomic(&config_copy, config_text.as_bytes()).map_err(io_err(&config_copy))?;

    let audit = AuditBundle {
        version: upcross_core::VERSION.to_string(),
        config_hash: report.config_hash.clone(),
        master_seed: config.master_seed,
        trials: config.trials,
        seed_rule: "trial i uses seed mix64(master ^ mix64(i ^ 0x5851f42d4c957f2d)); \
                    the transference field, when enabled, uses trial index = trials"
            .to_string(),
        outputs: vec![
            AuditOutput {
                name: "tail.csv".into(),
                sha256: sha256_hex(csv.as_bytes()),
            },
            AuditOutput {
                name: "report.json".into(),
                sha256: sha256_hex(&report_bytes),
            },
            AuditOutput {
                name: "thresholds.json".into(),
                sha256: sha256_hex(&thresholds_bytes),
            },
            AuditOutput {
                name: "config.toml".into(),
                sha256: report.config_hash.clone(),
            },
        ],
    };
    let audit_bytes = serde_json::to_vec_pretty(&audit).expect("audit serialization cannot fail");
    write_atomic(&audit_path, &audit_bytes).map_err(io_err(&audit_path))?;

    Ok(RunOutputs {
        out_dir,
        tail_csv: tail_path,
        report_json: report_path,
        thresholds_json: thresholds_path,
        audit_json: audit_path,
        report,
    })
}
