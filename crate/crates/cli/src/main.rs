use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use upcross_cli::config::{validate_config, ConfigError, ExperimentConfig};
use upcross_cli::runner::{build_table, run_experiment};
use upcross_core::covering::compute_thresholds;

/// Upcrossing experiments on groups of polynomial growth.
#[derive(Parser)]
#[command(name = "upcross", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and cross-validate a config, reporting every violation.
    Validate { config: PathBuf },
    /// Run the experiment and write tail.csv, report.json, thresholds.json,
    /// and the audit bundle.
    Run {
        config: PathBuf,
        /// Override run.trials.
        #[arg(long)]
        trials: Option<u64>,
        /// Override upcrossing.k_max.
        #[arg(long = "k-max")]
        k_max: Option<u32>,
        /// Override run.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute and print the empirical radius thresholds for the config's
    /// group and window.
    Thresholds { config: PathBuf },
    /// Print the ball-growth table and the degree/volume-constant estimates.
    Growth { config: PathBuf },
}

/// `UPCROSS_MASTER_SEED` overrides the configured master seed.
const SEED_ENV: &str = "UPCROSS_MASTER_SEED";

fn load_config(path: &PathBuf) -> Result<(ExperimentConfig, String), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    match validate_config(&text) {
        Ok(cfg) => Ok((cfg, text)),
        Err(ConfigError::Syntax(msg)) => Err(format!("{}: {msg}", path.display())),
        Err(err @ ConfigError::Invalid(_)) => Err(format!("{}: {err}", path.display())),
    }
}

fn apply_seed_env(config: &mut ExperimentConfig) -> Result<(), String> {
    if let Ok(raw) = std::env::var(SEED_ENV) {
        let seed: u64 = raw
            .parse()
            .map_err(|_| format!("{SEED_ENV}={raw} is not a 64-bit unsigned integer"))?;
        config.master_seed = seed;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Validate { config } => {
            let (cfg, _) = load_config(&config)?;
            println!(
                "ok: {:?} on {}, {} trials, window radius {}",
                cfg.process, cfg.group_kind, cfg.trials, cfg.max_radius
            );
            Ok(())
        }
        Command::Run {
            config,
            trials,
            k_max,
            out,
        } => {
            let (mut cfg, text) = load_config(&config)?;
            apply_seed_env(&mut cfg)?;
            if let Some(t) = trials {
                if t < 1 {
                    return Err("--trials must be at least 1".into());
                }
                cfg.trials = t;
            }
            if let Some(k) = k_max {
                if k < 1 {
                    return Err("--k-max must be at least 1".into());
                }
                if let Some(n_max) = cfg.n_max {
                    if cfg.estimate_r && n_max <= k {
                        return Err(format!("--k-max {k} must stay below n_max {n_max}"));
                    }
                }
                cfg.k_max = k;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let outputs = run_experiment(&cfg, &text).map_err(|e| e.to_string())?;
            let report = &outputs.report;
            println!("wrote {}", outputs.out_dir.display());
            println!("k,p_hat,ci_low,ci_high");
            for row in &report.tail {
                println!("{},{},{},{}", row.k, row.p_hat, row.ci_low, row.ci_high);
            }
            match &report.fit {
                Some(fit) => println!(
                    "fit: c_hat={} rho_hat={} r2={}{}",
                    fit.c_hat,
                    fit.rho_hat,
                    fit.r2,
                    if fit.no_decay() { " (no decay)" } else { "" }
                ),
                None => println!("fit: unavailable (fewer than two rows with 5+ hits)"),
            }
            if let Some(rows) = &report.main_inequality {
                for row in rows {
                    println!(
                        "inequality k={}: q_low={} <= decay+r_high={} -> {}",
                        row.k, row.q_ci_low, row.rhs_high, row.holds
                    );
                }
            }
            if let Some(t) = &report.transference {
                println!("transference density at M={}: {}", t.m, t.density);
            }
            Ok(())
        }
        Command::Thresholds { config } => {
            let (cfg, _) = load_config(&config)?;
            let model = cfg.build_model().map_err(|e| e.to_string())?;
            let table = build_table(&cfg, &model).map_err(|e| e.to_string())?;
            let q = model
                .growth_degree()
                .ok_or_else(|| "group has no declared growth degree".to_string())?;
            let thresholds = compute_thresholds(&table, q, cfg.delta, cfg.delta);
            println!(
                "{}",
                serde_json::to_string_pretty(&thresholds).expect("threshold serialization")
            );
            Ok(())
        }
        Command::Growth { config } => {
            let (cfg, _) = load_config(&config)?;
            let model = cfg.build_model().map_err(|e| e.to_string())?;
            let table = build_table(&cfg, &model).map_err(|e| e.to_string())?;
            let q = model
                .growth_degree()
                .ok_or_else(|| "group has no declared growth degree".to_string())?;
            let estimate = table.estimate_growth(q).map_err(|e| e.to_string())?;
            println!("n,ball_size,ratio_to_n^{q}");
            for row in &estimate.per_n {
                println!("{},{},{}", row.radius, row.ball_size, row.ratio);
            }
            println!("degree_hat={}", estimate.degree_hat);
            println!("pansu_hat={}", estimate.pansu_hat);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
