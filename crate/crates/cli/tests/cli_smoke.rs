//! End-to-end checks of the `upcross` binary: exit codes, validation
//! messages, and the run/thresholds/growth verbs.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_upcross"))
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in [
        "z1-smoke.toml",
        "z2-decay.toml",
        "z2-inequality.toml",
        "kingman-z1.toml",
    ] {
        let out = bin()
            .arg("validate")
            .arg(configs_dir().join(name))
            .output()
            .unwrap();
        assert!(out.status.success(), "{name}: {:?}", out);
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
    }
}

#[test]
fn validate_rejects_bad_config_with_all_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        r#"
[group]
kind = "z-standard"
dimension = 1
max_radius = 10

[process]
kind = "additive-average"

[distribution]
kind = "bernoulli"
banana = 1

[upcrossing]
alpha = 0.9
beta = 0.2
delta = 0.5
l = 3
k_max = 2

[run]
trials = 0
master_seed = 1
output_dir = "out"
"#,
    )
    .unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("distribution.banana"), "{stderr}");
    assert!(stderr.contains("upcrossing.alpha"), "{stderr}");
    assert!(stderr.contains("run.trials"), "{stderr}");
}

#[test]
fn run_writes_bundle_and_respects_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bundle");
    let out = bin()
        .arg("run")
        .arg(configs_dir().join("z1-smoke.toml"))
        .arg("--trials")
        .arg("300")
        .arg("--out")
        .arg(&out_dir)
        .env("UPCROSS_MASTER_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    for file in [
        "tail.csv",
        "report.json",
        "thresholds.json",
        "audit.json",
        "config.toml",
    ] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    let csv = std::fs::read_to_string(out_dir.join("tail.csv")).unwrap();
    assert!(csv.starts_with("k,trials,hits,p_hat,ci_low,ci_high\n"));
    assert!(csv.lines().nth(1).unwrap().starts_with("1,300,"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["master_seed"], 99);
    assert_eq!(report["trials"], 300);
    // No-fit runs record the caveat.
    assert!(!report["caveats"].as_array().unwrap().is_empty());
}

#[test]
fn validation_failure_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        std::fs::read_to_string(configs_dir().join("z1-smoke.toml"))
            .unwrap()
            .replace("trials = 2000", "trials = 0"),
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg(&bad)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(
        !out_dir.exists(),
        "outputs written despite validation failure"
    );
}

#[test]
fn table_cache_is_written_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("norms.bin");
    let config = std::fs::read_to_string(configs_dir().join("z1-smoke.toml"))
        .unwrap()
        .replace(
            "max_radius = 24",
            &format!("max_radius = 24\ntable_cache = \"{}\"", cache.display()),
        )
        .replace("trials = 2000", "trials = 50");
    let path = dir.path().join("cached.toml");
    std::fs::write(&path, &config).unwrap();

    let run = |tag: &str| {
        let out = bin()
            .arg("run")
            .arg(&path)
            .arg("--out")
            .arg(dir.path().join(tag))
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        std::fs::read(dir.path().join(tag).join("tail.csv")).unwrap()
    };
    let first = run("first");
    assert!(cache.exists(), "cache file not written");
    let mtime = std::fs::metadata(&cache).unwrap().modified().unwrap();
    let second = run("second");
    assert_eq!(first, second, "cached table changed the results");
    assert_eq!(
        mtime,
        std::fs::metadata(&cache).unwrap().modified().unwrap(),
        "cache was rebuilt instead of reused"
    );
}

#[test]
fn thresholds_and_growth_verbs() {
    let out = bin()
        .arg("thresholds")
        .arg(configs_dir().join("z1-smoke.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("thresholds prints JSON");
    assert_eq!(json["s_prime"], 1);
    assert_eq!(json["s_star"], 1);

    let out = bin()
        .arg("growth")
        .arg(configs_dir().join("z1-smoke.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("degree_hat="));
    assert!(text.contains("pansu_hat="));
}
