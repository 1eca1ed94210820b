use std::path::Path;
use std::process::{Command, Output};

fn uplift(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uplift"))
        .args(args)
        .args(["--out", dir.join("out").to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "seed = 4\n[data]\nn = 800\nd = 4\nnoise_scale = 1.0\n[forest]\nn_trees = 5\nmax_depth = 4\nmin_samples_leaf = 10\n";

#[test]
fn unknown_config_key_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[data]\nsize = 10\n");
    let out = uplift(dir.path(), &["--config", &cfg, "benchmark"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("size"), "{err}");
}

#[test]
fn missing_config_file_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = uplift(dir.path(), &["--config", "/nonexistent/cfg.toml", "gen-data"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_criteo_file_names_the_load_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[data]\nsource = \"criteo\"\npath = \"/nonexistent/criteo.csv\"\n");
    let out = uplift(dir.path(), &["--config", &cfg, "benchmark"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("benchmark failed at load"), "{err}");
}

#[test]
fn empty_method_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("methods = []\n{SMALL}"));
    let out = uplift(dir.path(), &["--config", &cfg, "benchmark"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("benchmark failed"));
}

#[test]
fn invalid_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "train_fraction = 1.5\n");
    let out = uplift(dir.path(), &["--config", &cfg, "benchmark"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("train_fraction"));
}

#[test]
fn gen_data_writes_dataset_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = uplift(dir.path(), &["--config", &cfg, "gen-data"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    let data = std::fs::read_to_string(o.join("dataset.csv")).unwrap();
    assert_eq!(data.lines().next(), Some("x0,x1,x2,x3,treatment,revenue,engagement"));
    assert_eq!(data.lines().count(), 801);
    let truth = std::fs::read_to_string(o.join("ground_truth.csv")).unwrap();
    assert!(truth.starts_with("tau_revenue,tau_engagement\n"));
    let resolved = std::fs::read_to_string(o.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 4"));
    assert!(o.join("VERSION").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = uplift(dir.path(), &["--config", &cfg, "--seed", "11", "gen-data"]);
    assert!(out.status.success());
    let resolved = std::fs::read_to_string(dir.path().join("out/resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 11"));
}

#[test]
fn allocate_writes_selection_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = uplift(dir.path(), &["--config", &cfg, "allocate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    let alloc = std::fs::read_to_string(o.join("allocation.csv")).unwrap();
    assert!(alloc.starts_with("user_index,score,selected,tau_r_hat,tau_e_hat\n"));
    assert!(o.join("allocate_summary.csv").exists());
    assert!(o.join("lambda_trace.csv").exists());
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let cfg = uplift_cli::ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
