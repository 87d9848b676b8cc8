use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_phonon-scatter"));
    c.env_remove("PHONON_SCATTER_THREADS");
    c
}

fn run(dir: &Path, command: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{command}.json"));
    fs::write(&cfg, config).unwrap();
    bin()
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

const SMALL_PRODUCTION: &str = r#"{
    "experiment": "production",
    "n": 256,
    "ensemble": {"paths": 6, "seed": 4},
    "production": {"bins": 4, "wigner_rows": 2}
}"#;

#[test]
fn coefficients_pass_and_write_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), "coefficients", r#"{"experiment": "coefficients"}"#, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let m = manifest(d.path());
    let names: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    for f in ["coefficients.csv", "plot.gp", "report.json"] {
        assert!(names.contains(&f), "{names:?}");
        assert!(d.path().join("out").join(f).exists());
    }
    let csv = fs::read_to_string(d.path().join("out/coefficients.csv")).unwrap();
    assert!(csv.starts_with("k,re_nu,im_nu,absorb,p_plus,p_minus,identity_residual\n"));
}

#[test]
fn free_chain_reflects_nothing() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), "coefficients", r#"{"experiment": "coefficients", "presets": ["free"]}"#, &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(d.path().join("out/coefficients.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let p_plus: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(p_plus, 1.0);
    }
}

#[test]
fn config_rejections_exit_2_and_name_the_key() {
    let d = tempfile::tempdir().unwrap();
    let cases = [
        ("coefficients", r#"{"delta_excl": 0.3}"#, "delta_excl"),
        ("scattering", r#"{"temperature": 1.0}"#, "temperature"),
        ("equilibrium", r#"{"temperature": 0.0}"#, "temperature"),
        ("production", r#"{"experiment": "scattering"}"#, "experiment"),
        ("production", r#"{"n": 300}"#, "n"),
        ("production", "not json", "<file>"),
    ];
    for (cmd, cfg, key) in cases {
        let out = run(d.path(), cmd, cfg, &[]);
        assert_eq!(out.status.code(), Some(2), "{cmd} {cfg}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(&format!("`{key}`")), "{err}");
    }
}

#[test]
fn invalid_run_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment": "scattering", "n_sweep": [1024], "dt": 0.05, "t_macro": 0.1}"#;
    let out = run(d.path(), "scattering", cfg, &[]);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/report.json")).unwrap()).unwrap();
    assert!(report["invalid_run"].as_str().unwrap().contains("cleared the interface"));
    assert_eq!(manifest(d.path())["exit_code"], 3);
}

#[test]
fn failing_check_exits_1() {
    let d = tempfile::tempdir().unwrap();
    let cfg = SMALL_PRODUCTION.replace(r#""bins": 4"#, r#""bins": 4, "tolerance": 1e-9"#);
    let out = run(d.path(), "production", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
}

#[test]
fn zero_temperature_production_passes_with_zero_plateaus() {
    let d = tempfile::tempdir().unwrap();
    let cfg = SMALL_PRODUCTION.replace(r#""n": 256"#, r#""n": 256, "temperature": 0.0"#);
    let out = run(d.path(), "production", &cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn outputs_are_byte_identical_across_reruns_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path(), "production", SMALL_PRODUCTION, &["--threads", "1"]);
    run(b.path(), "production", SMALL_PRODUCTION, &["--threads", "3"]);
    for f in ["production.csv", "wigner.csv", "plot.gp"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
    assert_eq!(manifest(a.path())["threads"], 1);
    assert_eq!(manifest(b.path())["threads"], 3);
}

#[test]
fn seed_flag_changes_the_ensemble() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path(), "production", SMALL_PRODUCTION, &[]);
    run(b.path(), "production", SMALL_PRODUCTION, &["--seed", "99"]);
    assert_eq!(manifest(b.path())["seed"], 99);
    let x = fs::read(a.path().join("out/production.csv")).unwrap();
    let y = fs::read(b.path().join("out/production.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn thread_precedence_flag_then_env_then_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, r#"{"experiment": "coefficients", "threads": 2}"#).unwrap();
    let threads = |env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.args(["coefficients", "--config"]).arg(&cfg).arg("--out").arg(d.path().join("out"));
        if let Some(e) = env {
            c.env("PHONON_SCATTER_THREADS", e);
        }
        if let Some(f) = flag {
            c.args(["--threads", f]);
        }
        let out = c.output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        manifest(d.path())["threads"].as_u64().unwrap()
    };
    assert_eq!(threads(None, None), 2);
    assert_eq!(threads(Some("3"), None), 3);
    assert_eq!(threads(Some("3"), Some("1")), 1);

    let mut c = bin();
    let out = c
        .args(["coefficients", "--config"])
        .arg(&cfg)
        .env("PHONON_SCATTER_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn file_presets_merge_before_the_config_keys() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("hot.json"), r#"{"gamma": 2.0, "k_grid": 128}"#).unwrap();
    let out = run(
        d.path(),
        "coefficients",
        r#"{"experiment": "coefficients", "presets": ["hot.json"], "k_grid": 256}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["gamma"], 2.0);
    assert_eq!(report["config"]["k_grid"], 256);
}
