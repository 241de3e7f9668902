use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
spreading_factors = [7]
payload_bytes = [2]
covariance_qs = [1.0, 0.99994]
snr_db = [-12.0, -6.0]
trials = 200
"#;

fn simulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("sweep.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out.csv");
    let result = simulate(&["--config", &config, "--out", out.to_str().unwrap(), "--progress"]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));

    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("spreading_factor,payload_bytes,covariance_q,snr_db,trials,frame_errors,fer,ci_low,ci_high,symbol_errors,symbols_total,master_seed\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("out.csv.meta.json").exists());

    let stderr = String::from_utf8_lossy(&result.stderr);
    assert_eq!(stderr.lines().filter(|l| l.starts_with('[')).count(), 4, "{stderr}");
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("o.csv");
    let args = [
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "37",
        "--seed",
        "5",
        "--workers",
        "2",
    ];
    assert!(simulate(&args).status.success());
    let csv = fs::read_to_string(&out).unwrap();
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').nth(4), Some("37"));
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["master_seed"], 5);
    assert_eq!(meta["workers"], 2);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(
        simulate(&["--config", &config, "--out", a.to_str().unwrap(), "--workers", "1"])
            .status
            .success()
    );
    assert!(
        simulate(&["--config", &config, "--out", b.to_str().unwrap(), "--workers", "3"])
            .status
            .success()
    );
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn invalid_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &CONFIG.replace("[7]", "[13]"));
    let out = dir.path().join("bad.csv");
    let result = simulate(&["--config", &config, "--out", out.to_str().unwrap()]);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("spreading_factors"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_and_missing_file_fail() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{CONFIG}\nsnr = 3\n"));
    let out = dir.path().join("x.csv");
    assert!(!simulate(&["--config", &config, "--out", out.to_str().unwrap()])
        .status
        .success());
    let missing = dir.path().join("nope.toml");
    assert!(
        !simulate(&["--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    assert!(!out.exists());
}

#[test]
fn zero_workers_or_trials_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("z.csv");
    let out = out.to_str().unwrap();
    assert!(!simulate(&["--config", &config, "--out", out, "--workers", "0"])
        .status
        .success());
    assert!(!simulate(&["--config", &config, "--out", out, "--trials", "0"])
        .status
        .success());
    assert!(!Path::new(out).exists());
}
