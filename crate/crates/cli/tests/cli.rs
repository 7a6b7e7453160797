//! End-to-end checks of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irs-ctp"))
}

const SMALL_CONFIG: &str = r#"
n = 4
ap_pos = [3.0, 0.0, 0.0]
irs_pos = [0.0, 50.0, 2.0]
user_pos = [2.0, 50.0, 0.0]
d0 = 1.0
l0_db = -30.0
gamma_ia = 2.2
gamma_ui = 2.2
gamma_ua = 3.6
alpha_ia = 0.0
alpha_ui = 0.01
alpha_ua = 0.01
tx_power_dbm = 26.0
noise_var_dbm = -80.0
tau = 10
tau1 = 2
t1 = 4
t2 = 2
"#;

#[test]
fn list_shows_scenarios() {
    let out = bin().args(["run", "--list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["fig6", "fig7", "fig11", "overhead", "custom"] {
        assert!(text.contains(name), "missing scenario {name} in: {text}");
    }
}

#[test]
fn unknown_scenario_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scenario", "not-a-scenario", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown scenario"), "stderr: {err}");
}

#[test]
fn overhead_scenario_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scenario", "overhead", "--trials", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("overhead.csv")).unwrap();
    assert!(csv.starts_with("scheme,pilot_slots"));
    assert!(csv.contains("ct,21600"));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("scenario = overhead"));
    assert!(manifest.contains("config_hash_0 = "));
}

#[test]
fn custom_run_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.toml");
    std::fs::write(&cfg_path, SMALL_CONFIG).unwrap();
    let out_dir = dir.path().join("results");
    let out = bin()
        .args(["run", "--scenario", "custom", "--trials", "3", "--seed", "9"])
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let nmse = std::fs::read_to_string(out_dir.join("nmse.csv")).unwrap();
    let mut lines = nmse.lines();
    assert_eq!(lines.next().unwrap(), "interval,mean,std,trials");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[3], "3");

    let report = bin().args(["report", "--dir"]).arg(&out_dir).output().unwrap();
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("nmse"), "report output: {text}");
}

#[test]
fn train_then_two_stage_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.toml");
    std::fs::write(&cfg_path, SMALL_CONFIG).unwrap();
    let hyper_path = dir.path().join("hyper.toml");
    std::fs::write(
        &hyper_path,
        format!(
            r#"
tau1 = 2
n = 4
epsilon = 1
k_layers = 1
l_in = 4
l_pred = 1
lr = 0.001
batch = 5
epochs = 2
trajectories = 4
intervals_per_trajectory = 10
corpus_seed = 11
config = "{}"
"#,
            cfg_path.display()
        ),
    )
    .unwrap();
    let ckpt = dir.path().join("model.json");
    let out = bin()
        .args(["train", "--hyper"])
        .arg(&hyper_path)
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ckpt.exists());
    assert!(dir.path().join("model.loss.csv").exists());

    let out_dir = dir.path().join("two_stage");
    let out = bin()
        .args(["run", "--scenario", "2sctp-special", "--trials", "2", "--out"])
        .arg(&out_dir)
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["nmse_2sctp.csv", "nmse_ct.csv", "obnmse.csv", "manifest.txt"] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
}

#[test]
fn two_stage_without_checkpoint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scenario", "2sctp-special", "--trials", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("checkpoint"), "stderr: {err}");
}
