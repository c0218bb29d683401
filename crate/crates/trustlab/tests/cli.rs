//! End-to-end checks of the binary: subcommands, emitted files, exit codes
//! and the manifest round trip.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trustlab"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn analytics_emits_gain_tables() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["analytics", "--experiment", "1", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let table = read(&dir.path().join("analytics.csv"));
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,advisor,ig_mean_abs,ig_e_mean,ig_e_sum,type2_auroc,type2_auroc_nominal,auc_ig_e"
    );
    let acc_cal = lines.next().unwrap();
    assert!(acc_cal.starts_with("1,acc_cal,0.2917"), "{acc_cal}");
    assert!(acc_cal.contains(",0.8125,0.72,"), "{acc_cal}");
    assert_eq!(table.lines().count(), 5);
    let events = read(&dir.path().join("analytics_events.csv"));
    assert_eq!(events.lines().count(), 17); // header + 4 advisors × 4 events
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn exp1_run_is_reproducible_and_complete() {
    let run_once = |dir: &Path| {
        let status = bin()
            .args(["exp1", "--seed", "42", "--feedback", "--sessions", "2", "--out"])
            .arg(dir)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_once(a.path());
    run_once(b.path());
    for name in ["trials.csv", "summary.csv", "estimators.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name} not byte-identical"
        );
    }
    let trials = read(&a.path().join("trials.csv"));
    let mut lines = trials.lines();
    assert_eq!(
        lines.next().unwrap(),
        "session,trial,advisor,truth,pre_side,pre_step,agrees,advisor_confident,\
         post_side,post_step,feedback,theta_acc,theta_cons,theta_conf"
    );
    assert_eq!(trials.lines().count(), 1 + 2 * 400);
    // feedback column set, advisor confidence present in experiment 1
    let row = lines.next().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields.len(), 14);
    assert_eq!(fields[10], "1");
    assert!(fields[7] == "0" || fields[7] == "1");
}

#[test]
fn manifest_reruns_identically() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["exp2", "--seed", "9", "--sessions", "1", "--out"])
        .arg(first.path())
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = first.path().join("manifest.toml");
    let status = bin()
        .args(["exp2", "--config"])
        .arg(&manifest)
        .arg("--out")
        .arg(second.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read(first.path().join("trials.csv")).unwrap(),
        std::fs::read(second.path().join("trials.csv")).unwrap()
    );
}

#[test]
fn seed_falls_back_to_environment() {
    let with_env = tempfile::tempdir().unwrap();
    let with_flag = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["exp1", "--sessions", "1", "--out"])
        .arg(with_env.path())
        .env("TRUSTLAB_SEED", "1234")
        .status()
        .unwrap();
    assert!(status.success());
    let status = bin()
        .args(["exp1", "--seed", "1234", "--sessions", "1", "--out"])
        .arg(with_flag.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read(with_env.path().join("trials.csv")).unwrap(),
        std::fs::read(with_flag.path().join("trials.csv")).unwrap()
    );
}

#[test]
fn abm_and_sweep_emit_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "abm",
            "--seed",
            "3",
            "--p-feedback",
            "1.0",
            "--n-agents",
            "20",
            "--iterations",
            "400",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let series = read(&dir.path().join("abm_timeseries.csv"));
    assert_eq!(series.lines().count(), 401);
    let last = series.lines().last().unwrap();
    let clustering: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!(
        (clustering - 0.5).abs() <= 0.05,
        "full-feedback clustering ended at {clustering}"
    );
    assert!(dir.path().join("abm_agents.csv").exists());
    assert!(dir.path().join("abm_trust.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "sweep",
            "--seed",
            "3",
            "--p-feedbacks",
            "0,1",
            "--replications",
            "2",
            "--iterations",
            "150",
            "--emit-timeseries",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read(&dir.path().join("sweep.csv"));
    assert_eq!(rows.lines().count(), 1 + 4); // 2 cells × 2 replications
    assert_eq!(read(&dir.path().join("sweep_cells.csv")).lines().count(), 3);
    assert!(dir.path().join("timeseries_cell0.csv").exists());
    assert!(dir.path().join("timeseries_cell1.csv").exists());
}

#[test]
fn custom_advisor_roster_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    std::fs::write(
        &config_path,
        r#"
            command = "exp2"
            sessions = 1
            advisors = [
                "hiacc_hiagr",
                { name = "oracle", p_agree_given_correct = 1.0, p_agree_given_incorrect = 0.0 },
            ]
        "#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["exp2", "--seed", "5", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let trials = read(&out.join("trials.csv"));
    assert!(trials.contains(",oracle,"), "custom advisor missing from trials");
    // the oracle advisor agrees exactly when the judge is correct, so the
    // binary Accuracy estimator pins its final θ at the agreement rate 1-for-1
    let summary = read(&out.join("summary.csv"));
    let oracle_row = summary
        .lines()
        .find(|l| l.contains(",oracle,"))
        .unwrap()
        .to_string();
    let theta_acc: f64 = oracle_row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((theta_acc - 1.0).abs() < 1e-12, "{oracle_row}");
}

#[test]
fn exit_codes() {
    // 2: unparsable flags
    let status = bin().args(["exp1", "--no-such-flag"]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // 2: unreadable config
    let status = bin()
        .args(["exp1", "--config", "/nonexistent/config.toml"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // 3: invariant violation (exp3 demands the 50-step scale)
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["exp3", "--scale-steps", "5", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    // 3: p_feedback outside [0, 1]
    let status = bin()
        .args(["abm", "--p-feedback", "1.2", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    // --check reports without running
    let output = bin()
        .args(["abm", "--p-feedback", "1.2", "--check", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stdout).contains("p_feedback"));
    assert!(!dir.path().join("manifest.toml").exists());

    // 4: unwritable output directory
    let status = bin()
        .args(["analytics", "--out", "/proc/forbidden/out"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}
