use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tvf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvf"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn tvf")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn repeated_rollouts_write_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        ok(&tvf(
            &["rollout", "--task", "tower", "--method", "tvf-small", "--seed", "7", "--out", out],
            dir.path(),
        ));
    }
    let a = fs::read(dir.path().join("a/logs/tower_seed7.jsonl")).unwrap();
    let b = fs::read(dir.path().join("b/logs/tower_seed7.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert!(dir.path().join("a/images/tower_seed7/goal_rgb.png").exists());
}

#[test]
fn no_images_flag_skips_dumps() {
    let dir = tempfile::tempdir().unwrap();
    ok(&tvf(&["rollout", "--task", "row", "--method", "oracle", "--no-images", "--out", "r"], dir.path()));
    assert!(dir.path().join("r/logs/row_seed0.jsonl").exists());
    assert!(!dir.path().join("r/images").exists());
}

#[test]
fn demos_then_foresight_eval() {
    let dir = tempfile::tempdir().unwrap();
    ok(&tvf(&["demos", "--task", "row", "--count", "10", "--out", "d"], dir.path()));
    let episodes = fs::read_dir(dir.path().join("d")).unwrap().count();
    assert_eq!(episodes, 10);
    let out = tvf(&["foresight-eval", "--demos", "d"], dir.path());
    ok(&out);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("| all |") && l.ends_with("| 100.0 |")), "{table}");
}

#[test]
fn shipped_smoke_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.json");
    let start = std::time::Instant::now();
    ok(&tvf(&["bench", "--config", config.to_str().unwrap(), "--out", "bench"], dir.path()));
    assert!(start.elapsed().as_secs() < 60);
    assert!(dir.path().join("bench/report.md").exists());
    assert!(dir.path().join("bench/report.json").exists());
}

#[test]
fn equivariance_csv_and_qmaps() {
    let dir = tempfile::tempdir().unwrap();
    ok(&tvf(&["equivariance", "--samples", "4", "--out", "eq.csv"], dir.path()));
    let csv = fs::read_to_string(dir.path().join("eq.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("seed,kind,g_x,g_y,g_theta,residual"));
    ok(&tvf(&["viz-qmaps", "--task", "tower", "--seed", "1", "--out", "q"], dir.path()));
    assert!(dir.path().join("q/tower_seed1_qplace.png").exists());
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["rollout", "--task", "nope"][..],
        &["rollout", "--task", "tower", "--method", "greedy", "--k", "2"],
        &["bench", "--config", "missing.json"],
    ] {
        let out = tvf(args, dir.path());
        assert!(!out.status.success());
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "));
    }
}
