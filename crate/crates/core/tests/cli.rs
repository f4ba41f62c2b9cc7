use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ssac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssac"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("grid.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_GRID: &str = r#"
oracles = ["local", "global"]
c_dist = [0.7, 1.0]
eta = [2.0, 5.0]
repetitions = 3
seed = 11

[data.synthetic]
n = 120
k = 3
"#;

#[test]
fn run_writes_csvs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out_a = ssac(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert!(
        out_a.status.success(),
        "{}",
        String::from_utf8_lossy(&out_a.stderr)
    );
    let out_b = ssac(&[
        "run",
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--parallel",
        "2",
    ]);
    assert!(out_b.status.success());

    let runs = fs::read_to_string(a.join("runs.csv")).unwrap();
    let header = runs.lines().next().unwrap();
    assert!(header.starts_with("variant,oracle,c_dist,eta,beta,seed,accuracy,failed"));
    // 2 variants x 2 oracles x 2 c_dist x 2 eta x 3 reps
    assert_eq!(runs.lines().count(), 1 + 48);
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 16);
    assert_eq!(runs, fs::read_to_string(b.join("runs.csv")).unwrap());
    assert_eq!(summary, fs::read_to_string(b.join("summary.csv")).unwrap());
    assert!(stdout(&out_a).contains("accuracy"));
}

#[test]
fn reps_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let out = dir.path().join("o");
    let o = ssac(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--reps",
        "1",
    ]);
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(out.join("runs.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 16
    );
}

#[test]
fn check_reports_margin_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let o = ssac(&["check", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("points: 120  clusters: 3"));
    assert!(text.contains("realized gamma:"));
    assert_eq!(text.matches("c_dist=").count(), 4);
    assert_eq!(text.matches("min d/r").count(), 12);
}

#[test]
fn check_rejects_out_of_range_epsilon() {
    let o = ssac(&["check", "--epsilon", "5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn fixture_round_trips_through_an_embedding_config() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("fixture.csv");
    let o = ssac(&["fixture", "--seed", "3", "--out", fixture.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("wrote 30 points"));

    let cfg = write_config(
        dir.path(),
        &format!(
            "oracles = [\"perfect\"]\nc_dist = [1.0]\neta = [30.0]\nvariants = [\"improved\"]\nrepetitions = 2\n\n[data.embedding]\npath = {:?}\nlabels = [0, 1, 2]\n",
            fixture.to_str().unwrap()
        ),
    );
    let out = dir.path().join("o");
    let o = ssac(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let o = ssac(&["run", "--reps", "1", "--out", target.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eta = [0.0]\n");
    let o = ssac(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    let cfg = write_config(dir.path(), "unknown_key = 1\n");
    assert!(!ssac(&["run", "--config", &cfg]).status.success());
}
