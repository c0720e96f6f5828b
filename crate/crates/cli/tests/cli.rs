use std::path::Path;
use std::process::{Command, Output};

fn jetode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn nfe_grid_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = jetode(&["nfe-grid", "--max-degree", "3", "--outdir", path(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["grid.csv", "pattern.csv", "grid.svg", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let pattern = std::fs::read_to_string(dir.path().join("pattern.csv")).unwrap();
    assert_eq!(pattern.lines().count(), 4);
}

#[test]
fn json_format_replaces_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = jetode(&[
        "nfe-grid",
        "--max-degree",
        "2",
        "--solvers",
        "5",
        "--format",
        "json",
        "--outdir",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("grid.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v.is_array() || v.is_object());
    assert!(!dir.path().join("grid.csv").exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&jetode(&["no-such-command"])), 2);
    assert_eq!(code(&jetode(&["nfe-grid", "--solvers", "4"])), 2);
    assert_eq!(code(&jetode(&["fit-toy", "--lambda", "-1"])), 2);
    assert_eq!(code(&jetode(&["gradcheck", "--corrupt", "no_such_primitive"])), 2);
}

#[test]
fn corrupted_gradient_fails_gradcheck() {
    let dir = tempfile::tempdir().unwrap();
    let ok = jetode(&["gradcheck", "--orders", "1", "--outdir", path(&dir.path().join("ok"))]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = jetode(&[
        "gradcheck",
        "--orders",
        "1",
        "--corrupt",
        "tanh",
        "--outdir",
        path(&dir.path().join("bad")),
    ]);
    assert_eq!(code(&bad), 1);
    let report = std::fs::read_to_string(dir.path().join("bad/report.csv")).unwrap();
    assert!(report.contains("false"));
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    let o = jetode(&["nfe-grid", "--max-degree", "3", "--outdir", path(&src)]);
    assert_eq!(code(&o), 0);
    let manifest = src.join("manifest.json");

    let same = jetode(&["replay", path(&manifest), "--outdir", path(&dir.path().join("r1"))]);
    assert_eq!(code(&same), 0, "{}", String::from_utf8_lossy(&same.stdout));
    let table = std::fs::read_to_string(dir.path().join("r1/replay.csv")).unwrap();
    assert!(!table.contains("false"));

    let grid = src.join("grid.csv");
    let mut text = std::fs::read_to_string(&grid).unwrap();
    text.push_str("tampered\n");
    std::fs::write(&grid, text).unwrap();
    let differs = jetode(&["replay", path(&manifest), "--outdir", path(&dir.path().join("r2"))]);
    assert_eq!(code(&differs), 1);
    let table = std::fs::read_to_string(dir.path().join("r2/replay.csv")).unwrap();
    assert!(table.contains("grid.csv,false"));
}

#[test]
fn replay_rejects_missing_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = jetode(&["replay", path(&dir.path().join("absent.json")), "--outdir", path(dir.path())]);
    assert_eq!(code(&o), 2);
}
