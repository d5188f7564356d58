//! Exit codes and the run → branches → resume round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn lumen(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lumen"));
    cmd.args(args).env_remove("LUMEN_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// The single-atom fixture with branching on and outputs next to it.
fn branching_config(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(fixture("atom_sp.toml")).unwrap().replace(
        "[output]",
        "[branching]\nenabled = true\n\n[output]\nrecord = \"run.ndjson\"\ncheckpoint_dir = \"cp\"",
    );
    let path = dir.join("atom.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn oracle_table_agrees() {
    let out = lumen(&["oracle", fixture("dimer_sink.toml").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("S[0,1]") && text.contains("E[1]") && text.contains("Rabi frequency"));
    assert!(text.contains(", 0 outside tolerance"), "{text}");
}

#[test]
fn run_branches_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = branching_config(dir.path());
    let out = lumen(&["run", cfg.to_str().unwrap()], &[("LUMEN_THREADS", "1")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("status complete"));

    let rec = dir.path().join("run.ndjson");
    let out = lumen(&["branches", rec.to_str().unwrap()], &[]);
    assert!(stdout(&out).contains("PulseEnd"));

    let out = lumen(&["analyze", rec.to_str().unwrap(), "populations", "norms"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("# populations"));

    let cp = dir.path().join("cp").join("event-0000.json");
    let resumed = dir.path().join("b1.ndjson");
    let out = lumen(
        &["resume", cp.to_str().unwrap(), "--branch", "1", "--record", resumed.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(resumed.exists());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\nfrobnicate = true\n").unwrap();
    assert_eq!(lumen(&["run", bad.to_str().unwrap()], &[]).status.code(), Some(2));
    assert_eq!(lumen(&["run", "/no/such/file.toml"], &[]).status.code(), Some(2));
    let good = fixture("atom_sp.toml");
    let out = lumen(&["oracle", good.to_str().unwrap()], &[("LUMEN_THREADS", "0")]);
    assert_eq!(out.status.code(), Some(2));
    let out = lumen(&["analyze", "/no/such/record", "populations"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("dimer_sink.toml"))
        .unwrap()
        .replace("z = -0.7 }", "z = -0.7, vz = 0.05 }")
        .replace("z = 0.7 }", "z = 0.7, vz = -0.05 }")
        .replace("dynamics = \"clamped\"", "dynamics = \"prescribed\"")
        .replace("[output]", "[output]\ncheckpoint_dir = \"cp\"");
    let path = dir.path().join("collide.toml");
    std::fs::write(&path, text).unwrap();
    let out = lumen(&["run", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("last-good.json"));
    assert!(dir.path().join("cp").join("last-good.json").exists());
}
