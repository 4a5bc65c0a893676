#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the binary in `dir` with a clean format environment.
pub fn restake(dir: &Path, args: &[&str]) -> Run {
    restake_env(dir, args, None)
}

pub fn restake_env(dir: &Path, args: &[&str], format: Option<&str>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_restake"));
    cmd.current_dir(dir).args(args).env_remove("RESTAKE_FORMAT");
    if let Some(f) = format {
        cmd.env("RESTAKE_FORMAT", f);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// A fresh directory holding every named scenario as `NAME.json` and the
/// cascade script as `script.json`.
pub fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in ["fig1", "fig2", "fig3", "overlap-appb", "union-appa", "random"] {
        let r = restake(dir.path(), &["scenario", name, "--out", &format!("{name}.json"), "--quiet"]);
        assert_eq!(r.code, 0, "{name}: {}", r.stderr);
    }
    std::fs::write(dir.path().join("script.json"), SCRIPT).unwrap();
    dir
}

/// The four-step cascade after the first top-row operator is lost.
pub const SCRIPT: &str = r#"{
  "seed_loss": [0],
  "attacks": [
    {"A": [2], "B": [6, 7]},
    {"A": [1], "B": [8, 9, 10, 11]},
    {"A": [4], "B": [3]},
    {"A": [0], "B": [1, 2, 4, 5]}
  ]
}
"#;

pub fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("not json ({e}):\n{s}"))
}
