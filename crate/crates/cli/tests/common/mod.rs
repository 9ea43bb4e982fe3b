//! Process-level helpers shared by the CLI test binaries.

use std::path::PathBuf;
use std::process::Command;

pub const BIN: &str = env!("CARGO_BIN_EXE_perfsim");

pub struct CmdResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str]) -> CmdResult {
    let out = Command::new(BIN)
        .args(args)
        .output()
        .unwrap_or_else(|e| panic!("spawning {BIN} {args:?}: {e}"));
    CmdResult {
        code: out.status.code().expect("process exited without a code"),
        stdout: String::from_utf8(out.stdout).expect("stdout is utf-8"),
        stderr: String::from_utf8(out.stderr).expect("stderr is utf-8"),
    }
}

/// Run a command whose payload is a JSON report; panics on exit code 2.
pub fn run_json(args: &[&str]) -> (i32, serde_json::Value) {
    let res = run(args);
    assert_ne!(
        res.code, 2,
        "usage failure for {args:?}: {}",
        res.stderr.trim()
    );
    let value = serde_json::from_str(&res.stdout)
        .unwrap_or_else(|e| panic!("bad JSON from {args:?}: {e}\n{}", res.stdout));
    (res.code, value)
}

/// Write a scratch file under the system temp dir, uniquely named per test.
pub fn scratch_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("perfsim-test-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).expect("writing scratch file");
    path
}

pub fn triangle_target() -> PathBuf {
    scratch_file(
        "target.json",
        r#"{"domain": ["a", "b", "c"], "weights": [1.0, 2.0, 3.0]}"#,
    )
}

pub fn triangle_envelope() -> PathBuf {
    scratch_file(
        "envelope.json",
        r#"{"domain": ["a", "b", "c"], "weights": [2.0, 2.0, 4.0]}"#,
    )
}
