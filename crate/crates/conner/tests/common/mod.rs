//! Helpers for tests that drive the `conner` binary.

#![allow(dead_code)]

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_conner");

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// A `conner serve-mock` child process, killed on drop.
pub struct MockProcess {
    child: Child,
    pub base_url: String,
}

impl MockProcess {
    pub fn spawn(corpus: &Path) -> Self {
        let mut child = Command::new(BIN)
            .args(["serve-mock", "--port", "0", "--corpus"])
            .arg(corpus)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn serve-mock");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base_url = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected serve-mock output: {line:?}"))
            .to_string();
        MockProcess { child, base_url }
    }
}

impl Drop for MockProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Copies the bundled fixtures into a fresh directory and points the run
/// config at `base_url`.
pub fn workspace(base_url: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixtures()).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    edit_config(dir.path(), |cfg| {
        for (_, b) in cfg["backends"].as_object_mut().unwrap() {
            b["base_url"] = serde_json::json!(base_url);
        }
    });
    dir
}

pub fn edit_config(dir: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let path = dir.join("run.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    f(&mut cfg);
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

pub fn conner(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("CONNER_CACHE_DIR")
        .output()
        .expect("run conner")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
