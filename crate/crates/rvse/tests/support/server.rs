//! Runs the `rvse` binary, including a background `rvse serve`.

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

pub fn rvse() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rvse"))
}

pub fn run(args: &[&str]) -> Output {
    rvse().args(args).output().expect("rvse runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

/// A running `rvse serve`, killed on drop.
pub struct Server {
    child: Child,
    pub url: String,
}

impl Server {
    pub fn start(repo_dir: &Path, tokens: &Path) -> Server {
        let mut child = rvse()
            .args(["serve", "--port", "0", "--repo-dir"])
            .arg(repo_dir)
            .arg("--tokens")
            .arg(tokens)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("rvse serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).expect("serve announces its address");
        let url = format!("http://{}", v["listening"].as_str().unwrap());
        Server { child, url }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
