use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

/// `key: value` record of one command invocation. Written even when the run fails.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub started: u64,
    pub entries: Vec<(String, String)>,
    pub outputs: Vec<(String, PathBuf)>,
    pub suites: Vec<(String, bool)>,
    pub error: Option<String>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            started: unix_now(),
            entries: Vec::new(),
            outputs: Vec::new(),
            suites: Vec::new(),
            error: None,
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn suite(&mut self, name: &str, pass: bool) {
        self.suites.push((name.to_string(), pass));
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.suites.iter().all(|(_, p)| *p)
    }

    /// Write `contents` into `dir/name` and list it as an output.
    pub fn write_output(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.outputs.push((name.to_string(), path.clone()));
        Ok(path)
    }

    pub fn render(&self, exit_code: i32) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "version: {}", env!("CARGO_PKG_VERSION"));
        if let Some(p) = &self.config_path {
            let _ = writeln!(s, "config_path: {}", p.display());
        }
        let _ = writeln!(s, "started_unix: {}", self.started);
        let _ = writeln!(s, "finished_unix: {}", unix_now());
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}: {v}");
        }
        for (k, p) in &self.outputs {
            let _ = writeln!(s, "output.{k}: {}", p.display());
        }
        for (k, pass) in &self.suites {
            let _ = writeln!(s, "suite.{k}: {}", if *pass { "pass" } else { "fail" });
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {}", e.replace('\n', " "));
        }
        let status = match exit_code {
            crate::EXIT_PASS => "pass",
            crate::EXIT_RESOLUTION => "abort",
            _ => "fail",
        };
        let _ = writeln!(s, "status: {status}");
        let _ = writeln!(s, "exit_code: {exit_code}");
        s
    }

    pub fn write(&self, dir: &Path, exit_code: i32) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.render(exit_code)).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_lists_entries_suites_and_status() {
        let mut m = RunManifest::new("oracle", Some(Path::new("run.toml")));
        m.set("seed", 7);
        m.suite("oracle", true);
        assert!(m.passed());
        let text = m.render(crate::EXIT_PASS);
        for line in ["command: oracle", "config_path: run.toml", "seed: 7", "suite.oracle: pass", "status: pass", "exit_code: 0"] {
            assert!(text.lines().any(|l| l == line), "missing {line:?} in\n{text}");
        }
        m.suite("fisher", false);
        assert!(!m.passed());
        m.error = Some("resolution insufficient:\nclipped".into());
        let text = m.render(crate::EXIT_RESOLUTION);
        assert!(text.contains("error: resolution insufficient: clipped"));
        assert!(text.contains("status: abort"));
    }
}
