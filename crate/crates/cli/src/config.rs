//! Plain-text configuration files: one `key = value` per line, `#` starts a
//! comment, lists are comma-separated. Command-line flags override file
//! values; unknown keys are rejected.

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use bni_core::error::{Error, Result};

/// Parsed config file with consumption tracking, so unknown keys can be
/// reported after every recognized key has been read.
#[derive(Debug, Default)]
pub struct ConfigMap {
    entries: Vec<(String, String)>,
    consumed: std::cell::RefCell<HashSet<String>>,
    source: Option<PathBuf>,
}

impl ConfigMap {
    pub fn empty() -> Self {
        ConfigMap::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        let mut entries = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected 'key = value'", path.display(), no + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("{}:{}: empty key", path.display(), no + 1)));
            }
            entries.push((key, value.trim().to_string()));
        }
        Ok(ConfigMap { entries, consumed: Default::default(), source: Some(path.to_path_buf()) })
    }

    /// Last value for `key`, if any (later lines override earlier ones).
    pub fn get(&self, key: &str) -> Option<String> {
        self.consumed.borrow_mut().insert(key.to_string());
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
    }

    /// All values for a repeatable key, in file order.
    pub fn get_all(&self, key: &str) -> Vec<String> {
        self.consumed.borrow_mut().insert(key.to_string());
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .collect()
    }

    /// Error if the file contains keys never consumed by the command.
    pub fn reject_unknown(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        for (key, _) in &self.entries {
            if !consumed.contains(key) {
                let source = self
                    .source
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default();
                return Err(Error::Config(format!("{}: unknown key '{}'", source, key)));
            }
        }
        Ok(())
    }
}

pub fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{}: '{}' is not a number", what, text)))
}

pub fn parse_usize(text: &str, what: &str) -> Result<usize> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{}: '{}' is not a nonnegative integer", what, text)))
}

pub fn parse_u64(text: &str, what: &str) -> Result<u64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{}: '{}' is not a nonnegative integer", what, text)))
}

/// Parse `lo,hi` truncation quantiles.
pub fn parse_quantile_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("{}: expected 'lower,upper', got '{}'", what, text)));
    }
    Ok((parse_f64(parts[0], what)?, parse_f64(parts[1], what)?))
}

pub fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| parse_f64(t, what))
        .collect()
}

/// The fully resolved run configuration, echoed to `run_config.txt` (and to
/// stdout under `--dry-run`).
#[derive(Debug, Default)]
pub struct ResolvedConfig {
    entries: Vec<(String, String)>,
}

impl ResolvedConfig {
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run_config.txt");
        let mut file = fs::File::create(&path)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        file.write_all(self.render().as_bytes())
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Ok(())
    }
}

/// Create the output directory if needed.
pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })
}

/// Write a file under the output directory.
pub fn write_output(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}
