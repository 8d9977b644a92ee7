// SPDX-License-Identifier: Apache-2.0

//! Optional TOML config file. Values apply only where neither a flag nor an
//! environment variable was given.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub jobs: Option<usize>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub prompt: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub image_root: Option<PathBuf>,
    pub pattern: Option<String>,
    pub max_attempts: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub dataset: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub image_dir: Option<PathBuf>,
    pub host: Option<String>,
    pub port: Option<u16>,
    #[serde(default)]
    pub cors_origins: Vec<String>,
    pub admin_token: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))
    }
}

/// Bad or missing arguments; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T, UsageError> {
    value.ok_or_else(|| UsageError(format!("missing required value --{flag} (flag, environment or config file)")))
}

pub fn existing_file(path: PathBuf, flag: &str) -> Result<PathBuf, UsageError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(UsageError(format!("--{flag}: no such file {}", path.display())))
    }
}

pub fn existing_dir(path: PathBuf, flag: &str) -> Result<PathBuf, UsageError> {
    if path.is_dir() {
        Ok(path)
    } else {
        Err(UsageError(format!("--{flag}: no such directory {}", path.display())))
    }
}

/// Output path whose parent directory exists.
pub fn writable(path: PathBuf, flag: &str) -> Result<PathBuf, UsageError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(p) if !p.is_dir() => Err(UsageError(format!("--{flag}: directory {} does not exist", p.display()))),
        _ => Ok(path),
    }
}
