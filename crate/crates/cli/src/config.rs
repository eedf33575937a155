//! Flat key=value configuration files. Command-line flags override file
//! values, file values override defaults. `DIALOG_READER_CONFIG` names the
//! default file when no --config flag is given.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const CONFIG_ENV: &str = "DIALOG_READER_CONFIG";

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: HashMap<String, String>,
    source: Option<PathBuf>,
}

impl FileConfig {
    /// Load from --config, else from $DIALOG_READER_CONFIG, else empty.
    pub fn resolve(explicit: Option<&Path>) -> Result<FileConfig> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).map(PathBuf::from),
        };
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => FileConfig::load(&p),
        }
    }

    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value", path.display(), i + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig {
            values,
            source: Some(path.to_path_buf()),
        })
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Flag value if given, else the file value, else the default.
    pub fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get_opt(key, flag).map(|v| v.unwrap_or(default))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}: cannot parse \"{raw}\": {e}"),
            },
        }
    }
}
