use std::path::{Path, PathBuf};

use flowcap::kv::{KvError, KvMap};

use crate::error::CliError;

/// Top-level key sections; anything else is rejected.
pub const SECTIONS: &[&str] = &["model.", "sim.", "analyzer."];

/// Reads the optional config file, then applies `--set` overrides in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<KvMap, CliError> {
    let mut map = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            KvMap::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => KvMap::new(),
    };
    for assignment in overrides {
        map.set_assignment(assignment)?;
    }
    if let Some(key) = map
        .keys()
        .find(|k| !SECTIONS.iter().any(|s| k.starts_with(s)))
    {
        return Err(KvError::Unknown {
            key: key.to_string(),
        }
        .into());
    }
    Ok(map)
}

/// Creates the output directory and returns the path of `name` inside it.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(path).map_err(|e| {
            CliError::config(format!(
                "cannot create output directory {}: {e}",
                path.display()
            ))
        })?;
        Ok(OutDir(path.to_path_buf()))
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}
