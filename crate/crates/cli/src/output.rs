use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use chrono::{DateTime, SecondsFormat};
use serde::Serialize;

use depscope_core::metrics::write_csv;
use depscope_core::registry::write_atomic;
use depscope_core::SCHEMA_VERSION;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    generated_at: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes result files into the output directory.
pub struct Output {
    dir: PathBuf,
    generated_at: String,
}

impl Output {
    pub fn new(dir: &Path, now: i64) -> Output {
        let generated_at = DateTime::from_timestamp(now, 0)
            .unwrap_or_default()
            .to_rfc3339_opts(SecondsFormat::Secs, true);
        Output {
            dir: dir.to_path_buf(),
            generated_at,
        }
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        Ok(self.dir.join(name))
    }

    /// `body` must serialize to a JSON object.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let path = self.path(name)?;
        let envelope = Envelope {
            schema_version: SCHEMA_VERSION,
            generated_at: &self.generated_at,
            body,
        };
        let mut bytes = serde_json::to_vec_pretty(&envelope)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let path = self.path(name)?;
        let mut bytes = Vec::new();
        write_csv(rows, &mut bytes)?;
        write_atomic(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name)?;
        write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
