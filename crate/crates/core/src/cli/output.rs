use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const TOOL_NAME: &str = "burden";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 (lowercase hex) of the configuration's JSON serialization. The output
/// directory is not part of the serialized form, so the hash only depends on
/// what is computed.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        write!(hex, "{b:02x}").expect("writing to a String cannot fail");
    }
    Ok(hex)
}

/// Tool version and configuration hash stamped on every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new<C: Serialize>(config: &C) -> Result<Self> {
        Ok(Self {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            config_sha256: config_hash(config)?,
        })
    }

    pub fn header_line(&self) -> String {
        format!(
            "# {} {} config_sha256={}",
            self.tool, self.version, self.config_sha256
        )
    }

    /// Writes the header comment followed by a CSV table.
    pub fn write_csv<I>(&self, path: &Path, columns: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut buf = self.header_line().into_bytes();
        buf.push(b'\n');
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(columns)?;
            for row in rows {
                debug_assert_eq!(row.len(), columns.len());
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Shortest round-trip representation.
pub(crate) fn num(v: f64) -> String {
    v.to_string()
}

/// Empty cell for a missing value.
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"seed": 1})).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash(&serde_json::json!({"seed": 1})).unwrap());
        assert_ne!(a, config_hash(&serde_json::json!({"seed": 2})).unwrap());
    }

    #[test]
    fn csv_starts_with_provenance_comment() {
        let dir = tempfile::tempdir().unwrap();
        let p = Provenance::new(&1u8).unwrap();
        let path = dir.path().join("t.csv");
        p.write_csv(&path, &["a", "b"], vec![vec!["1".into(), String::new()]])
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# burden "));
        assert_eq!(lines.next(), Some("a,b"));
        assert_eq!(lines.next(), Some("1,"));
    }
}
