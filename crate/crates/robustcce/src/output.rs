//! Atomic file writes and the versioned CSV layout.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

pub const CSV_SCHEMA: &str = "# schema v1";

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// A CSV table; every row starts with the config hash and the seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        let mut cols = vec!["config_hash".to_string(), "seed".to_string()];
        cols.extend(columns.iter().map(|c| c.to_string()));
        Table {
            columns: cols,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, hash: &str, seed: impl ToString, values: Vec<String>) {
        let mut row = vec![hash.to_string(), seed.to_string()];
        row.extend(values);
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: &Table) {
        self.rows.extend(other.rows.iter().cloned());
    }

    pub fn to_bytes(&self, kind: &str) -> Result<Vec<u8>> {
        let mut out = format!("{CSV_SCHEMA} {kind}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path, kind: &str) -> Result<()> {
        write_atomic(path, &self.to_bytes(kind)?)
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let body = text.split_once('\n').map_or("", |(_, b)| b);
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Shortest round-trip formatting, so equal values print identically.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["x", "label"]);
        t.push("abc", 3, vec![num(0.1), "a,b".into()]);
        let p = dir.path().join("t.csv");
        t.write(&p, "demo").unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# schema v1 demo\nconfig_hash,seed,x,label\n"));
        assert_eq!(Table::read(&p).unwrap(), t);
    }
}
