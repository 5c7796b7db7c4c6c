//! Tab-separated output tables and the JSON metadata sidecar.
//!
//! Tables start with two `#` lines: column names, then units. Numbers are
//! written with 9 significant digits. Nothing in a table depends on the wall
//! clock, so identical inputs give identical bytes.
//!
//! All files of a run are rendered in memory first and then committed as a
//! set: each is written to a temporary name and renamed into place only after
//! every write succeeded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "esrsim";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `{:.8e}`: 9 significant digits.
pub fn format_value(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    columns: Vec<(String, String)>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a column with its unit (`"1"` for dimensionless).
    pub fn column(mut self, name: impl Into<String>, unit: impl Into<String>) -> Self {
        self.columns.push((name.into(), unit.into()));
        self
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.columns.iter().map(|c| c.0.as_str()).collect();
        let units: Vec<&str> = self.columns.iter().map(|c| c.1.as_str()).collect();
        out.push_str("# ");
        out.push_str(&names.join("\t"));
        out.push_str("\n# ");
        out.push_str(&units.join("\t"));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_value(x)).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Parses a table written by [`Table::render`]: `(names, units, rows)`.
pub fn parse_table(text: &str) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate();
    let mut header = |what: &str| -> Result<Vec<String>> {
        let (i, line) = lines.next().ok_or_else(|| Error::parse(0, format!("missing {what} row")))?;
        let rest = line
            .strip_prefix("# ")
            .ok_or_else(|| Error::parse(i + 1, format!("expected the {what} row")))?;
        Ok(rest.split('\t').map(str::to_string).collect())
    };
    let names = header("column name")?;
    let units = header("unit")?;
    if units.len() != names.len() {
        return Err(Error::parse(2, "unit row does not match the column names"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row = line
            .split('\t')
            .map(|s| s.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number {s:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != names.len() {
            return Err(Error::parse(i + 1, "row width does not match the header"));
        }
        rows.push(row);
    }
    Ok((names, units, rows))
}

/// SHA-256 over the given inputs, hex encoded.
pub fn content_hash<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `esrsim <version> (inputs <first 12 hex digits>)`.
pub fn provenance(hash: &str) -> String {
    format!("{TOOL_NAME} {TOOL_VERSION} (inputs {})", &hash[..12.min(hash.len())])
}

/// Metadata sidecar written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata<C: Serialize, S: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: String,
    pub provenance: String,
    pub input_hash: String,
    pub units: BTreeMap<&'static str, &'static str>,
    pub files: Vec<String>,
    pub configuration: C,
    pub summary: S,
}

/// Units shared by all outputs.
pub fn unit_declarations() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("time", "ns"),
        ("frequency", "GHz"),
        ("energy", "meV"),
        ("rate", "ueV"),
        ("field", "T"),
        ("temperature", "K"),
        ("current", "pA"),
        ("spin", "hbar"),
    ])
}

/// Files of one run, committed together.
#[derive(Debug, Clone, Default)]
pub struct OutputSet {
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }

    /// Writes every file into `dir` (created if needed). On failure the
    /// temporary files are removed and no final file of this set is left
    /// behind.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut staged = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (name, contents) in &self.files {
            let target = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, contents) {
                let _ = fs::remove_file(&tmp);
                cleanup(&staged);
                return Err(Error::io(tmp.display().to_string(), e));
            }
            staged.push((tmp, target));
        }
        let mut done = Vec::new();
        for (i, (tmp, target)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, target) {
                for t in &done {
                    let _ = fs::remove_file(t);
                }
                cleanup(&staged[i..]);
                return Err(Error::io(target.display().to_string(), e));
            }
            done.push(target.clone());
        }
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(1.0), "1.00000000e0");
        assert_eq!(format_value(-0.000123456789123), "-1.23456789e-4");
        let x = 16.161234567891;
        let y: f64 = format_value(x).parse().unwrap();
        assert!(((x - y) / x).abs() < 1e-8);
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new().column("time", "ns").column("current", "pA");
        t.push(vec![0.0, 1.5e-3]).unwrap();
        t.push(vec![0.01, -2.25]).unwrap();
        assert!(t.push(vec![1.0]).is_err());
        let text = t.render();
        assert!(text.starts_with("# time\tcurrent\n# ns\tpA\n"));
        let (names, units, rows) = parse_table(&text).unwrap();
        assert_eq!(names, ["time", "current"]);
        assert_eq!(units, ["ns", "pA"]);
        assert_eq!(rows, vec![vec![0.0, 1.5e-3], vec![0.01, -2.25]]);
    }

    #[test]
    fn hash_separates_inputs() {
        assert_ne!(content_hash(["ab", "c"]), content_hash(["a", "bc"]));
        assert_eq!(content_hash(["x"]).len(), 64);
        assert!(provenance(&content_hash(["x"])).starts_with("esrsim "));
    }

    #[test]
    fn commit_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = OutputSet::new();
        set.add("a.tsv", "1\n".into());
        set.add("b.json", "{}".into());
        let written = set.commit(&dir.path().join("out")).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read_to_string(&written[0]).unwrap(), "1\n");
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("out"))
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".partial"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
