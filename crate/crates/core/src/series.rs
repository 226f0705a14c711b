//! Columnar text series: the canonical interchange format of every run.
//!
//! Layout: `# efriction-series v1`, a manifest hash line, a column line
//! with unit tags, then one space-separated row of finite reals per record,
//! formatted with round-trip precision so identical runs produce
//! byte-identical files.

use crate::error::CoreError;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    /// Unit tag, atomic-unit subtypes ("hartree", "bohr", "au_time", "1" …).
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            unit: unit.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub schema_version: u32,
    /// Hex SHA-256 of the manifest that produced the series.
    pub manifest_hash: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesFile {
    pub fn new(manifest_hash: &str, columns: Vec<Column>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            manifest_hash: manifest_hash.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<(), CoreError> {
        if row.len() != self.columns.len() {
            return Err(CoreError::Series(format!(
                "row width {} != {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Series("non-finite value in series row".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_values(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write(&self, path: &Path) -> Result<(), CoreError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# efriction-series v{}", self.schema_version)?;
        writeln!(f, "# manifest-sha256: {}", self.manifest_hash)?;
        let header: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{}[{}]", c.name, c.unit))
            .collect();
        writeln!(f, "# columns: {}", header.join(" "))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CoreError> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let version_line = lines
            .next()
            .ok_or_else(|| CoreError::Series("empty series file".into()))??;
        let schema_version: u32 = version_line
            .strip_prefix("# efriction-series v")
            .ok_or_else(|| CoreError::Series("missing schema header".into()))?
            .trim()
            .parse()
            .map_err(|e| CoreError::Series(format!("bad schema version: {e}")))?;
        let hash_line = lines
            .next()
            .ok_or_else(|| CoreError::Series("missing manifest hash".into()))??;
        let manifest_hash = hash_line
            .strip_prefix("# manifest-sha256: ")
            .ok_or_else(|| CoreError::Series("missing manifest hash".into()))?
            .trim()
            .to_string();
        let cols_line = lines
            .next()
            .ok_or_else(|| CoreError::Series("missing column header".into()))??;
        let cols_str = cols_line
            .strip_prefix("# columns: ")
            .ok_or_else(|| CoreError::Series("missing column header".into()))?;
        let columns = cols_str
            .split_whitespace()
            .map(|tok| {
                let open = tok
                    .find('[')
                    .ok_or_else(|| CoreError::Series(format!("column `{tok}` lacks a unit tag")))?;
                let close = tok.len() - 1;
                if !tok.ends_with(']') {
                    return Err(CoreError::Series(format!(
                        "column `{tok}` lacks a unit tag"
                    )));
                }
                Ok(Column::new(&tok[..open], &tok[open + 1..close]))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut series = Self {
            schema_version,
            manifest_hash,
            columns,
            rows: Vec::new(),
        };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| CoreError::Series(format!("bad value `{tok}`: {e}")))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            series.push_row(row)?;
        }
        Ok(series)
    }
}

/// Hex SHA-256 of raw manifest bytes, tying every artifact to its config.
pub fn manifest_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_rejections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        let mut s = SeriesFile::new(
            "abc123",
            vec![
                Column::new("t", "au_time"),
                Column::new("energy", "hartree"),
            ],
        );
        s.push_row(vec![0.0, -1.25]).unwrap();
        s.push_row(vec![0.5, -1.2499999999999998]).unwrap();
        assert!(s.push_row(vec![f64::NAN, 0.0]).is_err());
        assert!(s.push_row(vec![1.0]).is_err());
        s.write(&path).unwrap();
        let back = SeriesFile::read(&path).unwrap();
        assert_eq!(s, back);
        // byte-identical rewrite
        let path2 = dir.path().join("s2.txt");
        back.write(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }
}
