//! Deterministic CSV tables with `#` metadata.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    /// Comment lines without the leading `# `.
    pub metadata: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// 17 significant digits in scientific notation.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimMismatch {
                expected: self.header.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Renders the table; any non-finite entry is an error naming its cell.
    pub fn render(&self) -> Result<String> {
        let mut s = String::new();
        for m in &self.metadata {
            for line in m.lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(Error::DimMismatch {
                    expected: self.header.len(),
                    found: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite("csv output").context(format!("row {i}, column `{}`", self.header[j])));
            }
            let cells: Vec<_> = row.iter().map(|&x| format_value(x)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.render()?;
        std::fs::write(path, text).map_err(|e| Error::Io(e).context(format!("writing {}", path.display())))
    }

    /// Reads back a rendered table.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = CsvTable::default();
        let mut lines = text.lines().enumerate();
        for (i, line) in lines.by_ref() {
            if let Some(m) = line.strip_prefix('#') {
                t.metadata.push(m.strip_prefix(' ').unwrap_or(m).to_string());
            } else {
                t.header = line.split(',').map(str::to_string).collect();
                if t.header.iter().any(String::is_empty) {
                    return Err(Error::Config {
                        line: i + 1,
                        message: "empty column name".into(),
                    });
                }
                break;
            }
        }
        for (i, line) in lines {
            let row = line
                .split(',')
                .map(|c| {
                    c.parse::<f64>().map_err(|_| Error::Config {
                        line: i + 1,
                        message: format!("bad number `{c}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            t.push(row).map_err(|e| e.context(format!("line {}", i + 1)))?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_value(0.1), "1.0000000000000001e-1");
        assert_eq!(format_value(-2.0), "-2.0000000000000000e0");
        for x in [std::f64::consts::PI, 1e-300, -7.25e12, 0.0] {
            assert_eq!(format_value(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn round_trip() {
        let mut t = CsvTable::new(&["t", "purity"]);
        t.metadata.push("seed = 3\nchi = 3".into());
        t.push(vec![0.0, 1.0]).unwrap();
        t.push(vec![0.5, 0.987_654_321_012_345_6]).unwrap();
        let text = t.render().unwrap();
        assert!(text.starts_with("# seed = 3\n# chi = 3\nt,purity\n"));
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back.header, t.header);
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.metadata, vec!["seed = 3", "chi = 3"]);
    }

    #[test]
    fn nan_is_rejected() {
        let mut t = CsvTable::new(&["x", "y"]);
        t.push(vec![1.0, f64::NAN]).unwrap();
        let e = t.render().unwrap_err();
        assert!(e.to_string().contains("column `y`"), "{e}");
        assert!(e.is_numerical());
        assert!(t.push(vec![1.0]).is_err());
    }
}
