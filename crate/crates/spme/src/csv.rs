//! Minimal CSV output with a fixed numeric format.
//!
//! Numbers are written with 17 significant digits in scientific notation,
//! which round-trips every `f64` exactly. Lines end in `\n`.

use std::io::Write;
use std::path::Path;

use crate::error::RunError;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // collapse -0 so that equal tables print identically
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let line = |out: &mut Vec<u8>, cells: &[String]| {
            for (i, c) in cells.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                out.extend_from_slice(escape(c).as_bytes());
            }
            out.push(b'\n');
        };
        line(&mut out, &self.header);
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        let mut f = std::fs::File::create(path).map_err(|e| RunError::io(format!("creating {}", path.display()), e))?;
        f.write_all(&self.to_bytes()).map_err(|e| RunError::io(format!("writing {}", path.display()), e))
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}
