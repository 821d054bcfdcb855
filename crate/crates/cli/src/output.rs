//! CSV and JSON emission. Numbers in CSV use 17 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Fixed scientific notation with 17 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text from a header and rows of reals.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(sci).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn write_text(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    write_text(dir, name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(sci(1.0), "1.0000000000000000e0");
        assert_eq!(sci(-0.1), "-1.0000000000000001e-1");
        assert_eq!(sci(0.1).parse::<f64>().unwrap(), 0.1);
        let x = std::f64::consts::PI * 1e-300;
        assert_eq!(sci(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn table_layout() {
        let t = csv_table(&["a", "b"], vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(t, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n3.0000000000000000e0,4.0000000000000000e0\n");
    }
}
