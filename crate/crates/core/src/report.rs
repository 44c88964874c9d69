//! Deterministic number formatting and file output shared by the reports.

use std::fs;
use std::path::Path;

/// Shortest round-trip decimal, with rounding noise below 1e-12 and
/// negative zero printed as `0`.
pub fn fmt_num(v: f64) -> String {
    if v.abs() < 1e-12 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)
}
