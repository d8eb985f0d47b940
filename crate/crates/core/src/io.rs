//! Fixed-format numeric output shared by all CSV writers.

use std::fs;
use std::io;
use std::path::Path;

/// 17 significant digits in scientific notation, e.g. `1.4142135623730951e0`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}
