//! CSV dumps of pair matrices for external heatmap plotting: a header row of
//! column ids followed by one row-major line of values per row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{RelevanceBucket, StratError};

fn write_matrix(
    path: &Path,
    rows: usize,
    cols: usize,
    cell: impl Fn(usize, usize) -> String,
) -> Result<(), StratError> {
    let mut s = String::new();
    let header: Vec<String> = (0..cols).map(|c| c.to_string()).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", cell(r, c));
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|source| StratError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Raw counts (`before` stratification).
pub fn export_counts_csv(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    count: impl Fn(usize, usize) -> u32,
) -> Result<(), StratError> {
    write_matrix(path.as_ref(), rows, cols, |r, c| count(r, c).to_string())
}

/// Assigned relevance per pair (`after` stratification); erased pairs are 0.
pub fn export_relevance_csv(
    bucket: &RelevanceBucket,
    path: impl AsRef<Path>,
) -> Result<(), StratError> {
    let (rows, cols) = bucket.dims();
    write_matrix(path.as_ref(), rows, cols, |r, c| {
        bucket.relevance_or_zero(r, c).to_string()
    })
}
