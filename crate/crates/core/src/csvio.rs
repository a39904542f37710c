//! Minimal CSV helpers. All pipeline intermediates are flat CSV with an
//! optional leading `#` provenance comment; readers skip comment lines and
//! validate headers column by column.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub fn write_csv(
    path: &Path,
    provenance: Option<&str>,
    header: &str,
    rows: &[String],
) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(w, "# {p}")?;
        }
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a CSV written by [`write_csv`]: returns the data rows, split on
/// commas, after checking the header matches `expected_header` exactly.
pub fn read_csv(path: &Path, expected_header: &str) -> Result<Vec<Vec<String>>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::BadFormat {
        path: path.display().to_string(),
        reason: "empty file".into(),
    })?;
    if header != expected_header {
        let missing = expected_header
            .split(',')
            .find(|c| !header.split(',').any(|h| h == *c))
            .unwrap_or("<order>");
        return Err(Error::SchemaMismatch {
            path: path.display().to_string(),
            column: missing.to_string(),
        });
    }
    let ncols = expected_header.split(',').count();
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != ncols {
            return Err(Error::BadFormat {
                path: path.display().to_string(),
                reason: format!("row has {} fields, expected {ncols}: `{line}`", fields.len()),
            });
        }
        rows.push(fields);
    }
    Ok(rows)
}

pub fn parse_f64(path: &Path, column: &str, field: &str) -> Result<f64> {
    field.parse().map_err(|_| Error::SchemaMismatch {
        path: path.display().to_string(),
        column: format!("{column} (got `{field}`)"),
    })
}

pub fn parse_usize(path: &Path, column: &str, field: &str) -> Result<usize> {
    field.parse().map_err(|_| Error::SchemaMismatch {
        path: path.display().to_string(),
        column: format!("{column} (got `{field}`)"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header_check() {
        let dir = std::env::temp_dir().join("satpipe_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        write_csv(
            &path,
            Some("config=abc seed=1"),
            "a,b",
            &["1,2".to_string(), "3,4".to_string()],
        )
        .unwrap();
        let rows = read_csv(&path, "a,b").unwrap();
        assert_eq!(rows, vec![vec!["1", "2"], vec!["3", "4"]]);
        let err = read_csv(&path, "a,c").unwrap_err();
        assert!(err.to_string().contains('c'), "{err}");
    }
}
