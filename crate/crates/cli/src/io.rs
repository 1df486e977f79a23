//! File helpers: newline-delimited records in, guarded outputs out.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Context};

/// Parses one JSON record per non-blank line.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).invalid_at(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::invalid(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn ndjson<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialise");
        out.push(b'\n');
    }
    out
}

pub fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("values serialise");
    out.push(b'\n');
    out
}

/// Refuses to replace an existing file, or to write into a non-empty
/// directory, unless `force` is set.
pub fn guard(path: &Path, force: bool) -> Result<(), CliError> {
    if force {
        return Ok(());
    }
    let occupied = if path.is_dir() {
        std::fs::read_dir(path).invalid_at(path)?.next().is_some()
    } else {
        path.exists()
    };
    if occupied {
        return Err(CliError::invalid(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).runtime_at(dir)?;
    }
    std::fs::write(path, bytes).runtime_at(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_blocks_existing_outputs_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("out.json");
        guard(&file, false).unwrap();
        std::fs::write(&file, "x").unwrap();
        assert!(matches!(guard(&file, false), Err(CliError::Invalid(_))));
        guard(&file, true).unwrap();
        let empty = dir.path().join("empty");
        std::fs::create_dir(&empty).unwrap();
        guard(&empty, false).unwrap();
        assert!(guard(dir.path(), false).is_err());
    }

    #[test]
    fn ndjson_round_trips_and_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.ndrec");
        std::fs::write(&p, ndjson(&[1u8, 2, 3])).unwrap();
        assert_eq!(read_ndjson::<u8>(&p).unwrap(), [1, 2, 3]);
        std::fs::write(&p, "1\n\nx\n").unwrap();
        let err = read_ndjson::<u8>(&p).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
    }
}
