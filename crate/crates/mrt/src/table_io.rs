//! Reading tables from disk.

use std::fs;
use std::path::{Path, PathBuf};

use mrt_core::csv::{self, CsvDocument};
use mrt_core::table::unique_headers;
use mrt_core::Table;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
pub struct LoadedTable {
    pub table: Table,
    pub path: PathBuf,
    pub fingerprint: String,
    // Holds the rewritten copy alive when the header had to be renamed.
    normalized: Option<NamedTempFile>,
}

impl LoadedTable {
    /// Path handed to the harness. Differs from `path` only when headers
    /// were renamed, so generated code sees the same names as the profile.
    pub fn harness_path(&self) -> &Path {
        self.normalized.as_ref().map_or(self.path.as_path(), |f| f.path())
    }
}

/// Load a CSV table; the table name is the file stem.
pub fn load_table(path: &Path) -> Result<LoadedTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fingerprint = sha256_hex(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| Error::MalformedCsv {
        path: path.to_path_buf(),
        row: None,
        message: format!("not UTF-8: {e}"),
    })?;
    let doc = csv::parse(&text).map_err(|e| Error::MalformedCsv {
        path: path.to_path_buf(),
        row: e.row(),
        message: e.to_string(),
    })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let table = Table::from_document(&name, &doc);

    let renamed = unique_headers(&doc.header);
    let normalized = if renamed != doc.header {
        let copy = CsvDocument { header: renamed, records: doc.records.clone() };
        let mut file = tempfile::Builder::new()
            .prefix("mrt-table-")
            .suffix(".csv")
            .tempfile()
            .map_err(|e| Error::io(path, e))?;
        use std::io::Write;
        file.write_all(csv::write(&copy).as_bytes()).map_err(|e| Error::io(file.path(), e))?;
        Some(file)
    } else {
        None
    };
    Ok(LoadedTable { table, path: path.to_path_buf(), fingerprint, normalized })
}
