//! Serialization, communication accounting, reports and file handling.

mod containers;
mod ledger;
mod report;
mod wire;

use std::path::Path;

pub use containers::*;
pub use ledger::{chunk_count, CommLedger, LedgerSummary, Message, PayloadKind, Role};
pub use report::{format_f64, Report, REPORT_SCHEMA};
pub use wire::{
    deserialize_ciphertext, deserialize_ciphertext_list, deserialize_galois_keys, deserialize_plaintext,
    deserialize_public_key, deserialize_relin_key, deserialize_secret_key, serialize_ciphertext,
    serialize_ciphertext_list, serialize_galois_keys, serialize_plaintext, serialize_public_key, serialize_relin_key,
    serialize_secret_key, FORMAT_VERSION, LIST_AGGREGATE_GRADIENT, LIST_AGGREGATE_TOKENS, LIST_GRADIENT,
    LIST_PREDICTIONS, MAGIC_BUNDLE, MAGIC_CIPHERTEXT, MAGIC_CIPHERTEXT_LIST, MAGIC_DATASET, MAGIC_HEAD, MAGIC_KEY,
    MAGIC_MODEL, MAGIC_PLAINTEXT, MAGIC_TOKENS,
};

use crate::error::{Error, Result};

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
