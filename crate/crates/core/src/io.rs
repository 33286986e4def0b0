//! File helpers shared by every artifact writer.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{PcxError, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| PcxError::io_at(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| PcxError::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| PcxError::io_at(&tmp, e))?;
        f.write_all(bytes).map_err(|e| PcxError::io_at(&tmp, e))?;
        f.sync_all().map_err(|e| PcxError::io_at(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| PcxError::io_at(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Reads JSON; parse errors are reported with the byte offset of the failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| PcxError::io_at(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| {
        PcxError::Format {
            offset: byte_offset(&bytes, e.line(), e.column()),
            message: e.to_string(),
        }
        .with_path(path)
    })
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}
