//! JSONL snapshot persistence for crawl state.
//!
//! Line 1 is a header object carrying the format version; every following
//! line is one [`PageRecord`]. Serialization is deterministic — map fields
//! are ordered collections and field order is fixed — so saving the same
//! records twice produces byte-identical files, which is what the pipeline's
//! reproducibility checks key on.

use super::{CorpusError, PageRecord};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
}

/// Write records as JSONL, header line first, in the order given.
pub fn save_snapshot(records: &[PageRecord], path: &Path) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = serde_json::to_string(&Header {
        format_version: SNAPSHOT_FORMAT_VERSION,
    })
    .expect("header serializes");
    writeln!(out, "{header}")?;
    for rec in records {
        let line = serde_json::to_string(rec).map_err(|e| CorpusError::Schema {
            line: 0,
            message: format!("cannot serialize record for {}: {e}", rec.host()),
        })?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a snapshot back, failing fast on the first malformed line.
///
/// Errors carry the 1-based line number. The header must parse and match
/// [`SNAPSHOT_FORMAT_VERSION`]; each record must parse and pass
/// [`PageRecord::validate`].
pub fn load_snapshot(path: &Path) -> Result<Vec<PageRecord>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(l) => l?,
        None => {
            return Err(CorpusError::Schema {
                line: 1,
                message: "empty file, missing header".to_string(),
            })
        }
    };
    let header: Header = serde_json::from_str(&header_line).map_err(|e| CorpusError::Schema {
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    if header.format_version != SNAPSHOT_FORMAT_VERSION {
        return Err(CorpusError::Schema {
            line: 1,
            message: format!(
                "format version {} unsupported, expected {}",
                header.format_version, SNAPSHOT_FORMAT_VERSION
            ),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PageRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        rec.validate().map_err(|message| CorpusError::Schema {
            line: line_no,
            message,
        })?;
        records.push(rec);
    }
    Ok(records)
}
