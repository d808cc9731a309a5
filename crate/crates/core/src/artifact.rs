//! Reading and writing output files. Every file carries a provenance record:
//! JSON files wrap their content in an envelope, JSON-lines files start with a
//! provenance line, CSV files start with a `#` comment.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Provenance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub format: String,
    pub format_version: u32,
    pub provenance: Provenance,
    pub content: T,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine {
    provenance: Provenance,
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, format: &str, provenance: &Provenance, content: &T) -> Result<()> {
    let env = Envelope {
        format: format.to_string(),
        format_version: 1,
        provenance: provenance.clone(),
        content,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Reads an envelope and checks its `format` tag.
pub fn read_json<T: DeserializeOwned>(path: &Path, format: &str) -> Result<Envelope<T>> {
    let bytes = read_bytes(path)?;
    let env: Envelope<T> = serde_json::from_slice(&bytes)?;
    if env.format != format {
        return Err(Error::Data(format!(
            "{}: expected a `{format}` file, found `{}`",
            path.display(),
            env.format
        )));
    }
    Ok(env)
}

pub fn write_jsonl<T: Serialize>(path: &Path, provenance: &Provenance, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, &ProvenanceLine { provenance: provenance.clone() })?;
    buf.push(b'\n');
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    write_bytes(path, &buf)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Provenance, Vec<T>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let fmt = |line: u64, msg: String| Error::Format {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let first = lines
        .next()
        .ok_or_else(|| fmt(1, "empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let head: ProvenanceLine =
        serde_json::from_str(&first).map_err(|e| fmt(1, format!("missing provenance line: {e}")))?;
    let mut items = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| fmt(i as u64 + 2, e.to_string()))?);
    }
    Ok((head.provenance, items))
}

/// CSV with a provenance comment line, a header row and pre-formatted cells.
pub fn write_csv(path: &Path, provenance: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = provenance.csv_comment().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let to_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(to_err)?;
        for r in rows {
            w.write_record(r).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_bytes(path, &buf)
}
