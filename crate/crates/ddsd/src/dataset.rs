//! JSON-lines dataset files, one [`DatasetRecord`] per line.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ddsd_core::corpus::{DatasetRecord, Followup};
use ddsd_core::lattice;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate pair_id `{pair_id}` (first seen on line {first})")]
    Duplicate { line: usize, pair_id: String, first: usize },
}

/// Parses a JSON-lines document. Blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(raw).map_err(|e| DatasetError::Schema {
            line,
            message: e.to_string(),
        })?;
        validate(&record).map_err(|message| DatasetError::Schema { line, message })?;
        if let Some(&first) = seen.get(&record.pair_id) {
            return Err(DatasetError::Duplicate {
                line,
                pair_id: record.pair_id,
                first,
            });
        }
        seen.insert(record.pair_id.clone(), line);
        out.push(record);
    }
    Ok(out)
}

fn validate(r: &DatasetRecord) -> Result<(), String> {
    if r.label > 1 {
        return Err(format!("label must be 0 or 1, got {}", r.label));
    }
    if r.pair_id.is_empty() || r.speaker_id.is_empty() {
        return Err("pair_id and speaker_id must be non-empty".into());
    }
    if r.initial.onebest.trim().is_empty() {
        return Err("initial.onebest must be non-empty".into());
    }
    if let Some(doc) = &r.initial.lattice {
        lattice::parse_lattice(doc).map_err(|e| format!("initial lattice: {e}"))?;
    }
    match &r.followup {
        Followup::Lattice(doc) => {
            lattice::parse_lattice(doc).map_err(|e| format!("followup lattice: {e}"))?;
        }
        Followup::Hypotheses(h) if h.is_empty() => return Err("followup has no hypotheses".into()),
        Followup::Hypotheses(h) => {
            if h.iter().any(|h| !h.cost.is_finite() || h.text.trim().is_empty() || h.text.contains('\n')) {
                return Err("followup hypotheses need non-empty single-line text and finite costs".into());
            }
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

pub fn to_jsonl(records: &[DatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn save(records: &[DatasetRecord], path: &Path) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut ids = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        if !ids.insert(r.pair_id.as_str()) {
            return Err(DatasetError::Duplicate {
                line: i + 1,
                pair_id: r.pair_id.clone(),
                first: records.iter().position(|o| o.pair_id == r.pair_id).unwrap_or(0) + 1,
            });
        }
    }
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    w.write_all(to_jsonl(records).as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}
