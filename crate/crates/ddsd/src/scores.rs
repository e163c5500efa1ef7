//! Scores files (`pair_id,truth,score` CSV) and key-value reports.

use std::fs;
use std::path::Path;

use ddsd_core::eval::ScoredExample;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ScoresError {
    #[error("{path}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}, record {record}: {message}")]
    Invalid { path: String, record: usize, message: String },
    #[error("{path}: {message}")]
    Report { path: String, message: String },
}

pub fn write_scores(path: &Path, scores: &[ScoredExample]) -> Result<(), ScoresError> {
    let csv_err = |source| ScoresError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for s in scores {
        w.serialize(s).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ScoresError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoredExample>, ScoresError> {
    let p = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|source| ScoresError::Csv { path: p.clone(), source })?;
    let headers = r
        .headers()
        .map_err(|source| ScoresError::Csv { path: p.clone(), source })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["pair_id", "truth", "score"] {
        return Err(ScoresError::Invalid {
            path: p,
            record: 0,
            message: "header must be `pair_id,truth,score`".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<ScoredExample>().enumerate() {
        let s = row.map_err(|source| ScoresError::Csv { path: p.clone(), source })?;
        if s.truth > 1 || !(0.0..=1.0).contains(&s.score) {
            return Err(ScoresError::Invalid {
                path: p,
                record: i + 1,
                message: format!("truth must be 0/1 and score in [0, 1], got {} / {}", s.truth, s.score),
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// True when every score is exactly 0 or 1, as produced by prompting.
pub fn is_hard_labels(scores: &[ScoredExample]) -> bool {
    scores.iter().all(|s| s.score == 0.0 || s.score == 1.0)
}

pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<(), ScoresError> {
    let text = to_report_text(report).map_err(|message| ScoresError::Report {
        path: path.display().to_string(),
        message,
    })?;
    fs::write(path, text).map_err(|source| ScoresError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn to_report_text<T: Serialize>(report: &T) -> Result<String, String> {
    toml::to_string(report).map_err(|e| e.to_string())
}

pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<T, ScoresError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ScoresError::Io { path: p.clone(), source })?;
    toml::from_str(&text).map_err(|e| ScoresError::Report {
        path: p,
        message: e.to_string(),
    })
}
