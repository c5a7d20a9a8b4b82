//! Plain-text probability vectors computed elsewhere.
//!
//! 64 data lines of 13 space-separated decimals, row = square index, column =
//! class ordinal. Lines starting with `#` are comments.

use std::path::Path;

use super::{
    BoardProbabilities, ClassifierBackend, ClassifyError, SquareProbabilities, NUM_CLASSES, NUM_SQUARES,
};
use crate::raster::Image;

pub fn parse_probability_text(text: &str) -> Result<BoardProbabilities, ClassifyError> {
    let mut rows = Vec::with_capacity(NUM_SQUARES);
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != NUM_CLASSES {
            return Err(ClassifyError::Parse {
                line: line_no,
                message: format!("row {} has {} columns, expected 13", rows.len(), fields.len()),
            });
        }
        let mut v = [0.0; NUM_CLASSES];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field.parse::<f64>().map_err(|e| ClassifyError::Parse {
                line: line_no,
                message: format!("row {}: bad number {field:?}: {e}", rows.len()),
            })?;
        }
        let sq = SquareProbabilities::normalize(v).map_err(|reason| ClassifyError::Parse {
            line: line_no,
            message: format!("row {}: {reason}", rows.len()),
        })?;
        rows.push(sq);
    }
    if rows.len() != NUM_SQUARES {
        return Err(ClassifyError::RowCount(rows.len()));
    }
    BoardProbabilities::new(rows)
}

pub fn load_probability_file(path: impl AsRef<Path>) -> Result<BoardProbabilities, ClassifyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ClassifyError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_probability_text(&text)
}

/// Serializes in the file format; `f64` shortest round-trip formatting keeps
/// values bit-exact.
pub fn write_probability_text(probs: &BoardProbabilities) -> String {
    let mut out = String::new();
    for sq in probs.squares() {
        let row: Vec<String> = sq.as_array().iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Replays vectors loaded from a file, ignoring the square images.
#[derive(Debug, Clone)]
pub struct FileBackend {
    probs: BoardProbabilities,
}

impl FileBackend {
    pub fn new(probs: BoardProbabilities) -> Self {
        Self { probs }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifyError> {
        load_probability_file(path).map(Self::new)
    }
}

impl ClassifierBackend for FileBackend {
    fn name(&self) -> &str {
        "file"
    }

    fn classify_batch(&self, _squares: &[Image]) -> Result<Vec<[f64; NUM_CLASSES]>, String> {
        Ok(self.probs.squares().iter().map(|s| *s.as_array()).collect())
    }
}
