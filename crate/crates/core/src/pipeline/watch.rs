//! Periodic sampling of a directory of frames from a static camera.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use super::{DetectionMode, DigitizationResult, Pipeline, PipelineError};
use crate::board_detect::BoardLocation;
use crate::fen::FenPlacement;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// A fresh detection that lands within this fraction of the image diagonal
/// of the cached location means the board did not move: the check failed
/// because something covers it.
const SAME_PLACE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum WatchRecord {
    Digitized {
        path: PathBuf,
        result: DigitizationResult,
        /// Same FEN as the previous digitized frame.
        no_move: bool,
    },
    Skipped {
        path: PathBuf,
        reason: String,
    },
}

impl WatchRecord {
    pub fn path(&self) -> &Path {
        match self {
            WatchRecord::Digitized { path, .. } | WatchRecord::Skipped { path, .. } => path,
        }
    }
}

impl fmt::Display for WatchRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WatchRecord::Digitized { path, result, no_move } => {
                write!(f, "{}\t{}", path.display(), result.record())?;
                if *no_move {
                    write!(f, "\tno-move")?;
                }
                Ok(())
            }
            WatchRecord::Skipped { path, reason } => write!(f, "{}\tskip\t{reason}", path.display()),
        }
    }
}

/// Processes frames in order, carrying the board location and last FEN
/// from one frame to the next.
pub struct Watcher {
    pipeline: Pipeline,
    cache: Option<BoardLocation>,
    last_fen: Option<FenPlacement>,
    seen: BTreeSet<PathBuf>,
}

impl Watcher {
    pub fn new(pipeline: Pipeline) -> Self {
        Self {
            pipeline,
            cache: None,
            last_fen: None,
            seen: BTreeSet::new(),
        }
    }

    pub fn cache(&self) -> Option<&BoardLocation> {
        self.cache.as_ref()
    }

    /// Digitizes one frame. Failures become skip records. A frame whose
    /// check fails while a fresh detection finds the board where it was is
    /// treated as occluded and skipped too.
    pub fn process(&mut self, path: &Path) -> WatchRecord {
        let path_buf = path.to_path_buf();
        let skip = |reason: String| WatchRecord::Skipped {
            path: path_buf.clone(),
            reason,
        };
        let result = match self.pipeline.digitize_file(path, self.cache.as_ref()) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                return skip(e.to_string());
            }
        };
        let previous = self.cache.replace(result.location.clone());
        if let (Some(prev), DetectionMode::Fresh) = (previous, result.mode) {
            let (w, h) = result.image_size;
            let diag = (w as f64).hypot(h as f64);
            let shift = result.location.max_corner_shift(&prev);
            if shift <= SAME_PLACE_FRACTION * diag {
                log::info!("{}: board in place but check failed, treating as occluded", path.display());
                return skip(format!("board occluded (corners moved {shift:.1} px)"));
            }
        }
        let no_move = self.last_fen.as_ref() == Some(&result.fen);
        self.last_fen = Some(result.fen.clone());
        WatchRecord::Digitized {
            path: path_buf,
            result,
            no_move,
        }
    }

    /// Processes image files in `dir` not seen before, in name order.
    pub fn poll(&mut self, dir: &Path) -> Result<Vec<WatchRecord>, PipelineError> {
        let mut fresh: Vec<PathBuf> = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| PipelineError::Input(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| PipelineError::Input(e.to_string()))?.path();
            let is_image = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            if is_image && path.is_file() && !self.seen.contains(&path) {
                fresh.push(path);
            }
        }
        fresh.sort();
        Ok(fresh
            .into_iter()
            .map(|p| {
                self.seen.insert(p.clone());
                self.process(&p)
            })
            .collect())
    }
}

/// One pass over the images currently in `dir`.
pub fn watch_dir(dir: &Path, pipeline: Pipeline) -> Result<Vec<WatchRecord>, PipelineError> {
    Watcher::new(pipeline).poll(dir)
}
