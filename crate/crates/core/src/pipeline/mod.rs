//! Image to FEN, stage by stage, with timings and an optional cached board
//! location for a static camera.

mod bench;
mod config;
mod watch;

use std::borrow::Cow;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

pub use bench::{bench_intersections, BenchReport, BenchRow};
pub use config::{BackendChoice, ConfigError, Orientation, PipelineConfig};
pub use watch::{watch_dir, WatchRecord, Watcher};

use crate::board_detect::{check_board_location_with, locate_board, split_squares, BoardLocation, DetectError, PatchTest};
use crate::classify::{classify_squares, BaselineBackend, BoardProbabilities, ClassifierBackend, ClassifyError, FileBackend};
use crate::fen::{decode_fen_with, encode_fen, FenError, FenOptions, FenPlacement};
use crate::infer::{infer_position, CensusLimits};
use crate::raster::{Image, ImageError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("board detection: {0}")]
    Detection(#[from] DetectError),
    #[error("classification: {0}")]
    Classification(#[from] ClassifyError),
    #[error("output check: {0}")]
    Output(#[from] FenError),
    #[error("input: {0}")]
    Image(#[from] ImageError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
}

impl PipelineError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Detection(DetectError::ImageTooSmall { .. }) => 4,
            PipelineError::Detection(_) => 2,
            PipelineError::Classification(_) | PipelineError::Output(_) => 3,
            PipelineError::Image(_) | PipelineError::Config(_) | PipelineError::Input(_) => 4,
        }
    }
}

/// Wall-clock seconds per stage. Exactly one of `board_detection_s` and
/// `board_check_s` is set, unless a failed check fell back to detection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub board_detection_s: Option<f64>,
    pub board_check_s: Option<f64>,
    pub split_squares_s: f64,
    pub probability_vectors_s: f64,
    pub infer_plus_fen_s: f64,
    pub total_s: f64,
}

impl StageTimings {
    pub fn stage_sum(&self) -> f64 {
        self.board_detection_s.unwrap_or(0.0)
            + self.board_check_s.unwrap_or(0.0)
            + self.split_squares_s
            + self.probability_vectors_s
            + self.infer_plus_fen_s
    }
}

impl fmt::Display for StageTimings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |s| format!("{s:.4}"));
        write!(
            f,
            "board_detection_s={}\tboard_check_s={}\tsplit_squares_s={:.4}\tprobability_vectors_s={:.4}\tinfer_plus_fen_s={:.4}\ttotal_s={:.4}",
            opt(self.board_detection_s),
            opt(self.board_check_s),
            self.split_squares_s,
            self.probability_vectors_s,
            self.infer_plus_fen_s,
            self.total_s
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    Fresh,
    Cached,
}

/// Top-class probabilities over the 64 squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSummary {
    pub mean: f64,
    pub min: f64,
    pub min_square: usize,
    /// Squares whose top class has probability below one half.
    pub uncertain: usize,
}

impl ConfidenceSummary {
    pub fn of(probs: &BoardProbabilities) -> Self {
        let tops: Vec<f64> = probs.squares().iter().map(|s| s.get(s.argmax())).collect();
        let (min_square, min) = tops
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        Self {
            mean: tops.iter().sum::<f64>() / tops.len().max(1) as f64,
            min,
            min_square,
            uncertain: tops.iter().filter(|&&p| p < 0.5).count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DigitizationResult {
    pub fen: FenPlacement,
    pub timings: StageTimings,
    pub mode: DetectionMode,
    pub confidence: ConfidenceSummary,
    /// The board location used, for carrying to the next image.
    pub location: BoardLocation,
    pub image_size: (usize, usize),
}

impl DigitizationResult {
    /// One record: FEN, then tab-separated `key=value` fields.
    pub fn record(&self) -> String {
        let mode = match self.mode {
            DetectionMode::Fresh => "fresh",
            DetectionMode::Cached => "cached",
        };
        format!(
            "{}\tmode={mode}\t{}\tmean_confidence={:.3}\tuncertain={}",
            self.fen, self.timings, self.confidence.mean, self.confidence.uncertain
        )
    }
}

/// A configured pipeline: the classifier backend is built once.
pub struct Pipeline {
    config: PipelineConfig,
    backend: Box<dyn ClassifierBackend>,
    test: PatchTest,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        let backend: Box<dyn ClassifierBackend> = match &config.backend {
            BackendChoice::Baseline => Box::new(BaselineBackend { params: config.baseline.clone() }),
            BackendChoice::File(path) => Box::new(FileBackend::load(path)?),
        };
        Ok(Self::with_backend(config, backend))
    }

    pub fn with_backend(config: PipelineConfig, backend: Box<dyn ClassifierBackend>) -> Self {
        let test = config.patch_test();
        Self { config, backend, test }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn digitize(&self, image: &Image, cached: Option<&BoardLocation>) -> Result<DigitizationResult, PipelineError> {
        self.digitize_timed(Instant::now(), || Ok(Cow::Borrowed(image)), cached)
    }

    /// Like [`Pipeline::digitize`], with image decoding charged to the
    /// detection (or check) stage.
    pub fn digitize_file(&self, path: impl AsRef<Path>, cached: Option<&BoardLocation>) -> Result<DigitizationResult, PipelineError> {
        let path = path.as_ref();
        self.digitize_timed(Instant::now(), || Ok(Cow::Owned(Image::load(path)?)), cached)
    }

    fn digitize_timed<'a>(
        &self,
        start: Instant,
        load: impl FnOnce() -> Result<Cow<'a, Image>, PipelineError>,
        cached: Option<&BoardLocation>,
    ) -> Result<DigitizationResult, PipelineError> {
        let cfg = &self.config;
        let mut timings = StageTimings::default();
        let image = load()?;

        let mut reuse = None;
        let mut stage = start;
        if let Some(loc) = cached {
            // A cached location that no longer fits inside the image is a
            // failed check, not an error.
            let ok = check_board_location_with(&image, &loc.grid(), cfg.check_tolerance, &self.test).unwrap_or(false);
            let now = Instant::now();
            timings.board_check_s = Some((now - stage).as_secs_f64());
            stage = now;
            if ok {
                reuse = Some(loc.clone());
            }
        }
        let (location, mode) = match reuse {
            Some(loc) => (loc, DetectionMode::Cached),
            None => {
                let loc = locate_board(&image, &cfg.locate_config())?;
                let now = Instant::now();
                timings.board_detection_s = Some((now - stage).as_secs_f64());
                stage = now;
                (loc, DetectionMode::Fresh)
            }
        };

        let squares = split_squares(&image, &location, cfg.out_px, cfg.top_extension)?;
        let now = Instant::now();
        timings.split_squares_s = (now - stage).as_secs_f64();
        stage = now;

        let in_image_order = classify_squares(self.backend.as_ref(), &squares)?;
        let side = cfg.white_side;
        let probs = in_image_order.permuted(|b| side.image_square(b));
        let now = Instant::now();
        timings.probability_vectors_s = (now - stage).as_secs_f64();
        stage = now;

        let limits = CensusLimits::default();
        let position = infer_position(&probs, &limits);
        let fen = encode_fen(&position);
        decode_fen_with(
            fen.as_str(),
            FenOptions {
                strict: cfg.strict_fen,
                census: Some(limits),
            },
        )?;
        let now = Instant::now();
        timings.infer_plus_fen_s = (now - stage).as_secs_f64();
        timings.total_s = (now - start).as_secs_f64();

        Ok(DigitizationResult {
            fen,
            timings,
            mode,
            confidence: ConfidenceSummary::of(&probs),
            location,
            image_size: (image.width(), image.height()),
        })
    }
}

/// One-shot digitization with a freshly built pipeline.
pub fn digitize(image: &Image, config: &PipelineConfig, cached: Option<&BoardLocation>) -> Result<DigitizationResult, PipelineError> {
    Pipeline::new(config.clone())?.digitize(image, cached)
}

/// A static-camera breakeven figure often quoted for the check: one hit in
/// this many calls pays for the misses.
pub const REFERENCE_BREAKEVEN: u64 = 14;
/// Square separation time, seconds, on the hardware the reference figure
/// was measured on.
pub const REFERENCE_SPLIT_S: f64 = 0.08;

/// Breakeven of the board-location check against a full detection.
#[derive(Debug, Clone, PartialEq)]
pub struct AmortizationReport {
    pub fresh_s: f64,
    pub check_s: f64,
    /// Largest N with `N * check_s <= fresh_s`: a check that succeeds once
    /// in N calls saves at least what the N failed checks cost. `None` when
    /// the check is not cheaper than detection.
    pub breakeven: Option<u64>,
}

impl AmortizationReport {
    /// Breakeven when the per-call overhead also includes `extra_s`.
    pub fn breakeven_with_overhead(&self, extra_s: f64) -> Option<u64> {
        breakeven(self.fresh_s, self.check_s + extra_s)
    }
}

fn breakeven(fresh_s: f64, cost_s: f64) -> Option<u64> {
    // The small slack keeps exact multiples such as 2/1 from rounding down.
    (cost_s > 0.0 && cost_s < fresh_s).then(|| (fresh_s / cost_s + 1e-9).floor() as u64)
}

impl fmt::Display for AmortizationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(n) = self.breakeven else {
            return write!(
                f,
                "fresh {:.3} s, check {:.3} s: never amortized (the check costs as much as detection)",
                self.fresh_s, self.check_s
            );
        };
        writeln!(
            f,
            "fresh {:.3} s, check {:.3} s: breakeven at 1 out of {n} (N = floor(fresh / check))",
            self.fresh_s, self.check_s
        )?;
        let relation = if REFERENCE_BREAKEVEN <= n { "holds a fortiori" } else { "does not hold" };
        write!(
            f,
            "reference figure 1 out of {REFERENCE_BREAKEVEN}: {relation} ({REFERENCE_BREAKEVEN} vs {n})",
        )?;
        if let Some(m) = self.breakeven_with_overhead(REFERENCE_SPLIT_S) {
            write!(
                f,
                "; charging square separation ({REFERENCE_SPLIT_S:.2} s) to every call gives floor(fresh / (check + split)) = {m}",
            )?;
            if m == REFERENCE_BREAKEVEN {
                write!(f, ", which reproduces the reference figure")?;
            }
        }
        Ok(())
    }
}

pub fn amortization_report(fresh_s: f64, check_s: f64) -> AmortizationReport {
    AmortizationReport {
        fresh_s,
        check_s,
        breakeven: breakeven(fresh_s, check_s),
    }
}
