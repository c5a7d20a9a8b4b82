//! `key = value` pipeline configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::board_detect::{
    GeometricDetector, LocateConfig, PatchTest, RelaxedDetector, DEFAULT_CHECK_TOLERANCE, DEFAULT_PATCH_SIZE,
    DEFAULT_TAU,
};
use crate::classify::BaselineParams;
use crate::geometry::DEFAULT_DISPATCH_THRESHOLD;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// Where the 13-way square scores come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    Baseline,
    /// Vectors replayed from a file, in rectified-image square order.
    File(PathBuf),
}

/// Which edge of the image White sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    Bottom,
    Top,
    Left,
    Right,
}

impl Orientation {
    /// Rectified-image square shown at board square `b` (a8 = 0).
    pub fn image_square(self, b: usize) -> usize {
        let (r, c) = (b / 8, b % 8);
        match self {
            Orientation::Bottom => b,
            Orientation::Top => 63 - b,
            Orientation::Left => c * 8 + (7 - r),
            Orientation::Right => (7 - c) * 8 + r,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Orientation::Bottom => "bottom",
            Orientation::Top => "top",
            Orientation::Left => "left",
            Orientation::Right => "right",
        }
    }
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bottom" => Ok(Self::Bottom),
            "top" => Ok(Self::Top),
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            _ => Err(format!("expected bottom, top, left or right, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub backend: BackendChoice,
    pub baseline: BaselineParams,
    pub white_side: Orientation,
    pub max_iters: usize,
    pub patch_size: usize,
    pub tau_contrast: f64,
    pub check_tolerance: usize,
    pub dispatch_threshold: usize,
    pub out_px: usize,
    pub top_extension: f64,
    /// Watch-mode polling period, seconds.
    pub period_s: f64,
    /// Reject non-canonical FEN when validating output.
    pub strict_fen: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            backend: BackendChoice::Baseline,
            baseline: BaselineParams::default(),
            white_side: Orientation::Bottom,
            max_iters: 5,
            patch_size: DEFAULT_PATCH_SIZE,
            tau_contrast: DEFAULT_TAU,
            check_tolerance: DEFAULT_CHECK_TOLERANCE,
            dispatch_threshold: DEFAULT_DISPATCH_THRESHOLD,
            out_px: 224,
            top_extension: 0.0,
            period_s: 5.0,
            strict_fen: true,
        }
    }
}

const KEYS: [&str; 17] = [
    "classifier",
    "probs_file",
    "white_side",
    "max_iters",
    "patch_size",
    "tau_contrast",
    "check_tolerance",
    "dispatch_threshold",
    "out_px",
    "top_extension",
    "period_s",
    "fen_mode",
    "baseline.edge_threshold",
    "baseline.occupancy_midpoint",
    "baseline.occupancy_slope",
    "baseline.color_scale",
    "baseline.template_sigma",
];

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, format!("not a number: `{value}`")))
}

fn in_range<T: PartialOrd + std::fmt::Display + Copy>(key: &str, v: T, lo: T, hi: T) -> Result<T, ConfigError> {
    if v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(bad(key, format!("{v} outside [{lo}, {hi}]")))
    }
}

impl PipelineConfig {
    /// Parses `key = value` lines; `#` starts a comment. Keys not given keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut classifier: Option<String> = None;
        let mut probs: Option<PathBuf> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            };
            if seen.contains(&known) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(known);
            match known {
                "classifier" => classifier = Some(value.to_string()),
                "probs_file" => probs = Some(PathBuf::from(value)),
                "white_side" => cfg.white_side = value.parse().map_err(|m: String| bad(key, m))?,
                "max_iters" => cfg.max_iters = in_range(key, number(key, value)?, 1, 20)?,
                "patch_size" => {
                    let p: usize = in_range(key, number(key, value)?, 5, 63)?;
                    if p.is_multiple_of(2) {
                        return Err(bad(key, "must be odd"));
                    }
                    cfg.patch_size = p;
                }
                "tau_contrast" => cfg.tau_contrast = in_range(key, number(key, value)?, 0.01, 0.9)?,
                "check_tolerance" => cfg.check_tolerance = in_range(key, number(key, value)?, 0, 49)?,
                "dispatch_threshold" => cfg.dispatch_threshold = in_range(key, number(key, value)?, 1, 1_000_000)?,
                "out_px" => cfg.out_px = in_range(key, number(key, value)?, 16, 1024)?,
                "top_extension" => cfg.top_extension = in_range(key, number(key, value)?, 0.0, 1.0)?,
                "period_s" => cfg.period_s = in_range(key, number(key, value)?, 0.01, 86_400.0)?,
                "fen_mode" => {
                    cfg.strict_fen = match value {
                        "strict" => true,
                        "lenient" => false,
                        _ => return Err(bad(key, format!("expected strict or lenient, got `{value}`"))),
                    }
                }
                "baseline.edge_threshold" => cfg.baseline.edge_threshold = in_range(key, number(key, value)?, 1.0, 255.0)?,
                "baseline.occupancy_midpoint" => {
                    cfg.baseline.occupancy_midpoint = in_range(key, number(key, value)?, 0.0, 1.0)?
                }
                "baseline.occupancy_slope" => cfg.baseline.occupancy_slope = in_range(key, number(key, value)?, 1e-4, 1.0)?,
                "baseline.color_scale" => cfg.baseline.color_scale = in_range(key, number(key, value)?, 0.1, 255.0)?,
                "baseline.template_sigma" => cfg.baseline.template_sigma = in_range(key, number(key, value)?, 1e-3, 1.0)?,
                _ => unreachable!("every known key is handled"),
            }
        }
        cfg.backend = match (classifier.as_deref(), probs) {
            (None | Some("baseline"), None) => BackendChoice::Baseline,
            (Some("baseline"), Some(_)) => return Err(bad("probs_file", "only valid with classifier = file")),
            (None | Some("file"), Some(p)) => BackendChoice::File(p),
            (Some("file"), None) => return Err(bad("classifier", "file backend needs probs_file")),
            (Some(other), _) => return Err(bad("classifier", format!("expected baseline or file, got `{other}`"))),
        };
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Text that [`PipelineConfig::parse`] reads back to `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.backend {
            BackendChoice::Baseline => out.push_str("classifier = baseline\n"),
            BackendChoice::File(p) => out.push_str(&format!("classifier = file\nprobs_file = {}\n", p.display())),
        }
        let b = &self.baseline;
        out.push_str(&format!(
            "white_side = {}\nmax_iters = {}\npatch_size = {}\ntau_contrast = {}\ncheck_tolerance = {}\n\
             dispatch_threshold = {}\nout_px = {}\ntop_extension = {}\nperiod_s = {}\nfen_mode = {}\n\
             baseline.edge_threshold = {}\nbaseline.occupancy_midpoint = {}\nbaseline.occupancy_slope = {}\n\
             baseline.color_scale = {}\nbaseline.template_sigma = {}\n",
            self.white_side.name(),
            self.max_iters,
            self.patch_size,
            self.tau_contrast,
            self.check_tolerance,
            self.dispatch_threshold,
            self.out_px,
            self.top_extension,
            self.period_s,
            if self.strict_fen { "strict" } else { "lenient" },
            b.edge_threshold,
            b.occupancy_midpoint,
            b.occupancy_slope,
            b.color_scale,
            b.template_sigma,
        ));
        out
    }

    pub fn patch_test(&self) -> PatchTest {
        PatchTest {
            patch_size: self.patch_size,
            primary: GeometricDetector { tau: self.tau_contrast },
            secondary: Arc::new(RelaxedDetector {
                tau: self.tau_contrast / 2.0,
                ..RelaxedDetector::default()
            }),
        }
    }

    pub fn locate_config(&self) -> LocateConfig {
        let mut c = LocateConfig {
            max_iters: self.max_iters,
            patch: self.patch_test(),
            ..LocateConfig::default()
        };
        c.intersections.threshold = self.dispatch_threshold;
        c
    }
}
