//! Heuristic square classifier for end-to-end runs without a trained model.
//!
//! Occupancy comes from edge density in the middle of the square, color from
//! the silhouette's 90th-percentile intensity against the border background, and piece type from
//! a coarse silhouette profile matched against fixed templates. The factors
//! are combined as log-scores and passed through a softmax, so the output is
//! always a proper distribution.

use super::{ClassifierBackend, Color, PieceClass, PieceKind, SquareProbabilities, NUM_CLASSES};
use crate::raster::Image;

/// Silhouette measurements of a square image, in square-side units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareFeatures {
    /// Fraction of strong-gradient pixels in the central region.
    pub edge_density: f64,
    /// 90th percentile of the silhouette minus the background median, gray levels.
    pub contrast: f64,
    /// Silhouette height.
    pub height: f64,
    /// Mean foreground width in the top, middle and bottom thirds, divided by `height`.
    pub profile: [f64; 3],
}

/// Expected silhouette measurements for one piece kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Template {
    pub kind: PieceKind,
    pub height: f64,
    pub profile: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    /// Sobel magnitude counted as an edge.
    pub edge_threshold: f32,
    /// Edge density at which a square is even odds occupied.
    pub occupancy_midpoint: f64,
    pub occupancy_slope: f64,
    /// Gray-level scale of the color logistic.
    pub color_scale: f64,
    /// Bounds on the |pixel - background| foreground threshold, which
    /// otherwise follows the background noise.
    pub min_foreground_delta: f32,
    pub max_foreground_delta: f32,
    /// Spread of the template distance, in feature units.
    pub template_sigma: f64,
    pub templates: Vec<Template>,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            edge_threshold: 40.0,
            occupancy_midpoint: 0.04,
            occupancy_slope: 0.008,
            color_scale: 8.0,
            min_foreground_delta: 14.0,
            max_foreground_delta: 28.0,
            template_sigma: 0.08,
            templates: default_templates(),
        }
    }
}

fn default_templates() -> Vec<Template> {
    let t = |kind, height, profile| Template { kind, height, profile };
    vec![
        t(PieceKind::King, 0.72, [0.23, 0.29, 0.46]),
        t(PieceKind::Queen, 0.65, [0.33, 0.29, 0.50]),
        t(PieceKind::Rook, 0.56, [0.61, 0.58, 0.66]),
        t(PieceKind::Bishop, 0.61, [0.23, 0.27, 0.46]),
        t(PieceKind::Knight, 0.56, [0.41, 0.48, 0.62]),
        t(PieceKind::Pawn, 0.48, [0.38, 0.41, 0.67]),
    ]
}

/// `mask` plus every pixel of the region not connected to the region border
/// through unmasked pixels.
fn fill_holes(mask: &[bool], w: usize, (x0, x1, y0, y1): (usize, usize, usize, usize)) -> Vec<bool> {
    let mut outside = vec![false; mask.len()];
    let mut stack = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            let border = x == x0 || x + 1 == x1 || y == y0 || y + 1 == y1;
            if border && !mask[y * w + x] {
                outside[y * w + x] = true;
                stack.push((x, y));
            }
        }
    }
    while let Some((x, y)) = stack.pop() {
        let mut visit = |nx: usize, ny: usize| {
            let i = ny * w + nx;
            if !mask[i] && !outside[i] {
                outside[i] = true;
                stack.push((nx, ny));
            }
        };
        if x > x0 {
            visit(x - 1, y);
        }
        if x + 1 < x1 {
            visit(x + 1, y);
        }
        if y > y0 {
            visit(x, y - 1);
        }
        if y + 1 < y1 {
            visit(x, y + 1);
        }
    }
    let mut solid = vec![false; mask.len()];
    for y in y0..y1 {
        for x in x0..x1 {
            solid[y * w + x] = !outside[y * w + x];
        }
    }
    solid
}

/// Median of a non-empty sample (upper median for even counts).
fn median(v: &mut [f32]) -> f32 {
    let mid = v.len() / 2;
    *v.select_nth_unstable_by(mid, f32::total_cmp).1
}

pub fn square_features(square: &Image, params: &BaselineParams) -> SquareFeatures {
    let mut gray = square.to_gray();
    gray.data.iter_mut().for_each(|v| *v *= 255.0);
    let (w, h) = (gray.width, gray.height);
    let (wf, hf) = (w as f64, h as f64);
    // The square itself is the bottom `w` rows when the crop is extended upward.
    let side = wf.min(hf);
    let y_board = h - (w.min(h));

    // Background ring: a band just inside the square edge, clear of the
    // blurred boundary with neighbors.
    let outer = ((side * 0.04).round() as usize).max(1);
    let inner = ((side * 0.10).round() as usize).max(outer + 1);
    let mut ring: Vec<f32> = Vec::new();
    for y in y_board + outer..h.saturating_sub(outer) {
        for x in outer..w.saturating_sub(outer) {
            let (dx, dy) = (x.min(w - 1 - x), (y - y_board).min(h - 1 - y));
            if dx.min(dy) < inner {
                ring.push(gray.at(x, y));
            }
        }
    }
    let bg = median(&mut ring);
    let mut dev: Vec<f32> = ring.iter().map(|v| (v - bg).abs()).collect();
    let noise = median(&mut dev) * 1.4826;
    let threshold = params.min_foreground_delta.max((4.0 * noise).min(params.max_foreground_delta));

    let (gx, gy) = gray.sobel();
    let region = |fx0: f64, fx1: f64, fy0: f64, fy1: f64| {
        let x0 = (fx0 * side) as usize;
        let x1 = ((fx1 * side) as usize).min(w);
        let y0 = y_board + (fy0 * side) as usize;
        let y1 = (y_board + (fy1 * side) as usize).min(h);
        (x0, x1, y0, y1)
    };
    let (x0, x1, y0, y1) = region(0.2, 0.8, 0.05, 0.88);
    let mut edges = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let i = y * w + x;
            if gx[i].hypot(gy[i]) > params.edge_threshold {
                edges += 1;
            }
        }
    }
    let edge_density = edges as f64 / ((x1 - x0) * (y1 - y0)).max(1) as f64;

    let (mx0, mx1, my0, my1) = region(0.1, 0.9, 0.06, 0.95);
    let fg = |x: usize, y: usize| (gray.at(x, y) - bg).abs() > threshold;
    let mut rows: Vec<(usize, usize)> = Vec::new(); // (y, count)
    let mut mask = vec![false; w * h];
    for y in my0..my1 {
        let mut count = 0usize;
        for x in mx0..mx1 {
            if fg(x, y) {
                mask[y * w + x] = true;
                count += 1;
            }
        }
        rows.push((y, count));
    }
    let min_row = ((mx1 - mx0) as f64 * 0.04).max(1.0) as usize;
    let occupied_rows: Vec<&(usize, usize)> = rows.iter().filter(|r| r.1 >= min_row).collect();

    // Color from the filled silhouette: enclosed holes count (a pale fill may
    // not clear the threshold while its outline does). On small squares the
    // dark outline can cover most of the silhouette, so the brightest tenth
    // is what separates a light fill from a dark one.
    let solid = fill_holes(&mask, w, (mx0, mx1, my0, my1));
    let mut interior: Vec<f32> = (my0..my1)
        .flat_map(|y| (mx0..mx1).map(move |x| (x, y)))
        .filter(|&(x, y)| solid[y * w + x])
        .map(|(x, y)| gray.at(x, y) - bg)
        .collect();
    let contrast = if interior.is_empty() {
        0.0
    } else {
        let q = interior.len() * 9 / 10;
        *interior.select_nth_unstable_by(q, f32::total_cmp).1 as f64
    };

    let (height, profile) = match (occupied_rows.first(), occupied_rows.last()) {
        (Some(top), Some(bottom)) if bottom.0 > top.0 => {
            let (top, bottom) = (top.0, bottom.0);
            let span = (bottom - top + 1) as f64;
            let mut width = [0.0; 3];
            let mut n = [0usize; 3];
            for &(y, count) in &rows {
                if y < top || y > bottom {
                    continue;
                }
                let rel = (y - top) as f64 / span;
                let bin = ((rel * 3.0) as usize).min(2);
                width[bin] += count as f64;
                n[bin] += 1;
            }
            let height = span / side;
            let profile = std::array::from_fn(|b| width[b] / n[b].max(1) as f64 / side / height);
            (height, profile)
        }
        _ => (0.0, [0.0; 3]),
    };
    SquareFeatures {
        edge_density,
        contrast,
        height,
        profile,
    }
}

fn log_sigmoid(z: f64) -> f64 {
    -(1.0 + (-z).exp()).ln()
}

/// Class probabilities for one square image.
pub fn baseline_classifier(square: &Image, params: &BaselineParams) -> SquareProbabilities {
    let f = square_features(square, params);
    let occ = (f.edge_density - params.occupancy_midpoint) / params.occupancy_slope;
    let col = f.contrast / params.color_scale;
    let kind_score = |t: &Template| {
        let mut d2 = ((f.height - t.height) / 0.8).powi(2) * 4.0;
        for b in 0..3 {
            d2 += (f.profile[b] - t.profile[b]).powi(2);
        }
        -d2 / (2.0 * params.template_sigma * params.template_sigma)
    };
    // Log-normalize the kind scores so the softmax factorizes.
    let raw: Vec<(PieceKind, f64)> = params.templates.iter().map(|t| (t.kind, kind_score(t))).collect();
    let max = raw.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    let lse = max + raw.iter().map(|r| (r.1 - max).exp()).sum::<f64>().ln();

    let mut logits = [f64::NEG_INFINITY; NUM_CLASSES];
    logits[PieceClass::Empty.ordinal()] = log_sigmoid(-occ);
    for color in [Color::White, Color::Black] {
        let lc = match color {
            Color::White => log_sigmoid(col),
            Color::Black => log_sigmoid(-col),
        };
        for &(kind, s) in &raw {
            let slot = &mut logits[PieceClass::piece(color, kind).ordinal()];
            let v = log_sigmoid(occ) + lc + s - lse;
            *slot = if slot.is_finite() { (slot.exp() + v.exp()).ln() } else { v };
        }
    }
    for l in logits.iter_mut() {
        if !l.is_finite() {
            *l = -700.0;
        }
    }
    softmax(logits)
}

/// Softmax with temperature 1.
fn softmax(logits: [f64; NUM_CLASSES]) -> SquareProbabilities {
    let max = logits.iter().copied().fold(f64::MIN, f64::max);
    let exp: [f64; NUM_CLASSES] = logits.map(|l| (l - max).exp());
    let sum: f64 = exp.iter().sum();
    SquareProbabilities::normalize(exp.map(|e| e / sum)).expect("softmax output is normalizable")
}

/// Batch backend around [`baseline_classifier`].
#[derive(Debug, Clone, Default)]
pub struct BaselineBackend {
    pub params: BaselineParams,
}

impl BaselineBackend {
    pub fn new(params: BaselineParams) -> Self {
        Self { params }
    }
}

impl ClassifierBackend for BaselineBackend {
    fn name(&self) -> &str {
        "baseline"
    }

    fn classify_batch(&self, squares: &[Image]) -> Result<Vec<[f64; NUM_CLASSES]>, String> {
        squares
            .iter()
            .map(|sq| {
                if sq.width() < 16 || sq.height() < 16 {
                    return Err(format!("square image {}x{} is below 16x16", sq.width(), sq.height()));
                }
                Ok(*baseline_classifier(sq, &self.params).as_array())
            })
            .collect()
    }
}
