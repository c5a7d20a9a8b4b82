//! Straight line candidates from a gradient-restricted Hough transform.

use std::f64::consts::PI;

use super::DetectError;
use crate::geometry::{Point2, Segment2};
use crate::raster::GrayImage;

pub const MIN_IMAGE_SIDE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LineConfig {
    /// Pre-blur before differentiation, pixels.
    pub blur_sigma: f64,
    /// Absolute floor on the Sobel magnitude of an edge pixel (gray in 0..1).
    pub min_edge: f32,
    /// Edge threshold relative to the 99.5th percentile magnitude.
    pub relative_edge: f32,
    pub theta_step_deg: f64,
    pub rho_step: f64,
    /// Each edge pixel votes only within this angle of its gradient normal.
    pub vote_window_deg: f64,
    /// Minimum votes as a fraction of the shorter image side.
    pub min_votes_fraction: f64,
    /// Peaks closer than this to a stronger one are dropped.
    pub nms_theta_deg: f64,
    pub nms_rho: f64,
    pub max_lines: usize,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            blur_sigma: 1.0,
            min_edge: 0.2,
            relative_edge: 0.2,
            theta_step_deg: 0.5,
            rho_step: 1.0,
            vote_window_deg: 5.0,
            min_votes_fraction: 1.0 / 8.0,
            nms_theta_deg: 2.0,
            nms_rho: 5.0,
            max_lines: 128,
        }
    }
}

/// A Hough peak: the line `x cos(theta) + y sin(theta) = rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughLine {
    pub theta: f64,
    pub rho: f64,
    pub votes: u32,
}

impl HoughLine {
    /// The part of the line inside `[0, w-1] x [0, h-1]`, if any.
    pub fn clip(&self, w: usize, h: usize) -> Option<Segment2> {
        let (s, c) = self.theta.sin_cos();
        let (xmax, ymax) = ((w - 1) as f64, (h - 1) as f64);
        let mut pts: Vec<Point2> = Vec::with_capacity(4);
        if s.abs() > 1e-12 {
            for x in [0.0, xmax] {
                let y = (self.rho - x * c) / s;
                if (0.0..=ymax).contains(&y) {
                    pts.push(Point2::new(x, y));
                }
            }
        }
        if c.abs() > 1e-12 {
            for y in [0.0, ymax] {
                let x = (self.rho - y * s) / c;
                if (0.0..=xmax).contains(&x) {
                    pts.push(Point2::new(x, y));
                }
            }
        }
        // Farthest pair, in case a corner was hit twice.
        let mut best: Option<(f64, Point2, Point2)> = None;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = pts[i].dist(pts[j]);
                if best.is_none_or(|b| d > b.0) {
                    best = Some((d, pts[i], pts[j]));
                }
            }
        }
        best.and_then(|(_, a, b)| Segment2::new(a, b).ok())
    }
}

/// Hough peaks of `gray`, strongest first.
pub fn hough_lines(gray: &GrayImage, config: &LineConfig) -> Result<Vec<HoughLine>, DetectError> {
    let (w, h) = (gray.width, gray.height);
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(DetectError::ImageTooSmall { width: w, height: h });
    }
    let blurred = gray.blur(config.blur_sigma);
    let (gx, gy) = blurred.sobel();
    let mag: Vec<f32> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let mut sorted = mag.clone();
    let k = ((sorted.len() as f64) * 0.995) as usize;
    let q = *sorted.select_nth_unstable_by(k.min(mag.len() - 1), f32::total_cmp).1;
    let threshold = config.min_edge.max(config.relative_edge * q);

    let n_theta = (180.0 / config.theta_step_deg).round() as usize;
    // Bin 0 sits at -offset, a whole number of steps, so rho = 0 is a bin center.
    let offset = ((w as f64).hypot(h as f64) / config.rho_step).ceil() * config.rho_step;
    let n_rho = (2.0 * offset / config.rho_step).round() as usize + 1;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| (t as f64 * config.theta_step_deg).to_radians().sin_cos())
        .collect();
    let window = (config.vote_window_deg / config.theta_step_deg).round() as isize;
    let mut acc = vec![0u32; n_theta * n_rho];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if mag[i] <= threshold {
                continue;
            }
            let normal = (gy[i] as f64).atan2(gx[i] as f64).rem_euclid(PI);
            let center = (normal.to_degrees() / config.theta_step_deg).round() as isize;
            for dt in -window..=window {
                let t = (center + dt).rem_euclid(n_theta as isize) as usize;
                let (s, c) = trig[t];
                let rho = x as f64 * c + y as f64 * s;
                let r = ((rho + offset) / config.rho_step).round() as usize;
                acc[t * n_rho + r] += 1;
            }
        }
    }

    let min_votes = ((w.min(h) as f64) * config.min_votes_fraction).ceil() as u32;
    let mut peaks: Vec<HoughLine> = Vec::new();
    for t in 0..n_theta {
        for r in 0..n_rho {
            let v = acc[t * n_rho + r];
            if v < min_votes {
                continue;
            }
            let mut is_max = true;
            'nbhd: for dt in -1isize..=1 {
                let tt = (t as isize + dt).rem_euclid(n_theta as isize) as usize;
                for dr in -1isize..=1 {
                    let rr = r as isize + dr;
                    if (dt, dr) == (0, 0) || rr < 0 || rr >= n_rho as isize {
                        continue;
                    }
                    let u = acc[tt * n_rho + rr as usize];
                    // Strict on one side so plateaus yield one peak.
                    if u > v || (u == v && (dt, dr) < (0, 0)) {
                        is_max = false;
                        break 'nbhd;
                    }
                }
            }
            if is_max {
                // Vote-weighted centroid over the neighbouring rho bins.
                let (mut sw, mut sr) = (0.0, 0.0);
                for rr in r.saturating_sub(2)..=(r + 2).min(n_rho - 1) {
                    let u = acc[t * n_rho + rr] as f64;
                    sw += u;
                    sr += u * rr as f64;
                }
                peaks.push(HoughLine {
                    theta: (t as f64 * config.theta_step_deg).to_radians(),
                    rho: (sr / sw) * config.rho_step - offset,
                    votes: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.votes.cmp(&a.votes).then(a.theta.total_cmp(&b.theta)).then(a.rho.total_cmp(&b.rho)));

    let nms_theta = config.nms_theta_deg.to_radians();
    let mut kept: Vec<HoughLine> = Vec::new();
    for p in peaks {
        let close = kept.iter().any(|k| {
            let dt = (p.theta - k.theta).abs();
            (dt <= nms_theta && (p.rho - k.rho).abs() <= config.nms_rho)
                || (PI - dt <= nms_theta && (p.rho + k.rho).abs() <= config.nms_rho)
        });
        if !close {
            kept.push(p);
            if kept.len() == config.max_lines {
                break;
            }
        }
    }
    Ok(kept)
}

/// Candidate board lines as segments clipped to the image, strongest first.
pub fn detect_lines_with(gray: &GrayImage, config: &LineConfig) -> Result<Vec<Segment2>, DetectError> {
    let (w, h) = (gray.width, gray.height);
    Ok(hough_lines(gray, config)?.iter().filter_map(|l| l.clip(w, h)).collect())
}
