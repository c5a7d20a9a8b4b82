//! X-corner tests on small neighborhoods of candidate lattice points.

use std::f64::consts::PI;

use crate::geometry::Point2;
use crate::raster::GrayImage;

pub const DEFAULT_PATCH_SIZE: usize = 21;
pub const DEFAULT_TAU: f64 = 0.15;

/// Intensities below this range are not stretched to full scale.
const CONTRAST_FLOOR: f32 = 0.08;

/// A square neighborhood resampled along two axes and preprocessed.
///
/// Holds the contrast-normalized intensities and a binarized Sobel
/// magnitude of them, both in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePatch {
    size: usize,
    intensity: Vec<f32>,
    edges: Vec<f32>,
}

impl LatticePatch {
    /// Samples `size x size` points `center + (i - r) u + (j - r) v`,
    /// clamping at the image border. `size` must be odd and at least 3.
    pub fn sample(gray: &GrayImage, center: Point2, u: Point2, v: Point2, size: usize) -> Self {
        assert!(size % 2 == 1 && size >= 3, "patch side must be odd and >= 3");
        let r = (size / 2) as f64;
        let (xmax, ymax) = ((gray.width - 1) as f64, (gray.height - 1) as f64);
        let mut raw = Vec::with_capacity(size * size);
        for j in 0..size {
            for i in 0..size {
                let p = center + u * (i as f64 - r) + v * (j as f64 - r);
                let (x, y) = (p.x.clamp(0.0, xmax), p.y.clamp(0.0, ymax));
                raw.push(gray.sample(x, y).unwrap_or(0.0));
            }
        }
        Self::from_raw(size, raw)
    }

    /// Axis-aligned patch with one-pixel steps.
    pub fn axis_aligned(gray: &GrayImage, center: Point2, size: usize) -> Self {
        Self::sample(gray, center, Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), size)
    }

    /// Preprocesses raw intensities.
    pub fn from_raw(size: usize, raw: Vec<f32>) -> Self {
        assert_eq!(raw.len(), size * size);
        let mut sorted = raw.clone();
        sorted.sort_by(f32::total_cmp);
        let lo = sorted[sorted.len() / 50];
        let hi = sorted[sorted.len() - 1 - sorted.len() / 50];
        let range = (hi - lo).max(CONTRAST_FLOOR);
        let mid = (hi + lo) / 2.0;
        let intensity: Vec<f32> = raw.iter().map(|v| ((v - mid) / range + 0.5).clamp(0.0, 1.0)).collect();

        let at = |x: isize, y: isize| {
            let x = x.clamp(0, size as isize - 1) as usize;
            let y = y.clamp(0, size as isize - 1) as usize;
            intensity[y * size + x]
        };
        let mut mag = vec![0.0f32; size * size];
        for y in 0..size as isize {
            for x in 0..size as isize {
                let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                    - at(x - 1, y - 1)
                    - 2.0 * at(x - 1, y)
                    - at(x - 1, y + 1);
                let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                    - at(x - 1, y - 1)
                    - 2.0 * at(x, y - 1)
                    - at(x + 1, y - 1);
                mag[y as usize * size + x as usize] = gx.hypot(gy);
            }
        }
        let peak = mag.iter().copied().fold(0.0f32, f32::max);
        let edges = mag
            .iter()
            .map(|&m| if peak > 0.5 && m >= 0.5 * peak { 1.0 } else { 0.0 })
            .collect();
        Self { size, intensity, edges }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn intensity(&self) -> &[f32] {
        &self.intensity
    }

    pub fn edges(&self) -> &[f32] {
        &self.edges
    }

    fn at(&self, x: usize, y: usize) -> f32 {
        self.intensity[y * self.size + x]
    }

    /// Means of the four quadrants (TL, TR, BL, BR), center row and column
    /// excluded, and the mean of the whole patch.
    fn quadrant_means(&self) -> ([f64; 4], f64) {
        let r = self.size / 2;
        let mut sums = [0.0f64; 4];
        let mut counts = [0usize; 4];
        let mut total = 0.0;
        for y in 0..self.size {
            for x in 0..self.size {
                let v = self.at(x, y) as f64;
                total += v;
                if x == r || y == r {
                    continue;
                }
                let q = (y > r) as usize * 2 + (x > r) as usize;
                sums[q] += v;
                counts[q] += 1;
            }
        }
        (
            std::array::from_fn(|q| sums[q] / counts[q] as f64),
            total / (self.size * self.size) as f64,
        )
    }

    /// Same as [`Self::quadrant_means`] with the quadrant boundaries on the
    /// diagonals (top, right, bottom, left wedges).
    fn wedge_means(&self) -> [f64; 4] {
        let r = (self.size / 2) as isize;
        let mut sums = [0.0f64; 4];
        let mut counts = [0usize; 4];
        for y in 0..self.size as isize {
            for x in 0..self.size as isize {
                let (dx, dy) = (x - r, y - r);
                if dx.abs() == dy.abs() {
                    continue;
                }
                let q = if dy.abs() > dx.abs() {
                    if dy < 0 {
                        0
                    } else {
                        2
                    }
                } else if dx > 0 {
                    1
                } else {
                    3
                };
                sums[q] += self.at(x as usize, y as usize) as f64;
                counts[q] += 1;
            }
        }
        std::array::from_fn(|q| sums[q] / counts[q].max(1) as f64)
    }

    /// Sign changes of the intensity around a circle about the center,
    /// thresholded at the patch midpoint.
    pub fn ring_crossings(&self, radius_fraction: f64) -> usize {
        let r = (self.size / 2) as f64;
        let radius = r * radius_fraction;
        let samples = 64;
        let signs: Vec<bool> = (0..samples)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / samples as f64;
                let (x, y) = (r + radius * a.cos(), r + radius * a.sin());
                self.bilinear(x, y) >= 0.5
            })
            .collect();
        (0..samples).filter(|&k| signs[k] != signs[(k + 1) % samples]).count()
    }

    fn bilinear(&self, x: f64, y: f64) -> f32 {
        let max = (self.size - 1) as f64;
        let (x, y) = (x.clamp(0.0, max), y.clamp(0.0, max));
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.size - 1), (y0 + 1).min(self.size - 1));
        let (fx, fy) = ((x - x0 as f64) as f32, (y - y0 as f64) as f32);
        let top = self.at(x0, y0) + (self.at(x1, y0) - self.at(x0, y0)) * fx;
        let bottom = self.at(x0, y1) + (self.at(x1, y1) - self.at(x0, y1)) * fx;
        top + (bottom - top) * fy
    }
}

/// How far the diagonal pairs sit on opposite sides of `mean`; positive
/// when the pattern holds either way round.
fn diagonal_margin(q: [f64; 4], mean: f64, a: (usize, usize), b: (usize, usize)) -> f64 {
    let high = |p: (usize, usize)| q[p.0].min(q[p.1]) - mean;
    let low = |p: (usize, usize)| mean - q[p.0].max(q[p.1]);
    high(a).min(low(b)).max(high(b).min(low(a)))
}

/// A yes/no test for whether a patch shows a board lattice point.
pub trait LatticeDetector: Send + Sync {
    fn name(&self) -> &str;
    fn is_lattice_point(&self, patch: &LatticePatch) -> bool;
}

/// Quadrant-contrast X-corner test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricDetector {
    pub tau: f64,
}

impl Default for GeometricDetector {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU }
    }
}

impl GeometricDetector {
    pub fn margin(patch: &LatticePatch) -> f64 {
        let (q, mean) = patch.quadrant_means();
        diagonal_margin(q, mean, (0, 3), (1, 2))
    }
}

impl LatticeDetector for GeometricDetector {
    fn name(&self) -> &str {
        "geometric"
    }

    fn is_lattice_point(&self, patch: &LatticePatch) -> bool {
        Self::margin(patch) >= self.tau
    }
}

/// Fallback test: the quadrant test at a lower threshold, in either the
/// axis-aligned or the diagonal split, plus exactly four light/dark
/// transitions on a ring around the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedDetector {
    pub tau: f64,
    pub ring_radius: f64,
}

impl Default for RelaxedDetector {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU / 2.0,
            ring_radius: 0.6,
        }
    }
}

impl LatticeDetector for RelaxedDetector {
    fn name(&self) -> &str {
        "relaxed"
    }

    fn is_lattice_point(&self, patch: &LatticePatch) -> bool {
        let (q, mean) = patch.quadrant_means();
        let axis = diagonal_margin(q, mean, (0, 3), (1, 2));
        let w = patch.wedge_means();
        let wedge = diagonal_margin(w, mean, (0, 2), (1, 3));
        axis.max(wedge) >= self.tau && patch.ring_crossings(self.ring_radius) == 4
    }
}

/// The quadrant test at the default threshold.
pub fn geometric_detector(patch: &LatticePatch) -> bool {
    GeometricDetector::default().is_lattice_point(patch)
}

/// The built-in fallback at the default threshold.
pub fn secondary_detector(patch: &LatticePatch) -> bool {
    RelaxedDetector::default().is_lattice_point(patch)
}

/// Moves `p` to the saddle point of `gray` nearby: the point `q` minimizing
/// the sum over a window of `(g_i . (q - x_i))^2`, where `g_i` is the
/// gradient at pixel `x_i`. Returns `p` unchanged if the system is
/// ill-conditioned or the estimate wanders off.
pub fn refine_corner(gray: &GrayImage, gx: &[f32], gy: &[f32], p: Point2, radius: usize, iterations: usize) -> Point2 {
    let (w, h) = (gray.width as isize, gray.height as isize);
    let r = radius as isize;
    let sigma = radius as f64 / 1.5;
    let mut q = p;
    for _ in 0..iterations {
        let (cx, cy) = (q.x.round() as isize, q.y.round() as isize);
        let (mut a, mut b, mut c, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if x < 0 || y < 0 || x >= w || y >= h {
                    continue;
                }
                let i = (y * w + x) as usize;
                let (dx, dy) = (gx[i] as f64, gy[i] as f64);
                let d2 = ((x as f64 - q.x).powi(2) + (y as f64 - q.y).powi(2)) / (2.0 * sigma * sigma);
                let wt = (-d2).exp();
                let (gxx, gxy, gyy) = (dx * dx * wt, dx * dy * wt, dy * dy * wt);
                a += gxx;
                b += gxy;
                c += gyy;
                bx += gxx * x as f64 + gxy * y as f64;
                by += gxy * x as f64 + gyy * y as f64;
            }
        }
        let det = a * c - b * b;
        if det <= 1e-12 * (a + c).powi(2).max(1e-300) {
            return p;
        }
        let next = Point2::new((c * bx - b * by) / det, (a * by - b * bx) / det);
        if !next.is_finite() || next.dist(p) > radius as f64 {
            return p;
        }
        let moved = next.dist(q);
        q = next;
        if moved < 0.01 {
            break;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_corner(size: usize, blur: f64, offset: (f64, f64)) -> LatticePatch {
        let r = (size / 2) as f64;
        let raw: Vec<f32> = (0..size * size)
            .map(|k| {
                let (x, y) = ((k % size) as f64 - r - offset.0, (k / size) as f64 - r - offset.1);
                let s = |t: f64| 0.5 * (1.0 + libm_erf(t / (blur.max(1e-9) * 2f64.sqrt())));
                let (sx, sy) = (s(x), s(y));
                // Product of two smoothed steps: light where signs agree.
                (sx * sy + (1.0 - sx) * (1.0 - sy)) as f32 * 0.6 + 0.2
            })
            .collect();
        LatticePatch::from_raw(size, raw)
    }

    /// Abramowitz-Stegun 7.1.26, adequate for building test patterns.
    fn libm_erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t + 0.254829592)
                * t
                * (-x * x).exp();
        y.copysign(x)
    }

    #[test]
    fn ideal_x_corner_passes_both() {
        let p = x_corner(21, 0.3, (0.0, 0.0));
        assert!(geometric_detector(&p));
        assert!(secondary_detector(&p));
        assert_eq!(p.ring_crossings(0.6), 4);
    }

    #[test]
    fn flat_patch_fails_both() {
        let p = LatticePatch::from_raw(21, vec![0.5; 441]);
        assert!(!geometric_detector(&p));
        assert!(!secondary_detector(&p));
        assert!(p.intensity().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn straight_edge_fails_both() {
        let raw: Vec<f32> = (0..441).map(|k| if k % 21 < 10 { 0.2 } else { 0.8 }).collect();
        let p = LatticePatch::from_raw(21, raw);
        assert!(!geometric_detector(&p));
        assert!(!secondary_detector(&p));
    }

    #[test]
    fn blurred_corner_needs_the_fallback() {
        // Found by scanning blur widths for one between the two thresholds.
        let p = (1..200)
            .map(|k| x_corner(21, k as f64 * 0.1, (2.5, 2.5)))
            .find(|p| {
                let m = GeometricDetector::margin(p);
                (DEFAULT_TAU / 2.0..DEFAULT_TAU).contains(&m)
            })
            .expect("a blur level between the thresholds");
        assert!(!geometric_detector(&p));
        assert!(secondary_detector(&p));
    }

    #[test]
    fn patch_values_in_unit_range() {
        let p = x_corner(21, 1.0, (0.0, 0.0));
        assert!(p.intensity().iter().chain(p.edges()).all(|v| (0.0..=1.0).contains(v)));
        assert!(p.edges().contains(&1.0));
    }

    #[test]
    fn refine_finds_saddle() {
        let (w, h) = (40usize, 40usize);
        let (cx, cy) = (20.3, 18.7);
        let mut g = GrayImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                // Area coverage from 8x8 subsamples keeps the subpixel position.
                let mut v = 0.0;
                for sy in 0..8 {
                    for sx in 0..8 {
                        let px = x as f64 + (sx as f64 + 0.5) / 8.0 - 0.5;
                        let py = y as f64 + (sy as f64 + 0.5) / 8.0 - 0.5;
                        v += ((px - cx) * (py - cy)).signum() / 64.0;
                    }
                }
                g.data[y * w + x] = 0.5 + 0.3 * v as f32;
            }
        }
        let g = g.blur(1.5);
        let (gx, gy) = g.sobel();
        let q = refine_corner(&g, &gx, &gy, Point2::new(21.0, 20.0), 5, 20);
        assert!(q.dist(Point2::new(cx, cy)) < 0.15, "{q:?}");
    }
}
