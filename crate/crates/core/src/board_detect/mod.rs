//! Finding the board in an image, re-checking a known location, and cutting
//! the rectified board into squares.
//!
//! Board coordinates used throughout: the unit square with (0, 0) at the
//! top-left board corner; "lattice" coordinates are the same scaled by 8, so
//! the interior lattice points sit at integer (i, j) with 1 <= i, j <= 7.

mod lattice;
mod lines;
mod locate;

use std::sync::Arc;

use thiserror::Error;

pub use lattice::{
    geometric_detector, refine_corner, secondary_detector, GeometricDetector, LatticeDetector, LatticePatch,
    RelaxedDetector, DEFAULT_PATCH_SIZE, DEFAULT_TAU,
};
pub use lines::{detect_lines_with, hough_lines, HoughLine, LineConfig, MIN_IMAGE_SIDE};
pub use locate::{locate_board, locate_board_traced, IterationTrace};

use crate::geometry::{homography_from_quad, warp, GeometryError, Homography, IntersectionConfig, Point2, Segment2};
use crate::raster::{GrayImage, Image};

pub const DEFAULT_CHECK_TOLERANCE: usize = 20;
pub const GRID_POINTS: usize = 49;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("image {width}x{height} is smaller than 64x64")]
    ImageTooSmall { width: usize, height: usize },
    #[error("iteration {iteration}: {found} validated lattice points, need at least 4")]
    DetectionFailed { iteration: usize, found: usize },
    #[error("grid point {index} at ({x}, {y}) lies outside the image")]
    PointOutside { index: usize, x: f64, y: f64 },
    #[error("board corners do not form a convex quadrilateral")]
    NotConvex,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Candidate board lines: [`detect_lines_with`] at default settings.
pub fn detect_lines(image: &Image) -> Result<Vec<Segment2>, DetectError> {
    detect_lines_with(&image.to_gray(), &LineConfig::default())
}

/// Where the board is in an image.
#[derive(Debug, Clone, PartialEq)]
pub struct BoardLocation {
    corners: [Point2; 4],
    rectify: Homography,
}

const UNIT_SQUARE: [Point2; 4] = [
    Point2::new(0.0, 0.0),
    Point2::new(1.0, 0.0),
    Point2::new(1.0, 1.0),
    Point2::new(0.0, 1.0),
];

impl BoardLocation {
    /// From corners clockwise from the top-left (image pixels).
    pub fn from_corners(corners: [Point2; 4]) -> Result<Self, DetectError> {
        if !is_strictly_convex(&corners) {
            return Err(DetectError::NotConvex);
        }
        let rectify = homography_from_quad(&corners, &UNIT_SQUARE)?;
        Ok(Self { corners, rectify })
    }

    /// From a homography taking lattice coordinates (0..8) to image pixels.
    pub fn from_lattice(lattice_to_image: &Homography) -> Result<Self, DetectError> {
        let corners = [(0.0, 0.0), (8.0, 0.0), (8.0, 8.0), (0.0, 8.0)].map(|(u, v)| lattice_to_image.apply(Point2::new(u, v)));
        if !corners.iter().all(|p| p.is_finite()) {
            return Err(DetectError::NotConvex);
        }
        Self::from_corners(corners)
    }

    pub fn corners(&self) -> &[Point2; 4] {
        &self.corners
    }

    /// Image pixels to the unit board square.
    pub fn rectify(&self) -> &Homography {
        &self.rectify
    }

    /// Lattice coordinates (0..8) to image pixels.
    pub fn lattice_to_image(&self) -> Homography {
        self.rectify
            .inverse()
            .expect("rectifying homography is invertible")
            .after(&Homography::scale(0.125, 0.125))
    }

    /// The 49 interior lattice points.
    pub fn grid(&self) -> GridCandidate {
        let g = self.lattice_to_image();
        GridCandidate {
            points: (1..8)
                .flat_map(|j| (1..8).map(move |i| (i, j)))
                .map(|(i, j)| g.apply(Point2::new(i as f64, j as f64)))
                .collect(),
        }
    }

    /// Largest corner displacement from `other`.
    pub fn max_corner_shift(&self, other: &BoardLocation) -> f64 {
        self.corners
            .iter()
            .zip(&other.corners)
            .map(|(a, b)| a.dist(*b))
            .fold(0.0, f64::max)
    }

    /// Corners as one line of 8 decimals: `x0 y0 x1 y1 x2 y2 x3 y3`.
    pub fn to_line(&self) -> String {
        self.corners
            .iter()
            .flat_map(|p| [p.x, p.y])
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_line(text: &str) -> Option<Result<Self, DetectError>> {
        let v: Vec<f64> = text.split_whitespace().map(str::parse).collect::<Result<_, _>>().ok()?;
        if v.len() != 8 || v.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(Self::from_corners(std::array::from_fn(|k| Point2::new(v[2 * k], v[2 * k + 1]))))
    }
}

fn is_strictly_convex(q: &[Point2; 4]) -> bool {
    let turns: Vec<f64> = (0..4)
        .map(|k| {
            let (a, b, c) = (q[k], q[(k + 1) % 4], q[(k + 2) % 4]);
            (b - a).cross(c - b)
        })
        .collect();
    q.iter().all(|p| p.is_finite()) && (turns.iter().all(|&t| t > 0.0) || turns.iter().all(|&t| t < 0.0))
}

/// The 7x7 interior lattice, row-major from the top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCandidate {
    points: Vec<Point2>,
}

impl GridCandidate {
    /// Requires exactly 49 points.
    pub fn new(points: Vec<Point2>) -> Option<Self> {
        (points.len() == GRID_POINTS).then_some(Self { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Sampling axes for the patch at point `k`: unit directions along the
    /// local grid rows and columns, scaled so a 21-sample patch spans at
    /// most 0.45 of a square, and never more than one pixel per step.
    pub fn patch_axes(&self, k: usize, patch_size: usize) -> (Point2, Point2) {
        let (r, c) = (k / 7, k % 7);
        let at = |r: usize, c: usize| self.points[r * 7 + c];
        let du = if c == 0 {
            at(r, 1) - at(r, 0)
        } else if c == 6 {
            at(r, 6) - at(r, 5)
        } else {
            (at(r, c + 1) - at(r, c - 1)) * 0.5
        };
        let dv = if r == 0 {
            at(1, c) - at(0, c)
        } else if r == 6 {
            at(6, c) - at(5, c)
        } else {
            (at(r + 1, c) - at(r - 1, c)) * 0.5
        };
        scaled_axes(du, dv, patch_size)
    }
}

/// Grid directions `du`, `dv` (one square long) rescaled to patch steps.
pub(crate) fn scaled_axes(du: Point2, dv: Point2, patch_size: usize) -> (Point2, Point2) {
    let half = (patch_size / 2).max(1) as f64;
    let axis = |d: Point2| {
        let len = d.norm();
        if len <= 0.0 || !len.is_finite() {
            return None;
        }
        let step = (0.45 * len / half).min(1.0);
        Some(d * (step / len))
    };
    match (axis(du), axis(dv)) {
        (Some(u), Some(v)) => (u, v),
        _ => (Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)),
    }
}

/// Lattice-point tests and patch geometry shared by detection and checking.
#[derive(Clone)]
pub struct PatchTest {
    pub patch_size: usize,
    pub primary: GeometricDetector,
    pub secondary: Arc<dyn LatticeDetector>,
}

impl Default for PatchTest {
    fn default() -> Self {
        Self {
            patch_size: DEFAULT_PATCH_SIZE,
            primary: GeometricDetector::default(),
            secondary: Arc::new(RelaxedDetector::default()),
        }
    }
}

impl std::fmt::Debug for PatchTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PatchTest")
            .field("patch_size", &self.patch_size)
            .field("primary", &self.primary)
            .field("secondary", &self.secondary.name())
            .finish()
    }
}

impl PatchTest {
    /// Primary test, then the secondary on rejection.
    pub fn accepts(&self, patch: &LatticePatch) -> bool {
        self.primary.is_lattice_point(patch) || self.secondary.is_lattice_point(patch)
    }
}

#[derive(Debug, Clone)]
pub struct LocateConfig {
    pub max_iters: usize,
    /// Stop once no corner moves more than this fraction of the image diagonal.
    pub converge_fraction: f64,
    pub lines: LineConfig,
    pub intersections: IntersectionConfig,
    pub patch: PatchTest,
    /// Candidate points closer than this (pixels) are merged.
    pub cluster_radius: f64,
    pub refine_radius: usize,
    /// Side of the rectified working crop of later iterations.
    pub working_px: usize,
    /// Margin around the board in the working crop, in squares.
    pub working_margin: f64,
    /// Largest distance, in squares, between a crop point and the lattice
    /// node it is assigned to.
    pub assign_tolerance: f64,
}

impl Default for LocateConfig {
    fn default() -> Self {
        Self {
            max_iters: 5,
            converge_fraction: 0.002,
            lines: LineConfig::default(),
            intersections: IntersectionConfig::default(),
            patch: PatchTest::default(),
            cluster_radius: 3.0,
            refine_radius: 4,
            working_px: 400,
            working_margin: 1.0,
            assign_tolerance: 0.3,
        }
    }
}

/// Per-point verdicts of the check, in grid order.
pub fn check_grid_points(image: &Image, grid: &GridCandidate, test: &PatchTest) -> Result<Vec<bool>, DetectError> {
    check_grid_points_gray(&image.to_gray(), grid, test)
}

pub(crate) fn check_grid_points_gray(
    gray: &GrayImage,
    grid: &GridCandidate,
    test: &PatchTest,
) -> Result<Vec<bool>, DetectError> {
    let (w, h) = (gray.width as f64, gray.height as f64);
    for (index, p) in grid.points().iter().enumerate() {
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= w - 1.0 && p.y <= h - 1.0) {
            return Err(DetectError::PointOutside { index, x: p.x, y: p.y });
        }
    }
    Ok(grid
        .points()
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let (u, v) = grid.patch_axes(k, test.patch_size);
            test.accepts(&LatticePatch::sample(gray, p, u, v, test.patch_size))
        })
        .collect())
}

/// Whether at least `tolerance` of the 49 grid points still look like
/// lattice points.
pub fn check_board_location(image: &Image, grid: &GridCandidate, tolerance: usize) -> Result<bool, DetectError> {
    check_board_location_with(image, grid, tolerance, &PatchTest::default())
}

pub fn check_board_location_with(
    image: &Image,
    grid: &GridCandidate,
    tolerance: usize,
    test: &PatchTest,
) -> Result<bool, DetectError> {
    let hits = check_grid_points(image, grid, test)?.iter().filter(|&&ok| ok).count();
    Ok(hits >= tolerance)
}

/// Cuts the rectified board into 64 square images, row-major from the
/// top-left. With `top_extension > 0` each crop also covers that fraction of
/// a square above it; the part that would lie above the board's top edge is
/// left black, so all 64 images share one size.
pub fn split_squares(image: &Image, loc: &BoardLocation, out_px: usize, top_extension: f64) -> Result<Vec<Image>, DetectError> {
    let ext = top_extension.max(0.0);
    let ext_px = (ext * out_px as f64).round() as usize;
    let height = out_px + ext_px;
    let s = out_px as f64;
    let mut squares = Vec::with_capacity(64);
    for i in 0..64 {
        let (c, r) = ((i % 8) as f64, (i / 8) as f64);
        let top = r - ext_px as f64 / s;
        // Unit square -> this crop's pixels (centers at integers).
        let h = Homography::translate(-0.5, -0.5)
            .after(&Homography::scale(8.0 * s, 8.0 * s))
            .after(&Homography::translate(-c / 8.0, -top / 8.0))
            .after(loc.rectify());
        let mut sq = warp(image, &h, out_px, height)?;
        let above = ((0.0 - top) * s).ceil().max(0.0) as usize;
        if above > 0 {
            sq.clear_rows(above.min(height));
        }
        squares.push(sq);
    }
    Ok(squares)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{camera_homography, render, Scene};

    fn frontal(px: usize, margin: f64) -> Homography {
        let s = (px as f64 - 2.0 * margin) / 8.0;
        Homography::translate(margin, margin).after(&Homography::scale(s, s))
    }

    #[test]
    fn location_round_trip() {
        let g = camera_homography(640, 480, 30.0, 5.0, 0.8, (0.0, 0.0));
        let loc = BoardLocation::from_lattice(&g).unwrap();
        for (k, c) in loc.corners().iter().enumerate() {
            let u = loc.rectify().apply(*c);
            assert!(u.dist(UNIT_SQUARE[k]) < 1e-6);
        }
        let grid = loc.grid();
        assert_eq!(grid.points().len(), 49);
        assert!(grid.points()[0].dist(g.apply(Point2::new(1.0, 1.0))) < 1e-6);
        assert!(grid.points()[48].dist(g.apply(Point2::new(7.0, 7.0))) < 1e-6);
        let back = BoardLocation::parse_line(&loc.to_line()).unwrap().unwrap();
        assert!(back.max_corner_shift(&loc) < 1e-9);
    }

    #[test]
    fn rejects_non_convex_and_bad_lines() {
        let bowtie = [
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 10.0),
            Point2::new(10.0, 0.0),
            Point2::new(0.0, 10.0),
        ];
        assert_eq!(BoardLocation::from_corners(bowtie), Err(DetectError::NotConvex));
        assert!(BoardLocation::parse_line("1 2 3").is_none());
        assert!(BoardLocation::parse_line("1 2 3 4 5 6 7 x").is_none());
    }

    #[test]
    fn split_squares_colors_and_indexing() {
        // Paint each square a distinct gray through a frontal render.
        let g = frontal(400, 8.0);
        let to_board = g.inverse().unwrap();
        let mut data = vec![0u8; 400 * 400];
        for y in 0..400 {
            for x in 0..400 {
                let b = to_board.apply(Point2::new(x as f64, y as f64));
                if (0.0..8.0).contains(&b.x) && (0.0..8.0).contains(&b.y) {
                    let i = b.y.floor() as usize * 8 + b.x.floor() as usize;
                    data[y * 400 + x] = (i * 3 + 20) as u8;
                }
            }
        }
        let image = Image::new(400, 400, 1, data).unwrap();
        let loc = BoardLocation::from_lattice(&g).unwrap();
        let squares = split_squares(&image, &loc, 40, 0.0).unwrap();
        assert_eq!(squares.len(), 64);
        for (i, sq) in squares.iter().enumerate() {
            assert_eq!((sq.width(), sq.height()), (40, 40));
            for y in 4..36 {
                for x in 4..36 {
                    assert_eq!(sq.get(x, y, 0), (i * 3 + 20) as u8, "square {i} at {x},{y}");
                }
            }
        }
        let tall = split_squares(&image, &loc, 40, 0.5).unwrap();
        assert!(tall.iter().all(|s| (s.width(), s.height()) == (40, 60)));
        // Top row: the extension above the board is blank.
        assert_eq!(tall[3].get(20, 5, 0), 0);
        // Second row: the extension shows the square above.
        assert_eq!(tall[11].get(20, 5, 0), (3 * 3 + 20) as u8);
        assert_eq!(tall[11].get(20, 40, 0), (11 * 3 + 20) as u8);
    }

    #[test]
    fn check_on_rendered_board() {
        let mut scene = Scene::new(480, 480, camera_homography(480, 480, 25.0, 4.0, 0.85, (0.0, 0.0)));
        scene.blur_sigma = 0.8;
        scene.noise_sigma = 2.0;
        let r = render(&scene);
        let loc = BoardLocation::from_lattice(&scene.board_to_image).unwrap();
        let grid = loc.grid();
        let verdicts = check_grid_points(&r.image, &grid, &PatchTest::default()).unwrap();
        assert!(verdicts.iter().all(|&v| v));
        assert!(check_board_location(&r.image, &grid, DEFAULT_CHECK_TOLERANCE).unwrap());

        let outside = GridCandidate::new(grid.points().iter().map(|p| *p + Point2::new(1000.0, 0.0)).collect()).unwrap();
        assert!(matches!(
            check_board_location(&r.image, &outside, DEFAULT_CHECK_TOLERANCE),
            Err(DetectError::PointOutside { index: 0, .. })
        ));
    }
}
