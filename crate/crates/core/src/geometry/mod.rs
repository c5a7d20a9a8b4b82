//! Planar primitives used by board detection.
//!
//! The distance kernel [`triangle_area2`] is the doubled triangle area written
//! out component-wise, so it needs no vector library. It is only
//! order-preserving for a fixed line; [`point_line_distance`] divides by the
//! line length when distances to different lines have to be compared.

mod homography;
mod intersect;

pub(crate) use homography::warp;
pub use homography::{homography_from_quad, warp_crop, Homography};
pub use intersect::{
    dedup_points, dispatch_branch, intersections, intersections_naive, intersections_sweep,
    intersections_traced, segment_intersection, Branch, IntersectionConfig, SegmentHit,
    DEFAULT_DISPATCH_THRESHOLD, DEFAULT_MERGE_RADIUS,
};

use std::ops::{Add, Mul, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("degenerate segment: endpoints coincide at ({0}, {1})")]
    DegenerateSegment(f64, f64),
    #[error("degenerate line: endpoints coincide")]
    DegenerateLine,
    #[error("degenerate quadrilateral: corners {0}, {1}, {2} are collinear")]
    DegenerateQuad(usize, usize, usize),
    #[error("homography is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("output size must be positive")]
    EmptyOutput,
}

/// A point in image coordinates (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product of the two vectors.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Lexicographic (x, then y) total order.
    pub fn lex_cmp(&self, other: &Point2) -> std::cmp::Ordering {
        self.x.total_cmp(&other.x).then(self.y.total_cmp(&other.y))
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// A closed line segment with distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2 {
    a: Point2,
    b: Point2,
}

impl Segment2 {
    pub fn new(a: Point2, b: Point2) -> Result<Self, GeometryError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if a == b {
            return Err(GeometryError::DegenerateSegment(a.x, a.y));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> Point2 {
        self.a
    }

    pub fn b(&self) -> Point2 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    /// Direction angle folded into `[0, pi)`.
    pub fn angle(&self) -> f64 {
        let d = self.b - self.a;
        d.y.atan2(d.x).rem_euclid(std::f64::consts::PI)
    }
}

/// Twice the area of triangle `(x, y, z)`:
/// `|(y1 - x1)(x2 - z2) - (y2 - x2)(x1 - z1)|`.
#[inline]
pub fn triangle_area2(x: Point2, y: Point2, z: Point2) -> f64 {
    ((y.x - x.x) * (x.y - z.y) - (y.y - x.y) * (x.x - z.x)).abs()
}

/// Euclidean distance from `p` to the infinite line through `line_a` and `line_b`.
pub fn point_line_distance(p: Point2, line_a: Point2, line_b: Point2) -> Result<f64, GeometryError> {
    let len = line_a.dist(line_b);
    if len == 0.0 {
        return Err(GeometryError::DegenerateLine);
    }
    Ok(triangle_area2(p, line_a, line_b) / len)
}
