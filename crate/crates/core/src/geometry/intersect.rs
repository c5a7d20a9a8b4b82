//! All-pairs segment intersection, two ways.
//!
//! [`intersections_naive`] tests every pair. [`intersections_sweep`] is a
//! Bentley-Ottmann sweep. Both compute each point through the same pairwise
//! kernel, [`segment_intersection`], and merge near-duplicates with
//! [`dedup_points`], so their outputs agree as point sets. For small inputs the
//! sweep's event bookkeeping costs more than it saves; [`intersections`]
//! dispatches on input size.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use super::{triangle_area2, Point2, Segment2};

pub const DEFAULT_MERGE_RADIUS: f64 = 1e-7;
pub const DEFAULT_DISPATCH_THRESHOLD: usize = 64;

/// Relative tolerance for parameter ranges and point-on-segment tests.
const EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionConfig {
    pub merge_radius: f64,
    /// Inputs with at most this many segments use the pairwise algorithm.
    pub threshold: usize,
}

impl Default for IntersectionConfig {
    fn default() -> Self {
        Self {
            merge_radius: DEFAULT_MERGE_RADIUS,
            threshold: DEFAULT_DISPATCH_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Naive,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentHit {
    None,
    Point(Point2),
    /// Collinear overlap; the two ends of the shared interval.
    Overlap(Point2, Point2),
}

/// Intersection of two closed segments.
///
/// Parameters within `EPS` of an endpoint snap to that endpoint's exact
/// coordinates, so segments sharing an endpoint report it bit-exactly.
pub fn segment_intersection(s: &Segment2, t: &Segment2) -> SegmentHit {
    let r = s.b - s.a;
    let q = t.b - t.a;
    let w = t.a - s.a;
    let rl = r.norm();
    let ql = q.norm();
    let denom = r.cross(q);

    if denom.abs() > EPS * rl * ql {
        let ts = w.cross(q) / denom;
        let tu = w.cross(r) / denom;
        if !(-EPS..=1.0 + EPS).contains(&ts) || !(-EPS..=1.0 + EPS).contains(&tu) {
            return SegmentHit::None;
        }
        let snapped = if ts.abs() <= EPS {
            s.a
        } else if (ts - 1.0).abs() <= EPS {
            s.b
        } else if tu.abs() <= EPS {
            t.a
        } else if (tu - 1.0).abs() <= EPS {
            t.b
        } else {
            s.a + r * ts
        };
        return SegmentHit::Point(snapped);
    }

    // Parallel. Only collinear pairs can meet.
    let scale = 1.0 + s.a.x.abs().max(s.a.y.abs()).max(t.a.x.abs()).max(t.a.y.abs());
    if triangle_area2(s.a, s.b, t.a) / rl > EPS * scale {
        return SegmentHit::None;
    }
    let rr = r.dot(r);
    let t0 = w.dot(r) / rr;
    let t1 = (t.b - s.a).dot(r) / rr;
    let (tlo, plo, thi, phi) = if t0 <= t1 {
        (t0, t.a, t1, t.b)
    } else {
        (t1, t.b, t0, t.a)
    };
    let (lo, lo_pt) = if tlo > 0.0 { (tlo, plo) } else { (0.0, s.a) };
    let (hi, hi_pt) = if thi < 1.0 { (thi, phi) } else { (1.0, s.b) };
    if lo > hi + EPS {
        SegmentHit::None
    } else if (hi - lo).abs() <= EPS {
        SegmentHit::Point(lo_pt)
    } else {
        SegmentHit::Overlap(lo_pt, hi_pt)
    }
}

/// Merges points closer than `radius` and returns them in lexicographic order.
///
/// Points are visited in lexicographic order; each either joins the first
/// kept representative within `radius` or becomes a new representative.
pub fn dedup_points(mut points: Vec<Point2>, radius: f64) -> Vec<Point2> {
    points.sort_by(Point2::lex_cmp);
    if radius <= 0.0 {
        points.dedup();
        return points;
    }
    let cell = |p: Point2| ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut kept: Vec<Point2> = Vec::new();
    'outer: for p in points {
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = grid.get(&(cx + dx, cy + dy)) {
                    if ids.iter().any(|&i| kept[i].dist(p) <= radius) {
                        continue 'outer;
                    }
                }
            }
        }
        grid.entry((cx, cy)).or_default().push(kept.len());
        kept.push(p);
    }
    kept
}

pub fn intersections_naive(segments: &[Segment2], merge_radius: f64) -> Vec<Point2> {
    let mut out = Vec::new();
    for (i, s) in segments.iter().enumerate() {
        for t in &segments[i + 1..] {
            match segment_intersection(s, t) {
                SegmentHit::None => {}
                SegmentHit::Point(p) => out.push(p),
                SegmentHit::Overlap(p, q) => {
                    out.push(p);
                    out.push(q);
                }
            }
        }
    }
    dedup_points(out, merge_radius)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EventKey(Point2);

impl Eq for EventKey {}

impl PartialOrd for EventKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EventKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.lex_cmp(&other.0)
    }
}

#[derive(Default)]
struct Event {
    starts: Vec<usize>,
}

/// A segment with endpoints in sweep order (left, or lower when vertical).
struct SweepSeg {
    seg: Segment2,
    vertical: bool,
    slope: f64,
}

impl SweepSeg {
    fn left(&self) -> Point2 {
        self.seg.a
    }

    fn right(&self) -> Point2 {
        self.seg.b
    }

    /// Height of the segment on the sweep line through `p`.
    fn y_at(&self, p: Point2) -> f64 {
        if self.vertical {
            p.y.clamp(self.left().y, self.right().y)
        } else {
            self.left().y + (p.x - self.left().x) * self.slope
        }
    }

    fn contains(&self, p: Point2, tol: f64) -> bool {
        let (a, b) = (self.left(), self.right());
        let d = b - a;
        let len2 = d.dot(d);
        let t = (p - a).dot(d) / len2;
        let len = len2.sqrt();
        if t < -tol / len || t > 1.0 + tol / len {
            return false;
        }
        triangle_area2(p, a, b) / len <= tol
    }

    /// Sort key for the order just past an event point.
    fn after_slope(&self) -> f64 {
        if self.vertical {
            f64::INFINITY
        } else {
            self.slope
        }
    }
}

/// Bentley-Ottmann sweep, left to right.
///
/// The active set is a `Vec` ordered bottom to top along the sweep line. All
/// segments through an event point are handled as one batch: removed, then
/// reinserted by slope, which reverses their order past the event.
pub fn intersections_sweep(segments: &[Segment2], merge_radius: f64) -> Vec<Point2> {
    let scale = 1.0
        + segments
            .iter()
            .flat_map(|s| [s.a.x.abs(), s.a.y.abs(), s.b.x.abs(), s.b.y.abs()])
            .fold(0.0, f64::max);
    let tol = EPS * scale;

    let segs: Vec<SweepSeg> = segments
        .iter()
        .map(|s| {
            let (a, b) = if s.a.lex_cmp(&s.b) == Ordering::Greater {
                (s.b, s.a)
            } else {
                (s.a, s.b)
            };
            let vertical = a.x == b.x;
            let slope = if vertical { 0.0 } else { (b.y - a.y) / (b.x - a.x) };
            SweepSeg {
                seg: Segment2 { a, b },
                vertical,
                slope,
            }
        })
        .collect();

    let mut events: BTreeMap<EventKey, Event> = BTreeMap::new();
    for (i, s) in segs.iter().enumerate() {
        events.entry(EventKey(s.left())).or_default().starts.push(i);
        events.entry(EventKey(s.right())).or_default();
    }

    let mut status: Vec<usize> = Vec::new();
    let mut reported = Vec::new();

    while let Some((EventKey(p), event)) = events.pop_first() {
        let through: Vec<usize> = status
            .iter()
            .copied()
            .filter(|&i| segs[i].contains(p, tol))
            .collect();

        if through.len() + event.starts.len() >= 2 {
            reported.push(p);
        }

        status.retain(|i| !through.contains(i));
        let pos = status.partition_point(|&i| segs[i].y_at(p) <= p.y);

        let mut inserted: Vec<usize> = through
            .into_iter()
            .filter(|&i| segs[i].right().lex_cmp(&p) == Ordering::Greater)
            .chain(event.starts.iter().copied())
            .collect();
        inserted.sort_by(|&i, &j| {
            segs[i]
                .after_slope()
                .total_cmp(&segs[j].after_slope())
                .then(i.cmp(&j))
        });
        let k = inserted.len();
        status.splice(pos..pos, inserted);

        let mut check = |lo: usize, hi: usize| {
            let mut push = |q: Point2| {
                if q.lex_cmp(&p) == Ordering::Greater {
                    events.entry(EventKey(q)).or_default();
                }
            };
            match segment_intersection(&segs[status[lo]].seg, &segs[status[hi]].seg) {
                SegmentHit::None => {}
                SegmentHit::Point(q) => push(q),
                SegmentHit::Overlap(q, r) => {
                    push(q);
                    push(r);
                }
            }
        };
        if k == 0 {
            if pos > 0 && pos < status.len() {
                check(pos - 1, pos);
            }
        } else {
            if pos > 0 {
                check(pos - 1, pos);
            }
            if pos + k < status.len() {
                check(pos + k - 1, pos + k);
            }
        }
    }

    dedup_points(reported, merge_radius)
}

pub fn dispatch_branch(n: usize, threshold: usize) -> Branch {
    if n <= threshold {
        Branch::Naive
    } else {
        Branch::Sweep
    }
}

/// Intersections, choosing the algorithm by input size.
pub fn intersections(segments: &[Segment2], config: &IntersectionConfig) -> Vec<Point2> {
    intersections_traced(segments, config, |_| {})
}

/// As [`intersections`], reporting the branch taken to `hook`.
pub fn intersections_traced(
    segments: &[Segment2],
    config: &IntersectionConfig,
    mut hook: impl FnMut(Branch),
) -> Vec<Point2> {
    let branch = dispatch_branch(segments.len(), config.threshold);
    hook(branch);
    match branch {
        Branch::Naive => intersections_naive(segments, config.merge_radius),
        Branch::Sweep => intersections_sweep(segments, config.merge_radius),
    }
}
