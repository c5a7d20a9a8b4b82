//! Iterative board localization.
//!
//! Iteration 1 works on the input image: line intersections that pass the
//! lattice-point test are grown into an integer grid by breadth-first
//! prediction, the grid is oriented and its index offset chosen, and a
//! homography from lattice coordinates to the image is fitted. Each later
//! iteration rectifies the image through the current estimate into a working
//! crop, repeats detection there, assigns points to lattice nodes by
//! rounding, and refits in image coordinates.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    lines::detect_lines_with, refine_corner, scaled_axes, BoardLocation, DetectError, LatticePatch, LocateConfig,
    PatchTest,
};
use crate::geometry::{dedup_points, intersections, warp, Homography, Point2};
use crate::raster::{GrayImage, Image};

type Coord = (i32, i32);

/// What one iteration saw.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub lines: usize,
    pub candidates: usize,
    pub validated: usize,
    /// Points used in the homography fit.
    pub fitted: usize,
    pub corners: [Point2; 4],
    /// Largest corner movement from the previous iteration, pixels.
    pub shift: Option<f64>,
}

pub fn locate_board(image: &Image, config: &LocateConfig) -> Result<BoardLocation, DetectError> {
    locate_board_traced(image, config, |_| {})
}

pub fn locate_board_traced(
    image: &Image,
    config: &LocateConfig,
    mut trace: impl FnMut(&IterationTrace),
) -> Result<BoardLocation, DetectError> {
    let gray = image.to_gray();
    let found = candidate_points(&gray, config)?;
    if found.validated.len() < 4 {
        return Err(DetectError::DetectionFailed {
            iteration: 1,
            found: found.validated.len(),
        });
    }
    let (mut g, fitted) = fit_grid(&gray, &found.validated, &config.patch).ok_or(DetectError::DetectionFailed {
        iteration: 1,
        found: found.validated.len(),
    })?;
    let mut loc = BoardLocation::from_lattice(&g)?;
    trace(&IterationTrace {
        iteration: 1,
        lines: found.lines,
        candidates: found.candidates,
        validated: found.validated.len(),
        fitted,
        corners: *loc.corners(),
        shift: None,
    });

    let diag = image.diagonal();
    let side = config.working_px;
    let s = side as f64 / (8.0 + 2.0 * config.working_margin);
    for iteration in 2..=config.max_iters {
        let to_crop = Homography::translate(-0.5, -0.5)
            .after(&Homography::scale(s, s))
            .after(&Homography::translate(config.working_margin, config.working_margin))
            .after(&g.inverse()?);
        let crop = warp(image, &to_crop, side, side)?.to_gray();
        let found = candidate_points(&crop, config)?;

        let mut best: BTreeMap<Coord, (f64, Point2)> = BTreeMap::new();
        for q in &found.validated {
            let u = (q.x + 0.5) / s - config.working_margin;
            let v = (q.y + 0.5) / s - config.working_margin;
            let (i, j) = (u.round(), v.round());
            let err = (u - i).hypot(v - j);
            if !(1.0..=7.0).contains(&i) || !(1.0..=7.0).contains(&j) || err > config.assign_tolerance {
                continue;
            }
            let key = (i as i32, j as i32);
            if best.get(&key).is_none_or(|b| err < b.0) {
                best.insert(key, (err, *q));
            }
        }
        if best.len() < 4 {
            return Err(DetectError::DetectionFailed {
                iteration,
                found: best.len(),
            });
        }
        let from_crop = to_crop.inverse()?;
        let src: Vec<Point2> = best.keys().map(|&(i, j)| Point2::new(i as f64, j as f64)).collect();
        let dst: Vec<Point2> = best.values().map(|(_, q)| from_crop.apply(*q)).collect();
        g = Homography::fit(&src, &dst)?;
        let next = BoardLocation::from_lattice(&g)?;
        let shift = next.max_corner_shift(&loc);
        loc = next;
        trace(&IterationTrace {
            iteration,
            lines: found.lines,
            candidates: found.candidates,
            validated: found.validated.len(),
            fitted: best.len(),
            corners: *loc.corners(),
            shift: Some(shift),
        });
        if shift < config.converge_fraction * diag {
            break;
        }
    }
    Ok(loc)
}

struct Candidates {
    lines: usize,
    candidates: usize,
    validated: Vec<Point2>,
}

/// Lines, their intersections, clustering, the patch test, and subpixel
/// refinement.
fn candidate_points(gray: &GrayImage, config: &LocateConfig) -> Result<Candidates, DetectError> {
    let segments = detect_lines_with(gray, &config.lines)?;
    let (w, h) = (gray.width as f64, gray.height as f64);
    let r = (config.patch.patch_size / 2) as f64;
    let inside: Vec<Point2> = intersections(&segments, &config.intersections)
        .into_iter()
        .filter(|p| p.x >= r && p.y >= r && p.x <= w - 1.0 - r && p.y <= h - 1.0 - r)
        .collect();
    let clustered = dedup_points(inside, config.cluster_radius);
    let candidates = clustered.len();
    let blurred = gray.blur(1.0);
    let (gx, gy) = blurred.sobel();
    let refined: Vec<Point2> = clustered
        .into_iter()
        .filter(|&p| config.patch.accepts(&LatticePatch::axis_aligned(gray, p, config.patch.patch_size)))
        .map(|p| refine_corner(&blurred, &gx, &gy, p, config.refine_radius, 10))
        .collect();
    Ok(Candidates {
        lines: segments.len(),
        candidates,
        validated: dedup_points(refined, config.cluster_radius),
    })
}

/// Least-squares affine map through `pairs`, as a homography.
fn affine_fit(pairs: &[(Point2, Point2)]) -> Option<Homography> {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atx = nalgebra::Vector3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (s, d) in pairs {
        let a = nalgebra::Vector3::new(s.x, s.y, 1.0);
        ata += a * a.transpose();
        atx += a * d.x;
        aty += a * d.y;
    }
    let lu = ata.lu();
    let px = lu.solve(&atx)?;
    let py = lu.solve(&aty)?;
    Homography::from_rows([[px[0], px[1], px[2]], [py[0], py[1], py[2]], [0.0, 0.0, 1.0]]).ok()
}

fn coord_point(c: Coord) -> Point2 {
    Point2::new(c.0 as f64, c.1 as f64)
}

/// Grid coordinates to image model through the assigned points: projective
/// once the points span at least two rows and columns, affine before.
fn grid_model(assigned: &BTreeMap<Coord, usize>, points: &[Point2]) -> Option<Homography> {
    let pairs: Vec<(Point2, Point2)> = assigned.iter().map(|(&c, &k)| (coord_point(c), points[k])).collect();
    let cols: BTreeSet<i32> = assigned.keys().map(|c| c.0).collect();
    let rows: BTreeSet<i32> = assigned.keys().map(|c| c.1).collect();
    if pairs.len() >= 6 && cols.len() >= 3 && rows.len() >= 3 {
        let (src, dst): (Vec<Point2>, Vec<Point2>) = pairs.iter().copied().unzip();
        if let Ok(h) = Homography::fit(&src, &dst) {
            return Some(h);
        }
    }
    affine_fit(&pairs)
}

fn span_ok(assigned: &BTreeMap<Coord, usize>, extra: Coord) -> bool {
    let (mut i0, mut i1, mut j0, mut j1) = (extra.0, extra.0, extra.1, extra.1);
    for c in assigned.keys() {
        i0 = i0.min(c.0);
        i1 = i1.max(c.0);
        j0 = j0.min(c.1);
        j1 = j1.max(c.1);
    }
    i1 - i0 <= 6 && j1 - j0 <= 6
}

/// Median nearest-neighbour distance, the typical lattice spacing.
/// Neighbours closer than `floor` are near-duplicates and ignored.
fn typical_spacing(points: &[Point2], floor: f64) -> Option<f64> {
    let mut nn: Vec<f64> = points
        .iter()
        .enumerate()
        .filter_map(|(a, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, q)| q.dist(*p))
                .filter(|d| *d >= floor)
                .min_by(f64::total_cmp)
        })
        .collect();
    if nn.is_empty() {
        return None;
    }
    nn.sort_by(f64::total_cmp);
    Some(nn[nn.len() / 2])
}

/// Assigns integer grid coordinates to points reachable from `seed` by
/// steps of one lattice spacing. Several first steps are tried; the largest
/// grid wins.
fn grow(points: &[Point2], seed: usize, spacing: f64) -> Option<BTreeMap<Coord, usize>> {
    let p0 = points[seed];
    let mut near: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != seed)
        .map(|(k, p)| (p.dist(p0), k))
        .filter(|(d, _)| (0.5 * spacing..=1.8 * spacing).contains(d))
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    near.truncate(8);
    let mut best: Option<BTreeMap<Coord, usize>> = None;
    for first in 0..near.len().min(3) {
        let (d1, n1) = near[first];
        let e1 = points[n1] - p0;
        let Some(&(_, n2)) = near.iter().find(|&&(d, k)| {
            let e = points[k] - p0;
            let cos = e.dot(e1) / (d * d1);
            k != n1 && cos.abs() < 50f64.to_radians().cos() && (0.5..=2.0).contains(&(d / d1))
        }) else {
            continue;
        };
        if let Some(grid) = grow_from(points, seed, n1, n2) {
            if best.as_ref().is_none_or(|b| grid.len() > b.len()) {
                best = Some(grid);
            }
        }
    }
    best
}

fn grow_from(points: &[Point2], seed: usize, n1: usize, n2: usize) -> Option<BTreeMap<Coord, usize>> {
    let mut assigned: BTreeMap<Coord, usize> = BTreeMap::new();
    let mut used = vec![false; points.len()];
    for (c, k) in [((0, 0), seed), ((1, 0), n1), ((0, 1), n2)] {
        assigned.insert(c, k);
        used[k] = true;
    }
    loop {
        let model = grid_model(&assigned, points)?;
        let frontier: BTreeSet<Coord> = assigned
            .keys()
            .flat_map(|&(i, j)| [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)])
            .filter(|c| !assigned.contains_key(c) && span_ok(&assigned, *c))
            .collect();
        // point -> (distance, coordinate), closest claim wins.
        let mut claims: BTreeMap<usize, (f64, Coord)> = BTreeMap::new();
        for c in frontier {
            let pred = model.apply(coord_point(c));
            let spacing = pred
                .dist(model.apply(coord_point((c.0 + 1, c.1))))
                .min(pred.dist(model.apply(coord_point((c.0, c.1 + 1)))));
            if !pred.is_finite() || !spacing.is_finite() {
                continue;
            }
            let best = points
                .iter()
                .enumerate()
                .filter(|&(k, _)| !used[k])
                .map(|(k, p)| (p.dist(pred), k))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((d, k)) = best {
                if d <= 0.3 * spacing && claims.get(&k).is_none_or(|c| d < c.0) {
                    claims.insert(k, (d, c));
                }
            }
        }
        let mut added = false;
        for (k, (_, c)) in claims {
            if !assigned.contains_key(&c) && span_ok(&assigned, c) {
                assigned.insert(c, k);
                used[k] = true;
                added = true;
            }
        }
        if !added {
            return Some(assigned);
        }
    }
}

/// Rotates/reflects grid coordinates so +i points right and +j down in
/// the image.
fn canonical_orientation(assigned: &BTreeMap<Coord, usize>, points: &[Point2]) -> Option<BTreeMap<Coord, usize>> {
    let model = grid_model(assigned, points)?;
    let n = assigned.len() as f64;
    let ci = assigned.keys().map(|c| c.0 as f64).sum::<f64>() / n;
    let cj = assigned.keys().map(|c| c.1 as f64).sum::<f64>() / n;
    let o = model.apply(Point2::new(ci, cj));
    let di = model.apply(Point2::new(ci + 1.0, cj)) - o;
    let dj = model.apply(Point2::new(ci, cj + 1.0)) - o;
    let options = [(di, true, 1), (di * -1.0, true, -1), (dj, false, 1), (dj * -1.0, false, -1)];
    let &(_, right_is_i, sign) = options.iter().max_by(|a, b| a.0.x.total_cmp(&b.0.x))?;
    let map = |c: Coord| -> Coord {
        if right_is_i {
            let s = if dj.y >= 0.0 { 1 } else { -1 };
            (sign * c.0, s * c.1)
        } else {
            let s = if di.y >= 0.0 { 1 } else { -1 };
            (sign * c.1, s * c.0)
        }
    };
    Some(assigned.iter().map(|(&c, &k)| (map(c), k)).collect())
}

/// Lattice-to-image homography from grown grid coordinates: tries every
/// placement of the grid inside the 7x7 interior, scoring lattice-point
/// responses at interior nodes against those on the board edge.
fn place_grid(gray: &GrayImage, assigned: &BTreeMap<Coord, usize>, points: &[Point2], test: &PatchTest) -> Option<Homography> {
    let i0 = assigned.keys().map(|c| c.0).min()?;
    let i1 = assigned.keys().map(|c| c.0).max()?;
    let j0 = assigned.keys().map(|c| c.1).min()?;
    let j1 = assigned.keys().map(|c| c.1).max()?;
    let fit = |oi: i32, oj: i32| {
        let (src, dst): (Vec<Point2>, Vec<Point2>) = assigned
            .iter()
            .map(|(&(i, j), &k)| (coord_point((i + oi, j + oj)), points[k]))
            .unzip();
        Homography::fit(&src, &dst).ok()
    };
    let mut best: Option<(i64, i32, Homography)> = None;
    for oi in (1 - i0)..=(7 - i1) {
        for oj in (1 - j0)..=(7 - j1) {
            let Some(g) = fit(oi, oj) else { continue };
            let single = i1 - i0 == 6 && j1 - j0 == 6;
            let score = if single { 0 } else { placement_score(gray, &g, test) };
            // Prefer the most central placement on ties.
            let off_center = (2 * oi + i0 + i1 - 8).abs() + (2 * oj + j0 + j1 - 8).abs();
            if best.as_ref().is_none_or(|b| score > b.0 || (score == b.0 && off_center < b.1)) {
                best = Some((score, off_center, g));
            }
        }
    }
    best.map(|b| b.2)
}

fn placement_score(gray: &GrayImage, g: &Homography, test: &PatchTest) -> i64 {
    let (w, h) = (gray.width as f64, gray.height as f64);
    let mut score = 0i64;
    for j in 0..=8 {
        for i in 0..=8 {
            let at = |di: f64, dj: f64| g.apply(Point2::new(i as f64 + di, j as f64 + dj));
            let p = at(0.0, 0.0);
            if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= w - 1.0 && p.y <= h - 1.0) {
                continue;
            }
            let (u, v) = scaled_axes(at(0.5, 0.0) - at(-0.5, 0.0), at(0.0, 0.5) - at(0.0, -0.5), test.patch_size);
            if test.accepts(&LatticePatch::sample(gray, p, u, v, test.patch_size)) {
                let interior = (1..=7).contains(&i) && (1..=7).contains(&j);
                score += if interior { 1 } else { -1 };
            }
        }
    }
    score
}

/// Grid from unordered validated points; returns the lattice-to-image
/// homography and the number of points it was fitted to.
fn fit_grid(gray: &GrayImage, points: &[Point2], test: &PatchTest) -> Option<(Homography, usize)> {
    let n = points.len() as f64;
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let center = Point2::new(xs[xs.len() / 2], ys[ys.len() / 2]);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].dist(center).total_cmp(&points[b].dist(center)).then(a.cmp(&b)));

    let spacing = typical_spacing(points, 0.02 * gray.width.min(gray.height) as f64)?;
    let mut best: Option<BTreeMap<Coord, usize>> = None;
    for &seed in order.iter().take(8) {
        if let Some(grid) = grow(points, seed, spacing) {
            if best.as_ref().is_none_or(|b| grid.len() > b.len()) {
                best = Some(grid);
            }
            if best.as_ref().is_some_and(|b| b.len() == 49) {
                break;
            }
        }
    }
    let grid = best.filter(|g| g.len() >= 4 && (g.len() as f64) >= 4.0_f64.min(n))?;
    let grid = canonical_orientation(&grid, points)?;
    let g = place_grid(gray, &grid, points, test)?;
    Some((g, grid.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{camera_homography, random_legal_position, render, BoardStyle, Scene};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corner_error(loc: &BoardLocation, truth: &[Point2; 4]) -> f64 {
        loc.corners().iter().zip(truth).map(|(a, b)| a.dist(*b)).fold(0.0, f64::max)
    }

    #[test]
    fn frontal_full_frame() {
        let g = Homography::translate(40.0, 40.0).after(&Homography::scale(50.0, 50.0));
        let mut scene = Scene::new(480, 480, g);
        scene.blur_sigma = 0.6;
        scene.noise_sigma = 2.0;
        let r = render(&scene);
        let loc = locate_board(&r.image, &LocateConfig::default()).unwrap();
        let err = corner_error(&loc, &r.corners);
        assert!(err < 0.005 * r.image.diagonal(), "error {err}");
    }

    #[test]
    fn tilted_with_pieces() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (k, style) in BoardStyle::all().into_iter().enumerate() {
            let mut scene = Scene::new(640, 480, camera_homography(640, 480, 35.0, -6.0 + 4.0 * k as f64, 0.8, (0.0, 0.0)));
            scene.style = style;
            scene.position = random_legal_position(&mut rng, 24);
            scene.blur_sigma = 0.8;
            scene.noise_sigma = 3.0;
            scene.seed = k as u64;
            let r = render(&scene);
            let loc = locate_board(&r.image, &LocateConfig::default()).unwrap();
            let err = corner_error(&loc, &r.corners);
            assert!(err < 0.005 * r.image.diagonal(), "style {k}: error {err}");
        }
    }

    #[test]
    fn no_board_fails() {
        let flat = Image::filled(320, 240, 3, 128).unwrap();
        assert!(matches!(
            locate_board(&flat, &LocateConfig::default()),
            Err(DetectError::DetectionFailed { iteration: 1, .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<u8> = (0..320 * 240).map(|_| rand::Rng::random(&mut rng)).collect();
        let noise = Image::new(320, 240, 1, data).unwrap();
        assert!(locate_board(&noise, &LocateConfig::default()).is_err());
        let tiny = Image::filled(32, 32, 1, 0).unwrap();
        assert!(matches!(
            locate_board(&tiny, &LocateConfig::default()),
            Err(DetectError::ImageTooSmall { .. })
        ));
    }
}
