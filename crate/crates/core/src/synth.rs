//! Synthetic boards with known ground truth.
//!
//! [`render`] draws a board through a known board-to-image homography, so the
//! true corners and interior lattice points of every image are exact. The
//! module also generates random legal placements and noisy probability
//! vectors around them. Test fixtures and the acceptance suite are built on
//! these.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, Normal};

use crate::classify::{BoardProbabilities, Color, PieceClass, PieceKind, SquareProbabilities, NUM_CLASSES};
use crate::geometry::{warp_crop, Homography, Point2};
use crate::infer::{square_is_light, BoardPosition};
use crate::raster::{gaussian_kernel, Image, ImageError};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardStyle {
    pub light: Rgb,
    pub dark: Rgb,
    pub frame: Rgb,
    pub background: Rgb,
    pub white_piece: Rgb,
    pub white_outline: Rgb,
    pub black_piece: Rgb,
    pub black_outline: Rgb,
    /// Frame width in squares.
    pub frame_width: f64,
    /// Piece size relative to the reference silhouettes.
    pub piece_scale: f64,
}

impl BoardStyle {
    pub fn wood() -> Self {
        Self {
            light: [222, 196, 150],
            dark: [150, 100, 60],
            frame: [90, 55, 30],
            background: [170, 170, 165],
            white_piece: [250, 248, 240],
            white_outline: [60, 60, 60],
            black_piece: [30, 28, 28],
            black_outline: [70, 70, 70],
            frame_width: 0.5,
            piece_scale: 1.0,
        }
    }

    pub fn tournament() -> Self {
        Self {
            light: [222, 224, 198],
            dark: [110, 140, 80],
            frame: [55, 55, 55],
            background: [125, 115, 105],
            white_piece: [252, 252, 250],
            white_outline: [50, 50, 50],
            black_piece: [25, 25, 30],
            black_outline: [80, 80, 80],
            frame_width: 0.35,
            piece_scale: 0.95,
        }
    }

    pub fn slate() -> Self {
        Self {
            light: [200, 200, 200],
            dark: [90, 90, 90],
            frame: [40, 40, 40],
            background: [150, 140, 130],
            white_piece: [250, 250, 250],
            white_outline: [40, 40, 40],
            black_piece: [15, 15, 15],
            black_outline: [60, 60, 60],
            frame_width: 0.6,
            piece_scale: 0.9,
        }
    }

    pub fn marine() -> Self {
        Self {
            light: [215, 222, 226],
            dark: [120, 145, 160],
            frame: [70, 80, 90],
            background: [105, 105, 115],
            white_piece: [252, 250, 245],
            white_outline: [45, 45, 50],
            black_piece: [20, 22, 30],
            black_outline: [75, 75, 85],
            frame_width: 0.4,
            piece_scale: 1.0,
        }
    }

    pub fn all() -> [BoardStyle; 4] {
        [Self::wood(), Self::tournament(), Self::slate(), Self::marine()]
    }
}

/// A disc over the board, in board coordinates (squares).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub center: Point2,
    pub radius: f64,
    pub color: Rgb,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    /// Board coordinates (0..8 squares, top-left origin) to image pixels.
    pub board_to_image: Homography,
    pub style: BoardStyle,
    pub position: BoardPosition,
    pub occluders: Vec<Occluder>,
    pub blur_sigma: f64,
    /// Gaussian noise standard deviation in gray levels.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Samples per pixel along each axis.
    pub supersample: usize,
}

impl Scene {
    pub fn new(width: usize, height: usize, board_to_image: Homography) -> Self {
        Self {
            width,
            height,
            board_to_image,
            style: BoardStyle::wood(),
            position: BoardPosition::new([PieceClass::Empty; 64]),
            occluders: Vec::new(),
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            supersample: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: Image,
    /// Outer board corners clockwise from top-left, image pixels.
    pub corners: [Point2; 4],
    /// The 49 interior lattice points, row-major from the top-left.
    pub lattice: Vec<Point2>,
    /// Whether each lattice point is free of occluders.
    pub visible: Vec<bool>,
}

/// Lattice coordinates of the 49 interior points, row-major.
pub fn interior_lattice() -> Vec<Point2> {
    (1..8)
        .flat_map(|r| (1..8).map(move |c| Point2::new(c as f64, r as f64)))
        .collect()
}

/// Board-to-image homography of a pinhole camera looking at the board.
///
/// `tilt_deg` is the angle between the optical axis and the board normal
/// (0 = straight down, far rank toward the top of the image). `roll_deg`
/// rotates the board in its plane. The board is scaled so its bounding box
/// spans `fill` of the image and shifted by `offset` (fractions of the image).
pub fn camera_homography(
    width: usize,
    height: usize,
    tilt_deg: f64,
    roll_deg: f64,
    fill: f64,
    offset: (f64, f64),
) -> Homography {
    let (st, ct) = tilt_deg.to_radians().sin_cos();
    let (sr, cr) = roll_deg.to_radians().sin_cos();
    let distance = 14.0;
    // Board (u, v) -> plane (X, Y) centered, rolled; then tilted about X.
    // Camera coords: Xc = X, Yc = Y cos t, Zc = D - Y sin t.
    // As a 3x3 acting on (u, v, 1):
    let plane = [[cr, -sr, -4.0 * cr + 4.0 * sr], [sr, cr, -4.0 * sr - 4.0 * cr], [0.0, 0.0, 1.0]];
    let tilt = [[1.0, 0.0, 0.0], [0.0, ct, 0.0], [0.0, -st, distance]];
    let m = mat_mul(&tilt, &plane);
    let project = |u: f64, v: f64| {
        let x = m[0][0] * u + m[0][1] * v + m[0][2];
        let y = m[1][0] * u + m[1][1] * v + m[1][2];
        let w = m[2][0] * u + m[2][1] * v + m[2][2];
        (x / w, y / w)
    };
    let pts = [project(0.0, 0.0), project(8.0, 0.0), project(8.0, 8.0), project(0.0, 8.0)];
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let f = fill * (width as f64 / (x1 - x0)).min(height as f64 / (y1 - y0));
    let cx = width as f64 * (0.5 + offset.0) - f * (x0 + x1) / 2.0;
    let cy = height as f64 * (0.5 + offset.1) - f * (y0 + y1) / 2.0;
    let k = [[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]];
    Homography::from_rows(mat_mul(&k, &m)).expect("camera homography is invertible")
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|r| std::array::from_fn(|c| (0..3).map(|k| a[r][k] * b[k][c]).sum()))
}

enum Shape {
    Circle(f64, f64, f64),
    Rect(f64, f64, f64, f64),
    /// Convex polygon, vertices in either winding.
    Poly(&'static [(f64, f64)]),
}

impl Shape {
    /// Approximate signed distance; negative inside.
    fn sdf(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Circle(cx, cy, r) => (x - cx).hypot(y - cy) - r,
            Shape::Rect(x0, y0, x1, y1) => {
                let dx = (x0 - x).max(x - x1);
                let dy = (y0 - y).max(y - y1);
                if dx <= 0.0 && dy <= 0.0 {
                    dx.max(dy)
                } else {
                    dx.max(0.0).hypot(dy.max(0.0))
                }
            }
            Shape::Poly(v) => {
                let n = v.len();
                let area: f64 = (0..n)
                    .map(|i| {
                        let (a, b) = (v[i], v[(i + 1) % n]);
                        a.0 * b.1 - b.0 * a.1
                    })
                    .sum();
                let sign = if area > 0.0 { 1.0 } else { -1.0 };
                (0..n)
                    .map(|i| {
                        let (a, b) = (v[i], v[(i + 1) % n]);
                        let (ex, ey) = (b.0 - a.0, b.1 - a.1);
                        let len = ex.hypot(ey);
                        // Outward normal for counter-clockwise (in y-down, area>0) winding.
                        sign * ((x - a.0) * ey - (y - a.1) * ex) / len
                    })
                    .fold(f64::MIN, f64::max)
            }
        }
    }
}

fn silhouette(kind: PieceKind) -> &'static [Shape] {
    use Shape::*;
    match kind {
        PieceKind::Pawn => &[
            Rect(0.30, 0.74, 0.70, 0.82),
            Poly(&[(0.36, 0.74), (0.64, 0.74), (0.57, 0.52), (0.43, 0.52)]),
            Circle(0.5, 0.45, 0.11),
        ],
        PieceKind::Rook => &[
            Rect(0.27, 0.72, 0.73, 0.82),
            Rect(0.33, 0.36, 0.67, 0.72),
            Rect(0.29, 0.24, 0.71, 0.36),
        ],
        PieceKind::Knight => &[
            Rect(0.28, 0.72, 0.72, 0.82),
            Poly(&[(0.34, 0.72), (0.66, 0.72), (0.62, 0.45), (0.40, 0.45)]),
            Poly(&[(0.38, 0.48), (0.36, 0.36), (0.55, 0.22), (0.66, 0.30), (0.62, 0.48)]),
            Poly(&[(0.36, 0.36), (0.27, 0.42), (0.30, 0.48), (0.42, 0.45)]),
        ],
        PieceKind::Bishop => &[
            Rect(0.30, 0.74, 0.70, 0.82),
            Poly(&[(0.38, 0.74), (0.62, 0.74), (0.56, 0.45), (0.44, 0.45)]),
            Circle(0.5, 0.36, 0.10),
            Circle(0.5, 0.22, 0.045),
        ],
        PieceKind::Queen => &[
            Rect(0.27, 0.73, 0.73, 0.82),
            Poly(&[(0.35, 0.73), (0.65, 0.73), (0.56, 0.40), (0.44, 0.40)]),
            Poly(&[(0.32, 0.22), (0.68, 0.22), (0.58, 0.40), (0.42, 0.40)]),
            Circle(0.5, 0.19, 0.045),
        ],
        PieceKind::King => &[
            Rect(0.27, 0.73, 0.73, 0.82),
            Poly(&[(0.35, 0.73), (0.65, 0.73), (0.57, 0.36), (0.43, 0.36)]),
            Rect(0.37, 0.26, 0.63, 0.36),
            Rect(0.47, 0.08, 0.53, 0.26),
            Rect(0.40, 0.13, 0.60, 0.18),
        ],
    }
}

/// Signed distance to a piece silhouette in square-local coordinates,
/// scaled about the base center.
fn piece_sdf(kind: PieceKind, scale: f64, x: f64, y: f64) -> f64 {
    let (ax, ay) = (0.5, 0.82);
    let (lx, ly) = (ax + (x - ax) / scale, ay + (y - ay) / scale);
    silhouette(kind).iter().map(|s| s.sdf(lx, ly)).fold(f64::MAX, f64::min) * scale
}

const OUTLINE: f64 = 0.018;

fn board_color(scene: &Scene, u: f64, v: f64) -> Rgb {
    let st = &scene.style;
    for o in scene.occluders.iter().rev() {
        if (u - o.center.x).hypot(v - o.center.y) <= o.radius {
            return o.color;
        }
    }
    if (0.0..8.0).contains(&u) && (0.0..8.0).contains(&v) {
        let (c, r) = (u.floor() as usize, v.floor() as usize);
        let index = r * 8 + c;
        let class = scene.position.square(index);
        if let (Some(color), Some(kind)) = (class.color(), class.kind()) {
            let d = piece_sdf(kind, st.piece_scale, u - c as f64, v - r as f64);
            if d <= 0.0 {
                let (fill, outline) = match color {
                    Color::White => (st.white_piece, st.white_outline),
                    Color::Black => (st.black_piece, st.black_outline),
                };
                return if d > -OUTLINE { outline } else { fill };
            }
        }
        return if square_is_light(index) { st.light } else { st.dark };
    }
    let fw = st.frame_width;
    if u >= -fw && u < 8.0 + fw && v >= -fw && v < 8.0 + fw {
        st.frame
    } else {
        st.background
    }
}

/// Draws the scene.
pub fn render(scene: &Scene) -> Rendered {
    let (w, h) = (scene.width, scene.height);
    let to_board = scene.board_to_image.inverse().expect("scene homography is invertible");
    let ss = scene.supersample.max(1);
    let mut planes = vec![vec![0.0f32; w * h]; 3];
    let norm = 1.0 / (ss * ss) as f32;
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f32; 3];
            for sy in 0..ss {
                for sx in 0..ss {
                    let px = x as f64 + (sx as f64 + 0.5) / ss as f64 - 0.5;
                    let py = y as f64 + (sy as f64 + 0.5) / ss as f64 - 0.5;
                    let b = to_board.apply(Point2::new(px, py));
                    let rgb = board_color(scene, b.x, b.y);
                    for c in 0..3 {
                        acc[c] += rgb[c] as f32;
                    }
                }
            }
            // Soft illumination falloff across the frame.
            let gx = x as f32 / w as f32 - 0.5;
            let gy = y as f32 / h as f32 - 0.5;
            let light = 1.0 - 0.12 * (gx * 0.8 + gy * 0.6);
            for c in 0..3 {
                planes[c][y * w + x] = acc[c] * norm * light;
            }
        }
    }
    if scene.blur_sigma > 0.0 {
        for p in planes.iter_mut() {
            *p = blur_plane(p, w, h, scene.blur_sigma);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let noise = Normal::new(0.0f32, scene.noise_sigma.max(0.0) as f32).expect("finite sigma");
    let mut data = vec![0u8; w * h * 3];
    for i in 0..w * h {
        for c in 0..3 {
            let n = if scene.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            data[i * 3 + c] = (planes[c][i] + n).round().clamp(0.0, 255.0) as u8;
        }
    }

    let hmap = &scene.board_to_image;
    let corners = [(0.0, 0.0), (8.0, 0.0), (8.0, 8.0), (0.0, 8.0)].map(|(u, v)| hmap.apply(Point2::new(u, v)));
    let interior = interior_lattice();
    let visible = interior
        .iter()
        .map(|p| scene.occluders.iter().all(|o| p.dist(o.center) > o.radius))
        .collect();
    let lattice = interior.iter().map(|p| hmap.apply(*p)).collect();
    Rendered {
        image: Image::new(w, h, 3, data).expect("render buffer"),
        corners,
        lattice,
        visible,
    }
}

fn blur_plane(p: &[f32], w: usize, h: usize, sigma: f64) -> Vec<f32> {
    let g = crate::raster::GrayImage {
        width: w,
        height: h,
        data: p.to_vec(),
    };
    debug_assert!(!gaussian_kernel(sigma).is_empty());
    g.blur(sigma).data
}

/// The 64 squares of a rendered scene cut out through its true homography,
/// `px` pixels on a side, row-major from the top-left.
pub fn ground_truth_squares(scene: &Scene, image: &Image, px: usize) -> Vec<Image> {
    let to_board = scene.board_to_image.inverse().expect("scene homography is invertible");
    let s = px as f64;
    (0..64)
        .map(|i| {
            let (c, r) = ((i % 8) as f64, (i / 8) as f64);
            let h = Homography::translate(-0.5, -0.5)
                .after(&Homography::scale(s, s))
                .after(&Homography::translate(-c, -r))
                .after(&to_board);
            warp_crop(image, &h, px).expect("square crop")
        })
        .collect()
}

/// Ranges for [`random_scene`].
#[derive(Debug, Clone)]
pub struct SceneRanges {
    pub width: usize,
    pub height: usize,
    pub tilt_deg: (f64, f64),
    pub roll_deg: (f64, f64),
    pub fill: (f64, f64),
    pub offset: f64,
    pub blur_sigma: (f64, f64),
    pub noise_sigma: (f64, f64),
    pub pieces: (usize, usize),
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            tilt_deg: (0.0, 45.0),
            roll_deg: (-8.0, 8.0),
            fill: (0.72, 0.88),
            offset: 0.03,
            blur_sigma: (0.4, 1.0),
            noise_sigma: (1.0, 4.0),
            pieces: (2, 32),
        }
    }
}

pub fn random_scene(rng: &mut impl Rng, ranges: &SceneRanges) -> Scene {
    let pick = |rng: &mut dyn rand::RngCore, r: (f64, f64)| if r.1 > r.0 { rng.random_range(r.0..r.1) } else { r.0 };
    let tilt = pick(rng, ranges.tilt_deg);
    let roll = pick(rng, ranges.roll_deg);
    let fill = pick(rng, ranges.fill);
    let off = (
        rng.random_range(-ranges.offset..=ranges.offset),
        rng.random_range(-ranges.offset..=ranges.offset),
    );
    let hmap = camera_homography(ranges.width, ranges.height, tilt, roll, fill, off);
    let mut scene = Scene::new(ranges.width, ranges.height, hmap);
    let styles = BoardStyle::all();
    scene.style = styles[rng.random_range(0..styles.len())];
    scene.style.piece_scale *= rng.random_range(0.9..1.02);
    let n = rng.random_range(ranges.pieces.0..=ranges.pieces.1);
    scene.position = random_legal_position(rng, n);
    scene.blur_sigma = pick(rng, ranges.blur_sigma);
    scene.noise_sigma = pick(rng, ranges.noise_sigma);
    scene.seed = rng.random();
    scene
}

/// A random placement satisfying the default census with about `pieces`
/// pieces in total (kings included, clamped to 2..=32). Pawns stay off the
/// first and last ranks; a bishop pair always covers both square colors.
pub fn random_legal_position(rng: &mut impl Rng, pieces: usize) -> BoardPosition {
    let pieces = pieces.clamp(2, 32);
    let mut sets: [Vec<PieceKind>; 2] = std::array::from_fn(|_| {
        let mut v = vec![PieceKind::Queen];
        v.extend([PieceKind::Rook; 2]);
        v.extend([PieceKind::Bishop; 2]);
        v.extend([PieceKind::Knight; 2]);
        v.extend([PieceKind::Pawn; 8]);
        v
    });
    let mut removals = 32 - pieces;
    while removals > 0 {
        let side = rng.random_range(0..2);
        if !sets[side].is_empty() {
            let k = rng.random_range(0..sets[side].len());
            sets[side].swap_remove(k);
            removals -= 1;
        }
    }
    // Occasional promotion to a queen.
    for set in sets.iter_mut() {
        if rng.random_bool(0.1) {
            if let Some(k) = set.iter().position(|&p| p == PieceKind::Pawn) {
                set[k] = PieceKind::Queen;
            }
        }
    }

    let mut squares = [PieceClass::Empty; 64];
    let mut free: Vec<usize> = (0..64).collect();
    free.shuffle(rng);
    let mut take = |squares: &[PieceClass; 64], pred: &dyn Fn(usize) -> bool| -> Option<usize> {
        let k = free.iter().position(|&s| squares[s].is_empty() && pred(s))?;
        Some(free.swap_remove(k))
    };
    for color in [Color::White, Color::Black] {
        let s = take(&squares, &|_| true).expect("room for kings");
        squares[s] = PieceClass::piece(color, PieceKind::King);
    }
    for (side, color) in [Color::White, Color::Black].into_iter().enumerate() {
        let mut bishop_shade: Option<bool> = None;
        let mut kinds = sets[side].clone();
        kinds.sort_by_key(|k| k.index());
        for kind in kinds {
            let s = match kind {
                PieceKind::Pawn => take(&squares, &|s| (8..56).contains(&s)),
                PieceKind::Bishop => match bishop_shade {
                    Some(shade) => take(&squares, &move |s| square_is_light(s) != shade),
                    None => take(&squares, &|_| true),
                },
                _ => take(&squares, &|_| true),
            };
            let Some(s) = s else { continue };
            if kind == PieceKind::Bishop {
                bishop_shade = Some(square_is_light(s));
            }
            squares[s] = PieceClass::piece(color, kind);
        }
    }
    BoardPosition::new(squares)
}

/// Probability vectors drawn from a Dirichlet distribution around each
/// square's true class: mean `true_mass` on the true class and the rest
/// spread evenly over the other twelve, with total concentration
/// `concentration`. Small concentrations give peaked vectors that are
/// occasionally confidently wrong; large ones stay close to the mean.
pub fn dirichlet_probabilities(
    rng: &mut impl Rng,
    truth: &BoardPosition,
    concentration: f64,
    true_mass: f64,
) -> BoardProbabilities {
    let squares = truth
        .squares()
        .iter()
        .map(|&class| {
            let mut params = [concentration * (1.0 - true_mass) / (NUM_CLASSES - 1) as f64; NUM_CLASSES];
            params[class.ordinal()] = concentration * true_mass;
            let d = Dirichlet::new(params).expect("positive parameters");
            // Very small parameters can underflow every component to zero.
            let v: [f64; NUM_CLASSES] = d.sample(rng);
            let v = if v.iter().sum::<f64>() > 0.0 { v } else { *SquareProbabilities::one_hot(class).as_array() };
            SquareProbabilities::normalize(v).expect("dirichlet samples are normalized")
        })
        .collect();
    BoardProbabilities::new(squares).expect("64 squares")
}

/// Independent uniform-simplex vectors, unrelated to any legal position.
pub fn random_probabilities(rng: &mut impl Rng) -> BoardProbabilities {
    let d = Dirichlet::new([1.0; NUM_CLASSES]).expect("positive parameters");
    let squares = (0..64)
        .map(|_| SquareProbabilities::normalize(d.sample(rng)).expect("normalized"))
        .collect();
    BoardProbabilities::new(squares).expect("64 squares")
}

/// Writes `image` as PNG plus a sidecar text file with one `x y` corner per line.
pub fn write_fixture(rendered: &Rendered, png: impl AsRef<Path>) -> Result<(), ImageError> {
    let png = png.as_ref();
    rendered.image.save(png)?;
    let text: String = rendered
        .corners
        .iter()
        .map(|p| format!("{} {}\n", p.x, p.y))
        .collect();
    std::fs::write(png.with_extension("txt"), text).map_err(|e| ImageError::Write {
        path: png.display().to_string(),
        source: image::ImageError::IoError(e),
    })
}

/// Reads a sidecar ground-truth file written by [`write_fixture`].
pub fn read_corners(path: impl AsRef<Path>) -> std::io::Result<[Point2; 4]> {
    let text = std::fs::read_to_string(path)?;
    let pts: Vec<Point2> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| {
            let mut it = l.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y))) => Some(Point2::new(x, y)),
                _ => None,
            }
        })
        .collect();
    pts.try_into()
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidData, "expected 4 corner lines"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infer::CensusLimits;

    #[test]
    fn random_positions_are_legal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 10, 21, 32] {
            for _ in 0..50 {
                let pos = random_legal_position(&mut rng, n);
                assert!(pos.violations(&CensusLimits::default()).is_empty());
                let count = pos.squares().iter().filter(|c| !c.is_empty()).count();
                assert_eq!(count, n);
            }
        }
    }

    #[test]
    fn frontal_render_corners_and_colors() {
        let h = Homography::scale(40.0, 40.0).after(&Homography::IDENTITY);
        let h = Homography::translate(40.0, 40.0).after(&h);
        let mut scene = Scene::new(400, 400, h);
        scene.supersample = 1;
        let r = render(&scene);
        assert_eq!(r.corners[0], Point2::new(40.0, 40.0));
        assert_eq!(r.corners[2], Point2::new(360.0, 360.0));
        assert_eq!(r.lattice.len(), 49);
        assert_eq!(r.lattice[0], Point2::new(80.0, 80.0));
        // Square a8 (index 0) is light, b8 dark.
        let st = BoardStyle::wood();
        let px = |x: usize, y: usize| [0, 1, 2].map(|c| r.image.get(x, y, c) as i32);
        let near = |a: [i32; 3], b: Rgb| a.iter().zip(b).all(|(x, y)| (x - y as i32).abs() < 20);
        assert!(near(px(60, 60), st.light));
        assert!(near(px(100, 60), st.dark));
        assert!(near(px(20, 20), st.background) || near(px(20, 20), st.frame));
    }

    #[test]
    fn camera_tilt_shrinks_far_rank() {
        let h = camera_homography(640, 480, 40.0, 0.0, 0.8, (0.0, 0.0));
        let top = h.apply(Point2::new(8.0, 0.0)).x - h.apply(Point2::new(0.0, 0.0)).x;
        let bottom = h.apply(Point2::new(8.0, 8.0)).x - h.apply(Point2::new(0.0, 8.0)).x;
        assert!(top < bottom * 0.95, "{top} vs {bottom}");
        assert!(h.apply(Point2::new(0.0, 0.0)).y < h.apply(Point2::new(0.0, 8.0)).y);
    }

    #[test]
    fn dirichlet_vectors_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pos = random_legal_position(&mut rng, 20);
        let probs = dirichlet_probabilities(&mut rng, &pos, 2.0, 0.8);
        for sq in probs.squares() {
            let s: f64 = sq.as_array().iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fixture_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut scene = Scene::new(80, 80, camera_homography(80, 80, 10.0, 3.0, 0.8, (0.0, 0.0)));
        scene.supersample = 1;
        let r = render(&scene);
        let png = dir.path().join("board.png");
        write_fixture(&r, &png).unwrap();
        let corners = read_corners(png.with_extension("txt")).unwrap();
        assert_eq!(corners, r.corners);
    }
}
