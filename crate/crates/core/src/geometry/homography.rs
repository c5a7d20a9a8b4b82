use nalgebra::{SMatrix, SVector, SymmetricEigen};

use super::{triangle_area2, GeometryError, Point2};
use crate::raster::Image;

/// Determinants below this magnitude are treated as singular.
pub const SINGULAR_EPS: f64 = 1e-12;

/// Projective map of the plane, stored row-major.
///
/// Normalized so that the bottom-right entry is 1 whenever it is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_rows(m: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let h = Self { m }.normalized();
        let det = h.determinant();
        if det.abs() <= SINGULAR_EPS {
            return Err(GeometryError::Singular(det));
        }
        Ok(h)
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Self {
            m: [[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn translate(tx: f64, ty: f64) -> Self {
        Self {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.m
    }

    fn normalized(mut self) -> Self {
        let s = self.m[2][2];
        if s != 0.0 {
            for v in self.m.iter_mut().flatten() {
                *v /= s;
            }
        }
        self
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }

    fn matrix(&self) -> SMatrix<f64, 3, 3> {
        SMatrix::<f64, 3, 3>::from_fn(|r, c| self.m[r][c])
    }

    fn from_matrix(m: SMatrix<f64, 3, 3>) -> Self {
        Self {
            m: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
        }
        .normalized()
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let m = &self.m;
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        Point2::new(
            (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w,
            (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w,
        )
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let det = self.determinant();
        if det.abs() <= SINGULAR_EPS {
            return Err(GeometryError::Singular(det));
        }
        self.matrix()
            .try_inverse()
            .map(Self::from_matrix)
            .ok_or(GeometryError::Singular(det))
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &Homography) -> Self {
        Self::from_matrix(self.matrix() * first.matrix())
    }

    /// Least-squares fit mapping `src[i]` to `dst[i]` (normalized DLT).
    pub fn fit(src: &[Point2], dst: &[Point2]) -> Result<Self, GeometryError> {
        assert_eq!(src.len(), dst.len(), "correspondence lists differ in length");
        if src.len() < 4 {
            return Err(GeometryError::TooFewPoints(src.len()));
        }
        if src.iter().chain(dst).any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let ns = conditioning(src);
        let nd = conditioning(dst);
        let mut ata = SMatrix::<f64, 9, 9>::zeros();
        for (s, d) in src.iter().zip(dst) {
            let s = ns.apply(*s);
            let d = nd.apply(*d);
            let r1 = SVector::<f64, 9>::from([-s.x, -s.y, -1.0, 0.0, 0.0, 0.0, d.x * s.x, d.x * s.y, d.x]);
            let r2 = SVector::<f64, 9>::from([0.0, 0.0, 0.0, -s.x, -s.y, -1.0, d.y * s.x, d.y * s.y, d.y]);
            ata += r1 * r1.transpose() + r2 * r2.transpose();
        }
        let eig = SymmetricEigen::new(ata);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nine eigenvalues");
        let v = eig.eigenvectors.column(imin);
        let h = SMatrix::<f64, 3, 3>::from_row_slice(v.as_slice());
        let denorm = nd.inverse()?.matrix() * h * ns.matrix();
        let out = Self::from_matrix(denorm);
        let det = out.determinant();
        if !det.is_finite() || det.abs() <= SINGULAR_EPS {
            return Err(GeometryError::Singular(det));
        }
        Ok(out)
    }
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn conditioning(pts: &[Point2]) -> Homography {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Point2::default(), |acc, p| acc + *p) * (1.0 / n);
    let mean = pts.iter().map(|p| p.dist(c)).sum::<f64>() / n;
    let s = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    Homography {
        m: [[s, 0.0, -s * c.x], [0.0, s, -s * c.y], [0.0, 0.0, 1.0]],
    }
}

fn check_quad(q: &[Point2; 4]) -> Result<(), GeometryError> {
    if q.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let diag = q
        .iter()
        .flat_map(|a| q.iter().map(move |b| a.dist(*b)))
        .fold(0.0, f64::max);
    let eps = 1e-9 * diag * diag;
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        if triangle_area2(q[i], q[j], q[k]) <= eps {
            return Err(GeometryError::DegenerateQuad(i, j, k));
        }
    }
    Ok(())
}

/// The projective map sending each `src[i]` to `dst[i]`.
pub fn homography_from_quad(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<Homography, GeometryError> {
    check_quad(src)?;
    check_quad(dst)?;
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let (s, d) = (src[i], dst[i]);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[s.x, s.y, 1.0, 0.0, 0.0, 0.0, -d.x * s.x, -d.x * s.y]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, s.x, s.y, 1.0, -d.y * s.x, -d.y * s.y]);
        b[r] = d.x;
        b[r + 1] = d.y;
    }
    let h = a.lu().solve(&b).ok_or(GeometryError::Singular(0.0))?;
    Homography::from_rows([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])
}

/// Samples `image` into an `out_size` square through the inverse of `h`
/// (`h` maps source pixels to output pixels). Bilinear; black outside.
pub fn warp_crop(image: &Image, h: &Homography, out_size: usize) -> Result<Image, GeometryError> {
    warp(image, h, out_size, out_size)
}

pub(crate) fn warp(image: &Image, h: &Homography, width: usize, height: usize) -> Result<Image, GeometryError> {
    if width == 0 || height == 0 {
        return Err(GeometryError::EmptyOutput);
    }
    let inv = h.inverse()?;
    let ch = image.channels();
    let mut out = vec![0u8; width * height * ch];
    let mut px = [0.0f64; 3];
    for y in 0..height {
        for x in 0..width {
            let src = inv.apply(Point2::new(x as f64, y as f64));
            if image.sample_bilinear(src.x, src.y, &mut px[..ch]) {
                let o = (y * width + x) * ch;
                for c in 0..ch {
                    out[o + c] = px[c].round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    Ok(Image::new(width, height, ch, out).expect("buffer sized for output"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square(k: f64) -> [Point2; 4] {
        [
            Point2::new(0.0, 0.0),
            Point2::new(k, 0.0),
            Point2::new(k, k),
            Point2::new(0.0, k),
        ]
    }

    fn close(a: &Homography, b: &[[f64; 3]; 3]) -> bool {
        a.rows()
            .iter()
            .flatten()
            .zip(b.iter().flatten())
            .all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn identity_from_equal_quads() {
        let h = homography_from_quad(&unit_square(1.0), &unit_square(1.0)).unwrap();
        assert!(close(&h, &Homography::IDENTITY.rows()));
    }

    #[test]
    fn doubled_square_is_diagonal() {
        let h = homography_from_quad(&unit_square(1.0), &unit_square(2.0)).unwrap();
        assert!(close(&h, &[[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]));
    }

    #[test]
    fn degenerate_quad_rejected() {
        let bad = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 3.0),
        ];
        assert!(matches!(
            homography_from_quad(&bad, &unit_square(1.0)),
            Err(GeometryError::DegenerateQuad(..))
        ));
    }

    fn random_convex_quad(rng: &mut impl Rng) -> [Point2; 4] {
        let c = Point2::new(rng.random_range(100.0..500.0), rng.random_range(100.0..500.0));
        let base = rng.random_range(0.0..std::f64::consts::TAU);
        std::array::from_fn(|i| {
            let a = base + i as f64 * std::f64::consts::FRAC_PI_2 + rng.random_range(-0.5..0.5);
            let r = rng.random_range(40.0..200.0);
            c + Point2::new(a.cos(), a.sin()) * r
        })
    }

    #[test]
    fn random_quads_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let src = random_convex_quad(&mut rng);
            let dst = random_convex_quad(&mut rng);
            let h = homography_from_quad(&src, &dst).unwrap();
            for (s, d) in src.iter().zip(&dst) {
                assert!(h.apply(*s).dist(*d) < 1e-6);
            }
            let back = h.inverse().unwrap();
            for (s, d) in src.iter().zip(&dst) {
                assert!(back.apply(*d).dist(*s) < 1e-6);
            }
        }
    }

    #[test]
    fn least_squares_fit_recovers_exact_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = homography_from_quad(&unit_square(8.0), &random_convex_quad(&mut rng)).unwrap();
        let src: Vec<Point2> = (1..8)
            .flat_map(|j| (1..8).map(move |i| Point2::new(i as f64, j as f64)))
            .collect();
        let dst: Vec<Point2> = src.iter().map(|p| h.apply(*p)).collect();
        let fit = Homography::fit(&src, &dst).unwrap();
        for corner in unit_square(8.0) {
            assert!(fit.apply(corner).dist(h.apply(corner)) < 1e-6);
        }
    }

    fn pattern(n: usize) -> Image {
        let data = (0..n * n).map(|i| ((i * 37 + i / n * 11) % 251) as u8).collect();
        Image::new(n, n, 1, data).unwrap()
    }

    #[test]
    fn identity_warp_is_top_left_crop() {
        let img = pattern(20);
        let out = warp_crop(&img, &Homography::IDENTITY, 12).unwrap();
        for y in 0..12 {
            for x in 0..12 {
                assert_eq!(out.get(x, y, 0), img.get(x, y, 0));
            }
        }
    }

    #[test]
    fn quarter_turn_warp_rotates() {
        let n = 16;
        let img = pattern(n);
        // (x, y) -> (n - 1 - y, x)
        let h = Homography::from_rows([[0.0, -1.0, (n - 1) as f64], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let out = warp_crop(&img, &h, n).unwrap();
        for y in 0..n {
            for x in 0..n {
                assert_eq!(out.get(n - 1 - y, x, 0), img.get(x, y, 0));
            }
        }
    }

    #[test]
    fn singular_warp_rejected() {
        assert!(Homography::from_rows([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(matches!(
            warp_crop(&pattern(4), &Homography::IDENTITY, 0),
            Err(GeometryError::EmptyOutput)
        ));
    }
}
