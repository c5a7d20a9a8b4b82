//! Pairwise against sweep-line intersection timing, to pick the dispatch
//! threshold.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::geometry::{intersections_naive, intersections_sweep, Point2, Segment2};

const MERGE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Median seconds per run.
    pub naive_s: f64,
    pub sweep_s: f64,
    /// Mean number of intersection points per set.
    pub mean_points: f64,
    /// Trials where the two point sets differed.
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Smallest measured size from which the sweep is faster at every larger
    /// measured size.
    pub fn crossover(&self) -> Option<usize> {
        let k = self.rows.iter().rposition(|r| r.sweep_s >= r.naive_s).map_or(0, |i| i + 1);
        self.rows.get(k).map(|r| r.n)
    }

    /// Largest size still dispatched to the pairwise algorithm.
    pub fn recommended_threshold(&self) -> Option<usize> {
        let c = self.crossover()?;
        Some(self.rows.iter().filter(|r| r.n < c).map(|r| r.n).max().unwrap_or(c.saturating_sub(1)).max(1))
    }

    pub fn mismatches(&self) -> usize {
        self.rows.iter().map(|r| r.mismatches).sum()
    }

    /// A pipeline config line setting the measured threshold.
    pub fn config_snippet(&self) -> Option<String> {
        self.recommended_threshold().map(|t| format!("dispatch_threshold = {t}\n"))
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} {:>12} {:>12} {:>10} {:>10}", "n", "naive_s", "sweep_s", "points", "mismatch")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>6} {:>12.3e} {:>12.3e} {:>10.1} {:>10}",
                r.n, r.naive_s, r.sweep_s, r.mean_points, r.mismatches
            )?;
        }
        match self.crossover() {
            Some(c) => write!(f, "crossover n* = {c}"),
            None => write!(f, "no crossover within the measured sizes"),
        }
    }
}

/// `n` random segments in a 1000-unit square, sized so the expected number
/// of crossings grows linearly with `n`, as with board line sets clipped to
/// their neighbourhoods.
pub fn random_segments(rng: &mut impl Rng, n: usize) -> Vec<Segment2> {
    let len = 2000.0 / (n.max(1) as f64).sqrt();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let c = Point2::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
        let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let half = Point2::new(a.cos(), a.sin()) * (0.5 * len);
        if let Ok(s) = Segment2::new(c - half, c + half) {
            out.push(s);
        }
    }
    out
}

/// Whether every point of each set lies within `tol` of a point of the other.
pub fn same_point_set(a: &[Point2], b: &[Point2], tol: f64) -> bool {
    let covered = |xs: &[Point2], ys: &[Point2]| {
        let mut sorted = ys.to_vec();
        sorted.sort_by(|p, q| p.x.total_cmp(&q.x));
        xs.iter().all(|p| {
            let lo = sorted.partition_point(|q| q.x < p.x - tol);
            sorted[lo..].iter().take_while(|q| q.x <= p.x + tol).any(|q| q.dist(*p) <= tol)
        })
    };
    covered(a, b) && covered(b, a)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Times both algorithms on the same random sets, `trials` sets per size,
/// and cross-checks their outputs.
pub fn bench_intersections(sizes: &[usize], trials: usize, seed: u64) -> Result<BenchReport, PipelineError> {
    if sizes.is_empty() {
        return Err(PipelineError::Input("no sizes to benchmark".into()));
    }
    if trials == 0 {
        return Err(PipelineError::Input("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let (mut naive_t, mut sweep_t) = (Vec::new(), Vec::new());
        let (mut points, mut mismatches) = (0usize, 0usize);
        for _ in 0..trials {
            let segs = random_segments(&mut rng, n);
            // Small inputs run in microseconds: repeat until the clock
            // resolves them.
            let reps = (4096 / n.max(1)).max(1);
            let t = Instant::now();
            let mut a = Vec::new();
            for _ in 0..reps {
                a = intersections_naive(&segs, MERGE_RADIUS);
            }
            naive_t.push(t.elapsed().as_secs_f64() / reps as f64);
            let t = Instant::now();
            let mut b = Vec::new();
            for _ in 0..reps {
                b = intersections_sweep(&segs, MERGE_RADIUS);
            }
            sweep_t.push(t.elapsed().as_secs_f64() / reps as f64);
            points += a.len();
            if !same_point_set(&a, &b, 10.0 * MERGE_RADIUS) {
                mismatches += 1;
            }
        }
        rows.push(BenchRow {
            n,
            naive_s: median(naive_t),
            sweep_s: median(sweep_t),
            mean_points: points as f64 / trials as f64,
            mismatches,
        });
    }
    Ok(BenchReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, naive_s: f64, sweep_s: f64) -> BenchRow {
        BenchRow {
            n,
            naive_s,
            sweep_s,
            mean_points: 0.0,
            mismatches: 0,
        }
    }

    #[test]
    fn crossover_is_where_sweep_stays_ahead() {
        let r = BenchReport {
            rows: vec![row(8, 1.0, 2.0), row(16, 2.0, 1.5), row(32, 4.0, 4.5), row(64, 9.0, 6.0), row(128, 30.0, 12.0)],
        };
        assert_eq!(r.crossover(), Some(64));
        assert_eq!(r.recommended_threshold(), Some(32));
        assert_eq!(r.config_snippet().unwrap(), "dispatch_threshold = 32\n");
        let never = BenchReport {
            rows: vec![row(8, 1.0, 2.0)],
        };
        assert_eq!(never.crossover(), None);
    }

    #[test]
    fn point_set_comparison() {
        let a = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)];
        let b = [Point2::new(1.0, 1.0 + 1e-9), Point2::new(0.0, 0.0)];
        assert!(same_point_set(&a, &b, 1e-6));
        assert!(!same_point_set(&a, &b[..1], 1e-6));
    }

    #[test]
    fn zero_trials_and_empty_sizes_rejected() {
        assert!(bench_intersections(&[8], 0, 1).is_err());
        assert!(bench_intersections(&[], 3, 1).is_err());
    }

    #[test]
    fn small_run_agrees() {
        let r = bench_intersections(&[8, 32], 3, 9).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.mismatches(), 0);
    }
}
