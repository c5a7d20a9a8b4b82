//! Corner accuracy of `locate_board` on random renders:
//! `detect_accuracy [renders] [seed]`.
use std::time::Instant;

use chessdigit::board_detect::{check_grid_points, locate_board_traced, GridCandidate, LocateConfig, PatchTest};
use chessdigit::synth::{random_scene, render, SceneRanges};
use rand::SeedableRng;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let config = LocateConfig::default();
    let test = PatchTest::default();
    let (mut ok, mut points, mut passed) = (0, 0, 0);
    let start = Instant::now();
    for k in 0..n {
        let scene = random_scene(&mut rng, &SceneRanges::default());
        let r = render(&scene);
        let diag = r.image.diagonal();
        let grid = GridCandidate::new(r.lattice.clone()).expect("49 points");
        let hits = check_grid_points(&r.image, &grid, &test).expect("inside");
        for (h, v) in hits.iter().zip(&r.visible) {
            if *v {
                points += 1;
                passed += *h as usize;
            }
        }
        let mut traces = Vec::new();
        match locate_board_traced(&r.image, &config, |t| traces.push(t.clone())) {
            Ok(loc) => {
                let err = loc.corners().iter().zip(&r.corners).map(|(a, b)| a.dist(*b)).fold(0.0, f64::max) / diag;
                if err <= 0.005 {
                    ok += 1;
                } else {
                    let fitted: Vec<usize> = traces.iter().map(|t| t.fitted).collect();
                    println!("render {k}: error {:.4} of diagonal, fitted {fitted:?}", err);
                }
            }
            Err(e) => println!("render {k}: {e}"),
        }
    }
    println!(
        "corners within 0.5%: {ok}/{n}; lattice points passing: {passed}/{points}; {:.1} s",
        start.elapsed().as_secs_f64()
    );
}
