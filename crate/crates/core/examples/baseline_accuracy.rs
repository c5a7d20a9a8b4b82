//! Per-class argmax accuracy of the baseline classifier on rendered boards:
//! `baseline_accuracy [boards]`.
use std::collections::BTreeMap;

use chessdigit::classify::{baseline_classifier, BaselineParams};
use chessdigit::synth::{ground_truth_squares, random_scene, render, SceneRanges};
use rand::SeedableRng;

fn main() {
    let boards: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let params = BaselineParams::default();
    let mut stats: BTreeMap<char, (usize, usize, BTreeMap<char, usize>)> = BTreeMap::new();
    for _ in 0..boards {
        let scene = random_scene(&mut rng, &SceneRanges::default());
        let r = render(&scene);
        for (i, sq) in ground_truth_squares(&scene, &r.image, 96).iter().enumerate() {
            let got = baseline_classifier(sq, &params).argmax().symbol();
            let want = scene.position.square(i).symbol();
            let e = stats.entry(want).or_default();
            e.0 += 1;
            e.1 += (got == want) as usize;
            *e.2.entry(got).or_default() += 1;
        }
    }
    for (k, (n, ok, confusions)) in stats {
        println!("{k}: {ok}/{n} = {:.2}  {:?}", ok as f64 / n as f64, confusions);
    }
}
