//! Renders a random synthetic board: `render_board <seed> <out.png>`.
use chessdigit::synth::{random_scene, render, write_fixture, SceneRanges};
use rand::SeedableRng;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let out = args.next().unwrap_or_else(|| "board.png".into());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let scene = random_scene(&mut rng, &SceneRanges::default());
    let r = render(&scene);
    write_fixture(&r, &out).expect("write fixture");
    println!("{}", chessdigit::encode_fen(&scene.position));
}
