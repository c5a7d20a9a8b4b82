use std::path::Path;
use std::process::{Command, Output};

use chessdigit::classify::{write_probability_text, BoardProbabilities};
use chessdigit::decode_fen;
use chessdigit::synth::{camera_homography, render, write_fixture, Scene};
use chessdigit::Image;

const FEN: &str = "r1bqk2r/pppp1ppp/2n2n2/2b1p3/2B1P3/5N2/PPPP1PPP/RNBQK2R";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chessdigit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A rendered board and the matching one-hot vector file.
fn board_fixture(dir: &Path) -> (String, String) {
    let pos = decode_fen(FEN).unwrap();
    let mut scene = Scene::new(640, 480, camera_homography(640, 480, 25.0, 2.0, 0.8, (0.0, 0.0)));
    scene.position = pos;
    let img = dir.join("board.png");
    write_fixture(&render(&scene), &img).unwrap();
    let probs = dir.join("probs.txt");
    std::fs::write(&probs, write_probability_text(&BoardProbabilities::one_hot(pos.squares()))).unwrap();
    (img.display().to_string(), probs.display().to_string())
}

#[test]
fn digitize_then_reuse_cached_location() {
    let dir = tempfile::tempdir().unwrap();
    let (img, probs) = board_fixture(dir.path());
    let cache = dir.path().join("loc.txt").display().to_string();
    let result = dir.path().join("result.json");

    let first = run(&["digitize", &img, "--probs", &probs, "--cache", &cache, "--result", result.to_str().unwrap()]);
    assert!(first.status.success(), "{first:?}");
    let line = stdout(&first);
    assert!(line.starts_with(&format!("{FEN}\tmode=fresh")), "{line}");
    for key in ["board_detection_s=", "board_check_s=", "split_squares_s=", "probability_vectors_s=", "infer_plus_fen_s=", "total_s="] {
        assert!(line.contains(key), "{key} missing from {line}");
    }
    let cached_text = std::fs::read_to_string(&cache).unwrap();
    assert_eq!(cached_text.split_whitespace().count(), 8);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(json["fen"], FEN);
    assert_eq!(json["mode"], "fresh");

    let second = run(&["digitize", &img, "--probs", &probs, "--cache", &cache]);
    assert!(second.status.success(), "{second:?}");
    assert!(stdout(&second).starts_with(&format!("{FEN}\tmode=cached\tboard_detection_s=-")), "{}", stdout(&second));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let blank = dir.path().join("blank.png");
    Image::filled(320, 240, 3, 100).unwrap().save(&blank).unwrap();
    assert_eq!(run(&["digitize", blank.to_str().unwrap()]).status.code(), Some(2));

    let (img, _) = board_fixture(dir.path());
    let short = dir.path().join("short.txt");
    std::fs::write(&short, "1 0 0 0 0 0 0 0 0 0 0 0 0\n").unwrap();
    assert_eq!(run(&["digitize", &img, "--probs", short.to_str().unwrap()]).status.code(), Some(3));

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "check_tolerance = 99\n").unwrap();
    assert_eq!(run(&["digitize", &img, "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(run(&["digitize", &img, "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(run(&["digitize", "/nonexistent.png"]).status.code(), Some(4));
    assert_eq!(run(&["digitize"]).status.code(), Some(4));
    let bad_cache = dir.path().join("cache.txt");
    std::fs::write(&bad_cache, "1 2 3\n").unwrap();
    assert_eq!(run(&["digitize", &img, "--cache", bad_cache.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn watch_empty_directory_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["watch", dir.path().to_str().unwrap(), "--period", "0.5", "--once"]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).is_empty());
    assert_eq!(run(&["watch", "/nonexistent-dir", "--once"]).status.code(), Some(4));
}

#[test]
fn amortize_and_bench() {
    let out = run(&["amortize", "--fresh", "3.30", "--check", "0.15"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("1 out of 22") && text.contains("1 out of 14"), "{text}");
    let never = stdout(&run(&["amortize", "--fresh", "2", "--check", "3"]));
    assert!(never.contains("never amortized"));

    let dir = tempfile::tempdir().unwrap();
    let snippet = dir.path().join("threshold.cfg");
    let out = run(&["bench", "intersections", "--sizes", "8,16,32", "--trials", "2", "--snippet", snippet.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(stdout(&out).lines().count(), 5);
    assert_eq!(run(&["bench", "intersections", "--trials", "0"]).status.code(), Some(4));
}
