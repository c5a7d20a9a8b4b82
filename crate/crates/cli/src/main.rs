//! `chessdigit`: chessboard photos to FEN placement strings.
//!
//! Exit status: 0 success, 2 board detection failed, 3 classification
//! failed, 4 bad input or configuration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use chessdigit::board_detect::BoardLocation;
use chessdigit::pipeline::{
    amortization_report, bench_intersections, BackendChoice, DetectionMode, DigitizationResult, Pipeline,
    PipelineConfig, PipelineError, Watcher,
};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "chessdigit", version, about = "Digitize chessboard images into FEN piece placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Digitize one image.
    Digitize {
        image: PathBuf,
        /// `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replay 64 probability vectors from this file instead of classifying.
        #[arg(long)]
        probs: Option<PathBuf>,
        /// Board location cache: read if present, rewritten after success.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Also write the result as JSON.
        #[arg(long)]
        result: Option<PathBuf>,
    },
    /// Digitize new images appearing in a directory, in name order.
    Watch {
        dir: PathBuf,
        /// Polling period, seconds; overrides the config file.
        #[arg(long)]
        period: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Process the images present now and exit.
        #[arg(long)]
        once: bool,
    },
    /// Benchmarks.
    Bench {
        #[command(subcommand)]
        what: BenchCommand,
    },
    /// Breakeven of the cached-location check against full detection.
    Amortize {
        /// Seconds for a full detection.
        #[arg(long)]
        fresh: f64,
        /// Seconds for a location check.
        #[arg(long)]
        check: f64,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Pairwise against sweep-line segment intersection.
    Intersections {
        #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 32, 64, 128, 256, 512, 1024])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the recommended `dispatch_threshold` line here.
        #[arg(long)]
        snippet: Option<PathBuf>,
    },
}

fn input_error(message: impl Into<String>) -> PipelineError {
    PipelineError::Input(message.into())
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn read_cache(path: &Path) -> Result<Option<BoardLocation>, PipelineError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    match BoardLocation::parse_line(&text) {
        Some(Ok(loc)) => Ok(Some(loc)),
        Some(Err(e)) => Err(input_error(format!("{}: {e}", path.display()))),
        None => Err(input_error(format!("{}: expected 8 numbers on one line", path.display()))),
    }
}

fn result_json(r: &DigitizationResult) -> serde_json::Value {
    let t = &r.timings;
    json!({
        "fen": r.fen.as_str(),
        "mode": match r.mode { DetectionMode::Fresh => "fresh", DetectionMode::Cached => "cached" },
        "timings": {
            "board_detection_s": t.board_detection_s,
            "board_check_s": t.board_check_s,
            "split_squares_s": t.split_squares_s,
            "probability_vectors_s": t.probability_vectors_s,
            "infer_plus_fen_s": t.infer_plus_fen_s,
            "total_s": t.total_s,
        },
        "confidence": {
            "mean": r.confidence.mean,
            "min": r.confidence.min,
            "min_square": r.confidence.min_square,
            "uncertain": r.confidence.uncertain,
        },
        "corners": r.location.corners().iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Digitize {
            image,
            config,
            probs,
            cache,
            result,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(p) = probs {
                cfg.backend = BackendChoice::File(p);
            }
            let cached = match &cache {
                Some(p) => read_cache(p)?,
                None => None,
            };
            let pipeline = Pipeline::new(cfg)?;
            let r = pipeline.digitize_file(&image, cached.as_ref())?;
            println!("{}", r.record());
            if let Some(p) = &cache {
                write_file(p, &format!("{}\n", r.location.to_line()))?;
            }
            if let Some(p) = &result {
                let text = serde_json::to_string_pretty(&result_json(&r)).expect("plain JSON values");
                write_file(p, &text)?;
            }
        }
        Command::Watch {
            dir,
            period,
            config,
            once,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(p) = period {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(input_error("--period must be positive"));
                }
                cfg.period_s = p;
            }
            if !dir.is_dir() {
                return Err(input_error(format!("{} is not a directory", dir.display())));
            }
            let sleep = Duration::from_secs_f64(cfg.period_s);
            let mut watcher = Watcher::new(Pipeline::new(cfg)?);
            loop {
                for record in watcher.poll(&dir)? {
                    println!("{record}");
                }
                if once {
                    break;
                }
                std::thread::sleep(sleep);
            }
        }
        Command::Bench {
            what:
                BenchCommand::Intersections {
                    sizes,
                    trials,
                    seed,
                    snippet,
                },
        } => {
            let report = bench_intersections(&sizes, trials, seed)?;
            println!("{report}");
            if report.mismatches() > 0 {
                log::error!("{} trials disagreed between the two algorithms", report.mismatches());
            }
            if let (Some(p), Some(text)) = (&snippet, report.config_snippet()) {
                write_file(p, &text)?;
            }
        }
        Command::Amortize { fresh, check } => {
            if !(fresh > 0.0 && check > 0.0 && fresh.is_finite() && check.is_finite()) {
                return Err(input_error("--fresh and --check must be positive"));
            }
            println!("{}", amortization_report(fresh, check));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
