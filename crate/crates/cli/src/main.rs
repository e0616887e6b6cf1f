//! `hopperstat`: estimate hopper fill level from camera frames.
//!
//! Exit codes: 0 success, 2 I/O, 3 malformed model/config, 4 calibration
//! failure.

mod error;
mod record;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use hopperstat::analysis::{calibrate_corpus, Corpus};
use hopperstat::synthcorpus::{generate_corpus, CorpusSpec, SynthParams};
use hopperstat::watch::DirPoller;
use hopperstat::{analyze_frame, decode_image, evaluate, CalibrationModel, LineConfig, ScoreKind};

use error::CliError;
use record::{to_line, AnalysisRecord, ErrorRecord};

#[derive(Parser)]
#[command(name = "hopperstat", version, about = "Hopper fill-level estimation from scan-line statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify frames; one JSON record per image on stdout.
    Analyze(AnalyzeArgs),
    /// Fit thresholds on a labeled manifest and write a model document.
    Calibrate(CalibrateArgs),
    /// Accuracy and latency report over a labeled manifest.
    Evaluate(EvaluateArgs),
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
    /// Poll a directory and classify frames as they arrive.
    Watch(WatchArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to the number of logical CPUs).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// a1, a1_sq or a2 (default: the config's, else a2).
    #[arg(long)]
    score_kind: Option<ScoreKind>,
    /// Empty-hopper frame whose line statistics become the baselines.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Manifest file name to leave out (repeatable).
    #[arg(long = "exclude")]
    exclude: Vec<String>,
    /// Report path prefix; writes PREFIX.json and PREFIX.txt.
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.75,1.0")]
    fills: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skew, or a comma-separated list cycled across frames.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    skew: Vec<f64>,
    #[arg(long, default_value_t = SynthParams::default().texture_amplitude)]
    texture: f64,
    #[arg(long, default_value_t = SynthParams::default().wall_noise)]
    wall_noise: f64,
    #[arg(long, default_value_t = SynthParams::default().wall_value)]
    wall_value: f64,
    /// Frame size as WIDTHxHEIGHT.
    #[arg(long, default_value = "640x480", value_parser = parse_size)]
    size: (u32, u32),
}

#[derive(Args)]
struct WatchArgs {
    dir: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    interval_ms: u64,
    /// Stop after this many polls (runs until interrupted otherwise).
    #[arg(long)]
    max_polls: Option<u64>,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<CalibrationModel, CliError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::malformed(format!("{}: not UTF-8", path.display())))?;
    CalibrationModel::from_json(&text).map_err(|e| CliError::malformed(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<LineConfig, CliError> {
    let Some(path) = path else {
        return Ok(LineConfig::default());
    };
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::malformed(format!("{}: not UTF-8", path.display())))?;
    LineConfig::from_json(&text).map_err(|e| CliError::malformed(format!("{}: {e}", path.display())))
}

/// Explicit config lines and score kind must agree with what the model
/// was calibrated on.
fn check_config_against_model(config: &LineConfig, model: &CalibrationModel) -> Result<(), CliError> {
    let lines = model.lines();
    if config.l1.is_some_and(|c| c != lines.l1.coords()) || config.l2.is_some_and(|c| c != lines.l2.coords()) {
        return Err(CliError::malformed("config lines differ from the lines recorded in the model"));
    }
    if config.score_kind.is_some_and(|k| k != model.score_kind()) {
        return Err(CliError::malformed(format!(
            "config score_kind differs from the model's {}",
            model.score_kind()
        )));
    }
    Ok(())
}

fn analyze_path(path: &Path, model: &CalibrationModel) -> Result<AnalysisRecord, CliError> {
    let name = path.display().to_string();
    let bytes = read_file(path)?;
    let img = decode_image(&bytes).map_err(|e| CliError::for_frame(&name, &e))?;
    let analysis = analyze_frame(&img, model).map_err(|e| CliError::for_frame(&name, &e))?;
    Ok(AnalysisRecord::new(name, &analysis))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let config = load_config(args.config.as_deref())?;
    check_config_against_model(&config, &model)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::io(e.to_string()))?;
    let results: Vec<_> = pool.install(|| {
        args.images
            .par_iter()
            .map(|p| analyze_path(p, &model))
            .collect()
    });

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut first_error = None;
    for result in results {
        match result {
            Ok(record) => {
                writeln!(out, "{}", to_line(&record)).map_err(|e| CliError::io(e.to_string()))?;
            }
            Err(e) => {
                eprintln!("hopperstat: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    out.flush().map_err(|e| CliError::io(e.to_string()))?;
    first_error.map_or(Ok(()), Err)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let kind = args.score_kind.or(config.score_kind).unwrap_or_default();
    let corpus = Corpus::load(&args.manifest)?;
    let baseline = match &args.baseline {
        Some(path) => {
            let bytes = read_file(path)?;
            Some(decode_image(&bytes).map_err(|e| CliError::for_frame(&path.display().to_string(), &e))?)
        }
        None => None,
    };
    let model = calibrate_corpus(&corpus, &config, kind, baseline.as_ref())?;
    fs::write(&args.output, model.to_json() + "\n")
        .map_err(|e| CliError::io(format!("{}: {e}", args.output.display())))?;
    let [t1, t2, t3] = model.thresholds();
    eprintln!(
        "calibrated {} frames ({}): thresholds {t1:.3} / {t2:.3} / {t3:.3}, L1 gate {:.3}",
        corpus.entries.len(),
        model.score_kind(),
        model.l1_gate()
    );
    Ok(())
}

fn report_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let base = match prefix.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("txt") => prefix.with_extension(""),
        _ => prefix.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = base.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".json"), with(".txt"))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let corpus = Corpus::load(&args.manifest)?;
    let report = evaluate(&model, &corpus, &args.exclude)?;
    let (json_path, text_path) = report_paths(&args.output);
    let text = report.to_text();
    fs::write(&json_path, report.to_json() + "\n")
        .map_err(|e| CliError::io(format!("{}: {e}", json_path.display())))?;
    fs::write(&text_path, &text).map_err(|e| CliError::io(format!("{}: {e}", text_path.display())))?;
    print!("{text}");
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let spec = CorpusSpec {
        count: args.count,
        fills: args.fills,
        skews: args.skew,
        seed: args.seed,
        template: SynthParams {
            width: args.size.0,
            height: args.size.1,
            texture_amplitude: args.texture,
            wall_noise: args.wall_noise,
            wall_value: args.wall_value,
            ..SynthParams::default()
        },
    };
    let entries = generate_corpus(&args.out, &spec).map_err(|e| match e {
        hopperstat::synthcorpus::SynthError::IoFailure { .. } => CliError::io(e.to_string()),
        _ => CliError::malformed(e.to_string()),
    })?;
    eprintln!("wrote {} frames to {}", entries.len(), args.out.display());
    Ok(())
}

fn cmd_watch(args: WatchArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let config = load_config(args.config.as_deref())?;
    check_config_against_model(&config, &model)?;
    if !args.dir.is_dir() {
        return Err(CliError::io(format!("{}: not a directory", args.dir.display())));
    }

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        // Only fails if a handler is already installed.
        let _ = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst));
    }

    let mut poller = DirPoller::new(&args.dir);
    let interval = Duration::from_millis(args.interval_ms);
    let stdout = io::stdout();
    let mut polls = 0u64;
    while !stop.load(Ordering::SeqCst) {
        let ready = poller
            .poll()
            .map_err(|e| CliError::io(format!("{}: {e}", args.dir.display())))?;
        let mut out = stdout.lock();
        for path in ready {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let line = match analyze_path(&path, &model) {
                Ok(mut record) => {
                    record.file = name;
                    to_line(&record)
                }
                Err(e) => to_line(&ErrorRecord::new(name, e)),
            };
            writeln!(out, "{line}").map_err(|e| CliError::io(e.to_string()))?;
        }
        out.flush().map_err(|e| CliError::io(e.to_string()))?;
        drop(out);

        polls += 1;
        if args.max_polls.is_some_and(|max| polls >= max) {
            break;
        }
        let deadline = Instant::now() + interval;
        while !stop.load(Ordering::SeqCst) && Instant::now() < deadline {
            thread::sleep(Duration::from_millis(10).min(interval));
        }
    }
    Ok(())
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Watch(a) => cmd_watch(a),
    };
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hopperstat: {e}");
            e.exit_code()
        }
    }
}
