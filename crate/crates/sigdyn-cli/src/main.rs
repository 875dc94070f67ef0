//! Command line front end: extract mechanical trajectories from signature
//! files, evaluate a corpus under the verification protocol, or time the
//! pipeline against its performance budgets.
//!
//! Exit codes: 0 success, 1 input or configuration problem, 2 a signature
//! left the robot's workspace (the message names the sample), 3 protocol
//! violations (not enough data for an evaluation), 4 performance budget
//! exceeded.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

use sigdyn::error::{Error, Result};
use sigdyn::eval::{evaluate, plan_trials, ForgeryType};
use sigdyn::features::{feature_csv, FeatureSet, RobotKind};
use sigdyn::ingest::{read_manifest, TrajectorySI};
use sigdyn::pipeline::{
    det_csv, extract_file, report_txt, score_plan, scores_csv, FormatChoice, PipelineConfig,
    Verifier,
};
use sigdyn::robot2d::{Arm2d, GravityMode};
use sigdyn::robot3d::Arm3d;

#[derive(Parser)]
#[command(
    name = "sigdyn",
    version,
    about = "Signature verification through robot arm joint and torque dynamics"
)]
struct Cli {
    /// Configuration file with one key=value per line; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory that receives output files (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: one per logical core).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Robot model: 2d or 3d.
    #[arg(long, global = true)]
    robot: Option<String>,

    /// Feature set: f1 (angles), f2 (torques) or f3 (both).
    #[arg(long = "features", global = true)]
    feature_set: Option<String>,

    /// Verifier: dtw or manhattan.
    #[arg(long, global = true)]
    verifier: Option<String>,

    /// Writing plane of the planar arm: vertical or horizontal.
    #[arg(long, global = true)]
    gravity: Option<String>,

    /// References enrolled per user.
    #[arg(long, global = true)]
    refs: Option<String>,

    /// Resample rate in Hz after pen-up removal, or "none".
    #[arg(long, global = true)]
    resample: Option<String>,

    /// Histogram bins per channel (manhattan verifier).
    #[arg(long, global = true)]
    bins: Option<String>,

    /// Device resolution of input files in dots per inch.
    #[arg(long, global = true)]
    dpi: Option<String>,

    /// Device sampling rate in Hz.
    #[arg(long, global = true)]
    rate: Option<String>,

    /// Input format: auto, svc or csv.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Impostor source for evaluation: random or skilled.
    #[arg(long, global = true)]
    forgery: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write joint, torque and feature trajectories for each signature file.
    Extract {
        /// Signature files to process.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Score a whole corpus manifest and report error rates.
    Evaluate {
        /// Tab-separated manifest: user_id, genuine|skilled, relative path.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Time inverse kinematics and dynamics against their budgets.
    Bench,
}

/// Everything the subcommands need beyond the pipeline configuration.
struct Settings {
    config: PipelineConfig,
    forgery: ForgeryType,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            config: PipelineConfig::default(),
            forgery: ForgeryType::Random,
        }
    }
}

fn apply_setting(settings: &mut Settings, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("invalid {what} {value:?}"));
    match key {
        "robot" => {
            settings.config.robot = match value {
                "2d" => RobotKind::TwoD,
                "3d" => RobotKind::ThreeD,
                _ => return Err(bad("robot")),
            }
        }
        "features" => {
            settings.config.feature_set = match value {
                "f1" => FeatureSet::F1,
                "f2" => FeatureSet::F2,
                "f3" => FeatureSet::F3,
                _ => return Err(bad("feature set")),
            }
        }
        "verifier" => {
            settings.config.verifier = match value {
                "dtw" => Verifier::Dtw,
                "manhattan" => Verifier::Manhattan,
                _ => return Err(bad("verifier")),
            }
        }
        "gravity" => {
            settings.config.gravity = match value {
                "vertical" => GravityMode::Vertical,
                "horizontal" => GravityMode::Horizontal,
                _ => return Err(bad("gravity mode")),
            }
        }
        "refs" => {
            settings.config.refs = value.parse().map_err(|_| bad("reference count"))?;
        }
        "resample" => {
            settings.config.resample_hz = if value == "none" {
                None
            } else {
                Some(value.parse().map_err(|_| bad("resample rate"))?)
            }
        }
        "bins" => {
            settings.config.bins = value.parse().map_err(|_| bad("bin count"))?;
        }
        "dpi" => {
            settings.config.dpi = value.parse().map_err(|_| bad("dpi"))?;
        }
        "rate" => {
            settings.config.rate = value.parse().map_err(|_| bad("rate"))?;
        }
        "format" => {
            settings.config.format = match value {
                "auto" => FormatChoice::Auto,
                "svc" => FormatChoice::Svc,
                "csv" => FormatChoice::Csv,
                _ => return Err(bad("format")),
            }
        }
        "forgery" => {
            settings.forgery = match value {
                "random" => ForgeryType::Random,
                "skilled" => ForgeryType::Skilled,
                _ => return Err(bad("forgery type")),
            }
        }
        _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
    }
    Ok(())
}

fn load_config_file(path: &Path, settings: &mut Settings) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected key=value, got {line:?}", path.display(), idx + 1))
        })?;
        apply_setting(settings, key.trim(), value.trim())?;
    }
    Ok(())
}

fn build_settings(cli: &Cli) -> Result<Settings> {
    let mut settings = Settings::default();
    if let Some(path) = &cli.config {
        load_config_file(path, &mut settings)?;
    }
    let flags: [(&str, &Option<String>); 11] = [
        ("robot", &cli.robot),
        ("features", &cli.feature_set),
        ("verifier", &cli.verifier),
        ("gravity", &cli.gravity),
        ("refs", &cli.refs),
        ("resample", &cli.resample),
        ("bins", &cli.bins),
        ("dpi", &cli.dpi),
        ("rate", &cli.rate),
        ("format", &cli.format),
        ("forgery", &cli.forgery),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            apply_setting(&mut settings, key, v)?;
        }
    }
    Ok(settings)
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn cmd_extract(files: &[PathBuf], settings: &Settings, out: &Path) -> Result<i32> {
    for file in files {
        let ex = extract_file(file, &settings.config)?;
        let stem = file
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Config(format!("cannot derive a name from {}", file.display())))?;
        let q = write_out(out, &format!("{stem}_q.csv"), &ex.joint_csv())?;
        let tau = write_out(out, &format!("{stem}_tau.csv"), &ex.torque_csv())?;
        let feat = write_out(out, &format!("{stem}_features.csv"), &feature_csv(ex.features()))?;
        println!(
            "{} -> {} {} {}",
            file.display(),
            q.display(),
            tau.display(),
            feat.display()
        );
    }
    Ok(0)
}

fn cmd_evaluate(manifest: &Path, settings: &Settings, out: &Path) -> Result<i32> {
    let entries = read_manifest(manifest)?;
    let plan = plan_trials(&entries, settings.config.refs, settings.forgery)?;
    let trials = score_plan(&plan, &settings.config)?;
    let report = evaluate(&trials)?;

    write_out(out, "scores.csv", &scores_csv(&trials))?;
    write_out(out, "det.csv", &det_csv(&report))?;
    let text = report_txt(&report, &settings.config);
    write_out(out, "report.txt", &text)?;
    print!("{text}");
    println!("wrote scores.csv, det.csv, report.txt to {}", out.display());
    Ok(0)
}

/// A smooth 5-second loop, the workload for all three timed stages.
fn bench_trajectory() -> TrajectorySI {
    let n = 500;
    let dt = 0.01;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        x.push(0.008 * (std::f64::consts::TAU * 0.8 * t).cos());
        y.push(0.008 * (std::f64::consts::TAU * 1.1 * t).sin());
    }
    TrajectorySI::from_uniform(x, y, 0.0, dt).unwrap()
}

fn best_of<T>(runs: usize, mut f: impl FnMut() -> T) -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..runs {
        let start = Instant::now();
        let value = f();
        let elapsed = start.elapsed();
        std::hint::black_box(value);
        if elapsed < best {
            best = elapsed;
        }
    }
    best
}

fn cmd_bench(out: Option<&Path>) -> Result<i32> {
    let traj = bench_trajectory();

    let arm2 = Arm2d::default();
    let placed2 = arm2.place(&traj)?;
    let joints2 = arm2.ik_trajectory(&placed2)?;
    let arm3 = Arm3d::default();
    let placed3 = arm3.place(&traj)?;
    let joints3 = arm3.ik_trajectory(&placed3)?;

    let ik2 = best_of(5, || arm2.ik_trajectory(&placed2).unwrap());
    let tau2 = best_of(5, || arm2.inverse_dynamics(&joints2).unwrap());
    let tau3 = best_of(5, || arm3.inverse_dynamics(&joints3).unwrap());

    let stages = [
        ("ik_2d_ms", ik2, 1.0),
        ("tau_2d_ms", tau2, 1.0),
        ("tau_3d_ms", tau3, 50.0),
    ];
    let mut text = format!("samples: {}\n", traj.len());
    let mut over_budget = false;
    for (name, took, budget_ms) in stages {
        let ms = took.as_secs_f64() * 1e3;
        text.push_str(&format!("{name}: {ms:.3} (budget {budget_ms})\n"));
        if ms > budget_ms {
            over_budget = true;
        }
    }
    print!("{text}");
    if let Some(dir) = out {
        write_out(dir, "bench.txt", &text)?;
    }
    if over_budget {
        eprintln!("error: a pipeline stage exceeded its budget");
        return Ok(4);
    }
    Ok(0)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Workspace { .. } | Error::SingularAxis { .. } => 2,
        Error::Protocol(_) => 3,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<i32> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {jobs} worker threads: {e}")))?;
    }
    let settings = build_settings(cli)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Extract { files } => cmd_extract(files, &settings, &out),
        Command::Evaluate { manifest } => cmd_evaluate(manifest, &settings, &out),
        Command::Bench => cmd_bench(cli.out.as_deref()),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems share the input-error exit code; help and
            // version requests are not errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
