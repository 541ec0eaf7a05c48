//! `depthcount` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use depthcount::classifier::{train, ModelSlot, SvmParams};
use depthcount::frameio::{load_pcds_labels, open_sequence, save_model, transform_rows, DepthFrame, FrameSource};
use depthcount::geometry::calibrate_extrinsics;
use depthcount::pipeline::{
    bench, evaluate, extract_head_samples, extract_track_samples, head_training_sets, parse_feature_csv,
    parse_predictions, process_stream, track_training_sets, write_feature_csv, write_predictions, Models,
    PipelineConfig, TrainingOptions, VideoCounts,
};
use depthcount::synthgen::{generate, write_scene, SceneSpec};
use depthcount::{Intrinsics, Transform};

#[derive(Parser)]
#[command(name = "depthcount", version, about = "People counting from overhead depth video")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Enter,
    Exit,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleKind {
    Heads,
    Tracks,
}

#[derive(clap::Args)]
struct SvmArgs {
    /// Labeled feature CSV (`label,f0,f1,...`).
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Which slot's default hyperparameters to start from.
    #[arg(long, value_enum, default_value = "enter")]
    direction: Dir,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Count people in a sequence directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the retirement event log here.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Write a one-row predictions CSV here.
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Video id for `--counts`; defaults to the input path.
        #[arg(long)]
        video_id: Option<String>,
    },
    /// Fit camera-to-world extrinsics from point correspondences.
    Calibrate {
        /// CSV with columns `xw,yw,zw,xc,yc,zc`.
        #[arg(long)]
        points: PathBuf,
        /// Manifest fragment with `T row col value` lines.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a head classifier from a feature CSV.
    TrainHeads(SvmArgs),
    /// Train a trajectory classifier from a feature CSV.
    TrainTracks(SvmArgs),
    /// Extract labeled training features from synthetic scene specs.
    Extract {
        #[arg(long, value_enum)]
        kind: SampleKind,
        /// Scene spec files.
        #[arg(long, required = true, num_args = 1..)]
        spec: Vec<PathBuf>,
        /// Writes `<kind>_enter.csv` and `<kind>_exit.csv` here.
        #[arg(long)]
        out_dir: PathBuf,
        /// Pipeline config; for tracks, its head models gate the proposals.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Per-stage latency over a sequence.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Render a synthetic scene into a sequence directory.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        // without a config there are no model paths, so both classifier stages are off
        None => Ok(PipelineConfig::unclassified()),
    }
}

fn open_input(dir: &Path) -> Result<(FrameSource, Intrinsics, Transform)> {
    let src = open_sequence(dir).with_context(|| format!("opening {}", dir.display()))?;
    let m = src.manifest();
    let intr = m.intrinsics;
    let extr = match &m.extrinsics {
        Some(e) => e.resolve().context("resolving extrinsics")?,
        None => bail!("{}: manifest has no extrinsics (T or calib lines)", dir.display()),
    };
    Ok((src, intr, extr))
}

fn cmd_run(
    config: Option<&Path>,
    input: &Path,
    events: Option<&Path>,
    counts: Option<&Path>,
    video_id: Option<String>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let models = Models::<f64>::load(&cfg.models)?;
    let (src, intr, extr) = open_input(input)?;
    let res = process_stream(&cfg, &models, &intr, &extr, src)?;
    println!("frames   {}", res.frames.len());
    println!("entered  {}", res.counts.entered);
    println!("exited   {}", res.counts.exited);
    println!("rejected {}", res.counts.rejected);
    if let Some(p) = events {
        fs::write(p, res.event_log()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = counts {
        let row = VideoCounts {
            video_id: video_id.unwrap_or_else(|| input.display().to_string()),
            entering: res.counts.entered as u32,
            exiting: res.counts.exited as u32,
        };
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_predictions(f, &[row])?;
    }
    Ok(())
}

fn parse_points(text: &str) -> Result<(Vec<[f64; 3]>, Vec<[f64; 3]>)> {
    let (mut world, mut cam) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(char::is_alphabetic) {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("points line {}: bad number", i + 1))?;
        if v.len() != 6 {
            bail!("points line {}: expected 6 values, got {}", i + 1, v.len());
        }
        world.push([v[0], v[1], v[2]]);
        cam.push([v[3], v[4], v[5]]);
    }
    Ok((world, cam))
}

fn cmd_calibrate(points: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(points).with_context(|| format!("reading {}", points.display()))?;
    let (world, cam) = parse_points(&text)?;
    let cal = calibrate_extrinsics(&world, &cam)?;
    fs::write(out, transform_rows(&cal.transform)).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "points {}  rms {:.3} mm (affine {:.3} mm)",
        world.len(),
        cal.rms_rigid,
        cal.rms_affine
    );
    Ok(())
}

fn cmd_train(args: &SvmArgs, head: bool) -> Result<()> {
    let slot = match (head, args.direction) {
        (true, Dir::Enter) => ModelSlot::HeadEnter,
        (true, Dir::Exit) => ModelSlot::HeadExit,
        (false, Dir::Enter) => ModelSlot::TrackEnter,
        (false, Dir::Exit) => ModelSlot::TrackExit,
    };
    let mut params: SvmParams<f64> = slot.default_params();
    if let Some(g) = args.gamma {
        params.gamma = g;
    }
    if let Some(c) = args.c {
        params.c = c;
    }
    if let Some(t) = args.tol {
        params.tol = t;
    }
    let f = fs::File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let (xs, ys) = parse_feature_csv::<f64, _>(f)?;
    let model = train(&xs, &ys, &params)?;
    save_model(&args.out, &model)?;
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| model.predict(x).unwrap_or(false) == (y > 0))
        .count();
    println!(
        "samples {}  support vectors {}  training accuracy {:.2}%",
        xs.len(),
        model.support.len(),
        100.0 * correct as f64 / xs.len().max(1) as f64
    );
    Ok(())
}

fn cmd_extract(kind: SampleKind, specs: &[PathBuf], out_dir: &Path, config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let models = match kind {
        SampleKind::Heads => Models::default(),
        SampleKind::Tracks => Models::<f64>::load(&cfg.models)?,
    };
    let opts = TrainingOptions::default();
    let mut samples = Vec::new();
    for path in specs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec = SceneSpec::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        let s = match kind {
            SampleKind::Heads => extract_head_samples::<f64>(&cfg, &spec, &opts)?,
            SampleKind::Tracks => extract_track_samples::<f64>(&cfg, &models, &spec, &opts)?,
        };
        samples.extend(s);
    }
    let (sets, prefix) = match kind {
        SampleKind::Heads => (head_training_sets(&samples, &opts), "heads"),
        SampleKind::Tracks => (track_training_sets(&samples, &opts), "tracks"),
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for ((xs, ys), dir) in sets.into_iter().zip(["enter", "exit"]) {
        let path = out_dir.join(format!("{prefix}_{dir}.csv"));
        let rows: Vec<(Vec<f64>, i8)> = xs.into_iter().zip(ys).collect();
        let pos = rows.iter().filter(|r| r.1 > 0).count();
        write_feature_csv(fs::File::create(&path)?, &rows)?;
        println!("{}: {} positive, {} negative", path.display(), pos, rows.len() - pos);
    }
    Ok(())
}

fn cmd_eval(pred: &Path, labels: &Path) -> Result<()> {
    let f = fs::File::open(pred).with_context(|| format!("opening {}", pred.display()))?;
    let preds = parse_predictions(f)?;
    let labels = load_pcds_labels(labels)?;
    print!("{}", evaluate(&preds, &labels)?.render());
    Ok(())
}

fn cmd_bench(config: Option<&Path>, input: &Path, reps: usize) -> Result<()> {
    let cfg = load_config(config)?;
    let models = Models::<f64>::load(&cfg.models)?;
    let (src, intr, extr) = open_input(input)?;
    let frames: Vec<DepthFrame> = src.collect::<depthcount::Result<_>>()?;
    print!("{}", bench(&cfg, &models, &intr, &extr, &frames, reps)?.render());
    Ok(())
}

fn cmd_synth(spec: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec = SceneSpec::parse(&text)?;
    let scene = generate(&spec)?;
    write_scene(out, &scene)?;
    println!(
        "{} frames, entering {}, exiting {}, category {}",
        scene.frames.len(),
        scene.truth.entering,
        scene.truth.exiting,
        scene.truth.category
    );
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run {
            config,
            input,
            events,
            counts,
            video_id,
        } => cmd_run(
            config.as_deref(),
            &input,
            events.as_deref(),
            counts.as_deref(),
            video_id,
        ),
        Cmd::Calibrate { points, out } => cmd_calibrate(&points, &out),
        Cmd::TrainHeads(a) => cmd_train(&a, true),
        Cmd::TrainTracks(a) => cmd_train(&a, false),
        Cmd::Extract {
            kind,
            spec,
            out_dir,
            config,
        } => cmd_extract(kind, &spec, &out_dir, config.as_deref()),
        Cmd::Eval { pred, labels } => cmd_eval(&pred, &labels),
        Cmd::Bench { config, input, reps } => cmd_bench(config.as_deref(), &input, reps),
        Cmd::Synth { spec, out } => cmd_synth(&spec, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
