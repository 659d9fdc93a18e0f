use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use tubetrack::config::{load_joint_values, load_scenario, Config};
use tubetrack::metrics::{evaluate, PredTrack, VideoEval};
use tubetrack::pipeline::{merge_tracks, sweep, track_video, PipelineConfig, SweepGrid, SweepPoint};
use tubetrack::schema::{
    read_ground_truth, read_tracklets, read_tracks, write_ground_truth, write_tracklets, write_tracks,
};
use tubetrack::synth::generate;
use tubetrack::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tubetrack",
    version,
    about = "Stitch pose tracklets into tracks and merge their hypotheses"
)]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command; flags override the config file.
#[derive(Args)]
struct Overrides {
    /// TOML file with pipeline settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    clip_len: Option<usize>,
    #[arg(long, global = true)]
    step: Option<usize>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    radius_scale: Option<f64>,
    #[arg(long, global = true)]
    gate: Option<f64>,
    /// baseline, spatial, temporal or full.
    #[arg(long, global = true)]
    merge_mode: Option<String>,
    #[arg(long, global = true)]
    min_track_len: Option<usize>,
    #[arg(long, global = true)]
    min_box_area: Option<f64>,
    /// One falloff constant per joint.
    #[arg(long, global = true)]
    kappa_file: Option<PathBuf>,
    /// One confidence threshold per joint, applied before MOTA.
    #[arg(long, global = true)]
    thresholds_file: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Stitch tracklets into tracks with full hypothesis sets.
    Stitch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Merge each track's hypotheses into one pose per frame.
    Merge {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score merged tracks against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic video.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        tracklets: PathBuf,
    },
    /// Run the pipeline over a grid of settings and seeds.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,9")]
        clip_lens: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        steps: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
}

impl Overrides {
    fn config(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(v) = self.clip_len {
            c.clip_len = v;
        }
        if let Some(v) = self.step {
            c.step = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.radius_scale {
            c.radius_scale = v;
        }
        if let Some(v) = self.gate {
            c.gate = v;
        }
        if let Some(v) = &self.merge_mode {
            c.merge_mode = v.clone();
        }
        if let Some(v) = self.min_track_len {
            c.min_track_len = v;
        }
        if let Some(v) = self.min_box_area {
            c.min_box_area = v;
        }
        let joints = c.kappa.as_ref().map_or(tubetrack::types::DEFAULT_NUM_JOINTS, Vec::len);
        if let Some(path) = &self.kappa_file {
            c.kappa = Some(load_joint_values(path, joints)?);
        }
        if let Some(path) = &self.thresholds_file {
            c.thresholds = Some(load_joint_values(path, joints)?);
        }
        Ok(c)
    }

    fn pipeline(&self) -> Result<PipelineConfig> {
        self.config()?.pipeline()
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_stitch(input: &Path, output: &Path, cfg: &PipelineConfig) -> Result<()> {
    let videos = read_tracklets(open(input)?)?;
    let tracks = videos
        .par_iter()
        .map(|(id, tracklets)| Ok((id.clone(), track_video(tracklets, cfg)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    write_tracks(create(output)?, &tracks)
}

fn cmd_merge(input: &Path, output: &Path, cfg: &PipelineConfig) -> Result<()> {
    let videos = read_tracks(open(input)?)?;
    let merged = videos
        .iter()
        .map(|(id, tracks)| Ok((id.clone(), merge_tracks(tracks, cfg.merge_mode, &cfg.merge)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    write_tracks(create(output)?, &merged)
}

fn cmd_eval(pred: &Path, gt: &Path, report: Option<&Path>, cfg: &PipelineConfig) -> Result<()> {
    let gt = read_ground_truth(open(gt)?)?;
    let pred = read_tracks(open(pred)?)?;
    if let Some(id) = pred.keys().find(|id| !gt.contains_key(*id)) {
        return Err(Error::Schema {
            line: 0,
            message: format!("video {id} has predictions but no ground truth"),
        });
    }
    let videos: Vec<VideoEval> = gt
        .into_iter()
        .map(|(id, gt)| VideoEval {
            gt,
            predictions: pred
                .get(&id)
                .map_or_else(Vec::new, |ts| ts.iter().map(PredTrack::from_track).collect()),
        })
        .collect();
    let r = evaluate(&videos, &cfg.thresholds(), &cfg.filter)?;
    print!("{}", r.table());
    if let Some(path) = report {
        write_json(path, &r)?;
    }
    Ok(())
}

fn cmd_simulate(scenario: &Path, gt_path: &Path, tracklets_path: &Path, opts: &Overrides) -> Result<()> {
    let mut s = load_scenario(scenario)?;
    if let Some(seed) = opts.seed {
        s.seed = seed;
    }
    if let Some(c) = opts.clip_len {
        s.clip_len = c;
    }
    if let Some(v) = opts.step {
        s.step = v;
    }
    let video = generate(&s)?;
    write_ground_truth(create(gt_path)?, &BTreeMap::from([(video.video_id.clone(), video.gt)]))?;
    write_tracklets(
        create(tracklets_path)?,
        &BTreeMap::from([(video.video_id, video.tracklets)]),
    )
}

#[derive(Serialize)]
struct SweepSummary {
    clip_len: usize,
    step: usize,
    lambda: f64,
    seeds: usize,
    mean_recovery: f64,
    mean_mota: Option<f64>,
    stderr_mota: Option<f64>,
    mean_false_negatives: f64,
    stderr_false_negatives: f64,
}

#[derive(Serialize)]
struct SweepOutput {
    summary: Vec<SweepSummary>,
    points: Vec<SweepPoint>,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(points: &[SweepPoint]) -> Vec<SweepSummary> {
    let mut groups: Vec<Vec<&SweepPoint>> = Vec::new();
    for p in points {
        match groups.last_mut() {
            Some(g) if (g[0].clip_len, g[0].step, g[0].lambda) == (p.clip_len, p.step, p.lambda) => g.push(p),
            _ => groups.push(vec![p]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let motas: Vec<f64> = g.iter().filter_map(|p| p.mean_mota).collect();
            let fns: Vec<f64> = g.iter().map(|p| p.false_negatives as f64).collect();
            let (mean_fn, se_fn) = mean_and_stderr(&fns);
            let mota = (!motas.is_empty()).then(|| mean_and_stderr(&motas));
            SweepSummary {
                clip_len: g[0].clip_len,
                step: g[0].step,
                lambda: g[0].lambda,
                seeds: g.len(),
                mean_recovery: g.iter().map(|p| p.recovery).sum::<f64>() / g.len() as f64,
                mean_mota: mota.map(|m| m.0),
                stderr_mota: mota.map(|m| m.1),
                mean_false_negatives: mean_fn,
                stderr_false_negatives: se_fn,
            }
        })
        .collect()
}

fn cmd_sweep(scenario: &Path, output: &Path, grid: SweepGrid, cfg: &PipelineConfig) -> Result<()> {
    let base = load_scenario(scenario)?;
    let points = sweep(&base, &grid, cfg)?;
    let summary = summarize(&points);
    println!(
        "{:>8} {:>5} {:>8} {:>9} {:>9} {:>10}",
        "clip_len", "step", "lambda", "recovery", "MOTA", "FN"
    );
    for s in &summary {
        println!(
            "{:>8} {:>5} {:>8} {:>9.4} {:>9} {:>10.1}",
            s.clip_len,
            s.step,
            s.lambda,
            s.mean_recovery,
            s.mean_mota.map_or_else(|| "-".into(), |m| format!("{m:.2}")),
            s.mean_false_negatives
        );
    }
    write_json(output, &SweepOutput { summary, points })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.opts.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let opts = &cli.opts;
    match &cli.command {
        Command::Stitch { input, output } => cmd_stitch(input, output, &opts.pipeline()?),
        Command::Merge { input, output } => cmd_merge(input, output, &opts.pipeline()?),
        Command::Eval { pred, gt, report } => cmd_eval(pred, gt, report.as_deref(), &opts.pipeline()?),
        Command::Simulate {
            scenario,
            gt,
            tracklets,
        } => cmd_simulate(scenario, gt, tracklets, opts),
        Command::Sweep {
            scenario,
            output,
            clip_lens,
            steps,
            lambdas,
            seeds,
        } => {
            let cfg = opts.pipeline()?;
            let start = opts.seed.unwrap_or(0);
            let grid = SweepGrid {
                clip_lens: clip_lens.clone(),
                steps: steps.clone(),
                lambdas: if lambdas.is_empty() {
                    vec![cfg.merge.lambda]
                } else {
                    lambdas.clone()
                },
                seeds: (start..start + seeds).collect(),
            };
            cmd_sweep(scenario, output, grid, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tubetrack: {e}");
            ExitCode::from(if e.is_schema() { 1 } else { 2 })
        }
    }
}
