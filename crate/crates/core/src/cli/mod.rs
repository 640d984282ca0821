//! Command-line front end. Every command reads files, writes only under
//! `--out`, and maps failures onto stable exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::dse::{
    collect_records, pareto_svg, rank_trials, records_csv, run_sweep, RankPolicy, SweepOptions,
    SweepSpec,
};
use crate::error::{Error, Result};
use crate::events::{load_events, rasterize, EventStream, PolarityMode, RasterConfig};
use crate::hwsim::{simulate_network, write_report, HwConfig};
use crate::snn::Topology;
use crate::trainer::{evaluate, train, Checkpoint, EpochStats, Evaluation, Sample, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_SHAPE: i32 = 4;
pub const EXIT_EMPTY: i32 = 5;

/// Exit status for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } | Error::Numeric(_) => EXIT_DIVERGENCE,
        Error::Shape(_) => EXIT_SHAPE,
        Error::Empty(_) => EXIT_EMPTY,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(name = "spikeperf", version, about = "Train, simulate and sweep small spiking networks")]
pub struct Cli {
    /// JSON config for the command: training config (train, eval), hardware
    /// config (simulate) or sweep spec (sweep).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Nothing is written outside it.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed (sweep: replaces the seed list).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the synthetic task; writes the checkpoint and train_log.csv.
    Train,
    /// Classify labelled recordings, or the task's held-out split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Use the deployed 4-bit fixed-point network.
        #[arg(long)]
        quantized: bool,
        /// Event CSV files whose sidecars carry a label.
        #[arg(long)]
        events: Vec<PathBuf>,
    },
    /// Run one recording through the accelerator model.
    Simulate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        events: PathBuf,
    },
    /// Run a grid sweep; results go to `<out>/<name>/`.
    Sweep {
        /// Ranking printed when the sweep finishes.
        #[arg(long, default_value = "pareto")]
        policy: RankPolicy,
    },
    /// Aggregate trial results into trials.csv, pareto.csv and pareto.svg.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn train_config(cli: &Cli) -> Result<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            require(p, "config")?;
            TrainConfig::load(p)?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// `train_log.csv` columns.
pub const TRAIN_LOG_COLUMNS: [&str; 6] =
    ["epoch", "lr", "train_loss", "train_accuracy", "density", "val_accuracy"];

fn train_log(history: &[EpochStats]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAIN_LOG_COLUMNS)?;
    for s in history {
        w.write_record([
            s.epoch.to_string(),
            s.lr.to_string(),
            s.train_loss.to_string(),
            s.train_accuracy.to_string(),
            s.density.to_string(),
            s.val_accuracy.map_or(String::new(), |a| a.to_string()),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct TrainSummary {
    epochs_run: usize,
    diverged: bool,
    test: Option<Evaluation>,
    test_quantized: Option<Evaluation>,
}

fn cmd_train(cli: &Cli) -> Result<()> {
    let cfg = train_config(cli)?;
    create_out(&cli.out)?;
    let data = cfg.task.generate(cfg.timesteps)?;
    let run = train(&cfg, &data.train, Some(&data.val))?;
    run.checkpoint.save(&cli.out)?;
    write_text(&cli.out.join("train_log.csv"), &train_log(&run.history)?)?;
    let diverged = run.divergence.is_some();
    let (test, test_quantized) = if diverged || data.test.is_empty() {
        (None, None)
    } else {
        (
            Some(evaluate(&run.checkpoint, &data.test, false)?),
            Some(evaluate(&run.checkpoint, &data.test, true)?),
        )
    };
    let summary = TrainSummary {
        epochs_run: run.history.len(),
        diverged,
        test,
        test_quantized,
    };
    write_text(
        &cli.out.join("train_summary.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    let ckpt = run.into_result()?;
    if let (Some(t), Some(q)) = (test, test_quantized) {
        println!(
            "trained {} epochs: test accuracy {:.4} (4-bit {:.4}), density {:.4}",
            ckpt.meta.epochs_run, t.accuracy, q.accuracy, t.density
        );
    }
    Ok(())
}

/// Raster settings that turn `stream` into the checkpoint's input shape.
pub fn raster_for(topology: &Topology, stream: &EventStream) -> Result<RasterConfig> {
    let input = topology.input;
    let polarity = match input.channels {
        2 => PolarityMode::TwoChannel,
        1 => PolarityMode::Merged,
        c => {
            return Err(Error::Shape(format!(
                "network input has {c} channels; recordings give 1 or 2"
            )))
        }
    };
    let (w, h) = (usize::from(stream.header.width), usize::from(stream.header.height));
    let down = w.div_ceil(input.width.max(1)).max(1);
    let cfg = RasterConfig::new(topology.timesteps, down, polarity)?;
    if cfg.frame_shape(w, h) != input {
        return Err(Error::Shape(format!(
            "a {w}x{h} recording cannot be binned to the network input {input}"
        )));
    }
    Ok(cfg)
}

fn load_sample(topology: &Topology, path: &Path) -> Result<(EventStream, Sample)> {
    require(path, "events file")?;
    let stream = load_events(path)?;
    let raster = raster_for(topology, &stream)?;
    let input = rasterize(&stream, &raster)?;
    let label = stream.header.label.unwrap_or(usize::MAX);
    Ok((stream, Sample { input, label }))
}

fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    require(dir, "checkpoint directory")?;
    Checkpoint::load(dir)
}

fn cmd_eval(cli: &Cli, checkpoint: &Path, quantized: bool, events: &[PathBuf]) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let samples = if events.is_empty() {
        let cfg = train_config(cli)?;
        cfg.task.generate(ckpt.topology.timesteps)?.test
    } else {
        let mut out = Vec::with_capacity(events.len());
        for p in events {
            let (stream, s) = load_sample(&ckpt.topology, p)?;
            if stream.header.label.is_none() {
                return Err(Error::Validation(format!("{} has no label", p.display())));
            }
            out.push(s);
        }
        out
    };
    if samples.is_empty() {
        return Err(Error::Empty("nothing to evaluate".into()));
    }
    let ev = evaluate(&ckpt, &samples, quantized)?;
    create_out(&cli.out)?;
    write_text(&cli.out.join("eval.json"), &(serde_json::to_string_pretty(&ev)? + "\n"))?;
    println!(
        "accuracy {:.4} over {} samples, density {:.4}",
        ev.accuracy, ev.samples, ev.density
    );
    Ok(())
}

fn cmd_simulate(cli: &Cli, checkpoint: &Path, events: &Path) -> Result<()> {
    let hw = match &cli.config {
        Some(p) => {
            require(p, "hardware config")?;
            HwConfig::load(p)?
        }
        None => HwConfig::default(),
    };
    let ckpt = load_checkpoint(checkpoint)?;
    let (_, sample) = load_sample(&ckpt.topology, events)?;
    let sim = simulate_network(&ckpt.topology, &sample.input, &ckpt, &hw)?;
    write_report(&sim.report, &cli.out)?;
    println!(
        "{} cycles, {:.6} ms, density {:.4}",
        sim.report.total_cycles, sim.report.latency_ms, sim.report.activity_density
    );
    Ok(())
}

fn cmd_sweep(cli: &Cli, policy: RankPolicy) -> Result<()> {
    let mut spec = match &cli.config {
        Some(p) => {
            require(p, "sweep spec")?;
            SweepSpec::load(p)?
        }
        None => SweepSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seeds = vec![seed];
    }
    let opts = SweepOptions {
        root: cli.out.clone(),
        jobs: cli.jobs,
    };
    let outcome = run_sweep(&spec, &opts)?;
    info!(
        "{} trials, {} resumed, {} failed",
        outcome.outcomes.len(),
        outcome.resumed,
        outcome.failures()
    );
    let records = outcome.records();
    println!(
        "{} trials ({} failed) in {}",
        outcome.outcomes.len(),
        outcome.failures(),
        outcome.dir.display()
    );
    for r in rank_trials(&records, policy) {
        println!(
            "{}  accuracy {:.4}  latency {:.6} ms  density {:.4}",
            r.hash, r.accuracy, r.latency_ms, r.activity_density
        );
    }
    Ok(())
}

fn cmd_report(cli: &Cli, results: &Path) -> Result<()> {
    require(results, "results directory")?;
    let records = collect_records(results)?;
    if records.is_empty() {
        return Err(Error::Empty(format!(
            "no completed trials under {}",
            results.display()
        )));
    }
    let front = rank_trials(&records, RankPolicy::Pareto);
    create_out(&cli.out)?;
    write_text(&cli.out.join("trials.csv"), &records_csv(&records)?)?;
    write_text(&cli.out.join("pareto.csv"), &records_csv(&front)?)?;
    write_text(&cli.out.join("pareto.svg"), &pareto_svg(&records)?)?;
    println!("{} trials, {} on the front", records.len(), front.len());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train => cmd_train(cli),
        Command::Eval {
            checkpoint,
            quantized,
            events,
        } => cmd_eval(cli, checkpoint, *quantized, events),
        Command::Simulate { checkpoint, events } => cmd_simulate(cli, checkpoint, events),
        Command::Sweep { policy } => cmd_sweep(cli, *policy),
        Command::Report { results } => cmd_report(cli, results),
    }
}
