use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::spec::SweepSpec;
use super::trial::{config_hash, run_trial, TrialOutcome};
use crate::error::{Error, Result};
use crate::hwsim::report_csv;
use crate::metrics::{TrialConfig, TrialRecord};

pub const TRIAL_FILE: &str = "trial.json";
pub const INDEX_FILE: &str = "index.csv";
pub const SWEEP_FILE: &str = "sweep.json";

pub const INDEX_COLUMNS: [&str; 17] = [
    "hash",
    "status",
    "surrogate_type",
    "slope",
    "neuron_type",
    "beta",
    "threshold",
    "seed",
    "accuracy",
    "quantized_accuracy",
    "total_cycles",
    "latency_ms",
    "activity_density",
    "energy_mj",
    "edp",
    "epochs_run",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Results root; the sweep lives in `root/<name>`.
    pub root: PathBuf,
    /// Worker threads.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    /// Every trial, completed or failed, ordered by hash.
    pub outcomes: Vec<TrialOutcome>,
    /// Trials found on disk and not recomputed.
    pub resumed: usize,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<TrialRecord> {
        self.outcomes.iter().filter_map(|o| o.record().cloned()).collect()
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.record().is_none()).count()
    }
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    /// Wall-clock start; the only non-deterministic field in a results tree.
    started_at: String,
    spec: &'a SweepSpec,
    trials: usize,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    // Write-then-rename so an interrupted sweep never leaves a truncated file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn index_row(o: &TrialOutcome) -> Vec<String> {
    let c = &o.config().train;
    let mut row = vec![
        o.hash().to_string(),
        match o {
            TrialOutcome::Ok { .. } => "ok".into(),
            TrialOutcome::Failed { .. } => "failed".into(),
        },
        serde_json::to_value(c.surrogate_type)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        fmt_f64(c.slope),
        serde_json::to_value(c.neuron_type)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        fmt_f64(c.beta),
        fmt_f64(c.threshold),
        c.seed.to_string(),
    ];
    match o {
        TrialOutcome::Ok { record: r, .. } => {
            row.extend([
                fmt_f64(r.accuracy),
                fmt_f64(r.quantized_accuracy),
                fmt_f64(r.total_cycles),
                fmt_f64(r.latency_ms),
                fmt_f64(r.activity_density),
                fmt_f64(r.energy_mj),
                fmt_f64(r.edp),
                r.epochs_run.to_string(),
                String::new(),
            ]);
        }
        TrialOutcome::Failed { error, .. } => {
            row.extend(std::iter::repeat_n(String::new(), 8));
            row.push(error.clone());
        }
    }
    row
}

fn csv_line(fields: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(fields)?;
    w.into_inner()
        .map_err(|e| Error::Validation(format!("csv buffer: {e}")))
}

fn header_line() -> Result<Vec<u8>> {
    csv_line(&INDEX_COLUMNS.map(String::from))
}

/// Index of all outcomes, sorted by hash.
pub fn index_csv(outcomes: &[TrialOutcome]) -> Result<Vec<u8>> {
    let mut sorted: Vec<&TrialOutcome> = outcomes.iter().collect();
    sorted.sort_by(|a, b| a.hash().cmp(b.hash()));
    let mut out = header_line()?;
    for o in sorted {
        out.extend(csv_line(&index_row(o))?);
    }
    Ok(out)
}

fn load_outcome(path: &Path) -> Result<TrialOutcome> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs one trial into `dir`, writing `trial.json` last so its presence
/// marks completion.
fn execute(config: &TrialConfig, hash: &str, dir: &Path) -> Result<TrialOutcome> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let outcome = match run_trial(config) {
        Ok(res) => {
            res.checkpoint.save(dir)?;
            write_file(&dir.join("report.csv"), report_csv(&res.report)?.as_bytes())?;
            TrialOutcome::Ok {
                record: res.record,
                history: res.history,
            }
        }
        Err(e @ Error::Io { .. }) => return Err(e),
        Err(e) => {
            warn!("trial {hash} failed: {e}");
            TrialOutcome::Failed {
                hash: hash.to_string(),
                config: config.clone(),
                error: e.to_string(),
            }
        }
    };
    write_file(
        &dir.join(TRIAL_FILE),
        (serde_json::to_string_pretty(&outcome)? + "\n").as_bytes(),
    )?;
    Ok(outcome)
}

/// Runs every grid point in a worker pool. Trials whose `trial.json` already
/// exists are loaded instead of recomputed. Each finished trial is appended
/// to `index.csv` as it completes; the index is rewritten sorted at the end.
pub fn run_sweep(spec: &SweepSpec, opts: &SweepOptions) -> Result<SweepOutcome> {
    spec.validate()?;
    if opts.jobs == 0 {
        return Err(Error::Config("jobs must be >= 1".into()));
    }
    let dir = opts.root.join(&spec.name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let trials = spec.trials();
    let meta = SweepMeta {
        started_at: chrono::Utc::now().to_rfc3339(),
        spec,
        trials: trials.len(),
    };
    write_file(
        &dir.join(SWEEP_FILE),
        (serde_json::to_string_pretty(&meta)? + "\n").as_bytes(),
    )?;

    let mut keyed = Vec::with_capacity(trials.len());
    for t in trials {
        keyed.push((config_hash(&t)?, t));
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);

    let index_path = dir.join(INDEX_FILE);
    let index = {
        let exists = index_path.exists();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index_path)
            .map_err(|e| Error::io(&index_path, e))?;
        if !exists {
            f.write_all(&header_line()?)
                .map_err(|e| Error::io(&index_path, e))?;
        }
        Mutex::new(f)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<(TrialOutcome, bool)>> = pool.install(|| {
        keyed
            .par_iter()
            .map(|(hash, config)| {
                let tdir = dir.join(hash);
                let done = tdir.join(TRIAL_FILE);
                if done.exists() {
                    info!("trial {hash}: already complete");
                    return Ok((load_outcome(&done)?, true));
                }
                info!("trial {hash}: running");
                let outcome = execute(config, hash, &tdir)?;
                let line = csv_line(&index_row(&outcome))?;
                let mut f = index.lock().expect("index lock poisoned");
                f.write_all(&line).map_err(|e| Error::io(&index_path, e))?;
                Ok((outcome, false))
            })
            .collect()
    });
    drop(index);

    let mut outcomes = Vec::with_capacity(results.len());
    let mut resumed = 0;
    for r in results {
        let (o, was_done) = r?;
        resumed += usize::from(was_done);
        outcomes.push(o);
    }
    write_file(&index_path, &index_csv(&outcomes)?)?;
    Ok(SweepOutcome {
        dir,
        outcomes,
        resumed,
    })
}
