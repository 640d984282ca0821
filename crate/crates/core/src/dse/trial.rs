use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hwsim::{simulate_network, SimReport};
use crate::metrics::{estimate_energy, EnergyModel, TrialConfig, TrialRecord};
use crate::trainer::{evaluate, predict, train, Checkpoint, EpochStats};

/// First 8 bytes of SHA-256 over the compact JSON of `config`, as hex.
/// Struct fields serialize in declaration order, so the encoding is canonical.
pub fn config_hash(config: &TrialConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub record: TrialRecord,
    pub checkpoint: Checkpoint,
    /// Simulator totals summed over the held-out set.
    pub report: SimReport,
    pub history: Vec<EpochStats>,
}

/// Adds `other`'s per-step and per-layer counts into `acc`.
fn add_report(acc: &mut SimReport, other: &SimReport) {
    for (a, b) in acc.layers.iter_mut().zip(&other.layers) {
        a.cycles += b.cycles;
        a.accumulates += b.accumulates;
        a.updates += b.updates;
        a.saturations += b.saturations;
        a.ops.add(&b.ops);
        for (x, y) in a.steps.iter_mut().zip(&b.steps) {
            x.active_inputs += y.active_inputs;
            x.accumulates += y.accumulates;
            x.updates += y.updates;
            x.output_spikes += y.output_spikes;
            x.cycles += y.cycles;
        }
        for (x, y) in a
            .output_spikes_per_channel
            .iter_mut()
            .zip(&b.output_spikes_per_channel)
        {
            *x += y;
        }
    }
    acc.total_cycles += other.total_cycles;
    acc.ops.add(&other.ops);
}

/// Train, quantize, simulate every held-out sample on the accelerator model,
/// and summarize. Divergence is returned as an error.
pub fn run_trial(config: &TrialConfig) -> Result<TrialResult> {
    let hash = config_hash(config)?;
    let tc = &config.train;
    let data = tc.task.generate(tc.timesteps)?;
    let run = train(tc, &data.train, Some(&data.val))?;
    let history = run.history.clone();
    let checkpoint = run.into_result()?;
    if data.test.is_empty() {
        return Err(Error::Empty("task has no held-out samples".into()));
    }
    let float_eval = evaluate(&checkpoint, &data.test, false)?;

    let n = data.test.len() as f64;
    let mut total: Option<SimReport> = None;
    let (mut correct, mut density, mut energy) = (0usize, 0.0, 0.0);
    let model = EnergyModel::default();
    for s in &data.test {
        let sim = simulate_network(&checkpoint.topology, &s.input, &checkpoint, &config.hw)?;
        let counts: Vec<f64> = sim
            .layer_spikes
            .last()
            .expect("topology has layers")
            .counts_per_neuron()
            .iter()
            .map(|&c| f64::from(c))
            .collect();
        correct += usize::from(predict(&counts) == s.label);
        density += sim.report.activity_density;
        energy += estimate_energy(&sim.report, &model)?;
        match &mut total {
            None => total = Some(sim.report),
            Some(t) => add_report(t, &sim.report),
        }
    }
    let mut report = total.expect("at least one held-out sample");
    report.latency_ms = report.total_cycles as f64 / (config.hw.frequency_mhz * 1e3);
    report.activity_density = density / n;
    report.energy_mj = energy;

    let total_cycles = report.total_cycles as f64 / n;
    let latency_ms = total_cycles / (config.hw.frequency_mhz * 1e3);
    let energy_mj = energy / n;
    let record = TrialRecord {
        hash,
        config: config.clone(),
        accuracy: float_eval.accuracy,
        quantized_accuracy: correct as f64 / n,
        total_cycles,
        latency_ms,
        activity_density: density / n,
        energy_mj,
        edp: energy_mj * latency_ms,
        epochs_run: checkpoint.meta.epochs_run,
    };
    Ok(TrialResult {
        record,
        checkpoint,
        report,
        history,
    })
}

/// Contents of `trial.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialOutcome {
    Ok {
        record: TrialRecord,
        history: Vec<EpochStats>,
    },
    Failed {
        hash: String,
        config: TrialConfig,
        error: String,
    },
}

impl TrialOutcome {
    pub fn hash(&self) -> &str {
        match self {
            Self::Ok { record, .. } => &record.hash,
            Self::Failed { hash, .. } => hash,
        }
    }

    pub fn config(&self) -> &TrialConfig {
        match self {
            Self::Ok { record, .. } => &record.config,
            Self::Failed { config, .. } => config,
        }
    }

    pub fn record(&self) -> Option<&TrialRecord> {
        match self {
            Self::Ok { record, .. } => Some(record),
            Self::Failed { .. } => None,
        }
    }
}

