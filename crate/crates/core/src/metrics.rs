//! Activity density, energy estimates and Pareto extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hwsim::{HwConfig, SimReport};
use crate::snn::SpikeTrain;
use crate::trainer::TrainConfig;

/// `A = (1 / (T * N)) * sum_t sum_i S_i[t]`.
pub fn density_from_counts(total_spikes: u64, timesteps: usize, neurons: usize) -> f64 {
    if timesteps == 0 || neurons == 0 {
        return 0.0;
    }
    total_spikes as f64 / (timesteps as f64 * neurons as f64)
}

/// Mean spikes per neuron per timestep over all given layers.
pub fn activity_density(layers: &[&SpikeTrain]) -> Result<f64> {
    let first = layers
        .first()
        .ok_or_else(|| Error::Empty("no layers to measure".into()))?;
    let t = first.timesteps();
    if layers.iter().any(|l| l.timesteps() != t) {
        return Err(Error::Shape("layers disagree on the number of timesteps".into()));
    }
    let spikes = layers.iter().map(|l| l.total_spikes()).sum();
    let neurons = layers.iter().map(|l| l.neurons()).sum();
    Ok(density_from_counts(spikes, t, neurons))
}

/// Energy per primitive in arbitrary units. The defaults are not physical;
/// they only make relative comparisons between configurations possible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub add: f64,
    pub shift: f64,
    pub compare: f64,
    pub mul: f64,
    /// Per membrane read, membrane write or weight fetch.
    pub memory: f64,
    /// Millijoules per unit.
    pub mj_per_unit: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            add: 1.0,
            shift: 1.0,
            compare: 1.0,
            mul: 3.0,
            memory: 5.0,
            mj_per_unit: 1e-9,
        }
    }
}

pub fn estimate_energy(sim: &SimReport, model: &EnergyModel) -> Result<f64> {
    let m = model;
    if [m.add, m.shift, m.compare, m.mul, m.memory, m.mj_per_unit]
        .iter()
        .any(|c| !(*c >= 0.0 && c.is_finite()))
    {
        return Err(Error::Config("energy constants must be finite and >= 0".into()));
    }
    let o = &sim.ops;
    let units = o.adds as f64 * m.add
        + o.shifts as f64 * m.shift
        + o.compares as f64 * m.compare
        + o.muls as f64 * m.mul
        + (o.membrane_reads + o.membrane_writes + o.weight_fetches) as f64 * m.memory;
    Ok(units * m.mj_per_unit)
}

/// Everything that defines a trial; its canonical JSON is hashed into the
/// trial identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub train: TrainConfig,
    pub hw: HwConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub hash: String,
    pub config: TrialConfig,
    /// Held-out accuracy of the float network.
    pub accuracy: f64,
    /// Held-out accuracy of the deployed 4-bit network.
    pub quantized_accuracy: f64,
    /// Mean cycles per inference on the held-out set.
    pub total_cycles: f64,
    pub latency_ms: f64,
    pub activity_density: f64,
    pub energy_mj: f64,
    /// `energy_mj * latency_ms`.
    pub edp: f64,
    pub epochs_run: usize,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) || !(0.0..=1.0).contains(&self.activity_density) {
            return Err(Error::Validation(format!(
                "trial {}: accuracy and density must lie in [0, 1]",
                self.hash
            )));
        }
        if self.edp != self.energy_mj * self.latency_ms {
            return Err(Error::Validation(format!("trial {}: EDP is stale", self.hash)));
        }
        Ok(())
    }
}

/// `a` dominates `b` when it is no worse on both axes and better on one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    let (acc_a, lat_a) = a;
    let (acc_b, lat_b) = b;
    acc_a >= acc_b && lat_a <= lat_b && (acc_a > acc_b || lat_a < lat_b)
}

/// Indices of non-dominated `(accuracy, latency)` points, ascending.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // Sweep by latency ascending, accuracy descending: a point survives iff
    // its accuracy beats everything strictly faster, or it ties a survivor.
    order.sort_by(|&i, &j| {
        points[i]
            .1
            .total_cmp(&points[j].1)
            .then(points[j].0.total_cmp(&points[i].0))
    });
    let mut keep = Vec::new();
    let mut best_acc = f64::NEG_INFINITY;
    let mut last: Option<(f64, f64)> = None;
    for i in order {
        let p = points[i];
        if p.0 > best_acc || last == Some(p) {
            keep.push(i);
            best_acc = best_acc.max(p.0);
            last = Some(p);
        }
    }
    keep.sort_unstable();
    keep
}

/// Non-dominated trials (accuracy up, latency down), ordered by hash. Exact
/// ties are all kept.
pub fn pareto_front(records: &[TrialRecord]) -> Vec<TrialRecord> {
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.accuracy, r.latency_ms)).collect();
    let mut front: Vec<TrialRecord> = pareto_indices(&points)
        .into_iter()
        .map(|i| records[i].clone())
        .collect();
    front.sort_by(|a, b| a.hash.cmp(&b.hash));
    front
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hwsim::OpCounts;
    use crate::snn::Shape;
    use proptest::prelude::*;

    fn brute(points: &[(f64, f64)]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| !points.iter().any(|&q| dominates(q, points[i])))
            .collect()
    }

    #[test]
    fn density_fixture() {
        let s = SpikeTrain::from_flat(Shape::new(1, 1, 4), 2, vec![1, 0, 0, 0, 0, 0, 1, 0]).unwrap();
        assert_eq!(activity_density(&[&s]).unwrap(), 0.25);
        let z = SpikeTrain::zeros(Shape::new(2, 2, 2), 3);
        assert_eq!(activity_density(&[&z]).unwrap(), 0.0);
        let o = SpikeTrain::from_flat(Shape::new(1, 1, 3), 2, vec![1; 6]).unwrap();
        assert_eq!(activity_density(&[&o]).unwrap(), 1.0);
    }

    #[test]
    fn density_ignores_layer_partition() {
        let a = SpikeTrain::from_flat(Shape::new(1, 1, 2), 2, vec![1, 0, 1, 1]).unwrap();
        let b = SpikeTrain::from_flat(Shape::new(1, 1, 2), 2, vec![0, 0, 0, 1]).unwrap();
        let joined =
            SpikeTrain::from_flat(Shape::new(1, 1, 4), 2, vec![1, 0, 0, 0, 1, 1, 0, 1]).unwrap();
        assert_eq!(
            activity_density(&[&a, &b]).unwrap(),
            activity_density(&[&joined]).unwrap()
        );
    }

    fn report(ops: OpCounts) -> SimReport {
        SimReport {
            layers: Vec::new(),
            total_cycles: 0,
            frequency_mhz: 100.0,
            latency_ms: 0.0,
            activity_density: 0.0,
            ops,
            energy_mj: 0.0,
        }
    }

    #[test]
    fn energy_fixture() {
        let ops = OpCounts {
            adds: 10,
            shifts: 4,
            compares: 4,
            muls: 2,
            membrane_reads: 4,
            membrane_writes: 4,
            weight_fetches: 6,
        };
        let unit = EnergyModel {
            mj_per_unit: 1.0,
            ..EnergyModel::default()
        };
        // 10 + 4 + 4 + 2*3 + (4 + 4 + 6)*5 = 94
        assert_eq!(estimate_energy(&report(ops), &unit).unwrap(), 94.0);
        assert_eq!(estimate_energy(&report(ops.scaled(2)), &unit).unwrap(), 188.0);
        assert_eq!(estimate_energy(&report(OpCounts::default()), &unit).unwrap(), 0.0);
    }

    #[test]
    fn pareto_small_cases() {
        assert_eq!(pareto_indices(&[(0.5, 3.0)]), vec![0]);
        assert_eq!(pareto_indices(&[(0.5, 3.0), (0.9, 1.0)]), vec![1]);
        assert_eq!(pareto_indices(&[(0.9, 1.0), (0.9, 1.0), (0.5, 3.0)]), vec![0, 1]);
        assert_eq!(pareto_indices(&[(0.9, 2.0), (0.8, 1.0)]), vec![0, 1]);
    }

    proptest! {
        #[test]
        fn pareto_matches_brute_force(
            pts in prop::collection::vec((0u8..10, 0u8..10), 1..60)
        ) {
            let points: Vec<(f64, f64)> =
                pts.iter().map(|&(a, l)| (f64::from(a) / 10.0, f64::from(l))).collect();
            let front = pareto_indices(&points);
            prop_assert_eq!(&front, &brute(&points));
            let mut rev = points.clone();
            rev.reverse();
            let n = points.len();
            let mut back: Vec<usize> = pareto_indices(&rev).into_iter().map(|i| n - 1 - i).collect();
            back.sort_unstable();
            prop_assert_eq!(&back, &front);
            let sub: Vec<(f64, f64)> = front.iter().map(|&i| points[i]).collect();
            prop_assert_eq!(pareto_indices(&sub).len(), sub.len());
        }
    }
}
