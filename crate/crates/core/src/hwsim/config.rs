use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::fixed::{DecayOp, FixedFormat, FixedNeuron, GainOp};

/// Cycles per arithmetic primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpCosts {
    pub shift: u64,
    pub add: u64,
    pub compare: u64,
    pub mul: u64,
}

impl Default for OpCosts {
    fn default() -> Self {
        Self {
            shift: 1,
            add: 1,
            compare: 1,
            mul: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HwConfig {
    /// Output-channel parallelism `P`.
    pub parallelism: u64,
    /// Fixed cycles charged per layer per timestep.
    pub control_overhead: u64,
    pub penc_cycles_per_active: u64,
    /// Cycles per weight accumulate.
    pub accumulate_cycles: u64,
    pub op_costs: OpCosts,
    pub frequency_mhz: f64,
    pub format: FixedFormat,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            parallelism: 4,
            control_overhead: 10,
            penc_cycles_per_active: 1,
            accumulate_cycles: 1,
            op_costs: OpCosts::default(),
            frequency_mhz: 100.0,
            format: FixedFormat::default(),
        }
    }
}

/// Primitive operations making up one neuron update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UpdateOps {
    pub shifts: u64,
    pub adds: u64,
    pub compares: u64,
    pub muls: u64,
}

impl UpdateOps {
    /// Decay (shift or multiply), optional input scaling multiply, the add,
    /// and the threshold compare. A LIF neuron whose leak is a power of two
    /// costs one shift, one add and one compare; a Lapicque neuron costs two
    /// multiplies, one add and one compare.
    pub fn of(neuron: &FixedNeuron) -> Self {
        let mut ops = UpdateOps {
            adds: 1,
            compares: 1,
            ..Self::default()
        };
        match neuron.decay {
            DecayOp::Shift(_) => ops.shifts += 1,
            DecayOp::Mul(_) => ops.muls += 1,
        }
        if let GainOp::Mul(_) = neuron.gain {
            ops.muls += 1;
        }
        ops
    }

    pub fn count(&self) -> u64 {
        self.shifts + self.adds + self.compares + self.muls
    }
}

impl HwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be >= 1".into()));
        }
        if !(self.frequency_mhz > 0.0 && self.frequency_mhz.is_finite()) {
            return Err(Error::Config("frequency_mhz must be > 0".into()));
        }
        self.format.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let hw: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("hw config: {e}")))?;
        hw.validate()?;
        Ok(hw)
    }

    /// Cycles for one neuron update.
    pub fn update_cost(&self, ops: &UpdateOps) -> u64 {
        let c = &self.op_costs;
        ops.shifts * c.shift + ops.adds * c.add + ops.compares * c.compare + ops.muls * c.mul
    }

    pub fn cycles_to_ms(&self, cycles: u64) -> f64 {
        cycles as f64 / (self.frequency_mhz * 1e3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{LapParams, LifParams, NeuronParams, ResetMode};

    #[test]
    fn lif_and_lapicque_op_mix() {
        let f = FixedFormat::default();
        let lif = NeuronParams::Lif(LifParams::new(0.5, 1.0, ResetMode::Subtract).unwrap());
        let lap = NeuronParams::Lapicque(LapParams::from_beta(0.5, 1.0, ResetMode::Subtract).unwrap());
        let l = UpdateOps::of(&FixedNeuron::from_params(&lif, 0.1, f).unwrap());
        let p = UpdateOps::of(&FixedNeuron::from_params(&lap, 0.1, f).unwrap());
        assert_eq!((l.count(), l.muls), (3, 0));
        assert_eq!((p.count(), p.muls), (4, 2));
        let hw = HwConfig::default();
        assert_eq!(hw.update_cost(&l), 3);
        assert_eq!(hw.update_cost(&p), 6);
        let non_pow2 = NeuronParams::Lif(LifParams::new(0.7, 1.0, ResetMode::Subtract).unwrap());
        let n = UpdateOps::of(&FixedNeuron::from_params(&non_pow2, 0.1, f).unwrap());
        assert_eq!(hw.update_cost(&n), 4);
    }

    #[test]
    fn latency_conversion() {
        let hw = HwConfig::default();
        assert!((hw.cycles_to_ms(100_000) - 1.0).abs() < 1e-12);
    }
}
