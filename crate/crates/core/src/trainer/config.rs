use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::MovingBarTask;
use crate::snn::{LapParams, LifParams, NeuronParams, ResetMode, Shape, Topology};
use crate::surrogate::{SurrogateKind, SurrogateSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronType {
    Lif,
    Lapicque,
}

/// Training run settings. Unknown keys are rejected so typos surface as
/// configuration errors instead of silently falling back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub topology: String,
    pub timesteps: usize,
    pub neuron_type: NeuronType,
    /// Leak factor; Lapicque layers use the RC values that reproduce it.
    pub beta: f64,
    pub threshold: f64,
    pub reset: ResetMode,
    pub surrogate_type: SurrogateKind,
    /// Sharpness knob: `k` for fast sigmoid, `alpha` for arctan, the decay
    /// rate `beta` (with `k = 1`) for spike-rate escape. Ignored by the
    /// stochastic operator.
    pub slope: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(alias = "lr")]
    pub lr0: f64,
    pub lr_min: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Multiplier on the fan-in uniform init bound.
    pub init_gain: f64,
    pub detach_reset: bool,
    /// Synthetic data the CLI and sweeps train on.
    pub task: MovingBarTask,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            topology: "8C3-MP2-16C3-MP2-FC32-FC4".into(),
            timesteps: 8,
            neuron_type: NeuronType::Lif,
            beta: 0.5,
            threshold: 1.0,
            reset: ResetMode::Subtract,
            surrogate_type: SurrogateKind::FastSigmoid,
            slope: 5.0,
            epochs: 50,
            batch_size: 16,
            lr0: 0.05,
            lr_min: 0.0,
            momentum: 0.9,
            seed: 0,
            patience: 20,
            init_gain: 1.0,
            detach_reset: true,
            task: MovingBarTask::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.timesteps == 0 || self.batch_size == 0 {
            return bad("timesteps and batch_size must be >= 1".into());
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta {} outside (0, 1]", self.beta));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad(format!("threshold {} must be > 0", self.threshold));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) || !(0.0..=self.lr0).contains(&self.lr_min) {
            return bad(format!("need 0 <= lr_min <= lr0, lr0 > 0 (got {}, {})", self.lr_min, self.lr0));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.init_gain > 0.0 && self.init_gain.is_finite()) {
            return bad("init_gain must be > 0".into());
        }
        self.surrogate().validate()?;
        Topology::parse(&self.topology, self.task.input_shape(self.timesteps)?, self.timesteps)?;
        Ok(())
    }

    pub fn surrogate(&self) -> SurrogateSpec {
        SurrogateSpec::from_slope(self.surrogate_type, self.slope)
    }

    pub fn neuron(&self) -> Result<NeuronParams> {
        Ok(match self.neuron_type {
            NeuronType::Lif => NeuronParams::Lif(LifParams::new(self.beta, self.threshold, self.reset)?),
            NeuronType::Lapicque => {
                NeuronParams::Lapicque(LapParams::from_beta(self.beta, self.threshold, self.reset)?)
            }
        })
    }

    pub fn build_topology(&self, input: Shape) -> Result<Topology> {
        Topology::parse(&self.topology, input, self.timesteps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifact_keys_parse() {
        let cfg = TrainConfig::from_json(
            r#"{"beta": 0.7, "threshold": 0.5, "slope": 25, "surrogate_type": "fast_sigmoid",
                "neuron_type": "lif", "lr": 0.01}"#,
        )
        .unwrap();
        assert_eq!(cfg.beta, 0.7);
        assert_eq!(cfg.lr0, 0.01);
        assert_eq!(cfg.surrogate().fs_k, 25.0);
    }

    #[test]
    fn typos_and_bad_values_rejected() {
        assert!(matches!(TrainConfig::from_json(r#"{"betta": 0.5}"#), Err(Error::Config(_))));
        assert!(TrainConfig::from_json(r#"{"beta": 1.5}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"surrogate_type": "relu"}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"topology": "8C3-MP3"}"#).is_err());
    }

    #[test]
    fn lapicque_at_unit_beta_is_a_domain_error() {
        let cfg = TrainConfig {
            neuron_type: NeuronType::Lapicque,
            beta: 1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.neuron().is_err());
    }
}
