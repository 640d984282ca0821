use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hwsim::HwConfig;
use crate::metrics::TrialConfig;
use crate::surrogate::SurrogateKind;
use crate::trainer::{NeuronType, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Surrogate kinds × slopes on the base neuron.
    Surrogate,
    /// Leak × threshold × neuron model on the base surrogate.
    Neuron,
}

pub const SLOPE_BOUNDS: (f64, f64) = (1.0, 48.0);
pub const BETA_BOUNDS: (f64, f64) = (0.1, 1.0);
pub const THRESHOLD_BOUNDS: (f64, f64) = (0.1, 2.0);

/// `lo, lo + step, ...` up to `hi`, always ending on `hi` itself. Values are
/// rounded to 1e-9 so grid points print cleanly and hash stably.
pub fn stepped_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let round = |x: f64| (x * 1e9).round() / 1e9;
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let x = round(lo + f64::from(i) * step);
        if x >= hi - 1e-9 {
            break;
        }
        out.push(x);
        i += 1;
    }
    out.push(round(hi));
    out
}

/// A grid of trials. Serialized as the sweep JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Directory name under the results root.
    pub name: String,
    pub phase: Phase,
    pub surrogates: Vec<SurrogateKind>,
    pub slopes: Vec<f64>,
    pub betas: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub models: Vec<NeuronType>,
    pub seeds: Vec<u64>,
    /// Reject grid values outside the supported ranges.
    pub strict_bounds: bool,
    pub base: TrainConfig,
    pub hw: HwConfig,
    /// Results root; the `--out` flag takes precedence.
    pub out_dir: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            name: "sweep".into(),
            phase: Phase::Neuron,
            surrogates: vec![SurrogateKind::FastSigmoid],
            slopes: vec![5.0],
            betas: stepped_grid(0.1, 1.0, 0.2),
            thresholds: stepped_grid(0.1, 2.0, 0.2),
            models: vec![NeuronType::Lif, NeuronType::Lapicque],
            seeds: vec![0],
            strict_bounds: true,
            base: TrainConfig::default(),
            hw: HwConfig::default(),
            out_dir: None,
        }
    }
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("sweep spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.name.starts_with('.')
        {
            return bad(format!("sweep name {:?} is not a plain directory name", self.name));
        }
        if self.seeds.is_empty() {
            return bad("sweep needs at least one seed".into());
        }
        let in_bounds = |xs: &[f64], (lo, hi): (f64, f64)| xs.iter().all(|x| (lo..=hi).contains(x));
        match self.phase {
            Phase::Surrogate => {
                if self.surrogates.is_empty() || self.slopes.is_empty() {
                    return bad("surrogate phase needs surrogates and slopes".into());
                }
                if self.strict_bounds && !in_bounds(&self.slopes, SLOPE_BOUNDS) {
                    return bad(format!("slopes must lie in {SLOPE_BOUNDS:?}"));
                }
            }
            Phase::Neuron => {
                if self.betas.is_empty() || self.thresholds.is_empty() || self.models.is_empty() {
                    return bad("neuron phase needs betas, thresholds and models".into());
                }
                if self.strict_bounds
                    && !(in_bounds(&self.betas, BETA_BOUNDS)
                        && in_bounds(&self.thresholds, THRESHOLD_BOUNDS))
                {
                    return bad(format!(
                        "betas must lie in {BETA_BOUNDS:?} and thresholds in {THRESHOLD_BOUNDS:?}"
                    ));
                }
            }
        }
        self.hw.validate()
    }

    /// Every trial in grid order, seeds innermost.
    pub fn trials(&self) -> Vec<TrialConfig> {
        let mut points: Vec<TrainConfig> = Vec::new();
        match self.phase {
            Phase::Surrogate => {
                for &kind in &self.surrogates {
                    for &slope in &self.slopes {
                        points.push(TrainConfig {
                            surrogate_type: kind,
                            slope,
                            ..self.base.clone()
                        });
                    }
                }
            }
            Phase::Neuron => {
                for &model in &self.models {
                    for &beta in &self.betas {
                        for &threshold in &self.thresholds {
                            points.push(TrainConfig {
                                neuron_type: model,
                                beta,
                                threshold,
                                ..self.base.clone()
                            });
                        }
                    }
                }
            }
        }
        points
            .into_iter()
            .flat_map(|p| {
                self.seeds.iter().map(move |&seed| TrialConfig {
                    train: TrainConfig { seed, ..p.clone() },
                    hw: self.hw,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_include_both_endpoints() {
        assert_eq!(stepped_grid(0.1, 1.0, 0.2), vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.0]);
        let th = stepped_grid(0.1, 2.0, 0.2);
        assert_eq!(th.len(), 11);
        assert_eq!(th[9], 1.9);
        assert_eq!(*th.last().unwrap(), 2.0);
        assert_eq!(stepped_grid(0.5, 0.5, 0.2), vec![0.5]);
    }

    #[test]
    fn grid_cardinality() {
        let spec = SweepSpec {
            betas: vec![0.3, 0.5],
            thresholds: vec![0.5, 1.0],
            seeds: vec![0],
            ..SweepSpec::default()
        };
        assert_eq!(spec.trials().len(), 8);
        let spec = SweepSpec {
            phase: Phase::Surrogate,
            surrogates: vec![SurrogateKind::FastSigmoid, SurrogateKind::Atan],
            slopes: vec![2.0, 5.0, 25.0],
            seeds: vec![0, 1],
            ..SweepSpec::default()
        };
        assert_eq!(spec.trials().len(), 12);
    }

    #[test]
    fn validation() {
        assert!(SweepSpec::default().validate().is_ok());
        let bad_slope = SweepSpec {
            phase: Phase::Surrogate,
            slopes: vec![60.0],
            ..SweepSpec::default()
        };
        assert!(bad_slope.validate().is_err());
        assert!(SweepSpec {
            strict_bounds: false,
            ..bad_slope
        }
        .validate()
        .is_ok());
        assert!(SweepSpec {
            name: "../x".into(),
            ..SweepSpec::default()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            betas: vec![],
            ..SweepSpec::default()
        }
        .validate()
        .is_err());
        assert!(matches!(
            SweepSpec::from_json(r#"{"seedz": [1]}"#),
            Err(Error::Config(_))
        ));
    }
}
