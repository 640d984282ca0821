use std::cmp::Ordering;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::metrics::{pareto_front, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankPolicy {
    /// Accuracy descending, then latency ascending.
    BestAccuracy,
    /// Latency ascending, then accuracy descending.
    BestLatency,
    /// The non-dominated set, by hash.
    Pareto,
}

impl FromStr for RankPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "best-accuracy" => Ok(Self::BestAccuracy),
            "best-latency" => Ok(Self::BestLatency),
            "pareto" => Ok(Self::Pareto),
            _ => Err(Error::Config(format!(
                "unknown policy {s:?} (best-accuracy, best-latency, pareto)"
            ))),
        }
    }
}

fn by_accuracy(a: &TrialRecord, b: &TrialRecord) -> Ordering {
    b.accuracy.total_cmp(&a.accuracy)
}

fn by_latency(a: &TrialRecord, b: &TrialRecord) -> Ordering {
    a.latency_ms.total_cmp(&b.latency_ms)
}

/// Orders trials under `policy`. The hash breaks any remaining tie, so the
/// result does not depend on input order.
pub fn rank_trials(records: &[TrialRecord], policy: RankPolicy) -> Vec<TrialRecord> {
    let mut out = match policy {
        RankPolicy::Pareto => return pareto_front(records),
        _ => records.to_vec(),
    };
    out.sort_by(|a, b| {
        let primary = match policy {
            RankPolicy::BestAccuracy => by_accuracy(a, b).then(by_latency(a, b)),
            _ => by_latency(a, b).then(by_accuracy(a, b)),
        };
        primary.then_with(|| a.hash.cmp(&b.hash))
    });
    out
}
