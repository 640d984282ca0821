use serde::{Deserialize, Serialize};

use super::topology::Shape;
use crate::error::{Error, Result};

/// Binary activations `s[t, n]` with cached per-timestep, per-channel counts.
///
/// Construction validates that every value is 0 or 1; after that the train is
/// immutable, so the cached counts always agree with the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpikeTrain", into = "RawSpikeTrain")]
pub struct SpikeTrain {
    shape: Shape,
    timesteps: usize,
    bits: Vec<u8>,
    channel_counts: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawSpikeTrain {
    shape: Shape,
    timesteps: usize,
    bits: Vec<u8>,
}

impl TryFrom<RawSpikeTrain> for SpikeTrain {
    type Error = Error;

    fn try_from(raw: RawSpikeTrain) -> Result<Self> {
        SpikeTrain::from_flat(raw.shape, raw.timesteps, raw.bits)
    }
}

impl From<SpikeTrain> for RawSpikeTrain {
    fn from(s: SpikeTrain) -> Self {
        RawSpikeTrain {
            shape: s.shape,
            timesteps: s.timesteps,
            bits: s.bits,
        }
    }
}

impl SpikeTrain {
    pub fn zeros(shape: Shape, timesteps: usize) -> Self {
        Self {
            shape,
            timesteps,
            bits: vec![0; shape.len() * timesteps],
            channel_counts: vec![0; shape.channels * timesteps],
        }
    }

    /// `bits` is laid out timestep-major: `bits[t * shape.len() + n]`.
    pub fn from_flat(shape: Shape, timesteps: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != shape.len() * timesteps {
            return Err(Error::Shape(format!(
                "spike data has {} entries, expected {} ({shape} x {timesteps})",
                bits.len(),
                shape.len() * timesteps
            )));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Validation(format!(
                "spike value {} at flat index {pos} is not binary",
                bits[pos]
            )));
        }
        let mut s = Self {
            shape,
            timesteps,
            bits,
            channel_counts: Vec::new(),
        };
        s.recount();
        Ok(s)
    }

    pub fn from_frames(shape: Shape, frames: Vec<Vec<u8>>) -> Result<Self> {
        let timesteps = frames.len();
        let mut flat = Vec::with_capacity(shape.len() * timesteps);
        for (t, f) in frames.into_iter().enumerate() {
            if f.len() != shape.len() {
                return Err(Error::Shape(format!(
                    "frame {t} has {} entries, expected {}",
                    f.len(),
                    shape.len()
                )));
            }
            flat.extend(f);
        }
        Self::from_flat(shape, timesteps, flat)
    }

    fn recount(&mut self) {
        let plane = self.shape.plane();
        let n = self.shape.len();
        self.channel_counts = (0..self.timesteps)
            .flat_map(|t| {
                let frame = &self.bits[t * n..(t + 1) * n];
                (0..self.shape.channels).map(move |c| {
                    frame[c * plane..(c + 1) * plane]
                        .iter()
                        .map(|&b| u32::from(b))
                        .sum()
                })
            })
            .collect();
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn neurons(&self) -> usize {
        self.shape.len()
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        let n = self.shape.len();
        &self.bits[t * n..(t + 1) * n]
    }

    pub fn as_flat(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, t: usize, neuron: usize) -> u8 {
        self.bits[t * self.shape.len() + neuron]
    }

    /// Cached `S_i[t]` for channel `i`.
    pub fn channel_count(&self, t: usize, channel: usize) -> u32 {
        self.channel_counts[t * self.shape.channels + channel]
    }

    pub fn channel_counts(&self, t: usize) -> &[u32] {
        let c = self.shape.channels;
        &self.channel_counts[t * c..(t + 1) * c]
    }

    pub fn count_at(&self, t: usize) -> u64 {
        self.channel_counts(t).iter().map(|&c| u64::from(c)).sum()
    }

    pub fn total_spikes(&self) -> u64 {
        self.channel_counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Spike count per neuron summed over time.
    pub fn counts_per_neuron(&self) -> Vec<u32> {
        let n = self.shape.len();
        let mut out = vec![0u32; n];
        for t in 0..self.timesteps {
            for (o, &b) in out.iter_mut().zip(self.frame(t)) {
                *o += u32::from(b);
            }
        }
        out
    }

    /// Recomputes counts from the raw data and compares with the cache.
    pub fn counts_consistent(&self) -> bool {
        let mut fresh = self.clone();
        fresh.recount();
        fresh.channel_counts == self.channel_counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_cached_per_channel() {
        let shape = Shape::new(2, 2, 2);
        let s = SpikeTrain::from_frames(
            shape,
            vec![vec![1, 0, 0, 1, 0, 0, 0, 1], vec![0, 0, 0, 0, 1, 1, 1, 1]],
        )
        .unwrap();
        assert_eq!(s.channel_counts(0), &[2, 1]);
        assert_eq!(s.channel_counts(1), &[0, 4]);
        assert_eq!(s.total_spikes(), 7);
        assert_eq!(s.count_at(1), 4);
        assert!(s.counts_consistent());
        assert_eq!(s.counts_per_neuron(), vec![1, 0, 0, 1, 1, 1, 1, 2]);
    }

    #[test]
    fn rejects_non_binary() {
        let err = SpikeTrain::from_flat(Shape::new(1, 1, 2), 1, vec![0, 2]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(SpikeTrain::from_flat(Shape::new(1, 2, 2), 2, vec![0; 7]).is_err());
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let s = SpikeTrain::from_flat(Shape::new(1, 1, 3), 2, vec![1, 0, 1, 0, 1, 1]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: SpikeTrain = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = json.replace("[1,0,1,0,1,1]", "[1,0,3,0,1,1]");
        assert!(serde_json::from_str::<SpikeTrain>(&bad).is_err());
    }
}
