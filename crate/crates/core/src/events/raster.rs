use serde::{Deserialize, Serialize};

use super::stream::EventStream;
use crate::error::{Error, Result};
use crate::snn::{Shape, SpikeTrain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarityMode {
    /// Channel 0 carries OFF events, channel 1 ON events.
    #[default]
    TwoChannel,
    /// Both polarities share one channel.
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterConfig {
    pub timesteps: usize,
    pub downsample: usize,
    pub polarity: PolarityMode,
}

impl RasterConfig {
    pub fn new(timesteps: usize, downsample: usize, polarity: PolarityMode) -> Result<Self> {
        let c = Self {
            timesteps,
            downsample,
            polarity,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 || self.downsample == 0 {
            return Err(Error::Config(
                "raster timesteps and downsample must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Frame shape produced for a `width`×`height` sensor.
    pub fn frame_shape(&self, width: usize, height: usize) -> Shape {
        let channels = match self.polarity {
            PolarityMode::TwoChannel => 2,
            PolarityMode::Merged => 1,
        };
        Shape::new(
            channels,
            height.div_ceil(self.downsample),
            width.div_ceil(self.downsample),
        )
    }
}

/// Time bin of an event: `floor(t * T / duration)`, with `t == duration`
/// folded into the last bin.
pub fn time_bin(t: u64, duration: u64, timesteps: usize) -> usize {
    let bin = (u128::from(t) * timesteps as u128 / u128::from(duration)) as usize;
    bin.min(timesteps - 1)
}

/// Bins events into binary frames. Several events landing on the same
/// (bin, channel, pixel) produce a single spike.
pub fn rasterize(stream: &EventStream, cfg: &RasterConfig) -> Result<SpikeTrain> {
    cfg.validate()?;
    let h = &stream.header;
    let shape = cfg.frame_shape(usize::from(h.width), usize::from(h.height));
    if stream.is_empty() {
        return Ok(SpikeTrain::zeros(shape, cfg.timesteps));
    }
    if h.duration == 0 {
        return Err(Error::Validation(
            "cannot rasterize a zero-duration stream with events".into(),
        ));
    }
    let frame = shape.len();
    let mut bits = vec![0u8; frame * cfg.timesteps];
    for e in &stream.events {
        let t = time_bin(e.t, h.duration, cfg.timesteps);
        let c = match cfg.polarity {
            PolarityMode::TwoChannel => usize::from(e.p),
            PolarityMode::Merged => 0,
        };
        let y = usize::from(e.y) / cfg.downsample;
        let x = usize::from(e.x) / cfg.downsample;
        bits[t * frame + shape.index(c, y, x)] = 1;
    }
    SpikeTrain::from_flat(shape, cfg.timesteps, bits)
}
