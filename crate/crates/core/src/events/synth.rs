//! Synthetic event workloads.
//!
//! The moving-bar task stands in for gesture recordings: a bar sweeps across
//! the sensor in one of four directions, firing ON events along its leading
//! edge and OFF events along its trailing edge. The class is the direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::raster::{rasterize, PolarityMode, RasterConfig};
use super::stream::{Event, EventStream, StreamHeader};
use crate::error::{Error, Result};
use crate::snn::{Shape, SpikeTrain};
use crate::trainer::Sample;

pub const NUM_DIRECTIONS: usize = 4;

/// Shape parameters of one generated recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingBar {
    pub class_id: usize,
    pub width: u16,
    pub height: u16,
    /// Microseconds.
    pub duration: u64,
    /// Mean events per edge pixel per second.
    pub rate_hz: f64,
    /// Mean background events per pixel per second.
    pub noise_hz: f64,
}

/// Bar moving right (0), left (1), down (2) or up (3).
pub fn gen_moving_bar(
    class_id: usize,
    dims: (u16, u16),
    duration: u64,
    rate_hz: f64,
    seed: u64,
) -> Result<EventStream> {
    MovingBar {
        class_id,
        width: dims.0,
        height: dims.1,
        duration,
        rate_hz,
        noise_hz: 0.0,
    }
    .generate(seed)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

impl MovingBar {
    pub fn validate(&self) -> Result<()> {
        if self.class_id >= NUM_DIRECTIONS {
            return Err(Error::Config(format!("class {} not in 0..4", self.class_id)));
        }
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config("moving bar needs a sensor of at least 8x8".into()));
        }
        if self.duration == 0 {
            return Err(Error::Config("duration must be > 0".into()));
        }
        if !(self.rate_hz >= 0.0 && self.noise_hz >= 0.0) {
            return Err(Error::Config("event rates must be >= 0".into()));
        }
        Ok(())
    }

    pub fn generate(&self, seed: u64) -> Result<EventStream> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let horizontal = self.class_id < 2;
        let reversed = self.class_id % 2 == 1;
        // `along` is the axis of motion, `across` the bar's long axis.
        let (along, across) = if horizontal {
            (usize::from(self.width), usize::from(self.height))
        } else {
            (usize::from(self.height), usize::from(self.width))
        };
        let thickness = rng.gen_range(2..=4usize);
        let start = rng.gen_range(0..=along / 4) as isize;
        let travel = rng.gen_range((along * 3 / 5)..=along);
        let span = rng.gen_range((across / 2)..=across);
        let offset = rng.gen_range(0..=across - span);

        let steps = travel as u64;
        let step_us = (self.duration / steps).max(1);
        let mean = self.rate_hz * step_us as f64 * 1e-6;
        let mut events = Vec::new();
        let mut emit = |rng: &mut ChaCha8Rng, k: u64, pos: isize, p: u8| {
            if pos < 0 || pos as usize >= along {
                return;
            }
            for a in offset..offset + span {
                for _ in 0..poisson(rng, mean) {
                    let t = (k * step_us + rng.gen_range(0..step_us)).min(self.duration);
                    let pos = if reversed { along - 1 - pos as usize } else { pos as usize };
                    let (x, y) = if horizontal { (pos, a) } else { (a, pos) };
                    events.push(Event {
                        t,
                        x: x as u16,
                        y: y as u16,
                        p,
                    });
                }
            }
        };
        for k in 0..steps {
            let lead = start + k as isize;
            emit(&mut rng, k, lead, 1);
            emit(&mut rng, k, lead - thickness as isize, 0);
        }
        let pixels = usize::from(self.width) * usize::from(self.height);
        let noise = poisson(
            &mut rng,
            self.noise_hz * pixels as f64 * self.duration as f64 * 1e-6,
        );
        for _ in 0..noise {
            events.push(Event {
                t: rng.gen_range(0..=self.duration),
                x: rng.gen_range(0..self.width),
                y: rng.gen_range(0..self.height),
                p: rng.gen_range(0..=1),
            });
        }
        events.sort_unstable_by_key(|e| (e.t, e.y, e.x, e.p));
        EventStream::new(
            StreamHeader {
                width: self.width,
                height: self.height,
                duration: self.duration,
                label: Some(self.class_id),
            },
            events,
        )
    }
}

/// Rate-codes a grayscale image: each pixel spikes in each bin with
/// probability `value * max_rate`.
pub fn poisson_encode(
    image: &[f64],
    shape: Shape,
    timesteps: usize,
    max_rate: f64,
    seed: u64,
) -> Result<SpikeTrain> {
    if image.len() != shape.len() {
        return Err(Error::Shape(format!(
            "image has {} pixels, shape {shape} needs {}",
            image.len(),
            shape.len()
        )));
    }
    if let Some(i) = image.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!("pixel {i} = {} outside [0, 1]", image[i])));
    }
    if !(0.0..=1.0).contains(&max_rate) {
        return Err(Error::Domain(format!("max_rate {max_rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = Vec::with_capacity(image.len() * timesteps);
    for _ in 0..timesteps {
        for &v in image {
            bits.push(u8::from(rng.gen::<f64>() < v * max_rate));
        }
    }
    SpikeTrain::from_flat(shape, timesteps, bits)
}

/// Four-direction classification task built from [`MovingBar`] recordings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MovingBarTask {
    /// Square sensor side in pixels.
    pub sensor: u16,
    pub downsample: usize,
    pub duration_us: u64,
    pub rate_hz: f64,
    pub noise_hz: f64,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for MovingBarTask {
    fn default() -> Self {
        Self {
            sensor: 32,
            downsample: 2,
            duration_us: 100_000,
            rate_hz: 400.0,
            noise_hz: 2.0,
            train_per_class: 40,
            val_per_class: 10,
            test_per_class: 25,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskData {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl MovingBarTask {
    pub fn raster(&self, timesteps: usize) -> Result<RasterConfig> {
        RasterConfig::new(timesteps, self.downsample, PolarityMode::TwoChannel)
    }

    pub fn input_shape(&self, timesteps: usize) -> Result<Shape> {
        let s = usize::from(self.sensor);
        Ok(self.raster(timesteps)?.frame_shape(s, s))
    }

    /// One recording per (split, class, index), each with its own seed drawn
    /// from a single stream so the whole task is a function of `seed`.
    pub fn generate(&self, timesteps: usize) -> Result<TaskData> {
        let raster = self.raster(timesteps)?;
        let mut seeds = ChaCha8Rng::seed_from_u64(self.seed);
        let mut split = |per_class: usize| -> Result<Vec<Sample>> {
            let mut out = Vec::with_capacity(per_class * NUM_DIRECTIONS);
            for _ in 0..per_class {
                for class_id in 0..NUM_DIRECTIONS {
                    let bar = MovingBar {
                        class_id,
                        width: self.sensor,
                        height: self.sensor,
                        duration: self.duration_us,
                        rate_hz: self.rate_hz,
                        noise_hz: self.noise_hz,
                    };
                    let stream = bar.generate(seeds.gen())?;
                    out.push(Sample {
                        input: rasterize(&stream, &raster)?,
                        label: class_id,
                    });
                }
            }
            Ok(out)
        };
        Ok(TaskData {
            train: split(self.train_per_class)?,
            val: split(self.val_per_class)?,
            test: split(self.test_per_class)?,
        })
    }
}
