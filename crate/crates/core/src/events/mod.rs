//! Event-camera streams: file I/O, rasterization and synthetic generators.
//!
//! Real DVS recordings (AEDAT and similar) are not parsed here. To use one,
//! export it to the `t,x,y,p` CSV plus JSON sidecar described in
//! [`stream`] and load it with [`load_events`].

pub mod raster;
pub mod stream;
pub mod synth;

pub use raster::{rasterize, time_bin, PolarityMode, RasterConfig};
pub use stream::{load_events, parse_events, write_events, Event, EventStream, StreamHeader};
pub use synth::{gen_moving_bar, poisson_encode, MovingBar, MovingBarTask, TaskData};
