//! Experiment harness around `bvo-core`: config files, trace and CSV
//! formats, posterior checkpoints, external objectives, the scaling study
//! and the `bvo` command line.

pub mod checkpoint;
pub mod config;
pub mod experiment;
pub mod external;
pub mod scaling;
pub mod summary;
pub mod trace_io;

mod error;

pub use bvo_core as core;
pub use error::{HarnessError, Result};

use std::time::Instant;

/// Milliseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl bvo_core::optimizer::Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}
