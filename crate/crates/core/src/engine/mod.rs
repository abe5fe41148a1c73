//! Barrier-synchronized simulation of the distributed renderer.
//!
//! Every iteration runs a compute phase over all tiles (generator, routers,
//! tracers; each touches only its own state) followed by an exchange phase
//! that moves rays along overlay links in a fixed order. A host sync happens
//! every `rc` iterations.
//!
//! Hop convention: every exchange move of an unfinished ray is one router
//! hop, including the generator-to-root injection; a move that lands on a
//! tracer is additionally one tracer hop. Finished rays heading to their
//! framebuffer owner no longer count, and detours through the generator's
//! spill queue are not hops. On a one-level overlay a ray that finishes in
//! the first shard therefore records 2 router hops and 1 tracer hop.

mod buffer;
mod generator;
mod router;
mod schedule;
mod system;
mod tracer;

pub use buffer::{RayBuffer, Shadow};
pub use generator::{generator_step, GeneratorContext, GeneratorReport, GeneratorTile};
pub use router::{dest_leaf, router_step, serial_router, RouteContext, RouterReport, RouterTile, MAX_WORKERS};
pub use schedule::{CameraPolicy, Completion, FrameSchedule, OverflowPolicy, ScanOrder};
pub use system::{run_frame, set_camera, System, Tile};
pub use tracer::{tracer_step, PixelResult, TracerContext, TracerReport, TracerTile};

use crate::overlay::{OverlayError, Role};
use crate::partition::{FootprintWeights, PartitionError};
use crate::payload::{PayloadLayout, DEFAULT_BUFFER_BYTES};
use crate::render::{RenderError, DEFAULT_MAX_STEPS, DEFAULT_T_MIN};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Modeled private memory of one tile (624 kB).
pub const DEFAULT_SRAM_BUDGET: usize = 638_976;
/// Deepest overlay the engine accepts; keeps leaf ids below the 0xFFFF
/// sentinel.
pub const MAX_ENGINE_LEVELS: u32 = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("tile {tile} ({role:?}) needs {bytes} B of modeled SRAM, budget is {budget} B")]
    SramBudget {
        tile: usize,
        role: Role,
        bytes: usize,
        budget: usize,
    },
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error("tracer {tile} received a ray for shard {shard} cell {cell}")]
    BadDestination { tile: usize, shard: u16, cell: u16 },
    #[error("pixel {0} reached the framebuffer twice")]
    DuplicatePixel(usize),
    #[error("conservation broken at iteration {iteration}: injected {injected} != terminated {terminated} + dropped {dropped} + in flight {in_flight}")]
    Conservation {
        iteration: u64,
        injected: u64,
        terminated: u64,
        dropped: u64,
        in_flight: u64,
    },
    #[error("no frame in progress")]
    NoFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub layout: PayloadLayout,
    /// Router levels; the overlay has `4^levels` tracer tiles.
    pub levels: u32,
    /// Bytes per router lane or tracer buffer.
    pub buffer_bytes: usize,
    /// Overrides the capacity derived from `buffer_bytes`.
    pub lane_capacity: Option<usize>,
    pub sram_budget: usize,
    /// Simulated worker threads per tile, 1..=6.
    pub workers: usize,
    /// Cells marched per ray per tracer visit; unlimited when absent.
    pub tracer_cell_cap: Option<u32>,
    /// Lets the root router park overflow in the generator.
    pub generator_spill: bool,
    pub footprint: FootprintWeights,
    pub t_min: f32,
    pub max_steps: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            layout: PayloadLayout::Default,
            levels: 3,
            buffer_bytes: DEFAULT_BUFFER_BYTES,
            lane_capacity: None,
            sram_budget: DEFAULT_SRAM_BUDGET,
            workers: MAX_WORKERS,
            tracer_cell_cap: None,
            generator_spill: true,
            footprint: FootprintWeights::default(),
            t_min: DEFAULT_T_MIN,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl EngineConfig {
    /// Rays per buffer.
    pub fn capacity(&self) -> usize {
        self.lane_capacity
            .unwrap_or_else(|| crate::payload::buffer_capacity(self.buffer_bytes, self.layout.bytes_per_ray()))
    }

    /// Bytes charged per buffer in the memory model.
    pub fn buffer_model_bytes(&self) -> usize {
        match self.lane_capacity {
            Some(c) => c * self.layout.bytes_per_ray(),
            None => self.buffer_bytes,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.levels == 0 || self.levels > MAX_ENGINE_LEVELS {
            return Err(EngineError::Config(format!(
                "levels must be in 1..={MAX_ENGINE_LEVELS}, got {}",
                self.levels
            )));
        }
        if !(1..=MAX_WORKERS).contains(&self.workers) {
            return Err(EngineError::Config(format!("workers must be in 1..={MAX_WORKERS}")));
        }
        if self.capacity() == 0 {
            return Err(EngineError::Config("buffers hold no rays".into()));
        }
        if self.tracer_cell_cap == Some(0) {
            return Err(EngineError::Config("tracer cell cap must be at least 1".into()));
        }
        if !(self.t_min >= 0.0 && self.t_min < 1.0) || self.max_steps == 0 {
            return Err(EngineError::Config("t_min must be in [0, 1) and max_steps positive".into()));
        }
        Ok(())
    }
}

/// Engine configuration and frame schedule as one JSON document.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub engine: EngineConfig,
    #[serde(flatten)]
    pub schedule: FrameSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Compute,
    Exchange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverflowAction {
    Retained,
    Dropped,
    Spilled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverflowEvent {
    pub iteration: u64,
    pub tile: u32,
    pub phase: Phase,
    pub action: OverflowAction,
    pub count: u32,
}

/// Modeled bytes of one tile by category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileMemory {
    pub tile: u32,
    pub role: Role,
    pub shard_bytes: usize,
    pub buffer_bytes: usize,
    pub slice_bytes: usize,
    pub misc_bytes: usize,
}

impl TileMemory {
    pub fn total(&self) -> usize {
        self.shard_bytes + self.buffer_bytes + self.slice_bytes + self.misc_bytes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub levels: u32,
    pub layout: PayloadLayout,
    pub overflow_policy: OverflowPolicy,
    pub partition_count: usize,
    pub width: u32,
    pub height: u32,
    pub iterations_executed: u64,
    pub scheduled_iterations: u64,
    pub injection_iterations: u64,
    pub rays_injected: u64,
    pub rays_terminated: u64,
    pub rays_dropped: u64,
    pub rays_in_flight: u64,
    pub rays_retained: u64,
    pub rays_spilled: u64,
    pub host_sync_count: u64,
    /// Finished pixels and their hop totals.
    pub finished_pixels: u64,
    pub total_router_hops: u64,
    pub total_tracer_hops: u64,
    /// Largest number of router hops between consecutive tracer arrivals
    /// (or between injection and the first arrival) of any ray.
    pub max_router_hops_between_tracers: u32,
    pub cells_marched: u64,
    pub f16_overflows: u64,
    /// Rays held by each tile at its fullest barrier.
    pub peak_occupancy: Vec<u32>,
    pub overflow_events: Vec<OverflowEvent>,
    /// Iterations at which a new camera took effect.
    pub camera_switches: Vec<u64>,
    /// The frame finished with nothing in flight.
    pub completed: bool,
    /// A whole sync window passed without any ray moving.
    pub stalled: bool,
}

impl RunStats {
    /// injected = terminated + dropped + in flight.
    pub fn balanced(&self) -> bool {
        self.rays_injected == self.rays_terminated + self.rays_dropped + self.rays_in_flight
    }
}
