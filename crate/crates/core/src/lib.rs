//! Deterministic software model of a distributed, fully on-chip volume
//! renderer for Voronoi "foam" scenes.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] and [`render`]: implicit Voronoi faces and the serial
//!   reference ray marcher.
//! * [`forge`]: synthetic scenes, adjacency construction and the FOAM file
//!   format.
//! * [`partition`]: k-d tree and octree sharding with boundary records.
//! * [`overlay`] and [`payload`]: the quadtree routing topology and the
//!   byte-exact ray payloads that travel over it.
//! * [`engine`]: the bulk-synchronous tile simulator.
//! * [`metrics`]: frames, image I/O, PSNR/SSIM and run reports.

pub mod engine;
pub mod forge;
pub mod geometry;
pub mod metrics;
pub mod overlay;
pub mod partition;
pub mod payload;
pub mod render;
pub mod scene;

pub use geometry::{Aabb, Ray, Site, Vec3};
pub use metrics::FrameOutput;
pub use render::{Camera, MarchParams};
pub use scene::Scene;
