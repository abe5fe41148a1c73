//! Frames, image files, quality metrics and run reports.

mod frame;
pub mod image_io;
pub mod quality;
pub mod report;

pub use frame::{to_u8, FrameOutput};
pub use image_io::{export_images, ExportPaths};
pub use quality::{psnr, psnr_frames, ssim, ssim_frames, MetricsError, Rgb8};
pub use report::{conservation_audit, hop_histogram, memory_report, ConservationAudit, HopHistogram, MemoryReport};
