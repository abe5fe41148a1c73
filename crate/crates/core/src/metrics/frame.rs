use serde::{Deserialize, Serialize};

/// An assembled frame plus its per-pixel diagnostics. Row-major, origin top
/// left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOutput {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<[f32; 3]>,
    /// Distance at 50% transmittance, `-1` when never reached.
    pub depth: Vec<f32>,
    pub router_hops: Vec<u32>,
    pub tracer_hops: Vec<u32>,
    pub cell_steps: Vec<u32>,
    /// Pixels whose ray never reached the framebuffer.
    pub missing: Vec<bool>,
}

impl FrameOutput {
    /// Blank frame with every pixel marked missing.
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        FrameOutput {
            width,
            height,
            rgb: vec![[0.0; 3]; n],
            depth: vec![-1.0; n],
            router_hops: vec![0; n],
            tracer_hops: vec![0; n],
            cell_steps: vec![0; n],
            missing: vec![true; n],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Colors quantized to 8 bits per channel: `round(clamp(c, 0, 1) * 255)`.
    pub fn rgb8(&self) -> Vec<u8> {
        self.rgb.iter().flat_map(|c| c.map(to_u8)).collect()
    }

    /// True when colors and depths agree bit for bit.
    pub fn same_image(&self, other: &FrameOutput) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.rgb.len() == other.rgb.len()
            && self
                .rgb
                .iter()
                .zip(&other.rgb)
                .all(|(a, b)| a.map(f32::to_bits) == b.map(f32::to_bits))
            && self
                .depth
                .iter()
                .zip(&other.depth)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Number of pixels whose color differs bitwise.
    pub fn differing_pixels(&self, other: &FrameOutput) -> usize {
        self.rgb
            .iter()
            .zip(&other.rgb)
            .filter(|(a, b)| a.map(f32::to_bits) != b.map(f32::to_bits))
            .count()
    }
}

pub fn to_u8(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}
