//! Byte-exact ray payloads.
//!
//! Every layout starts with four little-endian u16 fields (`pixel_x`,
//! `pixel_y`, `dest_shard`, `dest_cell`), followed by `t` and `T`, then the
//! accumulated color, then (all-half only) a 16-bit depth code.
//!
//! | layout   | t, T | rgb  | depth16 | bytes |
//! |----------|------|------|---------|-------|
//! | default  | f32  | f32  | -       | 28    |
//! | mixed    | f16  | f32  | -       | 24    |
//! | all-half | f16  | f16  | u16     | 20    |

use half::f16;
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

/// `dest_shard` of an empty buffer slot.
pub const INVALID_SHARD: u16 = 0xFFFF;
/// `dest_cell` of a ray that is done marching; `dest_shard` then names the
/// tracer owning its pixel.
pub const FINISHED_CELL: u16 = 0xFFFF;
/// depth16 code meaning "transmittance never reached one half".
pub const NO_DEPTH_CODE: u16 = 0xFFFF;
/// Payload of the variant carrying explicit origin and direction in f32.
pub const BASELINE_BYTES_PER_RAY: usize = 48;
/// Default size of one router or tracer buffer.
pub const DEFAULT_BUFFER_BYTES: usize = 57_600;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PayloadError {
    #[error("payload is {found} bytes, layout {layout:?} needs {expected}")]
    WrongLength {
        layout: PayloadLayout,
        expected: usize,
        found: usize,
    },
    #[error("unknown payload layout {0:?} (expected default, mixed or all-half)")]
    UnknownLayout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadLayout {
    Default,
    Mixed,
    AllHalf,
}

impl PayloadLayout {
    pub const ALL: [PayloadLayout; 3] = [PayloadLayout::Default, PayloadLayout::Mixed, PayloadLayout::AllHalf];

    pub const fn bytes_per_ray(self) -> usize {
        match self {
            PayloadLayout::Default => 28,
            PayloadLayout::Mixed => 24,
            PayloadLayout::AllHalf => 20,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            PayloadLayout::Default => "default",
            PayloadLayout::Mixed => "mixed",
            PayloadLayout::AllHalf => "all-half",
        }
    }

    pub const fn half_distance(self) -> bool {
        !matches!(self, PayloadLayout::Default)
    }

    pub const fn half_color(self) -> bool {
        matches!(self, PayloadLayout::AllHalf)
    }

    pub const fn has_depth(self) -> bool {
        matches!(self, PayloadLayout::AllHalf)
    }
}

impl FromStr for PayloadLayout {
    type Err = PayloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" | "full" => Ok(PayloadLayout::Default),
            "mixed" => Ok(PayloadLayout::Mixed),
            "all-half" | "half" => Ok(PayloadLayout::AllHalf),
            other => Err(PayloadError::UnknownLayout(other.to_string())),
        }
    }
}

impl std::fmt::Display for PayloadLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RayState {
    pub pixel_x: u16,
    pub pixel_y: u16,
    pub dest_shard: u16,
    pub dest_cell: u16,
    pub t: f32,
    pub transmittance: f32,
    pub color: [f32; 3],
    /// Only carried by layouts with a depth slot.
    pub depth16: Option<u16>,
}

impl RayState {
    pub fn invalid() -> Self {
        RayState {
            dest_shard: INVALID_SHARD,
            ..Default::default()
        }
    }

    pub fn is_invalid(&self) -> bool {
        self.dest_shard == INVALID_SHARD
    }

    pub fn is_finished(&self) -> bool {
        !self.is_invalid() && self.dest_cell == FINISHED_CELL
    }
}

/// Counts values that had to be clamped to the f16 range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CodecDiagnostics {
    pub f16_overflows: u64,
}

/// f32 to IEEE binary16, round to nearest even; finite values beyond the f16
/// range clamp to +-65504 and are counted.
pub fn to_f16(x: f32, diag: &mut CodecDiagnostics) -> f16 {
    if x.is_finite() && x.abs() > f16::MAX.to_f32() {
        diag.f16_overflows += 1;
        return if x > 0.0 { f16::MAX } else { f16::MIN };
    }
    let h = f16::from_f32(x);
    if h.is_infinite() && x.is_finite() {
        // Values in (65504, 65520) round up to infinity; keep them finite.
        diag.f16_overflows += 1;
        return if x > 0.0 { f16::MAX } else { f16::MIN };
    }
    h
}

/// The value a field takes after passing through the layout.
pub fn quantize_f16(x: f32) -> f32 {
    to_f16(x, &mut CodecDiagnostics::default()).to_f32()
}

/// Like [`to_f16`] but rounds toward zero. Used for the ray distance: a
/// resumed ray then never starts past the face it entered through, so a
/// cell thinner than one f16 step along the ray cannot be skipped.
pub fn to_f16_toward_zero(x: f32, diag: &mut CodecDiagnostics) -> f16 {
    let h = to_f16(x, diag);
    if h.is_finite() && h.to_f32().abs() > x.abs() {
        // Sign-magnitude: one less in the bits is one step toward zero.
        f16::from_bits(h.to_bits() - 1)
    } else {
        h
    }
}

/// The distance a ray resumes at after passing through a half layout.
pub fn quantize_distance_f16(t: f32) -> f32 {
    to_f16_toward_zero(t, &mut CodecDiagnostics::default()).to_f32()
}

/// Writes `state` into `out`, which must be exactly `layout.bytes_per_ray()`
/// long.
pub fn encode_into(state: &RayState, layout: PayloadLayout, out: &mut [u8], diag: &mut CodecDiagnostics) {
    assert_eq!(out.len(), layout.bytes_per_ray(), "payload slot size");
    out[0..2].copy_from_slice(&state.pixel_x.to_le_bytes());
    out[2..4].copy_from_slice(&state.pixel_y.to_le_bytes());
    out[4..6].copy_from_slice(&state.dest_shard.to_le_bytes());
    out[6..8].copy_from_slice(&state.dest_cell.to_le_bytes());
    let mut at = 8;
    let put16 = |out: &mut [u8], at: &mut usize, v: f32, diag: &mut CodecDiagnostics| {
        out[*at..*at + 2].copy_from_slice(&to_f16(v, diag).to_bits().to_le_bytes());
        *at += 2;
    };
    let put32 = |out: &mut [u8], at: &mut usize, v: f32| {
        out[*at..*at + 4].copy_from_slice(&v.to_le_bytes());
        *at += 4;
    };
    if layout.half_distance() {
        out[8..10].copy_from_slice(&to_f16_toward_zero(state.t, diag).to_bits().to_le_bytes());
        at = 10;
        put16(out, &mut at, state.transmittance, diag);
    } else {
        put32(out, &mut at, state.t);
        put32(out, &mut at, state.transmittance);
    }
    for v in state.color {
        if layout.half_color() {
            put16(out, &mut at, v, diag);
        } else {
            put32(out, &mut at, v);
        }
    }
    if layout.has_depth() {
        out[at..at + 2].copy_from_slice(&state.depth16.unwrap_or(NO_DEPTH_CODE).to_le_bytes());
    }
}

pub fn encode(state: &RayState, layout: PayloadLayout, diag: &mut CodecDiagnostics) -> Vec<u8> {
    let mut out = vec![0u8; layout.bytes_per_ray()];
    encode_into(state, layout, &mut out, diag);
    out
}

pub fn decode(bytes: &[u8], layout: PayloadLayout) -> Result<RayState, PayloadError> {
    if bytes.len() != layout.bytes_per_ray() {
        return Err(PayloadError::WrongLength {
            layout,
            expected: layout.bytes_per_ray(),
            found: bytes.len(),
        });
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let f16_at = |i: usize| f16::from_bits(u16_at(i)).to_f32();
    let mut s = RayState {
        pixel_x: u16_at(0),
        pixel_y: u16_at(2),
        dest_shard: u16_at(4),
        dest_cell: u16_at(6),
        ..Default::default()
    };
    let mut at = 8;
    if layout.half_distance() {
        s.t = f16_at(at);
        s.transmittance = f16_at(at + 2);
        at += 4;
    } else {
        s.t = f32_at(at);
        s.transmittance = f32_at(at + 4);
        at += 8;
    }
    for c in 0..3 {
        if layout.half_color() {
            s.color[c] = f16_at(at);
            at += 2;
        } else {
            s.color[c] = f32_at(at);
            at += 4;
        }
    }
    if layout.has_depth() {
        let d = u16_at(at);
        s.depth16 = (d != NO_DEPTH_CODE).then_some(d);
    }
    Ok(s)
}

/// Header fields only; used by routers, which never touch the rest.
#[inline]
pub fn peek_dest(bytes: &[u8]) -> (u16, u16) {
    (u16::from_le_bytes([bytes[4], bytes[5]]), u16::from_le_bytes([bytes[6], bytes[7]]))
}

#[inline]
pub fn peek_pixel(bytes: &[u8]) -> (u16, u16) {
    (u16::from_le_bytes([bytes[0], bytes[1]]), u16::from_le_bytes([bytes[2], bytes[3]]))
}

/// Linear code over `[0, t_scale]`: `floor(t / t_scale * 65535)`, clamped.
pub fn quantize_depth(t: f32, t_scale: f32) -> u16 {
    let x = (t as f64 / t_scale as f64 * 65535.0).floor();
    x.clamp(0.0, 65535.0) as u16
}

/// Midpoint of the code's interval.
pub fn dequantize_depth(code: u16, t_scale: f32) -> f32 {
    ((code as f64 + 0.5) * t_scale as f64 / 65535.0) as f32
}

pub fn buffer_capacity(buffer_bytes: usize, bytes_per_ray: usize) -> usize {
    buffer_bytes / bytes_per_ray
}
