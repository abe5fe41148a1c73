//! Netpbm and PFM readers and writers.
//!
//! * RGB: binary PPM, header `P6\n{W} {H}\n255\n`, rows top to bottom.
//! * Depth: PFM grayscale, header `Pf\n{W} {H}\n-1.0\n` (negative scale =
//!   little endian), f32 rows bottom to top as the format requires.
//! * Counts and masks: binary PGM, header `P5\n{W} {H}\n255\n`, values
//!   clamped to 255.

use super::quality::Rgb8;
use super::FrameOutput;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn encode_ppm(width: u32, height: u32, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), width as usize * height as usize * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

pub fn encode_pgm(width: u32, height: u32, values: &[u8]) -> Vec<u8> {
    assert_eq!(values.len(), width as usize * height as usize);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(values);
    out
}

/// `values` is row-major from the top row.
pub fn encode_pfm(width: u32, height: u32, values: &[f32]) -> Vec<u8> {
    assert_eq!(values.len(), width as usize * height as usize);
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    let w = width as usize;
    for y in (0..height as usize).rev() {
        for v in &values[y * w..(y + 1) * w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Splits `n` whitespace-separated header tokens (skipping `#` comments)
/// and returns them with the offset of the first data byte.
fn header_tokens(bytes: &[u8], n: usize) -> io::Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < n {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad("truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the data.
    if i >= bytes.len() {
        return Err(bad("missing data"));
    }
    Ok((tokens, i + 1))
}

fn dims(tokens: &[String]) -> io::Result<(u32, u32)> {
    let w = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let h = tokens[2].parse().map_err(|_| bad("bad height"))?;
    Ok((w, h))
}

fn netpbm(bytes: &[u8], magic: &str, channels: usize) -> io::Result<(u32, u32, Vec<u8>)> {
    let (t, at) = header_tokens(bytes, 4)?;
    if t[0] != magic {
        return Err(bad(format!("expected {magic}, found {}", t[0])));
    }
    if t[3] != "255" {
        return Err(bad("only maxval 255 is supported"));
    }
    let (w, h) = dims(&t)?;
    let need = w as usize * h as usize * channels;
    if bytes.len() - at != need {
        return Err(bad(format!("expected {need} data bytes, found {}", bytes.len() - at)));
    }
    Ok((w, h, bytes[at..].to_vec()))
}

pub fn decode_ppm(bytes: &[u8]) -> io::Result<Rgb8> {
    let (w, h, data) = netpbm(bytes, "P6", 3)?;
    Ok(Rgb8 {
        width: w,
        height: h,
        data,
    })
}

pub fn decode_pgm(bytes: &[u8]) -> io::Result<(u32, u32, Vec<u8>)> {
    netpbm(bytes, "P5", 1)
}

/// Returns row-major values from the top row.
pub fn decode_pfm(bytes: &[u8]) -> io::Result<(u32, u32, Vec<f32>)> {
    let (t, at) = header_tokens(bytes, 4)?;
    if t[0] != "Pf" {
        return Err(bad(format!("expected Pf, found {}", t[0])));
    }
    let scale: f32 = t[3].parse().map_err(|_| bad("bad scale"))?;
    let (w, h) = dims(&t)?;
    let (w_, h_) = (w as usize, h as usize);
    if bytes.len() - at != w_ * h_ * 4 {
        return Err(bad("PFM data size mismatch"));
    }
    let mut out = vec![0f32; w_ * h_];
    for (k, c) in bytes[at..].chunks_exact(4).enumerate() {
        let raw = [c[0], c[1], c[2], c[3]];
        let v = if scale < 0.0 {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, x) = (k / w_, k % w_);
        out[(h_ - 1 - row) * w_ + x] = v;
    }
    Ok((w, h, out))
}

/// Hop counts (or any counts) as 8-bit values, white at 255 and above.
pub fn clamp_counts(counts: &[u32]) -> Vec<u8> {
    counts.iter().map(|&c| c.min(255) as u8).collect()
}

/// Destinations for [`export_images`]; absent entries are skipped.
#[derive(Debug, Clone, Default)]
pub struct ExportPaths {
    pub rgb: Option<PathBuf>,
    pub depth: Option<PathBuf>,
    pub router_hops: Option<PathBuf>,
    pub tracer_hops: Option<PathBuf>,
    pub missing: Option<PathBuf>,
}

fn write(path: &Option<PathBuf>, bytes: impl FnOnce() -> Vec<u8>) -> io::Result<()> {
    if let Some(p) = path {
        fs::write(p, bytes())?;
    }
    Ok(())
}

pub fn export_images(frame: &FrameOutput, paths: &ExportPaths) -> io::Result<()> {
    let (w, h) = (frame.width, frame.height);
    write(&paths.rgb, || encode_ppm(w, h, &frame.rgb8()))?;
    write(&paths.depth, || encode_pfm(w, h, &frame.depth))?;
    write(&paths.router_hops, || encode_pgm(w, h, &clamp_counts(&frame.router_hops)))?;
    write(&paths.tracer_hops, || encode_pgm(w, h, &clamp_counts(&frame.tracer_hops)))?;
    write(&paths.missing, || {
        let m: Vec<u8> = frame.missing.iter().map(|&m| if m { 255 } else { 0 }).collect();
        encode_pgm(w, h, &m)
    })
}

pub fn read_ppm(path: &Path) -> io::Result<Rgb8> {
    decode_ppm(&fs::read(path)?)
}

pub fn read_pfm(path: &Path) -> io::Result<(u32, u32, Vec<f32>)> {
    decode_pfm(&fs::read(path)?)
}

pub fn read_pgm(path: &Path) -> io::Result<(u32, u32, Vec<u8>)> {
    decode_pgm(&fs::read(path)?)
}
