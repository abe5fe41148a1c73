//! Image quality on 8-bit quantized RGB.

use super::FrameOutput;
use thiserror::Error;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 255.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("image sizes differ: {a:?} vs {b:?}")]
    SizeMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("buffer of {found} values does not match {width}x{height}x3")]
    BadBuffer { width: u32, height: u32, found: usize },
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8 {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Rgb8 {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, MetricsError> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(MetricsError::BadBuffer {
                width,
                height,
                found: data.len(),
            });
        }
        Ok(Rgb8 { width, height, data })
    }

    pub fn from_frame(f: &FrameOutput) -> Self {
        Rgb8 {
            width: f.width,
            height: f.height,
            data: f.rgb8(),
        }
    }
}

fn same_size(a: &Rgb8, b: &Rgb8) -> Result<(), MetricsError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricsError::SizeMismatch {
            a: (a.width, a.height),
            b: (b.width, b.height),
        });
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB with the MSE taken over every channel of
/// every pixel. Identical images give `f64::INFINITY`.
pub fn psnr(a: &Rgb8, b: &Rgb8) -> Result<f64, MetricsError> {
    same_size(a, b)?;
    if a.data.is_empty() {
        return Ok(f64::INFINITY);
    }
    let sse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / a.data.len() as f64;
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

pub fn psnr_frames(a: &FrameOutput, b: &FrameOutput) -> Result<f64, MetricsError> {
    psnr(&Rgb8::from_frame(a), &Rgb8::from_frame(b))
}

fn gaussian(size: usize) -> Vec<f64> {
    let c = (size / 2) as f64;
    let w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Separable filter over the positions where the whole window fits.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean structural similarity: Gaussian window of 11 taps (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, L = 255, evaluated where the window fits inside the
/// image, averaged over windows and then over the three channels. Images
/// narrower than the window use the largest odd window that fits.
pub fn ssim(a: &Rgb8, b: &Rgb8) -> Result<f64, MetricsError> {
    same_size(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w == 0 || h == 0 {
        return Ok(1.0);
    }
    let size = SSIM_WINDOW.min(w).min(h);
    let size = if size % 2 == 0 { size - 1 } else { size };
    let k = gaussian(size);
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let mut total = 0.0;
    for ch in 0..3 {
        let x: Vec<f64> = a.data.iter().skip(ch).step_by(3).map(|&v| v as f64).collect();
        let y: Vec<f64> = b.data.iter().skip(ch).step_by(3).map(|&v| v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let (mx, ow, oh) = filter_valid(&x, w, h, &k);
        let (my, _, _) = filter_valid(&y, w, h, &k);
        let (sxx, _, _) = filter_valid(&xx, w, h, &k);
        let (syy, _, _) = filter_valid(&yy, w, h, &k);
        let (sxy, _, _) = filter_valid(&xy, w, h, &k);
        let mut acc = 0.0;
        for i in 0..ow * oh {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += acc / (ow * oh) as f64;
    }
    Ok(total / 3.0)
}

pub fn ssim_frames(a: &FrameOutput, b: &FrameOutput) -> Result<f64, MetricsError> {
    ssim(&Rgb8::from_frame(a), &Rgb8::from_frame(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: u32, h: u32, seed: u64) -> Rgb8 {
        let mut s = seed;
        let data = (0..w * h * 3)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 56) as u8
            })
            .collect();
        Rgb8::new(w, h, data).unwrap()
    }

    /// Direct per-window evaluation with a freshly built 2D kernel.
    fn ssim_direct(a: &Rgb8, b: &Rgb8) -> f64 {
        let (w, h) = (a.width as usize, a.height as usize);
        let n = 11;
        let mut k2 = vec![vec![0.0f64; n]; n];
        let mut sum = 0.0;
        for (i, row) in k2.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(di * di + dj * dj) / 4.5).exp();
                sum += *v;
            }
        }
        let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
        let mut total = 0.0;
        for ch in 0..3 {
            let px = |img: &Rgb8, x: usize, y: usize| img.data[(y * w + x) * 3 + ch] as f64;
            let mut acc = 0.0;
            let mut count = 0;
            for y0 in 0..=h - n {
                for x0 in 0..=w - n {
                    let (mut mx, mut my) = (0.0, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            let g = k2[i][j] / sum;
                            mx += g * px(a, x0 + j, y0 + i);
                            my += g * px(b, x0 + j, y0 + i);
                        }
                    }
                    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            let g = k2[i][j] / sum;
                            let (p, q) = (px(a, x0 + j, y0 + i) - mx, px(b, x0 + j, y0 + i) - my);
                            vx += g * p * p;
                            vy += g * q * q;
                            cov += g * p * q;
                        }
                    }
                    acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                    count += 1;
                }
            }
            total += acc / count as f64;
        }
        total / 3.0
    }

    #[test]
    fn identical_images() {
        let a = noise(20, 16, 1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_offset_psnr() {
        let a = Rgb8::new(8, 8, vec![100; 192]).unwrap();
        let b = Rgb8::new(8, 8, vec![101; 192]).unwrap();
        let expect = 20.0 * 255f64.log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-9);
        assert!((expect - 48.1308).abs() < 1e-4);
    }

    #[test]
    fn symmetric() {
        let (a, b) = (noise(24, 18, 2), noise(24, 18, 3));
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_direct_windows() {
        let a = noise(23, 17, 4);
        let mut b = a.clone();
        for (i, v) in b.data.iter_mut().enumerate() {
            *v = v.saturating_add((i % 7) as u8 * 3);
        }
        let fast = ssim(&a, &b).unwrap();
        let slow = ssim_direct(&a, &b);
        assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        assert!(fast < 1.0);
    }

    #[test]
    fn size_mismatch() {
        assert!(psnr(&noise(2, 2, 1), &noise(2, 3, 1)).is_err());
        assert!(Rgb8::new(2, 2, vec![0; 11]).is_err());
    }
}
