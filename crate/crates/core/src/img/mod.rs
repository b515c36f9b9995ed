//! Linear-light images and the PGM/PFM container formats.

mod pfm;
mod pgm;

pub use pfm::{read_pfm, read_pfm_rgb, write_pfm, write_pfm_rgb};
pub use pgm::{read_pgm, write_pgm16, write_pgm8, write_ppm8};

use crate::error::{Error, Result};

/// Single-channel f32 image, row-major, `(0,0)` top-left. Pixel `(x, y)` has
/// center `(x + 0.5, y + 0.5)` in image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::argument(format!(
                "image data has {} samples for {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample at image coordinates (pixel centers at half-integers).
    /// Coordinates clamp to the valid interpolation domain.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f64 {
        sample_bilinear(self.width, self.height, u, v, |x, y| self.get(x, y) as f64)
    }
}

/// Three-channel f32 image, row-major interleaved RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height * 3] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f64; 3] {
        [0, 1, 2].map(|c| {
            sample_bilinear(self.width, self.height, u, v, |x, y| {
                self.data[(y * self.width + x) * 3 + c] as f64
            })
        })
    }

    pub fn channel(&self, c: usize) -> GrayImage {
        let data = self.data.iter().skip(c).step_by(3).copied().collect();
        GrayImage { width: self.width, height: self.height, data }
    }
}

fn sample_bilinear(
    width: usize,
    height: usize,
    u: f64,
    v: f64,
    get: impl Fn(usize, usize) -> f64,
) -> f64 {
    // shift to the lattice of pixel centers
    let x = (u - 0.5).clamp(0.0, (width - 1) as f64);
    let y = (v - 0.5).clamp(0.0, (height - 1) as f64);
    let x0 = (x.floor() as usize).min(width.saturating_sub(2));
    let y0 = (y.floor() as usize).min(height.saturating_sub(2));
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let top = get(x0, y0) * (1.0 - fx) + get(x1, y0) * fx;
    let bot = get(x0, y1) * (1.0 - fx) + get(x1, y1) * fx;
    top * (1.0 - fy) + bot * fy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_is_exact_at_pixel_centers() {
        let mut img = GrayImage::new(4, 3);
        for y in 0..3 {
            for x in 0..4 {
                img.set(x, y, (y * 4 + x) as f32);
            }
        }
        for y in 0..3 {
            for x in 0..4 {
                let v = img.sample_bilinear(x as f64 + 0.5, y as f64 + 0.5);
                assert!((v - (y * 4 + x) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bilinear_interpolates_between_centers() {
        let mut img = GrayImage::new(2, 1);
        img.set(0, 0, 1.0);
        img.set(1, 0, 3.0);
        assert!((img.sample_bilinear(1.0, 0.5) - 2.0).abs() < 1e-12);
        // clamped outside
        assert!((img.sample_bilinear(-5.0, 0.5) - 1.0).abs() < 1e-12);
        assert!((img.sample_bilinear(10.0, 0.5) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rgb_channel_extraction() {
        let mut img = RgbImage::new(2, 2);
        img.set(1, 0, [0.1, 0.2, 0.3]);
        let g = img.channel(1);
        assert_eq!(g.get(1, 0), 0.2);
        assert_eq!(g.get(0, 0), 0.0);
    }
}
