//! Binary gray-code structured light: pattern stacks, per-pixel decoding,
//! and sub-pixel feature extraction.
//!
//! A stack starts with all-white and all-black reference frames, then one
//! frame per code bit (most significant first), column bits before row bits.
//! With inverse patterns enabled (the default) every bit frame is followed by
//! its complement and a pixel's bit is read by comparing the pair, which is
//! robust to albedo and shading variation.

use crate::error::{Error, Result};
use crate::img::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Binary-reflected gray code.
#[inline]
pub fn gray_encode(v: u32) -> u32 {
    v ^ (v >> 1)
}

/// Inverse of [`gray_encode`].
#[inline]
pub fn gray_decode(mut g: u32) -> u32 {
    let mut v = g;
    while g > 0 {
        g >>= 1;
        v ^= g;
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayCodeSpec {
    pub proj_width: usize,
    pub proj_height: usize,
    pub use_inverse_patterns: bool,
}

impl GrayCodeSpec {
    pub fn new(proj_width: usize, proj_height: usize) -> Result<Self> {
        if proj_width == 0 || proj_height == 0 {
            return Err(Error::argument("projector dimensions must be positive".to_string()));
        }
        Ok(Self { proj_width, proj_height, use_inverse_patterns: true })
    }

    pub fn bits_x(&self) -> u32 {
        bits_for(self.proj_width)
    }

    pub fn bits_y(&self) -> u32 {
        bits_for(self.proj_height)
    }

    /// Total stack length including the two reference frames.
    pub fn pattern_count(&self) -> usize {
        let bits = (self.bits_x() + self.bits_y()) as usize;
        2 + if self.use_inverse_patterns { 2 * bits } else { bits }
    }

    /// Emitted value of projector pixel `(x, y)` in stack frame `frame`.
    pub fn pattern_value(&self, frame: usize, x: usize, y: usize) -> bool {
        match self.frame_role(frame) {
            FrameRole::White => true,
            FrameRole::Black => false,
            FrameRole::BitX { bit, inverted } => {
                (gray_encode(x as u32) >> bit) & 1 == u32::from(!inverted)
            }
            FrameRole::BitY { bit, inverted } => {
                (gray_encode(y as u32) >> bit) & 1 == u32::from(!inverted)
            }
        }
    }

    fn frame_role(&self, frame: usize) -> FrameRole {
        assert!(frame < self.pattern_count(), "frame {frame} out of range");
        match frame {
            0 => FrameRole::White,
            1 => FrameRole::Black,
            _ => {
                let per_bit = if self.use_inverse_patterns { 2 } else { 1 };
                let idx = (frame - 2) / per_bit;
                let inverted = self.use_inverse_patterns && (frame - 2) % 2 == 1;
                let bx = self.bits_x() as usize;
                if idx < bx {
                    // most significant bit first
                    FrameRole::BitX { bit: (bx - 1 - idx) as u32, inverted }
                } else {
                    let by = self.bits_y() as usize;
                    FrameRole::BitY { bit: (by - 1 - (idx - bx)) as u32, inverted }
                }
            }
        }
    }
}

fn bits_for(extent: usize) -> u32 {
    // ceil(log2(extent)), with 1 bit minimum so a 1-wide axis still decodes
    let mut bits = 0;
    while (1usize << bits) < extent {
        bits += 1;
    }
    bits.max(1)
}

enum FrameRole {
    White,
    Black,
    BitX { bit: u32, inverted: bool },
    BitY { bit: u32, inverted: bool },
}

/// Render the full pattern stack as binary images at projector resolution.
pub fn generate_patterns(spec: &GrayCodeSpec) -> Vec<GrayImage> {
    (0..spec.pattern_count())
        .map(|frame| {
            let mut img = GrayImage::new(spec.proj_width, spec.proj_height);
            for y in 0..spec.proj_height {
                for x in 0..spec.proj_width {
                    img.set(x, y, if spec.pattern_value(frame, x, y) { 1.0 } else { 0.0 });
                }
            }
            img
        })
        .collect()
}

/// Per-pixel decode result over a camera image.
#[derive(Debug, Clone)]
pub struct CodeMap {
    pub width: usize,
    pub height: usize,
    /// Decoded projector pixel `(column, row)`; `None` where contrast was too
    /// low or the decoded code fell outside the projector.
    pub codes: Vec<Option<(u32, u32)>>,
    /// White-minus-black contrast, the decode confidence.
    pub confidence: Vec<f32>,
}

impl CodeMap {
    pub fn code_at(&self, x: usize, y: usize) -> Option<(u32, u32)> {
        self.codes[y * self.width + x]
    }

    pub fn decoded_count(&self) -> usize {
        self.codes.iter().filter(|c| c.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecodeOptions {
    /// Minimum white-minus-black contrast, as a fraction of full scale.
    pub contrast_floor: f32,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self { contrast_floor: 0.05 }
    }
}

/// Decode a captured stack into per-pixel projector codes.
///
/// Stack order must match [`generate_patterns`]. Rows are decoded in
/// parallel; the result is identical for any thread count.
pub fn decode(stack: &[GrayImage], spec: &GrayCodeSpec, opts: &DecodeOptions) -> Result<CodeMap> {
    if stack.len() != spec.pattern_count() {
        return Err(Error::argument(format!(
            "stack has {} frames, spec expects {}",
            stack.len(),
            spec.pattern_count()
        )));
    }
    let (width, height) = (stack[0].width, stack[0].height);
    if stack.iter().any(|f| f.width != width || f.height != height) {
        return Err(Error::argument("stack frames have inconsistent dimensions".to_string()));
    }

    let white = &stack[0];
    let black = &stack[1];
    let bx = spec.bits_x() as usize;
    let by = spec.bits_y() as usize;
    let per_bit = if spec.use_inverse_patterns { 2 } else { 1 };

    let mut codes = vec![None; width * height];
    let mut confidence = vec![0.0f32; width * height];

    codes
        .par_chunks_mut(width)
        .zip(confidence.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, (code_row, conf_row))| {
            for x in 0..width {
                let w = white.get(x, y);
                let b = black.get(x, y);
                let contrast = w - b;
                conf_row[x] = contrast;
                if contrast < opts.contrast_floor {
                    continue;
                }
                let mid = 0.5 * (w + b);
                let mut gray_x = 0u32;
                let mut gray_y = 0u32;
                for idx in 0..bx + by {
                    let frame = 2 + idx * per_bit;
                    let on = if spec.use_inverse_patterns {
                        stack[frame].get(x, y) > stack[frame + 1].get(x, y)
                    } else {
                        stack[frame].get(x, y) > mid
                    };
                    if on {
                        if idx < bx {
                            gray_x |= 1 << (bx - 1 - idx);
                        } else {
                            gray_y |= 1 << (by - 1 - (idx - bx));
                        }
                    }
                }
                let col = gray_decode(gray_x);
                let row = gray_decode(gray_y);
                if (col as usize) < spec.proj_width && (row as usize) < spec.proj_height {
                    code_row[x] = Some((col, row));
                }
            }
        });

    Ok(CodeMap { width, height, codes, confidence })
}

/// A sub-pixel feature: the centroid of the camera pixels sharing one code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    /// Image coordinates (pixel centers at half-integers).
    pub position: (f64, f64),
    pub support: usize,
}

/// Features of one decoded image, keyed by projector code `(column, row)`.
/// Ordered map so downstream passes iterate deterministically.
pub type FeatureSet = BTreeMap<(u32, u32), Feature>;

#[derive(Debug, Clone, Copy)]
pub struct FeatureOptions {
    /// Codes supported by more pixels than this are decode artifacts
    /// (smears across depth discontinuities) and are dropped.
    pub support_cap: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { support_cap: 64 }
    }
}

pub fn extract_features(codes: &CodeMap, opts: &FeatureOptions) -> FeatureSet {
    let mut acc: BTreeMap<(u32, u32), (f64, f64, usize)> = BTreeMap::new();
    for y in 0..codes.height {
        for x in 0..codes.width {
            if let Some(code) = codes.code_at(x, y) {
                let e = acc.entry(code).or_insert((0.0, 0.0, 0));
                e.0 += x as f64 + 0.5;
                e.1 += y as f64 + 0.5;
                e.2 += 1;
            }
        }
    }
    acc.into_iter()
        .filter(|(_, (_, _, n))| *n <= opts.support_cap)
        .map(|(code, (sx, sy, n))| {
            (code, Feature { position: (sx / n as f64, sy / n as f64), support: n })
        })
        .collect()
}

#[cfg(test)]
mod tests;
