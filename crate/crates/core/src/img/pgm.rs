//! Binary PGM (P5) read/write. 16-bit samples are big-endian per the format.
//! Loading maps to linear floats in `[0, 1]`.

use super::GrayImage;
use crate::error::{Error, Result};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub fn write_pgm8(path: &Path, img: &GrayImage) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> =
        img.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    f.write_all(&bytes)?;
    Ok(())
}

pub fn write_pgm16(path: &Path, img: &GrayImage) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{} {}\n65535\n", img.width, img.height)?;
    let mut bytes = Vec::with_capacity(img.data.len() * 2);
    for &v in &img.data {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    f.write_all(&bytes)?;
    Ok(())
}

/// Binary PPM (P6) companion writer for 8-bit color previews.
pub fn write_ppm8(path: &Path, img: &super::RgbImage) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P6\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> =
        img.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let err = |msg: &str| Error::Parse { path: path.display().to_string(), msg: msg.to_string() };

    let mut pos = 0;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        // skip whitespace and `#` comment lines
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err("unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if next_token(&bytes)? != "P5" {
        return Err(err("not a binary PGM (P5)"));
    }
    let width: usize = next_token(&bytes)?.parse().map_err(|_| err("bad width"))?;
    let height: usize = next_token(&bytes)?.parse().map_err(|_| err("bad height"))?;
    let maxval: u32 = next_token(&bytes)?.parse().map_err(|_| err("bad maxval"))?;
    pos += 1; // single whitespace byte after maxval

    let n = width * height;
    let data = if maxval < 256 {
        if bytes.len() < pos + n {
            return Err(err("truncated pixel data"));
        }
        bytes[pos..pos + n].iter().map(|&b| b as f32 / maxval as f32).collect()
    } else {
        if bytes.len() < pos + 2 * n {
            return Err(err("truncated pixel data"));
        }
        bytes[pos..pos + 2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / maxval as f32)
            .collect()
    };
    GrayImage::from_data(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        let data = (0..w * h).map(|i| i as f32 / (w * h - 1) as f32).collect();
        GrayImage::from_data(w, h, data).unwrap()
    }

    #[test]
    fn pgm8_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = ramp(7, 5);
        write_pgm8(&p, &img).unwrap();
        let back = read_pgm(&p).unwrap();
        assert_eq!((back.width, back.height), (7, 5));
        for (a, b) in img.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn pgm16_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = ramp(5, 9);
        write_pgm16(&p, &img).unwrap();
        let back = read_pgm(&p).unwrap();
        for (a, b) in img.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
    }

    #[test]
    fn pgm16_is_big_endian() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let mut img = GrayImage::new(1, 1);
        img.set(0, 0, 1.0 / 65535.0); // sample value 1
        write_pgm16(&p, &img).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let px = &bytes[bytes.len() - 2..];
        assert_eq!(px, &[0x00, 0x01]);
    }
}
