//! PFM float images: `Pf` grayscale, `PF` color. The sign of the scale line
//! selects byte order (negative = little-endian); rows are stored bottom-up
//! per the format. We write little-endian with scale -1.0.

use super::{GrayImage, RgbImage};
use crate::error::{Error, Result};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub fn write_pfm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    write!(f, "Pf\n{} {}\n-1.0\n", img.width, img.height)?;
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            f.write_all(&img.get(x, y).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_pfm_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    write!(f, "PF\n{} {}\n-1.0\n", img.width, img.height)?;
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            for v in img.get(x, y) {
                f.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_header(path: &Path, bytes: &[u8]) -> Result<(bool, usize, usize, bool, usize)> {
    let err = |msg: &str| Error::Parse { path: path.display().to_string(), msg: msg.to_string() };
    let mut pos = 0;
    let mut token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
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
    let magic = token(bytes)?;
    let color = match magic.as_str() {
        "PF" => true,
        "Pf" => false,
        _ => return Err(err("not a PFM file")),
    };
    let width: usize = token(bytes)?.parse().map_err(|_| err("bad width"))?;
    let height: usize = token(bytes)?.parse().map_err(|_| err("bad height"))?;
    let scale: f32 = token(bytes)?.parse().map_err(|_| err("bad scale"))?;
    pos += 1; // single whitespace after scale
    Ok((color, width, height, scale < 0.0, pos))
}

fn read_f32(chunk: &[u8], little: bool) -> f32 {
    let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
    if little {
        f32::from_le_bytes(b)
    } else {
        f32::from_be_bytes(b)
    }
}

pub fn read_pfm(path: &Path) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (color, width, height, little, pos) = read_header(path, &bytes)?;
    if color {
        return Err(Error::Parse {
            path: path.display().to_string(),
            msg: "expected grayscale Pf, found color PF".to_string(),
        });
    }
    let n = width * height;
    if bytes.len() < pos + 4 * n {
        return Err(Error::Parse {
            path: path.display().to_string(),
            msg: "truncated pixel data".to_string(),
        });
    }
    let mut img = GrayImage::new(width, height);
    for (i, chunk) in bytes[pos..pos + 4 * n].chunks_exact(4).enumerate() {
        let x = i % width;
        let y = height - 1 - i / width;
        img.set(x, y, read_f32(chunk, little));
    }
    Ok(img)
}

pub fn read_pfm_rgb(path: &Path) -> Result<RgbImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (color, width, height, little, pos) = read_header(path, &bytes)?;
    if !color {
        return Err(Error::Parse {
            path: path.display().to_string(),
            msg: "expected color PF, found grayscale Pf".to_string(),
        });
    }
    let n = width * height * 3;
    if bytes.len() < pos + 4 * n {
        return Err(Error::Parse {
            path: path.display().to_string(),
            msg: "truncated pixel data".to_string(),
        });
    }
    let mut img = RgbImage::new(width, height);
    for (i, chunk) in bytes[pos..pos + 4 * n].chunks_exact(12).enumerate() {
        let x = i % width;
        let y = height - 1 - i / width;
        img.set(
            x,
            y,
            [
                read_f32(&chunk[0..4], little),
                read_f32(&chunk[4..8], little),
                read_f32(&chunk[8..12], little),
            ],
        );
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        let mut img = GrayImage::new(3, 2);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = i as f32 * 0.37 - 0.5;
        }
        write_pfm(&p, &img).unwrap();
        let back = read_pfm(&p).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn rgb_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        let mut img = RgbImage::new(2, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i as f32).sin();
        }
        write_pfm_rgb(&p, &img).unwrap();
        let back = read_pfm_rgb(&p).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn mismatched_channel_count_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        write_pfm(&p, &GrayImage::new(2, 2)).unwrap();
        assert!(read_pfm_rgb(&p).is_err());
    }
}
