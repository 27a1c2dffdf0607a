//! Raster and mask files.

use std::path::Path;

use floodseg_core::imaging::{Image, LabelMask};
use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use log::warn;

use crate::{Error, Result};

fn decode(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Decode {
            path: path.to_owned(),
            source,
        })?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Validation(format!(
            "{}: image has a zero dimension",
            path.display()
        )));
    }
    Ok(img)
}

fn is_wide(img: &DynamicImage) -> bool {
    img.color().bytes_per_pixel() / img.color().channel_count().max(1) > 1
}

/// Loads a PNG or JPEG as 8-bit RGB. Deeper sources keep their high byte.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = if is_wide(&img) {
        warn!("{}: truncating to 8 bits per channel", path.display());
        img.to_rgb16()
            .pixels()
            .map(|p| [(p[0] >> 8) as u8, (p[1] >> 8) as u8, (p[2] >> 8) as u8])
            .collect()
    } else {
        img.to_rgb8().pixels().map(|p| p.0).collect()
    };
    Image::new(w, h, pixels).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Loads a ground-truth mask: 0 is background and any nonzero value is
/// flood. Values other than 0, 1 and 255 are accepted with a warning; colour
/// masks whose channels disagree are rejected.
pub fn load_mask(path: &Path) -> Result<LabelMask> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<u16> = if img.color().has_color() {
        let rgb = img.to_rgb16();
        let mut out = Vec::with_capacity(w * h);
        for p in rgb.pixels() {
            if p[0] != p[1] || p[1] != p[2] {
                return Err(Error::Validation(format!(
                    "{}: mask is not binary (coloured pixels)",
                    path.display()
                )));
            }
            out.push(p[0]);
        }
        out
    } else if is_wide(&img) {
        img.to_luma16().pixels().map(|p| p[0]).collect()
    } else {
        img.to_luma8().pixels().map(|p| p[0] as u16).collect()
    };
    let full = if is_wide(&img) { u16::MAX } else { 255 };
    let odd = values
        .iter()
        .filter(|&&v| v != 0 && v != 1 && v != full)
        .count();
    if odd > 0 {
        warn!(
            "{}: {odd} mask pixels are neither 0 nor {full}; reading them as flood",
            path.display()
        );
    }
    let labels = values.into_iter().map(|v| u8::from(v != 0)).collect();
    LabelMask::new(w, h, labels).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    ensure_parent(path)?;
    let raw: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    let buf: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw)
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Decode {
            path: path.to_owned(),
            source,
        })
}

/// Writes an 8-bit grayscale PNG with 0 for background and 255 for flood.
pub fn save_mask(path: &Path, mask: &LabelMask) -> Result<()> {
    ensure_parent(path)?;
    let raw: Vec<u8> = mask.labels().iter().map(|&l| l * 255).collect();
    let buf: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw)
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Decode {
            path: path.to_owned(),
            source,
        })
}
