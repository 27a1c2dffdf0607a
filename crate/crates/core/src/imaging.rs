//! Rasters and the low-level pixel operations every other module builds on.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// An 8-bit RGB raster stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// An image filled with a single colour.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<[u8; 3]> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

/// Single-channel intensities in `[0, 255]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gray image".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Horizontal and vertical derivatives with the dimensions of their source.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

/// Per-pixel binary labels, 1 = floodwater.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: labels.len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidParameter("mask labels must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Result<Self> {
        Self::new(width, height, vec![label; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn count_flood(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!(
            "{width}x{height} has a zero side"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_size((w0, h0): (usize, usize), (w1, h1): (usize, usize)) -> Result<()> {
    if w0 != w1 {
        return Err(Error::DimensionMismatch {
            expected: w0,
            actual: w1,
        });
    }
    if h0 != h1 {
        return Err(Error::DimensionMismatch {
            expected: h0,
            actual: h1,
        });
    }
    Ok(())
}

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

#[inline]
pub(crate) fn luma([r, g, b]: [u8; 3]) -> f64 {
    LUMA_R * r as f64 + LUMA_G * g as f64 + LUMA_B * b as f64
}

/// Rec. 601 luma.
pub fn to_grayscale(img: &Image) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        values: img.pixels.iter().map(|&p| luma(p)).collect(),
    }
}

/// Bilinear resampling with half-pixel-centre coordinate mapping.
///
/// Output pixel `x` samples the source at `(x + 0.5) * src_w / w - 0.5`,
/// clamped to the source extent, so resizing to the source dimensions is the
/// identity and corner pixels never drift.
pub fn resize_bilinear(img: &Image, width: usize, height: usize) -> Result<Image> {
    check_dims(width, height)?;
    let xs = sample_axis(img.width, width);
    let ys = sample_axis(img.height, height);
    let mut pixels = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = img.get(x0, y0);
            let p10 = img.get(x1, y0);
            let p01 = img.get(x0, y1);
            let p11 = img.get(x1, y1);
            let mut out = [0u8; 3];
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
                let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                out[c] = math::to_channel(top * (1.0 - fy) + bottom * fy);
            }
            pixels.push(out);
        }
    }
    Ok(Image {
        width,
        height,
        pixels,
    })
}

/// For each destination index: the two source taps and the weight of the second.
fn sample_axis(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = math::floor(s) as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Central differences with kernel `[-1, 0, 1]` on both axes.
///
/// Border pixels read replicated edge neighbours, so the field covers the
/// whole image.
pub fn gradients(g: &GrayImage) -> Result<GradientField> {
    let (w, h) = (g.width, g.height);
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall(format!(
            "gradients need at least 3x3, got {w}x{h}"
        )));
    }
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            gx.push(g.get(right, y) - g.get(left, y));
            gy.push(g.get(x, down) - g.get(x, up));
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grayscale_known_values() {
        let img = Image::new(3, 1, vec![[255, 255, 255], [0, 0, 0], [100, 50, 200]]).unwrap();
        let g = to_grayscale(&img);
        assert_eq!(g.values()[0], 255.0);
        assert_eq!(g.values()[1], 0.0);
        assert!((g.values()[2] - 82.05).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_dimensions() {
        assert!(Image::new(0, 3, vec![]).is_err());
        assert!(Image::new(2, 2, vec![[0; 3]; 3]).is_err());
        let img = Image::filled(2, 2, [1, 2, 3]).unwrap();
        assert!(resize_bilinear(&img, 0, 4).is_err());
    }

    #[test]
    fn resize_two_to_four() {
        // Sample positions -0.25 (clamped), 0.25, 0.75, 1.25 (clamped).
        let img = Image::new(2, 1, vec![[0; 3], [200; 3]]).unwrap();
        let out = resize_bilinear(&img, 4, 1).unwrap();
        let row: Vec<u8> = out.pixels().iter().map(|p| p[0]).collect();
        assert_eq!(row, vec![0, 50, 150, 200]);
    }

    #[test]
    fn resize_to_classification_size() {
        let img = Image::from_fn(512, 385, |x, y| [(x % 256) as u8, (y % 256) as u8, 7]).unwrap();
        let out = resize_bilinear(&img, 224, 224).unwrap();
        assert_eq!((out.width(), out.height()), (224, 224));
        assert!(out.pixels().iter().all(|p| p[2] == 7));
    }

    #[test]
    fn gradients_of_ramp_and_constant() {
        let ramp = GrayImage::from_fn(5, 4, |x, _| x as f64).unwrap();
        let f = gradients(&ramp).unwrap();
        for y in 0..4 {
            for x in 1..4 {
                assert_eq!(f.gx[y * 5 + x], 2.0);
            }
            // replicated edges halve the border difference
            assert_eq!(f.gx[y * 5], 1.0);
        }
        assert!(f.gy.iter().all(|&v| v == 0.0));

        let flat = GrayImage::from_fn(4, 4, |_, _| 9.0).unwrap();
        let f = gradients(&flat).unwrap();
        assert!(f.gx.iter().chain(&f.gy).all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_of_step_edge() {
        // Brute-force the kernel on a 6x6 step: columns 0..3 are 0, 3..6 are 255.
        let img = GrayImage::from_fn(6, 6, |x, _| if x < 3 { 0.0 } else { 255.0 }).unwrap();
        let f = gradients(&img).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                let expected = if x == 2 || x == 3 { 255.0 } else { 0.0 };
                assert_eq!(f.gx[y * 6 + x], expected, "({x},{y})");
                assert_eq!(f.gy[y * 6 + x], 0.0);
            }
        }
    }

    #[test]
    fn gradients_reject_small_images() {
        let g = GrayImage::from_fn(2, 5, |_, _| 0.0).unwrap();
        assert!(matches!(gradients(&g), Err(Error::ImageTooSmall(_))));
    }

    fn arb_image() -> impl Strategy<Value = Image> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<[u8; 3]>(), w * h)
                .prop_map(move |px| Image::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn luma_is_convex_combination(p in any::<[u8; 3]>()) {
            let l = luma(p);
            let lo = *p.iter().min().unwrap() as f64;
            let hi = *p.iter().max().unwrap() as f64;
            prop_assert!(l >= lo - 1e-9 && l <= hi + 1e-9);
        }

        #[test]
        fn resize_identity(img in arb_image()) {
            let out = resize_bilinear(&img, img.width(), img.height()).unwrap();
            prop_assert_eq!(out, img);
        }

        #[test]
        fn resize_output_dims(img in arb_image(), w in 1usize..20, h in 1usize..20) {
            let out = resize_bilinear(&img, w, h).unwrap();
            prop_assert_eq!((out.width(), out.height()), (w, h));
        }

        #[test]
        fn gradients_are_linear(
            vals in proptest::collection::vec(0u8..=255, 25),
            a in -4i32..5,
        ) {
            let g = GrayImage::new(5, 5, vals.iter().map(|&v| v as f64).collect()).unwrap();
            let scaled = GrayImage::new(5, 5, vals.iter().map(|&v| a as f64 * v as f64).collect()).unwrap();
            let f = gradients(&g).unwrap();
            let fs = gradients(&scaled).unwrap();
            for i in 0..25 {
                prop_assert_eq!(fs.gx[i], a as f64 * f.gx[i]);
                prop_assert_eq!(fs.gy[i], a as f64 * f.gy[i]);
            }
        }
    }
}
