//! Texture descriptors (LBP, HOG) and the container for externally computed
//! deep embeddings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::imaging::{gradients, GrayImage};
use crate::math;
use crate::{Error, Result};

/// Which extractor produced a [`FeatureVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExtractorId {
    Lbp,
    Hog,
    Embedding,
    Region,
}

/// A non-empty, finite feature vector tagged with its extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    extractor: ExtractorId,
}

impl FeatureVector {
    pub fn new(extractor: ExtractorId, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("feature vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{extractor:?} feature vector")));
        }
        Ok(Self { values, extractor })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn extractor(&self) -> ExtractorId {
        self.extractor
    }

    /// Errors unless `other` has the same extractor and length.
    pub fn ensure_compatible(&self, other: &FeatureVector) -> Result<()> {
        if self.extractor != other.extractor {
            return Err(Error::IncompatibleFeatures(format!(
                "{:?} vs {:?}",
                self.extractor, other.extractor
            )));
        }
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(())
    }
}

pub const LBP_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbpParams {
    /// Side of the square histogram cell, in pixels.
    pub cell_size: usize,
}

impl Default for LbpParams {
    fn default() -> Self {
        Self { cell_size: 16 }
    }
}

impl LbpParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "LBP cell size must be >= 2, got {}",
                self.cell_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HogParams {
    pub cell_size: usize,
    /// Cells per block side.
    pub block_size: usize,
    /// Block step, in cells.
    pub block_stride: usize,
    pub orientation_bins: usize,
    /// Orientations over 360 degrees instead of 180.
    pub signed: bool,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            cell_size: 8,
            block_size: 2,
            block_stride: 1,
            orientation_bins: 9,
            signed: false,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 {
            return Err(Error::InvalidParameter("HOG cell size must be >= 1".into()));
        }
        if self.orientation_bins < 2 {
            return Err(Error::InvalidParameter(
                "HOG needs at least 2 orientation bins".into(),
            ));
        }
        if self.block_size == 0 || self.block_stride == 0 {
            return Err(Error::InvalidParameter(
                "HOG block size and stride must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Blocks along each axis for a `width` x `height` image.
    pub fn block_grid(&self, width: usize, height: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let span = self.cell_size * self.block_size;
        if width < span || height < span {
            return Err(Error::ImageTooSmall(format!(
                "HOG block spans {span}x{span} pixels, image is {width}x{height}"
            )));
        }
        let cells_x = width / self.cell_size;
        let cells_y = height / self.cell_size;
        Ok((
            (cells_x - self.block_size) / self.block_stride + 1,
            (cells_y - self.block_size) / self.block_stride + 1,
        ))
    }

    /// Length of the descriptor produced for a `width` x `height` image.
    pub fn descriptor_len(&self, width: usize, height: usize) -> Result<usize> {
        let (bx, by) = self.block_grid(width, height)?;
        Ok(bx * by * self.block_size * self.block_size * self.orientation_bins)
    }
}

/// 8-neighbour LBP code of an interior pixel.
///
/// Bit 7 is the top-left neighbour, then clockwise (top, top-right, right,
/// bottom-right, bottom, bottom-left) down to bit 0 for the left neighbour.
/// A bit is set when the neighbour is at least as bright as the centre.
pub fn lbp_code(g: &GrayImage, x: usize, y: usize) -> Result<u8> {
    if x == 0 || y == 0 || x + 1 >= g.width() || y + 1 >= g.height() {
        return Err(Error::BorderPixel { x, y });
    }
    Ok(lbp_code_unchecked(g, x, y))
}

#[inline]
fn lbp_code_unchecked(g: &GrayImage, x: usize, y: usize) -> u8 {
    let c = g.get(x, y);
    let neighbors = [
        g.get(x - 1, y - 1),
        g.get(x, y - 1),
        g.get(x + 1, y - 1),
        g.get(x + 1, y),
        g.get(x + 1, y + 1),
        g.get(x, y + 1),
        g.get(x - 1, y + 1),
        g.get(x - 1, y),
    ];
    neighbors
        .iter()
        .fold(0u8, |code, &n| (code << 1) | u8::from(n >= c))
}

/// LBP code of every pixel; `None` on the one-pixel border.
pub fn lbp_code_map(g: &GrayImage) -> Vec<Option<u8>> {
    let (w, h) = (g.width(), g.height());
    let mut codes = vec![None; w * h];
    if w < 3 || h < 3 {
        return codes;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            codes[y * w + x] = Some(lbp_code_unchecked(g, x, y));
        }
    }
    codes
}

/// Concatenated per-cell 256-bin LBP histograms.
///
/// Cells tile the coded interior (the image minus its one-pixel border)
/// starting at pixel (1, 1); trailing partial cells are kept. Histograms are
/// raw counts, concatenated in row-major cell order.
pub fn lbp_feature(g: &GrayImage, p: &LbpParams) -> Result<FeatureVector> {
    p.validate()?;
    let (w, h) = (g.width(), g.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall(format!(
            "LBP needs at least 3x3, got {w}x{h}"
        )));
    }
    let (cells_x, cells_y) = lbp_cell_grid(w, h, p.cell_size);
    let mut hist = vec![0.0; cells_x * cells_y * LBP_BINS];
    for y in 1..h - 1 {
        let row = (y - 1) / p.cell_size;
        for x in 1..w - 1 {
            let cell = row * cells_x + (x - 1) / p.cell_size;
            hist[cell * LBP_BINS + lbp_code_unchecked(g, x, y) as usize] += 1.0;
        }
    }
    FeatureVector::new(ExtractorId::Lbp, hist)
}

/// Cells along each axis of the LBP grid for a `width` x `height` image.
pub fn lbp_cell_grid(width: usize, height: usize, cell_size: usize) -> (usize, usize) {
    (
        width.saturating_sub(2).div_ceil(cell_size),
        height.saturating_sub(2).div_ceil(cell_size),
    )
}

/// Histogram-of-oriented-gradients descriptor.
///
/// Gradient magnitude is voted into orientation bins whose centres sit at
/// `i * 180 / bins` degrees (360 when signed), split linearly between the
/// two nearest centres with wrap-around. Cells cover `floor(w / cell)` by
/// `floor(h / cell)`; each block of cells is divided by its L2 norm plus
/// 1e-6.
pub fn hog_feature(g: &GrayImage, p: &HogParams) -> Result<FeatureVector> {
    const EPS: f64 = 1e-6;
    let (blocks_x, blocks_y) = p.block_grid(g.width(), g.height())?;
    let field = gradients(g)?;
    let bins = p.orientation_bins;
    let cells_x = g.width() / p.cell_size;
    let cells_y = g.height() / p.cell_size;
    let range = if p.signed { 360.0 } else { 180.0 };
    let bin_width = range / bins as f64;

    let mut cells = vec![0.0; cells_x * cells_y * bins];
    for y in 0..cells_y * p.cell_size {
        let cy = y / p.cell_size;
        for x in 0..cells_x * p.cell_size {
            let i = y * g.width() + x;
            let (dx, dy) = (field.gx[i], field.gy[i]);
            let mag = math::sqrt(dx * dx + dy * dy);
            if mag == 0.0 {
                continue;
            }
            let mut angle = math::atan2(dy, dx).to_degrees();
            if angle < 0.0 {
                angle += 360.0;
            }
            if !p.signed && angle >= 180.0 {
                angle -= 180.0;
            }
            if angle >= range {
                angle -= range;
            }
            let pos = angle / bin_width;
            let lower = math::floor(pos);
            let frac = pos - lower;
            let b0 = lower as usize % bins;
            let b1 = (b0 + 1) % bins;
            let base = (cy * cells_x + x / p.cell_size) * bins;
            cells[base + b0] += mag * (1.0 - frac);
            cells[base + b1] += mag * frac;
        }
    }

    let block_len = p.block_size * p.block_size * bins;
    let mut out = Vec::with_capacity(blocks_x * blocks_y * block_len);
    let mut block = Vec::with_capacity(block_len);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            block.clear();
            for cy in by * p.block_stride..by * p.block_stride + p.block_size {
                for cx in bx * p.block_stride..bx * p.block_stride + p.block_size {
                    let base = (cy * cells_x + cx) * bins;
                    block.extend_from_slice(&cells[base..base + bins]);
                }
            }
            let norm = math::sqrt(block.iter().map(|v| v * v).sum::<f64>()) + EPS;
            out.extend(block.iter().map(|v| v / norm));
        }
    }
    FeatureVector::new(ExtractorId::Hog, out)
}

/// Deep-feature vectors keyed by dataset-relative image path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, FeatureVector>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("embedding dimension".into()));
        }
        Ok(Self {
            dim,
            entries: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, id: String, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: values.len(),
            });
        }
        if self.entries.contains_key(&id) {
            return Err(Error::InvalidParameter(format!(
                "duplicate embedding identifier {id:?}"
            )));
        }
        let v = FeatureVector::new(ExtractorId::Embedding, values)?;
        self.entries.insert(id, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Case-sensitive lookup.
    pub fn get(&self, id: &str) -> Option<&FeatureVector> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeatureVector)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}
