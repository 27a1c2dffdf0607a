//! Pixel-grid CRF smoothing of flood probabilities.
//!
//! The energy of a labelling is the sum of per-pixel unaries
//! `-ln(clamp(p_label))` plus, for every 4-connected pair with different
//! labels, a contrast-sensitive Potts penalty
//! `w * exp(-|c_i - c_j|^2 / (2 sigma^2))` on RGB colours. Labellings are
//! refined with iterated conditional modes (ICM) in raster order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::imaging::{ensure_same_size, Image, LabelMask};
use crate::math;
use crate::{Error, Result};

/// Per-pixel probability of floodwater.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    p_flood: Vec<f64>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, p_flood: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!("{width}x{height}")));
        }
        if p_flood.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: p_flood.len(),
            });
        }
        if p_flood.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(
                "flood probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            p_flood,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn p_flood(&self) -> &[f64] {
        &self.p_flood
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrfParams {
    pub pairwise_weight: f64,
    pub color_sigma: f64,
    /// Probabilities are clamped to `[floor, 1 - floor]` before `-ln`.
    pub prob_floor: f64,
    pub max_sweeps: usize,
}

impl Default for CrfParams {
    fn default() -> Self {
        Self {
            pairwise_weight: 1.0,
            color_sigma: 13.0,
            prob_floor: 1e-6,
            max_sweeps: 10,
        }
    }
}

impl CrfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pairwise_weight >= 0.0 && self.pairwise_weight.is_finite()) {
            return Err(Error::InvalidParameter(
                "pairwise weight must be >= 0".into(),
            ));
        }
        if !(self.color_sigma > 0.0 && self.color_sigma.is_finite()) {
            return Err(Error::InvalidParameter("colour sigma must be > 0".into()));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 0.5) {
            return Err(Error::InvalidParameter(
                "probability floor must be in (0, 0.5)".into(),
            ));
        }
        Ok(())
    }
}

/// Precomputed unaries and edge weights for one image.
struct Grid {
    width: usize,
    height: usize,
    /// `[cost of label 0, cost of label 1]` per pixel.
    unary: Vec<[f64; 2]>,
    /// Weight of the edge to the right neighbour.
    right: Vec<f64>,
    /// Weight of the edge to the neighbour below.
    down: Vec<f64>,
}

impl Grid {
    fn new(pm: &ProbMap, img: &Image, p: &CrfParams) -> Result<Self> {
        p.validate()?;
        ensure_same_size((pm.width, pm.height), (img.width(), img.height()))?;
        let (w, h) = (pm.width, pm.height);
        let eps = p.prob_floor;
        let unary = pm
            .p_flood
            .iter()
            .map(|&q| {
                let q = q.clamp(eps, 1.0 - eps);
                [-math::ln(1.0 - q), -math::ln(q)]
            })
            .collect();
        let px = img.pixels();
        let denom = 2.0 * p.color_sigma * p.color_sigma;
        let weight = |a: [u8; 3], b: [u8; 3]| {
            let d2: f64 = (0..3)
                .map(|c| {
                    let d = a[c] as f64 - b[c] as f64;
                    d * d
                })
                .sum();
            p.pairwise_weight * math::exp(-d2 / denom)
        };
        let mut right = vec![0.0; w * h];
        let mut down = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    right[i] = weight(px[i], px[i + 1]);
                }
                if y + 1 < h {
                    down[i] = weight(px[i], px[i + w]);
                }
            }
        }
        Ok(Self {
            width: w,
            height: h,
            unary,
            right,
            down,
        })
    }

    fn energy(&self, labels: &[u8]) -> f64 {
        let w = self.width;
        let mut e = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            e += self.unary[i][l as usize];
            let (x, y) = (i % w, i / w);
            if x + 1 < w && labels[i + 1] != l {
                e += self.right[i];
            }
            if y + 1 < self.height && labels[i + w] != l {
                e += self.down[i];
            }
        }
        e
    }

    /// Unary plus incident pairwise cost of giving pixel `i` label `l`.
    fn local(&self, labels: &[u8], i: usize, l: u8) -> f64 {
        let w = self.width;
        let (x, y) = (i % w, i / w);
        let mut e = self.unary[i][l as usize];
        if x > 0 && labels[i - 1] != l {
            e += self.right[i - 1];
        }
        if x + 1 < w && labels[i + 1] != l {
            e += self.right[i];
        }
        if y > 0 && labels[i - w] != l {
            e += self.down[i - w];
        }
        if y + 1 < self.height && labels[i + w] != l {
            e += self.down[i];
        }
        e
    }
}

pub fn crf_energy(pm: &ProbMap, img: &Image, mask: &LabelMask, p: &CrfParams) -> Result<f64> {
    ensure_same_size((pm.width, pm.height), (mask.width(), mask.height()))?;
    Ok(Grid::new(pm, img, p)?.energy(mask.labels()))
}

/// Label 1 wherever `p_flood > 0.5`; ties go to 0.
pub fn unary_argmax(pm: &ProbMap) -> LabelMask {
    let labels = pm.p_flood.iter().map(|&q| u8::from(q > 1.0 - q)).collect();
    LabelMask::new(pm.width, pm.height, labels).expect("dimensions come from a valid map")
}

#[derive(Debug, Clone)]
pub struct IcmOutput {
    pub mask: LabelMask,
    /// Energy of the initial argmax labelling followed by the energy after
    /// each sweep.
    pub energies: Vec<f64>,
    pub sweeps: usize,
}

pub fn icm_refine(pm: &ProbMap, img: &Image, p: &CrfParams) -> Result<LabelMask> {
    icm_refine_traced(pm, img, p).map(|o| o.mask)
}

/// Raster-order ICM from the unary argmax. A pixel switches only when the
/// other label strictly lowers its local energy.
pub fn icm_refine_traced(pm: &ProbMap, img: &Image, p: &CrfParams) -> Result<IcmOutput> {
    let grid = Grid::new(pm, img, p)?;
    let mut labels = unary_argmax(pm).into_labels();
    let mut energies = vec![grid.energy(&labels)];
    let mut sweeps = 0;
    while sweeps < p.max_sweeps {
        sweeps += 1;
        let mut changed = false;
        for i in 0..labels.len() {
            let current = labels[i];
            let other = 1 - current;
            if grid.local(&labels, i, other) < grid.local(&labels, i, current) {
                labels[i] = other;
                changed = true;
            }
        }
        energies.push(grid.energy(&labels));
        if !changed {
            break;
        }
    }
    Ok(IcmOutput {
        mask: LabelMask::new(grid.width, grid.height, labels)?,
        energies,
        sweeps,
    })
}
