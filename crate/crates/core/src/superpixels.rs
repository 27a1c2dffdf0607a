//! SLIC superpixels and the per-region features used for segmentation.
//!
//! Clustering runs in CIELAB + image-plane coordinates. Every pixel is
//! compared against the centres whose `2S x 2S` search window covers it and
//! also against the centre it is currently assigned to; with that extra
//! candidate neither the assignment nor the centre update can raise the
//! k-means objective, so the recorded objective trace is non-increasing.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::{lbp_code_map, ExtractorId, FeatureVector, LBP_BINS};
use crate::imaging::{ensure_same_size, to_grayscale, Image, LabelMask};
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicParams {
    pub n_segments: usize,
    /// Weight of spatial distance against colour distance (`m`).
    pub compactness: f64,
    pub max_iter: usize,
    pub enforce_connectivity: bool,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            n_segments: 250,
            compactness: 10.0,
            max_iter: 10,
            enforce_connectivity: true,
        }
    }
}

impl SlicParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::InvalidParameter("n_segments must be >= 1".into()));
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::InvalidParameter("compactness must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Region id per pixel; ids are contiguous from 0 and every id is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    n_regions: usize,
}

impl SuperpixelMap {
    /// Wraps an arbitrary labelling, renumbering ids in raster order of first
    /// appearance.
    pub fn from_labels(width: usize, height: usize, labels: &[u32]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!("{width}x{height}")));
        }
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: labels.len(),
            });
        }
        let (labels, n_regions) = relabel_first_seen(labels.iter().map(|&l| l as usize));
        Ok(Self {
            width,
            height,
            labels,
            n_regions,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_regions];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Spreads one value per region onto every pixel of that region.
    pub fn paint<T: Copy>(&self, values: &[T]) -> Result<Vec<T>> {
        if values.len() != self.n_regions {
            return Err(Error::DimensionMismatch {
                expected: self.n_regions,
                actual: values.len(),
            });
        }
        Ok(self.labels.iter().map(|&l| values[l as usize]).collect())
    }
}

fn relabel_first_seen(labels: impl Iterator<Item = usize>) -> (Vec<u32>, usize) {
    let mut mapping: alloc::collections::BTreeMap<usize, u32> = Default::default();
    let out = labels
        .map(|l| {
            let next = mapping.len() as u32;
            *mapping.entry(l).or_insert(next)
        })
        .collect();
    (out, mapping.len())
}

/// sRGB (D65) to CIELAB.
pub fn srgb_to_lab([r, g, b]: [u8; 3]) -> [f64; 3] {
    fn linear(c: u8) -> f64 {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            math::powf((c + 0.055) / 1.055, 2.4)
        }
    }
    fn f(t: f64) -> f64 {
        const DELTA: f64 = 6.0 / 29.0;
        if t > DELTA * DELTA * DELTA {
            math::cbrt(t)
        } else {
            t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
        }
    }
    const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];
    let (r, g, b) = (linear(r), linear(g), linear(b));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (f(x / WHITE[0]), f(y / WHITE[1]), f(z / WHITE[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Superpixels plus diagnostics from the clustering loop.
#[derive(Debug, Clone)]
pub struct SlicOutput {
    pub map: SuperpixelMap,
    /// k-means objective (sum of squared SLIC distances) after each
    /// assignment + update iteration, before connectivity enforcement.
    pub objective: Vec<f64>,
    /// Number of clusters seeded on the grid.
    pub n_seeds: usize,
}

/// SLIC superpixels.
pub fn slic(img: &Image, p: &SlicParams) -> Result<SuperpixelMap> {
    slic_traced(img, p).map(|o| o.map)
}

pub fn slic_traced(img: &Image, p: &SlicParams) -> Result<SlicOutput> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    if p.n_segments > n {
        return Err(Error::InvalidParameter(format!(
            "{} segments requested for {n} pixels",
            p.n_segments
        )));
    }
    let lab: Vec<[f64; 3]> = img.pixels().iter().map(|&px| srgb_to_lab(px)).collect();
    let step = math::sqrt(n as f64 / p.n_segments as f64);
    let spatial_weight = (p.compactness / step) * (p.compactness / step);

    let mut centers = seed_centers(&lab, w, h, step);
    let distance = |i: usize, c: &[f64; 5]| -> f64 {
        let [l, a, b] = lab[i];
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let dc = (l - c[0]) * (l - c[0]) + (a - c[1]) * (a - c[1]) + (b - c[2]) * (b - c[2]);
        let ds = (x - c[3]) * (x - c[3]) + (y - c[4]) * (y - c[4]);
        dc + spatial_weight * ds
    };

    let mut assigned: Vec<Option<u32>> = vec![None; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut objective = Vec::with_capacity(p.max_iter);
    let radius = step;
    for _ in 0..p.max_iter {
        for i in 0..n {
            dist[i] = match assigned[i] {
                Some(c) => distance(i, &centers[c as usize]),
                None => f64::INFINITY,
            };
        }
        let previous = assigned.clone();
        for (ci, c) in centers.iter().enumerate() {
            let x0 = clamp_index(c[3] - radius, w);
            let x1 = clamp_index(c[3] + radius, w);
            let y0 = clamp_index(c[4] - radius, h);
            let y1 = clamp_index(c[4] + radius, h);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * w + x;
                    let d = distance(i, c);
                    if d < dist[i] {
                        dist[i] = d;
                        assigned[i] = Some(ci as u32);
                    }
                }
            }
        }
        for i in 0..n {
            if assigned[i].is_none() {
                let (ci, d) = centers
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| (ci, distance(i, c)))
                    .fold(
                        (0, f64::INFINITY),
                        |best, cur| if cur.1 < best.1 { cur } else { best },
                    );
                assigned[i] = Some(ci as u32);
                dist[i] = d;
            }
        }
        let changed = assigned != previous;

        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (i, a) in assigned.iter().enumerate() {
            let s = &mut sums[a.unwrap_or(0) as usize];
            s[0] += lab[i][0];
            s[1] += lab[i][1];
            s[2] += lab[i][2];
            s[3] += (i % w) as f64;
            s[4] += (i / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                for k in 0..5 {
                    c[k] = s[k] / s[5];
                }
            }
        }
        objective.push(
            assigned
                .iter()
                .enumerate()
                .map(|(i, a)| distance(i, &centers[a.unwrap_or(0) as usize]))
                .sum(),
        );
        if !changed {
            break;
        }
    }

    let raw: Vec<usize> = assigned.iter().map(|a| a.unwrap_or(0) as usize).collect();
    let min_size = step * step / 4.0;
    let (labels, n_regions) = if p.enforce_connectivity {
        enforce_connectivity(&raw, w, h, min_size)
    } else {
        relabel_first_seen(raw.into_iter())
    };
    Ok(SlicOutput {
        map: SuperpixelMap {
            width: w,
            height: h,
            labels,
            n_regions,
        },
        objective,
        n_seeds: centers.len(),
    })
}

fn clamp_index(v: f64, len: usize) -> usize {
    let r = math::round(v);
    if r <= 0.0 {
        0
    } else if r >= (len - 1) as f64 {
        len - 1
    } else {
        r as usize
    }
}

/// Regular grid of seeds, each nudged to the lowest-gradient pixel of its
/// 3x3 neighbourhood.
fn seed_centers(lab: &[[f64; 3]], w: usize, h: usize, step: f64) -> Vec<[f64; 5]> {
    let nx = (math::round(w as f64 / step) as usize).clamp(1, w);
    let ny = (math::round(h as f64 / step) as usize).clamp(1, h);
    let grad = |x: usize, y: usize| -> f64 {
        let at = |x: usize, y: usize| lab[y * w + x];
        let (l, r) = (at(x.saturating_sub(1), y), at((x + 1).min(w - 1), y));
        let (u, d) = (at(x, y.saturating_sub(1)), at(x, (y + 1).min(h - 1)));
        (0..3)
            .map(|k| (r[k] - l[k]) * (r[k] - l[k]) + (d[k] - u[k]) * (d[k] - u[k]))
            .sum()
    };
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let sy = ((j as f64 + 0.5) * h as f64 / ny as f64) as usize;
        for i in 0..nx {
            let sx = ((i as f64 + 0.5) * w as f64 / nx as f64) as usize;
            let (mut bx, mut by) = (sx, sy);
            let mut best = grad(sx, sy);
            for y in sy.saturating_sub(1)..=(sy + 1).min(h - 1) {
                for x in sx.saturating_sub(1)..=(sx + 1).min(w - 1) {
                    let g = grad(x, y);
                    if g < best {
                        best = g;
                        (bx, by) = (x, y);
                    }
                }
            }
            let [l, a, b] = lab[by * w + bx];
            centers.push([l, a, b, bx as f64, by as f64]);
        }
    }
    centers
}

/// Splits clusters into 4-connected components, then folds every component
/// smaller than `min_size` into its largest neighbour (ties go to the lower
/// component id) until none is left. Returns contiguous labels in raster
/// order of first appearance.
fn enforce_connectivity(raw: &[usize], w: usize, h: usize, min_size: f64) -> (Vec<u32>, usize) {
    let n = w * h;
    const UNSET: usize = usize::MAX;
    let mut comp = vec![UNSET; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != UNSET {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        comp[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == UNSET && raw[j] == raw[start] {
                    comp[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
    }

    let n_comp = sizes.len();
    let mut adjacency = vec![BTreeSet::new(); n_comp];
    for y in 0..h {
        for x in 0..w {
            let a = comp[y * w + x];
            if x + 1 < w {
                let b = comp[y * w + x + 1];
                if a != b {
                    adjacency[a].insert(b);
                    adjacency[b].insert(a);
                }
            }
            if y + 1 < h {
                let b = comp[(y + 1) * w + x];
                if a != b {
                    adjacency[a].insert(b);
                    adjacency[b].insert(a);
                }
            }
        }
    }

    let mut parent: Vec<usize> = (0..n_comp).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut changed = true;
    while changed {
        changed = false;
        for c in 0..n_comp {
            if parent[c] != c || (sizes[c] as f64) >= min_size {
                continue;
            }
            let neighbors: BTreeSet<usize> = adjacency[c]
                .clone()
                .into_iter()
                .map(|j| find(&mut parent, j))
                .filter(|&r| r != c)
                .collect();
            // BTreeSet iterates ascending, so the first maximum is the lowest id.
            let Some(target) = neighbors
                .iter()
                .copied()
                .fold(None, |best: Option<usize>, r| match best {
                    Some(b) if sizes[b] >= sizes[r] => Some(b),
                    _ => Some(r),
                })
            else {
                continue;
            };
            parent[c] = target;
            sizes[target] += sizes[c];
            let moved = core::mem::take(&mut adjacency[c]);
            adjacency[target].extend(moved);
            changed = true;
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, comp[i])).collect();
    relabel_first_seen(roots.into_iter())
}

/// Features of one superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFeature {
    /// Centroid column divided by `width - 1` (0 for single-column images).
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_r: f64,
    pub mean_g: f64,
    pub mean_b: f64,
    /// L1-normalised LBP histogram over the region's interior pixels;
    /// all zeros when the region has none.
    pub lbp_hist: Vec<f64>,
}

impl RegionFeature {
    /// Length of [`RegionFeature::to_feature_vector`] output.
    pub const LEN: usize = 5 + LBP_BINS;

    pub fn to_feature_vector(&self) -> FeatureVector {
        let mut v = Vec::with_capacity(Self::LEN);
        v.extend_from_slice(&[
            self.mean_x,
            self.mean_y,
            self.mean_r,
            self.mean_g,
            self.mean_b,
        ]);
        v.extend_from_slice(&self.lbp_hist);
        FeatureVector::new(ExtractorId::Region, v).expect("region features are finite")
    }
}

pub fn region_features(img: &Image, sp: &SuperpixelMap) -> Result<Vec<RegionFeature>> {
    ensure_same_size((img.width(), img.height()), (sp.width, sp.height))?;
    let (w, h) = (sp.width, sp.height);
    let codes = lbp_code_map(&to_grayscale(img));
    let k = sp.n_regions;
    let mut sums = vec![[0.0f64; 6]; k];
    let mut hists = vec![vec![0.0f64; LBP_BINS]; k];
    let mut coded = vec![0usize; k];
    for (i, (&l, &px)) in sp.labels.iter().zip(img.pixels()).enumerate() {
        let r = l as usize;
        let s = &mut sums[r];
        s[0] += (i % w) as f64;
        s[1] += (i / w) as f64;
        s[2] += px[0] as f64;
        s[3] += px[1] as f64;
        s[4] += px[2] as f64;
        s[5] += 1.0;
        if let Some(code) = codes[i] {
            hists[r][code as usize] += 1.0;
            coded[r] += 1;
        }
    }
    let norm_x = if w > 1 { (w - 1) as f64 } else { 1.0 };
    let norm_y = if h > 1 { (h - 1) as f64 } else { 1.0 };
    Ok(sums
        .into_iter()
        .zip(hists)
        .zip(coded)
        .map(|((s, mut hist), c)| {
            if c > 0 {
                hist.iter_mut().for_each(|v| *v /= c as f64);
            }
            RegionFeature {
                mean_x: s[0] / s[5] / norm_x,
                mean_y: s[1] / s[5] / norm_y,
                mean_r: s[2] / s[5],
                mean_g: s[3] / s[5],
                mean_b: s[4] / s[5],
                lbp_hist: hist,
            }
        })
        .collect())
}

/// Labels a region 1 when its flood fraction reaches `threshold`.
pub fn region_labels(sp: &SuperpixelMap, truth: &LabelMask, threshold: f64) -> Result<Vec<u8>> {
    ensure_same_size((sp.width, sp.height), (truth.width(), truth.height()))?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "region label threshold must be in (0, 1], got {threshold}"
        )));
    }
    let mut flood = vec![0usize; sp.n_regions];
    let mut total = vec![0usize; sp.n_regions];
    for (&l, &t) in sp.labels.iter().zip(truth.labels()) {
        total[l as usize] += 1;
        flood[l as usize] += t as usize;
    }
    Ok(flood
        .iter()
        .zip(&total)
        .map(|(&f, &t)| u8::from(f as f64 / t as f64 >= threshold))
        .collect())
}

pub fn paint_regions(sp: &SuperpixelMap, labels: &[u8]) -> Result<LabelMask> {
    LabelMask::new(sp.width, sp.height, sp.paint(labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half_split(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, _| if x < w / 2 { [0; 3] } else { [255; 3] }).unwrap()
    }

    pub(crate) fn is_four_connected(sp: &SuperpixelMap) -> bool {
        let (w, h) = (sp.width(), sp.height());
        let labels = sp.labels();
        let mut seen = vec![false; w * h];
        let mut started = vec![false; sp.n_regions()];
        for start in 0..w * h {
            let r = labels[start] as usize;
            if seen[start] {
                continue;
            }
            if started[r] {
                return false;
            }
            started[r] = true;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                let mut nb = vec![];
                if x > 0 {
                    nb.push(i - 1)
                }
                if x + 1 < w {
                    nb.push(i + 1)
                }
                if y > 0 {
                    nb.push(i - w)
                }
                if y + 1 < h {
                    nb.push(i + w)
                }
                for j in nb {
                    if !seen[j] && labels[j] as usize == r {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        true
    }

    #[test]
    fn lab_reference_colours() {
        let white = srgb_to_lab([255; 3]);
        assert!((white[0] - 100.0).abs() < 1e-3 && white[1].abs() < 1e-2 && white[2].abs() < 1e-2);
        assert_eq!(srgb_to_lab([0; 3]), [0.0, 0.0, 0.0]);
        let red = srgb_to_lab([255, 0, 0]);
        assert!(
            (red[0] - 53.24).abs() < 0.01
                && (red[1] - 80.09).abs() < 0.01
                && (red[2] - 67.20).abs() < 0.01
        );
    }

    #[test]
    fn single_segment_labels_everything_zero() {
        let img = Image::from_fn(13, 7, |x, y| [(x * 19) as u8, (y * 31) as u8, 5]).unwrap();
        let sp = slic(
            &img,
            &SlicParams {
                n_segments: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sp.n_regions(), 1);
        assert!(sp.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn uniform_image_splits_into_quadrants() {
        let img = Image::filled(20, 20, [90, 120, 60]).unwrap();
        let sp = slic(
            &img,
            &SlicParams {
                n_segments: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sp.n_regions(), 4);
        for size in sp.region_sizes() {
            assert!((81..=121).contains(&size), "{size}");
        }
        // each quadrant corner belongs to a different region
        let corners = [
            sp.labels()[0],
            sp.labels()[19],
            sp.labels()[380],
            sp.labels()[399],
        ];
        let distinct: BTreeSet<u32> = corners.into_iter().collect();
        assert_eq!(distinct.len(), 4);
    }

    /// Unwindowed k-means on the same 5-D points from the same seeds.
    fn plain_kmeans(img: &Image, k: usize, m: f64, iters: usize) -> Vec<usize> {
        let (w, h) = (img.width(), img.height());
        let lab: Vec<[f64; 3]> = img.pixels().iter().map(|&p| srgb_to_lab(p)).collect();
        let s = ((w * h) as f64 / k as f64).sqrt();
        let mut centers = seed_centers(&lab, w, h, s);
        let mut labels = vec![0; w * h];
        for _ in 0..iters {
            for i in 0..w * h {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let d = |c: &[f64; 5]| {
                    (0..3).map(|j| (lab[i][j] - c[j]).powi(2)).sum::<f64>()
                        + (m / s).powi(2) * ((x - c[3]).powi(2) + (y - c[4]).powi(2))
                };
                labels[i] = (0..centers.len())
                    .min_by(|&a, &b| d(&centers[a]).partial_cmp(&d(&centers[b])).unwrap())
                    .unwrap();
            }
            for (ci, c) in centers.iter_mut().enumerate() {
                let members: Vec<usize> = (0..w * h).filter(|&i| labels[i] == ci).collect();
                if members.is_empty() {
                    continue;
                }
                let n = members.len() as f64;
                for j in 0..3 {
                    c[j] = members.iter().map(|&i| lab[i][j]).sum::<f64>() / n;
                }
                c[3] = members.iter().map(|&i| (i % w) as f64).sum::<f64>() / n;
                c[4] = members.iter().map(|&i| (i / w) as f64).sum::<f64>() / n;
            }
        }
        labels
    }

    #[test]
    fn half_black_half_white_splits_on_colour_boundary() {
        let img = half_split(20, 10);
        let sp = slic(
            &img,
            &SlicParams {
                n_segments: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let oracle = plain_kmeans(&img, 2, 10.0, 20);
        assert_eq!(sp.n_regions(), 2);
        for y in 0..10 {
            for x in 0..20 {
                let i = y * 20 + x;
                assert_eq!(sp.labels()[i] as usize, oracle[i]);
                assert_eq!(sp.labels()[i], u32::from(x >= 10));
            }
        }
    }

    #[test]
    fn rejects_too_many_segments() {
        let img = Image::filled(3, 3, [0; 3]).unwrap();
        assert!(slic(
            &img,
            &SlicParams {
                n_segments: 10,
                ..Default::default()
            }
        )
        .is_err());
        assert!(slic(
            &img,
            &SlicParams {
                n_segments: 0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn objective_never_increases_on_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Image::from_fn(60, 45, |_, _| rng.gen()).unwrap();
        let out = slic_traced(
            &img,
            &SlicParams {
                n_segments: 30,
                ..Default::default()
            },
        )
        .unwrap();
        for pair in out.objective.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{pair:?}");
        }
        assert!(is_four_connected(&out.map));
    }

    #[test]
    fn region_features_uniform_and_degenerate() {
        let img = Image::filled(5, 3, [10, 20, 30]).unwrap();
        let sp = SuperpixelMap::from_labels(5, 3, &[0; 15]).unwrap();
        let f = &region_features(&img, &sp).unwrap()[0];
        assert_eq!((f.mean_x, f.mean_y), (0.5, 0.5));
        assert_eq!((f.mean_r, f.mean_g, f.mean_b), (10.0, 20.0, 30.0));
        assert_eq!(f.lbp_hist[255], 1.0);

        let mut labels = [1u32; 15];
        labels[0] = 0;
        let sp = SuperpixelMap::from_labels(5, 3, &labels).unwrap();
        let f = &region_features(&img, &sp).unwrap()[0];
        assert_eq!((f.mean_x, f.mean_y), (0.0, 0.0));
        assert!(f.lbp_hist.iter().all(|&v| v == 0.0));
        assert_eq!(f.to_feature_vector().len(), RegionFeature::LEN);
    }

    #[test]
    fn region_features_match_direct_scan() {
        let img = half_split(12, 8);
        let sp = SuperpixelMap::from_labels(
            12,
            8,
            &(0..96).map(|i| u32::from(i % 12 >= 6)).collect::<Vec<_>>(),
        )
        .unwrap();
        let feats = region_features(&img, &sp).unwrap();
        assert_ne!(feats[0].lbp_hist, feats[1].lbp_hist);
        let gray = to_grayscale(&img);
        for (r, f) in feats.iter().enumerate() {
            let members: Vec<(usize, usize)> = (0..8)
                .flat_map(|y| (0..12).map(move |x| (x, y)))
                .filter(|&(x, _)| usize::from(x >= 6) == r)
                .collect();
            let n = members.len() as f64;
            let mx = members.iter().map(|p| p.0 as f64).sum::<f64>() / n / 11.0;
            let my = members.iter().map(|p| p.1 as f64).sum::<f64>() / n / 7.0;
            let mr = members
                .iter()
                .map(|&(x, y)| img.get(x, y)[0] as f64)
                .sum::<f64>()
                / n;
            assert!((f.mean_x - mx).abs() < 1e-12 && (f.mean_y - my).abs() < 1e-12);
            assert!((f.mean_r - mr).abs() < 1e-12);
            let mut hist = vec![0.0; 256];
            let mut coded = 0.0;
            for &(x, y) in &members {
                if let Ok(c) = crate::features::lbp_code(&gray, x, y) {
                    hist[c as usize] += 1.0;
                    coded += 1.0;
                }
            }
            hist.iter_mut().for_each(|v| *v /= coded);
            assert_eq!(f.lbp_hist, hist);
        }
    }

    #[test]
    fn region_label_threshold_rule() {
        let sp = SuperpixelMap::from_labels(5, 2, &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]).unwrap();
        let truth = LabelMask::new(5, 2, vec![1, 1, 0, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(region_labels(&sp, &truth, 0.5).unwrap(), vec![0, 0]);
        assert_eq!(region_labels(&sp, &truth, 0.3).unwrap(), vec![1, 0]);
        let full = LabelMask::filled(5, 2, 1).unwrap();
        assert_eq!(region_labels(&sp, &full, 1.0).unwrap(), vec![1, 1]);
        assert!(region_labels(&sp, &truth, 0.0).is_err());
        let wrong = LabelMask::filled(2, 5, 1).unwrap();
        assert!(region_labels(&sp, &wrong, 0.5).is_err());
    }

    #[test]
    fn paint_all_ones_and_length_check() {
        let sp = SuperpixelMap::from_labels(3, 2, &[0, 1, 1, 2, 2, 0]).unwrap();
        assert_eq!(paint_regions(&sp, &[1, 1, 1]).unwrap().count_flood(), 6);
        assert!(paint_regions(&sp, &[1, 1]).is_err());
    }

    fn arb_map() -> impl Strategy<Value = (SuperpixelMap, Vec<u8>, Vec<u8>)> {
        (1usize..10, 1usize..10, 1u32..6).prop_flat_map(|(w, h, k)| {
            (
                proptest::collection::vec(0..k, w * h),
                proptest::collection::vec(0u8..2, w * h),
                proptest::collection::vec(0u8..2, k as usize),
            )
                .prop_map(move |(l, t, r)| {
                    let sp = SuperpixelMap::from_labels(w, h, &l).unwrap();
                    let n = sp.n_regions();
                    (sp, t, r[..n.min(r.len())].to_vec())
                })
        })
    }

    proptest! {
        #[test]
        fn painting_matches_region_label((sp, truth, labels) in arb_map()) {
            prop_assume!(labels.len() == sp.n_regions());
            let mask = paint_regions(&sp, &labels).unwrap();
            for (i, &l) in sp.labels().iter().enumerate() {
                prop_assert_eq!(mask.labels()[i], labels[l as usize]);
            }
            // round trip through ground truth: pure-enough regions survive
            let t = 0.5;
            let truth = LabelMask::new(sp.width(), sp.height(), truth).unwrap();
            let rl = region_labels(&sp, &truth, t).unwrap();
            let painted = paint_regions(&sp, &rl).unwrap();
            let sizes = sp.region_sizes();
            for (r, &size) in sizes.iter().enumerate() {
                let members: Vec<usize> = (0..sp.labels().len()).filter(|&i| sp.labels()[i] as usize == r).collect();
                let flood = members.iter().filter(|&&i| truth.labels()[i] == 1).count();
                let purity = flood.max(size - flood) as f64 / size as f64;
                if purity >= f64::max(t, 1.0 - t) {
                    let majority = u8::from(flood * 2 >= size);
                    for &i in &members {
                        prop_assert_eq!(painted.labels()[i], majority);
                    }
                }
            }
        }

        #[test]
        fn slic_partition_properties(seed in any::<u64>(), k in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = Image::from_fn(24, 18, |x, _| {
                let base = if x < 12 { 40 } else { 200 };
                [base + rng.gen_range(0..20), base, rng.gen_range(0..255)]
            }).unwrap();
            let out = slic_traced(&img, &SlicParams { n_segments: k, ..Default::default() }).unwrap();
            let sizes = out.map.region_sizes();
            prop_assert!(sizes.iter().all(|&s| s > 0));
            prop_assert!(is_four_connected(&out.map));
            for pair in out.objective.windows(2) {
                prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12));
            }
        }
    }
}
