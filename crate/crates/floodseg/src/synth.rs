//! Seeded synthetic datasets for end-to-end checks.
//!
//! * classification: "flood" images are smooth colour gradients, "dry"
//!   images are high-frequency noise textures;
//! * segmentation: a smooth "water" ellipse on a noisy textured background,
//!   with its exact mask. Every entry is a flood entry.

use std::path::Path;

use floodseg_core::imaging::{Image, LabelMask};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::io::{save_image, save_mask};
use crate::manifest::{DatasetManifest, ManifestEntry};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    Classify,
    Segment,
}

pub const CLASSIFY_SIZE: (usize, usize) = (128, 96);
pub const SEGMENT_SIZE: (usize, usize) = (160, 120);

fn channel(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn random_colour(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 3] {
    [
        rng.gen_range(lo..hi),
        rng.gen_range(lo..hi),
        rng.gen_range(lo..hi),
    ]
}

/// Linear blend between two colours along a random direction.
pub fn smooth_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    let a = random_colour(rng, 30.0, 225.0);
    let b = random_colour(rng, 30.0, 225.0);
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (theta.cos(), theta.sin());
    let span = (w as f64 * dx.abs() + h as f64 * dy.abs()).max(1.0);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    Image::from_fn(w, h, |x, y| {
        let t = (((x as f64 - cx) * dx + (y as f64 - cy) * dy) / span + 0.5).clamp(0.0, 1.0);
        core::array::from_fn(|c| channel(a[c] + (b[c] - a[c]) * t))
    })
    .expect("nonzero size")
}

/// Independent uniform noise of amplitude `amp` around a random base colour.
pub fn noise_image(rng: &mut ChaCha8Rng, w: usize, h: usize, amp: f64) -> Image {
    let base = random_colour(rng, 60.0, 195.0);
    let mut px = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        let d: f64 = rng.gen_range(-amp..=amp);
        px.push(core::array::from_fn(|c| {
            channel(base[c] + d + rng.gen_range(-8.0..=8.0))
        }));
    }
    Image::new(w, h, px).expect("nonzero size")
}

/// A textured scene containing one smooth water ellipse, and its mask.
pub fn water_scene(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (Image, LabelMask) {
    let ground = noise_image(rng, w, h, 45.0);
    let (cx, cy) = (
        rng.gen_range(0.3..0.7) * w as f64,
        rng.gen_range(0.35..0.7) * h as f64,
    );
    let (rx, ry) = (
        rng.gen_range(0.2..0.4) * w as f64,
        rng.gen_range(0.2..0.35) * h as f64,
    );
    let top = [
        rng.gen_range(60.0..110.0),
        rng.gen_range(90.0..140.0),
        rng.gen_range(150.0..210.0),
    ];
    let bottom = [top[0] - 30.0, top[1] - 30.0, top[2] - 40.0];
    let mut labels = vec![0u8; w * h];
    let img = Image::from_fn(w, h, |x, y| {
        let (u, v) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
        if u * u + v * v <= 1.0 {
            labels[y * w + x] = 1;
            let t = (v + 1.0) / 2.0;
            core::array::from_fn(|c| channel(top[c] + (bottom[c] - top[c]) * t))
        } else {
            ground.get(x, y)
        }
    })
    .expect("nonzero size");
    (
        img,
        LabelMask::new(w, h, labels).expect("mask matches image"),
    )
}

fn create(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `count` images under `out` plus `out/manifest.json`, and returns
/// the manifest (with `root` set to `out`).
pub fn generate(kind: SynthKind, count: usize, seed: u64, out: &Path) -> Result<DatasetManifest> {
    if count < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 images, got {count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(count);
    match kind {
        SynthKind::Classify => {
            let (w, h) = CLASSIFY_SIZE;
            create(&out.join("flood"))?;
            create(&out.join("dry"))?;
            let n_flood = count.div_ceil(2);
            for i in 0..count {
                let flood = i < n_flood;
                let (img, rel) = if flood {
                    (
                        smooth_image(&mut rng, w, h),
                        format!("flood/flood_{i:04}.png"),
                    )
                } else {
                    (
                        noise_image(&mut rng, w, h, 70.0),
                        format!("dry/dry_{i:04}.png"),
                    )
                };
                save_image(&out.join(&rel), &img)?;
                entries.push(ManifestEntry {
                    image: rel,
                    label: u8::from(flood),
                    mask: None,
                });
            }
        }
        SynthKind::Segment => {
            let (w, h) = SEGMENT_SIZE;
            create(&out.join("flood"))?;
            create(&out.join("masks"))?;
            for i in 0..count {
                let (img, mask) = water_scene(&mut rng, w, h);
                let image = format!("flood/scene_{i:04}.png");
                let mask_rel = format!("masks/scene_{i:04}.png");
                save_image(&out.join(&image), &img)?;
                save_mask(&out.join(&mask_rel), &mask)?;
                entries.push(ManifestEntry {
                    image,
                    label: 1,
                    mask: Some(mask_rel),
                });
            }
        }
    }
    let manifest = DatasetManifest {
        root: ".".into(),
        entries,
        split_seed: None,
        train_fraction: 0.8,
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(DatasetManifest {
        root: out.to_owned(),
        ..manifest
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ingest;

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(SynthKind::Segment, 3, 9, a.path()).unwrap();
        generate(SynthKind::Segment, 3, 9, b.path()).unwrap();
        for rel in [
            "flood/scene_0002.png",
            "masks/scene_0001.png",
            "manifest.json",
        ] {
            assert_eq!(
                std::fs::read(a.path().join(rel)).unwrap(),
                std::fs::read(b.path().join(rel)).unwrap()
            );
        }
    }

    #[test]
    fn generated_sets_pass_ingest() {
        let d = tempfile::tempdir().unwrap();
        let m = generate(SynthKind::Classify, 5, 1, d.path()).unwrap();
        assert_eq!(m.counts(), (3, 2));
        let read = ingest(&d.path().join("manifest.json"), false).unwrap();
        assert_eq!(read.entries, m.entries);
        let d = tempfile::tempdir().unwrap();
        generate(SynthKind::Segment, 2, 1, d.path()).unwrap();
        ingest(&d.path().join("manifest.json"), true).unwrap();
    }

    #[test]
    fn water_covers_a_fair_share() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (img, mask) = water_scene(&mut rng, 160, 120);
            assert_eq!((mask.width(), mask.height()), (img.width(), img.height()));
            let frac = mask.count_flood() as f64 / (160.0 * 120.0);
            assert!((0.05..0.45).contains(&frac), "{frac}");
        }
    }
}
