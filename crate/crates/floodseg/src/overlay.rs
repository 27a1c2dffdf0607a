use floodseg_core::imaging::{Image, LabelMask};

use crate::{Error, Result};

const YELLOW: [f64; 3] = [255.0, 255.0, 0.0];

/// Blends flood pixels toward pure yellow: `(1 - alpha) * src + alpha * yellow`,
/// rounded half up. Other pixels are copied unchanged.
pub fn render_overlay(img: &Image, mask: &LabelMask, alpha: f64) -> Result<Image> {
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(Error::Validation(format!(
            "overlay: image is {}x{}, mask is {}x{}",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Validation(format!(
            "overlay alpha must be in [0, 1], got {alpha}"
        )));
    }
    let pixels = img
        .pixels()
        .iter()
        .zip(mask.labels())
        .map(|(&px, &l)| {
            if l == 0 {
                return px;
            }
            let mut out = [0u8; 3];
            for c in 0..3 {
                let v = (1.0 - alpha) * px[c] as f64 + alpha * YELLOW[c];
                out[c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
            out
        })
        .collect();
    Ok(Image::new(img.width(), img.height(), pixels).expect("same dimensions as input"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_cases() {
        let img = Image::from_fn(4, 3, |x, y| [(x * 40) as u8, (y * 70) as u8, 33]).unwrap();
        let empty = LabelMask::filled(4, 3, 0).unwrap();
        assert_eq!(render_overlay(&img, &empty, 0.5).unwrap(), img);

        let full = LabelMask::filled(4, 3, 1).unwrap();
        let solid = render_overlay(&img, &full, 1.0).unwrap();
        assert!(solid.pixels().iter().all(|&p| p == [255, 255, 0]));

        let black = Image::filled(1, 1, [0; 3]).unwrap();
        let one = LabelMask::filled(1, 1, 1).unwrap();
        assert_eq!(
            render_overlay(&black, &one, 0.5).unwrap().pixels(),
            &[[128, 128, 0]]
        );
    }

    #[test]
    fn rejects_mismatch_and_bad_alpha() {
        let img = Image::filled(2, 2, [0; 3]).unwrap();
        assert!(render_overlay(&img, &LabelMask::filled(2, 3, 0).unwrap(), 0.5).is_err());
        assert!(render_overlay(&img, &LabelMask::filled(2, 2, 0).unwrap(), 1.5).is_err());
    }
}
