//! Image loading and preprocessing: background mask, resize to the working
//! size, grayscale conversion and global histogram equalization.

use std::path::Path;

use image::imageops::{self, FilterType};
use image::{GrayImage, ImageError, Luma, Rgb, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot decode image {path}: {source}")]
    DecodeFailure {
        path: String,
        #[source]
        source: ImageError,
    },
    #[error("unsupported image format for {path}: {source}")]
    UnsupportedFormat {
        path: String,
        #[source]
        source: ImageError,
    },
    #[error("mask is {mask_w}x{mask_h} but image is {img_w}x{img_h}")]
    DimensionMismatch {
        img_w: u32,
        img_h: u32,
        mask_w: u32,
        mask_h: u32,
    },
    #[error("pith ({0}, {1}) lies outside the image")]
    PithOutside(f64, f64),
    #[error("target size must be positive")]
    BadTargetSize,
}

/// Default working resolution (square).
pub const WORKING_SIZE: u32 = 1500;

/// Gray level painted over background pixels.
pub const BACKGROUND: u8 = 255;

#[derive(Debug, Clone)]
pub struct PreprocessResult {
    pub image: GrayImage,
    /// Pith in the resized frame.
    pub pith: [f64; 2],
    /// Resize factors (target / original) along x and y.
    pub scale: [f64; 2],
}

fn classify(path: &Path, err: ImageError) -> RasterError {
    let path = path.display().to_string();
    match err {
        ImageError::Unsupported(_) => RasterError::UnsupportedFormat { path, source: err },
        other => RasterError::DecodeFailure { path, source: other },
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage, RasterError> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| classify(path, ImageError::IoError(e)))?
        .with_guessed_format()
        .map_err(|e| classify(path, ImageError::IoError(e)))?;
    let img = reader.decode().map_err(|e| classify(path, e))?;
    Ok(img.to_rgb8())
}

/// Single-channel mask; zero marks background.
pub fn load_mask(path: &Path) -> Result<GrayImage, RasterError> {
    let img = image::open(path).map_err(|e| classify(path, e))?;
    Ok(img.to_luma8())
}

/// Paint background pixels (mask value 0) white.
pub fn apply_mask(image: &RgbImage, mask: Option<&GrayImage>) -> Result<RgbImage, RasterError> {
    let Some(mask) = mask else {
        return Ok(image.clone());
    };
    if mask.dimensions() != image.dimensions() {
        return Err(RasterError::DimensionMismatch {
            img_w: image.width(),
            img_h: image.height(),
            mask_w: mask.width(),
            mask_h: mask.height(),
        });
    }
    let mut out = image.clone();
    for (px, m) in out.pixels_mut().zip(mask.pixels()) {
        if m[0] == 0 {
            *px = Rgb([BACKGROUND; 3]);
        }
    }
    Ok(out)
}

/// Luma with weights 0.299 / 0.587 / 0.114.
pub fn to_gray(image: &RgbImage) -> GrayImage {
    GrayImage::from_fn(image.width(), image.height(), |x, y| {
        let [r, g, b] = image.get_pixel(x, y).0;
        let v = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        Luma([v.round().clamp(0.0, 255.0) as u8])
    })
}

/// Global histogram equalization. A constant image is returned unchanged.
pub fn equalize(image: &GrayImage) -> GrayImage {
    let mut hist = [0u64; 256];
    for p in image.pixels() {
        hist[p[0] as usize] += 1;
    }
    let total: u64 = hist.iter().sum();
    let mut cdf = [0u64; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if total == cdf_min {
        return image.clone();
    }
    let span = (total - cdf_min) as f64;
    let lut: Vec<u8> = cdf
        .iter()
        .map(|&c| (c.saturating_sub(cdf_min) as f64 / span * 255.0).round() as u8)
        .collect();
    let mut out = image.clone();
    for p in out.pixels_mut() {
        p[0] = lut[p[0] as usize];
    }
    out
}

/// Resize to `target_size`² (bilinear), convert to gray, equalize. The pith
/// is scaled by the same per-axis factors.
pub fn preprocess(image: &RgbImage, pith: [f64; 2], target_size: u32) -> Result<PreprocessResult, RasterError> {
    if target_size == 0 {
        return Err(RasterError::BadTargetSize);
    }
    let (w, h) = (image.width() as f64, image.height() as f64);
    if !(pith[0] >= 0.0 && pith[0] < w && pith[1] >= 0.0 && pith[1] < h) {
        return Err(RasterError::PithOutside(pith[0], pith[1]));
    }
    let scale = [target_size as f64 / w, target_size as f64 / h];
    let resized = if image.dimensions() == (target_size, target_size) {
        image.clone()
    } else {
        imageops::resize(image, target_size, target_size, FilterType::Triangle)
    };
    Ok(PreprocessResult {
        image: equalize(&to_gray(&resized)),
        pith: [pith[0] * scale[0], pith[1] * scale[1]],
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_png_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("white.png");
        RgbImage::from_pixel(1, 1, Rgb([255, 255, 255])).save(&path).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.dimensions(), (1, 1));
        assert_eq!(img.get_pixel(0, 0).0, [255, 255, 255]);

        let path = dir.path().join("wide.png");
        RgbImage::new(17, 9).save(&path).unwrap();
        assert_eq!(load_image(&path).unwrap().dimensions(), (17, 9));
    }

    #[test]
    fn truncated_png_fails_to_decode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        RgbImage::from_pixel(32, 32, Rgb([10, 20, 30])).save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_image(&path), Err(RasterError::DecodeFailure { .. })));
    }

    #[test]
    fn unknown_format_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"definitely not an image").unwrap();
        assert!(matches!(load_image(&path), Err(RasterError::UnsupportedFormat { .. })));
    }

    #[test]
    fn mask_cases() {
        let img = RgbImage::from_fn(8, 6, |x, y| Rgb([x as u8 * 10, y as u8 * 20, 7]));
        let all_fg = GrayImage::from_pixel(8, 6, Luma([255]));
        assert_eq!(apply_mask(&img, Some(&all_fg)).unwrap(), img);
        let all_bg = GrayImage::from_pixel(8, 6, Luma([0]));
        let out = apply_mask(&img, Some(&all_bg)).unwrap();
        assert!(out.pixels().all(|p| p.0 == [BACKGROUND; 3]));
        let half = GrayImage::from_fn(8, 6, |x, _| Luma([if x < 4 { 0 } else { 1 }]));
        let out = apply_mask(&img, Some(&half)).unwrap();
        for (x, y, p) in out.enumerate_pixels() {
            if x < 4 {
                assert_eq!(p.0, [BACKGROUND; 3]);
            } else {
                assert_eq!(p, img.get_pixel(x, y));
            }
        }
        let wrong = GrayImage::new(3, 3);
        assert!(matches!(apply_mask(&img, Some(&wrong)), Err(RasterError::DimensionMismatch { .. })));
        assert_eq!(apply_mask(&img, None).unwrap(), img);
    }

    #[test]
    fn gray_uses_rec601_weights() {
        let img = RgbImage::from_pixel(1, 1, Rgb([100, 200, 50]));
        let v: f64 = 0.299 * 100.0 + 0.587 * 200.0 + 0.114 * 50.0;
        assert_eq!(to_gray(&img).get_pixel(0, 0)[0], v.round() as u8);
    }

    #[test]
    fn resize_scales_pith() {
        let img = RgbImage::from_pixel(3000, 3000, Rgb([90, 90, 90]));
        let out = preprocess(&img, [1000.0, 500.0], 1500).unwrap();
        assert_eq!(out.image.dimensions(), (1500, 1500));
        assert_eq!(out.pith, [500.0, 250.0]);
        assert_eq!(out.scale, [0.5, 0.5]);
        let img = RgbImage::new(300, 150);
        let out = preprocess(&img, [30.0, 30.0], 150).unwrap();
        assert_eq!(out.scale, [0.5, 1.0]);
        assert_eq!(out.pith, [15.0, 30.0]);
        assert!(matches!(preprocess(&img, [300.0, 3.0], 150), Err(RasterError::PithOutside(..))));
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = RgbImage::from_pixel(40, 40, Rgb([77, 77, 77]));
        let out = preprocess(&img, [20.0, 20.0], 40).unwrap();
        assert!(out.image.pixels().all(|p| p[0] == 77));
    }

    #[test]
    fn ramp_equalizes_to_flat_histogram() {
        let img = GrayImage::from_fn(256, 64, |x, _| Luma([(x as f64 * 200.0 / 255.0) as u8 + 20]));
        let eq = equalize(&img);
        let mut bins = [0f64; 16];
        for p in eq.pixels() {
            bins[p[0] as usize / 16] += 1.0;
        }
        let expected = (256 * 64) as f64 / 16.0;
        let chi2: f64 = bins.iter().map(|b| (b - expected).powi(2) / expected).sum();
        // 15 degrees of freedom; p = 0.001 critical value is about 37.7
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn equalization_is_monotone(values in prop::collection::vec(any::<u8>(), 1..400)) {
                let n = values.len() as u32;
                let img = GrayImage::from_fn(n, 1, |x, _| Luma([values[x as usize]]));
                let eq = equalize(&img);
                for i in 0..values.len() {
                    for j in 0..values.len() {
                        if values[i] <= values[j] {
                            prop_assert!(eq.get_pixel(i as u32, 0)[0] <= eq.get_pixel(j as u32, 0)[0]);
                        }
                    }
                }
            }
        }
    }
}
