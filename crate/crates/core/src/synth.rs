//! Synthetic cross-sections with exact ground truth.
//!
//! Rings are concentric similar ellipses (circles when `ratio == 1`) around
//! the pith. Intensity follows a sawtooth density profile: it darkens
//! linearly from earlywood to latewood across each ring and jumps back to
//! earlywood at the boundary, so every boundary is a dark to light step going
//! outward. Beyond the last boundary a partial ring darkens toward the
//! farthest image corner.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::annotation::RingShape;
use crate::edges::gaussian_blur;

const EARLYWOOD: f64 = 200.0;
const LATEWOOD: f64 = 60.0;
/// Points per GT polygon, a multiple of 360 so whole-degree rays hit vertices.
const GT_POINTS: usize = 720;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub size: u32,
    pub nb_rings: usize,
    /// Major over minor axis, 1 for circles.
    pub ratio: f64,
    /// Orientation of the major axis, radians.
    pub rotation: f64,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    /// Offset of the pith from the image center, pixels.
    pub pith_offset: [f64; 2],
    /// Relative ring-width jitter in [0, 1).
    pub width_jitter: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            size: 1500,
            nb_rings: 10,
            ratio: 1.0,
            rotation: 0.0,
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            pith_offset: [0.0, 0.0],
            width_jitter: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSection {
    pub image: RgbImage,
    pub pith: [f64; 2],
    /// Ring boundaries along the major axis, innermost first.
    pub radii: Vec<f64>,
    pub gt: Vec<RingShape>,
    pub params: SynthParams,
}

impl SynthSection {
    /// Distance from the pith to boundary `k` in direction `theta`.
    pub fn radius_at(&self, k: usize, theta: f64) -> f64 {
        boundary_radius(self.radii[k], self.params.ratio, self.params.rotation, theta)
    }
}

fn boundary_radius(major: f64, ratio: f64, rotation: f64, theta: f64) -> f64 {
    let t = theta - rotation;
    major / (t.cos().powi(2) + (ratio * t.sin()).powi(2)).sqrt()
}

/// Generate a section. Identical parameters give identical output.
pub fn generate(params: &SynthParams) -> SynthSection {
    assert!(params.nb_rings >= 1, "at least one ring");
    assert!(params.ratio >= 1.0, "ratio must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let size = params.size as f64;
    let pith = [size / 2.0 + params.pith_offset[0], size / 2.0 + params.pith_offset[1]];
    let room = pith[0].min(pith[1]).min(size - pith[0]).min(size - pith[1]);
    let outer = 0.9 * room;

    let j = params.width_jitter;
    let widths: Vec<f64> = (0..params.nb_rings).map(|_| 1.0 + rng.random_range(-j..=j)).collect();
    let total: f64 = widths.iter().sum();
    let mut radii = Vec::with_capacity(widths.len());
    let mut acc = 0.0;
    for w in &widths {
        acc += w / total * outer;
        radii.push(acc);
    }

    let (w, h) = (params.size as usize, params.size as usize);
    let (c, s) = (params.rotation.cos(), params.rotation.sin());
    let q = params.ratio;
    let elliptic = |x: f64, y: f64| {
        let u = c * x + s * y;
        let t = -s * x + c * y;
        (u, t, (u * u + q * q * t * t).sqrt())
    };
    // the partial outer ring darkens until the farthest corner
    let corner = [[0.0, 0.0], [size, 0.0], [0.0, size], [size, size]]
        .iter()
        .map(|p| elliptic(p[0] - pith[0], p[1] - pith[1]).2)
        .fold(0.0, f64::max);
    let last = *radii.last().expect("at least one ring");
    let profile = |rho: f64| {
        let k = radii.partition_point(|&r| r < rho);
        let (start, end) = if k == radii.len() {
            (last, corner)
        } else {
            (if k == 0 { 0.0 } else { radii[k - 1] }, radii[k])
        };
        EARLYWOOD - (EARLYWOOD - LATEWOOD) * ((rho - start) / (end - start)).clamp(0.0, 1.0)
    };

    let mut gray = vec![0.0f64; w * h];
    for (idx, v) in gray.iter_mut().enumerate() {
        let (u, t, rho) = elliptic((idx % w) as f64 - pith[0], (idx / w) as f64 - pith[1]);
        // pixels per unit of rho along the gradient
        let grad = if rho > 1e-9 {
            (u * u + q.powi(4) * t * t).sqrt() / rho
        } else {
            1.0
        };
        let mut val = profile(rho);
        // antialias the nearest boundary with a 1 px linear ramp
        let k = radii.partition_point(|&r| r < rho);
        for &b in radii[k.saturating_sub(1)..(k + 1).min(radii.len())].iter() {
            let d = (rho - b) * grad;
            if d.abs() < 0.5 {
                val = LATEWOOD * (0.5 - d) + EARLYWOOD * (0.5 + d);
            }
        }
        *v = val;
    }
    if params.blur_sigma > 0.0 {
        gray = gaussian_blur(&gray, w, h, params.blur_sigma);
    }
    if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, params.noise_sigma).expect("finite sigma");
        for v in gray.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let mut image = RgbImage::new(params.size, params.size);
    for (px, &v) in image.pixels_mut().zip(&gray) {
        let tint = |f: f64| (v * f).round().clamp(0.0, 255.0) as u8;
        *px = Rgb([tint(1.0), tint(0.85), tint(0.6)]);
    }

    let gt = radii
        .iter()
        .enumerate()
        .map(|(k, &r)| RingShape {
            label: Some(format!("{}", k + 1)),
            points: (0..GT_POINTS)
                .map(|i| {
                    let theta = i as f64 * 2.0 * PI / GT_POINTS as f64;
                    let rr = boundary_radius(r, params.ratio, params.rotation, theta);
                    [pith[0] + rr * theta.cos(), pith[1] + rr * theta.sin()]
                })
                .collect(),
        })
        .collect();

    SynthSection {
        image,
        pith,
        radii,
        gt,
        params: params.clone(),
    }
}
