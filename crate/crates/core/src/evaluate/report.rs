use std::path::Path;

use image::{Rgb, RgbImage};
use rayon::prelude::*;

use super::{build_influence_map, image_section_bound, rmse, Assignment, EvalError, InfluenceMap};
use crate::detect::Ring;
use crate::draw::{blend, closed_polyline, dot, line, palette, rect};
use crate::spider::SpiderWeb;

pub const REPORT_FILES: [&str; 5] = [
    "dots_curve_and_rays.png",
    "influence_area.png",
    "assigned_dt_gt.png",
    "rmse.png",
    "heat_map_Spectral.png",
];

const SPECTRAL: [[u8; 3]; 11] = [
    [158, 1, 66],
    [213, 62, 79],
    [244, 109, 67],
    [253, 174, 97],
    [254, 224, 139],
    [255, 255, 191],
    [230, 245, 152],
    [171, 221, 164],
    [102, 194, 165],
    [50, 136, 189],
    [94, 79, 162],
];

/// Spectral colormap at `t` in [0, 1]; 0.5 is the neutral color.
pub fn spectral(t: f64) -> Rgb<u8> {
    let x = t.clamp(0.0, 1.0) * 10.0;
    let k = (x.floor() as usize).min(9);
    let f = x - k as f64;
    blend(Rgb(SPECTRAL[k]), Rgb(SPECTRAL[k + 1]), f)
}

/// Signed error saturating the heat-map colors, in pixels.
const HEAT_RANGE: f64 = 10.0;
/// Width of the heat-map annulus drawn around each GT ring, in pixels.
const HEAT_WIDTH: f64 = 20.0;

fn save(img: &RgbImage, dir: &Path, name: &str) -> Result<(), EvalError> {
    let path = dir.join(name);
    img.save(&path).map_err(|source| EvalError::IoFailure { path, source })
}

/// Ray index and radius of pixel center (x, y).
fn polar(web: &SpiderWeb, x: u32, y: u32) -> (usize, f64) {
    let [cx, cy] = web.center();
    let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
    (web.nearest_ray(dy.atan2(dx)), dx.hypot(dy))
}

fn per_pixel(base: &RgbImage, f: impl Fn(u32, u32, Rgb<u8>) -> Rgb<u8> + Sync) -> RgbImage {
    let w = base.width();
    let mut out = base.clone();
    out.par_chunks_mut(3 * w as usize).enumerate().for_each(|(y, row)| {
        for (x, px) in row.chunks_mut(3).enumerate() {
            let c = f(x as u32, y as u32, Rgb([px[0], px[1], px[2]]));
            px.copy_from_slice(&c.0);
        }
    });
    out
}

fn dimmed(image: &RgbImage) -> RgbImage {
    per_pixel(image, |_, _, c| blend(c, Rgb([0, 0, 0]), 0.3))
}

fn influence_image(image: &RgbImage, web: &SpiderWeb, map: &InfluenceMap, gt: &[Ring]) -> RgbImage {
    let mut out = per_pixel(image, |x, y, c| {
        let (ray, r) = polar(web, x, y);
        match map.band_of(ray, r) {
            Some(b) if r <= map.bounds(ray)[map.nb_rings()] => blend(c, palette(b), 0.45),
            _ => c,
        }
    });
    for g in gt {
        closed_polyline(&mut out, &g.polygon, 0, Rgb([0, 0, 0]));
    }
    out
}

fn rmse_chart(gt: &[Ring], detections: &[Ring], assignment: &Assignment) -> RgbImage {
    let (bar, gap, height) = (24i64, 8i64, 320i64);
    let width = (gt.len() as i64 * (bar + gap) + gap).max(64);
    let mut img = RgbImage::from_pixel(width as u32, height as u32, Rgb([255, 255, 255]));
    let values: Vec<Option<f64>> = (0..gt.len())
        .map(|g| assignment.detection_of(g).map(|d| rmse(&detections[d], &gt[g])))
        .collect();
    let top = values.iter().flatten().fold(1.0f64, |m, &v| m.max(v));
    let base = height - 20;
    rect(&mut img, 0, base, width - 1, base, Rgb([0, 0, 0]));
    for (g, v) in values.iter().enumerate() {
        let x0 = gap + g as i64 * (bar + gap);
        rect(&mut img, x0 + bar / 2, base + 1, x0 + bar / 2, base + 6, Rgb([0, 0, 0]));
        if let Some(v) = v {
            let h = ((v / top) * (base - 20) as f64).round() as i64;
            if h > 0 {
                rect(&mut img, x0, base - h, x0 + bar - 1, base - 1, palette(g));
            }
        }
    }
    img
}

fn heat_map(image: &RgbImage, web: &SpiderWeb, gt: &[Ring], detections: &[Ring], assignment: &Assignment) -> RgbImage {
    // signed error per GT ring and ray; inward detections are negative
    let errors: Vec<Option<Vec<f64>>> = (0..gt.len())
        .map(|g| {
            assignment
                .detection_of(g)
                .map(|d| detections[d].radii.iter().zip(&gt[g].radii).map(|(a, b)| a - b).collect())
        })
        .collect();
    let gray = per_pixel(image, |_, _, c| {
        let l = (0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64).round() as u8;
        Rgb([l, l, l])
    });
    per_pixel(&gray, |x, y, c| {
        let (ray, r) = polar(web, x, y);
        let nearest = gt
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.radii[ray] - r).abs().total_cmp(&(b.1.radii[ray] - r).abs()));
        match nearest {
            Some((g, ring)) if (ring.radii[ray] - r).abs() <= HEAT_WIDTH / 2.0 => match &errors[g] {
                Some(e) => spectral(0.5 + 0.5 * (e[ray] / HEAT_RANGE)),
                None => c,
            },
            _ => c,
        }
    })
}

/// Write the five evaluation images into `out_dir`. `gt` and `detections`
/// must be those the assignment was computed on.
pub fn render_reports(
    image: &RgbImage,
    web: &SpiderWeb,
    gt: &[Ring],
    detections: &[Ring],
    assignment: &Assignment,
    out_dir: &Path,
) -> Result<(), EvalError> {
    std::fs::create_dir_all(out_dir).map_err(|e| EvalError::IoFailure {
        path: out_dir.to_path_buf(),
        source: image::ImageError::IoError(e),
    })?;

    let mut overlay = dimmed(image);
    let bound = image_section_bound(web, image.width(), image.height());
    for (i, &b) in bound.iter().enumerate() {
        line(&mut overlay, web.center(), web.point(i, b), 0, Rgb([90, 90, 90]));
    }
    for g in gt {
        closed_polyline(&mut overlay, &g.polygon, 0, Rgb([0, 200, 0]));
    }
    for d in detections {
        closed_polyline(&mut overlay, &d.polygon, 0, Rgb([230, 40, 40]));
        for p in &d.polygon {
            dot(&mut overlay, *p, 1.5, Rgb([230, 40, 40]));
        }
    }
    save(&overlay, out_dir, REPORT_FILES[0])?;

    let map = build_influence_map(gt, web, &bound)?;
    save(&influence_image(image, web, &map, gt), out_dir, REPORT_FILES[1])?;

    let mut assigned = dimmed(image);
    for (g, ring) in gt.iter().enumerate() {
        closed_polyline(&mut assigned, &ring.polygon, 0, Rgb([0, 0, 0]));
        if let Some(d) = assignment.detection_of(g) {
            closed_polyline(&mut assigned, &detections[d].polygon, 1, palette(g));
        }
    }
    for &d in &assignment.false_positives {
        closed_polyline(&mut assigned, &detections[d].polygon, 1, Rgb([255, 255, 255]));
    }
    save(&assigned, out_dir, REPORT_FILES[2])?;

    save(&rmse_chart(gt, detections, assignment), out_dir, REPORT_FILES[3])?;
    save(&heat_map(image, web, gt, detections, assignment), out_dir, REPORT_FILES[4])?;
    Ok(())
}
