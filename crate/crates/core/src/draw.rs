//! Minimal raster drawing on RGB images.

use image::{Rgb, RgbImage};

pub(crate) fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Filled disk of the given radius.
pub(crate) fn dot(img: &mut RgbImage, p: [f64; 2], radius: f64, c: Rgb<u8>) {
    let r = radius.ceil() as i64;
    let (cx, cy) = (p[0].round() as i64, p[1].round() as i64);
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= radius * radius {
                put(img, cx + dx, cy + dy, c);
            }
        }
    }
}

/// Segment with square brush of side `2·half + 1`.
pub(crate) fn line(img: &mut RgbImage, a: [f64; 2], b: [f64; 2], half: i64, c: Rgb<u8>) {
    let (x0, y0) = (a[0].round() as i64, a[1].round() as i64);
    let (x1, y1) = (b[0].round() as i64, b[1].round() as i64);
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        for oy in -half..=half {
            for ox in -half..=half {
                put(img, x + ox, y + oy, c);
            }
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

pub(crate) fn closed_polyline(img: &mut RgbImage, pts: &[[f64; 2]], half: i64, c: Rgb<u8>) {
    for k in 0..pts.len() {
        line(img, pts[k], pts[(k + 1) % pts.len()], half, c);
    }
}

pub(crate) fn rect(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb<u8>) {
    for y in y0.min(y1)..=y0.max(y1) {
        for x in x0.min(x1)..=x0.max(x1) {
            put(img, x, y, c);
        }
    }
}

pub(crate) fn blend(a: Rgb<u8>, b: Rgb<u8>, t: f64) -> Rgb<u8> {
    let mix = |x: u8, y: u8| (x as f64 * (1.0 - t) + y as f64 * t).round().clamp(0.0, 255.0) as u8;
    Rgb([mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])])
}

fn hsv(h: f64, s: f64, v: f64) -> Rgb<u8> {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    let (r, g, b) = match i as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    Rgb([(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8])
}

/// Distinct saturated colors, stepping the hue by the golden ratio.
pub(crate) fn palette(k: usize) -> Rgb<u8> {
    hsv((0.11 + k as f64 * 0.618_033_988_75).fract(), 0.85, 0.95)
}
