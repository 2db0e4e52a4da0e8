//! Sub-pixel Canny/Devernay edge detection.
//!
//! Gradients come from separable Gaussian-derivative filters. Edge points are
//! local maxima of the gradient norm along the dominant gradient axis, refined
//! to sub-pixel precision by fitting a parabola through the three norms
//! (Devernay's correction). Points are linked into simple chains and kept by
//! hysteresis on the gradient norm.

use image::GrayImage;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeError {
    #[error("image {width}x{height} is smaller than the {support}-pixel filter support")]
    ImageTooSmall {
        width: u32,
        height: u32,
        support: usize,
    },
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("thresholds must satisfy 0 <= low <= high, got low={low} high={high}")]
    BadThresholds { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoint {
    pub x: f64,
    pub y: f64,
    pub gradient: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeChain {
    pub points: Vec<EdgePoint>,
    /// The last point links back to the first.
    pub closed: bool,
}

/// Gradient of a Gaussian-smoothed image, row-major.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub norm: Vec<f64>,
}

fn kernel_radius(sigma: f64) -> usize {
    (4.0 * sigma).ceil().max(1.0) as usize
}

/// Gaussian and first-derivative kernels of the same scale, both sampled on
/// `-radius..=radius`. The derivative kernel is normalized so a unit ramp
/// yields a unit response.
fn gaussian_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let r = kernel_radius(sigma) as i64;
    let g: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / sum).collect();
    let d: Vec<f64> = (-r..=r)
        .zip(&g)
        .map(|(i, gi)| i as f64 / (sigma * sigma) * gi)
        .collect();
    // d is the negated derivative -G'(i); correlation with it differentiates.
    let moment: f64 = (-r..=r).zip(&d).map(|(i, di)| i as f64 * di).sum();
    let d = d.iter().map(|v| v / moment).collect();
    (g, d)
}

fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

/// Correlate each row with `kernel` (reflect border).
fn filter_rows(src: &[f64], width: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(width)
        .zip(src.par_chunks(width))
        .for_each(|(dst, row)| {
            for (x, d) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    acc += w * row[reflect(x as i64 + k as i64 - r, width)];
                }
                *d = acc;
            }
        });
    out
}

/// Correlate each column with `kernel` (reflect border).
fn filter_cols(src: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(y, dst)| {
        for (k, w) in kernel.iter().enumerate() {
            let sy = reflect(y as i64 + k as i64 - r, height);
            let row = &src[sy * width..(sy + 1) * width];
            for (d, s) in dst.iter_mut().zip(row) {
                *d += w * s;
            }
        }
    });
    out
}

/// Separable Gaussian smoothing of a row-major buffer.
pub(crate) fn gaussian_blur(src: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let (g, _) = gaussian_kernels(sigma);
    filter_rows(&filter_cols(src, width, height, &g), width, &g)
}

impl GradientField {
    pub fn compute(img: &GrayImage, sigma: f64) -> Result<Self, EdgeError> {
        if !(sigma > 0.0) {
            return Err(EdgeError::BadSigma(sigma));
        }
        let (width, height) = (img.width() as usize, img.height() as usize);
        let support = 2 * kernel_radius(sigma) + 1;
        if width < support || height < support {
            return Err(EdgeError::ImageTooSmall {
                width: img.width(),
                height: img.height(),
                support,
            });
        }
        let src: Vec<f64> = img.as_raw().iter().map(|&v| v as f64).collect();
        let (g, d) = gaussian_kernels(sigma);
        let smooth_y = filter_cols(&src, width, height, &g);
        let gx = filter_rows(&smooth_y, width, &d);
        let smooth_x = filter_rows(&src, width, &g);
        let gy = filter_cols(&smooth_x, width, height, &d);
        let norm = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
        Ok(Self {
            width,
            height,
            gx,
            gy,
            norm,
        })
    }

    /// Gradient-norm value at percentile `p` in [0, 100] over all pixels.
    pub fn percentile(&self, p: f64) -> f64 {
        let mut v = self.norm.clone();
        v.sort_by(f64::total_cmp);
        let rank = ((p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64).round() as usize;
        v[rank]
    }

    fn bilinear(&self, field: &[f64], x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let at = |xx: usize, yy: usize| field[yy * self.width + xx];
        (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x1, y0))
            + fy * ((1.0 - fx) * at(x0, y1) + fx * at(x1, y1))
    }

    pub fn gradient_at(&self, x: f64, y: f64) -> [f64; 2] {
        [self.bilinear(&self.gx, x, y), self.bilinear(&self.gy, x, y)]
    }
}

/// `a > b` beyond floating-point noise relative to their size.
fn greater(a: f64, b: f64) -> bool {
    a > b && a - b > 1e-9 * a.abs().max(b.abs()).max(1e-12)
}

struct Candidate {
    pixel: usize,
    pos: [f64; 2],
    gradient: [f64; 2],
    norm: f64,
}

fn find_maxima(field: &GradientField, low: f64) -> Vec<Candidate> {
    let (w, h) = (field.width, field.height);
    let norm = &field.norm;
    let at = |x: i64, y: i64| norm[reflect(y, h) * w + reflect(x, w)];
    let rows: Vec<Vec<Candidate>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::new();
            for x in 0..w {
                let idx = y * w + x;
                let m = norm[idx];
                if !(m > low) || m <= 0.0 {
                    continue;
                }
                let (xi, yi) = (x as i64, y as i64);
                let (ax, ay) = (field.gx[idx].abs(), field.gy[idx].abs());
                let (prev, next, horizontal) = if ax >= ay {
                    (at(xi - 1, yi), at(xi + 1, yi), true)
                } else {
                    (at(xi, yi - 1), at(xi, yi + 1), false)
                };
                if !(greater(m, prev) && !greater(next, m)) {
                    continue;
                }
                let denom = prev - 2.0 * m + next;
                let offset = if denom.abs() > 0.0 {
                    (0.5 * (prev - next) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                };
                let pos = if horizontal {
                    [x as f64 + offset, y as f64]
                } else {
                    [x as f64, y as f64 + offset]
                };
                let gradient = field.gradient_at(pos[0], pos[1]);
                if gradient == [0.0, 0.0] {
                    continue;
                }
                row.push(Candidate {
                    pixel: idx,
                    pos,
                    gradient,
                    norm: m,
                });
            }
            row
        })
        .collect();
    rows.into_iter().flatten().collect()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Link maxima into simple chains. Each point picks its nearest compatible
/// neighbor on either side of its gradient; conflicting links keep the
/// shorter one, so no point ever has two successors or two predecessors.
fn link(cands: &[Candidate], width: usize, height: usize) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let mut at_pixel = vec![usize::MAX; width * height];
    for (i, c) in cands.iter().enumerate() {
        at_pixel[c.pixel] = i;
    }
    let n = cands.len();
    let mut next: Vec<Option<usize>> = vec![None; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];

    for e in 0..n {
        let ce = &cands[e];
        let (px, py) = ((ce.pixel % width) as i64, (ce.pixel / width) as i64);
        let mut fwd: Option<(usize, f64)> = None;
        let mut bck: Option<(usize, f64)> = None;
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (px + dx, py + dy);
                if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                    continue;
                }
                let j = at_pixel[ny as usize * width + nx as usize];
                if j == usize::MAX {
                    continue;
                }
                let cn = &cands[j];
                let dot = ce.gradient[0] * cn.gradient[0] + ce.gradient[1] * cn.gradient[1];
                if dot <= 0.0 {
                    continue;
                }
                let v = [cn.pos[0] - ce.pos[0], cn.pos[1] - ce.pos[1]];
                let d = v[0].hypot(v[1]);
                if d > 2.0 || d == 0.0 {
                    continue;
                }
                let side = ce.gradient[0] * v[1] - ce.gradient[1] * v[0];
                let slot = if side > 0.0 {
                    &mut fwd
                } else if side < 0.0 {
                    &mut bck
                } else {
                    continue;
                };
                if slot.is_none_or(|(_, best)| d < best) {
                    *slot = Some((j, d));
                }
            }
        }

        if let Some((f, d)) = fwd {
            let alt = prev[f];
            if next[e] != Some(f) && alt.is_none_or(|a| dist(cands[a].pos, cands[f].pos) > d) {
                if let Some(old) = next[e] {
                    prev[old] = None;
                }
                if let Some(a) = alt {
                    next[a] = None;
                }
                next[e] = Some(f);
                prev[f] = Some(e);
            }
        }
        if let Some((b, d)) = bck {
            let alt = next[b];
            if prev[e] != Some(b) && alt.is_none_or(|a| dist(cands[a].pos, cands[b].pos) > d) {
                if let Some(old) = prev[e] {
                    next[old] = None;
                }
                if let Some(a) = alt {
                    prev[a] = None;
                }
                prev[e] = Some(b);
                next[b] = Some(e);
            }
        }
    }
    (next, prev)
}

/// Edge chains of `img` with explicit hysteresis thresholds on the gradient
/// norm (gray levels per pixel).
pub fn detect_edges(img: &GrayImage, sigma: f64, low_th: f64, high_th: f64) -> Result<Vec<EdgeChain>, EdgeError> {
    if !(low_th >= 0.0 && low_th <= high_th) {
        return Err(EdgeError::BadThresholds { low: low_th, high: high_th });
    }
    let field = GradientField::compute(img, sigma)?;
    Ok(edges_from_field(&field, low_th, high_th))
}

pub fn edges_from_field(field: &GradientField, low_th: f64, high_th: f64) -> Vec<EdgeChain> {
    let cands = find_maxima(field, low_th);
    let (next, prev) = link(&cands, field.width, field.height);
    let n = cands.len();

    // hysteresis along links
    let mut valid = vec![false; n];
    let mut stack = Vec::new();
    for i in 0..n {
        if cands[i].norm >= high_th && !valid[i] {
            valid[i] = true;
            stack.push(i);
            while let Some(k) = stack.pop() {
                for nb in [next[k], prev[k]].into_iter().flatten() {
                    if !valid[nb] {
                        valid[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
    }

    let mut visited = vec![false; n];
    let mut chains = Vec::new();
    for seed in 0..n {
        if !valid[seed] || visited[seed] {
            continue;
        }
        // walk back to the chain start, or detect a loop
        let mut start = seed;
        let mut closed = false;
        while let Some(p) = prev[start] {
            if p == seed {
                closed = true;
                break;
            }
            start = p;
        }
        if closed {
            // canonical start of a loop: smallest pixel index
            let mut k = seed;
            let mut best = seed;
            loop {
                k = next[k].expect("loop");
                if k == seed {
                    break;
                }
                if cands[k].pixel < cands[best].pixel {
                    best = k;
                }
            }
            start = best;
        }
        let mut points = Vec::new();
        let mut k = start;
        loop {
            visited[k] = true;
            points.push(EdgePoint {
                x: cands[k].pos[0],
                y: cands[k].pos[1],
                gradient: cands[k].gradient,
            });
            match next[k] {
                Some(nx) if nx != start && !visited[nx] => k = nx,
                _ => break,
            }
        }
        if points.len() >= 2 {
            chains.push((cands[start].pixel, EdgeChain { points, closed }));
        }
    }
    chains.sort_by_key(|(pixel, _)| *pixel);
    chains.into_iter().map(|(_, c)| c).collect()
}
