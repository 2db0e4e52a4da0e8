//! Ring areas, equivalent-radius growth, cardinal ring widths and the
//! pixel to millimeter calibration.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::detect::Ring;
use crate::evaluate::ray_polygon_distance;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("rings {inner} and {outer} are not nested")]
    NonNestedRings { inner: usize, outer: usize },
    #[error("ring {ring} does not cross the {direction} ray")]
    RingMissesRay { ring: usize, direction: Cardinal },
    #[error("no calibration points")]
    EmptyData,
    #[error("every pixel measurement is zero")]
    AllZeroPx,
    #[error("{px} pixel values but {mm} millimeter values")]
    LengthMismatch { px: usize, mm: usize },
    #[error("invalid measurement {0}")]
    InvalidValue(f64),
}

/// Area enclosed by the ring polygon (shoelace).
pub fn ring_area(ring: &Ring) -> f64 {
    let p = &ring.polygon;
    let n = p.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let (a, b) = (p[k], p[(k + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEntry {
    pub area_px2: f64,
    pub r_eq_px: f64,
    pub delta_r_eq_px: f64,
}

/// Innermost ring first.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSeries {
    pub entries: Vec<GrowthEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationFit {
    /// Millimeters per pixel.
    pub m: f64,
    pub residual_rms: f64,
    pub n_points: usize,
}

/// Equivalent radii of rings sorted innermost first. Rings must be strictly
/// nested on every ray. The first increment is measured from the pith.
pub fn equivalent_series(rings: &[Ring]) -> Result<GrowthSeries, MeasureError> {
    let mut order: Vec<usize> = (0..rings.len()).collect();
    order.sort_by(|&a, &b| rings[a].mean_radius().total_cmp(&rings[b].mean_radius()));
    for pair in order.windows(2) {
        let (inner, outer) = (&rings[pair[0]], &rings[pair[1]]);
        let nested = inner.nb_rays() == outer.nb_rays() && inner.radii.iter().zip(&outer.radii).all(|(a, b)| a < b);
        if !nested {
            return Err(MeasureError::NonNestedRings {
                inner: pair[0],
                outer: pair[1],
            });
        }
    }
    let mut prev = 0.0;
    let entries = order
        .iter()
        .map(|&k| {
            let area_px2 = ring_area(&rings[k]);
            let r_eq_px = (area_px2 / PI).sqrt();
            let delta_r_eq_px = r_eq_px - prev;
            prev = r_eq_px;
            GrowthEntry {
                area_px2,
                r_eq_px,
                delta_r_eq_px,
            }
        })
        .collect();
    Ok(GrowthSeries { entries })
}

impl GrowthSeries {
    /// CSV text with one row per ring; millimeter columns when calibrated.
    pub fn to_csv(&self, fit: Option<&CalibrationFit>) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["ring_index", "area_px2", "r_eq_px", "delta_r_eq_px"];
        if fit.is_some() {
            header.extend(["area_mm2", "r_eq_mm", "delta_r_eq_mm"]);
        }
        w.write_record(&header).expect("in-memory write");
        for (k, e) in self.entries.iter().enumerate() {
            let mut row = vec![
                (k + 1).to_string(),
                format!("{:.4}", e.area_px2),
                format!("{:.4}", e.r_eq_px),
                format!("{:.4}", e.delta_r_eq_px),
            ];
            if let Some(f) = fit {
                row.push(format!("{:.6}", e.area_px2 * f.m * f.m));
                row.push(format!("{:.6}", e.r_eq_px * f.m));
                row.push(format!("{:.6}", e.delta_r_eq_px * f.m));
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
    }
}

/// Cardinal direction in image coordinates (y grows downward, north up).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cardinal {
    N,
    S,
    E,
    W,
}

impl Cardinal {
    pub const ALL: [Cardinal; 4] = [Cardinal::N, Cardinal::S, Cardinal::E, Cardinal::W];

    pub fn angle(self) -> f64 {
        match self {
            Cardinal::E => 0.0,
            Cardinal::S => 0.5 * PI,
            Cardinal::W => PI,
            Cardinal::N => 1.5 * PI,
        }
    }

    pub fn direction(self) -> [f64; 2] {
        match self {
            Cardinal::E => [1.0, 0.0],
            Cardinal::S => [0.0, 1.0],
            Cardinal::W => [-1.0, 0.0],
            Cardinal::N => [0.0, -1.0],
        }
    }
}

impl fmt::Display for Cardinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Cardinal::N => "N",
            Cardinal::S => "S",
            Cardinal::E => "E",
            Cardinal::W => "W",
        };
        f.write_str(s)
    }
}

impl FromStr for Cardinal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N" | "NORTH" => Ok(Cardinal::N),
            "S" | "SOUTH" => Ok(Cardinal::S),
            "E" | "EAST" => Ok(Cardinal::E),
            "W" | "WEST" => Ok(Cardinal::W),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardinalSeries {
    pub direction: Cardinal,
    /// Pith to ring distance, innermost ring first.
    pub radii: Vec<f64>,
    /// Consecutive differences, the first measured from the pith.
    pub widths: Vec<f64>,
}

/// Ring crossings along the cardinal rays from `pith`. Rings are taken
/// innermost first by mean radius.
pub fn cardinal_widths(rings: &[Ring], pith: [f64; 2], directions: &[Cardinal]) -> Result<Vec<CardinalSeries>, MeasureError> {
    let mut order: Vec<usize> = (0..rings.len()).collect();
    order.sort_by(|&a, &b| rings[a].mean_radius().total_cmp(&rings[b].mean_radius()));
    directions
        .iter()
        .map(|&direction| {
            let radii = order
                .iter()
                .map(|&k| {
                    ray_polygon_distance(pith, direction.direction(), &rings[k].polygon)
                        .ok_or(MeasureError::RingMissesRay { ring: k, direction })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let widths = radii
                .iter()
                .scan(0.0, |prev, &r| {
                    let w = r - *prev;
                    *prev = r;
                    Some(w)
                })
                .collect();
            Ok(CardinalSeries {
                direction,
                radii,
                widths,
            })
        })
        .collect()
}

/// CSV text: direction, ring_index, radius_px, width_px.
pub fn cardinal_csv(series: &[CardinalSeries]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["direction", "ring_index", "radius_px", "width_px"])
        .expect("in-memory write");
    for s in series {
        for (k, (r, d)) in s.radii.iter().zip(&s.widths).enumerate() {
            w.write_record([
                s.direction.to_string(),
                (k + 1).to_string(),
                format!("{r:.4}"),
                format!("{d:.4}"),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

/// Least-squares fit of `mm = m·px` through the origin.
pub fn calibrate(px: &[f64], mm: &[f64]) -> Result<CalibrationFit, MeasureError> {
    if px.len() != mm.len() {
        return Err(MeasureError::LengthMismatch {
            px: px.len(),
            mm: mm.len(),
        });
    }
    if px.is_empty() {
        return Err(MeasureError::EmptyData);
    }
    if let Some(&v) = px.iter().chain(mm).find(|v| !v.is_finite() || **v < 0.0) {
        return Err(MeasureError::InvalidValue(v));
    }
    let sxx: f64 = px.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(MeasureError::AllZeroPx);
    }
    let sxy: f64 = px.iter().zip(mm).map(|(x, y)| x * y).sum();
    let m = sxy / sxx;
    let ss: f64 = px.iter().zip(mm).map(|(x, y)| (y - m * x).powi(2)).sum();
    Ok(CalibrationFit {
        m,
        residual_rms: (ss / px.len() as f64).sqrt(),
        n_points: px.len(),
    })
}
