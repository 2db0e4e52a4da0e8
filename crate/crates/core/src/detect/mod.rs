//! Tree-ring detection on a spider web: keep edge nodes whose gradient points
//! along the ray, join chains that belong to the same ring, and close the
//! nearly complete ones.

mod close;
mod connect;
mod criteria;
mod filter;

use std::fmt;
use std::str::FromStr;

use image::{GrayImage, RgbImage};
use thiserror::Error;

use crate::annotation::RingShape;
use crate::edges::{self, EdgeError, GradientField};
use crate::evaluate::{sample_polygon_on_rays, EvalError};
use crate::raster::{self, RasterError};
use crate::spider::{sample_chain, Chain, GeometryError, SpiderWeb};

pub use close::close_rings;
pub use connect::connect_chains;
pub use criteria::{
    connectivity_goodness, radial_tol_ok, regular_deriv_ok, similar_radial_dist_ok, CriteriaError,
};
pub use filter::{filter_by_gradient, gradient_ray_angle_deg};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Hysteresis threshold on the gradient norm, either absolute or as a
/// percentile of the gradient norms of the working image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeThreshold {
    Percentile(f64),
    Absolute(f64),
}

impl EdgeThreshold {
    fn resolve(self, field: &GradientField) -> f64 {
        match self {
            EdgeThreshold::Percentile(p) => field.percentile(p),
            EdgeThreshold::Absolute(v) => v,
        }
    }
}

impl fmt::Display for EdgeThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeThreshold::Percentile(p) => write!(f, "p{p}"),
            EdgeThreshold::Absolute(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for EdgeThreshold {
    type Err = String;

    /// `p70` is the 70th percentile, a bare number is an absolute threshold.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(p) = s.strip_prefix(['p', 'P']) {
            let p: f64 = p.parse().map_err(|_| format!("bad percentile {s:?}"))?;
            if !(0.0..=100.0).contains(&p) {
                return Err(format!("percentile {p} outside [0, 100]"));
            }
            Ok(EdgeThreshold::Percentile(p))
        } else {
            let v: f64 = s.parse().map_err(|_| format!("bad threshold {s:?}"))?;
            if !(v >= 0.0) {
                return Err(format!("threshold {v} must be non-negative"));
            }
            Ok(EdgeThreshold::Absolute(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectParams {
    /// Scale of the edge detector.
    pub sigma: f64,
    pub nb_rays: usize,
    /// Largest angle between a node's gradient and its ray.
    pub angle_tol_deg: f64,
    /// Radial tolerance (px) between candidate offsets to the support chain.
    pub th_rt: f64,
    /// Standard-deviation multiplier for the radial-distance ranges.
    pub th_ds: f64,
    /// Allowed ratio between gap and chain radial derivatives.
    pub th_rd: f64,
    /// Nodes taken from each chain end when evaluating criteria.
    pub n_nodes: usize,
    pub relax_iters: usize,
    pub relax_factor: f64,
    pub min_chain_nodes: usize,
    /// Fraction of rays a chain must cover to be closed into a ring.
    pub min_ring_coverage: f64,
    /// Side of the square working image.
    pub target_size: u32,
    pub edge_low: EdgeThreshold,
    pub edge_high: EdgeThreshold,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            sigma: 3.0,
            nb_rays: 360,
            angle_tol_deg: 30.0,
            th_rt: 2.0,
            th_ds: 2.0,
            th_rd: 2.0,
            n_nodes: 20,
            relax_iters: 3,
            relax_factor: 1.5,
            min_chain_nodes: 2,
            min_ring_coverage: 0.9,
            target_size: raster::WORKING_SIZE,
            edge_low: EdgeThreshold::Percentile(70.0),
            edge_high: EdgeThreshold::Percentile(85.0),
        }
    }
}

/// Criteria thresholds at one relaxation level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub th_rt: f64,
    pub th_ds: f64,
    pub th_rd: f64,
    pub n_nodes: usize,
}

impl DetectParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: &str| Err(DetectError::InvalidParams(m.to_string()));
        if !(self.sigma > 0.0) {
            return bad("sigma must be > 0");
        }
        if self.nb_rays < 3 {
            return bad("nb_rays must be >= 3");
        }
        if !(self.angle_tol_deg > 0.0) {
            return bad("angle tolerance must be > 0");
        }
        if !(self.th_rt > 0.0 && self.th_ds > 0.0 && self.th_rd > 0.0) {
            return bad("th_rt, th_ds and th_rd must be > 0");
        }
        if self.n_nodes == 0 || self.relax_iters == 0 || self.min_chain_nodes == 0 {
            return bad("n_nodes, relax_iters and min_chain_nodes must be > 0");
        }
        if !(self.relax_factor >= 1.0) {
            return bad("relax_factor must be >= 1");
        }
        if !(self.min_ring_coverage > 0.0 && self.min_ring_coverage <= 1.0) {
            return bad("min_ring_coverage must be in (0, 1]");
        }
        if self.target_size == 0 {
            return bad("target size must be > 0");
        }
        Ok(())
    }

    /// Thresholds after `level` relaxation steps: `th_rt` and `th_rd` grow
    /// geometrically, `th_ds` by 0.5 per step.
    pub fn relaxed(&self, level: usize) -> Thresholds {
        let f = self.relax_factor.powi(level as i32);
        Thresholds {
            th_rt: self.th_rt * f,
            th_ds: self.th_ds + 0.5 * level as f64,
            th_rd: self.th_rd * f,
            n_nodes: self.n_nodes,
        }
    }

    /// Smallest node count of a chain that is closed into a ring.
    pub fn min_ring_nodes(&self) -> usize {
        (self.min_ring_coverage * self.nb_rays as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingSource {
    Detected,
    GroundTruth,
}

/// A closed curve sampled on every ray of a spider web.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub radii: Vec<f64>,
    pub polygon: Vec<[f64; 2]>,
    pub source: RingSource,
}

impl Ring {
    pub fn from_radii(web: &SpiderWeb, radii: Vec<f64>, source: RingSource) -> Result<Self, GeometryError> {
        if radii.len() != web.nb_rays() {
            return Err(GeometryError::NonContiguous);
        }
        if let Some(&r) = radii.iter().find(|r| !(**r > 0.0)) {
            return Err(GeometryError::NonPositiveRadius(r));
        }
        let polygon = radii.iter().enumerate().map(|(i, &r)| web.point(i, r)).collect();
        Ok(Self {
            radii,
            polygon,
            source,
        })
    }

    pub fn nb_rays(&self) -> usize {
        self.radii.len()
    }

    pub fn mean_radius(&self) -> f64 {
        self.radii.iter().sum::<f64>() / self.radii.len() as f64
    }

    pub fn to_shape(&self, label: Option<String>) -> RingShape {
        RingShape {
            label,
            points: self.polygon.clone(),
        }
    }
}

/// Copy of `image` with the rings drawn over it.
pub fn overlay_rings(image: &RgbImage, rings: &[Ring]) -> RgbImage {
    let mut out = image.clone();
    let half = (image.width().max(image.height()) / 1000) as i64;
    for (k, ring) in rings.iter().enumerate() {
        crate::draw::closed_polyline(&mut out, &ring.polygon, half, crate::draw::palette(k));
    }
    out
}

/// Chains of the working image after sampling and gradient filtering.
pub fn sampled_chains(image: &GrayImage, web: &SpiderWeb, params: &DetectParams) -> Result<Vec<Chain>, DetectError> {
    let field = GradientField::compute(image, params.sigma)?;
    let low = params.edge_low.resolve(&field);
    let high = params.edge_high.resolve(&field).max(low);
    let edge_chains = edges::edges_from_field(&field, low, high);
    let chains: Vec<Chain> = edge_chains.iter().flat_map(|e| sample_chain(e, web)).collect();
    Ok(filter_by_gradient(&chains, web, params.angle_tol_deg, params.min_chain_nodes))
}

/// Rings on an already preprocessed working image, in its own frame.
pub fn detect_preprocessed(image: &GrayImage, pith: [f64; 2], params: &DetectParams) -> Result<Vec<Ring>, DetectError> {
    params.validate()?;
    let web = SpiderWeb::new(pith, params.nb_rays)?;
    let chains = sampled_chains(image, &web, params)?;
    let connected = connect_chains(chains, &web, params);
    Ok(close_rings(&connected, &web, params))
}

/// Full pipeline on an original image. Returned rings are sampled on a web of
/// `params.nb_rays` rays centered at the original pith.
pub fn detect(image: &RgbImage, pith: [f64; 2], params: &DetectParams) -> Result<Vec<Ring>, DetectError> {
    detect_masked(image, None, pith, params)
}

pub fn detect_masked(
    image: &RgbImage,
    mask: Option<&GrayImage>,
    pith: [f64; 2],
    params: &DetectParams,
) -> Result<Vec<Ring>, DetectError> {
    params.validate()?;
    let masked = raster::apply_mask(image, mask)?;
    let pre = raster::preprocess(&masked, pith, params.target_size)?;
    let rings = detect_preprocessed(&pre.image, pre.pith, params)?;
    let web = SpiderWeb::new(pith, params.nb_rays)?;
    let [sx, sy] = pre.scale;
    rings
        .into_iter()
        .map(|ring| {
            if sx == sy {
                let radii = ring.radii.iter().map(|r| r / sx).collect();
                Ok(Ring::from_radii(&web, radii, RingSource::Detected)?)
            } else {
                let shape = RingShape {
                    label: None,
                    points: ring.polygon.iter().map(|p| [p[0] / sx, p[1] / sy]).collect(),
                };
                let mut ring = sample_polygon_on_rays(&shape, &web)?;
                ring.source = RingSource::Detected;
                Ok(ring)
            }
        })
        .collect()
}
