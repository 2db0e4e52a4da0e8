//! The spider web: a sampling frame of equiangular rays anchored at the pith.
//!
//! Ray `i` points along `(cos θ_i, sin θ_i)` in image coordinates, with
//! `θ_i = i·2π/Nr`. Because the image y axis points down, increasing ray index
//! turns *clockwise* on screen:
//!
//! ```text
//!             ray 3Nr/4 (up)
//!                  |
//!   ray Nr/2 ----- c ----- ray 0 (+x)
//!                  |
//!             ray Nr/4 (down)
//! ```
//!
//! Chain nodes are stored in increasing ray order. Endpoint B is the first node
//! of that order and endpoint A the last one, so A is the furthest node going
//! clockwise on screen.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::edges::EdgeChain;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("a spider web needs at least 3 rays, got {0}")]
    BadRayCount(usize),
    #[error("chain has no nodes")]
    EmptyChain,
    #[error("chain nodes are not a contiguous arc of ray indices")]
    NonContiguous,
    #[error("node radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("gap endpoints lie on the same ray {0}")]
    SameRay(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpiderWeb {
    center: [f64; 2],
    nb_rays: usize,
    angles: Vec<f64>,
    directions: Vec<[f64; 2]>,
}

impl SpiderWeb {
    pub fn new(center: [f64; 2], nb_rays: usize) -> Result<Self, GeometryError> {
        if nb_rays < 3 {
            return Err(GeometryError::BadRayCount(nb_rays));
        }
        let angles: Vec<f64> = (0..nb_rays)
            .map(|i| i as f64 * TAU / nb_rays as f64)
            .collect();
        let directions = angles.iter().map(|a| [a.cos(), a.sin()]).collect();
        Ok(Self {
            center,
            nb_rays,
            angles,
            directions,
        })
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn nb_rays(&self) -> usize {
        self.nb_rays
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angle(&self, ray: usize) -> f64 {
        self.angles[ray]
    }

    /// Unit vector of ray `ray` in image coordinates.
    pub fn direction(&self, ray: usize) -> [f64; 2] {
        self.directions[ray]
    }

    /// Image point at distance `radius` from the center along `ray`.
    pub fn point(&self, ray: usize, radius: f64) -> [f64; 2] {
        let [dx, dy] = self.directions[ray];
        [self.center[0] + radius * dx, self.center[1] + radius * dy]
    }

    /// Number of ray steps going from `from` to `to` in increasing index order.
    pub fn forward_steps(&self, from: usize, to: usize) -> usize {
        (to + self.nb_rays - from % self.nb_rays) % self.nb_rays
    }

    /// Ray index `offset` steps after `ray`, wrapping around.
    pub fn ray_after(&self, ray: usize, offset: usize) -> usize {
        (ray + offset) % self.nb_rays
    }

    /// Ray index closest to `angle` (radians, any range).
    pub fn nearest_ray(&self, angle: f64) -> usize {
        let a = angle.rem_euclid(TAU) * self.nb_rays as f64 / TAU;
        (a.round() as usize) % self.nb_rays
    }
}

pub fn build_spider_web(center: [f64; 2], nb_rays: usize) -> Result<SpiderWeb, GeometryError> {
    SpiderWeb::new(center, nb_rays)
}

/// Intersection of a chain or ring with a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub ray: usize,
    pub radius: f64,
    pub x: f64,
    pub y: f64,
    /// Intensity gradient inherited from the edge; zero for interpolated nodes.
    pub gradient: [f64; 2],
}

impl Node {
    pub fn on_ray(web: &SpiderWeb, ray: usize, radius: f64, gradient: [f64; 2]) -> Self {
        let [x, y] = web.point(ray, radius);
        Self {
            ray,
            radius,
            x,
            y,
            gradient,
        }
    }

    pub fn is_interpolated(&self) -> bool {
        self.gradient == [0.0, 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// Last node in ray order (furthest clockwise on screen).
    A,
    /// First node in ray order.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Inward,
    Outward,
}

/// An angularly contiguous run of nodes, at most one per ray.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    nodes: Vec<Node>,
    nb_rays: usize,
}

impl Chain {
    /// Nodes must be ordered by increasing ray index (mod `nb_rays`) with no gaps.
    pub fn from_nodes(nodes: Vec<Node>, nb_rays: usize) -> Result<Self, GeometryError> {
        if nodes.is_empty() {
            return Err(GeometryError::EmptyChain);
        }
        if nodes.len() > nb_rays {
            return Err(GeometryError::NonContiguous);
        }
        for pair in nodes.windows(2) {
            if (pair[0].ray + 1) % nb_rays != pair[1].ray {
                return Err(GeometryError::NonContiguous);
            }
        }
        if let Some(n) = nodes.iter().find(|n| !(n.radius > 0.0)) {
            return Err(GeometryError::NonPositiveRadius(n.radius));
        }
        Ok(Self { nodes, nb_rays })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Node> {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nb_rays(&self) -> usize {
        self.nb_rays
    }

    pub fn is_closed(&self) -> bool {
        self.nodes.len() == self.nb_rays
    }

    pub fn endpoint(&self, which: Endpoint) -> &Node {
        match which {
            Endpoint::A => self.nodes.last().expect("chains are never empty"),
            Endpoint::B => &self.nodes[0],
        }
    }

    pub fn endpoint_a(&self) -> &Node {
        self.endpoint(Endpoint::A)
    }

    pub fn endpoint_b(&self) -> &Node {
        self.endpoint(Endpoint::B)
    }

    fn offset_of(&self, ray: usize) -> Option<usize> {
        let offset = (ray + self.nb_rays - self.nodes[0].ray) % self.nb_rays;
        (offset < self.nodes.len()).then_some(offset)
    }

    pub fn covers(&self, ray: usize) -> bool {
        self.offset_of(ray).is_some()
    }

    pub fn node_at(&self, ray: usize) -> Option<&Node> {
        self.offset_of(ray).map(|k| &self.nodes[k])
    }

    pub fn mean_radius(&self) -> f64 {
        self.nodes.iter().map(|n| n.radius).sum::<f64>() / self.nodes.len() as f64
    }

    /// Up to `n` nodes starting at `which` and moving into the chain.
    pub fn window_from(&self, which: Endpoint, n: usize) -> Vec<Node> {
        let n = n.min(self.nodes.len());
        match which {
            Endpoint::B => self.nodes[..n].to_vec(),
            Endpoint::A => self.nodes[self.nodes.len() - n..].iter().rev().copied().collect(),
        }
    }
}

/// True iff some ray crosses both chains.
pub fn chains_intersect(a: &Chain, b: &Chain) -> bool {
    a.covers(b.endpoint_b().ray) || b.covers(a.endpoint_b().ray)
}

/// First chain met along the ray of `ch`'s endpoint, moving inward or outward.
pub fn visible_neighbors<'a>(
    ch: &Chain,
    endpoint: Endpoint,
    direction: Direction,
    all_chains: &'a [Chain],
) -> Option<&'a Chain> {
    let origin = ch.endpoint(endpoint);
    let mut best: Option<(&Chain, f64)> = None;
    for other in all_chains {
        if std::ptr::eq(other, ch) || other == ch {
            continue;
        }
        let Some(node) = other.node_at(origin.ray) else {
            continue;
        };
        let gap = match direction {
            Direction::Inward => origin.radius - node.radius,
            Direction::Outward => node.radius - origin.radius,
        };
        if gap > 0.0 && best.is_none_or(|(_, g)| gap < g) {
            best = Some((other, gap));
        }
    }
    best.map(|(c, _)| c)
}

/// Nodes strictly between `src` and `dst`, walking in increasing ray order,
/// with radius linear in angle.
pub(crate) fn interpolate_forward(src: &Node, dst: &Node, web: &SpiderWeb) -> Vec<Node> {
    let steps = web.forward_steps(src.ray, dst.ray);
    let steps = if steps == 0 { web.nb_rays() } else { steps };
    (1..steps)
        .map(|k| {
            let t = k as f64 / steps as f64;
            let radius = src.radius + (dst.radius - src.radius) * t;
            Node::on_ray(web, web.ray_after(src.ray, k), radius, [0.0, 0.0])
        })
        .collect()
}

/// Nodes on the rays strictly between `src` and `dst` along the shorter
/// angular path. Antipodal endpoints go in increasing ray order.
pub fn interpolate_gap(src: &Node, dst: &Node, web: &SpiderWeb) -> Result<Vec<Node>, GeometryError> {
    if src.ray == dst.ray {
        return Err(GeometryError::SameRay(src.ray));
    }
    let forward = web.forward_steps(src.ray, dst.ray);
    if forward <= web.nb_rays() - forward {
        Ok(interpolate_forward(src, dst, web))
    } else {
        let mut nodes = interpolate_forward(dst, src, web);
        nodes.reverse();
        Ok(nodes)
    }
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    ray: usize,
    radius: f64,
    gradient: [f64; 2],
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn wrap_pi(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}

/// Ray crossings of segment p→q, ordered along the segment. Rays through `p`
/// are excluded and rays through `q` included, so shared vertices count once.
fn segment_crossings(
    p: [f64; 2],
    q: [f64; 2],
    gp: [f64; 2],
    gq: [f64; 2],
    web: &SpiderWeb,
    out: &mut Vec<Crossing>,
) {
    let c = web.center();
    let w = [p[0] - c[0], p[1] - c[1]];
    let v = [q[0] - c[0], q[1] - c[1]];
    if w[0].hypot(w[1]) < 1e-12 || v[0].hypot(v[1]) < 1e-12 {
        return;
    }
    let d = [q[0] - p[0], q[1] - p[1]];
    let nr = web.nb_rays() as f64;
    let alpha_p = w[1].atan2(w[0]).rem_euclid(TAU);
    let delta = wrap_pi(v[1].atan2(v[0]) - alpha_p);
    let a_p = alpha_p * nr / TAU;
    // angle of q from its own coordinates so a vertex shared by two segments
    // gets the same value in both
    let mut a_q = v[1].atan2(v[0]).rem_euclid(TAU) * nr / TAU;
    if delta > 0.0 && a_q < a_p {
        a_q += nr;
    } else if delta < 0.0 && a_q > a_p {
        a_q -= nr;
    }
    let mut push = |k: i64| {
        let ray = k.rem_euclid(web.nb_rays() as i64) as usize;
        let u = web.direction(ray);
        let denom = cross(u, d);
        if denom.abs() < 1e-15 {
            return;
        }
        let t = cross(w, d) / denom;
        let s = (cross(w, u) / denom).clamp(0.0, 1.0);
        if t > 0.0 && t.is_finite() {
            out.push(Crossing {
                ray,
                radius: t,
                gradient: if s < 0.5 { gp } else { gq },
            });
        }
    };
    if delta > 0.0 {
        let (lo, hi) = (a_p.floor() as i64 + 1, a_q.floor() as i64);
        for k in lo..=hi {
            push(k);
        }
    } else if delta < 0.0 {
        let (lo, hi) = (a_q.ceil() as i64, a_p.ceil() as i64 - 1);
        for k in (lo..=hi).rev() {
            push(k);
        }
    }
}

/// Sample an edge polyline on the spider web. The crossing sequence is split
/// wherever it would revisit a ray, so every resulting chain has at most one
/// node per ray. Chains with fewer than two nodes are dropped.
pub fn sample_chain(edge_chain: &EdgeChain, web: &SpiderWeb) -> Vec<Chain> {
    let pts = &edge_chain.points;
    let nr = web.nb_rays();
    let mut crossings = Vec::new();
    let nseg = if edge_chain.closed { pts.len() } else { pts.len().saturating_sub(1) };
    for k in 0..nseg {
        let a = &pts[k];
        let b = &pts[(k + 1) % pts.len()];
        segment_crossings([a.x, a.y], [b.x, b.y], a.gradient, b.gradient, web, &mut crossings);
    }

    // (pieces, direction of each piece: +1 increasing ray, -1 decreasing, 0 unknown)
    let mut pieces: Vec<(Vec<Crossing>, i8)> = Vec::new();
    for c in crossings {
        if let Some((cur, dir)) = pieces.last_mut() {
            let last = cur.last().expect("pieces are never empty").ray;
            let step = if c.ray == (last + 1) % nr {
                1
            } else if (c.ray + 1) % nr == last {
                -1
            } else {
                0
            };
            if step != 0 && (*dir == 0 || *dir == step) && cur.len() < nr {
                cur.push(c);
                *dir = step;
                continue;
            }
        }
        pieces.push((vec![c], 0));
    }

    if edge_chain.closed && pieces.len() >= 2 {
        let (first, fdir) = &pieces[0];
        let (last, ldir) = &pieces[pieces.len() - 1];
        let dir = if *fdir != 0 { *fdir } else { *ldir };
        let tail = last.last().expect("non-empty").ray;
        let head = first[0].ray;
        let joins = match dir {
            1 => (tail + 1) % nr == head,
            -1 => (head + 1) % nr == tail,
            _ => false,
        };
        if joins && (*fdir == 0 || *ldir == 0 || fdir == ldir) && first.len() + last.len() <= nr {
            let (first, _) = pieces.remove(0);
            let (last, _) = pieces.last_mut().expect("at least one piece left");
            last.extend(first);
            pieces.last_mut().expect("non-empty").1 = dir;
        }
    }

    pieces
        .into_iter()
        .filter(|(p, _)| p.len() >= 2)
        .map(|(mut p, dir)| {
            if dir < 0 {
                p.reverse();
            }
            let nodes = p
                .into_iter()
                .map(|c| Node::on_ray(web, c.ray, c.radius, c.gradient))
                .collect();
            Chain::from_nodes(nodes, nr).expect("pieces are contiguous by construction")
        })
        .collect()
}

/// Per-ray sorted list of chain nodes, for visibility queries over a
/// changing chain set. Chains are identified by caller-assigned ids.
#[derive(Debug, Clone)]
pub(crate) struct RayIndex {
    rays: Vec<Vec<(f64, usize)>>,
}

impl RayIndex {
    pub fn new(nb_rays: usize) -> Self {
        Self {
            rays: vec![Vec::new(); nb_rays],
        }
    }

    pub fn insert(&mut self, id: usize, chain: &Chain) {
        for n in chain.nodes() {
            let list = &mut self.rays[n.ray];
            let pos = list.partition_point(|&(r, i)| (r, i) < (n.radius, id));
            list.insert(pos, (n.radius, id));
        }
    }

    pub fn remove(&mut self, id: usize, chain: &Chain) {
        for n in chain.nodes() {
            self.rays[n.ray].retain(|&(_, i)| i != id);
        }
    }

    /// Nearest chain to `id` on `ray` in `direction`, with its radius there.
    pub fn neighbor(&self, ray: usize, id: usize, direction: Direction) -> Option<(usize, f64)> {
        let list = &self.rays[ray];
        let pos = list.iter().position(|&(_, i)| i == id)?;
        let r0 = list[pos].0;
        match direction {
            Direction::Inward => list[..pos].iter().rev().find(|&&(r, _)| r < r0),
            Direction::Outward => list[pos + 1..].iter().find(|&&(r, _)| r > r0),
        }
        .map(|&(r, i)| (i, r))
    }
}
