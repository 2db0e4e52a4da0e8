//! Connectivity goodness between two candidate chains relative to a support
//! chain. Throughout, `cand_a` is joined at its endpoint A to endpoint B of
//! `cand_b`, i.e. the connection runs in increasing ray order from `cand_a`.
//!
//! Offsets to the support are signed (`support - candidate`), so the same
//! code serves candidates inside and outside the support.

use thiserror::Error;

use super::Thresholds;
use crate::spider::{chains_intersect, interpolate_forward, Chain, Endpoint, Node, SpiderWeb};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("support chain does not cross ray {0}")]
    MissingSupportNode(usize),
    #[error("not enough nodes for a centered derivative")]
    ChainTooShort,
    #[error("candidate chains share a ray")]
    ChainsIntersect,
}

fn offset(support: &Chain, node: &Node) -> Result<f64, CriteriaError> {
    support
        .node_at(node.ray)
        .map(|s| s.radius - node.radius)
        .ok_or(CriteriaError::MissingSupportNode(node.ray))
}

/// Endpoint-level radial tolerance test.
pub(crate) fn radial_tol_nodes(a_end: &Node, b_end: &Node, support: &Chain, th_rt: f64) -> Result<bool, CriteriaError> {
    let da = offset(support, a_end)?;
    let db = offset(support, b_end)?;
    Ok((da - db).abs() < th_rt)
}

/// Absolute difference of the two endpoint offsets, used to rank candidates.
pub(crate) fn offset_difference(a_end: &Node, b_end: &Node, support: &Chain) -> f64 {
    match (offset(support, a_end), offset(support, b_end)) {
        (Ok(a), Ok(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Offsets of the window nodes that the support also crosses.
fn window_offsets(window: &[Node], support: &Chain) -> Vec<f64> {
    window.iter().filter_map(|n| offset(support, n).ok()).collect()
}

pub(crate) fn similar_radial_dist_windows(
    a_win: &[Node],
    b_win: &[Node],
    support: &Chain,
    th_ds: f64,
) -> Result<bool, CriteriaError> {
    let sa = window_offsets(a_win, support);
    if sa.is_empty() {
        return Err(CriteriaError::MissingSupportNode(a_win[0].ray));
    }
    let sb = window_offsets(b_win, support);
    if sb.is_empty() {
        return Err(CriteriaError::MissingSupportNode(b_win[0].ray));
    }
    Ok(ranges_overlap(mean_std(&sa), mean_std(&sb), th_ds))
}

/// Closed ranges `mu ± th_ds·sigma` intersect.
pub(crate) fn ranges_overlap((ma, sa): (f64, f64), (mb, sb): (f64, f64), th_ds: f64) -> bool {
    let lo = (ma - th_ds * sa).max(mb - th_ds * sb);
    let hi = (ma + th_ds * sa).min(mb + th_ds * sb);
    lo <= hi
}

fn centered(prev: &Node, next: &Node) -> f64 {
    (next.radius - prev.radius).abs() / 2.0
}

/// `a_win` and `b_win` start at the joining endpoints and move into their
/// chains; `gap` runs from `a_win[0]` to `b_win[0]`.
pub(crate) fn regular_deriv_windows(
    a_win: &[Node],
    b_win: &[Node],
    gap: &[Node],
    th_rd: f64,
) -> Result<bool, CriteriaError> {
    let existing = a_win
        .windows(3)
        .chain(b_win.windows(3))
        .map(|w| centered(&w[0], &w[2]))
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
    let Some(existing) = existing else {
        return Err(CriteriaError::ChainTooShort);
    };

    // the virtual chain across the junction
    let mut virt: Vec<&Node> = Vec::with_capacity(gap.len() + 4);
    if a_win.len() > 1 {
        virt.push(&a_win[1]);
    }
    let first_joined = virt.len();
    virt.push(&a_win[0]);
    virt.extend(gap.iter());
    virt.push(&b_win[0]);
    let last_joined = virt.len() - 1;
    if b_win.len() > 1 {
        virt.push(&b_win[1]);
    }
    let gap_max = (first_joined.max(1)..=last_joined.min(virt.len() - 2))
        .map(|s| centered(virt[s - 1], virt[s + 1]))
        .fold(0.0, f64::max);
    Ok(gap_max <= existing * th_rd)
}

fn windows(cand_a: &Chain, cand_b: &Chain, n_nodes: usize) -> (Vec<Node>, Vec<Node>) {
    (cand_a.window_from(Endpoint::A, n_nodes), cand_b.window_from(Endpoint::B, n_nodes))
}

/// `|δR_a − δR_b| < th_rt`, with δR the offset to the support at each of the
/// two joining endpoints.
pub fn radial_tol_ok(cand_a: &Chain, cand_b: &Chain, support: &Chain, th_rt: f64) -> Result<bool, CriteriaError> {
    radial_tol_nodes(cand_a.endpoint_a(), cand_b.endpoint_b(), support, th_rt)
}

/// Offsets to the support over up to `n_nodes` nodes next to each joining
/// endpoint define ranges `mu ± th_ds·sigma`; true iff the ranges overlap.
pub fn similar_radial_dist_ok(
    cand_a: &Chain,
    cand_b: &Chain,
    support: &Chain,
    th_ds: f64,
    n_nodes: usize,
) -> Result<bool, CriteriaError> {
    let (a, b) = windows(cand_a, cand_b, n_nodes);
    similar_radial_dist_windows(&a, &b, support, th_ds)
}

/// The largest centered radial derivative across the interpolated junction
/// must not exceed `th_rd` times the largest one within the two chains.
pub fn regular_deriv_ok(
    cand_a: &Chain,
    cand_b: &Chain,
    gap_nodes: &[Node],
    th_rd: f64,
    n_nodes: usize,
) -> Result<bool, CriteriaError> {
    let (a, b) = windows(cand_a, cand_b, n_nodes);
    regular_deriv_windows(&a, &b, gap_nodes, th_rd)
}

/// `RegularDeriv ∧ (SimilarRadialDist ∨ RadialTol)`. Passing the same chain
/// twice tests closing it onto itself.
pub fn connectivity_goodness(
    cand_a: &Chain,
    cand_b: &Chain,
    support: &Chain,
    th: &Thresholds,
    web: &SpiderWeb,
) -> Result<bool, CriteriaError> {
    let same = std::ptr::eq(cand_a, cand_b) || cand_a == cand_b;
    if !same && chains_intersect(cand_a, cand_b) {
        return Err(CriteriaError::ChainsIntersect);
    }
    let (a_win, b_win) = windows(cand_a, cand_b, th.n_nodes);
    let gap = interpolate_forward(&a_win[0], &b_win[0], web);
    goodness_windows(&a_win, &b_win, &gap, support, th)
}

pub(crate) fn goodness_windows(
    a_win: &[Node],
    b_win: &[Node],
    gap: &[Node],
    support: &Chain,
    th: &Thresholds,
) -> Result<bool, CriteriaError> {
    if !regular_deriv_windows(a_win, b_win, gap, th.th_rd)? {
        return Ok(false);
    }
    let similar = similar_radial_dist_windows(a_win, b_win, support, th.th_ds).unwrap_or(false);
    if similar {
        return Ok(true);
    }
    radial_tol_nodes(&a_win[0], &b_win[0], support, th.th_rt)
}
