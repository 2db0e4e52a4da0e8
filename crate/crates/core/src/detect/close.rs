use super::{DetectParams, Ring, RingSource};
use crate::spider::{interpolate_forward, Chain, SpiderWeb};

/// Radii on every ray, with the A→B gap filled linearly.
fn closed_radii(chain: &Chain, web: &SpiderWeb) -> Vec<f64> {
    let mut radii = vec![0.0; web.nb_rays()];
    for n in chain.nodes() {
        radii[n.ray] = n.radius;
    }
    if !chain.is_closed() {
        for n in interpolate_forward(chain.endpoint_a(), chain.endpoint_b(), web) {
            radii[n.ray] = n.radius;
        }
    }
    radii
}

fn overlaps(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).any(|(x, y)| (x - y).abs() < 1.0)
}

fn strictly_ordered(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x < y) || a.iter().zip(b).all(|(x, y)| x > y)
}

/// Close the chains that cover enough rays into rings, sorted by mean radius.
/// Longer chains win over shorter ones that duplicate or cross them.
pub fn close_rings(chains: &[Chain], web: &SpiderWeb, params: &DetectParams) -> Vec<Ring> {
    let min_nodes = params.min_ring_nodes();
    let mut candidates: Vec<(usize, Vec<f64>)> = chains
        .iter()
        .filter(|c| c.len() >= min_nodes)
        .map(|c| (c.len(), closed_radii(c, web)))
        .collect();
    candidates.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then_with(|| mean(&a.1).total_cmp(&mean(&b.1)))
    });

    let mut kept: Vec<Vec<f64>> = Vec::new();
    for (_, radii) in candidates {
        if kept.iter().all(|k| !overlaps(k, &radii) && strictly_ordered(k, &radii)) {
            kept.push(radii);
        }
    }
    let mut rings: Vec<Ring> = kept
        .into_iter()
        .map(|r| Ring::from_radii(web, r, RingSource::Detected).expect("positive radii on every ray"))
        .collect();
    rings.sort_by(|a, b| a.mean_radius().total_cmp(&b.mean_radius()));
    rings
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
