use crate::spider::{Chain, Node, SpiderWeb};

/// Angle in degrees between a node's gradient and the direction of its ray.
/// Nodes without gradient report 180°.
pub fn gradient_ray_angle_deg(node: &Node, web: &SpiderWeb) -> f64 {
    let [gx, gy] = node.gradient;
    let norm = gx.hypot(gy);
    if norm == 0.0 {
        return 180.0;
    }
    let [ux, uy] = web.direction(node.ray);
    ((gx * ux + gy * uy) / norm).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Drop every node whose gradient deviates from its ray by more than
/// `angle_tol_deg`, splitting chains at the removed nodes. Pieces shorter
/// than `min_nodes` are discarded.
pub fn filter_by_gradient(chains: &[Chain], web: &SpiderWeb, angle_tol_deg: f64, min_nodes: usize) -> Vec<Chain> {
    let mut out = Vec::new();
    for chain in chains {
        let keep: Vec<bool> = chain
            .nodes()
            .iter()
            .map(|n| gradient_ray_angle_deg(n, web) <= angle_tol_deg)
            .collect();
        if keep.iter().all(|&k| k) {
            if chain.len() >= min_nodes {
                out.push(chain.clone());
            }
            continue;
        }
        let mut pieces: Vec<Vec<Node>> = vec![Vec::new()];
        for (node, &k) in chain.nodes().iter().zip(&keep) {
            if k {
                pieces.last_mut().expect("non-empty").push(*node);
            } else if !pieces.last().expect("non-empty").is_empty() {
                pieces.push(Vec::new());
            }
        }
        // a closed chain wraps: its last and first pieces are contiguous
        if chain.is_closed() && keep[0] && keep[keep.len() - 1] && pieces.len() > 1 {
            let first = pieces.remove(0);
            pieces.last_mut().expect("non-empty").extend(first);
        }
        for p in pieces {
            if p.len() >= min_nodes && !p.is_empty() {
                out.push(Chain::from_nodes(p, chain.nb_rays()).expect("sub-arc of a valid chain"));
            }
        }
    }
    out
}
