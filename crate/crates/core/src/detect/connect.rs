//! Iterative chain merging around support chains.
//!
//! Each pass takes the longest unprocessed chain as support and gathers the
//! chains visible from it (inward, then outward): chains with an endpoint
//! whose ray meets the support with no other chain in between. Candidates
//! are walked in angular order; from the A endpoint of a candidate, the
//! nearest non-intersecting candidate ahead is joined to it if the
//! connectivity goodness holds. A candidate lying entirely inside the gap
//! blocks the joins that would jump over it. Passes repeat until nothing
//! merges, then the thresholds are relaxed.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::criteria::{goodness_windows, offset_difference};
use super::{DetectParams, Thresholds};
use crate::spider::{chains_intersect, interpolate_forward, Chain, Direction, Endpoint, RayIndex, SpiderWeb};

struct Pool {
    chains: Vec<Option<Chain>>,
    index: RayIndex,
}

impl Pool {
    fn new(chains: Vec<Chain>, nb_rays: usize) -> Self {
        let mut pool = Self {
            chains: Vec::new(),
            index: RayIndex::new(nb_rays),
        };
        for c in chains {
            pool.add(c);
        }
        pool
    }

    fn add(&mut self, chain: Chain) -> usize {
        let id = self.chains.len();
        self.index.insert(id, &chain);
        self.chains.push(Some(chain));
        id
    }

    fn take(&mut self, id: usize) -> Chain {
        let chain = self.chains[id].take().expect("live chain");
        self.index.remove(id, &chain);
        chain
    }

    fn get(&self, id: usize) -> &Chain {
        self.chains[id].as_ref().expect("live chain")
    }

    fn is_live(&self, id: usize) -> bool {
        self.chains[id].is_some()
    }

    fn live(&self) -> impl Iterator<Item = (usize, &Chain)> {
        self.chains.iter().enumerate().filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
    }
}

enum Join {
    With(usize),
    Close,
}

/// Ids of chains visible from `support_id` in `direction`, in angular order
/// of their B endpoints.
fn candidates(pool: &Pool, support_id: usize, direction: Direction) -> Vec<usize> {
    let support = pool.get(support_id);
    let mut found = BTreeSet::new();
    for node in support.nodes() {
        if let Some((id, _)) = pool.index.neighbor(node.ray, support_id, direction) {
            let c = pool.get(id);
            if c.endpoint_a().ray == node.ray || c.endpoint_b().ray == node.ray {
                found.insert(id);
            }
        }
    }
    let mut list: Vec<usize> = found.into_iter().collect();
    list.sort_by(|&x, &y| {
        let (cx, cy) = (pool.get(x), pool.get(y));
        cx.endpoint_b()
            .ray
            .cmp(&cy.endpoint_b().ray)
            .then(cx.endpoint_b().radius.total_cmp(&cy.endpoint_b().radius))
            .then(x.cmp(&y))
    });
    list
}

/// Best join for the A endpoint of `cid` among `list`.
fn find_join(
    pool: &Pool,
    cid: usize,
    list: &[usize],
    support: &Chain,
    web: &SpiderWeb,
    th: &Thresholds,
    min_ring_nodes: usize,
) -> Option<Join> {
    let c = pool.get(cid);
    if c.is_closed() {
        return None;
    }
    let a_ray = c.endpoint_a().ray;
    let gap_to = |other: &Chain| web.forward_steps(a_ray, other.endpoint_b().ray);

    // (gap, rank, target)
    let mut options: Vec<(usize, f64, Option<usize>)> = Vec::new();
    for &d in list {
        if d == cid {
            continue;
        }
        let dc = pool.get(d);
        if chains_intersect(c, dc) {
            continue;
        }
        options.push((gap_to(dc), offset_difference(c.endpoint_a(), dc.endpoint_b(), support), Some(d)));
    }
    if c.len() >= min_ring_nodes {
        options.push((gap_to(c), offset_difference(c.endpoint_a(), c.endpoint_b(), support), None));
    }
    options.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let a_win = c.window_from(Endpoint::A, th.n_nodes);
    for &(gap, _, target) in &options {
        // a candidate wholly inside the gap must be joined first
        let blocked = list.iter().any(|&e| {
            if e == cid || Some(e) == target {
                return false;
            }
            let ec = pool.get(e);
            let start = web.forward_steps(a_ray, ec.endpoint_b().ray);
            start >= 1 && start + ec.len() - 1 < gap
        });
        if blocked {
            continue;
        }
        let other = target.map_or(c, |d| pool.get(d));
        let b_win = other.window_from(Endpoint::B, th.n_nodes);
        let gap_nodes = interpolate_forward(&a_win[0], &b_win[0], web);
        if goodness_windows(&a_win, &b_win, &gap_nodes, support, th).unwrap_or(false) {
            return Some(match target {
                Some(d) => Join::With(d),
                None => Join::Close,
            });
        }
    }
    None
}

fn joined(a: &Chain, b: Option<&Chain>, web: &SpiderWeb) -> Chain {
    let mut nodes = a.nodes().to_vec();
    let dst = b.unwrap_or(a).endpoint_b();
    nodes.extend(interpolate_forward(a.endpoint_a(), dst, web));
    if let Some(b) = b {
        nodes.extend_from_slice(b.nodes());
    }
    Chain::from_nodes(nodes, web.nb_rays()).expect("merged chains keep one node per ray")
}

fn connect_around(
    pool: &mut Pool,
    support_id: usize,
    direction: Direction,
    web: &SpiderWeb,
    th: &Thresholds,
    min_ring_nodes: usize,
    fresh: &mut Vec<usize>,
) -> usize {
    let mut list = candidates(pool, support_id, direction);
    if list.is_empty() {
        return 0;
    }
    let support = pool.get(support_id).clone();
    let mut merges = 0;
    let mut i = 0;
    while i < list.len() {
        let mut cid = list[i];
        while let Some(join) = find_join(pool, cid, &list, &support, web, th, min_ring_nodes) {
            let a = pool.take(cid);
            let merged = match join {
                Join::With(d) => {
                    let b = pool.take(d);
                    let m = joined(&a, Some(&b), web);
                    list.retain(|&x| x != d);
                    m
                }
                Join::Close => joined(&a, None, web),
            };
            let new_id = pool.add(merged);
            fresh.push(new_id);
            let pos = list.iter().position(|&x| x == cid).expect("current candidate listed");
            list[pos] = new_id;
            i = pos;
            cid = new_id;
            merges += 1;
        }
        i += 1;
    }
    merges
}

fn pass(pool: &mut Pool, web: &SpiderWeb, th: &Thresholds, min_ring_nodes: usize) -> usize {
    // longest first; ties by id for determinism
    let mut queue: BinaryHeap<(usize, Reverse<usize>)> =
        pool.live().map(|(id, c)| (c.len(), Reverse(id))).collect();
    let mut merges = 0;
    let mut fresh = Vec::new();
    while let Some((_, Reverse(id))) = queue.pop() {
        if !pool.is_live(id) {
            continue;
        }
        for direction in [Direction::Inward, Direction::Outward] {
            if !pool.is_live(id) {
                break;
            }
            merges += connect_around(pool, id, direction, web, th, min_ring_nodes, &mut fresh);
        }
        for f in fresh.drain(..) {
            if pool.is_live(f) {
                queue.push((pool.get(f).len(), Reverse(f)));
            }
        }
    }
    merges
}

/// Merge chains into ring candidates. Returned chains are ordered by their
/// first ray, then radius.
pub fn connect_chains(chains: Vec<Chain>, web: &SpiderWeb, params: &DetectParams) -> Vec<Chain> {
    let mut pool = Pool::new(chains, web.nb_rays());
    let min_ring_nodes = params.min_ring_nodes();
    let mut level = 0;
    while level < params.relax_iters {
        let th = params.relaxed(level);
        if pass(&mut pool, web, &th, min_ring_nodes) == 0 {
            level += 1;
        }
    }
    let mut out: Vec<Chain> = pool.chains.into_iter().flatten().collect();
    out.sort_by(|a, b| {
        a.endpoint_b()
            .ray
            .cmp(&b.endpoint_b().ray)
            .then(a.endpoint_b().radius.total_cmp(&b.endpoint_b().radius))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spider::Node;

    fn web() -> SpiderWeb {
        SpiderWeb::new([0.0, 0.0], 360).unwrap()
    }

    fn arc(web: &SpiderWeb, start: usize, len: usize, r: f64) -> Chain {
        let nodes = (start..start + len)
            .map(|k| Node::on_ray(web, k % 360, r, [1.0, 0.0]))
            .collect();
        Chain::from_nodes(nodes, 360).unwrap()
    }

    fn assert_one_node_per_ray(chains: &[Chain]) {
        for c in chains {
            let mut rays: Vec<usize> = c.nodes().iter().map(|n| n.ray).collect();
            rays.sort_unstable();
            rays.dedup();
            assert_eq!(rays.len(), c.len());
        }
    }

    #[test]
    fn closed_chain_is_fixed_point() {
        let web = web();
        let ring = arc(&web, 0, 360, 50.0);
        let out = connect_chains(vec![ring.clone()], &web, &DetectParams::default());
        assert_eq!(out, vec![ring]);
    }

    #[test]
    fn split_circle_is_rejoined() {
        let web = web();
        let chains = vec![
            arc(&web, 0, 88, 50.0),
            arc(&web, 90, 88, 50.0),
            arc(&web, 180, 88, 50.0),
            arc(&web, 270, 88, 50.0),
            arc(&web, 0, 360, 70.0),
        ];
        let out = connect_chains(chains, &web, &DetectParams::default());
        assert_one_node_per_ray(&out);
        assert_eq!(out.len(), 2);
        let inner = out.iter().find(|c| c.mean_radius() < 60.0).unwrap();
        assert!(inner.is_closed());
        assert!(inner.nodes().iter().all(|n| (n.radius - 50.0).abs() < 1e-9));
    }

    #[test]
    fn disjoint_rings_are_not_merged() {
        let web = web();
        let chains = vec![arc(&web, 0, 180, 30.0), arc(&web, 180, 180, 60.0)];
        let out = connect_chains(chains.clone(), &web, &DetectParams::default());
        assert_eq!(out.len(), 2);

        let mut with_support = chains;
        with_support.push(arc(&web, 0, 360, 90.0));
        let out = connect_chains(with_support, &web, &DetectParams::default());
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn nearest_fragment_wins() {
        // two fragments of the same ring separated by a gap, plus a fragment
        // of a deeper ring visible through that gap
        let web = web();
        let chains = vec![
            arc(&web, 0, 360, 100.0),
            arc(&web, 10, 60, 80.0),
            arc(&web, 75, 60, 80.0),
            arc(&web, 68, 10, 60.0),
        ];
        let out = connect_chains(chains, &web, &DetectParams::default());
        assert_one_node_per_ray(&out);
        let ring80: Vec<&Chain> = out.iter().filter(|c| (c.mean_radius() - 80.0).abs() < 1.0).collect();
        assert_eq!(ring80.len(), 1);
        assert_eq!(ring80[0].len(), 125);
        assert!(out.iter().any(|c| c.len() == 10 && (c.mean_radius() - 60.0).abs() < 1e-9));
    }

    #[test]
    fn chain_count_never_grows() {
        let web = web();
        let mut chains = Vec::new();
        for k in 0..12 {
            let r = 40.0 + 15.0 * (k % 4) as f64 + 0.3 * k as f64;
            chains.push(arc(&web, (k * 37) % 360, 20 + 5 * k, r));
        }
        let n = chains.len();
        let out = connect_chains(chains, &web, &DetectParams::default());
        assert!(out.len() <= n);
        assert_one_node_per_ray(&out);
    }
}
