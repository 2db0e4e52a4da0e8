//! Detection quality against ground truth.
//!
//! Every ring is sampled on the rays of a common spider web. On each ray the
//! influence band of a GT ring runs between the midpoints to its neighbors;
//! a detection is assigned to the GT ring whose band holds more than `th·Nr`
//! of its nodes, the closest such detection (by RMSE) winning.

mod report;

use std::cmp::Ordering;
use std::path::PathBuf;

use thiserror::Error;

use crate::annotation::RingShape;
use crate::detect::{Ring, RingSource};
use crate::spider::SpiderWeb;

pub use report::{render_reports, spectral, REPORT_FILES};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("the web center is not inside the polygon")]
    CenterOutsidePolygon,
    #[error("ground-truth rings {inner} and {outer} cross on ray {ray}")]
    CrossingGTRings { ray: usize, inner: usize, outer: usize },
    #[error("ring count mismatch: expected {expected}, found {found}")]
    RingCountMismatch { expected: usize, found: usize },
    #[error("score undefined: no detections or no ground truth")]
    UndefinedScore,
    #[error("rings sampled on {found} rays, expected {expected}")]
    RayCountMismatch { expected: usize, found: usize },
    #[error("no expert annotations")]
    NoExperts,
    #[error("cannot write {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

/// Distance from `origin` along unit `dir` to the farthest crossing with the
/// closed polygon, if any.
pub(crate) fn ray_polygon_distance(origin: [f64; 2], dir: [f64; 2], polygon: &[[f64; 2]]) -> Option<f64> {
    let mut best: Option<f64> = None;
    let n = polygon.len();
    for k in 0..n {
        let p = polygon[k];
        let q = polygon[(k + 1) % n];
        let e = [q[0] - p[0], q[1] - p[1]];
        let w = [p[0] - origin[0], p[1] - origin[1]];
        let den = dir[0] * e[1] - dir[1] * e[0];
        if den.abs() < 1e-12 {
            continue;
        }
        let t = (w[0] * e[1] - w[1] * e[0]) / den;
        let s = (w[0] * dir[1] - w[1] * dir[0]) / den;
        if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) && best.is_none_or(|b| t > b) {
            best = Some(t);
        }
    }
    best
}

/// Even-odd point-in-polygon test.
pub(crate) fn contains(polygon: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = polygon.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Radius of the polygon on every ray of `web` (outermost crossing).
pub fn sample_polygon_on_rays(shape: &RingShape, web: &SpiderWeb) -> Result<Ring, EvalError> {
    if shape.points.len() < 3 || !contains(&shape.points, web.center()) {
        return Err(EvalError::CenterOutsidePolygon);
    }
    let radii = (0..web.nb_rays())
        .map(|i| ray_polygon_distance(web.center(), web.direction(i), &shape.points).ok_or(EvalError::CenterOutsidePolygon))
        .collect::<Result<Vec<f64>, _>>()?;
    Ring::from_radii(web, radii, RingSource::GroundTruth).map_err(|_| EvalError::CenterOutsidePolygon)
}

/// Distance from the web center to the image border along every ray.
pub fn image_section_bound(web: &SpiderWeb, width: u32, height: u32) -> Vec<f64> {
    let [cx, cy] = web.center();
    let (w, h) = (width as f64, height as f64);
    (0..web.nb_rays())
        .map(|i| {
            let [dx, dy] = web.direction(i);
            let tx = if dx > 1e-12 {
                (w - cx) / dx
            } else if dx < -1e-12 {
                -cx / dx
            } else {
                f64::INFINITY
            };
            let ty = if dy > 1e-12 {
                (h - cy) / dy
            } else if dy < -1e-12 {
                -cy / dy
            } else {
                f64::INFINITY
            };
            tx.min(ty).max(0.0)
        })
        .collect()
}

/// Band boundaries per ray: for ray `i`, band `g` is
/// `[bounds[i][g], bounds[i][g + 1])`, the last band closed at the section
/// bound. Radii beyond the bound fall in the last band.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMap {
    bounds: Vec<Vec<f64>>,
}

impl InfluenceMap {
    pub fn nb_rings(&self) -> usize {
        self.bounds.first().map_or(0, |b| b.len() - 1)
    }

    pub fn nb_rays(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self, ray: usize) -> &[f64] {
        &self.bounds[ray]
    }

    /// Index of the band holding `radius` on `ray`.
    pub fn band_of(&self, ray: usize, radius: f64) -> Option<usize> {
        let b = &self.bounds[ray];
        if b.len() < 2 || radius < 0.0 {
            return None;
        }
        let k = b[1..].partition_point(|&hi| hi <= radius);
        Some(k.min(b.len() - 2))
    }
}

/// Influence bands of `gt` (sorted innermost first). `section_bound` gives
/// the outer limit per ray.
pub fn build_influence_map(gt: &[Ring], web: &SpiderWeb, section_bound: &[f64]) -> Result<InfluenceMap, EvalError> {
    let nr = web.nb_rays();
    for g in gt {
        check_rays(g, nr)?;
    }
    if section_bound.len() != nr {
        return Err(EvalError::RayCountMismatch {
            expected: nr,
            found: section_bound.len(),
        });
    }
    let mut bounds = Vec::with_capacity(nr);
    for (i, &outer) in section_bound.iter().enumerate() {
        let mut b = Vec::with_capacity(gt.len() + 1);
        b.push(0.0);
        for k in 1..gt.len() {
            let (r0, r1) = (gt[k - 1].radii[i], gt[k].radii[i]);
            if r1 <= r0 {
                return Err(EvalError::CrossingGTRings {
                    ray: i,
                    inner: k - 1,
                    outer: k,
                });
            }
            b.push(0.5 * (r0 + r1));
        }
        let last = gt.last().map_or(0.0, |g| g.radii[i]);
        b.push(outer.max(last));
        bounds.push(b);
    }
    Ok(InfluenceMap { bounds })
}

fn check_rays(ring: &Ring, nr: usize) -> Result<(), EvalError> {
    if ring.nb_rays() != nr {
        return Err(EvalError::RayCountMismatch {
            expected: nr,
            found: ring.nb_rays(),
        });
    }
    Ok(())
}

/// Root mean square of the per-ray radial differences.
pub fn rmse(d: &Ring, g: &Ring) -> f64 {
    assert_eq!(d.nb_rays(), g.nb_rays(), "rings sampled on different webs");
    let sum: f64 = d.radii.iter().zip(&g.radii).map(|(a, b)| (a - b) * (a - b)).sum();
    (sum / d.nb_rays() as f64).sqrt()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// (detection index, gt index), sorted by gt index.
    pub matches: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
}

impl Assignment {
    pub fn tp(&self) -> usize {
        self.matches.len()
    }

    pub fn fp(&self) -> usize {
        self.false_positives.len()
    }

    pub fn fn_count(&self) -> usize {
        self.false_negatives.len()
    }

    pub fn detection_of(&self, gt: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.1 == gt).map(|m| m.0)
    }
}

/// Band holding the most nodes of `d`, with the count.
fn dominant_band(d: &Ring, map: &InfluenceMap) -> Option<(usize, usize)> {
    let mut counts = vec![0usize; map.nb_rings()];
    for (i, &r) in d.radii.iter().enumerate() {
        if let Some(b) = map.band_of(i, r) {
            counts[b] += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(g, &c)| (g, c))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Match detections to GT rings through the influence map of `gt`.
/// `gt` must be sorted innermost first.
pub fn assign(
    detections: &[Ring],
    gt: &[Ring],
    map: &InfluenceMap,
    th: f64,
) -> Assignment {
    let nr = map.nb_rays() as f64;
    let mut best: Vec<Option<(usize, f64)>> = vec![None; gt.len()];
    for (di, d) in detections.iter().enumerate() {
        let Some((g, count)) = dominant_band(d, map) else {
            continue;
        };
        if (count as f64) <= th * nr {
            continue;
        }
        let e = rmse(d, &gt[g]);
        let better = match best[g] {
            None => true,
            Some((bi, be)) => e
                .total_cmp(&be)
                .then_with(|| lex_cmp(&d.radii, &detections[bi].radii))
                .then(di.cmp(&bi))
                .is_lt(),
        };
        if better {
            best[g] = Some((di, e));
        }
    }
    let mut out = Assignment::default();
    let mut matched = vec![false; detections.len()];
    for (g, b) in best.iter().enumerate() {
        match b {
            Some((d, _)) => {
                out.matches.push((*d, g));
                matched[*d] = true;
            }
            None => out.false_negatives.push(g),
        }
    }
    out.false_positives = (0..detections.len()).filter(|&d| !matched[d]).collect();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    /// RMSE of each match, in the order of `Assignment::matches`.
    pub rmse_per_ring: Vec<f64>,
    /// Mean of `rmse_per_ring`; absent without matches.
    pub rmse_overall: Option<f64>,
    pub exec_time: Option<f64>,
}

/// Precision, recall and F-score of an assignment. `rmse_values` holds one
/// value per match.
pub fn score(assignment: &Assignment, rmse_values: &[f64]) -> Result<EvalReport, EvalError> {
    let (tp, fp, fn_count) = (assignment.tp(), assignment.fp(), assignment.fn_count());
    if tp + fp == 0 || tp + fn_count == 0 {
        return Err(EvalError::UndefinedScore);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_count) as f64;
    let fscore = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let rmse_overall = (!rmse_values.is_empty()).then(|| rmse_values.iter().sum::<f64>() / rmse_values.len() as f64);
    Ok(EvalReport {
        tp,
        fp,
        fn_count,
        precision,
        recall,
        fscore,
        rmse_per_ring: rmse_values.to_vec(),
        rmse_overall,
        exec_time: None,
    })
}

/// Two-decimal rendering of a score as in the published tables: rounded to
/// three decimals first, then half-up to two (19/21 shows as 0.91).
pub fn table_round(x: f64) -> String {
    let x3 = (x * 1000.0).round() / 1000.0;
    format!("{:.2}", (x3 * 100.0 + 1e-9).round() / 100.0)
}

/// Rings sorted innermost first by mean radius.
pub fn sort_rings(rings: &mut [Ring]) {
    rings.sort_by(|a, b| a.mean_radius().total_cmp(&b.mean_radius()));
}

/// Assignment and score of `detections` against `gt` in one call. Both ring
/// lists are sorted innermost first in place.
pub fn evaluate(
    detections: &mut [Ring],
    gt: &mut [Ring],
    web: &SpiderWeb,
    section_bound: &[f64],
    th: f64,
) -> Result<(Assignment, Result<EvalReport, EvalError>), EvalError> {
    for d in detections.iter() {
        check_rays(d, web.nb_rays())?;
    }
    sort_rings(detections);
    sort_rings(gt);
    let map = build_influence_map(gt, web, section_bound)?;
    let a = assign(detections, gt, &map, th);
    let errs: Vec<f64> = a.matches.iter().map(|&(d, g)| rmse(&detections[d], &gt[g])).collect();
    let report = score(&a, &errs);
    Ok((a, report))
}

/// Per-ray mean across experts of the rings matched by radial order.
pub fn consensus_gt(experts: &[Vec<Ring>], web: &SpiderWeb) -> Result<Vec<Ring>, EvalError> {
    let first = experts.first().ok_or(EvalError::NoExperts)?;
    let n = first.len();
    let mut sorted = Vec::with_capacity(experts.len());
    for e in experts {
        if e.len() != n {
            return Err(EvalError::RingCountMismatch {
                expected: n,
                found: e.len(),
            });
        }
        for r in e {
            check_rays(r, web.nb_rays())?;
        }
        let mut e = e.clone();
        sort_rings(&mut e);
        sorted.push(e);
    }
    let k = experts.len() as f64;
    (0..n)
        .map(|ring| {
            let radii = (0..web.nb_rays())
                .map(|i| sorted.iter().map(|e| e[ring].radii[i]).sum::<f64>() / k)
                .collect();
            Ring::from_radii(web, radii, RingSource::GroundTruth).map_err(|_| EvalError::CenterOutsidePolygon)
        })
        .collect()
}

/// RMS of the radial differences between an expert and the consensus,
/// pooled over every node of every ring.
pub fn expert_rms(expert: &[Ring], consensus: &[Ring]) -> Result<f64, EvalError> {
    if expert.len() != consensus.len() {
        return Err(EvalError::RingCountMismatch {
            expected: consensus.len(),
            found: expert.len(),
        });
    }
    let mut e = expert.to_vec();
    let mut c = consensus.to_vec();
    sort_rings(&mut e);
    sort_rings(&mut c);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in e.iter().zip(&c) {
        check_rays(a, b.nb_rays())?;
        for (x, y) in a.radii.iter().zip(&b.radii) {
            sum += (x - y) * (x - y);
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { (sum / count as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn web(nr: usize) -> SpiderWeb {
        SpiderWeb::new([100.0, 100.0], nr).unwrap()
    }

    fn const_ring(web: &SpiderWeb, r: f64) -> Ring {
        Ring::from_radii(web, vec![r; web.nb_rays()], RingSource::GroundTruth).unwrap()
    }

    fn shape(points: Vec<[f64; 2]>) -> RingShape {
        RingShape { label: None, points }
    }

    #[test]
    fn square_sampling() {
        let w = web(8);
        let a = 10.0;
        let sq = shape(vec![[90.0, 90.0], [110.0, 90.0], [110.0, 110.0], [90.0, 110.0]]);
        let ring = sample_polygon_on_rays(&sq, &w).unwrap();
        for (i, r) in ring.radii.iter().enumerate() {
            let expected = if i % 2 == 0 { a } else { a * 2f64.sqrt() };
            assert!((r - expected).abs() < 1e-9, "ray {i}: {r}");
        }
    }

    #[test]
    fn circle_sampling() {
        let w = web(360);
        let pts = (0..2000)
            .map(|k| {
                let t = k as f64 * 2.0 * PI / 2000.0;
                [100.0 + 40.0 * t.cos(), 100.0 + 40.0 * t.sin()]
            })
            .collect();
        let ring = sample_polygon_on_rays(&shape(pts), &w).unwrap();
        assert!(ring.radii.iter().all(|r| (r - 40.0).abs() < 0.01));
    }

    #[test]
    fn center_outside_is_rejected() {
        let w = web(8);
        let off = shape(vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]);
        assert!(matches!(sample_polygon_on_rays(&off, &w), Err(EvalError::CenterOutsidePolygon)));
    }

    #[test]
    fn midpoint_bands() {
        let w = web(16);
        let map = build_influence_map(&[const_ring(&w, 10.0), const_ring(&w, 20.0)], &w, &[50.0; 16]).unwrap();
        for i in 0..16 {
            assert_eq!(map.bounds(i), &[0.0, 15.0, 50.0]);
        }
        assert_eq!(map.band_of(0, 14.9), Some(0));
        assert_eq!(map.band_of(0, 15.0), Some(1));
        assert_eq!(map.band_of(0, 80.0), Some(1));

        let single = build_influence_map(&[const_ring(&w, 10.0)], &w, &[50.0; 16]).unwrap();
        assert_eq!(single.bounds(3), &[0.0, 50.0]);
    }

    #[test]
    fn crossing_gt_is_rejected() {
        let w = web(4);
        let a = Ring::from_radii(&w, vec![10.0, 10.0, 10.0, 10.0], RingSource::GroundTruth).unwrap();
        let b = Ring::from_radii(&w, vec![20.0, 5.0, 20.0, 20.0], RingSource::GroundTruth).unwrap();
        assert!(matches!(
            build_influence_map(&[a, b], &w, &[50.0; 4]),
            Err(EvalError::CrossingGTRings { ray: 1, .. })
        ));
    }

    #[test]
    fn rmse_by_hand() {
        let w = web(4);
        let d = Ring::from_radii(&w, vec![13.0, 14.0, 10.0, 10.0], RingSource::Detected).unwrap();
        let g = const_ring(&w, 10.0);
        assert!((rmse(&d, &g) - 2.5).abs() < 1e-12);
        assert_eq!(rmse(&g, &g), 0.0);
    }

    #[test]
    fn identical_detection_is_tp() {
        let w = web(16);
        let gt = vec![const_ring(&w, 10.0), const_ring(&w, 20.0)];
        let map = build_influence_map(&gt, &w, &[50.0; 16]).unwrap();
        let a = assign(&gt, &gt, &map, 0.6);
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        assert!(a.false_positives.is_empty() && a.false_negatives.is_empty());
    }

    #[test]
    fn half_in_band_is_fp() {
        let w = web(16);
        let gt = vec![const_ring(&w, 10.0), const_ring(&w, 20.0)];
        let map = build_influence_map(&gt, &w, &[50.0; 16]).unwrap();
        let radii = (0..16).map(|i| if i < 8 { 10.0 } else { 20.0 }).collect();
        let d = Ring::from_radii(&w, radii, RingSource::Detected).unwrap();
        let a = assign(&[d], &gt, &map, 0.6);
        assert_eq!(a.false_positives, vec![0]);
        assert_eq!(a.false_negatives, vec![0, 1]);
    }

    #[test]
    fn closer_detection_wins() {
        let w = web(16);
        let gt = vec![const_ring(&w, 20.0)];
        let map = build_influence_map(&gt, &w, &[50.0; 16]).unwrap();
        let a = assign(&[const_ring(&w, 23.0), const_ring(&w, 21.0)], &gt, &map, 0.6);
        assert_eq!(a.matches, vec![(1, 0)]);
        assert_eq!(a.false_positives, vec![0]);
    }

    #[test]
    fn score_table_row() {
        let a = Assignment {
            matches: (0..19).map(|k| (k, k)).collect(),
            false_positives: vec![19],
            false_negatives: vec![19, 20],
        };
        let r = score(&a, &[1.0; 19]).unwrap();
        let shown: Vec<String> = [r.precision, r.recall, r.fscore].iter().map(|&v| table_round(v)).collect();
        assert_eq!(shown.join(" "), "0.95 0.91 0.93");
        assert!((r.recall - 19.0 / 21.0).abs() < 1e-12);

        let perfect = Assignment {
            matches: vec![(0, 0)],
            ..Default::default()
        };
        let r = score(&perfect, &[0.0]).unwrap();
        assert_eq!((r.precision, r.recall, r.fscore), (1.0, 1.0, 1.0));

        let empty = Assignment {
            false_negatives: vec![0],
            ..Default::default()
        };
        assert!(matches!(score(&empty, &[]), Err(EvalError::UndefinedScore)));
    }

    #[test]
    fn consensus_and_expert_rms() {
        let w = web(16);
        let e1 = vec![const_ring(&w, 10.0)];
        let e2 = vec![const_ring(&w, 12.0)];
        let c = consensus_gt(&[e1.clone(), e2.clone()], &w).unwrap();
        assert!(c[0].radii.iter().all(|&r| r == 11.0));
        assert_eq!(consensus_gt(std::slice::from_ref(&e1), &w).unwrap(), e1);
        assert!((expert_rms(&e1, &c).unwrap() - 1.0).abs() < 1e-12);
        assert!((expert_rms(&e2, &c).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(expert_rms(&c, &c).unwrap(), 0.0);

        let e3 = vec![const_ring(&w, 10.0), const_ring(&w, 20.0)];
        assert!(matches!(
            consensus_gt(&[e1, e3], &w),
            Err(EvalError::RingCountMismatch { expected: 1, found: 2 })
        ));
    }

    fn star(web: &SpiderWeb, radii: &[f64]) -> RingShape {
        let n = radii.len();
        let c = web.center();
        shape(
            radii
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let t = k as f64 * 2.0 * PI / n as f64 + 0.013;
                    [c[0] + r * t.cos(), c[1] + r * t.sin()]
                })
                .collect(),
        )
    }

    /// Farthest polygon point on the ray, found by marching outward.
    fn march(shape: &RingShape, origin: [f64; 2], dir: [f64; 2]) -> f64 {
        let mut last_inside = 0.0;
        let mut t = 0.0;
        while t < 400.0 {
            if contains(&shape.points, [origin[0] + t * dir[0], origin[1] + t * dir[1]]) {
                last_inside = t;
            }
            t += 0.01;
        }
        last_inside
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn star_sampling_matches_marching(radii in prop::collection::vec(20.0f64..80.0, 5..40)) {
            let w = web(32);
            let s = star(&w, &radii);
            let ring = sample_polygon_on_rays(&s, &w).unwrap();
            for i in 0..32 {
                let m = march(&s, w.center(), w.direction(i));
                prop_assert!((ring.radii[i] - m).abs() < 0.1, "ray {}: {} vs {}", i, ring.radii[i], m);
            }
        }

        #[test]
        fn bands_match_nearest_ring(mut rs in prop::collection::vec(5.0f64..90.0, 3), probes in prop::collection::vec(0.0f64..100.0, 50)) {
            rs.sort_by(f64::total_cmp);
            prop_assume!(rs[1] - rs[0] > 1e-6 && rs[2] - rs[1] > 1e-6);
            let w = web(8);
            let gt: Vec<Ring> = rs.iter().map(|&r| const_ring(&w, r)).collect();
            let map = build_influence_map(&gt, &w, &[100.0; 8]).unwrap();
            for &p in &probes {
                let nearest = (0..3)
                    .min_by(|&a, &b| (rs[a] - p).abs().total_cmp(&(rs[b] - p).abs()).then(b.cmp(&a)))
                    .unwrap();
                prop_assert_eq!(map.band_of(0, p), Some(nearest));
            }
            let b = map.bounds(0);
            prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(b[0], 0.0);
            prop_assert_eq!(b[3], 100.0);
        }

        #[test]
        fn assign_is_permutation_invariant(
            ds in prop::collection::vec(prop::collection::vec(5.0f64..60.0, 8), 0..6),
            seed in 0u64..1000,
        ) {
            let w = web(8);
            let gt: Vec<Ring> = [10.0, 25.0, 40.0].iter().map(|&r| const_ring(&w, r)).collect();
            let map = build_influence_map(&gt, &w, &[70.0; 8]).unwrap();
            let dets: Vec<Ring> = ds.into_iter().map(|r| Ring::from_radii(&w, r, RingSource::Detected).unwrap()).collect();
            let a = assign(&dets, &gt, &map, 0.6);
            prop_assert_eq!(a.tp() + a.fn_count(), gt.len());
            prop_assert_eq!(a.tp() + a.fp(), dets.len());

            let mut perm: Vec<usize> = (0..dets.len()).collect();
            let n = perm.len();
            for k in 0..n {
                perm.swap(k, (seed as usize + k * 7) % n);
            }
            let shuffled: Vec<Ring> = perm.iter().map(|&k| dets[k].clone()).collect();
            let b = assign(&shuffled, &gt, &map, 0.6);
            let radii_of = |a: &Assignment, ds: &[Ring]| -> Vec<(usize, Vec<f64>)> {
                a.matches.iter().map(|&(d, g)| (g, ds[d].radii.clone())).collect()
            };
            prop_assert_eq!(radii_of(&a, &dets), radii_of(&b, &shuffled));
            prop_assert_eq!(a.false_negatives, b.false_negatives);
        }

        #[test]
        fn one_node_perturbation_bound(radii in prop::collection::vec(5.0f64..60.0, 16), eps in 0.0f64..5.0, k in 0usize..16) {
            let w = web(16);
            let g = const_ring(&w, 30.0);
            let d = Ring::from_radii(&w, radii.clone(), RingSource::Detected).unwrap();
            let mut moved = radii;
            moved[k] += eps;
            let d2 = Ring::from_radii(&w, moved, RingSource::Detected).unwrap();
            prop_assert!((rmse(&d, &g) - rmse(&d2, &g)).abs() <= eps / 4.0 + 1e-9);
            prop_assert!((rmse(&d, &g) - rmse(&g, &d)).abs() < 1e-12);
        }
    }
}
