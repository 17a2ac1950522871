//! Hausdorff content `HC_n` and its ζ-restricted variant as a weighted
//! ball-cover problem over a finite space.
//!
//! Covers use balls centered at points of the space. Radii are floored at the
//! mesh resolution `h` and capped at ζ; for each center the candidate radii
//! are `h` together with the distances from that center to target points.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, PointSet};

/// Largest target the exact solver accepts by default.
pub const DEFAULT_EXACT_BUDGET: usize = 16;
/// Hard ceiling on the exact solver's subset table (2^24 entries).
pub const MAX_EXACT_BUDGET: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Greedy,
}

/// Which solver a caller wants for an auxiliary content computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentMode {
    Exact,
    Greedy,
    /// Exact when the target fits the default budget, greedy otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

/// A ball cover witnessing an upper bound on the content of a target set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentEstimate {
    pub cover: Vec<Ball>,
    pub value: f64,
    pub n: u32,
    /// Radius cap; `None` is unrestricted.
    pub zeta: Option<f64>,
    pub mesh_floor: f64,
    pub method: Method,
    pub is_upper_bound: bool,
}

impl ContentEstimate {
    fn from_cover(mut cover: Vec<Ball>, n: u32, zeta: Option<f64>, mesh_floor: f64, method: Method) -> Self {
        cover.sort_by(|a, b| a.center.cmp(&b.center).then(a.radius.total_cmp(&b.radius)));
        // An empty f64 sum is -0.0.
        let value = cover.iter().map(|b| cost(b.radius, n)).sum::<f64>() + 0.0;
        ContentEstimate { cover, value, n, zeta, mesh_floor, method, is_upper_bound: true }
    }

    pub(crate) fn empty(n: u32, zeta: Option<f64>, mesh_floor: f64, method: Method) -> Self {
        Self::from_cover(Vec::new(), n, zeta, mesh_floor, method)
    }

    pub fn cap(&self) -> f64 {
        cap(self.zeta)
    }
}

#[inline]
pub(crate) fn cap(zeta: Option<f64>) -> f64 {
    zeta.unwrap_or(f64::INFINITY)
}

#[inline]
pub(crate) fn cost(radius: f64, n: u32) -> f64 {
    radius.powi(n as i32)
}

/// `max(r, h)^n`: the content bound of a single ball of radius `r`.
pub fn single_ball_bound(space: &FiniteMetricSpace, x: usize, r: f64, n: u32) -> Result<f64> {
    space.check_id(x)?;
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {r}")));
    }
    Ok(cost(r.max(space.mesh_h()), n))
}

/// True iff every target point lies in a cover ball and every radius is in
/// `[mesh_floor, zeta]`.
pub fn verify_cover(space: &FiniteMetricSpace, target: &PointSet, estimate: &ContentEstimate) -> bool {
    if estimate.mesh_floor < space.mesh_h() {
        return false;
    }
    let zcap = estimate.cap();
    for b in &estimate.cover {
        if b.center >= space.len() || !(b.radius >= estimate.mesh_floor) || b.radius > zcap {
            return false;
        }
    }
    target.iter().all(|p| p < space.len() && estimate.cover.iter().any(|b| space.dist(b.center, p) <= b.radius))
}

fn check_zeta(space: &FiniteMetricSpace, zeta: Option<f64>) -> Result<()> {
    match zeta {
        Some(z) if !(z >= space.mesh_h()) => Err(Error::Infeasible { zeta: z, mesh_h: space.mesh_h() }),
        _ => Ok(()),
    }
}

/// Target points reachable from one center, nearest first, as
/// `(index into target, distance)`.
struct CenterList {
    center: usize,
    entries: Vec<(usize, f64)>,
}

fn center_lists(space: &FiniteMetricSpace, target: &PointSet, zeta: Option<f64>) -> Vec<CenterList> {
    let mut index = vec![usize::MAX; space.len()];
    for (i, p) in target.iter().enumerate() {
        index[p] = i;
    }
    match zeta {
        Some(z) => {
            let near = space.near(z);
            let mut is_center = vec![false; space.len()];
            for t in target.iter() {
                for (c, _) in near.within(t, z) {
                    is_center[c] = true;
                }
            }
            (0..space.len())
                .filter(|&c| is_center[c])
                .map(|c| CenterList {
                    center: c,
                    entries: near.within(c, z).filter(|&(q, _)| index[q] != usize::MAX).map(|(q, d)| (index[q], d)).collect(),
                })
                .collect()
        }
        None => (0..space.len())
            .map(|c| {
                let row = space.row(c);
                let mut entries: Vec<(usize, f64)> = target.iter().map(|q| (index[q], row[q])).collect();
                entries.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                CenterList { center: c, entries }
            })
            .collect(),
    }
}

/// Minimal `Σ rᵢⁿ` over covers drawn from the candidate family, with the
/// default size budget.
pub fn exact_content(space: &FiniteMetricSpace, target: &PointSet, n: u32, zeta: Option<f64>) -> Result<ContentEstimate> {
    exact_content_with_budget(space, target, n, zeta, DEFAULT_EXACT_BUDGET)
}

pub fn exact_content_with_budget(
    space: &FiniteMetricSpace,
    target: &PointSet,
    n: u32,
    zeta: Option<f64>,
    budget: usize,
) -> Result<ContentEstimate> {
    space.check_set(target)?;
    check_zeta(space, zeta)?;
    let budget = budget.min(MAX_EXACT_BUDGET);
    let m = target.len();
    if m > budget {
        return Err(Error::BudgetExceeded { size: m, budget });
    }
    let h = space.mesh_h();
    if m == 0 {
        return Ok(ContentEstimate::empty(n, zeta, h, Method::Exact));
    }

    // Distinct coverage masks, each with its cheapest (center, radius).
    let mut best: HashMap<u32, (f64, usize, f64)> = HashMap::new();
    for list in center_lists(space, target, zeta) {
        let mut mask = 0u32;
        let mut k = 0;
        while k < list.entries.len() {
            let radius = list.entries[k].1.max(h);
            while k < list.entries.len() && list.entries[k].1 <= radius {
                mask |= 1 << list.entries[k].0;
                k += 1;
            }
            let c = cost(radius, n);
            let entry = best.entry(mask).or_insert((c, list.center, radius));
            if c < entry.0 || (c == entry.0 && (list.center, radius.to_bits()) < (entry.1, entry.2.to_bits())) {
                *entry = (c, list.center, radius);
            }
        }
    }
    let mut cands: Vec<(u32, f64, usize, f64)> = best.into_iter().map(|(mask, (c, ctr, r))| (mask, c, ctr, r)).collect();
    cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)).then(a.3.total_cmp(&b.3)).then(a.0.cmp(&b.0)));

    let mut by_bit: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, c) in cands.iter().enumerate() {
        for (bit, list) in by_bit.iter_mut().enumerate() {
            if c.0 >> bit & 1 == 1 {
                list.push(i);
            }
        }
    }

    // f[S] = cheapest cover of S; branch on the lowest uncovered point.
    let full = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let size = full as usize + 1;
    let mut f = vec![f64::INFINITY; size];
    let mut choice = vec![u32::MAX; size];
    f[0] = 0.0;
    for s in 1..size {
        let low = (s as u32).trailing_zeros() as usize;
        let mut bestv = f64::INFINITY;
        let mut bestc = u32::MAX;
        for &ci in &by_bit[low] {
            let rest = (s as u32) & !cands[ci].0;
            let v = cands[ci].1 + f[rest as usize];
            if v < bestv {
                bestv = v;
                bestc = ci as u32;
            }
        }
        f[s] = bestv;
        choice[s] = bestc;
    }
    if !f[full as usize].is_finite() {
        // Unreachable when zeta >= h: every point covers itself.
        return Err(Error::Infeasible { zeta: cap(zeta), mesh_h: h });
    }
    let mut cover = Vec::new();
    let mut s = full;
    while s != 0 {
        let c = &cands[choice[s as usize] as usize];
        cover.push(Ball { center: c.2, radius: c.3 });
        s &= !c.0;
    }
    Ok(ContentEstimate::from_cover(cover, n, zeta, h, Method::Exact))
}

#[derive(Clone, Copy)]
struct HeapKey {
    gain: usize,
    cost: f64,
    center: usize,
}

impl HeapKey {
    fn ratio_cmp(&self, other: &Self) -> Ordering {
        // gain/cost vs other.gain/other.cost without division.
        (self.gain as f64 * other.cost).total_cmp(&(other.gain as f64 * self.cost))
    }
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ratio_cmp(other).then(other.center.cmp(&self.center))
    }
}

/// Best (gain, radius) for one center: maximal newly-covered / radiusⁿ,
/// smallest radius on ties.
fn best_for_center(list: &CenterList, covered: &[bool], h: f64, n: u32) -> Option<(usize, f64, f64)> {
    let mut gain = 0usize;
    let mut best: Option<(usize, f64, f64)> = None;
    let mut k = 0;
    while k < list.entries.len() {
        let radius = list.entries[k].1.max(h);
        while k < list.entries.len() && list.entries[k].1 <= radius {
            if !covered[list.entries[k].0] {
                gain += 1;
            }
            k += 1;
        }
        if gain == 0 {
            continue;
        }
        let c = cost(radius, n);
        let better = match best {
            None => true,
            Some((g, bc, _)) => (gain as f64 * bc) > (g as f64 * c),
        };
        if better {
            best = Some((gain, c, radius));
        }
    }
    best
}

/// Greedy cover: repeatedly take the (center, radius) with the largest
/// newly-covered count per unit cost. Ties go to the lowest center id, then
/// the smallest radius.
pub fn greedy_content(space: &FiniteMetricSpace, target: &PointSet, n: u32, zeta: Option<f64>) -> Result<ContentEstimate> {
    space.check_set(target)?;
    check_zeta(space, zeta)?;
    let h = space.mesh_h();
    let m = target.len();
    if m == 0 {
        return Ok(ContentEstimate::empty(n, zeta, h, Method::Greedy));
    }
    let lists = center_lists(space, target, zeta);
    let mut covered = vec![false; m];
    let mut remaining = m;
    let mut heap = BinaryHeap::with_capacity(lists.len());
    for (i, list) in lists.iter().enumerate() {
        if let Some((gain, c, _)) = best_for_center(list, &covered, h, n) {
            heap.push((HeapKey { gain, cost: c, center: list.center }, i));
        }
    }
    let mut cover = Vec::new();
    while remaining > 0 {
        let Some((_, i)) = heap.pop() else { break };
        let list = &lists[i];
        let Some((gain, c, radius)) = best_for_center(list, &covered, h, n) else { continue };
        let key = HeapKey { gain, cost: c, center: list.center };
        if let Some((top, _)) = heap.peek() {
            if key < *top {
                heap.push((key, i));
                continue;
            }
        }
        for &(q, d) in &list.entries {
            if d > radius {
                break;
            }
            if !covered[q] {
                covered[q] = true;
                remaining -= 1;
            }
        }
        cover.push(Ball { center: list.center, radius });
        if let Some((gain, c, _)) = best_for_center(list, &covered, h, n) {
            heap.push((HeapKey { gain, cost: c, center: list.center }, i));
        }
    }
    debug_assert_eq!(remaining, 0);
    Ok(ContentEstimate::from_cover(cover, n, zeta, h, Method::Greedy))
}

/// Content with the solver chosen by `mode`.
pub fn content(
    space: &FiniteMetricSpace,
    target: &PointSet,
    n: u32,
    zeta: Option<f64>,
    mode: ContentMode,
) -> Result<ContentEstimate> {
    match mode {
        ContentMode::Exact => exact_content(space, target, n, zeta),
        ContentMode::Greedy => greedy_content(space, target, n, zeta),
        ContentMode::Auto if target.len() <= DEFAULT_EXACT_BUDGET => exact_content(space, target, n, zeta),
        ContentMode::Auto => greedy_content(space, target, n, zeta),
    }
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Exhaustive content by enumerating set partitions of the target: every
    //! cover induces a partition (assign each point to one ball covering it),
    //! and the cheapest single ball for a block is a min over centers.
    use super::*;

    pub fn block_cost(space: &FiniteMetricSpace, block: &[usize], n: u32, zeta: Option<f64>) -> f64 {
        let h = space.mesh_h();
        let zcap = cap(zeta);
        let mut best = f64::INFINITY;
        for c in 0..space.len() {
            let r = block.iter().map(|&p| space.dist(c, p)).fold(h, f64::max);
            if r <= zcap {
                best = best.min(cost(r, n));
            }
        }
        best
    }

    pub fn partition_content(space: &FiniteMetricSpace, target: &PointSet, n: u32, zeta: Option<f64>) -> f64 {
        let pts = target.ids();
        let m = pts.len();
        if m == 0 {
            return 0.0;
        }
        let block: Vec<f64> = (0..(1u32 << m))
            .map(|mask| {
                let b: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| pts[i]).collect();
                if b.is_empty() { 0.0 } else { block_cost(space, &b, n, zeta) }
            })
            .collect();
        // Restricted-growth enumeration of set partitions.
        fn rec(i: usize, m: usize, blocks: &mut Vec<u32>, block: &[f64], best: &mut f64) {
            if i == m {
                let total: f64 = blocks.iter().map(|&b| block[b as usize]).sum();
                if total < *best {
                    *best = total;
                }
                return;
            }
            for k in 0..blocks.len() {
                blocks[k] |= 1 << i;
                rec(i + 1, m, blocks, block, best);
                blocks[k] &= !(1 << i);
            }
            blocks.push(1 << i);
            rec(i + 1, m, blocks, block, best);
            blocks.pop();
        }
        let mut best = f64::INFINITY;
        rec(0, m, &mut Vec::new(), &block, &mut best);
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn line(n: usize, h: f64) -> FiniteMetricSpace {
        let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect()).collect();
        FiniteMetricSpace::from_distance_matrix(&m, h).unwrap()
    }

    /// Integer-valued ℓ1 metric: content sums stay exact in f64.
    fn random_space(seed: u64, n: usize) -> FiniteMetricSpace {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(i32, i32)> = (0..n).map(|_| (rng.gen_range(0..8), rng.gen_range(0..8))).collect();
        let m: Vec<Vec<f64>> =
            pts.iter().map(|a| pts.iter().map(|b| ((a.0 - b.0).abs() + (a.1 - b.1).abs()) as f64).collect()).collect();
        FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap()
    }

    #[test]
    fn singleton_costs_the_mesh_floor() {
        let s = line(3, 0.5);
        let t = PointSet::from(vec![1]);
        let e = exact_content(&s, &t, 1, None).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.cover, vec![Ball { center: 1, radius: 0.5 }]);
        let g = greedy_content(&s, &t, 2, None).unwrap();
        assert_eq!(g.value, 0.25);
    }

    #[test]
    fn line_of_three() {
        let s = line(3, 0.5);
        let t = s.all_points();
        assert_eq!(oracle::partition_content(&s, &t, 1, None), 1.0);
        let e = exact_content(&s, &t, 1, None).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.cover, vec![Ball { center: 1, radius: 1.0 }]);

        assert_eq!(oracle::partition_content(&s, &t, 1, Some(0.6)), 1.5);
        let e = exact_content(&s, &t, 1, Some(0.6)).unwrap();
        assert_eq!(e.value, 1.5);
        assert!(e.cover.iter().all(|b| b.radius == 0.5));

        let g = greedy_content(&s, &t, 1, None).unwrap();
        assert_eq!(g.value, 1.0);
        assert_eq!(g.cover, vec![Ball { center: 1, radius: 1.0 }]);
    }

    #[test]
    fn verify_cover_cases() {
        let m = vec![vec![0.0, 5.0], vec![5.0, 0.0]];
        let s = FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap();
        let one = ContentEstimate::from_cover(vec![Ball { center: 0, radius: 1.0 }], 1, None, 1.0, Method::Greedy);
        assert!(verify_cover(&s, &PointSet::from(vec![0]), &one));
        assert!(!verify_cover(&s, &PointSet::from(vec![0, 1]), &one));
        let tiny = ContentEstimate::from_cover(vec![Ball { center: 0, radius: 0.5 }], 1, None, 0.5, Method::Greedy);
        assert!(!verify_cover(&s, &PointSet::from(vec![0]), &tiny));
    }

    #[test]
    fn exact_outputs_verify() {
        for seed in 0..10 {
            let s = random_space(seed, 8);
            let t = s.all_points();
            let e = exact_content(&s, &t, 2, None).unwrap();
            assert!(verify_cover(&s, &t, &e));
        }
    }

    #[test]
    fn errors() {
        let s = line(20, 1.0);
        assert!(matches!(exact_content(&s, &s.all_points(), 1, None), Err(Error::BudgetExceeded { .. })));
        assert!(matches!(exact_content(&s, &PointSet::from(vec![1]), 1, Some(0.5)), Err(Error::Infeasible { .. })));
        assert!(matches!(greedy_content(&s, &PointSet::from(vec![1]), 1, Some(0.5)), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn single_ball() {
        let s = line(5, 0.5);
        assert_eq!(single_ball_bound(&s, 0, 0.0, 3).unwrap(), 0.125);
        assert_eq!(single_ball_bound(&s, 0, 2.0, 2).unwrap(), 4.0);
        // Grid net, h = 1: exact content of a radius-2 ball in dimension 2.
        let pts: Vec<(i32, i32)> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).collect();
        let m: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| pts.iter().map(|b| (((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as f64).sqrt()).collect())
            .collect();
        let g = FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap();
        let ball = g.ball(12, 2.0);
        assert_eq!(ball.len(), 13);
        let e = exact_content(&g, &ball, 2, None).unwrap();
        assert!(e.value <= single_ball_bound(&g, 12, 2.0, 2).unwrap());
    }

    #[test]
    fn greedy_dominates_exact_on_twelve_points() {
        for seed in 0..20 {
            let s = random_space(100 + seed, 12);
            let t = s.all_points();
            for n in 1..=3 {
                let e = exact_content(&s, &t, n, None).unwrap();
                let g = greedy_content(&s, &t, n, None).unwrap();
                assert!(verify_cover(&s, &t, &g));
                assert!(g.value >= e.value);
                assert!(g.value / e.value <= 1.0 + (t.len() as f64).ln());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_matches_partition_oracle(seed in 0u64..10_000, n in 1u32..=3, capped in proptest::bool::ANY) {
            let s = random_space(seed, 8);
            let t = s.all_points();
            let zeta = if capped { Some(2.0) } else { None };
            let e = exact_content(&s, &t, n, zeta).unwrap();
            prop_assert_eq!(e.value, oracle::partition_content(&s, &t, n, zeta));
            prop_assert!(verify_cover(&s, &t, &e));
        }

        #[test]
        fn monotone_and_subadditive(seed in 0u64..10_000, a in 1u32..256, b in 1u32..256) {
            let s = random_space(seed, 8);
            let sa: PointSet = (0..8).filter(|i| a >> i & 1 == 1).collect();
            let sb: PointSet = (0..8).filter(|i| b >> i & 1 == 1).collect();
            let union = sa.union(&sb);
            let ca = exact_content(&s, &sa, 2, None).unwrap().value;
            let cb = exact_content(&s, &sb, 2, None).unwrap().value;
            let cu = exact_content(&s, &union, 2, None).unwrap().value;
            prop_assert!(ca <= cu && cb <= cu);
            prop_assert!(cu <= ca + cb);
            let capped = exact_content(&s, &sa, 2, Some(1.0)).unwrap().value;
            prop_assert!(capped >= ca);
        }
    }
}
