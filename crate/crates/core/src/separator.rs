//! `D`-separating subsets and their local improvement.
//!
//! A set `Z` is `D`-separating when every scale-`s` component of the
//! complement has diameter at most `D`. The only improvement move is the
//! ball swap `Z' = (Z \ B(x,r)) ∪ S(x,r)` with `r` taken from the cheapest
//! shell in `[R/100, R/50]`.

use serde::{Deserialize, Serialize};

use crate::coarea::find_cheap_sphere;
use crate::content::{content, exact_content, ContentEstimate, ContentMode};
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, PointSet};

/// Spaces up to this size get an exhaustive `b(D)` by default.
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatorParams {
    /// Connectivity scale for pieces.
    pub scale_s: f64,
    /// Solver for separator contents.
    pub content_mode: ContentMode,
    /// Spaces with at most this many points are solved exhaustively.
    pub exhaustive_limit: usize,
}

impl SeparatorParams {
    /// Defaults: `s = 2h`; exact contents and exhaustive `b(D)` on tiny spaces.
    pub fn for_space(space: &FiniteMetricSpace) -> Self {
        let mode = if space.len() <= DEFAULT_EXHAUSTIVE_LIMIT { ContentMode::Exact } else { ContentMode::Greedy };
        SeparatorParams { scale_s: 2.0 * space.mesh_h(), content_mode: mode, exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT }
    }

    pub fn with_scale(mut self, s: f64) -> Self {
        self.scale_s = s;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapBound {
    /// `content - b(D)` against an exhaustive `b(D)`.
    Certified { gap: f64, b_d: f64 },
    Heuristic { locally_stable: bool },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatorResult {
    #[serde(rename = "Z")]
    pub z: PointSet,
    pub pieces: Vec<PointSet>,
    #[serde(rename = "D")]
    pub d: f64,
    /// Content of `Z` in dimension `n-1` with cap ζ.
    pub content: ContentEstimate,
    pub gap_bound: GapBound,
    pub scale_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// The component that broke separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversizedPiece {
    pub piece: PointSet,
    pub diameter: f64,
}

/// Scale-`s` components of `space \ z`, provided each has diameter `<= d`.
pub fn is_separating(
    space: &FiniteMetricSpace,
    z: &PointSet,
    d: f64,
    scale_s: f64,
) -> std::result::Result<Vec<PointSet>, OversizedPiece> {
    let rest = space.all_points().difference(z);
    let pieces = space.components_at_scale(&rest, scale_s);
    for p in &pieces {
        let diameter = space.diameter(p);
        if diameter > d {
            return Err(OversizedPiece { piece: p.clone(), diameter });
        }
    }
    Ok(pieces)
}

fn sep_content(space: &FiniteMetricSpace, z: &PointSet, n: u32, zeta: Option<f64>, mode: ContentMode) -> Result<ContentEstimate> {
    content(space, z, n.saturating_sub(1), zeta, mode)
}

fn check_d(space: &FiniteMetricSpace, d: f64) -> Result<()> {
    if d < 4.0 * space.mesh_h() {
        return Err(Error::TooCoarse { mesh_h: space.mesh_h(), limit: d / 4.0 });
    }
    Ok(())
}

/// A separator built from shells around a net of centers.
///
/// Centers form a greedy `D/4`-net in id order. Around each center the
/// cheapest shell `[r, r+s)` with `r` in `(D/4, D/2]` is taken, so every
/// point outside `Z` sits strictly inside some center's inner ball of radius
/// at most `D/2`. Shells that turn out redundant are then dropped in center
/// order.
pub fn initial_separator(
    space: &FiniteMetricSpace,
    d: f64,
    n: u32,
    zeta: Option<f64>,
    params: &SeparatorParams,
) -> Result<SeparatorResult> {
    check_d(space, d)?;
    let s = params.scale_s;
    let all = space.all_points();
    if space.diameter(&all) <= d {
        let z = PointSet::new();
        let content = sep_content(space, &z, n, zeta, params.content_mode)?;
        let pieces = if space.is_empty() { Vec::new() } else { vec![all] };
        return Ok(SeparatorResult { z, pieces, d, content, gap_bound: GapBound::Heuristic { locally_stable: false }, scale_s: s, warnings: Vec::new() });
    }

    let rho = d / 4.0;
    let mut centers: Vec<usize> = Vec::new();
    for p in 0..space.len() {
        if centers.iter().all(|&c| space.dist(c, p) > rho) {
            centers.push(p);
        }
    }

    let mut shells: Vec<PointSet> = Vec::with_capacity(centers.len());
    for &c in &centers {
        let row = space.row(c);
        let mut radii: Vec<f64> = row.iter().copied().filter(|&v| v > rho && v <= d / 2.0).collect();
        radii.push(d / 2.0);
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let mut best: Option<(f64, PointSet)> = None;
        let mut last: Option<PointSet> = None;
        for r in radii {
            let members = space.shell(c, r, r + s).members;
            if last.as_ref() == Some(&members) {
                continue;
            }
            let value = sep_content(space, &members, n, zeta, params.content_mode)?.value;
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                best = Some((value, members.clone()));
            }
            last = Some(members);
        }
        shells.push(best.map(|(_, m)| m).unwrap_or_default());
    }

    let union_of = |keep: &[bool]| -> PointSet {
        shells.iter().zip(keep).filter(|(_, &k)| k).fold(PointSet::new(), |acc, (sh, _)| acc.union(sh))
    };
    let mut keep = vec![true; shells.len()];
    if is_separating(space, &union_of(&keep), d, s).is_err() {
        return Err(Error::InvalidParameter(format!("shell construction failed to separate at D = {d}, s = {s}")));
    }
    for i in 0..shells.len() {
        keep[i] = false;
        if is_separating(space, &union_of(&keep), d, s).is_err() {
            keep[i] = true;
        }
    }
    let z = union_of(&keep);
    let pieces = is_separating(space, &z, d, s).expect("checked above");
    let content = sep_content(space, &z, n, zeta, params.content_mode)?;
    Ok(SeparatorResult { z, pieces, d, content, gap_bound: GapBound::Heuristic { locally_stable: false }, scale_s: s, warnings: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapOutcome {
    Improved,
    /// `Z` has no points inside the chosen ball.
    NothingToRemove,
    /// The window `[R/100, R/50]` is thinner than one shell of width `s`.
    ThinWindow,
    NotSeparating,
    NoGain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwapRecord {
    pub x: usize,
    pub r: f64,
    pub removed: PointSet,
    pub added: PointSet,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone)]
pub struct SwapResult {
    pub result: SeparatorResult,
    pub outcome: SwapOutcome,
    pub record: Option<SwapRecord>,
}

/// One ball swap at `x`. Accepted only if the result is still
/// `D`-separating and the content drops by more than `tol`.
#[allow(clippy::too_many_arguments)]
pub fn improve_separator(
    space: &FiniteMetricSpace,
    current: &SeparatorResult,
    x: usize,
    big_r: f64,
    n: u32,
    zeta: Option<f64>,
    params: &SeparatorParams,
    tol: f64,
) -> Result<SwapResult> {
    space.check_id(x)?;
    let unchanged = |outcome| Ok(SwapResult { result: current.clone(), outcome, record: None });
    let s = params.scale_s;
    let row = space.row(x);
    if current.z.iter().all(|p| row[p] >= big_r / 50.0) {
        return unchanged(SwapOutcome::NothingToRemove);
    }
    let cheap = match find_cheap_sphere(space, x, big_r, n, zeta, f64::INFINITY, s) {
        Ok(c) => c,
        Err(Error::RangeTooThin { .. }) => return unchanged(SwapOutcome::ThinWindow),
        Err(e) => return Err(e),
    };
    let r = cheap.r;
    let removed: PointSet = current.z.iter().filter(|&p| row[p] < r).collect();
    if removed.is_empty() {
        return unchanged(SwapOutcome::NothingToRemove);
    }
    let sphere = space.shell(x, r, r + s).members;
    let candidate = current.z.difference(&removed).union(&sphere);
    if candidate == current.z {
        return unchanged(SwapOutcome::NoGain);
    }
    // Content first: it is far cheaper than recomputing the pieces.
    let est = sep_content(space, &candidate, n, zeta, params.content_mode)?;
    if !(est.value < current.content.value - tol) {
        return unchanged(SwapOutcome::NoGain);
    }
    let pieces = match is_separating(space, &candidate, current.d, s) {
        Ok(p) => p,
        Err(_) => return unchanged(SwapOutcome::NotSeparating),
    };
    let record = SwapRecord {
        x,
        r,
        removed,
        added: sphere.difference(&current.z),
        before: current.content.value,
        after: est.value,
    };
    Ok(SwapResult {
        result: SeparatorResult {
            z: candidate,
            pieces,
            d: current.d,
            content: est,
            gap_bound: GapBound::Heuristic { locally_stable: false },
            scale_s: s,
            warnings: current.warnings.clone(),
        },
        outcome: SwapOutcome::Improved,
        record: Some(record),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalSeparator {
    pub result: SeparatorResult,
    pub initial_content: f64,
    pub moves: Vec<SwapRecord>,
    pub attempts: usize,
    pub sweeps: usize,
    /// Swaps whose output failed separation; the ball swap never should.
    pub rejected_nonseparating: usize,
    pub budget_exhausted: bool,
    /// The exhaustive minimizer replaced the local-search result.
    pub used_exhaustive: bool,
}

/// Local search from [`initial_separator`] with ball swaps at every center in
/// ascending id order, repeated until a full sweep gains nothing more than
/// `delta / |X|` or `move_budget` swap attempts are spent.
#[allow(clippy::too_many_arguments)]
pub fn minimal_separator(
    space: &FiniteMetricSpace,
    d: f64,
    n: u32,
    zeta: Option<f64>,
    delta: f64,
    move_budget: usize,
    params: &SeparatorParams,
) -> Result<MinimalSeparator> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let mut current = initial_separator(space, d, n, zeta, params)?;
    let initial_content = current.content.value;
    let big_r = 4.0 * d;
    let tol = delta / space.len().max(1) as f64;
    let mut moves = Vec::new();
    let (mut attempts, mut sweeps, mut rejected) = (0usize, 0usize, 0usize);
    let mut stable = current.z.is_empty();
    let mut budget_exhausted = false;
    while !stable {
        sweeps += 1;
        let mut improved = false;
        for x in 0..space.len() {
            if attempts >= move_budget {
                budget_exhausted = true;
                break;
            }
            attempts += 1;
            let swap = improve_separator(space, &current, x, big_r, n, zeta, params, tol)?;
            match swap.outcome {
                SwapOutcome::Improved => {
                    improved = true;
                    moves.push(swap.record.expect("improved swaps carry a record"));
                    current = swap.result;
                }
                SwapOutcome::NotSeparating => rejected += 1,
                _ => {}
            }
        }
        if budget_exhausted {
            break;
        }
        stable = !improved;
    }
    current.gap_bound = GapBound::Heuristic { locally_stable: stable };
    if budget_exhausted {
        current.warnings.push(format!("move budget of {move_budget} exhausted before local stability"));
    }

    let mut used_exhaustive = false;
    if space.len() <= params.exhaustive_limit {
        let (b_d, best_z) = exhaustive_b(space, d, n, zeta, params.scale_s)?;
        let mine = exact_content(space, &current.z, n.saturating_sub(1), zeta)?;
        if mine.value - b_d > delta {
            let pieces = is_separating(space, &best_z, d, params.scale_s).expect("exhaustive minimizer separates");
            current = SeparatorResult {
                content: exact_content(space, &best_z, n.saturating_sub(1), zeta)?,
                z: best_z,
                pieces,
                d,
                gap_bound: GapBound::Certified { gap: 0.0, b_d },
                scale_s: params.scale_s,
                warnings: current.warnings,
            };
            used_exhaustive = true;
        } else {
            current.content = mine;
            current.gap_bound = GapBound::Certified { gap: current.content.value - b_d, b_d };
        }
    }
    Ok(MinimalSeparator {
        result: current,
        initial_content,
        moves,
        attempts,
        sweeps,
        rejected_nonseparating: rejected,
        budget_exhausted,
        used_exhaustive,
    })
}

/// `b(D)` by enumerating every subset; returns the value and the first
/// minimizer in subset-mask order. Exponential: tiny spaces only.
pub fn exhaustive_b(space: &FiniteMetricSpace, d: f64, n: u32, zeta: Option<f64>, scale_s: f64) -> Result<(f64, PointSet)> {
    let m = space.len();
    if m > 20 {
        return Err(Error::BudgetExceeded { size: m, budget: 20 });
    }
    let mut best: Option<(f64, PointSet)> = None;
    for mask in 0u32..(1u32 << m) {
        let z: PointSet = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if is_separating(space, &z, d, scale_s).is_err() {
            continue;
        }
        let v = exact_content(space, &z, n.saturating_sub(1), zeta)?.value;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, z));
        }
    }
    Ok(best.expect("the whole space always separates"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizedReport {
    pub radius: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub worst_center: Option<usize>,
    pub worst_value: f64,
    pub violations: Vec<(usize, f64)>,
    pub pass: bool,
}

/// Checks `content(Z ∩ B(x, R/1000)) <= eps_lower (R/1000)^(n-1) + tolerance`
/// at every point `x`. Failures are diagnostics, not errors.
pub fn localized_smallness(
    space: &FiniteMetricSpace,
    result: &SeparatorResult,
    big_r: f64,
    n: u32,
    zeta: Option<f64>,
    eps_lower: f64,
    tolerance: f64,
) -> Result<LocalizedReport> {
    let radius = big_r / 1000.0;
    let bound = eps_lower * radius.powi(n as i32 - 1);
    let mut worst: Option<(usize, f64)> = None;
    let mut violations = Vec::new();
    for x in 0..space.len() {
        let local = result.z.intersection(&space.ball(x, radius));
        let v = content(space, &local, n - 1, zeta, ContentMode::Greedy)?.value;
        if v > bound + tolerance {
            violations.push((x, v));
        }
        if worst.is_none_or(|(_, w)| v > w) {
            worst = Some((x, v));
        }
    }
    Ok(LocalizedReport {
        radius,
        bound,
        tolerance,
        worst_center: worst.map(|w| w.0),
        worst_value: worst.map_or(0.0, |w| w.1),
        pass: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, h: f64) -> FiniteMetricSpace {
        let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs() * h).collect()).collect();
        FiniteMetricSpace::from_distance_matrix(&m, h).unwrap()
    }

    fn grid(w: usize, hgt: usize) -> FiniteMetricSpace {
        let pts: Vec<(f64, f64)> = (0..w).flat_map(|i| (0..hgt).map(move |j| (i as f64, j as f64))).collect();
        let m: Vec<Vec<f64>> =
            pts.iter().map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect()).collect();
        FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap()
    }

    #[test]
    fn separating_examples() {
        let s = line(11, 1.0);
        assert_eq!(is_separating(&s, &s.all_points(), 1.0, 2.0).unwrap(), Vec::<PointSet>::new());
        let z = PointSet::from(vec![5]);
        let pieces = is_separating(&s, &z, 4.0, 1.0).unwrap();
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0].ids(), &[0, 1, 2, 3, 4]);
        let err = is_separating(&s, &z, 3.0, 1.0).unwrap_err();
        assert_eq!(err.diameter, 4.0);
    }

    #[test]
    fn small_space_needs_no_cut() {
        let s = line(5, 1.0);
        let p = SeparatorParams::for_space(&s);
        let r = initial_separator(&s, 4.0, 2, None, &p).unwrap();
        assert!(r.z.is_empty());
        assert_eq!(r.pieces.len(), 1);
        let m = minimal_separator(&s, 4.0, 2, None, 1e-6, 100, &p).unwrap();
        assert!(m.result.z.is_empty());
        assert_eq!(m.result.content.value, 0.0);
        assert_eq!(m.result.gap_bound, GapBound::Certified { gap: 0.0, b_d: 0.0 });
    }

    #[test]
    fn too_coarse() {
        let s = line(20, 1.0);
        let p = SeparatorParams::for_space(&s);
        assert!(matches!(initial_separator(&s, 3.0, 2, None, &p), Err(Error::TooCoarse { .. })));
    }

    #[test]
    fn line_initial_separator() {
        let s = line(101, 1.0);
        let p = SeparatorParams::for_space(&s).with_scale(1.0);
        let r = initial_separator(&s, 10.0, 1, Some(1.0), &p).unwrap();
        assert!(!r.z.is_empty());
        let pieces = is_separating(&s, &r.z, 10.0, 1.0).unwrap();
        assert_eq!(pieces, r.pieces);
        assert!(pieces.iter().all(|q| s.diameter(q) <= 10.0));
    }

    #[test]
    fn grid_initial_separator() {
        let s = grid(30, 30);
        let p = SeparatorParams::for_space(&s).with_scale(1.0);
        let r = initial_separator(&s, 10.0, 2, Some(1.0), &p).unwrap();
        let pieces = is_separating(&s, &r.z, 10.0, 1.0).unwrap();
        assert!(pieces.iter().all(|q| s.diameter(q) <= 10.0));
        assert!(r.z.is_disjoint(&pieces.iter().fold(PointSet::new(), |a, b| a.union(b))));
    }

    #[test]
    fn swap_with_nothing_inside_is_a_no_op() {
        let s = line(400, 1.0);
        let p = SeparatorParams::for_space(&s).with_scale(1.0);
        let start = SeparatorResult {
            z: PointSet::from(vec![0]),
            pieces: Vec::new(),
            d: 1000.0,
            content: crate::content::greedy_content(&s, &PointSet::from(vec![0]), 1, None).unwrap(),
            gap_bound: GapBound::Heuristic { locally_stable: false },
            scale_s: 1.0,
            warnings: Vec::new(),
        };
        let out = improve_separator(&s, &start, 200, 300.0, 2, None, &p, 0.0).unwrap();
        assert_eq!(out.outcome, SwapOutcome::NothingToRemove);
        assert_eq!(out.result.z, start.z);
    }

    /// A dense blob of separator points near x, far from everything else, is
    /// replaced by an empty sphere.
    #[test]
    fn swap_drops_a_dense_blob() {
        // Points: blob of 6 at distance <= 0.5 from 0; one far point at 100.
        let mut coords: Vec<f64> = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        coords.push(100.0);
        let m: Vec<Vec<f64>> = coords.iter().map(|a| coords.iter().map(|b| (a - b).abs()).collect()).collect();
        let s = FiniteMetricSpace::from_distance_matrix(&m, 0.1).unwrap();
        let p = SeparatorParams { scale_s: 0.1, content_mode: ContentMode::Exact, exhaustive_limit: 0 };
        let z = PointSet::from(vec![1, 2, 3, 4, 5]);
        let pieces = is_separating(&s, &z, 1000.0, 0.1).unwrap();
        let start = SeparatorResult {
            content: exact_content(&s, &z, 1, None).unwrap(),
            z,
            pieces,
            d: 1000.0,
            gap_bound: GapBound::Heuristic { locally_stable: false },
            scale_s: 0.1,
            warnings: Vec::new(),
        };
        // R = 80: the window [0.8, 1.6] is empty around point 0.
        let out = improve_separator(&s, &start, 0, 80.0, 2, None, &p, 0.0).unwrap();
        assert_eq!(out.outcome, SwapOutcome::Improved);
        assert!(out.result.z.is_empty());
        assert!(out.result.content.value < start.content.value);
    }

    #[test]
    fn swap_that_breaks_separation_is_refused() {
        // Every third point of a line is cut, so pieces have diameter 1 = D.
        // At the end point 0 the cheapest sphere is the single point 4, which
        // replaces {0, 3}: cheaper, but it leaves the piece {0,1,2,3}.
        let s = line(100, 1.0);
        let p = SeparatorParams { scale_s: 1.0, content_mode: ContentMode::Greedy, exhaustive_limit: 0 };
        let z: PointSet = (0..100).filter(|i| i % 3 == 0).collect();
        let pieces = is_separating(&s, &z, 1.0, 1.0).unwrap();
        let start = SeparatorResult {
            content: crate::content::greedy_content(&s, &z, 1, Some(1.0)).unwrap(),
            z,
            pieces,
            d: 1.0,
            gap_bound: GapBound::Heuristic { locally_stable: false },
            scale_s: 1.0,
            warnings: Vec::new(),
        };
        let out = improve_separator(&s, &start, 0, 400.0, 2, Some(1.0), &p, 0.0).unwrap();
        assert_eq!(out.outcome, SwapOutcome::NotSeparating);
        assert_eq!(out.result.z, start.z);
    }

    #[test]
    fn minimal_within_delta_of_exhaustive() {
        for seed in 0..5u64 {
            let coords: Vec<f64> = (0..6).map(|i| (i * 3 + (seed as usize * 7 + i * i) % 3) as f64).collect();
            let m: Vec<Vec<f64>> = coords.iter().map(|a| coords.iter().map(|b| (a - b).abs()).collect()).collect();
            let s = FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap();
            let p = SeparatorParams::for_space(&s).with_scale(3.0);
            let delta = 1e-6;
            let out = minimal_separator(&s, 4.0, 2, None, delta, 1000, &p).unwrap();
            let (b, _) = exhaustive_b(&s, 4.0, 2, None, 3.0).unwrap();
            assert!(out.result.content.value - b <= delta);
            assert!(is_separating(&s, &out.result.z, 4.0, 3.0).is_ok());
            assert!(out.result.content.value <= out.initial_content);
        }
    }
}
