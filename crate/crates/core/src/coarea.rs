//! Radial slicing of a set around a center.
//!
//! [`coarea_check`] compares a shell-sum over radii of `(n-1)`-content with
//! twice the `n`-content of the whole set, allowing the discretization slack
//! computed from the witness cover. [`find_cheap_sphere`] picks the cheapest
//! shell in the window `[R/100, R/50]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::{content, cost, greedy_content, ContentEstimate, ContentMode};
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, PointSet, Shell};

const WINDOW_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellSlice {
    pub r_lo: f64,
    pub r_hi: f64,
    pub points: usize,
    pub content: f64,
}

/// Radial extent of the shells met by one witness ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellWindow {
    pub center: usize,
    pub radius: f64,
    pub extent: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoareaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub shell_width: f64,
    pub pass: bool,
    pub mode: ContentMode,
    pub slices: Vec<ShellSlice>,
    pub witness: ContentEstimate,
    pub windows: Vec<ShellWindow>,
    pub windows_ok: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn coarea_check(
    space: &FiniteMetricSpace,
    u: &PointSet,
    x: usize,
    r1: f64,
    r2: f64,
    n: u32,
    zeta: Option<f64>,
    shell_width: f64,
    mode: ContentMode,
) -> Result<CoareaReport> {
    space.check_id(x)?;
    space.check_set(u)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("co-area check needs n >= 2, got {n}")));
    }
    if !(shell_width >= space.mesh_h()) {
        return Err(Error::InvalidParameter(format!("shell width {shell_width} is below mesh_h {}", space.mesh_h())));
    }
    if !(0.0 <= r1 && r1 <= r2) {
        return Err(Error::InvalidParameter(format!("need 0 <= r1 <= r2, got [{r1}, {r2}]")));
    }
    let row = space.row(x);
    if let Some(p) = u.iter().find(|&p| row[p] < r1 || row[p] > r2) {
        return Err(Error::OutsideAnnulus { point: p, dist: row[p], r1, r2 });
    }

    let delta = shell_width;
    let shell_index = |p: usize| ((row[p] - r1) / delta).floor() as usize;
    let count = if u.is_empty() { 0 } else { u.iter().map(shell_index).max().unwrap() + 1 };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for p in u.iter() {
        members[shell_index(p)].push(p);
    }
    let slices: Vec<ShellSlice> = members
        .into_par_iter()
        .enumerate()
        .map(|(k, pts)| {
            let set = PointSet::from_sorted(pts);
            let value = content(space, &set, n - 1, zeta, mode).map(|e| e.value)?;
            Ok(ShellSlice { r_lo: r1 + k as f64 * delta, r_hi: r1 + (k + 1) as f64 * delta, points: set.len(), content: value })
        })
        .collect::<Result<_>>()?;
    let lhs: f64 = slices.iter().map(|s| delta * s.content).sum();

    let witness = content(space, u, n, zeta, mode)?;
    let rhs = 2.0 * witness.value;
    let slack = 2.0 * delta * witness.cover.iter().map(|b| cost(b.radius.max(space.mesh_h()), n - 1)).sum::<f64>();

    let windows: Vec<ShellWindow> = witness
        .cover
        .iter()
        .filter_map(|b| {
            let hit = u.iter().filter(|&p| space.dist(b.center, p) <= b.radius).map(shell_index);
            let (lo, hi) = hit.fold((usize::MAX, 0), |(lo, hi), k| (lo.min(k), hi.max(k)));
            (lo != usize::MAX).then(|| {
                let extent = (hi - lo + 1) as f64 * delta;
                let bound = 2.0 * b.radius + 2.0 * delta;
                ShellWindow { center: b.center, radius: b.radius, extent, bound, ok: extent <= bound * (1.0 + WINDOW_RTOL) }
            })
        })
        .collect();
    let windows_ok = windows.iter().all(|w| w.ok);

    Ok(CoareaReport {
        lhs,
        rhs,
        slack,
        shell_width,
        pass: lhs <= rhs + slack,
        mode,
        slices,
        witness,
        windows,
        windows_ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheapSphere {
    pub r: f64,
    pub shell: Shell,
    pub content: ContentEstimate,
    /// Minimal shell content is within the requested budget.
    pub found: bool,
    /// Content of every shell in the window, innermost first.
    pub slices: Vec<ShellSlice>,
}

impl CheapSphere {
    /// Average of the shell contents over the window.
    pub fn average(&self) -> f64 {
        self.slices.iter().map(|s| s.content).sum::<f64>() / self.slices.len() as f64
    }
}

/// Cheapest shell of width `shell_width` tiling `[R/100, R/50]` around `x`,
/// by greedy `(n-1)`-content.
#[allow(clippy::too_many_arguments)]
pub fn find_cheap_sphere(
    space: &FiniteMetricSpace,
    x: usize,
    big_r: f64,
    n: u32,
    zeta: Option<f64>,
    budget: f64,
    shell_width: f64,
) -> Result<CheapSphere> {
    space.check_id(x)?;
    if n < 1 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(budget > 0.0) {
        return Err(Error::InvalidParameter(format!("budget must be positive, got {budget}")));
    }
    let lo = big_r / 100.0;
    let hi = big_r / 50.0;
    let shells = ((hi - lo) / shell_width + 1e-9).floor() as usize;
    if !(shell_width > 0.0) || shells == 0 {
        return Err(Error::RangeTooThin { shell_width, required_r: 100.0 * shell_width });
    }
    let mut best: Option<(usize, Shell, ContentEstimate)> = None;
    let mut slices = Vec::with_capacity(shells);
    for k in 0..shells {
        let r_lo = lo + k as f64 * shell_width;
        let shell = space.shell(x, r_lo, r_lo + shell_width);
        let est = greedy_content(space, &shell.members, n - 1, zeta)?;
        slices.push(ShellSlice { r_lo, r_hi: shell.r_hi, points: shell.members.len(), content: est.value });
        if best.as_ref().is_none_or(|(_, _, b)| est.value < b.value) {
            best = Some((k, shell, est));
        }
    }
    let (_, shell, est) = best.expect("at least one shell");
    Ok(CheapSphere { r: shell.r_lo, found: est.value <= budget, shell, content: est, slices })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(side: usize, h: f64) -> FiniteMetricSpace {
        let pts: Vec<(f64, f64)> = (0..side).flat_map(|i| (0..side).map(move |j| (i as f64 * h, j as f64 * h))).collect();
        let m: Vec<Vec<f64>> =
            pts.iter().map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect()).collect();
        FiniteMetricSpace::from_distance_matrix(&m, h).unwrap()
    }

    fn line(n: usize, h: f64) -> FiniteMetricSpace {
        let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs() * h).collect()).collect();
        FiniteMetricSpace::from_distance_matrix(&m, h).unwrap()
    }

    #[test]
    fn empty_set_passes_trivially() {
        let s = line(5, 1.0);
        let r = coarea_check(&s, &PointSet::new(), 0, 0.0, 4.0, 2, None, 1.0, ContentMode::Exact).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn four_point_single_shell() {
        // Line 0..9, h = 1; U = {3,4,5,6} sits in the single shell [3, 7) from 0.
        let s = line(10, 1.0);
        let u = PointSet::from(vec![3, 4, 5, 6]);
        let r = coarea_check(&s, &u, 0, 3.0, 6.0, 2, None, 4.0, ContentMode::Exact).unwrap();
        assert_eq!(r.slices.len(), 1);
        // Dimension 1: one ball of radius 2 centered at 4 or 5 (cost 2) versus
        // four unit balls (cost 4) or two radius-1 balls (cost 2).
        assert_eq!(r.slices[0].content, 2.0);
        assert_eq!(r.lhs, 8.0);
        // Dimension 2: two radius-1 balls (cost 2) beat one radius-2 ball (4).
        assert_eq!(r.rhs, 4.0);
        // Slack: 2 * Δ * Σ r^{n-1} = 2 * 4 * 2.
        assert_eq!(r.slack, 16.0);
        assert!(r.pass);
        assert!(r.windows_ok);
    }

    #[test]
    fn outside_annulus_is_an_error() {
        let s = line(10, 1.0);
        let u = PointSet::from(vec![1, 8]);
        assert!(matches!(
            coarea_check(&s, &u, 0, 2.0, 9.0, 2, None, 1.0, ContentMode::Greedy),
            Err(Error::OutsideAnnulus { point: 1, .. })
        ));
    }

    #[test]
    fn grid_disk_passes_with_slack() {
        let s = grid(21, 0.1);
        let center = 10 * 21 + 10;
        let u = s.ball(center, 1.0);
        let r = coarea_check(&s, &u, center, 0.0, 1.0, 2, Some(0.3), 0.1, ContentMode::Greedy).unwrap();
        assert!(r.pass, "lhs {} rhs {} slack {}", r.lhs, r.rhs, r.slack);
        assert!(r.windows_ok);
    }

    #[test]
    fn cheap_sphere_on_a_line() {
        let s = line(400, 1.0);
        let c = find_cheap_sphere(&s, 200, 300.0, 2, None, 1.0, 1.0).unwrap();
        assert_eq!(c.slices.len(), 3);
        for sl in &c.slices {
            assert!(sl.points <= 2);
            assert!(sl.content <= 2.0 * s.mesh_h());
        }
        assert!(c.content.value <= c.average());
    }

    #[test]
    fn cheap_sphere_empty_window() {
        let m = vec![vec![0.0, 1000.0], vec![1000.0, 0.0]];
        let s = FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap();
        let c = find_cheap_sphere(&s, 0, 200.0, 2, None, 1e-9, 1.0).unwrap();
        assert_eq!(c.content.value, 0.0);
        assert!(c.found);
    }

    #[test]
    fn cheap_sphere_thin_window() {
        let s = line(10, 1.0);
        assert!(matches!(find_cheap_sphere(&s, 0, 50.0, 2, None, 1.0, 1.0), Err(Error::RangeTooThin { .. })));
    }
}
