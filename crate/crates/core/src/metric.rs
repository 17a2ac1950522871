//! Finite metric spaces and the set-level primitives built on them: balls,
//! shells, diameters and connectivity at a fixed scale.
//!
//! A [`FiniteMetricSpace`] is an `h`-net proxy of some underlying space. The
//! mesh resolution `h` is carried along because every content computation
//! floors radii at `h`.

use std::fmt;
use std::sync::{Arc, RwLock};

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distinct points closer than `MESH_SLACK * h` trigger a warning.
pub const MESH_SLACK: f64 = 0.5;

const TRIANGLE_RTOL: f64 = 1e-9;

/// A sorted, duplicate-free set of point ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointSet(Vec<usize>);

impl PointSet {
    pub fn new() -> Self {
        PointSet(Vec::new())
    }

    /// Builds a set from ids that are already sorted and unique.
    pub(crate) fn from_sorted(ids: Vec<usize>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        PointSet(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        PointSet(out)
    }

    pub fn difference(&self, other: &PointSet) -> PointSet {
        PointSet(self.0.iter().copied().filter(|&p| !other.contains(p)).collect())
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        PointSet(self.0.iter().copied().filter(|&p| other.contains(p)).collect())
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.0.iter().all(|&p| other.contains(p))
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.0.iter().all(|&p| !other.contains(p))
    }

    /// Membership mask over `0..len`.
    pub fn mask(&self, len: usize) -> Vec<bool> {
        let mut m = vec![false; len];
        for &p in &self.0 {
            m[p] = true;
        }
        m
    }
}

impl FromIterator<usize> for PointSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        PointSet(v)
    }
}

impl From<Vec<usize>> for PointSet {
    fn from(v: Vec<usize>) -> Self {
        v.into_iter().collect()
    }
}

/// Points whose distance from `center` lies in `[r_lo, r_hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub center: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub members: PointSet,
}

/// Per-point neighbor lists up to a cutoff, sorted by distance.
#[derive(Debug)]
pub struct NearLists {
    cutoff: f64,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl NearLists {
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Neighbors of `p` (including `p`) within `r <= cutoff`, nearest first.
    pub fn within(&self, p: usize, r: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        debug_assert!(r <= self.cutoff);
        self.entries[self.offsets[p]..self.offsets[p + 1]]
            .iter()
            .copied()
            .take_while(move |&(_, d)| d <= r)
    }
}

/// A finite metric space with a full distance table and a mesh resolution.
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
    mesh_h: f64,
    warnings: Vec<String>,
    near_cache: RwLock<Vec<Arc<NearLists>>>,
}

impl Clone for FiniteMetricSpace {
    fn clone(&self) -> Self {
        FiniteMetricSpace {
            n: self.n,
            dist: self.dist.clone(),
            mesh_h: self.mesh_h,
            warnings: self.warnings.clone(),
            near_cache: RwLock::new(Vec::new()),
        }
    }
}

impl fmt::Debug for FiniteMetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteMetricSpace")
            .field("points", &self.n)
            .field("mesh_h", &self.mesh_h)
            .finish()
    }
}

impl FiniteMetricSpace {
    /// Validates and wraps a square distance matrix.
    pub fn from_distance_matrix(matrix: &[Vec<f64>], mesh_h: f64) -> Result<Self> {
        check_mesh(mesh_h)?;
        let n = matrix.len();
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare { row: i, len: row.len(), expected: n });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::BadEntry { i, j, value: v });
                }
            }
            dist.extend_from_slice(row);
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::NonzeroDiagonal { i, value: dist[i * n + i] });
            }
            for j in (i + 1)..n {
                let (a, b) = (dist[i * n + j], dist[j * n + i]);
                if a != b {
                    return Err(Error::Asymmetric { i, j, dij: a, dji: b });
                }
            }
        }
        for i in 0..n {
            for k in (i + 1)..n {
                let direct = dist[i * n + k];
                let slack = TRIANGLE_RTOL * direct.max(1.0);
                for j in 0..n {
                    let via = dist[i * n + j] + dist[j * n + k];
                    if via + slack < direct {
                        return Err(Error::TriangleViolation { i, j, k, via, direct });
                    }
                }
            }
        }
        Ok(Self::from_trusted(n, dist, mesh_h))
    }

    /// Shortest-path metric of a connected weighted graph, with every edge
    /// subdivided at spacing `mesh_h`.
    pub fn from_weighted_graph(edges: &[(usize, usize, f64)], mesh_h: f64) -> Result<Self> {
        Self::from_weighted_graph_with_spacing(edges, mesh_h, mesh_h)
    }

    /// As [`Self::from_weighted_graph`], with the subdivision spacing chosen
    /// independently of the mesh resolution.
    pub fn from_weighted_graph_with_spacing(
        edges: &[(usize, usize, f64)],
        spacing: f64,
        mesh_h: f64,
    ) -> Result<Self> {
        check_mesh(mesh_h)?;
        check_mesh(spacing)?;
        let sub = subdivide(edges, spacing)?;
        let dist = graph_distances(sub.nodes, &sub.edges)?;
        Ok(Self::from_trusted(sub.nodes, dist, mesh_h))
    }

    /// Wraps a distance table known to be a metric (generated spaces).
    pub(crate) fn from_trusted(n: usize, dist: Vec<f64>, mesh_h: f64) -> Self {
        debug_assert_eq!(dist.len(), n * n);
        let mut warnings = Vec::new();
        let floor = MESH_SLACK * mesh_h;
        'outer: for i in 0..n {
            for j in (i + 1)..n {
                if dist[i * n + j] < floor {
                    warnings.push(format!(
                        "points {i} and {j} are {} apart, below {MESH_SLACK} * mesh_h",
                        dist[i * n + j]
                    ));
                    if warnings.len() >= 16 {
                        break 'outer;
                    }
                }
            }
        }
        FiniteMetricSpace { n, dist, mesh_h, warnings, near_cache: RwLock::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mesh_h(&self) -> f64 {
        self.mesh_h
    }

    /// Warnings raised at construction (points closer than the mesh slack).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    #[inline]
    pub fn dist(&self, p: usize, q: usize) -> f64 {
        self.dist[p * self.n + q]
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.dist[p * self.n..(p + 1) * self.n]
    }

    pub fn check_id(&self, id: usize) -> Result<()> {
        if id < self.n {
            Ok(())
        } else {
            Err(Error::InvalidPoint { id, len: self.n })
        }
    }

    pub fn check_set(&self, set: &PointSet) -> Result<()> {
        match set.ids().last() {
            Some(&id) => self.check_id(id),
            None => Ok(()),
        }
    }

    pub fn all_points(&self) -> PointSet {
        PointSet((0..self.n).collect())
    }

    /// Closed ball `{p : d(x,p) <= r}`.
    pub fn ball(&self, x: usize, r: f64) -> PointSet {
        PointSet(self.row(x).iter().enumerate().filter(|&(_, &d)| d <= r).map(|(p, _)| p).collect())
    }

    /// Open ball `{p : d(x,p) < r}`.
    pub fn open_ball(&self, x: usize, r: f64) -> PointSet {
        PointSet(self.row(x).iter().enumerate().filter(|&(_, &d)| d < r).map(|(p, _)| p).collect())
    }

    pub fn shell(&self, x: usize, r_lo: f64, r_hi: f64) -> Shell {
        let members = PointSet(
            self.row(x)
                .iter()
                .enumerate()
                .filter(|&(_, &d)| r_lo <= d && d < r_hi)
                .map(|(p, _)| p)
                .collect(),
        );
        Shell { center: x, r_lo, r_hi, members }
    }

    /// Closed annulus `{p : r_lo <= d(x,p) <= r_hi}`.
    pub fn annulus(&self, x: usize, r_lo: f64, r_hi: f64) -> PointSet {
        PointSet(
            self.row(x)
                .iter()
                .enumerate()
                .filter(|&(_, &d)| r_lo <= d && d <= r_hi)
                .map(|(p, _)| p)
                .collect(),
        )
    }

    /// Maximum pairwise distance; zero for the empty set.
    pub fn diameter(&self, set: &PointSet) -> f64 {
        let ids = set.ids();
        let mut best = 0.0f64;
        for (a, &p) in ids.iter().enumerate() {
            let row = self.row(p);
            for &q in &ids[a + 1..] {
                best = best.max(row[q]);
            }
        }
        best
    }

    /// `min_{q in set} d(p, q)`; infinite for the empty set.
    pub fn dist_to_set(&self, p: usize, set: &PointSet) -> f64 {
        let row = self.row(p);
        set.iter().map(|q| row[q]).fold(f64::INFINITY, f64::min)
    }

    /// Neighbor lists up to at least `cutoff`, built once and cached.
    pub fn near(&self, cutoff: f64) -> Arc<NearLists> {
        {
            let cache = self.near_cache.read().expect("near cache poisoned");
            if let Some(hit) = cache.iter().filter(|c| c.cutoff >= cutoff).min_by(|a, b| a.cutoff.total_cmp(&b.cutoff)) {
                return Arc::clone(hit);
            }
        }
        let mut offsets = Vec::with_capacity(self.n + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for p in 0..self.n {
            let start = entries.len();
            entries.extend(self.row(p).iter().enumerate().filter(|&(_, &d)| d <= cutoff).map(|(q, &d)| (q, d)));
            entries[start..].sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            offsets.push(entries.len());
        }
        let lists = Arc::new(NearLists { cutoff, offsets, entries });
        self.near_cache.write().expect("near cache poisoned").push(Arc::clone(&lists));
        lists
    }

    /// Partition of `set` into classes of the transitive closure of
    /// "within distance `s`". Classes are sorted by their smallest id.
    pub fn components_at_scale(&self, set: &PointSet, s: f64) -> Vec<PointSet> {
        if set.is_empty() {
            return Vec::new();
        }
        let member = set.mask(self.n);
        let near = self.near(s);
        let mut uf = UnionFind::new(self.n);
        for p in set.iter() {
            for (q, _) in near.within(p, s) {
                if q > p && member[q] {
                    uf.union(p, q);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
        for p in set.iter() {
            groups.entry(uf.find(p)).or_default().push(p);
        }
        let mut out: Vec<PointSet> = groups.into_values().map(PointSet).collect();
        out.sort_by_key(|c| c.0[0]);
        out
    }

    /// Copies the restriction of the metric to `set`. Returns the subspace and
    /// the map from sub-ids to ids of `self`.
    pub fn subspace(&self, set: &PointSet) -> (FiniteMetricSpace, Vec<usize>) {
        let ids = set.ids().to_vec();
        let m = ids.len();
        let mut dist = Vec::with_capacity(m * m);
        for &p in &ids {
            let row = self.row(p);
            dist.extend(ids.iter().map(|&q| row[q]));
        }
        let sub = FiniteMetricSpace {
            n: m,
            dist,
            mesh_h: self.mesh_h,
            warnings: Vec::new(),
            near_cache: RwLock::new(Vec::new()),
        };
        (sub, ids)
    }

    /// Same points and metric with a different mesh resolution.
    pub fn with_mesh(&self, mesh_h: f64) -> Result<Self> {
        check_mesh(mesh_h)?;
        Ok(Self::from_trusted(self.n, self.dist.clone(), mesh_h))
    }

    /// Full matrix as nested rows, for serialization.
    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|p| self.row(p).to_vec()).collect()
    }
}

fn check_mesh(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidMesh(h))
    }
}

pub(crate) struct Subdivided {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Splits each edge into `ceil(len / spacing)` equal segments. Original
/// vertices keep their ids; subdivision points are appended.
pub(crate) fn subdivide(edges: &[(usize, usize, f64)], spacing: f64) -> Result<Subdivided> {
    let mut nodes = 0usize;
    for &(u, v, len) in edges {
        if !(len.is_finite() && len > 0.0) || u == v {
            return Err(Error::InvalidEdge { u, v, len });
        }
        nodes = nodes.max(u + 1).max(v + 1);
    }
    let mut out = Vec::new();
    for &(u, v, len) in edges {
        let ratio = len / spacing;
        let segments = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() }.max(1.0) as usize;
        let step = len / segments as f64;
        let mut prev = u;
        for _ in 1..segments {
            let id = nodes;
            nodes += 1;
            out.push((prev, id, step));
            prev = id;
        }
        out.push((prev, v, step));
    }
    Ok(Subdivided { nodes, edges: out })
}

/// All-pairs shortest paths; errors if the graph is disconnected.
pub(crate) fn graph_distances(nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Vec<f64>> {
    let mut g: UnGraph<(), f64> = UnGraph::with_capacity(nodes, edges.len());
    for _ in 0..nodes {
        g.add_node(());
    }
    for &(u, v, w) in edges {
        g.add_edge(NodeIndex::new(u), NodeIndex::new(v), w);
    }
    let components = petgraph::algo::connected_components(&g);
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    let mut dist = vec![0.0; nodes * nodes];
    for s in 0..nodes {
        let res = dijkstra(&g, NodeIndex::new(s), None, |e| *e.weight());
        for (node, d) in res {
            dist[s * nodes + node.index()] = d;
        }
    }
    // Symmetrize away summation-order noise.
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            let m = dist[i * nodes + j].min(dist[j * nodes + i]);
            dist[i * nodes + j] = m;
            dist[j * nodes + i] = m;
        }
    }
    Ok(dist)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn line(n: usize, h: f64) -> FiniteMetricSpace {
        let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect()).collect();
        FiniteMetricSpace::from_distance_matrix(&m, h).unwrap()
    }

    #[test]
    fn singleton_and_path_matrices() {
        let s = FiniteMetricSpace::from_distance_matrix(&[vec![0.0]], 1.0).unwrap();
        assert_eq!(s.len(), 1);
        let m = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        let s = FiniteMetricSpace::from_distance_matrix(&m, 0.5).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dist(0, 2), 2.0);
    }

    #[test]
    fn triangle_violation_names_triple() {
        let m = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        match FiniteMetricSpace::from_distance_matrix(&m, 1.0) {
            Err(Error::TriangleViolation { i: 0, j: 1, k: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_asymmetric_and_ragged() {
        let m = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(FiniteMetricSpace::from_distance_matrix(&m, 1.0), Err(Error::Asymmetric { .. })));
        let m = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(FiniteMetricSpace::from_distance_matrix(&m, 1.0), Err(Error::NotSquare { .. })));
        assert!(matches!(FiniteMetricSpace::from_distance_matrix(&[vec![0.0]], 0.0), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn close_points_warn() {
        let m = vec![vec![0.0, 0.1], vec![0.1, 0.0]];
        let s = FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap();
        assert_eq!(s.warnings().len(), 1);
    }

    #[test]
    fn single_edge_subdivides() {
        let s = FiniteMetricSpace::from_weighted_graph(&[(0, 1, 10.0)], 1.0).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s.dist(0, 1), 10.0);
        assert_eq!(s.diameter(&s.all_points()), 10.0);
    }

    #[test]
    fn triangle_graph_against_brute_force() {
        let s = FiniteMetricSpace::from_weighted_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], 0.5).unwrap();
        assert_eq!(s.len(), 6);
        // Floyd-Warshall over the subdivided hexagon as an independent oracle.
        let n = 6;
        let mut fw = vec![vec![f64::INFINITY; n]; n];
        for i in 0..n {
            fw[i][i] = 0.0;
        }
        // node ids: 0,1,2 original; 3 on (0,1); 4 on (1,2); 5 on (2,0)
        for &(a, b) in &[(0, 3), (3, 1), (1, 4), (4, 2), (2, 5), (5, 0)] {
            fw[a][b] = 0.5;
            fw[b][a] = 0.5;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    fw[i][j] = fw[i][j].min(fw[i][k] + fw[k][j]);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(s.dist(i, j), fw[i][j]);
                assert!(s.dist(i, j) <= 1.5);
            }
        }
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let r = FiniteMetricSpace::from_weighted_graph(&[(0, 1, 1.0), (2, 3, 1.0)], 1.0);
        assert!(matches!(r, Err(Error::Disconnected { components: 2 })));
    }

    #[test]
    fn balls_and_shells_on_a_line() {
        let s = line(11, 1.0);
        assert_eq!(s.ball(4, 0.0).ids(), &[4]);
        assert_eq!(s.ball(5, 2.5).ids(), &[3, 4, 5, 6, 7]);
        assert_eq!(s.shell(5, 1.5, 3.5).members.ids(), &[2, 3, 7, 8]);
    }

    #[test]
    fn components_on_a_line() {
        let s = line(11, 1.0);
        let all = s.all_points();
        assert_eq!(s.components_at_scale(&all, 10.0).len(), 1);
        let cut = all.difference(&PointSet::from(vec![5]));
        let comps = s.components_at_scale(&cut, 1.0);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].ids(), &[0, 1, 2, 3, 4]);
        assert_eq!(comps[1].ids(), &[6, 7, 8, 9, 10]);
    }

    #[test]
    fn two_clusters_split() {
        let m = vec![
            vec![0.0, 0.5, 100.0, 100.5],
            vec![0.5, 0.0, 99.5, 100.0],
            vec![100.0, 99.5, 0.0, 0.5],
            vec![100.5, 100.0, 0.5, 0.0],
        ];
        let s = FiniteMetricSpace::from_distance_matrix(&m, 0.5).unwrap();
        assert_eq!(s.components_at_scale(&s.all_points(), 1.0).len(), 2);
    }

    #[test]
    fn diameters() {
        let s = line(11, 1.0);
        assert_eq!(s.diameter(&PointSet::from(vec![3])), 0.0);
        assert_eq!(s.diameter(&PointSet::new()), 0.0);
        assert_eq!(s.diameter(&s.all_points()), 10.0);
    }

    #[test]
    fn subspace_keeps_distances() {
        let s = line(11, 1.0);
        let (sub, map) = s.subspace(&PointSet::from(vec![2, 7, 9]));
        assert_eq!(map, vec![2, 7, 9]);
        assert_eq!(sub.dist(0, 2), 7.0);
    }

    fn random_space(seed: u64, n: usize) -> FiniteMetricSpace {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0..20) as f64, rng.gen_range(0..20) as f64)).collect();
        let m: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| pts.iter().map(|b| (a.0 - b.0).abs() + (a.1 - b.1).abs()).collect())
            .collect();
        FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap()
    }

    proptest! {
        #[test]
        fn ball_monotone(seed in 0u64..1000, x in 0usize..12, r in 0.0f64..30.0, dr in 0.0f64..10.0) {
            let s = random_space(seed, 12);
            prop_assert!(s.ball(x, r).is_subset(&s.ball(x, r + dr)));
        }

        #[test]
        fn shells_split_disjointly(seed in 0u64..1000, x in 0usize..12, a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0) {
            let s = random_space(seed, 12);
            let (b, c) = (a + b, a + b + c);
            let left = s.shell(x, a, b).members;
            let right = s.shell(x, b, c).members;
            prop_assert!(left.is_disjoint(&right));
            prop_assert_eq!(left.union(&right), s.shell(x, a, c).members);
        }

        #[test]
        fn components_refine(seed in 0u64..1000, s1 in 0.5f64..8.0, ds in 0.0f64..8.0) {
            let s = random_space(seed, 12);
            let all = s.all_points();
            let fine = s.components_at_scale(&all, s1);
            let coarse = s.components_at_scale(&all, s1 + ds);
            for f in &fine {
                prop_assert!(coarse.iter().any(|c| f.is_subset(c)));
            }
        }

        #[test]
        fn diameter_monotone(seed in 0u64..1000, mask in 0u32..4096, extra in 0u32..4096) {
            let s = random_space(seed, 12);
            let a: PointSet = (0..12).filter(|i| mask >> i & 1 == 1).collect();
            let b: PointSet = (0..12).filter(|i| (mask | extra) >> i & 1 == 1).collect();
            prop_assert!(s.diameter(&a) <= s.diameter(&b));
        }
    }
}
