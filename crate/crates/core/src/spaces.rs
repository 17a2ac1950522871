//! Deterministic generators for test spaces.
//!
//! Lattice spacing and `mesh_h` are separate parameters: `mesh_h` defaults to
//! the spacing but may be set far below it, which models a sparse sample of a
//! space whose local content is small.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{graph_distances, subdivide, FiniteMetricSpace};

pub const DEFAULT_POINT_BUDGET: usize = 6000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMetric {
    #[default]
    Euclidean,
    /// Shortest paths in the 4-neighbor lattice graph.
    Graph,
}

/// Product of a space with an interval net, `max`-combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thickening {
    pub points: usize,
    pub spacing: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Grid {
        width: usize,
        height: usize,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        mesh_h: Option<f64>,
        #[serde(default)]
        metric: GridMetric,
    },
    /// A `length × rows` lattice.
    Strip {
        length: usize,
        rows: usize,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        mesh_h: Option<f64>,
        #[serde(default)]
        metric: GridMetric,
    },
    /// Product of two cycles of `major` and `minor` lattice points.
    TorusNet {
        major: usize,
        minor: usize,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        mesh_h: Option<f64>,
    },
    /// Latitude-longitude net on a round sphere with poles.
    SphereNet {
        rings: usize,
        sectors: usize,
        radius: f64,
        #[serde(default)]
        mesh_h: Option<f64>,
    },
    /// Complete graph on five vertices with every edge of length `edge_len`.
    K5 {
        edge_len: f64,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        mesh_h: Option<f64>,
        #[serde(default)]
        thickening: Option<Thickening>,
    },
    /// Tripod with legs of length `leg_len`, times `[0, interval_len]`.
    TripodProduct {
        leg_len: f64,
        interval_len: f64,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        mesh_h: Option<f64>,
    },
    /// 3-regular tree of the given depth with edges of length `edge_len`,
    /// times `[0, epsilon]`.
    TreeCrossInterval {
        depth: usize,
        edge_len: f64,
        epsilon: f64,
        spacing: f64,
        #[serde(default)]
        mesh_h: Option<f64>,
    },
    /// Clusters on a line: `count` groups of `per_cluster` evenly spaced
    /// points spanning `width`, starting `gap` apart plus a seeded jitter.
    Clusters {
        count: usize,
        per_cluster: usize,
        width: f64,
        gap: f64,
        mesh_h: f64,
        #[serde(default)]
        jitter: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Explicit coordinates with the Euclidean metric.
    Points { coords: Vec<Vec<f64>>, mesh_h: f64 },
}

pub fn generate(spec: &GeneratorSpec) -> Result<FiniteMetricSpace> {
    generate_with_budget(spec, DEFAULT_POINT_BUDGET)
}

fn check_budget(points: usize, budget: usize) -> Result<()> {
    if points > budget {
        return Err(Error::PointBudget { points, budget });
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
    }
    Ok(())
}

pub fn generate_with_budget(spec: &GeneratorSpec, budget: usize) -> Result<FiniteMetricSpace> {
    match spec {
        GeneratorSpec::Grid { width, height, spacing, mesh_h, metric } | GeneratorSpec::Strip { length: width, rows: height, spacing, mesh_h, metric } => {
            nonzero("grid size", *width)?;
            nonzero("grid size", *height)?;
            positive("spacing", *spacing)?;
            check_budget(width * height, budget)?;
            let pts: Vec<(f64, f64)> = (0..*width).flat_map(|i| (0..*height).map(move |j| (i as f64, j as f64))).collect();
            let dist = pairwise(&pts, |a, b| match metric {
                GridMetric::Euclidean => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() * spacing,
                GridMetric::Graph => ((a.0 - b.0).abs() + (a.1 - b.1).abs()) * spacing,
            });
            finish(pts.len(), dist, mesh_h.unwrap_or(*spacing))
        }
        GeneratorSpec::TorusNet { major, minor, spacing, mesh_h } => {
            nonzero("major", *major)?;
            nonzero("minor", *minor)?;
            positive("spacing", *spacing)?;
            check_budget(major * minor, budget)?;
            let id = |i: usize, j: usize| i * minor + j;
            let mut edges = Vec::new();
            for i in 0..*major {
                for j in 0..*minor {
                    if *major > 1 && !(*major == 2 && i == 1) {
                        edges.push((id(i, j), id((i + 1) % major, j), *spacing));
                    }
                    if *minor > 1 && !(*minor == 2 && j == 1) {
                        edges.push((id(i, j), id(i, (j + 1) % minor), *spacing));
                    }
                }
            }
            let n = major * minor;
            let dist = if n == 1 { vec![0.0] } else { graph_distances(n, &edges)? };
            finish(n, dist, mesh_h.unwrap_or(*spacing))
        }
        GeneratorSpec::SphereNet { rings, sectors, radius, mesh_h } => {
            nonzero("rings", *rings)?;
            nonzero("sectors", *sectors)?;
            positive("radius", *radius)?;
            let n = rings * sectors + 2;
            check_budget(n, budget)?;
            let pos = |k: usize| -> [f64; 3] {
                if k == 0 {
                    return [0.0, 0.0, *radius];
                }
                if k == n - 1 {
                    return [0.0, 0.0, -radius];
                }
                let (i, j) = ((k - 1) / sectors, (k - 1) % sectors);
                let theta = std::f64::consts::PI * (i + 1) as f64 / (rings + 1) as f64;
                let phi = 2.0 * std::f64::consts::PI * j as f64 / *sectors as f64;
                [radius * theta.sin() * phi.cos(), radius * theta.sin() * phi.sin(), radius * theta.cos()]
            };
            let arc = |a: usize, b: usize| {
                let (p, q) = (pos(a), pos(b));
                let dot = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]) / (radius * radius);
                radius * dot.clamp(-1.0, 1.0).acos()
            };
            let id = |i: usize, j: usize| 1 + i * sectors + j;
            let mut edges = Vec::new();
            for j in 0..*sectors {
                edges.push((0, id(0, j), arc(0, id(0, j))));
                edges.push((id(rings - 1, j), n - 1, arc(id(rings - 1, j), n - 1)));
                for i in 0..*rings {
                    if *sectors > 1 {
                        let (a, b) = (id(i, j), id(i, (j + 1) % sectors));
                        if a != b {
                            edges.push((a, b, arc(a, b)));
                        }
                    }
                    if i + 1 < *rings {
                        edges.push((id(i, j), id(i + 1, j), arc(id(i, j), id(i + 1, j))));
                    }
                }
            }
            let spacing = edges.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
            let dist = graph_distances(n, &edges)?;
            finish(n, dist, mesh_h.unwrap_or(spacing))
        }
        GeneratorSpec::K5 { edge_len, spacing, mesh_h, thickening } => {
            positive("edge_len", *edge_len)?;
            positive("spacing", *spacing)?;
            let edges: Vec<(usize, usize, f64)> = (0..5).flat_map(|u| ((u + 1)..5).map(move |v| (u, v, *edge_len))).collect();
            graph_space(&edges, *spacing, mesh_h.unwrap_or(*spacing), *thickening, budget)
        }
        GeneratorSpec::TripodProduct { leg_len, interval_len, spacing, mesh_h } => {
            positive("leg_len", *leg_len)?;
            positive("interval_len", *interval_len)?;
            positive("spacing", *spacing)?;
            let edges = vec![(0, 1, *leg_len), (0, 2, *leg_len), (0, 3, *leg_len)];
            let thick = interval_net(*interval_len, *spacing);
            graph_space(&edges, *spacing, mesh_h.unwrap_or(*spacing), Some(thick), budget)
        }
        GeneratorSpec::TreeCrossInterval { depth, edge_len, epsilon, spacing, mesh_h } => {
            nonzero("depth", *depth)?;
            positive("edge_len", *edge_len)?;
            positive("epsilon", *epsilon)?;
            positive("spacing", *spacing)?;
            let edges = cubic_tree(*depth, *edge_len);
            let thick = interval_net(*epsilon, *spacing);
            graph_space(&edges, *spacing, mesh_h.unwrap_or(*spacing), Some(thick), budget)
        }
        GeneratorSpec::Clusters { count, per_cluster, width, gap, mesh_h, jitter, seed } => {
            nonzero("count", *count)?;
            nonzero("per_cluster", *per_cluster)?;
            positive("gap", *gap)?;
            if !(*width >= 0.0) || !(*jitter >= 0.0) {
                return Err(Error::InvalidParameter("cluster width and jitter must be nonnegative".into()));
            }
            check_budget(count * per_cluster, budget)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut xs = Vec::with_capacity(count * per_cluster);
            for k in 0..*count {
                let start = k as f64 * gap + if *jitter > 0.0 { rng.gen_range(0.0..*jitter) } else { 0.0 };
                for i in 0..*per_cluster {
                    let t = if *per_cluster == 1 { 0.0 } else { i as f64 / (*per_cluster - 1) as f64 };
                    xs.push(start + t * width);
                }
            }
            let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.0)).collect();
            finish(pts.len(), pairwise(&pts, |a, b| (a.0 - b.0).abs()), *mesh_h)
        }
        GeneratorSpec::Points { coords, mesh_h } => {
            check_budget(coords.len(), budget)?;
            let dim = coords.first().map_or(0, |c| c.len());
            if coords.iter().any(|c| c.len() != dim || c.iter().any(|v| !v.is_finite())) {
                return Err(Error::InvalidParameter("coordinates must be finite and of equal length".into()));
            }
            let m: Vec<Vec<f64>> = coords
                .iter()
                .map(|a| coords.iter().map(|b| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()).collect())
                .collect();
            FiniteMetricSpace::from_distance_matrix(&m, *mesh_h)
        }
    }
}

fn pairwise<P>(pts: &[P], d: impl Fn(&P, &P) -> f64) -> Vec<f64> {
    let n = pts.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = d(&pts[i], &pts[j]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

fn finish(n: usize, dist: Vec<f64>, mesh_h: f64) -> Result<FiniteMetricSpace> {
    positive("mesh_h", mesh_h).map_err(|_| Error::InvalidMesh(mesh_h))?;
    Ok(FiniteMetricSpace::from_trusted(n, dist, mesh_h))
}

fn interval_net(len: f64, spacing: f64) -> Thickening {
    let ratio = len / spacing;
    let segments = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() }.max(1.0) as usize;
    Thickening { points: segments + 1, spacing: len / segments as f64 }
}

/// Edges of a tree whose root has three children and whose other internal
/// vertices have two, so internal degrees are all 3.
fn cubic_tree(depth: usize, len: f64) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    let mut next_id = 1;
    for level in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            for _ in 0..if level == 0 { 3 } else { 2 } {
                edges.push((v, next_id, len));
                next.push(next_id);
                next_id += 1;
            }
        }
        frontier = next;
    }
    edges
}

/// Subdivided metric graph, optionally times an interval net under the
/// `max` product metric. Point `(a, t)` has id `a * points + t`.
fn graph_space(edges: &[(usize, usize, f64)], spacing: f64, mesh_h: f64, thick: Option<Thickening>, budget: usize) -> Result<FiniteMetricSpace> {
    let sub = subdivide(edges, spacing)?;
    let layers = thick.map_or(1, |t| t.points);
    check_budget(sub.nodes * layers, budget)?;
    let base = graph_distances(sub.nodes, &sub.edges)?;
    let Some(t) = thick else {
        return finish(sub.nodes, base, mesh_h);
    };
    positive("thickening spacing", t.spacing)?;
    let m = sub.nodes;
    let n = m * layers;
    let mut dist = vec![0.0; n * n];
    for a in 0..m {
        for s in 0..layers {
            let i = a * layers + s;
            for b in 0..m {
                for u in 0..layers {
                    let j = b * layers + u;
                    dist[i * n + j] = base[a * m + b].max((s as f64 - u as f64).abs() * t.spacing);
                }
            }
        }
    }
    finish(n, dist, mesh_h)
}
