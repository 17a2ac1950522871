//! Planar drawings of metric graphs and their large fibers.
//!
//! A drawing maps each edge of a metric graph to a polyline; polyline vertex
//! `k` of `m` is the image of the edge point at parameter `k / (m - 1)`, and
//! images are linear in between. [`audit_drawing`] looks for two graph points
//! far apart in the graph whose images (nearly) coincide.
//!
//! Exact predicates run on coordinates snapped to a grid of resolution
//! `snap`, with rational arithmetic.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SNAP: f64 = 1e-9;
/// Coordinates are limited so snapped values stay well inside `i64`.
const MAX_SNAPPED: f64 = 4.0e18;

pub type Point2 = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawnEdge {
    pub u: usize,
    pub v: usize,
    /// Metric length; `10R` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub polyline: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drawing {
    #[serde(rename = "R")]
    pub r: f64,
    pub edges: Vec<DrawnEdge>,
}

/// A point on edge `edge` at parameter `param` in `[0, 1]`, measured from `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphPoint {
    pub edge: usize,
    pub param: f64,
}

impl GraphPoint {
    fn key(&self) -> (usize, u64) {
        (self.edge, self.param.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessSource {
    /// Two sample images within the tolerance.
    Sample,
    /// An exact crossing of two polyline segments.
    Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberWitness {
    pub p: GraphPoint,
    pub q: GraphPoint,
    pub graph_dist: f64,
    pub image_dist: f64,
    pub source: WitnessSource,
}

/// A drawing with its graph metric precomputed.
#[derive(Debug, Clone)]
pub struct MetricDrawing {
    drawing: Drawing,
    lengths: Vec<f64>,
    vertex_dist: Vec<Vec<f64>>,
    vertex_index: HashMap<usize, usize>,
}

impl MetricDrawing {
    pub fn new(drawing: &Drawing) -> Result<Self> {
        if !(drawing.r.is_finite() && drawing.r > 0.0) {
            return Err(Error::MalformedDrawing(format!("R must be positive, got {}", drawing.r)));
        }
        if drawing.edges.is_empty() {
            return Err(Error::MalformedDrawing("no edges".into()));
        }
        let mut vertex_index = HashMap::new();
        let mut anchor: HashMap<usize, Point2> = HashMap::new();
        let mut lengths = Vec::with_capacity(drawing.edges.len());
        for (i, e) in drawing.edges.iter().enumerate() {
            if e.u == e.v {
                return Err(Error::MalformedDrawing(format!("edge {i} is a loop at vertex {}", e.u)));
            }
            if e.polyline.len() < 2 {
                return Err(Error::MalformedDrawing(format!("edge {i} polyline has {} vertices; need at least 2", e.polyline.len())));
            }
            if let Some(p) = e.polyline.iter().flatten().find(|c| !c.is_finite() || c.abs() * (1.0 / DEFAULT_SNAP) > MAX_SNAPPED) {
                return Err(Error::MalformedDrawing(format!("edge {i} has an unusable coordinate {p}")));
            }
            let len = e.length.unwrap_or(10.0 * drawing.r);
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::MalformedDrawing(format!("edge {i} has length {len}")));
            }
            lengths.push(len);
            for (vertex, end) in [(e.u, e.polyline[0]), (e.v, *e.polyline.last().unwrap())] {
                let next = vertex_index.len();
                vertex_index.entry(vertex).or_insert(next);
                if let Some(prev) = anchor.insert(vertex, end) {
                    if prev != end {
                        return Err(Error::MalformedDrawing(format!("edge {i} disagrees about the image of vertex {vertex}: {prev:?} vs {end:?}")));
                    }
                }
            }
        }
        let nv = vertex_index.len();
        let mut d = vec![vec![f64::INFINITY; nv]; nv];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for (e, &len) in drawing.edges.iter().zip(&lengths) {
            let (a, b) = (vertex_index[&e.u], vertex_index[&e.v]);
            if len < d[a][b] {
                d[a][b] = len;
                d[b][a] = len;
            }
        }
        for k in 0..nv {
            for i in 0..nv {
                for j in 0..nv {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        if d.iter().flatten().any(|v| v.is_infinite()) {
            return Err(Error::MalformedDrawing("graph is disconnected".into()));
        }
        Ok(MetricDrawing { drawing: drawing.clone(), lengths, vertex_dist: d, vertex_index })
    }

    pub fn drawing(&self) -> &Drawing {
        &self.drawing
    }

    pub fn r(&self) -> f64 {
        self.drawing.r
    }

    pub fn edge_len(&self, e: usize) -> f64 {
        self.lengths[e]
    }

    /// Shortest-path distance on the metric graph.
    pub fn graph_dist(&self, p: GraphPoint, q: GraphPoint) -> f64 {
        let (ep, eq) = (&self.drawing.edges[p.edge], &self.drawing.edges[q.edge]);
        let (lp, lq) = (self.lengths[p.edge], self.lengths[q.edge]);
        let p_ends = [(self.vertex_index[&ep.u], p.param * lp), (self.vertex_index[&ep.v], (1.0 - p.param) * lp)];
        let q_ends = [(self.vertex_index[&eq.u], q.param * lq), (self.vertex_index[&eq.v], (1.0 - q.param) * lq)];
        let mut best = f64::INFINITY;
        if p.edge == q.edge {
            best = (p.param - q.param).abs() * lp;
        }
        for &(a, da) in &p_ends {
            for &(b, db) in &q_ends {
                best = best.min(da + self.vertex_dist[a][b] + db);
            }
        }
        best
    }

    /// Image of a graph point under the drawing.
    pub fn image(&self, p: GraphPoint) -> Point2 {
        let poly = &self.drawing.edges[p.edge].polyline;
        let segs = poly.len() - 1;
        let x = p.param.clamp(0.0, 1.0) * segs as f64;
        let k = (x.floor() as usize).min(segs - 1);
        let t = x - k as f64;
        let (a, b) = (poly[k], poly[k + 1]);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    pub fn image_dist(&self, p: GraphPoint, q: GraphPoint) -> f64 {
        let (a, b) = (self.image(p), self.image(q));
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    fn witness(&self, p: GraphPoint, q: GraphPoint, source: WitnessSource) -> FiberWitness {
        let (p, q) = if p.key() <= q.key() { (p, q) } else { (q, p) };
        FiberWitness { p, q, graph_dist: self.graph_dist(p, q), image_dist: self.image_dist(p, q), source }
    }
}

type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QPoint {
    pub x: Q,
    pub y: Q,
}

impl QPoint {
    fn snap(p: Point2, snap: f64) -> QPoint {
        let s = |v: f64| Q::from_integer(BigInt::from_f64((v / snap).round()).expect("finite coordinate"));
        QPoint { x: s(p[0]), y: s(p[1]) }
    }

    fn to_f64(&self, snap: f64) -> Point2 {
        [self.x.to_f64().unwrap_or(f64::NAN) * snap, self.y.to_f64().unwrap_or(f64::NAN) * snap]
    }

    fn lerp(a: &QPoint, b: &QPoint, t: &Q) -> QPoint {
        QPoint { x: &a.x + (&b.x - &a.x) * t, y: &a.y + (&b.y - &a.y) * t }
    }
}

fn sub(a: &QPoint, b: &QPoint) -> (Q, Q) {
    (&a.x - &b.x, &a.y - &b.y)
}

fn cross2(a: &(Q, Q), b: &(Q, Q)) -> Q {
    &a.0 * &b.1 - &a.1 * &b.0
}

fn dot2(a: &(Q, Q), b: &(Q, Q)) -> Q {
    &a.0 * &b.0 + &a.1 * &b.1
}

fn unit(t: &Q) -> bool {
    !t.is_negative() && *t <= Q::from_integer(1.into())
}

/// Exact intersection of segments `a0a1` and `b0b1` (either may be a point),
/// as parameter pairs `(t on a, u on b)`: one pair for a point, the two ends
/// for a collinear overlap, none when disjoint.
pub fn segment_intersection(a0: &QPoint, a1: &QPoint, b0: &QPoint, b1: &QPoint) -> Vec<(Q, Q)> {
    let da = sub(a1, a0);
    let db = sub(b1, b0);
    let w = sub(b0, a0);
    let denom = cross2(&da, &db);
    let zero = Q::zero();
    if !denom.is_zero() {
        let t = cross2(&w, &db) / &denom;
        let u = cross2(&w, &da) / &denom;
        return if unit(&t) && unit(&u) { vec![(t, u)] } else { vec![] };
    }
    let a_point = da.0.is_zero() && da.1.is_zero();
    let b_point = db.0.is_zero() && db.1.is_zero();
    match (a_point, b_point) {
        (true, true) => {
            if a0 == b0 {
                vec![(zero.clone(), zero)]
            } else {
                vec![]
            }
        }
        (true, false) => {
            // a0 on b?
            let v = sub(a0, b0);
            if !cross2(&db, &v).is_zero() {
                return vec![];
            }
            let u = dot2(&v, &db) / dot2(&db, &db);
            if unit(&u) {
                vec![(zero, u)]
            } else {
                vec![]
            }
        }
        (false, true) => {
            if !cross2(&da, &w).is_zero() {
                return vec![];
            }
            let t = dot2(&w, &da) / dot2(&da, &da);
            if unit(&t) {
                vec![(t, zero)]
            } else {
                vec![]
            }
        }
        (false, false) => {
            if !cross2(&da, &w).is_zero() {
                return vec![];
            }
            let len_a = dot2(&da, &da);
            let tb0 = dot2(&w, &da) / &len_a;
            let tb1 = dot2(&sub(b1, a0), &da) / &len_a;
            let (lo, hi) = if tb0 <= tb1 { (tb0, tb1) } else { (tb1, tb0) };
            let one = Q::from_integer(1.into());
            let lo = if lo < zero { zero.clone() } else { lo };
            let hi = if hi > one { one } else { hi };
            if lo > hi {
                return vec![];
            }
            let len_b = dot2(&db, &db);
            let u_of = |t: &Q| dot2(&sub(&QPoint::lerp(a0, a1, t), b0), &db) / &len_b;
            let mut out = vec![(lo.clone(), u_of(&lo))];
            if hi != lo {
                out.push((hi.clone(), u_of(&hi)));
            }
            out
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimpleArc {
    pub points: Vec<Point2>,
    /// Parameter of each output vertex along the input polyline, in `[0, 1]`.
    pub params: Vec<f64>,
    /// The image reduced to a single point; `points` holds it twice.
    pub degenerate: bool,
    pub loops_removed: usize,
    #[serde(skip)]
    pub exact: Vec<QPoint>,
}

type SegmentHits = (usize, usize, Vec<(Q, Q)>);

/// A simple polyline inside the image of `polyline` with the same endpoints.
///
/// Every segment is split at every intersection with every other segment;
/// walking the pieces in order and cutting back to the earlier visit
/// whenever a vertex repeats leaves a path with distinct vertices whose
/// pieces meet only at shared endpoints.
pub fn simplify_to_simple_arc(polyline: &[Point2], snap: f64) -> Result<SimpleArc> {
    if polyline.len() < 2 {
        return Err(Error::MalformedDrawing(format!("polyline has {} vertices; need at least 2", polyline.len())));
    }
    if !(snap > 0.0) {
        return Err(Error::InvalidParameter(format!("snap must be positive, got {snap}")));
    }
    if let Some(c) = polyline.iter().flatten().find(|c| !c.is_finite() || (*c / snap).abs() > MAX_SNAPPED) {
        return Err(Error::MalformedDrawing(format!("unusable coordinate {c}")));
    }
    let m = polyline.len();
    let pts: Vec<QPoint> = polyline.iter().map(|&p| QPoint::snap(p, snap)).collect();
    let nseg = m - 1;
    let mut splits: Vec<Vec<Q>> = (0..nseg).map(|_| vec![Q::zero(), Q::from_integer(1.into())]).collect();
    // (segment, later segment, parameters of each crossing on both)
    let pairs: Vec<SegmentHits> = (0..nseg)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pts = &pts;
            ((i + 1)..nseg).map(move |j| (i, j, segment_intersection(&pts[i], &pts[i + 1], &pts[j], &pts[j + 1])))
        })
        .collect();
    for (i, j, hits) in pairs {
        for (t, u) in hits {
            splits[i].push(t);
            splits[j].push(u);
        }
    }
    let mut seq: Vec<(QPoint, f64)> = Vec::new();
    for (i, ts) in splits.iter_mut().enumerate() {
        ts.sort();
        ts.dedup();
        for t in ts.iter() {
            let p = QPoint::lerp(&pts[i], &pts[i + 1], t);
            if seq.last().is_some_and(|(q, _)| *q == p) {
                continue;
            }
            let param = (i as f64 + t.to_f64().unwrap_or(0.0)) / nseg as f64;
            seq.push((p, param));
        }
    }
    let mut out: Vec<(QPoint, f64)> = Vec::new();
    let mut index: HashMap<QPoint, usize> = HashMap::new();
    let mut loops = 0;
    for (p, param) in seq {
        if let Some(&k) = index.get(&p) {
            for (q, _) in out.drain(k + 1..) {
                index.remove(&q);
            }
            loops += 1;
            continue;
        }
        index.insert(p.clone(), out.len());
        out.push((p, param));
    }
    let degenerate = out.len() == 1;
    if degenerate {
        let only = out[0].clone();
        out.push((only.0, 1.0));
    }
    Ok(SimpleArc {
        points: out.iter().map(|(p, _)| p.to_f64(snap)).collect(),
        params: out.iter().map(|(_, t)| *t).collect(),
        degenerate,
        loops_removed: loops,
        exact: out.into_iter().map(|(p, _)| p).collect(),
    })
}

/// No two segments meet except consecutive ones at their shared vertex.
pub fn is_simple(points: &[QPoint]) -> bool {
    let n = points.len();
    if n < 2 {
        return true;
    }
    if n == 2 {
        return true;
    }
    if points.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    for i in 0..n - 1 {
        for j in (i + 1)..n - 1 {
            let hits = segment_intersection(&points[i], &points[i + 1], &points[j], &points[j + 1]);
            let allowed = j == i + 1 && hits.len() == 1 && hits[0].0 == Q::from_integer(1.into()) && hits[0].1.is_zero();
            if !hits.is_empty() && !allowed {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub witness: Option<FiberWitness>,
    #[serde(rename = "R")]
    pub r: f64,
    /// The witness fiber is wider than `R`.
    pub exceeds_r: bool,
    pub samples: usize,
    pub sample_collisions: usize,
    pub crossings: usize,
    pub collision_tol: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub collision_tol: f64,
    /// Samples per unit of graph length, rounded up to a power of two per
    /// edge so that denser samplings contain sparser ones.
    pub density: f64,
    pub snap: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { collision_tol: 1e-6, density: 4.0, snap: DEFAULT_SNAP }
    }
}

fn samples(md: &MetricDrawing, density: f64) -> Vec<GraphPoint> {
    let mut out = Vec::new();
    for (e, edge) in md.drawing.edges.iter().enumerate() {
        let want = (md.lengths[e] * density).ceil().max(1.0) as usize;
        let count = want.next_power_of_two();
        let mut params: Vec<f64> = (0..=count).map(|k| k as f64 / count as f64).collect();
        let segs = edge.polyline.len() - 1;
        params.extend((0..=segs).map(|k| k as f64 / segs as f64));
        params.sort_by(f64::total_cmp);
        params.dedup();
        out.extend(params.into_iter().map(|param| GraphPoint { edge: e, param }));
    }
    out
}

fn better(a: &FiberWitness, b: &FiberWitness) -> bool {
    match a.graph_dist.total_cmp(&b.graph_dist) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.p.key(), a.q.key()) < (b.p.key(), b.q.key()),
    }
}

fn sample_collisions(md: &MetricDrawing, pts: &[GraphPoint], tol: f64) -> Vec<FiberWitness> {
    let images: Vec<Point2> = pts.iter().map(|&p| md.image(p)).collect();
    let cell = |p: Point2| ((p[0] / tol).floor() as i64, (p[1] / tol).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &im) in images.iter().enumerate() {
        grid.entry(cell(im)).or_default().push(i);
    }
    let mut keys: Vec<(i64, i64)> = grid.keys().copied().collect();
    keys.sort_unstable();
    keys.par_iter()
        .flat_map_iter(|&(cx, cy)| {
            let grid = &grid;
            let images = &images;
            let mine = &grid[&(cx, cy)];
            let mut found = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(other) = grid.get(&(cx + dx, cy + dy)) else { continue };
                    for &i in mine {
                        for &j in other {
                            if j <= i {
                                continue;
                            }
                            let d = ((images[i][0] - images[j][0]).powi(2) + (images[i][1] - images[j][1]).powi(2)).sqrt();
                            if d <= tol {
                                found.push(md.witness(pts[i], pts[j], WitnessSource::Sample));
                            }
                        }
                    }
                }
            }
            found
        })
        .collect()
}

fn crossing_witnesses(md: &MetricDrawing, snap: f64) -> Vec<FiberWitness> {
    struct Seg {
        edge: usize,
        k: usize,
        segs: usize,
        a: QPoint,
        b: QPoint,
        lo: Point2,
        hi: Point2,
    }
    let mut all = Vec::new();
    for (e, edge) in md.drawing.edges.iter().enumerate() {
        let segs = edge.polyline.len() - 1;
        for k in 0..segs {
            let (p, q) = (edge.polyline[k], edge.polyline[k + 1]);
            all.push(Seg {
                edge: e,
                k,
                segs,
                a: QPoint::snap(p, snap),
                b: QPoint::snap(q, snap),
                lo: [p[0].min(q[0]) - snap, p[1].min(q[1]) - snap],
                hi: [p[0].max(q[0]) + snap, p[1].max(q[1]) + snap],
            });
        }
    }
    let at = |s: &Seg, t: &Q| GraphPoint { edge: s.edge, param: ((s.k as f64 + t.to_f64().unwrap_or(0.0)) / s.segs as f64).clamp(0.0, 1.0) };
    (0..all.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let all = &all;
            ((i + 1)..all.len()).flat_map(move |j| {
                let (s, t) = (&all[i], &all[j]);
                if s.hi[0] < t.lo[0] || t.hi[0] < s.lo[0] || s.hi[1] < t.lo[1] || t.hi[1] < s.lo[1] {
                    return Vec::new();
                }
                if s.edge == t.edge && t.k == s.k + 1 {
                    // Consecutive pieces share a vertex; only overlaps matter.
                    let hits = segment_intersection(&s.a, &s.b, &t.a, &t.b);
                    if hits.len() < 2 {
                        return Vec::new();
                    }
                }
                segment_intersection(&s.a, &s.b, &t.a, &t.b)
                    .into_iter()
                    .map(|(x, y)| md.witness(at(s, &x), at(t, &y), WitnessSource::Crossing))
                    .collect()
            })
        })
        .collect()
}

/// Best fiber witness: the colliding pair of graph points with the largest
/// graph distance, from sampled images within `collision_tol` and from exact
/// segment crossings.
pub fn audit_drawing(drawing: &Drawing, opts: &AuditOptions) -> Result<AuditReport> {
    if !(opts.collision_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("collision tolerance must be positive, got {}", opts.collision_tol)));
    }
    if !(opts.density > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling density must be positive, got {}", opts.density)));
    }
    let md = MetricDrawing::new(drawing)?;
    let pts = samples(&md, opts.density);
    let sampled = sample_collisions(&md, &pts, opts.collision_tol);
    let crossed: Vec<FiberWitness> = crossing_witnesses(&md, opts.snap).into_iter().filter(|w| w.image_dist <= opts.collision_tol).collect();
    let mut best: Option<FiberWitness> = None;
    for w in sampled.iter().chain(&crossed) {
        if best.as_ref().is_none_or(|b| better(w, b)) {
            best = Some(w.clone());
        }
    }
    Ok(AuditReport {
        exceeds_r: best.as_ref().is_some_and(|w| w.graph_dist > md.r()),
        witness: best,
        r: md.r(),
        samples: pts.len(),
        sample_collisions: sampled.len(),
        crossings: crossed.len(),
        collision_tol: opts.collision_tol,
        density: opts.density,
    })
}

/// Unordered edge pairs carrying a sampled collision wider than `R`.
pub fn collision_edge_pairs(drawing: &Drawing, opts: &AuditOptions) -> Result<BTreeSet<(usize, usize)>> {
    let md = MetricDrawing::new(drawing)?;
    let pts = samples(&md, opts.density);
    Ok(sample_collisions(&md, &pts, opts.collision_tol)
        .into_iter()
        .filter(|w| w.graph_dist > md.r())
        .map(|w| (w.p.edge.min(w.q.edge), w.p.edge.max(w.q.edge)))
        .collect())
}

/// Recomputes both distances of a witness from the raw drawing.
pub fn verify_witness(drawing: &Drawing, w: &FiberWitness, collision_tol: f64) -> Result<bool> {
    let md = MetricDrawing::new(drawing)?;
    let ok_params = [w.p, w.q].iter().all(|g| g.edge < drawing.edges.len() && (0.0..=1.0).contains(&g.param));
    Ok(ok_params
        && md.graph_dist(w.p, w.q) == w.graph_dist
        && md.image_dist(w.p, w.q) == w.image_dist
        && w.image_dist <= collision_tol
        && w.graph_dist > md.r())
}

// Trees and connecting arcs.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeArc {
    pub edge: usize,
    /// Graph parameters of the arc vertices on `edge`.
    pub params: Vec<f64>,
    pub points: Vec<Point2>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexTree {
    pub vertex: usize,
    pub arcs: Vec<TreeArc>,
    /// Images of the far ends of the arcs.
    pub endpoints: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionKind {
    TreeTree,
    ArcArc,
    ArcTree,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeIntersection {
    pub kind: IntersectionKind,
    /// Vertex of a tree, or an edge index for a connecting arc.
    pub first: usize,
    pub second: usize,
    pub point: Point2,
    pub witness: FiberWitness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreesDiagnostic {
    pub trees: Vec<VertexTree>,
    pub connecting: Vec<TreeArc>,
    pub intersections: Vec<TreeIntersection>,
    /// First intersection in (kind, first, second) order.
    pub certificate: Option<TreeIntersection>,
}

/// Simple arc through the image of the edge piece `[from, to]` (parameters,
/// either order), with graph parameters for its vertices.
fn arc_on_edge(md: &MetricDrawing, edge: usize, from: f64, to: f64, snap: f64) -> Result<(TreeArc, Vec<QPoint>)> {
    let poly = &md.drawing.edges[edge].polyline;
    let segs = (poly.len() - 1) as f64;
    let (lo, hi) = (from.min(to), from.max(to));
    let mut params = vec![lo];
    params.extend((1..poly.len() - 1).map(|k| k as f64 / segs).filter(|&t| t > lo && t < hi));
    params.push(hi);
    if from > to {
        params.reverse();
    }
    let pts: Vec<Point2> = params.iter().map(|&t| md.image(GraphPoint { edge, param: t })).collect();
    let arc = simplify_to_simple_arc(&pts, snap)?;
    // Map arc parameters (along `pts`) back to graph parameters.
    let n = (params.len() - 1) as f64;
    let graph_params = arc
        .params
        .iter()
        .map(|&s| {
            let x = s * n;
            let k = (x.floor() as usize).min(params.len() - 2);
            let f = x - k as f64;
            params[k] + f * (params[k + 1] - params[k])
        })
        .collect();
    Ok((TreeArc { edge, params: graph_params, points: arc.points }, arc.exact))
}

struct ExactArc {
    arc: TreeArc,
    exact: Vec<QPoint>,
}

impl ExactArc {
    fn param_at(&self, seg: usize, t: &Q) -> f64 {
        let t = t.to_f64().unwrap_or(0.0);
        let p = &self.arc.params;
        if seg + 1 >= p.len() {
            return p[p.len() - 1];
        }
        p[seg] + t * (p[seg + 1] - p[seg])
    }

    /// Truncates to the part after the last meeting with `others`, walking
    /// from the start.
    fn after_last_hit(&self, others: &[&ExactArc]) -> ExactArc {
        let mut cut: Option<(usize, Q)> = None;
        for i in 0..self.exact.len() - 1 {
            for o in others {
                for j in 0..o.exact.len().saturating_sub(1) {
                    for (t, _) in segment_intersection(&self.exact[i], &self.exact[i + 1], &o.exact[j], &o.exact[j + 1]) {
                        if cut.as_ref().is_none_or(|(ci, ct)| (i, &t) > (*ci, ct)) {
                            cut = Some((i, t));
                        }
                    }
                }
            }
        }
        let Some((i, t)) = cut else {
            return ExactArc { arc: self.arc.clone(), exact: self.exact.clone() };
        };
        let start = QPoint::lerp(&self.exact[i], &self.exact[i + 1], &t);
        let mut exact = vec![start];
        let mut params = vec![self.param_at(i, &t)];
        for k in (i + 1)..self.exact.len() {
            if exact.last() != Some(&self.exact[k]) {
                exact.push(self.exact[k].clone());
                params.push(self.arc.params[k]);
            }
        }
        if exact.len() == 1 {
            exact.push(exact[0].clone());
            params.push(params[0]);
        }
        let points = exact.iter().map(|p| p.to_f64(DEFAULT_SNAP)).collect();
        ExactArc { arc: TreeArc { edge: self.arc.edge, params, points }, exact }
    }
}

fn first_meeting(a: &ExactArc, b: &ExactArc) -> Option<(Point2, GraphPoint, GraphPoint)> {
    for i in 0..a.exact.len().saturating_sub(1) {
        for j in 0..b.exact.len().saturating_sub(1) {
            if let Some((t, u)) = segment_intersection(&a.exact[i], &a.exact[i + 1], &b.exact[j], &b.exact[j + 1]).into_iter().next() {
                let point = QPoint::lerp(&a.exact[i], &a.exact[i + 1], &t).to_f64(DEFAULT_SNAP);
                return Some((point, GraphPoint { edge: a.arc.edge, param: a.param_at(i, &t) }, GraphPoint { edge: b.arc.edge, param: b.param_at(j, &u) }));
            }
        }
    }
    None
}

/// Builds, for every vertex, the tree of simple arcs through the images of
/// the edge pieces within `2R` of it, and for every edge a simple arc
/// through the image of its middle part, trimmed to run between the two
/// end trees. Any meeting between different trees or arcs is a pair of
/// graph points more than `R` apart with the same image.
pub fn k5_trees_construction(drawing: &Drawing) -> Result<TreesDiagnostic> {
    let md = MetricDrawing::new(drawing)?;
    let snap = DEFAULT_SNAP;
    let mut vertices: Vec<usize> = md.vertex_index.keys().copied().collect();
    vertices.sort_unstable();

    let mut trees: Vec<(usize, Vec<ExactArc>)> = Vec::new();
    for &v in &vertices {
        let mut arcs: Vec<ExactArc> = Vec::new();
        for (e, edge) in drawing.edges.iter().enumerate() {
            if edge.u != v && edge.v != v {
                continue;
            }
            let reach = (2.0 * md.r() / md.lengths[e]).min(0.5);
            let (from, to) = if edge.u == v { (0.0, reach) } else { (1.0, 1.0 - reach) };
            let (arc, exact) = arc_on_edge(&md, e, from, to, snap)?;
            let full = ExactArc { arc, exact };
            let trimmed = if arcs.is_empty() { full } else { full.after_last_hit(&arcs.iter().collect::<Vec<_>>()) };
            arcs.push(trimmed);
        }
        trees.push((v, arcs));
    }

    let mut connecting: Vec<ExactArc> = Vec::new();
    for (e, edge) in drawing.edges.iter().enumerate() {
        let reach = (2.0 * md.r() / md.lengths[e]).min(0.5);
        let (arc, exact) = arc_on_edge(&md, e, reach, 1.0 - reach, snap)?;
        let full = ExactArc { arc, exact };
        let tu = &trees.iter().find(|t| t.0 == edge.u).unwrap().1;
        let tv = &trees.iter().find(|t| t.0 == edge.v).unwrap().1;
        let from_u = full.after_last_hit(&tu.iter().collect::<Vec<_>>());
        // Walk back from the far end: trim at the last meeting with T_v.
        let reversed = ExactArc {
            arc: TreeArc {
                edge: e,
                params: from_u.arc.params.iter().rev().copied().collect(),
                points: from_u.arc.points.iter().rev().copied().collect(),
            },
            exact: from_u.exact.iter().rev().cloned().collect(),
        };
        let both = reversed.after_last_hit(&tv.iter().collect::<Vec<_>>());
        connecting.push(ExactArc {
            arc: TreeArc { edge: e, params: both.arc.params.iter().rev().copied().collect(), points: both.arc.points.iter().rev().copied().collect() },
            exact: both.exact.into_iter().rev().collect(),
        });
    }

    let mut intersections = Vec::new();
    let mut record = |kind, first, second, hit: Option<(Point2, GraphPoint, GraphPoint)>| {
        if let Some((point, p, q)) = hit {
            let witness = md.witness(p, q, WitnessSource::Crossing);
            if witness.graph_dist > md.r() {
                intersections.push(TreeIntersection { kind, first, second, point, witness });
            }
        }
    };
    for (i, (vi, ti)) in trees.iter().enumerate() {
        for (vj, tj) in trees.iter().skip(i + 1) {
            let hit = ti.iter().flat_map(|a| tj.iter().map(move |b| (a, b))).find_map(|(a, b)| first_meeting(a, b));
            record(IntersectionKind::TreeTree, *vi, *vj, hit);
        }
    }
    for i in 0..connecting.len() {
        for j in (i + 1)..connecting.len() {
            record(IntersectionKind::ArcArc, i, j, first_meeting(&connecting[i], &connecting[j]));
        }
    }
    for (e, arc) in connecting.iter().enumerate() {
        let edge = &drawing.edges[e];
        for (v, tree) in &trees {
            if *v == edge.u || *v == edge.v {
                continue;
            }
            let hit = tree.iter().find_map(|t| first_meeting(arc, t));
            record(IntersectionKind::ArcTree, e, *v, hit);
        }
    }
    let certificate = intersections.first().cloned();
    Ok(TreesDiagnostic {
        trees: trees
            .into_iter()
            .map(|(vertex, arcs)| VertexTree {
                vertex,
                endpoints: arcs.iter().map(|a| *a.arc.points.last().unwrap()).collect(),
                arcs: arcs.into_iter().map(|a| a.arc).collect(),
            })
            .collect(),
        connecting: connecting.into_iter().map(|a| a.arc).collect(),
        intersections,
        certificate,
    })
}

// Drawing constructors.

fn k5_pairs() -> Vec<(usize, usize)> {
    (0..5).flat_map(|u| ((u + 1)..5).map(move |v| (u, v))).collect()
}

fn straight(r: f64, pos: &[Point2]) -> Drawing {
    Drawing { r, edges: k5_pairs().into_iter().map(|(u, v)| DrawnEdge { u, v, length: None, polyline: vec![pos[u], pos[v]] }).collect() }
}

/// Vertices on a regular pentagon, edges as straight segments.
pub fn pentagon_drawing(r: f64) -> Drawing {
    let pos: Vec<Point2> = (0..5)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
            [10.0 * r * a.cos(), 10.0 * r * a.sin()]
        })
        .collect();
    straight(r, &pos)
}

/// Every point of the graph drawn at the origin.
pub fn collapsed_drawing(r: f64) -> Drawing {
    straight(r, &[[0.0, 0.0]; 5])
}

/// Random vertex positions in a `10R` box; each edge a polyline through
/// `bends` random interior points.
pub fn random_drawing(r: f64, seed: u64, bends: usize) -> Drawing {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 10.0 * r;
    let pos: Vec<Point2> = (0..5).map(|_| [rng.gen_range(0.0..side), rng.gen_range(0.0..side)]).collect();
    let edges = k5_pairs()
        .into_iter()
        .map(|(u, v)| {
            let mut polyline = vec![pos[u]];
            for k in 1..=bends {
                let t = k as f64 / (bends + 1) as f64;
                let base = [pos[u][0] + t * (pos[v][0] - pos[u][0]), pos[u][1] + t * (pos[v][1] - pos[u][1])];
                polyline.push([base[0] + rng.gen_range(-0.3..0.3) * side, base[1] + rng.gen_range(-0.3..0.3) * side]);
            }
            polyline.push(pos[v]);
            DrawnEdge { u, v, length: None, polyline }
        })
        .collect();
    Drawing { r, edges }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(x: i64, y: i64) -> QPoint {
        QPoint { x: Q::from_integer(x.into()), y: Q::from_integer(y.into()) }
    }

    #[test]
    fn intersection_cases() {
        assert_eq!(segment_intersection(&q(0, 0), &q(2, 2), &q(0, 2), &q(2, 0)).len(), 1);
        assert!(segment_intersection(&q(0, 0), &q(1, 0), &q(0, 1), &q(1, 1)).is_empty());
        assert_eq!(segment_intersection(&q(0, 0), &q(4, 0), &q(2, 0), &q(6, 0)).len(), 2);
        assert_eq!(segment_intersection(&q(1, 1), &q(1, 1), &q(0, 0), &q(2, 2)).len(), 1);
        assert!(segment_intersection(&q(1, 1), &q(1, 1), &q(2, 2), &q(2, 2)).is_empty());
        let hit = segment_intersection(&q(0, 0), &q(2, 2), &q(0, 2), &q(2, 0));
        assert_eq!(hit[0].0, Q::new(1.into(), 2.into()));
    }

    #[test]
    fn simple_polyline_is_unchanged() {
        let p = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]];
        let a = simplify_to_simple_arc(&p, 1e-9).unwrap();
        assert_eq!(a.points, p);
        assert!(!a.degenerate);
        assert_eq!(a.loops_removed, 0);
        assert!(is_simple(&a.exact));
    }

    #[test]
    fn figure_eight_loses_its_loop() {
        let p = vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]];
        assert!(!is_simple(&p.iter().map(|&x| QPoint::snap(x, 1e-9)).collect::<Vec<_>>()));
        let a = simplify_to_simple_arc(&p, 1e-9).unwrap();
        assert_eq!(a.loops_removed, 1);
        assert!(is_simple(&a.exact));
        assert_eq!(a.points.first(), Some(&[0.0, 0.0]));
        assert_eq!(a.points.last(), Some(&[0.0, 2.0]));
        assert_eq!(a.points.len(), 3);
    }

    #[test]
    fn out_and_back_is_degenerate() {
        let a = simplify_to_simple_arc(&[[0.0, 0.0], [3.0, 1.0], [0.0, 0.0]], 1e-9).unwrap();
        assert!(a.degenerate);
        assert_eq!(a.points, vec![[0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn pentagon_has_a_crossing_witness() {
        let d = pentagon_drawing(1.0);
        let rep = audit_drawing(&d, &AuditOptions::default()).unwrap();
        let w = rep.witness.unwrap();
        assert!(w.graph_dist >= 10.0, "{w:?}");
        assert!(rep.exceeds_r);
        assert!(verify_witness(&d, &w, 1e-6).unwrap());
    }

    #[test]
    fn collapsed_drawing_witness_is_the_diameter() {
        let d = collapsed_drawing(1.0);
        let rep = audit_drawing(&d, &AuditOptions::default()).unwrap();
        // Midpoints of disjoint edges: 5 + 10 + 5.
        assert_eq!(rep.witness.unwrap().graph_dist, 20.0);
    }

    #[test]
    fn graph_distances_on_k5() {
        let md = MetricDrawing::new(&pentagon_drawing(1.0)).unwrap();
        let g = |edge, param| GraphPoint { edge, param };
        assert_eq!(md.graph_dist(g(0, 0.0), g(0, 1.0)), 10.0);
        assert_eq!(md.graph_dist(g(0, 0.5), g(7, 0.5)), 20.0);
        assert_eq!(md.graph_dist(g(0, 0.25), g(1, 0.25)), 5.0);
        assert_eq!(md.graph_dist(g(0, 0.1), g(0, 0.9)), 8.0);
    }

    #[test]
    fn malformed_drawings() {
        let mut d = pentagon_drawing(1.0);
        d.edges[0].polyline = vec![[0.0, 0.0]];
        assert!(matches!(audit_drawing(&d, &AuditOptions::default()), Err(Error::MalformedDrawing(_))));
        let mut d = pentagon_drawing(1.0);
        d.edges[0].polyline[0] = [99.0, 0.0];
        assert!(matches!(audit_drawing(&d, &AuditOptions::default()), Err(Error::MalformedDrawing(_))));
        let opts = AuditOptions { collision_tol: 0.0, ..Default::default() };
        assert!(audit_drawing(&pentagon_drawing(1.0), &opts).is_err());
    }

    #[test]
    fn denser_sampling_keeps_edge_pairs() {
        for seed in 0..4 {
            let d = random_drawing(1.0, seed, 3);
            let coarse = collision_edge_pairs(&d, &AuditOptions { collision_tol: 0.05, density: 2.0, snap: DEFAULT_SNAP }).unwrap();
            let fine = collision_edge_pairs(&d, &AuditOptions { collision_tol: 0.05, density: 8.0, snap: DEFAULT_SNAP }).unwrap();
            assert!(coarse.is_subset(&fine));
        }
    }

    #[test]
    fn trees_diagnostics() {
        let collapsed = k5_trees_construction(&collapsed_drawing(1.0)).unwrap();
        assert!(collapsed.intersections.iter().any(|i| i.kind == IntersectionKind::TreeTree));
        let pent = k5_trees_construction(&pentagon_drawing(1.0)).unwrap();
        let cert = pent.certificate.as_ref().unwrap();
        assert_eq!(cert.kind, IntersectionKind::ArcArc);
        let d = pentagon_drawing(1.0);
        for i in &pent.intersections {
            assert!(verify_witness(&d, &i.witness, 1e-6).unwrap());
        }
    }

    #[test]
    fn random_drawings_have_witnesses() {
        for seed in 0..5 {
            let d = random_drawing(1.0, seed, 4);
            let rep = audit_drawing(&d, &AuditOptions::default()).unwrap();
            let w = rep.witness.unwrap();
            assert!(w.graph_dist > 1.0);
            assert!(verify_witness(&d, &w, 1e-6).unwrap());
        }
    }
}
