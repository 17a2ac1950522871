//! Width certificates from small local content.
//!
//! * [`decompose_uw0`]: dimension 0, by merging overlapping balls of
//!   near-optimal covers of concentric annuli.
//! * [`decompose`]: a swap-stable `R/4`-separator, a recursive certificate on
//!   the separator at radius `R/1000`, and one cone per piece.
//! * [`decompose_chunked`]: the same with separators computed per overlapping
//!   annulus and then united.
//! * [`check_boundary_condition`] and [`decompose_seeded`]: the variant
//!   driven by user-supplied neighborhoods with small boundary.
//!
//! Every success path ends at [`verify_certificate`]; a certificate that fails
//! it is returned as an error, never as output.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::complex::{cone_attach, minimal_subcomplex_containing, verify_certificate, Simplex, SimplicialComplex, VerifyReport, WidthCertificate};
use crate::content::{greedy_content, ContentMode};
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, PointSet, UnionFind};
use crate::separator::{is_separating, localized_smallness, minimal_separator, GapBound, LocalizedReport, SeparatorParams, DEFAULT_EXHAUSTIVE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonKind {
    Standard,
    Chunked,
    Scaled,
}

/// Exact thresholds `ε_1..ε_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonTable {
    kind: EpsilonKind,
    values: Vec<BigRational>,
}

const MERGE_RTOL: f64 = 1e-9;

fn thousand_pow(e: u32) -> BigRational {
    BigRational::from_integer(BigInt::from(1000).pow(e))
}

impl EpsilonTable {
    /// `ε_1 = 1/100`, `ε_k = ε_{k-1} / 1000^(k+1)`.
    pub fn standard(n: u32) -> Self {
        let mut values = vec![BigRational::new(1.into(), 100.into())];
        for k in 2..=n.max(1) {
            let prev = values.last().unwrap().clone();
            values.push(prev / thousand_pow(k + 1));
        }
        EpsilonTable { kind: EpsilonKind::Standard, values }
    }

    /// The tighter table for annulus-wise separators:
    /// `ε'_1 = ε_1` and `ε'_k = ε_{k-1} / (10 · 1000^(k+1))`.
    pub fn chunked(n: u32) -> Self {
        let standard = Self::standard(n);
        let ten = BigRational::from_integer(10.into());
        let values = standard
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 { v.clone() } else { v / &ten })
            .collect();
        EpsilonTable { kind: EpsilonKind::Chunked, values }
    }

    /// Every value times `multiplier`, taken exactly from its binary expansion.
    pub fn scaled(&self, multiplier: f64) -> Result<Self> {
        let m = BigRational::from_float(multiplier)
            .filter(|m| *m > BigRational::from_integer(0.into()))
            .ok_or_else(|| Error::InvalidParameter(format!("epsilon multiplier must be positive and finite, got {multiplier}")))?;
        if m.is_one() {
            return Ok(self.clone());
        }
        Ok(EpsilonTable { kind: EpsilonKind::Scaled, values: self.values.iter().map(|v| v * &m).collect() })
    }

    pub fn kind(&self) -> EpsilonKind {
        self.kind
    }

    pub fn max_n(&self) -> u32 {
        self.values.len() as u32
    }

    /// `ε_k`, for `1 <= k <= max_n`.
    pub fn exact(&self, k: u32) -> Option<&BigRational> {
        k.checked_sub(1).and_then(|i| self.values.get(i as usize))
    }

    pub fn value(&self, k: u32) -> f64 {
        self.exact(k).and_then(|v| v.to_f64()).unwrap_or(0.0)
    }
}

#[derive(Serialize)]
struct EpsilonEntry {
    k: u32,
    exact: String,
    value: f64,
}

impl Serialize for EpsilonTable {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = ser.serialize_seq(Some(self.values.len()))?;
        for (i, v) in self.values.iter().enumerate() {
            seq.serialize_element(&EpsilonEntry { k: i as u32 + 1, exact: v.to_string(), value: v.to_f64().unwrap_or(0.0) })?;
        }
        seq.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisKind {
    /// Ball contents against `ε_n R^n`.
    Ball,
    /// Neighborhood boundaries against `ε_n R^(n-1)`.
    Boundary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub kind: HypothesisKind,
    pub n: u32,
    pub r: f64,
    pub threshold: f64,
    pub zeta: Option<f64>,
    /// Measured content per point id.
    pub per_point: Vec<f64>,
    pub pass: bool,
    pub worst: Option<usize>,
    pub worst_value: f64,
    /// Points over the threshold.
    pub violations: usize,
    /// Boundary variant only: points whose neighborhood leaves `B(x, 10R)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub containment_failures: Vec<usize>,
}

impl HypothesisReport {
    fn from_values(kind: HypothesisKind, n: u32, r: f64, threshold: f64, zeta: Option<f64>, per_point: Vec<f64>, containment_failures: Vec<usize>) -> Self {
        let mut worst: Option<(usize, f64)> = None;
        for (x, &v) in per_point.iter().enumerate() {
            if worst.is_none_or(|(_, w)| v > w) {
                worst = Some((x, v));
            }
        }
        let violations = per_point.iter().filter(|&&v| v > threshold).count();
        HypothesisReport {
            kind,
            n,
            r,
            threshold,
            zeta,
            pass: violations == 0 && containment_failures.is_empty(),
            worst: worst.map(|w| w.0),
            worst_value: worst.map_or(0.0, |w| w.1),
            per_point,
            violations,
            containment_failures,
        }
    }
}

/// Cap used for ball contents at radius `r` in dimension `n`: unrestricted
/// for `n = 1`, `max(r/1000, h)` otherwise.
pub fn hypothesis_zeta(space: &FiniteMetricSpace, r: f64, n: u32) -> Option<f64> {
    (n >= 2).then(|| (r / 1000.0).max(space.mesh_h()))
}

/// Greedy content of every `B(x, R)` against `ε_n R^n` from the standard table.
pub fn check_hypothesis(space: &FiniteMetricSpace, r: f64, n: u32) -> Result<HypothesisReport> {
    check_hypothesis_with(space, r, n, &EpsilonTable::standard(n))
}

pub fn check_hypothesis_with(space: &FiniteMetricSpace, r: f64, n: u32, eps: &EpsilonTable) -> Result<HypothesisReport> {
    if n == 0 || n > eps.max_n() {
        return Err(Error::InvalidParameter(format!("dimension {n} outside the epsilon table 1..={}", eps.max_n())));
    }
    if !(r >= 100.0 * space.mesh_h()) {
        return Err(Error::InvalidParameter(format!("R = {r} is below 100 * mesh_h = {}", 100.0 * space.mesh_h())));
    }
    let zeta = hypothesis_zeta(space, r, n);
    let threshold = eps.value(n) * r.powi(n as i32);
    let per_point: Vec<f64> = (0..space.len())
        .into_par_iter()
        .map(|x| greedy_content(space, &space.ball(x, r), n, zeta).map(|e| e.value))
        .collect::<Result<_>>()?;
    Ok(HypothesisReport::from_values(HypothesisKind::Ball, n, r, threshold, zeta, per_point, Vec::new()))
}

#[derive(Debug, Clone)]
pub struct DecomposeConfig {
    /// Connectivity scale; `2 * mesh_h` when unset.
    pub scale_s: Option<f64>,
    /// Run on hypothesis-violating inputs. Output is still verifier-gated.
    pub force: bool,
    /// Separator optimality slack; `ε_{n-1} R^{n-1} / 1000^n` per level when unset.
    pub delta: Option<f64>,
    pub move_budget: usize,
    /// Threshold table; the standard table (chunked table for the chunked
    /// variant) when unset.
    pub eps: Option<EpsilonTable>,
    pub base_point: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig { scale_s: None, force: false, delta: None, move_budget: 100_000, eps: None, base_point: 0 }
    }
}

impl DecomposeConfig {
    fn scale(&self, space: &FiniteMetricSpace) -> f64 {
        self.scale_s.unwrap_or(2.0 * space.mesh_h())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatorStats {
    pub d: f64,
    pub zeta: f64,
    pub delta: f64,
    pub separator_points: usize,
    pub pieces: usize,
    pub max_piece_diameter: f64,
    pub initial_content: f64,
    pub content: f64,
    pub moves: usize,
    pub attempts: usize,
    pub sweeps: usize,
    pub rejected_nonseparating: usize,
    pub budget_exhausted: bool,
    pub gap_bound: GapBound,
    pub localized: LocalizedReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Uw0Class {
    pub vertex: usize,
    pub points: PointSet,
    pub balls: usize,
    pub diameter: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Uw0Stats {
    pub zeta: f64,
    pub annuli: usize,
    pub balls: usize,
    pub classes: usize,
    pub max_class_diameter: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub n: u32,
    pub r: f64,
    pub points: usize,
    pub hypothesis_pass: bool,
    pub hypothesis_worst: f64,
    pub hypothesis_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separator: Option<SeparatorStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uw0: Option<Uw0Stats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkInfo {
    /// `"A"` for `[10(k-1)R, 10kR]`, `"B"` for the half-offset family.
    pub family: String,
    pub index: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub points: usize,
    pub separator_points: usize,
    pub pieces: usize,
    pub interior_pieces: usize,
    pub content: f64,
    pub locally_stable: bool,
}

/// Where a global piece sits among the interior chunk pieces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieceOrigin {
    /// `(chunk, piece)` in the A family, when the piece lies in an interior one.
    pub a: Option<(usize, usize)>,
    pub b: Option<(usize, usize)>,
    pub size: usize,
    pub diameter: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkReport {
    pub chunks: Vec<ChunkInfo>,
    pub union_points: usize,
    /// Union of the interior chunk separators, re-verifiable with [`is_separating`].
    pub union: PointSet,
    pub union_separating: bool,
    pub global_pieces: Vec<PieceOrigin>,
    pub max_piece_diameter: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub certificate: WidthCertificate,
    pub verify: VerifyReport,
    pub hypothesis: HypothesisReport,
    /// Every level's hypothesis check passed.
    pub hypotheses_ok: bool,
    /// Some hypothesis failed and `force` let the run continue.
    pub forced: bool,
    pub eps: EpsilonTable,
    pub levels: Vec<LevelStats>,
    /// Every fiber is inside one piece or one recursive fiber, with diameter
    /// at most that set's diameter plus `s`.
    pub fiber_arithmetic_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chunks: Option<ChunkReport>,
}

#[derive(Default)]
struct Trace {
    levels: Vec<LevelStats>,
    hypotheses_ok: bool,
    fiber_arithmetic_ok: bool,
    top: Option<HypothesisReport>,
}

impl Trace {
    fn new() -> Self {
        Trace { hypotheses_ok: true, fiber_arithmetic_ok: true, ..Default::default() }
    }
}

fn wrap(e: Error, level: usize, n: u32) -> Error {
    match e {
        Error::RecursionFailed { .. } => e,
        other => Error::RecursionFailed { level, n: n as usize, source: Box::new(other) },
    }
}

fn finish(space: &FiniteMetricSpace, cert: WidthCertificate, trace: Trace, eps: EpsilonTable, force: bool, chunks: Option<ChunkReport>) -> Result<Decomposition> {
    let verify = verify_certificate(space, &cert)?;
    if !verify.pass {
        return Err(Error::CertificateRejected(Box::new(verify)));
    }
    Ok(Decomposition {
        certificate: cert,
        verify,
        hypothesis: trace.top.expect("top level always records its hypothesis"),
        forced: force && !trace.hypotheses_ok,
        hypotheses_ok: trace.hypotheses_ok,
        eps,
        levels: trace.levels,
        fiber_arithmetic_ok: trace.fiber_arithmetic_ok,
        chunks,
    })
}

/// Checks the ball hypothesis at one level, recording it in the trace.
fn gate(space: &FiniteMetricSpace, r: f64, n: u32, eps: &EpsilonTable, force: bool, level: usize, trace: &mut Trace) -> Result<HypothesisReport> {
    let hyp = check_hypothesis_with(space, r, n, eps)?;
    trace.hypotheses_ok &= hyp.pass;
    if level == 0 {
        trace.top = Some(hyp.clone());
    }
    if !hyp.pass && !force {
        return Err(Error::HypothesisFailed(Box::new(hyp)));
    }
    Ok(hyp)
}

#[derive(Debug, Clone, Serialize)]
pub struct Uw0Output {
    pub certificate: WidthCertificate,
    pub verify: VerifyReport,
    pub hypothesis: HypothesisReport,
    pub classes: Vec<Uw0Class>,
    pub stats: Uw0Stats,
}

/// Dimension-0 certificate at radius `r` with base point `x0`, without the
/// hypothesis gate.
fn uw0_core(space: &FiniteMetricSpace, r: f64, x0: usize) -> Result<(WidthCertificate, Vec<Uw0Class>, Uw0Stats)> {
    let zeta = (r / 50.0).max(space.mesh_h());
    let row = space.row(x0);
    let width = 10.0 * r;
    let max_d = row.iter().copied().fold(0.0, f64::max);
    let annuli = ((max_d / width).ceil() as usize).max(1);
    let targets: Vec<PointSet> =
        (1..=annuli).map(|k| (0..space.len()).filter(|&p| row[p] >= (k - 1) as f64 * width && row[p] <= k as f64 * width).collect()).collect();
    let covers = targets.par_iter().map(|t| greedy_content(space, t, 1, Some(zeta))).collect::<Result<Vec<_>>>()?;
    let balls: Vec<_> = covers.into_iter().flat_map(|c| c.cover).collect();

    // A net cover by radii r lifts to a cover of the underlying space by
    // radii r + h; those lifted balls are the ones merged.
    let h = space.mesh_h();
    let mut uf = UnionFind::new(balls.len());
    for (i, a) in balls.iter().enumerate() {
        for (j, b) in balls.iter().enumerate().skip(i + 1) {
            if space.dist(a.center, b.center) <= (a.radius + b.radius + 2.0 * h) * (1.0 + MERGE_RTOL) {
                uf.union(i, j);
            }
        }
    }
    let mut owner = vec![usize::MAX; space.len()];
    for (i, b) in balls.iter().enumerate() {
        let brow = space.row(b.center);
        for p in (0..space.len()).filter(|&p| brow[p] <= b.radius) {
            if owner[p] == usize::MAX {
                owner[p] = i;
            }
        }
    }
    debug_assert!(owner.iter().all(|&o| o != usize::MAX));

    let mut vertex_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut assignment = Vec::with_capacity(space.len());
    for (p, &o) in owner.iter().enumerate() {
        let root = uf.find(o);
        let v = *vertex_of_root.entry(root).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[v].push(p);
        assignment.push(vec![v]);
    }
    let mut ball_count = vec![0usize; members.len()];
    for i in 0..balls.len() {
        if let Some(&v) = vertex_of_root.get(&uf.find(i)) {
            ball_count[v] += 1;
        }
    }
    let classes: Vec<Uw0Class> = members
        .into_iter()
        .enumerate()
        .map(|(v, pts)| {
            let points = PointSet::from_sorted(pts);
            Uw0Class { vertex: v, diameter: space.diameter(&points), points, balls: ball_count[v] }
        })
        .collect();
    let complex = SimplicialComplex::from_maximal((0..classes.len()).map(|v| vec![v]));
    let cert = WidthCertificate::build(space, complex, assignment, r, 1);
    let stats = Uw0Stats {
        zeta,
        annuli,
        balls: balls.len(),
        classes: classes.len(),
        max_class_diameter: classes.iter().map(|c| c.diameter).fold(0.0, f64::max),
    };
    Ok((cert, classes, stats))
}

/// Dimension-0 certificate: covers of the annuli `10(k-1)R <= d(x0, .) <= 10kR`
/// by balls of radius at most `R/50`, with overlapping balls merged into
/// classes. Requires every `B(x, R)` to have 1-content at most `R/100`.
pub fn decompose_uw0(space: &FiniteMetricSpace, r: f64) -> Result<Uw0Output> {
    decompose_uw0_with(space, r, &DecomposeConfig::default())
}

pub fn decompose_uw0_with(space: &FiniteMetricSpace, r: f64, cfg: &DecomposeConfig) -> Result<Uw0Output> {
    space.check_id(cfg.base_point)?;
    let eps = cfg.eps.clone().unwrap_or_else(|| EpsilonTable::standard(1));
    let mut trace = Trace::new();
    let hypothesis = gate(space, r, 1, &eps, cfg.force, 0, &mut trace)?;
    let (certificate, classes, stats) = uw0_core(space, r, cfg.base_point)?;
    let verify = verify_certificate(space, &certificate)?;
    if !verify.pass {
        return Err(Error::CertificateRejected(Box::new(verify)));
    }
    Ok(Uw0Output { certificate, verify, hypothesis, classes, stats })
}

fn separator_params(space: &FiniteMetricSpace, s: f64) -> SeparatorParams {
    let mode = if space.len() <= DEFAULT_EXHAUSTIVE_LIMIT { ContentMode::Exact } else { ContentMode::Greedy };
    SeparatorParams { scale_s: s, content_mode: mode, exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT }
}

fn level_delta(cfg: &DecomposeConfig, eps: &EpsilonTable, r: f64, n: u32) -> f64 {
    cfg.delta.unwrap_or_else(|| eps.value(n - 1) * r.powi(n as i32 - 1) / 1000f64.powi(n as i32))
}

fn level_zeta(space: &FiniteMetricSpace, r: f64) -> f64 {
    (r / 1000.0).max(space.mesh_h())
}

/// One level of the recursion: separator, recursive certificate, cones.
#[allow(clippy::too_many_arguments)]
fn solve(space: &FiniteMetricSpace, r: f64, n: u32, cfg: &DecomposeConfig, eps: &EpsilonTable, level: usize, x0: usize, trace: &mut Trace) -> Result<WidthCertificate> {
    let hyp = gate(space, r, n, eps, cfg.force, level, trace)?;
    let mut stats = LevelStats {
        level,
        n,
        r,
        points: space.len(),
        hypothesis_pass: hyp.pass,
        hypothesis_worst: hyp.worst_value,
        hypothesis_threshold: hyp.threshold,
        separator: None,
        uw0: None,
    };
    if n == 1 {
        let (cert, _, uw0) = uw0_core(space, r, x0)?;
        stats.uw0 = Some(uw0);
        trace.levels.push(stats);
        return Ok(cert);
    }
    let d = r / 4.0;
    let zeta = level_zeta(space, r);
    let s = cfg.scale(space);
    let delta = level_delta(cfg, eps, r, n);
    let sep = minimal_separator(space, d, n, Some(zeta), delta, cfg.move_budget, &separator_params(space, s))?;
    let localized = localized_smallness(space, &sep.result, r, n, Some(zeta), eps.value(n - 1), 0.0)?;
    stats.separator = Some(SeparatorStats {
        d,
        zeta,
        delta,
        separator_points: sep.result.z.len(),
        pieces: sep.result.pieces.len(),
        max_piece_diameter: sep.result.pieces.iter().map(|p| space.diameter(p)).fold(0.0, f64::max),
        initial_content: sep.initial_content,
        content: sep.result.content.value,
        moves: sep.moves.len(),
        attempts: sep.attempts,
        sweeps: sep.sweeps,
        rejected_nonseparating: sep.rejected_nonseparating,
        budget_exhausted: sep.budget_exhausted,
        gap_bound: sep.result.gap_bound.clone(),
        localized,
    });
    trace.levels.push(stats);
    assemble(space, r, n, &sep.result.z, &sep.result.pieces, s, cfg, eps, level, trace)
}

/// Glues the cones over the recursive certificate on `z`. Piece points go
/// to their apex; separator points keep their recursive simplex.
#[allow(clippy::too_many_arguments)]
fn assemble(
    space: &FiniteMetricSpace,
    r: f64,
    n: u32,
    z: &PointSet,
    pieces: &[PointSet],
    s: f64,
    cfg: &DecomposeConfig,
    eps: &EpsilonTable,
    level: usize,
    trace: &mut Trace,
) -> Result<WidthCertificate> {
    let mut assignment: Vec<Simplex> = vec![Vec::new(); space.len()];
    let mut bounds: BTreeMap<Simplex, f64> = BTreeMap::new();
    let mut complex;
    let mut local = vec![usize::MAX; space.len()];
    let sub_cert = if z.is_empty() {
        complex = SimplicialComplex::new();
        None
    } else {
        let (sub, ids) = space.subspace(z);
        for (i, &p) in ids.iter().enumerate() {
            local[p] = i;
        }
        let sub_cert = solve(&sub, r / 1000.0, n - 1, cfg, eps, level + 1, 0, trace).map_err(|e| wrap(e, level + 1, n - 1))?;
        complex = sub_cert.complex.clone();
        for (i, &p) in ids.iter().enumerate() {
            assignment[p] = sub_cert.assignment[i].clone();
        }
        for f in &sub_cert.fiber_diams {
            bounds.insert(f.simplex.clone(), f.diameter);
        }
        Some(sub_cert)
    };

    let near = space.near(s);
    let mut apex = complex.max_vertex().map_or(0, |v| v + 1);
    for piece in pieces {
        let mut hit: Vec<Simplex> = Vec::new();
        if let Some(sc) = &sub_cert {
            let mut seen = vec![false; sc.assignment.len()];
            for p in piece.iter() {
                for (q, _) in near.within(p, s) {
                    let i = local[q];
                    if i != usize::MAX && !seen[i] {
                        seen[i] = true;
                        hit.push(sc.assignment[i].clone());
                    }
                }
            }
            hit.sort();
            hit.dedup();
        }
        let sigma_u = minimal_subcomplex_containing(&complex, &hit)?;
        complex = cone_attach(&complex, &sigma_u, apex)?;
        for p in piece.iter() {
            assignment[p] = vec![apex];
        }
        bounds.insert(vec![apex], space.diameter(piece));
        apex += 1;
    }
    if let Some(p) = assignment.iter().position(|a| a.is_empty()) {
        return Err(Error::UnassignedPoint(p));
    }
    let cert = WidthCertificate::build(space, complex, assignment, r, n);
    let arithmetic_ok = cert.fiber_diams.iter().all(|f| bounds.get(&f.simplex).is_some_and(|&b| f.diameter <= b + s));
    trace.fiber_arithmetic_ok &= arithmetic_ok;
    Ok(cert)
}

/// Certificate of dimension at most `n - 1` with every fiber of diameter at
/// most `r`.
pub fn decompose(space: &FiniteMetricSpace, r: f64, n: u32, cfg: &DecomposeConfig) -> Result<Decomposition> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    space.check_id(cfg.base_point)?;
    let eps = cfg.eps.clone().unwrap_or_else(|| EpsilonTable::standard(n));
    let mut trace = Trace::new();
    let cert = solve(space, r, n, cfg, &eps, 0, cfg.base_point, &mut trace)?;
    finish(space, cert, trace, eps, cfg.force, None)
}

struct ChunkOutcome {
    info: ChunkInfo,
    z: Vec<usize>,
    /// Interior pieces in global ids.
    interior: Vec<Vec<usize>>,
}

/// As [`decompose`], with the separator assembled from per-annulus
/// separators on `A_k = [10(k-1)R, 10kR]` and `B_k = [10(k-1)R + 5R, 10kR + 5R]`.
pub fn decompose_chunked(space: &FiniteMetricSpace, r: f64, n: u32, cfg: &DecomposeConfig) -> Result<Decomposition> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    space.check_id(cfg.base_point)?;
    let row = space.row(cfg.base_point);
    let max_d = row.iter().copied().fold(0.0, f64::max);
    let width = 10.0 * r;
    if n == 1 || max_d <= width {
        return decompose(space, r, n, cfg);
    }
    let eps = cfg.eps.clone().unwrap_or_else(|| EpsilonTable::chunked(n));
    let mut trace = Trace::new();
    let hyp = gate(space, r, n, &eps, cfg.force, 0, &mut trace)?;

    let d = r / 4.0;
    let zeta = level_zeta(space, r);
    let s = cfg.scale(space);
    let delta = level_delta(cfg, &eps, r, n);
    let near = space.near(s);

    let mut ranges: Vec<(String, usize, f64, f64)> = Vec::new();
    let a_count = (max_d / width).ceil() as usize;
    for k in 1..=a_count {
        ranges.push(("A".into(), k, (k - 1) as f64 * width, k as f64 * width));
    }
    let b_count = ((max_d - 0.5 * width) / width).ceil().max(0.0) as usize;
    for k in 0..=b_count {
        let lo = ((k as f64 - 1.0) * width + 0.5 * width).max(0.0);
        ranges.push(("B".into(), k, lo, k as f64 * width + 0.5 * width));
    }

    let outcomes: Vec<ChunkOutcome> = ranges
        .into_par_iter()
        .map(|(family, index, lo, hi)| -> Result<ChunkOutcome> {
            let members: PointSet = (0..space.len()).filter(|&p| row[p] >= lo && row[p] <= hi).collect();
            let mut inside = vec![false; space.len()];
            for p in members.iter() {
                inside[p] = true;
            }
            let mut info = ChunkInfo {
                family,
                index,
                r_lo: lo,
                r_hi: hi,
                points: members.len(),
                separator_points: 0,
                pieces: 0,
                interior_pieces: 0,
                content: 0.0,
                locally_stable: true,
            };
            if members.is_empty() {
                return Ok(ChunkOutcome { info, z: Vec::new(), interior: Vec::new() });
            }
            let (sub, ids) = space.subspace(&members);
            let sep = minimal_separator(&sub, d, n, Some(zeta), delta, cfg.move_budget, &separator_params(&sub, s))?;
            let z: Vec<usize> = sep.result.z.iter().map(|i| ids[i]).collect();
            let mut interior = Vec::new();
            for piece in &sep.result.pieces {
                let global: Vec<usize> = piece.iter().map(|i| ids[i]).collect();
                let touches_seam = global.iter().any(|&p| near.within(p, s).any(|(q, _)| !inside[q]));
                if !touches_seam {
                    interior.push(global);
                }
            }
            info.separator_points = z.len();
            info.pieces = sep.result.pieces.len();
            info.interior_pieces = interior.len();
            info.content = sep.result.content.value;
            info.locally_stable = matches!(sep.result.gap_bound, GapBound::Certified { .. } | GapBound::Heuristic { locally_stable: true });
            Ok(ChunkOutcome { info, z, interior })
        })
        .collect::<Result<_>>()?;

    let union: PointSet = outcomes.iter().flat_map(|o| o.z.iter().copied()).collect();
    let pieces = is_separating(space, &union, d, s).map_err(|o| {
        Error::InvalidParameter(format!("union of chunk separators is not {d}-separating: a piece of diameter {} remains", o.diameter))
    })?;

    let mut a_of = vec![None; space.len()];
    let mut b_of = vec![None; space.len()];
    for (ci, o) in outcomes.iter().enumerate() {
        let slot = if o.info.family == "A" { &mut a_of } else { &mut b_of };
        for (pi, piece) in o.interior.iter().enumerate() {
            for &p in piece {
                slot[p].get_or_insert((ci, pi));
            }
        }
    }
    let global_pieces: Vec<PieceOrigin> = pieces
        .iter()
        .map(|p| {
            let first = p.first().expect("pieces are nonempty");
            PieceOrigin { a: a_of[first], b: b_of[first], size: p.len(), diameter: space.diameter(p) }
        })
        .collect();
    let report = ChunkReport {
        union_points: union.len(),
        union: union.clone(),
        union_separating: true,
        max_piece_diameter: global_pieces.iter().map(|p| p.diameter).fold(0.0, f64::max),
        global_pieces,
        chunks: outcomes.into_iter().map(|o| o.info).collect(),
    };

    trace.levels.push(LevelStats {
        level: 0,
        n,
        r,
        points: space.len(),
        hypothesis_pass: hyp.pass,
        hypothesis_worst: hyp.worst_value,
        hypothesis_threshold: hyp.threshold,
        separator: None,
        uw0: None,
    });
    // The recursion on the union runs against the standard table, whose
    // localized bound the tighter per-chunk thresholds are built to meet.
    let sub_eps = EpsilonTable::standard(n);
    let cert = assemble(space, r, n, &union, &pieces, s, cfg, &sub_eps, 0, &mut trace)?;
    finish(space, cert, trace, eps, cfg.force, Some(report))
}

/// Points of `u` within `s` of a point outside `u`.
pub fn discrete_boundary(space: &FiniteMetricSpace, u: &PointSet, s: f64) -> PointSet {
    let inside = u.mask(space.len());
    let near = space.near(s);
    u.iter().filter(|&p| near.within(p, s).any(|(q, _)| !inside[q])).collect()
}

/// Balls `B(x, radius)` for every point, as default neighborhoods.
pub fn ball_neighborhoods(space: &FiniteMetricSpace, radius: f64) -> BTreeMap<usize, PointSet> {
    (0..space.len()).map(|x| (x, space.ball(x, radius))).collect()
}

/// Per point: `B(x, R) ⊆ U_x` is required, `U_x ⊆ B(x, 10R)` is condition 1,
/// and the unrestricted `(n-1)`-content of the boundary of `U_x` against
/// `ε_n R^(n-1)` is condition 2.
pub fn check_boundary_condition(
    space: &FiniteMetricSpace,
    r: f64,
    n: u32,
    neighborhoods: &BTreeMap<usize, PointSet>,
    scale_s: f64,
    eps: &EpsilonTable,
) -> Result<HypothesisReport> {
    if n == 0 || n > eps.max_n() {
        return Err(Error::InvalidParameter(format!("dimension {n} outside the epsilon table 1..={}", eps.max_n())));
    }
    for x in 0..space.len() {
        let u = neighborhoods.get(&x).ok_or_else(|| Error::InvalidParameter(format!("no neighborhood supplied for point {x}")))?;
        space.check_set(u)?;
        let missing = space.ball(x, r).difference(u).len();
        if missing > 0 {
            return Err(Error::NeighborhoodMissingBall { x, missing });
        }
    }
    let threshold = eps.value(n) * r.powi(n as i32 - 1);
    let results: Vec<(f64, bool)> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let u = &neighborhoods[&x];
            let row = space.row(x);
            let contained = u.iter().all(|p| row[p] <= 10.0 * r);
            let boundary = discrete_boundary(space, u, scale_s);
            greedy_content(space, &boundary, n - 1, None).map(|e| (e.value, contained))
        })
        .collect::<Result<_>>()?;
    let containment_failures = results.iter().enumerate().filter(|(_, r)| !r.1).map(|(x, _)| x).collect();
    let per_point = results.into_iter().map(|r| r.0).collect();
    Ok(HypothesisReport::from_values(HypothesisKind::Boundary, n, r, threshold, None, per_point, containment_failures))
}

/// Certificate from supplied neighborhoods instead of co-area slicing: the
/// separator is the union of the boundaries of `U_c` over a greedy `R`-net
/// of centers `c`. Every remaining component stays inside one `U_c`, so
/// pieces have diameter at most `20R` and the certificate claims `20R`.
pub fn decompose_seeded(
    space: &FiniteMetricSpace,
    r: f64,
    n: u32,
    neighborhoods: &BTreeMap<usize, PointSet>,
    cfg: &DecomposeConfig,
) -> Result<Decomposition> {
    if n < 2 {
        return Err(Error::InvalidParameter("seeded decomposition needs n >= 2".into()));
    }
    let eps = cfg.eps.clone().unwrap_or_else(|| EpsilonTable::standard(n));
    let s = cfg.scale(space);
    let hyp = check_boundary_condition(space, r, n, neighborhoods, s, &eps)?;
    let mut trace = Trace::new();
    trace.hypotheses_ok = hyp.pass;
    if !hyp.pass && !cfg.force {
        return Err(Error::HypothesisFailed(Box::new(hyp)));
    }
    let mut centers: Vec<usize> = Vec::new();
    for p in 0..space.len() {
        if centers.iter().all(|&c| space.dist(c, p) > r) {
            centers.push(p);
        }
    }
    let z = centers.iter().fold(PointSet::new(), |acc, c| acc.union(&discrete_boundary(space, &neighborhoods[c], s)));
    let bound = 20.0 * r;
    let pieces = is_separating(space, &z, bound, s)
        .map_err(|o| Error::InvalidParameter(format!("seeded separator leaves a piece of diameter {} > 20R", o.diameter)))?;
    trace.levels.push(LevelStats {
        level: 0,
        n,
        r: bound,
        points: space.len(),
        hypothesis_pass: hyp.pass,
        hypothesis_worst: hyp.worst_value,
        hypothesis_threshold: hyp.threshold,
        separator: None,
        uw0: None,
    });
    trace.top = Some(hyp);
    let cert = assemble(space, bound, n, &z, &pieces, s, cfg, &eps, 0, &mut trace)?;
    finish(space, cert, trace, eps, cfg.force, None)
}
