//! Finite simplicial complexes and width certificates.
//!
//! A simplex is a sorted, duplicate-free list of vertex ids and doubles as its
//! own id. Complexes store every face, so closure checks are lookups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, PointSet};

pub type Simplex = Vec<usize>;

fn normalize(mut s: Simplex) -> Simplex {
    s.sort_unstable();
    s.dedup();
    s
}

/// Every nonempty face of `s`, including `s` itself.
fn faces(s: &[usize]) -> impl Iterator<Item = Simplex> + '_ {
    let k = s.len();
    (1u64..(1u64 << k)).map(move |mask| (0..k).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "ComplexJson", into = "ComplexJson")]
pub struct SimplicialComplex {
    vertices: BTreeSet<usize>,
    simplices: BTreeSet<Simplex>,
}

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    vertices: Vec<usize>,
    maximal_simplices: Vec<Simplex>,
}

impl From<ComplexJson> for SimplicialComplex {
    fn from(j: ComplexJson) -> Self {
        let mut c = SimplicialComplex::from_maximal(j.maximal_simplices);
        for v in j.vertices {
            c.add_simplex(vec![v]);
        }
        c
    }
}

impl From<SimplicialComplex> for ComplexJson {
    fn from(c: SimplicialComplex) -> Self {
        ComplexJson { vertices: c.vertices.iter().copied().collect(), maximal_simplices: c.maximal_simplices() }
    }
}

impl SimplicialComplex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Downward closure of the given simplices.
    pub fn from_maximal<I: IntoIterator<Item = Simplex>>(simplices: I) -> Self {
        let mut c = Self::new();
        for s in simplices {
            c.add_simplex(s);
        }
        c
    }

    /// Adds `s` and all of its faces. Empty simplices are ignored.
    pub fn add_simplex(&mut self, s: Simplex) {
        let s = normalize(s);
        if s.is_empty() || self.simplices.contains(&s) {
            return;
        }
        self.vertices.extend(s.iter().copied());
        for f in faces(&s) {
            self.simplices.insert(f);
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.vertices.iter().copied()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter()
    }

    pub fn num_simplices(&self) -> usize {
        self.simplices.len()
    }

    pub fn contains(&self, s: &[usize]) -> bool {
        self.simplices.contains(s)
    }

    pub fn has_vertex(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    /// Largest simplex size minus one; `-1` for the empty complex.
    pub fn dim(&self) -> isize {
        self.simplices.iter().map(|s| s.len() as isize - 1).max().unwrap_or(-1)
    }

    pub fn max_vertex(&self) -> Option<usize> {
        self.vertices.iter().next_back().copied()
    }

    pub fn maximal_simplices(&self) -> Vec<Simplex> {
        let mut out: Vec<Simplex> = self
            .simplices
            .iter()
            .filter(|s| {
                !self.vertices.iter().any(|v| {
                    if s.binary_search(v).is_ok() {
                        return false;
                    }
                    let mut t = (*s).clone();
                    t.push(*v);
                    self.simplices.contains(&normalize(t))
                })
            })
            .cloned()
            .collect();
        out.sort();
        out
    }

    /// Every face of every simplex is present.
    pub fn is_closed(&self) -> bool {
        self.simplices.iter().all(|s| faces(s).all(|f| self.simplices.contains(&f)))
            && self.simplices.iter().flatten().all(|v| self.vertices.contains(v))
            && self.vertices.iter().all(|v| self.simplices.contains(&vec![*v]))
    }

    pub fn is_subcomplex_of(&self, other: &SimplicialComplex) -> bool {
        self.simplices.is_subset(&other.simplices) && self.vertices.is_subset(&other.vertices)
    }

    /// Merges another complex into this one.
    pub fn extend(&mut self, other: &SimplicialComplex) {
        self.vertices.extend(other.vertices.iter().copied());
        self.simplices.extend(other.simplices.iter().cloned());
    }

    /// Renumbers vertices through `f`.
    pub fn relabel(&self, f: impl Fn(usize) -> usize) -> SimplicialComplex {
        SimplicialComplex {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            simplices: self.simplices.iter().map(|s| normalize(s.iter().map(|&v| f(v)).collect())).collect(),
        }
    }

    /// 1-skeleton in Graphviz format.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph complex {\n");
        for v in &self.vertices {
            let _ = writeln!(out, "  {v};");
        }
        for s in self.simplices.iter().filter(|s| s.len() == 2) {
            let _ = writeln!(out, "  {} -- {};", s[0], s[1]);
        }
        out.push_str("}\n");
        out
    }
}

/// Smallest subcomplex of `complex` containing every simplex in `simplices`.
pub fn minimal_subcomplex_containing(complex: &SimplicialComplex, simplices: &[Simplex]) -> Result<SimplicialComplex> {
    let mut out = SimplicialComplex::new();
    for s in simplices {
        let s = normalize(s.clone());
        if !complex.contains(&s) {
            return Err(Error::UnknownSimplex(s));
        }
        out.add_simplex(s);
    }
    Ok(out)
}

/// `base` glued to the cone over `sub` with vertex `apex`.
pub fn cone_attach(base: &SimplicialComplex, sub: &SimplicialComplex, apex: usize) -> Result<SimplicialComplex> {
    if base.has_vertex(apex) {
        return Err(Error::ApexCollision(apex));
    }
    if let Some(s) = sub.simplices().find(|s| !base.contains(s)) {
        return Err(Error::UnknownSimplex(s.clone()));
    }
    let mut out = base.clone();
    out.add_simplex(vec![apex]);
    for s in sub.simplices() {
        let mut t = s.clone();
        t.push(apex);
        out.add_simplex(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberEntry {
    pub simplex: Simplex,
    pub size: usize,
    pub diameter: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WidthCertificate {
    pub complex: SimplicialComplex,
    /// Simplex assigned to each point, indexed by point id.
    pub assignment: Vec<Simplex>,
    #[serde(rename = "R")]
    pub r: f64,
    /// Dimension the certificate was built for; the complex must have dim <= n - 1.
    pub n: u32,
    pub fiber_diams: Vec<FiberEntry>,
    pub max_fiber: f64,
}

/// Points grouped by assigned simplex, in simplex order.
pub fn fibers(assignment: &[Simplex]) -> BTreeMap<&Simplex, Vec<usize>> {
    let mut out: BTreeMap<&Simplex, Vec<usize>> = BTreeMap::new();
    for (p, s) in assignment.iter().enumerate() {
        out.entry(s).or_default().push(p);
    }
    out
}

fn fiber_table(space: &FiniteMetricSpace, assignment: &[Simplex]) -> Vec<FiberEntry> {
    let groups: Vec<(Simplex, Vec<usize>)> = fibers(assignment).into_iter().map(|(s, p)| (s.clone(), p)).collect();
    groups
        .into_par_iter()
        .map(|(simplex, pts)| {
            let size = pts.len();
            let diameter = space.diameter(&PointSet::from_sorted(pts));
            FiberEntry { simplex, size, diameter }
        })
        .collect()
}

impl WidthCertificate {
    /// Fills in fiber diameters from the assignment.
    pub fn build(space: &FiniteMetricSpace, complex: SimplicialComplex, assignment: Vec<Simplex>, r: f64, n: u32) -> Self {
        let assignment: Vec<Simplex> = assignment.into_iter().map(normalize).collect();
        let fiber_diams = fiber_table(space, &assignment);
        let max_fiber = fiber_diams.iter().map(|f| f.diameter).fold(0.0, f64::max);
        WidthCertificate { complex, assignment, r, n, fiber_diams, max_fiber }
    }

    pub fn dim(&self) -> isize {
        self.complex.dim()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub max_fiber: f64,
    pub r: f64,
    pub fiber_count: usize,
    /// Simplices whose fibers exceed `R`, largest first.
    pub offending: Vec<FiberEntry>,
    /// Simplices whose stored fiber entry disagrees with recomputation.
    pub mismatches: Vec<Simplex>,
    pub stored_max_ok: bool,
    pub closed: bool,
    pub assigned_in_complex: bool,
    pub dim: isize,
    pub dim_ok: bool,
}

/// Recomputes every fiber from the raw assignment and checks the claims.
pub fn verify_certificate(space: &FiniteMetricSpace, cert: &WidthCertificate) -> Result<VerifyReport> {
    if cert.assignment.len() < space.len() {
        return Err(Error::UnassignedPoint(cert.assignment.len()));
    }
    if cert.assignment.len() > space.len() {
        return Err(Error::InvalidPoint { id: space.len(), len: space.len() });
    }
    if let Some(p) = cert.assignment.iter().position(|s| s.is_empty()) {
        return Err(Error::UnassignedPoint(p));
    }
    let assignment: Vec<Simplex> = cert.assignment.iter().cloned().map(normalize).collect();
    let table = fiber_table(space, &assignment);
    let max_fiber = table.iter().map(|f| f.diameter).fold(0.0, f64::max);

    let stored: BTreeMap<&Simplex, &FiberEntry> = cert.fiber_diams.iter().map(|f| (&f.simplex, f)).collect();
    let mut mismatches: Vec<Simplex> = table
        .iter()
        .filter(|f| stored.get(&f.simplex).is_none_or(|s| s.size != f.size || s.diameter != f.diameter))
        .map(|f| f.simplex.clone())
        .collect();
    let fresh: BTreeSet<&Simplex> = table.iter().map(|f| &f.simplex).collect();
    mismatches.extend(cert.fiber_diams.iter().filter(|f| !fresh.contains(&f.simplex)).map(|f| f.simplex.clone()));
    mismatches.sort();
    mismatches.dedup();

    let mut offending: Vec<FiberEntry> = table.iter().filter(|f| f.diameter > cert.r).cloned().collect();
    offending.sort_by(|a, b| b.diameter.total_cmp(&a.diameter).then_with(|| a.simplex.cmp(&b.simplex)));

    let closed = cert.complex.is_closed();
    let assigned_in_complex = table.iter().all(|f| cert.complex.contains(&f.simplex));
    let dim = cert.complex.dim();
    let dim_ok = dim < cert.n as isize;
    let stored_max_ok = cert.max_fiber == max_fiber;
    let pass = offending.is_empty() && mismatches.is_empty() && stored_max_ok && closed && assigned_in_complex && dim_ok;
    Ok(VerifyReport {
        pass,
        max_fiber,
        r: cert.r,
        fiber_count: table.len(),
        offending,
        mismatches,
        stored_max_ok,
        closed,
        assigned_in_complex,
        dim,
        dim_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize) -> FiniteMetricSpace {
        let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect()).collect();
        FiniteMetricSpace::from_distance_matrix(&m, 1.0).unwrap()
    }

    #[test]
    fn cone_examples() {
        let base = SimplicialComplex::from_maximal([vec![0]]);
        let sub = base.clone();
        let c = cone_attach(&base, &sub, 1).unwrap();
        assert_eq!(c.maximal_simplices(), vec![vec![0, 1]]);

        let c = cone_attach(&base, &SimplicialComplex::new(), 7).unwrap();
        assert_eq!(c.maximal_simplices(), vec![vec![0], vec![7]]);
        assert_eq!(c.dim(), 0);

        let tri = SimplicialComplex::from_maximal([vec![0, 1], vec![1, 2], vec![0, 2]]);
        let c = cone_attach(&tri, &tri, 3).unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.simplices().filter(|s| s.len() == 3).count(), 3);
        assert_eq!(c.maximal_simplices(), vec![vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]);

        assert!(matches!(cone_attach(&tri, &tri, 2), Err(Error::ApexCollision(2))));
        let stranger = SimplicialComplex::from_maximal([vec![5]]);
        assert!(matches!(cone_attach(&tri, &stranger, 9), Err(Error::UnknownSimplex(_))));
    }

    #[test]
    fn minimal_subcomplex_examples() {
        let c = SimplicialComplex::from_maximal([vec![0, 1, 2], vec![3, 4], vec![5, 6]]);
        let m = minimal_subcomplex_containing(&c, &[vec![3]]).unwrap();
        assert_eq!(m.num_simplices(), 1);
        let m = minimal_subcomplex_containing(&c, &[vec![2, 0, 1]]).unwrap();
        assert_eq!(m.num_simplices(), 7);
        let m = minimal_subcomplex_containing(&c, &[vec![3, 4], vec![5, 6]]).unwrap();
        assert_eq!(m.num_simplices(), 6);
        assert_eq!(m.num_vertices(), 4);
        assert!(minimal_subcomplex_containing(&c, &[vec![0, 3]]).is_err());
    }

    #[test]
    fn verify_examples() {
        let s = line(11);
        let one = SimplicialComplex::from_maximal([vec![0]]);
        let cert = WidthCertificate::build(&s, one.clone(), vec![vec![0]; 11], 10.0, 1);
        assert!(verify_certificate(&s, &cert).unwrap().pass);
        let cert = WidthCertificate::build(&s, one, vec![vec![0]; 11], 9.0, 1);
        assert!(!verify_certificate(&s, &cert).unwrap().pass);

        let two = SimplicialComplex::from_maximal([vec![0], vec![1]]);
        let halves: Vec<Simplex> = (0..11).map(|p| vec![usize::from(p > 5)]).collect();
        let cert = WidthCertificate::build(&s, two.clone(), halves.clone(), 5.0, 1);
        assert_eq!(cert.fiber_diams.iter().map(|f| f.diameter).collect::<Vec<_>>(), vec![5.0, 4.0]);
        assert!(verify_certificate(&s, &cert).unwrap().pass);

        let cert = WidthCertificate::build(&s, two, halves, 3.0, 1);
        let rep = verify_certificate(&s, &cert).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.offending[0].simplex, vec![0]);
    }

    #[test]
    fn verify_catches_tampering_and_gaps() {
        let s = line(11);
        let c = SimplicialComplex::from_maximal([vec![0]]);
        let mut cert = WidthCertificate::build(&s, c.clone(), vec![vec![0]; 11], 20.0, 1);
        cert.fiber_diams[0].diameter = 1.0;
        let rep = verify_certificate(&s, &cert).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.mismatches, vec![vec![0]]);

        let mut cert = WidthCertificate::build(&s, c.clone(), vec![vec![0]; 11], 20.0, 1);
        cert.assignment.pop();
        assert!(matches!(verify_certificate(&s, &cert), Err(Error::UnassignedPoint(10))));

        let cert = WidthCertificate::build(&s, c, vec![vec![3]; 11], 20.0, 1);
        assert!(!verify_certificate(&s, &cert).unwrap().assigned_in_complex);

        let edge = SimplicialComplex::from_maximal([vec![0, 1]]);
        let cert = WidthCertificate::build(&s, edge, vec![vec![0]; 11], 20.0, 1);
        assert!(!verify_certificate(&s, &cert).unwrap().dim_ok);
    }

    #[test]
    fn json_roundtrip() {
        let c = SimplicialComplex::from_maximal([vec![0, 1, 2], vec![2, 3], vec![9]]);
        let j = serde_json::to_value(&c).unwrap();
        assert_eq!(j["maximal_simplices"], serde_json::json!([[0, 1, 2], [2, 3], [9]]));
        let back: SimplicialComplex = serde_json::from_value(j).unwrap();
        assert_eq!(back, c);
        assert!(c.to_dot().contains("2 -- 3;"));
    }

    proptest! {
        #[test]
        fn cone_output_is_closed(tris in proptest::collection::vec(proptest::collection::vec(0usize..8, 1..4), 1..6), pick in 0usize..6) {
            let base = SimplicialComplex::from_maximal(tris.clone());
            let chosen = normalize(tris[pick % tris.len()].clone());
            let sub = minimal_subcomplex_containing(&base, &[chosen.clone()]).unwrap();
            let again = minimal_subcomplex_containing(&base, &sub.simplices().cloned().collect::<Vec<_>>()).unwrap();
            prop_assert_eq!(&again, &sub);
            let c = cone_attach(&base, &sub, 100).unwrap();
            prop_assert!(c.is_closed());
            prop_assert!(base.is_subcomplex_of(&c));
            prop_assert_eq!(c.dim(), base.dim().max(sub.dim() + 1));
            let closed = minimal_subcomplex_containing(&c, &c.maximal_simplices()).unwrap();
            prop_assert_eq!(closed, c);
        }

        #[test]
        fn fibers_partition(labels in proptest::collection::vec(0usize..4, 1..30)) {
            let s = line(labels.len());
            let assignment: Vec<Simplex> = labels.iter().map(|&l| vec![l]).collect();
            let c = SimplicialComplex::from_maximal((0..4).map(|v| vec![v]));
            let cert = WidthCertificate::build(&s, c, assignment, 100.0, 1);
            prop_assert_eq!(cert.fiber_diams.iter().map(|f| f.size).sum::<usize>(), labels.len());
        }
    }
}
