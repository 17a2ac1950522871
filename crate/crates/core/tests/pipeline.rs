//! End-to-end runs through the public API, checked by recomputing fibers
//! and covers from scratch.

use std::collections::BTreeMap;

use proptest::prelude::*;
use widthlab_core::separator::SeparatorParams;
use widthlab_core::spaces::GridMetric;
use widthlab_core::{
    content, decompose, decompose_chunked, decompose_uw0, generate, is_separating, minimal_separator, verify_certificate, ContentMode,
    DecomposeConfig, Error, FiniteMetricSpace, GeneratorSpec, PointSet, WidthCertificate,
};

fn strip(length: usize, rows: usize, mesh_h: f64) -> FiniteMetricSpace {
    generate(&GeneratorSpec::Strip { length, rows, spacing: 1.0, mesh_h: Some(mesh_h), metric: GridMetric::Euclidean }).unwrap()
}

/// Largest fiber diameter, by brute force over point pairs.
fn max_fiber(space: &FiniteMetricSpace, cert: &WidthCertificate) -> f64 {
    let mut groups: BTreeMap<&Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (p, s) in cert.assignment.iter().enumerate() {
        groups.entry(s).or_default().push(p);
    }
    let mut worst = 0.0f64;
    for pts in groups.values() {
        for (i, &a) in pts.iter().enumerate() {
            for &b in &pts[i + 1..] {
                worst = worst.max(space.dist(a, b));
            }
        }
    }
    worst
}

#[test]
fn strip_decomposes_into_a_graph() {
    let space = strip(400, 2, 1e-6);
    let cfg = DecomposeConfig { scale_s: Some(1.5), ..Default::default() };
    let out = decompose(&space, 60.0, 2, &cfg).unwrap();
    assert!(out.hypotheses_ok && !out.forced);
    assert!(out.verify.pass);
    let cert = &out.certificate;
    assert_eq!(cert.assignment.len(), space.len());
    let fiber = max_fiber(&space, cert);
    assert!(fiber <= 60.0, "fiber {fiber}");
    assert!((fiber - cert.max_fiber).abs() < 1e-9);
    assert!(cert.assignment.iter().all(|s| !s.is_empty() && s.len() <= 2));
}

#[test]
fn chunked_agrees_with_the_verifier() {
    let space = strip(1500, 2, 1e-6);
    let cfg = DecomposeConfig { scale_s: Some(1.5), ..Default::default() };
    let out = decompose_chunked(&space, 100.0, 2, &cfg).unwrap();
    assert!(out.chunks.is_some(), "chunking should engage on a long strip");
    let report = verify_certificate(&space, &out.certificate).unwrap();
    assert!(report.pass);
    assert!(max_fiber(&space, &out.certificate) <= 100.0);
}

#[test]
fn violating_input_is_refused_without_force() {
    let space = strip(200, 2, 1.0);
    let cfg = DecomposeConfig { scale_s: Some(1.5), ..Default::default() };
    match decompose(&space, 100.0, 2, &cfg) {
        Err(Error::HypothesisFailed(report)) => assert!(!report.pass),
        other => panic!("expected a hypothesis failure, got {other:?}"),
    }
}

#[test]
fn tampered_certificate_is_rejected() {
    let space = strip(300, 2, 1e-6);
    let cfg = DecomposeConfig { scale_s: Some(1.5), ..Default::default() };
    let mut cert = decompose(&space, 60.0, 2, &cfg).unwrap().certificate;
    let far = cert.assignment[space.len() - 1].clone();
    cert.assignment[0] = far;
    let report = verify_certificate(&space, &cert).unwrap();
    assert!(!report.pass);
    assert!(!report.mismatches.is_empty() || !report.offending.is_empty());
}

#[test]
fn uw0_classes_are_small() {
    // Pairs 0.02 apart, pairs 50 apart.
    let coords: Vec<f64> = (0..12).map(|i| f64::from(i / 2) * 50.0 + f64::from(i % 2) * 0.02).collect();
    let matrix: Vec<Vec<f64>> = coords.iter().map(|a| coords.iter().map(|b| (a - b).abs()).collect()).collect();
    let space = FiniteMetricSpace::from_distance_matrix(&matrix, 0.01).unwrap();
    let out = decompose_uw0(&space, 10.0).unwrap();
    assert!(out.verify.pass);
    assert!(max_fiber(&space, &out.certificate) < 5.0);
    assert!(out.certificate.assignment.iter().all(|s| s.len() == 1));
}

#[test]
fn separator_pieces_respect_d() {
    let space = strip(200, 2, 1e-6);
    let params = SeparatorParams::for_space(&space).with_scale(1.5);
    let sep = minimal_separator(&space, 30.0, 2, Some(0.1), 1e-6, 10_000, &params).unwrap();
    let pieces = is_separating(&space, &sep.result.z, 30.0, 1.5).expect("separating");
    for piece in &pieces {
        assert!(space.diameter(piece) <= 30.0);
    }
    let covered: usize = pieces.iter().map(PointSet::len).sum::<usize>() + sep.result.z.len();
    assert_eq!(covered, space.len());
}

fn small_metric() -> impl Strategy<Value = FiniteMetricSpace> {
    (3usize..7)
        .prop_flat_map(|n| (Just(n), proptest::collection::vec(1u32..6, n * (n - 1) / 2)))
        .prop_map(|(n, w)| {
            let mut d = vec![vec![f64::INFINITY; n]; n];
            let mut k = 0;
            for i in 0..n {
                d[i][i] = 0.0;
                for j in i + 1..n {
                    d[i][j] = f64::from(w[k]);
                    d[j][i] = d[i][j];
                    k += 1;
                }
            }
            for m in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        d[i][j] = d[i][j].min(d[i][m] + d[m][j]);
                    }
                }
            }
            FiniteMetricSpace::from_distance_matrix(&d, 0.5).unwrap()
        })
}

proptest! {
    #[test]
    fn content_covers_and_is_monotone(space in small_metric(), n in 0u32..3, mask in any::<u8>()) {
        let all = space.all_points();
        let sub: PointSet = all.iter().filter(|&p| mask & (1 << p) != 0).collect();
        for mode in [ContentMode::Exact, ContentMode::Greedy] {
            let est = content(&space, &all, n, None, mode).unwrap();
            for p in all.iter() {
                prop_assert!(est.cover.iter().any(|b| space.dist(p, b.center) <= b.radius));
            }
        }
        let whole = content(&space, &all, n, None, ContentMode::Exact).unwrap().value;
        let part = content(&space, &sub, n, None, ContentMode::Exact).unwrap().value;
        prop_assert!(part <= whole + 1e-12);
    }
}
