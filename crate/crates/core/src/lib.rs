//! Width certificates for finite metric spaces with small local Hausdorff
//! content.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coarea;
pub mod complex;
pub mod content;
pub mod decompose;
pub mod error;
pub mod metric;
pub mod planar;
pub mod separator;
pub mod spaces;

pub use coarea::{coarea_check, find_cheap_sphere, CheapSphere, CoareaReport};
pub use complex::{cone_attach, minimal_subcomplex_containing, verify_certificate, SimplicialComplex, VerifyReport, WidthCertificate};
pub use content::{content, exact_content, greedy_content, Ball, ContentEstimate, ContentMode, Method};
pub use decompose::{
    check_boundary_condition, check_hypothesis, decompose, decompose_chunked, decompose_uw0, DecomposeConfig, Decomposition, EpsilonTable,
    HypothesisReport,
};
pub use error::{Error, Result};
pub use metric::{FiniteMetricSpace, PointSet, Shell};
pub use separator::{improve_separator, initial_separator, is_separating, minimal_separator, SeparatorParams, SeparatorResult};
pub use planar::{audit_drawing, k5_trees_construction, simplify_to_simple_arc, AuditOptions, AuditReport, Drawing, FiberWitness, GraphPoint};
pub use spaces::{generate, generate_with_budget, GeneratorSpec};
