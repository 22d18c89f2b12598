//! Topological signal processing over weighted simplicial complexes of
//! order two.

pub mod complex;
pub mod error;
pub mod estimator;
pub mod hodge;
pub mod io;
pub mod linalg;
pub mod metric_learning;
pub mod parallel;
pub mod synth;

pub use complex::{Adjacency, IncidenceMatrix, SimplicialComplex2, ValidationReport, Violation};
pub use error::{Error, Result};
pub use hodge::{
    EdgeFlowParts, HodgeComponents, HodgeLaplacian, HodgeOperators, MetricTensor, SimplicialSignal,
};
