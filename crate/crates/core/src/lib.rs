pub mod barycenter;
pub mod bundle;
pub mod discretize;
pub mod error;
pub mod flow;
pub mod graph;
pub mod growth;
pub mod hyperbolicity;
pub mod numeric;
pub mod report;

pub use error::{CoreError, Result};
pub use graph::{build_graph, MetricGraph, Vertex};
pub use numeric::{HalfInt, Rational};
