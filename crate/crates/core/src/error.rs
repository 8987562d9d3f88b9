use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

/// Every failure surfaced by the library.
///
/// Variants that describe a failed finite experiment (for example
/// [`CoreError::NoWitness`] or [`CoreError::GrowthViolation`]) carry enough
/// context to be reported rather than merely propagated.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("edge list is empty")]
    EmptyGraph,
    #[error("graph is disconnected: vertex {unreached} not reachable from 0")]
    DisconnectedGraph { unreached: u32 },
    #[error("self-loop at vertex {0}")]
    SelfLoop(u32),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(u32, u32),
    #[error("vertex ids are not dense: id {missing} has no incident edge")]
    SparseVertexIds { missing: u32 },
    #[error("invalid vertex {vertex} (graph has {vertex_count} vertices)")]
    InvalidVertex { vertex: u32, vertex_count: usize },
    #[error("vertex set is empty")]
    EmptySet,
    #[error("graph has {vertex_count} vertices; exhaustive mode allows at most {limit}")]
    TooLargeForExhaustive { vertex_count: usize, limit: usize },
    #[error("path is not a {k}-quasigeodesic (pair ({s}, {t}) at distance {distance})")]
    NotQuasigeodesic {
        k: String,
        s: usize,
        t: usize,
        distance: u32,
    },
    #[error("junction {index} has Gromov product {product} > cap {cap}")]
    JunctionTooSharp {
        index: usize,
        product: String,
        cap: String,
    },
    #[error("detour endpoints do not match the geodesic endpoints")]
    DetourEndpointsMismatch,
    #[error("no path between the endpoints avoids the ball of radius {radius} at {center}")]
    NoDetour { center: u32, radius: u32 },
    #[error("not a path: {0}")]
    BadPath(String),
    #[error("growth window too short: {len} < 3")]
    WindowTooShort { len: usize },
    #[error("counts do not grow exponentially (min ratio {ratio} <= 1)")]
    NotExponential { ratio: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("embedding failed: {0}")]
    EmbeddingFailed(String),
    #[error("growth violation at center {center}, n = {n}: count {count} < bound {bound}")]
    GrowthViolation {
        center: u32,
        n: u32,
        count: u64,
        bound: String,
    },
    #[error("degenerate triangle: two tips coincide")]
    DegenerateTriangle,
    #[error("radius {radius} exceeds graph radius {graph_radius}")]
    RadiusTooLarge { radius: u32, graph_radius: u32 },
    #[error("no branch pair at vertex {vertex} (tree vertex {tree_vertex:?})")]
    NoBranchPair {
        vertex: u32,
        tree_vertex: Option<u32>,
    },
    #[error(
        "vertex {vertex} is too close to the rim (distance {rim_distance}, need > {required})"
    )]
    NotInterior {
        vertex: u32,
        rim_distance: u32,
        required: String,
    },
    #[error("embedding depth {depth} exceeds graph reach at root (rim distance {rim_distance})")]
    DepthExceedsGraph { depth: u32, rim_distance: u32 },
    #[error("fiber {level} is disconnected")]
    FiberDisconnected { level: usize },
    #[error("vertex {vertex} of fiber {level} has no cross edge toward level {toward}")]
    MissingCrossEdge {
        level: usize,
        vertex: u32,
        toward: usize,
    },
    #[error("total space is disconnected")]
    TotalDisconnected,
    #[error("cross edge ({0}, {1}) at level {2} references a vertex outside its fiber")]
    BadCrossEdge(u32, u32, usize),
    #[error("endomorphism is not injective on the ball: words {0} and {1} collide")]
    NotInjectiveOnBall(String, String),
    #[error("no direction triple at level {level}")]
    NoDirectionTriple { level: usize },
    #[error("window 2*{n_k} exceeds base length {levels}")]
    WindowTooLong { n_k: u32, levels: usize },
    #[error("divergence hypothesis unmet at level {level}: {reason}")]
    HypothesisUnmet { level: usize, reason: String },
    #[error("no shadowing witness among {candidates} start points (closest approach {closest:?})")]
    NoWitness {
        candidates: usize,
        closest: Option<u32>,
    },
    #[error("metric axiom violated: {0}")]
    MetricAxiomViolation(String),
    #[error("net graph is disconnected")]
    DisconnectedNetGraph,
    #[error("bad path family: {0}")]
    BadPathFamily(String),
    #[error("sections belong to different bundles (lengths {0} and {1})")]
    SectionMismatch(usize, usize),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Io(e.to_string())
    }
}
