//! Deal-agreement load balancing on general graphs.
//!
//! Nodes repeatedly agree on pairwise deals that move load from a more
//! loaded node to a less loaded neighbor. The crate provides:
//!
//! * [`graph`]: topologies, load vectors, graph files and generators;
//! * [`metrics`], [`check`], [`bounds`], [`oracle`]: imbalance measures,
//!   per-step invariant checkers, round budgets and an exhaustive search
//!   for tiny instances;
//! * [`sync`]: synchronous single-proposal (continuous and discrete),
//!   multi-neighbor and diffusion rounds;
//! * [`asynchronous`]: an atomic-step simulator with FIFO channels and
//!   adversarial schedulers;
//! * [`stab`]: the asynchronous protocol over a self-stabilizing
//!   alternating-bit data link, with transient fault injection.
//!
//! Engines are generic over the [`Load`] scalar; the aliases below fix the
//! types used by the command-line harness.

pub mod asynchronous;
pub mod bounds;
pub mod check;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod scalar;
pub mod stab;
pub mod sync;

pub use graph::{Graph, GraphError, LoadVector, NodeId};
pub use metrics::{compute_metrics, Metrics, Transfer};
pub use scalar::{ContinuousLoad, DiscreteLoad, Load, LoadMode};

/// Exact continuous load.
pub type Rational = num_rational::BigRational;
/// Whole-unit load.
pub type Units = i64;

pub type ContinuousLoads = LoadVector<Rational>;
pub type DiscreteLoads = LoadVector<Units>;
pub type ContinuousMetrics = Metrics<Rational>;
pub type DiscreteMetrics = Metrics<Units>;
