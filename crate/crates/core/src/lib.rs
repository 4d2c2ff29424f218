//! Distributed averaging on random graphs: pairwise gossip and synchronous
//! consensus simulators, local graph metrics, and a linear model that turns
//! network-wide metric averages into a contraction-rate and time-to-accuracy
//! prediction every node can compute on its own.

pub mod analysis;
pub mod cli;
pub mod format;
pub mod graph;
pub mod metrics;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use analysis::{AnalysisError, RateModel};
pub use graph::{Family, Graph, GraphError, GraphSpec};
pub use metrics::{MetricAverages, NodeMetrics};
pub use sim::{Mode, NodeState, SimConfig, SimError, Trace};
pub use spectral::{ConvergenceReport, SpectralError};
