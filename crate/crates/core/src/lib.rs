//! Traffic-engineering simulation: topologies, traffic matrices, path
//! selection, oblivious routing, LP rate adaptation and a timestep simulator.

pub mod config;
pub mod error;
pub mod lp;
pub mod paths;
pub mod raecke;
pub mod report;
pub mod sim;
pub mod topology;
pub mod traffic;

pub use config::{parse_config, run_config, ExperimentConfig, RunOutput};
pub use error::{AllocationError, ConfigError, Error, ParseError, TmError};
pub use lp::{FlowAllocation, LpModel, LpSolution, LpStatus, Objective};
pub use paths::{CostMetric, Path, PathSet, PathSource, Provenance};
pub use raecke::{RaeckeParams, RoutingTree, RoutingTreeDistribution, WeightedPaths};
pub use report::{emit_outputs, Manifest};
pub use sim::{ExperimentReport, LinkLoads, StepMetrics, TeSystem};
pub use topology::{Link, LinkId, Node, NodeId, Topology, TopologyFormat};
pub use traffic::{Profile, SequenceSpec, TmSequence, TrafficMatrix};
