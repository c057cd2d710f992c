//! Timestep simulation: flow placement, the proportional drop model, the
//! three recorded metrics, and multi-system experiment orchestration.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::AllocationError;
use crate::lp::{
    build_arc_lp, build_lp, decompose_arc_flows, solve_lp, to_allocation, FlowAllocation, LpStatus, Objective,
};
use crate::paths::{build_path_set, CostMetric, PathSet, PathSource};
use crate::raecke::{extract_weighted_paths, raecke_distribution, RaeckeParams};
use crate::topology::{NodeId, Topology};
use crate::traffic::{TmSequence, TrafficMatrix};

/// Latency is evaluated at `min(load, LATENCY_CLAMP · c)`.
pub const LATENCY_CLAMP: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathAlgorithm {
    Ksp,
    Raecke,
    /// Every simple path; solved in node-arc form and decomposed per step.
    AllPaths,
}

/// A path-selection algorithm paired with a rate-adaptation objective.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TeSystem {
    pub name: String,
    pub paths: PathAlgorithm,
    pub objective: Objective,
    /// Räcke seed; `None` for deterministic path algorithms.
    pub seed: Option<u64>,
}

impl TeSystem {
    pub const NAMES: [&'static str; 6] = ["KSP+LB", "KSP+AD", "RACKE+LB", "RACKE+AD", "OPTIMAL(LB)", "OPTIMAL(AD)"];

    /// Parses one of [`TeSystem::NAMES`].
    pub fn from_name(name: &str) -> Option<TeSystem> {
        let (paths, objective) = match name {
            "KSP+LB" => (PathAlgorithm::Ksp, Objective::LoadBalance),
            "KSP+AD" => (PathAlgorithm::Ksp, Objective::AverageDelay),
            "RACKE+LB" => (PathAlgorithm::Raecke, Objective::LoadBalance),
            "RACKE+AD" => (PathAlgorithm::Raecke, Objective::AverageDelay),
            "OPTIMAL(LB)" => (PathAlgorithm::AllPaths, Objective::LoadBalance),
            "OPTIMAL(AD)" => (PathAlgorithm::AllPaths, Objective::AverageDelay),
            _ => return None,
        };
        Some(TeSystem { name: name.to_string(), paths, objective, seed: None })
    }

    pub fn all() -> Vec<TeSystem> {
        Self::NAMES.iter().map(|n| Self::from_name(n).unwrap()).collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Per-link offered (or delivered) load and utilization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkLoads {
    pub load: Vec<f64>,
    pub utilization: Vec<f64>,
}

impl LinkLoads {
    fn from_loads(t: &Topology, load: Vec<f64>) -> Self {
        let utilization = load.iter().zip(t.links()).map(|(y, l)| y / l.capacity).collect();
        LinkLoads { load, utilization }
    }

    pub fn max_utilization(&self) -> f64 {
        self.utilization.iter().copied().fold(0.0, f64::max)
    }
}

/// `y_l = Σ` flows of the paths through `l`.
pub fn place_flows(alloc: &FlowAllocation, paths: &PathSet, t: &Topology) -> Result<LinkLoads, AllocationError> {
    let mut load = vec![0.0; t.link_count()];
    for d in &alloc.demands {
        let ps = paths.paths(d.src, d.dst);
        if d.flows.len() > ps.len() {
            return Err(AllocationError::UnknownPath { src: d.src, dst: d.dst, index: ps.len() });
        }
        for (x, p) in d.flows.iter().zip(ps) {
            for &l in &p.links {
                load[l] += x;
            }
        }
    }
    Ok(LinkLoads::from_loads(t, load))
}

/// Outcome of the drop model for one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delivery {
    /// Delivered volume per demand and path, aligned with `alloc.demands`.
    pub delivered: Vec<Vec<f64>>,
    pub loads: LinkLoads,
    pub survival: Vec<f64>,
}

impl Delivery {
    pub fn total(&self) -> f64 {
        self.delivered.iter().flatten().sum()
    }
}

/// Each link passes `s_l = min(1, c_l / y_l)` of what is offered to it; a
/// path delivers its flow times the product of survivals along it.
pub fn apply_drop_model(alloc: &FlowAllocation, offered: &LinkLoads, paths: &PathSet, t: &Topology) -> Delivery {
    let survival: Vec<f64> = offered
        .load
        .iter()
        .zip(t.links())
        .map(|(&y, l)| if y > l.capacity { l.capacity / y } else { 1.0 })
        .collect();
    let mut load = vec![0.0; t.link_count()];
    let delivered = alloc
        .demands
        .iter()
        .map(|d| {
            d.flows
                .iter()
                .zip(paths.paths(d.src, d.dst))
                .map(|(&x, p)| {
                    let v = p.links.iter().fold(x, |acc, &l| acc * survival[l]);
                    for &l in &p.links {
                        load[l] += v;
                    }
                    v
                })
                .collect()
        })
        .collect();
    Delivery { delivered, loads: LinkLoads::from_loads(t, load), survival }
}

/// One `(latency, delivered volume)` observation for a path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencySample {
    pub src: NodeId,
    pub dst: NodeId,
    pub path_idx: usize,
    pub latency: f64,
    pub delivered: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMetrics {
    pub throughput: f64,
    /// Pre-drop maximum link utilization.
    pub max_utilization: f64,
    /// Pre-drop utilization of every link.
    pub utilization: Vec<f64>,
    pub samples: Vec<LatencySample>,
    pub demand: f64,
    pub delivered: f64,
    /// Optimal LP objective of this step.
    pub lp_objective: f64,
}

impl StepMetrics {
    /// Fraction of links offered at least their capacity.
    pub fn bottleneck_fraction(&self) -> f64 {
        if self.utilization.is_empty() {
            return 0.0;
        }
        self.utilization.iter().filter(|&&u| u >= 1.0).count() as f64 / self.utilization.len() as f64
    }
}

/// `load/(c - load)` with the load clamped just below capacity.
pub fn link_latency(load: f64, capacity: f64) -> f64 {
    let y = load.min(LATENCY_CLAMP * capacity);
    y / (capacity - y)
}

pub fn compute_metrics(
    alloc: &FlowAllocation,
    delivery: &Delivery,
    offered: &LinkLoads,
    tm: &TrafficMatrix,
    paths: &PathSet,
    t: &Topology,
) -> StepMetrics {
    let link_delay: Vec<f64> = delivery
        .loads
        .load
        .iter()
        .zip(t.links())
        .map(|(&y, l)| link_latency(y, l.capacity))
        .collect();
    let mut samples = Vec::new();
    for (d, got) in alloc.demands.iter().zip(&delivery.delivered) {
        for (i, p) in paths.paths(d.src, d.dst).iter().enumerate().take(d.flows.len()) {
            if d.flows[i] <= 0.0 {
                continue;
            }
            samples.push(LatencySample {
                src: d.src,
                dst: d.dst,
                path_idx: i,
                latency: p.links.iter().map(|&l| link_delay[l]).sum(),
                delivered: got[i],
            });
        }
    }
    let demand = tm.total();
    let delivered = delivery.total();
    // measured as 1 - dropped share so a drop-free step is exactly 1.0
    let dropped: f64 = alloc.unroutable.iter().map(|u| u.2).sum::<f64>()
        + alloc
            .demands
            .iter()
            .zip(&delivery.delivered)
            .flat_map(|(d, got)| d.flows.iter().zip(got).map(|(x, v)| x - v))
            .sum::<f64>();
    StepMetrics {
        throughput: if demand > 0.0 { (1.0 - dropped / demand).clamp(0.0, 1.0) } else { 1.0 },
        max_utilization: offered.max_utilization(),
        utilization: offered.utilization.clone(),
        samples,
        demand,
        delivered,
        lp_objective: f64::NAN,
    }
}

/// Knobs shared by every system in one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub budget: usize,
    pub ksp_metric: CostMetric,
    pub raecke: RaeckeParams,
    pub lp_tolerance: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            budget: 4,
            ksp_metric: CostMetric::HopCount,
            raecke: RaeckeParams::default(),
            lp_tolerance: crate::lp::DEFAULT_TOLERANCE,
        }
    }
}

/// Why a system's series stopped early.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub step: usize,
    pub reason: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSeries {
    pub system: TeSystem,
    pub steps: Vec<StepMetrics>,
    pub failure: Option<Failure>,
}

impl SystemSeries {
    pub fn mean_throughput(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.throughput).sum::<f64>() / self.steps.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub series: Vec<SystemSeries>,
    pub peak_step: usize,
    pub link_count: usize,
}

impl ExperimentReport {
    pub fn system(&self, name: &str) -> Option<&SystemSeries> {
        self.series.iter().find(|s| s.system.name == name)
    }
}

/// Static route set of a system; `None` for per-step decomposed systems.
pub fn system_paths(system: &TeSystem, t: &Topology, opts: &RunOptions) -> Option<PathSet> {
    match system.paths {
        PathAlgorithm::Ksp => Some(build_path_set(t, PathSource::Ksp(opts.ksp_metric), opts.budget)),
        PathAlgorithm::Raecke => {
            let params = RaeckeParams { seed: system.seed.unwrap_or(opts.raecke.seed), ..opts.raecke.clone() };
            let dist = raecke_distribution(t, &params);
            let weighted = extract_weighted_paths(t, &dist);
            Some(build_path_set(t, PathSource::Raecke(&weighted), opts.budget))
        }
        PathAlgorithm::AllPaths => None,
    }
}

/// Solves, places, drops and measures one step.
pub fn simulate_step(
    objective: Objective,
    paths: Option<&PathSet>,
    tm: &TrafficMatrix,
    t: &Topology,
    tolerance: f64,
) -> Result<StepMetrics, String> {
    let (model, owned);
    let (alloc, paths, sol) = match paths {
        Some(paths) => {
            model = build_lp(paths, tm, t, objective);
            let sol = solve_lp(&model, tolerance);
            let alloc = to_allocation(&model, &sol, paths, tm).map_err(|e| e.to_string())?;
            (alloc, paths, sol)
        }
        None => {
            model = build_arc_lp(t, tm, objective);
            let sol = solve_lp(&model, tolerance);
            let (set, alloc) = decompose_arc_flows(&model, &sol, t, tm).map_err(|e| e.to_string())?;
            owned = set;
            (alloc, &owned, sol)
        }
    };
    debug_assert_eq!(sol.status, LpStatus::Optimal);
    let offered = place_flows(&alloc, paths, t).map_err(|e| e.to_string())?;
    let delivery = apply_drop_model(&alloc, &offered, paths, t);
    let mut m = compute_metrics(&alloc, &delivery, &offered, tm, paths, t);
    m.lp_objective = sol.objective;
    Ok(m)
}

fn run_system(system: &TeSystem, t: &Topology, tms: &TmSequence, opts: &RunOptions) -> SystemSeries {
    let paths = system_paths(system, t, opts);
    let mut steps = Vec::with_capacity(tms.steps.len());
    let mut failure = None;
    for (i, tm) in tms.steps.iter().enumerate() {
        match simulate_step(system.objective, paths.as_ref(), tm, t, opts.lp_tolerance) {
            Ok(m) => steps.push(m),
            Err(reason) => {
                failure = Some(Failure { step: i, reason });
                break;
            }
        }
    }
    SystemSeries { system: system.clone(), steps, failure }
}

/// Runs every system over the whole sequence, systems in parallel. The
/// report lists systems in the given order and is independent of thread
/// scheduling.
pub fn run_experiment(t: &Topology, tms: &TmSequence, systems: &[TeSystem], opts: &RunOptions) -> ExperimentReport {
    let series = systems.par_iter().map(|s| run_system(s, t, tms, opts)).collect();
    ExperimentReport { series, peak_step: tms.peak_step(), link_count: t.link_count() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::DemandFlows;
    use crate::paths::{Path, Provenance};

    fn line3() -> Topology {
        Topology::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![(0, 1, 10.0), (1, 2, 10.0), (0, 2, 10.0), (1, 0, 10.0)],
        )
    }

    fn alloc_of(demands: Vec<(NodeId, NodeId, Vec<f64>)>) -> FlowAllocation {
        FlowAllocation {
            demands: demands
                .into_iter()
                .map(|(src, dst, flows)| {
                    let volume: f64 = flows.iter().sum();
                    let ratios = flows.iter().map(|x| x / volume).collect();
                    DemandFlows { src, dst, volume, flows, ratios }
                })
                .collect(),
            unroutable: Vec::new(),
        }
    }

    #[test]
    fn place_single_and_shared() {
        let t = line3();
        let mut ps = PathSet::empty(3, Provenance::Ksp);
        ps.set_paths(0, 2, vec![Path::from_links(&t, 0, vec![0, 1]), Path::from_links(&t, 0, vec![2])]);
        ps.set_paths(1, 2, vec![Path::from_links(&t, 1, vec![1])]);
        let loads = place_flows(&alloc_of(vec![(0, 2, vec![5.0, 0.0])]), &ps, &t).unwrap();
        assert_eq!(loads.load, vec![5.0, 5.0, 0.0, 0.0]);
        let loads = place_flows(&alloc_of(vec![(0, 2, vec![2.0, 1.0]), (1, 2, vec![4.0])]), &ps, &t).unwrap();
        assert_eq!(loads.load[1], 6.0);
        let zero = place_flows(&FlowAllocation::default(), &ps, &t).unwrap();
        assert!(zero.load.iter().all(|&y| y == 0.0));
        let bad = alloc_of(vec![(1, 2, vec![1.0, 1.0])]);
        assert!(matches!(place_flows(&bad, &ps, &t), Err(AllocationError::UnknownPath { .. })));
    }

    #[test]
    fn drop_model_cases() {
        let t = Topology::new(vec!["a".into(), "b".into(), "c".into()], vec![(0, 1, 10.0), (1, 2, 10.0)]);
        let mut ps = PathSet::empty(3, Provenance::Ksp);
        ps.set_paths(0, 1, vec![Path::from_links(&t, 0, vec![0])]);
        ps.set_paths(0, 2, vec![Path::from_links(&t, 0, vec![0, 1])]);
        let a = alloc_of(vec![(0, 1, vec![15.0])]);
        let offered = place_flows(&a, &ps, &t).unwrap();
        let d = apply_drop_model(&a, &offered, &ps, &t);
        assert!((d.survival[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((d.delivered[0][0] - 10.0).abs() < 1e-12);
        let a = alloc_of(vec![(0, 1, vec![4.0])]);
        let offered = place_flows(&a, &ps, &t).unwrap();
        assert_eq!(apply_drop_model(&a, &offered, &ps, &t).delivered[0][0], 4.0);
        // two links each at survival 0.5
        let a = alloc_of(vec![(0, 2, vec![20.0])]);
        let offered = place_flows(&a, &ps, &t).unwrap();
        let mut off = offered.clone();
        off.load = vec![20.0, 20.0];
        let d = apply_drop_model(&a, &off, &ps, &t);
        assert!((d.delivered[0][0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(link_latency(0.5, 1.0), 1.0);
        let clamped = link_latency(15.0, 10.0);
        assert!((clamped - 9.99 / (10.0 - 9.99)).abs() < 1e-6);

        let t = Topology::new(vec!["a".into(), "b".into()], vec![(0, 1, 10.0)]);
        let mut ps = PathSet::empty(2, Provenance::Ksp);
        ps.set_paths(0, 1, vec![Path::from_links(&t, 0, vec![0])]);
        let mut tm = TrafficMatrix::zeros(2);
        tm.set(0, 1, 15.0);
        let a = alloc_of(vec![(0, 1, vec![15.0])]);
        let offered = place_flows(&a, &ps, &t).unwrap();
        let d = apply_drop_model(&a, &offered, &ps, &t);
        let m = compute_metrics(&a, &d, &offered, &tm, &ps, &t);
        assert!((m.max_utilization - 1.5).abs() < 1e-12);
        assert!((m.throughput - 10.0 / 15.0).abs() < 1e-12);
        assert!((m.samples[0].latency - clamped).abs() < 1e-9);
        assert_eq!(m.bottleneck_fraction(), 1.0);

        tm.set(0, 1, 10.0);
        let a = alloc_of(vec![(0, 1, vec![10.0])]);
        let offered = place_flows(&a, &ps, &t).unwrap();
        let d = apply_drop_model(&a, &offered, &ps, &t);
        assert_eq!(compute_metrics(&a, &d, &offered, &tm, &ps, &t).throughput, 1.0);
        let empty = TrafficMatrix::zeros(2);
        let none = FlowAllocation::default();
        let d = apply_drop_model(&none, &place_flows(&none, &ps, &t).unwrap(), &ps, &t);
        assert_eq!(compute_metrics(&none, &d, &d.loads, &empty, &ps, &t).throughput, 1.0);
    }

    #[test]
    fn two_node_all_systems() {
        let t = Topology::new(vec!["a".into(), "b".into()], vec![(0, 1, 10.0), (1, 0, 10.0)]);
        let mut tm = TrafficMatrix::zeros(2);
        tm.set(0, 1, 1.0);
        tm.set(1, 0, 2.0);
        let seq = TmSequence { steps: vec![tm], generator: "test".into(), seed: None, profile: None };
        let report = run_experiment(&t, &seq, &TeSystem::all(), &RunOptions::default());
        assert_eq!(report.series.len(), 6);
        for s in &report.series {
            assert!(s.failure.is_none(), "{}: {:?}", s.system.name, s.failure);
            assert_eq!(s.steps.len(), 1);
            assert_eq!(s.steps[0].throughput, 1.0);
            assert!((s.steps[0].max_utilization - 0.2).abs() < 1e-9);
        }
        assert_eq!(report, run_experiment(&t, &seq, &TeSystem::all(), &RunOptions::default()));
    }

    #[test]
    fn unroutable_demand_counts_as_dropped() {
        let t = Topology::new(vec!["a".into(), "b".into()], vec![(0, 1, 10.0)]);
        let mut tm = TrafficMatrix::zeros(2);
        tm.set(0, 1, 3.0);
        tm.set(1, 0, 1.0);
        let seq = TmSequence { steps: vec![tm], generator: "test".into(), seed: None, profile: None };
        let report = run_experiment(&t, &seq, &TeSystem::all(), &RunOptions::default());
        for s in &report.series {
            // trees only span mutually reachable nodes, so a one-way link carries no tree route
            let expect = if s.system.paths == PathAlgorithm::Raecke { 0.0 } else { 0.75 };
            assert!((s.steps[0].throughput - expect).abs() < 1e-9, "{}", s.system.name);
        }
    }

    #[test]
    fn names_round_trip() {
        for n in TeSystem::NAMES {
            assert_eq!(TeSystem::from_name(n).unwrap().name, n);
        }
        assert!(TeSystem::from_name("KSP+MLU").is_none());
    }
}
