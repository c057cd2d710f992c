use serde::Serialize;

use super::{LpModel, LpSolution, VarRole};
use crate::error::AllocationError;
use crate::paths::{Path, PathSet, Provenance};
use crate::topology::{NodeId, Topology};
use crate::traffic::TrafficMatrix;

/// Allowed demand-row residual, relative to `max(1, h_d)`.
pub const DEMAND_TOLERANCE: f64 = 1e-6;

/// Flows of one demand over its candidate paths, in path-set order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandFlows {
    pub src: NodeId,
    pub dst: NodeId,
    pub volume: f64,
    pub flows: Vec<f64>,
    /// `flows[p] / volume`; all zero when the volume is zero.
    pub ratios: Vec<f64>,
}

/// Splitting decision for one timestep.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FlowAllocation {
    /// Demands that have at least one path, ordered by `(src, dst)`.
    pub demands: Vec<DemandFlows>,
    /// Positive demands without any path; counted as dropped.
    pub unroutable: Vec<(NodeId, NodeId, f64)>,
}

impl FlowAllocation {
    pub fn demand(&self, src: NodeId, dst: NodeId) -> Option<&DemandFlows> {
        self.demands
            .binary_search_by(|d| (d.src, d.dst).cmp(&(src, dst)))
            .ok()
            .map(|i| &self.demands[i])
    }

    pub fn total_flow(&self) -> f64 {
        self.demands.iter().flat_map(|d| &d.flows).sum()
    }
}

fn finish(src: NodeId, dst: NodeId, volume: f64, mut flows: Vec<f64>) -> Result<DemandFlows, AllocationError> {
    for x in flows.iter_mut() {
        *x = x.max(0.0);
    }
    let sum: f64 = flows.iter().sum();
    let residual = (sum - volume).abs();
    if residual > DEMAND_TOLERANCE * volume.max(1.0) {
        return Err(AllocationError::Residual { src, dst, residual });
    }
    if volume == 0.0 {
        flows.iter_mut().for_each(|x| *x = 0.0);
        let ratios = vec![0.0; flows.len()];
        return Ok(DemandFlows { src, dst, volume, flows, ratios });
    }
    if sum > 0.0 {
        let k = volume / sum;
        flows.iter_mut().for_each(|x| *x *= k);
    }
    let ratios = flows.iter().map(|x| x / volume).collect();
    Ok(DemandFlows { src, dst, volume, flows, ratios })
}

/// Reads path flows out of a solved path-form model. Negative round-off is
/// clamped and each demand renormalized to exactly `h_d`.
pub fn to_allocation(
    model: &LpModel,
    sol: &LpSolution,
    paths: &PathSet,
    tm: &TrafficMatrix,
) -> Result<FlowAllocation, AllocationError> {
    if !sol.is_optimal() {
        return Err(AllocationError::NotOptimal(sol.status));
    }
    let n = paths.node_count();
    let mut raw: Vec<Vec<f64>> = vec![Vec::new(); n * n];
    for (s, d, ps) in paths.iter() {
        raw[s * n + d] = vec![0.0; ps.len()];
    }
    for (v, &x) in model.vars.iter().zip(&sol.values) {
        if let VarRole::PathFlow { src, dst, path } = v.role {
            let slot = raw[src * n + dst]
                .get_mut(path)
                .ok_or(AllocationError::UnknownPath { src, dst, index: path })?;
            *slot = x;
        }
    }
    let mut out = FlowAllocation { demands: Vec::new(), unroutable: model.unroutable.clone() };
    for (s, d, ps) in paths.iter() {
        if ps.is_empty() {
            continue;
        }
        let flows = std::mem::take(&mut raw[s * n + d]);
        out.demands.push(finish(s, d, tm.get(s, d), flows)?);
    }
    Ok(out)
}

/// Splits a solved arc-form model into simple paths per demand.
///
/// For each source the remaining arc flow is peeled one widest path at a
/// time, destinations in ascending order. Leftover circulation is discarded
/// since it carries no demand. The returned path set is specific to this
/// solution and has `AllPaths` provenance.
pub fn decompose_arc_flows(
    model: &LpModel,
    sol: &LpSolution,
    t: &Topology,
    tm: &TrafficMatrix,
) -> Result<(PathSet, FlowAllocation), AllocationError> {
    if !sol.is_optimal() {
        return Err(AllocationError::NotOptimal(sol.status));
    }
    let n = t.node_count();
    let mut per_source = vec![vec![0.0; t.link_count()]; n];
    let mut present = vec![false; n];
    for (v, &x) in model.vars.iter().zip(&sol.values) {
        if let VarRole::ArcFlow { source, link } = v.role {
            per_source[source][link] = x.max(0.0);
            present[source] = true;
        }
    }
    let unroutable: Vec<(NodeId, NodeId)> = model.unroutable.iter().map(|&(s, d, _)| (s, d)).collect();
    let mut set = PathSet::empty(n, Provenance::AllPaths);
    let mut alloc = FlowAllocation { demands: Vec::new(), unroutable: model.unroutable.clone() };
    for s in 0..n {
        let flow = &mut per_source[s];
        for d in 0..n {
            let h = tm.get(s, d);
            if d == s || h <= 0.0 || unroutable.contains(&(s, d)) {
                continue;
            }
            if !present[s] {
                return Err(AllocationError::Residual { src: s, dst: d, residual: h });
            }
            let mut found: Vec<(Path, f64)> = Vec::new();
            let mut left = h;
            let floor = h * 1e-12;
            while left > floor {
                let Some((links, width)) = widest_path(t, flow, s, d, floor) else {
                    break;
                };
                let x = width.min(left);
                for &l in &links {
                    flow[l] -= x;
                }
                left -= x;
                let p = Path::from_links(t, s, links);
                match found.iter_mut().find(|(q, _)| q.links == p.links) {
                    Some((_, acc)) => *acc += x,
                    None => found.push((p, x)),
                }
            }
            found.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.order_key().cmp(&b.0.order_key())));
            let flows: Vec<f64> = found.iter().map(|f| f.1).collect();
            let demand = finish(s, d, h, flows)?;
            set.set_paths(s, d, found.into_iter().map(|f| f.0).collect());
            alloc.demands.push(demand);
        }
    }
    Ok((set, alloc))
}

/// Maximum-bottleneck simple path over links carrying more than `floor`.
/// Ties go to the earlier-settled node and lower link id.
fn widest_path(t: &Topology, flow: &[f64], src: NodeId, dst: NodeId, floor: f64) -> Option<(Vec<usize>, f64)> {
    let n = t.node_count();
    let mut width = vec![0.0f64; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    width[src] = f64::INFINITY;
    loop {
        let u = (0..n).filter(|&v| !done[v] && width[v] > 0.0).max_by(|&a, &b| {
            width[a].total_cmp(&width[b]).then(b.cmp(&a))
        })?;
        done[u] = true;
        if u == dst {
            break;
        }
        for &l in t.out_links(u) {
            let link = t.link(l);
            if flow[l] <= floor || done[link.dst] {
                continue;
            }
            let w = width[u].min(flow[l]);
            if w > width[link.dst] {
                width[link.dst] = w;
                pred[link.dst] = Some(l);
            }
        }
    }
    let mut links = Vec::new();
    let mut v = dst;
    while v != src {
        let l = pred[v]?;
        links.push(l);
        v = t.link(l).src;
    }
    links.reverse();
    Some((links, width[dst]))
}
