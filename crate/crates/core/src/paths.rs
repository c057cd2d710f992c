//! Path selection: Yen's loopless k-shortest paths, bounded simple-path
//! enumeration, and per-pair budget trimming into a [`PathSet`].
//!
//! Every ordering in this module is total. Paths compare by cost first and
//! then by their hop sequence `[(node₁, link₀), (node₂, link₁), …]`, so node
//! sequences decide ties and link ids only separate parallel links.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ParseError;
use crate::raecke::WeightedPaths;
use crate::topology::{LinkId, NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub src: NodeId,
    pub dst: NodeId,
    pub links: Vec<LinkId>,
    /// Node sequence `src..=dst`, always `links.len() + 1` long.
    pub nodes: Vec<NodeId>,
    pub weight: Option<f64>,
}

impl Path {
    pub fn from_links(t: &Topology, src: NodeId, links: Vec<LinkId>) -> Self {
        let mut nodes = Vec::with_capacity(links.len() + 1);
        nodes.push(src);
        for &l in &links {
            nodes.push(t.link(l).dst);
        }
        let dst = *nodes.last().unwrap();
        Path { src, dst, links, nodes, weight: None }
    }

    /// Resolves consecutive nodes to the lowest-id link between them.
    pub fn from_nodes(t: &Topology, nodes: &[NodeId]) -> Option<Self> {
        let (&src, rest) = nodes.split_first()?;
        let mut links = Vec::with_capacity(rest.len());
        let mut at = src;
        for &next in rest {
            if next >= t.node_count() {
                return None;
            }
            links.push(t.find_link(at, next)?);
            at = next;
        }
        Some(Path::from_links(t, src, links))
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn cost(&self, t: &Topology, metric: CostMetric) -> f64 {
        self.links.iter().map(|&l| metric.link_cost(t, l)).sum()
    }

    /// Tie-break key: node sequence first, then link ids (parallel links).
    pub fn order_key(&self) -> (&[NodeId], &[LinkId]) {
        (&self.nodes, &self.links)
    }

    pub fn is_loop_free(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.nodes.len());
        self.nodes.iter().all(|n| seen.insert(*n))
    }

    /// Connected directed walk from `src` to `dst` without repeated nodes.
    pub fn is_valid(&self, t: &Topology) -> bool {
        if self.nodes.len() != self.links.len() + 1
            || self.nodes.first() != Some(&self.src)
            || self.nodes.last() != Some(&self.dst)
            || self.src == self.dst
        {
            return false;
        }
        let connected = self.links.iter().enumerate().all(|(i, &l)| {
            l < t.link_count() && t.link(l).src == self.nodes[i] && t.link(l).dst == self.nodes[i + 1]
        });
        connected && self.is_loop_free()
    }

    pub fn contains_link(&self, link: LinkId) -> bool {
        self.links.contains(&link)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    #[default]
    HopCount,
    InverseCapacity,
}

impl CostMetric {
    pub fn link_cost(self, t: &Topology, link: LinkId) -> f64 {
        match self {
            CostMetric::HopCount => 1.0,
            CostMetric::InverseCapacity => 1.0 / t.link(link).capacity,
        }
    }
}

/// Costs within a relative 1e-9 count as equal, so float summation order
/// cannot override the hop-sequence tie-break.
fn cost_cmp(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Order on `(cost, hop sequence)`.
pub fn compare_paths(t: &Topology, metric: CostMetric, a: &Path, b: &Path) -> Ordering {
    cost_cmp(a.cost(t, metric), b.cost(t, metric)).then_with(|| a.order_key().cmp(&b.order_key()))
}

struct Searcher<'a> {
    t: &'a Topology,
    metric: CostMetric,
    incoming: Vec<Vec<LinkId>>,
}

#[derive(PartialEq)]
struct HeapItem(f64, NodeId);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Searcher<'a> {
    fn new(t: &'a Topology, metric: CostMetric) -> Self {
        let mut incoming = vec![Vec::new(); t.node_count()];
        for l in t.links() {
            incoming[l.dst].push(l.id);
        }
        Searcher { t, metric, incoming }
    }

    /// Lexicographically smallest among the cheapest `src → dst` paths that
    /// avoid the banned nodes and links.
    fn best_path(
        &self,
        src: NodeId,
        dst: NodeId,
        banned_nodes: &[bool],
        banned_links: &HashSet<LinkId>,
    ) -> Option<Vec<LinkId>> {
        let n = self.t.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        dist[dst] = 0.0;
        heap.push(HeapItem(0.0, dst));
        while let Some(HeapItem(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &l in &self.incoming[v] {
                let u = self.t.link(l).src;
                if banned_nodes[u] || banned_links.contains(&l) {
                    continue;
                }
                let nd = d + self.metric.link_cost(self.t, l);
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(HeapItem(nd, u));
                }
            }
        }
        if !dist[src].is_finite() {
            return None;
        }
        let mut links = Vec::new();
        let mut at = src;
        while at != dst {
            let tight = |&l: &LinkId| {
                let link = self.t.link(l);
                if banned_nodes[link.dst] || banned_links.contains(&l) || !dist[link.dst].is_finite() {
                    return false;
                }
                let via = self.metric.link_cost(self.t, l) + dist[link.dst];
                (via - dist[at]).abs() <= 1e-9 * dist[at].max(1.0)
            };
            let l = self
                .t
                .out_links(at)
                .iter()
                .copied()
                .filter(tight)
                .min_by_key(|&l| (self.t.link(l).dst, l))?;
            links.push(l);
            at = self.t.link(l).dst;
            if links.len() > n {
                return None;
            }
        }
        Some(links)
    }
}

/// Up to `k` loopless paths from `src` to `dst` in nondecreasing cost order,
/// ties broken by hop sequence.
pub fn yen_ksp(t: &Topology, src: NodeId, dst: NodeId, k: usize, metric: CostMetric) -> Vec<Path> {
    if k == 0 || src == dst {
        return Vec::new();
    }
    let search = Searcher::new(t, metric);
    let n = t.node_count();
    let no_links = HashSet::new();
    let Some(first) = search.best_path(src, dst, &vec![false; n], &no_links) else {
        return Vec::new();
    };
    let mut accepted = vec![Path::from_links(t, src, first)];
    let mut seen: HashSet<Vec<LinkId>> = HashSet::from([accepted[0].links.clone()]);
    let mut candidates: Vec<(f64, Path)> = Vec::new();

    while accepted.len() < k {
        let prev = accepted.last().unwrap().clone();
        for j in 0..prev.links.len() {
            let spur = prev.nodes[j];
            let root_links = &prev.links[..j];
            let banned_links: HashSet<LinkId> = accepted
                .iter()
                .filter(|p| p.links.len() > j && &p.links[..j] == root_links)
                .map(|p| p.links[j])
                .collect();
            let mut banned_nodes = vec![false; n];
            for &v in &prev.nodes[..j] {
                banned_nodes[v] = true;
            }
            if let Some(tail) = search.best_path(spur, dst, &banned_nodes, &banned_links) {
                let mut links = root_links.to_vec();
                links.extend(tail);
                if seen.insert(links.clone()) {
                    let path = Path::from_links(t, src, links);
                    candidates.push((path.cost(t, metric), path));
                }
            }
        }
        let best = candidates
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| cost_cmp(a.0, b.0).then_with(|| a.1.order_key().cmp(&b.1.order_key())))
            .map(|(i, _)| i);
        match best {
            Some(i) => accepted.push(candidates.swap_remove(i).1),
            None => break,
        }
    }
    accepted
}

/// Result of a bounded simple-path enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub paths: Vec<Path>,
    /// True when `max_paths` stopped the search early.
    pub truncated: bool,
}

pub const DEFAULT_MAX_PATHS: usize = 10_000;

/// Depth-first enumeration of loop-free paths, visiting out-links in
/// `(next node, link id)` order.
pub fn all_simple_paths(t: &Topology, src: NodeId, dst: NodeId, max_paths: usize) -> Enumeration {
    let mut out = Enumeration { paths: Vec::new(), truncated: false };
    if src == dst || max_paths == 0 {
        return out;
    }
    let sorted_out: Vec<Vec<LinkId>> = (0..t.node_count())
        .map(|u| {
            let mut ls = t.out_links(u).to_vec();
            ls.sort_by_key(|&l| (t.link(l).dst, l));
            ls
        })
        .collect();
    let mut on_path = vec![false; t.node_count()];
    let mut links = Vec::new();
    on_path[src] = true;
    dfs(t, &sorted_out, src, dst, max_paths, &mut on_path, &mut links, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    t: &Topology,
    sorted_out: &[Vec<LinkId>],
    at: NodeId,
    dst: NodeId,
    max_paths: usize,
    on_path: &mut [bool],
    links: &mut Vec<LinkId>,
    out: &mut Enumeration,
) {
    for &l in &sorted_out[at] {
        let v = t.link(l).dst;
        if on_path[v] {
            continue;
        }
        if out.paths.len() >= max_paths {
            out.truncated = true;
            return;
        }
        links.push(l);
        if v == dst {
            let src = t.link(links[0]).src;
            out.paths.push(Path::from_links(t, src, links.clone()));
        } else {
            on_path[v] = true;
            dfs(t, sorted_out, v, dst, max_paths, on_path, links, out);
            on_path[v] = false;
        }
        links.pop();
        if out.truncated {
            return;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ksp,
    Raecke,
    AllPaths,
}

/// Ordered paths for every ordered SD pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    n: usize,
    pairs: Vec<Vec<Path>>,
    pub provenance: Provenance,
    /// Set when any all-paths enumeration hit its cap.
    pub truncated: bool,
}

impl PathSet {
    pub fn empty(n: usize, provenance: Provenance) -> Self {
        PathSet { n, pairs: vec![Vec::new(); n * n], provenance, truncated: false }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn paths(&self, src: NodeId, dst: NodeId) -> &[Path] {
        &self.pairs[src * self.n + dst]
    }

    pub fn set_paths(&mut self, src: NodeId, dst: NodeId, paths: Vec<Path>) {
        self.pairs[src * self.n + dst] = paths;
    }

    /// `(src, dst, paths)` for every ordered pair, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId, &[Path])> {
        let n = self.n;
        self.pairs
            .iter()
            .enumerate()
            .filter(move |(i, _)| i / n != i % n)
            .map(move |(i, p)| (i / n, i % n, p.as_slice()))
    }

    pub fn total_paths(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }

    /// Link-path incidence: for each link, the `(src, dst, path index)`
    /// triples whose path crosses it.
    pub fn incidence(&self, link_count: usize) -> Vec<Vec<(NodeId, NodeId, usize)>> {
        let mut out = vec![Vec::new(); link_count];
        for (s, d, paths) in self.iter() {
            for (i, p) in paths.iter().enumerate() {
                for &l in &p.links {
                    out[l].push((s, d, i));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let records: Vec<PathRecord> = self
            .iter()
            .flat_map(|(src, dst, paths)| {
                paths.iter().map(move |p| PathRecord { src, dst, nodes: p.nodes.clone(), weight: p.weight })
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("path set serializes")
    }

    pub fn from_json(t: &Topology, text: &str, provenance: Provenance) -> Result<Self, ParseError> {
        let records: Vec<PathRecord> = serde_json::from_str(text)
            .map_err(|e| ParseError::Malformed { format: "path set json", message: e.to_string() })?;
        let mut set = PathSet::empty(t.node_count(), provenance);
        for (i, r) in records.into_iter().enumerate() {
            let bad = |message: String| ParseError::Malformed { format: "path set json", message };
            let mut path = Path::from_nodes(t, &r.nodes)
                .ok_or_else(|| bad(format!("record {i}: nodes {:?} do not form a path", r.nodes)))?;
            if path.src != r.src || path.dst != r.dst || !path.is_valid(t) {
                return Err(bad(format!("record {i}: path does not match {}->{}", r.src, r.dst)));
            }
            path.weight = r.weight;
            set.pairs[r.src * set.n + r.dst].push(path);
        }
        Ok(set)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRecord {
    src: NodeId,
    dst: NodeId,
    nodes: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

/// Where a path set comes from.
#[derive(Debug, Clone, Copy)]
pub enum PathSource<'a> {
    Ksp(CostMetric),
    AllPaths { max_paths: usize },
    Raecke(&'a WeightedPaths),
}

/// Builds the per-pair path lists. KSP keeps the first `budget` paths, Räcke
/// keeps the `budget` highest-weight paths, all-paths ignores the budget.
pub fn build_path_set(t: &Topology, source: PathSource<'_>, budget: usize) -> PathSet {
    let n = t.node_count();
    let budget = budget.max(1);
    let provenance = match source {
        PathSource::Ksp(_) => Provenance::Ksp,
        PathSource::AllPaths { .. } => Provenance::AllPaths,
        PathSource::Raecke(_) => Provenance::Raecke,
    };
    let results: Vec<(Vec<Path>, bool)> = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let (s, d) = (i / n, i % n);
            if s == d {
                return (Vec::new(), false);
            }
            match source {
                PathSource::Ksp(metric) => (yen_ksp(t, s, d, budget, metric), false),
                PathSource::AllPaths { max_paths } => {
                    let e = all_simple_paths(t, s, d, max_paths);
                    (e.paths, e.truncated)
                }
                PathSource::Raecke(weighted) => (top_weighted(weighted.paths(s, d), budget), false),
            }
        })
        .collect();
    let mut set = PathSet::empty(n, provenance);
    for (i, (paths, truncated)) in results.into_iter().enumerate() {
        set.pairs[i] = paths;
        set.truncated |= truncated;
    }
    set
}

/// The `budget` heaviest paths, ties broken by hop sequence.
pub fn top_weighted(paths: &[Path], budget: usize) -> Vec<Path> {
    let mut sorted: Vec<&Path> = paths.iter().collect();
    sorted.sort_by(|a, b| {
        let (wa, wb) = (a.weight.unwrap_or(0.0), b.weight.unwrap_or(0.0));
        wb.total_cmp(&wa).then_with(|| a.order_key().cmp(&b.order_key()))
    });
    sorted.into_iter().take(budget).cloned().collect()
}
