//! Oblivious routing via a distribution over routing trees.
//!
//! Each iteration builds a randomized hierarchical decomposition (FRT-style)
//! of the node set under the shortest-path metric induced by the current link
//! weights. Leaves are topology nodes; every tree edge maps to a shortest
//! physical path between the representatives of the two clusters it joins.
//! After routing all-pairs unit demand through the tree, link weights grow
//! multiplicatively with relative load so later trees avoid hot links.

use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::paths::Path;
use crate::topology::{LinkId, NodeId, Topology};

/// Tunables for [`raecke_distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaeckeParams {
    pub iterations: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub decomposition: Decomposition,
}

impl Default for RaeckeParams {
    fn default() -> Self {
        RaeckeParams { iterations: 8, epsilon: 0.5, seed: 1, decomposition: Decomposition::Frt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    /// Random permutation of centers, random radius scale β ∈ [1, 2).
    #[default]
    Frt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub members: Vec<NodeId>,
    /// Topology node standing in for this cluster.
    pub rep: NodeId,
    pub depth: usize,
    /// Physical path from this cluster's rep to the parent's rep.
    pub up: Vec<LinkId>,
    /// Physical path from the parent's rep to this cluster's rep.
    pub down: Vec<LinkId>,
}

/// A forest of decomposition trees, one per mutually reachable node class.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTree {
    pub nodes: Vec<TreeNode>,
    /// Tree-node index of each topology node's leaf.
    pub leaf_of: Vec<usize>,
}

impl RoutingTree {
    fn root_of(&self, mut i: usize) -> usize {
        while let Some(p) = self.nodes[i].parent {
            i = p;
        }
        i
    }

    /// Physical route between two leaves through their lowest common
    /// ancestor, with cycles shortcut. `None` when the leaves sit in
    /// different trees.
    pub fn route(&self, t: &Topology, src: NodeId, dst: NodeId) -> Option<Path> {
        if src == dst {
            return None;
        }
        let (mut a, mut b) = (self.leaf_of[src], self.leaf_of[dst]);
        if self.root_of(a) != self.root_of(b) {
            return None;
        }
        let mut up = Vec::new();
        let mut down = Vec::new();
        while self.nodes[a].depth > self.nodes[b].depth {
            up.push(a);
            a = self.nodes[a].parent?;
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            down.push(b);
            b = self.nodes[b].parent?;
        }
        while a != b {
            up.push(a);
            down.push(b);
            a = self.nodes[a].parent?;
            b = self.nodes[b].parent?;
        }
        let mut links: Vec<LinkId> = up.iter().flat_map(|&i| self.nodes[i].up.iter().copied()).collect();
        links.extend(down.iter().rev().flat_map(|&i| self.nodes[i].down.iter().copied()));
        Some(shortcut(t, src, &links))
    }

    /// Structural invariants: leaf bijection, connected edge paths, and
    /// valid leaf-to-leaf routes within each tree.
    pub fn check(&self, t: &Topology) -> Result<(), String> {
        let n = t.node_count();
        if self.leaf_of.len() != n {
            return Err(format!("{} leaves for {} nodes", self.leaf_of.len(), n));
        }
        let mut hit = vec![false; self.nodes.len()];
        for (v, &leaf) in self.leaf_of.iter().enumerate() {
            let node = self.nodes.get(leaf).ok_or(format!("leaf of {v} out of range"))?;
            if !node.children.is_empty() || node.members != [v] || node.rep != v {
                return Err(format!("leaf of {v} is not a singleton cluster"));
            }
            if std::mem::replace(&mut hit[leaf], true) {
                return Err(format!("leaf {leaf} shared"));
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.children.is_empty() && !hit[i] {
                return Err(format!("tree leaf {i} maps to no topology node"));
            }
            if let Some(p) = node.parent {
                let prep = self.nodes[p].rep;
                check_walk(t, node.rep, prep, &node.up).map_err(|e| format!("edge {i} up: {e}"))?;
                check_walk(t, prep, node.rep, &node.down).map_err(|e| format!("edge {i} down: {e}"))?;
            }
        }
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    continue;
                }
                if let Some(p) = self.route(t, s, d) {
                    if !p.is_valid(t) || p.src != s || p.dst != d {
                        return Err(format!("route {s}->{d} invalid: {:?}", p.nodes));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_walk(t: &Topology, from: NodeId, to: NodeId, links: &[LinkId]) -> Result<(), String> {
    let mut at = from;
    let mut seen = vec![false; t.node_count()];
    seen[at] = true;
    for &l in links {
        if t.link(l).src != at {
            return Err(format!("link {l} does not leave node {at}"));
        }
        at = t.link(l).dst;
        if std::mem::replace(&mut seen[at], true) {
            return Err(format!("node {at} repeated"));
        }
    }
    if at != to {
        return Err(format!("ends at {at}, expected {to}"));
    }
    Ok(())
}

/// Drops the cycles of a walk: on revisiting a node, everything since its
/// first visit is removed.
pub fn shortcut(t: &Topology, src: NodeId, walk: &[LinkId]) -> Path {
    let mut links: Vec<LinkId> = Vec::with_capacity(walk.len());
    let mut pos: HashMap<NodeId, usize> = HashMap::from([(src, 0)]);
    let mut nodes = vec![src];
    for &l in walk {
        let v = t.link(l).dst;
        if let Some(&i) = pos.get(&v) {
            for dropped in nodes.drain(i + 1..) {
                pos.remove(&dropped);
            }
            links.truncate(i);
        } else {
            links.push(l);
            pos.insert(v, nodes.len());
            nodes.push(v);
        }
    }
    Path::from_links_or_empty(t, src, links)
}

impl Path {
    fn from_links_or_empty(t: &Topology, src: NodeId, links: Vec<LinkId>) -> Path {
        if links.is_empty() {
            Path { src, dst: src, links, nodes: vec![src], weight: None }
        } else {
            Path::from_links(t, src, links)
        }
    }
}

#[derive(PartialEq)]
struct Item(f64, NodeId);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

/// All-pairs directed shortest paths under positive link weights.
struct Metric {
    dist: Vec<Vec<f64>>,
    pred: Vec<Vec<Option<LinkId>>>,
}

impl Metric {
    fn new(t: &Topology, weights: &[f64]) -> Self {
        let n = t.node_count();
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        let mut pred = vec![vec![None; n]; n];
        for s in 0..n {
            let (d, p) = (&mut dist[s], &mut pred[s]);
            d[s] = 0.0;
            let mut heap = BinaryHeap::from([Item(0.0, s)]);
            while let Some(Item(du, u)) = heap.pop() {
                if du > d[u] {
                    continue;
                }
                for &l in t.out_links(u) {
                    let v = t.link(l).dst;
                    let nd = du + weights[l];
                    if nd < d[v] {
                        d[v] = nd;
                        p[v] = Some(l);
                        heap.push(Item(nd, v));
                    }
                }
            }
        }
        Metric { dist, pred }
    }

    /// Symmetric distance: the longer of the two directed distances.
    fn sym(&self, u: NodeId, v: NodeId) -> f64 {
        self.dist[u][v].max(self.dist[v][u])
    }

    fn path(&self, from: NodeId, to: NodeId, t: &Topology) -> Vec<LinkId> {
        let mut links = Vec::new();
        let mut at = to;
        while at != from {
            let l = self.pred[from][at].expect("reachable within a cluster");
            links.push(l);
            at = t.link(l).src;
        }
        links.reverse();
        links
    }
}

/// One randomized decomposition tree under `link_weights`.
pub fn build_routing_tree<R: Rng + ?Sized>(t: &Topology, link_weights: &[f64], rng: &mut R) -> RoutingTree {
    assert_eq!(link_weights.len(), t.link_count());
    assert!(link_weights.iter().all(|&w| w > 0.0), "link weights must be positive");
    let n = t.node_count();
    let metric = Metric::new(t, link_weights);

    // mutually reachable classes, ordered by smallest member
    let mut class = vec![usize::MAX; n];
    let mut classes: Vec<Vec<NodeId>> = Vec::new();
    for v in 0..n {
        if class[v] == usize::MAX {
            let members: Vec<NodeId> = (v..n).filter(|&u| class[u] == usize::MAX && metric.sym(v, u).is_finite()).collect();
            for &u in &members {
                class[u] = classes.len();
            }
            classes.push(members);
        }
    }

    let mut tree = RoutingTree { nodes: Vec::new(), leaf_of: vec![usize::MAX; n] };
    for members in classes {
        let mut order = members.clone();
        order.shuffle(rng);
        let rank: HashMap<NodeId, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let beta: f64 = rng.gen_range(1.0..2.0);
        let diameter = members
            .iter()
            .flat_map(|&u| members.iter().map(move |&v| (u, v)))
            .map(|(u, v)| metric.sym(u, v))
            .fold(0.0, f64::max);
        let root = tree.nodes.len();
        tree.nodes.push(TreeNode {
            parent: None,
            children: Vec::new(),
            members: members.clone(),
            rep: order[0],
            depth: 0,
            up: Vec::new(),
            down: Vec::new(),
        });
        let mut level = diameter.max(f64::MIN_POSITIVE).log2().ceil();
        let mut frontier = vec![root];
        while !frontier.is_empty() {
            let radius = beta * 2f64.powf(level - 2.0);
            level -= 1.0;
            let mut next = Vec::new();
            for &parent in &frontier {
                let cluster = tree.nodes[parent].members.clone();
                if cluster.len() == 1 {
                    continue;
                }
                let mut parts: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
                for &v in &cluster {
                    let center = order
                        .iter()
                        .position(|&c| metric.sym(c, v) <= radius)
                        .expect("every node centers itself");
                    parts.entry(center).or_default().push(v);
                }
                if parts.len() == 1 {
                    // no split at this scale; retry one level down
                    next.push(parent);
                    continue;
                }
                let depth = tree.nodes[parent].depth + 1;
                let prep = tree.nodes[parent].rep;
                for (ci, part) in parts {
                    let center = order[ci];
                    let rep = if part.contains(&center) {
                        center
                    } else {
                        *part
                            .iter()
                            .min_by(|&&a, &&b| {
                                metric.sym(center, a).total_cmp(&metric.sym(center, b)).then(rank[&a].cmp(&rank[&b]))
                            })
                            .unwrap()
                    };
                    let idx = tree.nodes.len();
                    tree.nodes.push(TreeNode {
                        parent: Some(parent),
                        children: Vec::new(),
                        members: part,
                        rep,
                        depth,
                        up: metric.path(rep, prep, t),
                        down: metric.path(prep, rep, t),
                    });
                    tree.nodes[parent].children.push(idx);
                    next.push(idx);
                }
            }
            frontier = next;
        }
        for (i, node) in tree.nodes.iter().enumerate() {
            if node.members.len() == 1 && node.children.is_empty() {
                tree.leaf_of[node.members[0]] = i;
            }
        }
    }
    tree
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTreeDistribution {
    pub trees: Vec<(RoutingTree, f64)>,
}

impl RoutingTreeDistribution {
    pub fn total_weight(&self) -> f64 {
        self.trees.iter().map(|(_, w)| w).sum()
    }
}

/// Per-link count of all-pairs unit demands routed through `tree`.
pub fn tree_link_loads(t: &Topology, tree: &RoutingTree) -> Vec<f64> {
    let mut loads = vec![0.0; t.link_count()];
    for s in 0..t.node_count() {
        for d in 0..t.node_count() {
            if let Some(p) = tree.route(t, s, d) {
                for &l in &p.links {
                    loads[l] += 1.0;
                }
            }
        }
    }
    loads
}

/// Iteratively builds trees, raising the weight of each link by
/// `exp(ε · u_l)` where `u_l` is its relative load normalized to the most
/// loaded link. Trees get uniform probability.
pub fn raecke_distribution(t: &Topology, params: &RaeckeParams) -> RoutingTreeDistribution {
    let iterations = params.iterations.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let cmax = t.links().iter().map(|l| l.capacity).fold(0.0, f64::max);
    let mut weights: Vec<f64> = t.links().iter().map(|l| cmax / l.capacity).collect();
    let mut trees = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let tree = build_routing_tree(t, &weights, &mut rng);
        let loads = tree_link_loads(t, &tree);
        let rel: Vec<f64> = loads.iter().zip(t.links()).map(|(y, l)| y / l.capacity).collect();
        let peak = rel.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            for (w, r) in weights.iter_mut().zip(&rel) {
                *w *= (params.epsilon * r / peak).exp();
            }
        }
        trees.push((tree, 1.0));
    }
    let total = trees.len() as f64;
    for (_, w) in &mut trees {
        *w /= total;
    }
    RoutingTreeDistribution { trees }
}

/// Physical paths per SD pair with their accumulated tree probability.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPaths {
    n: usize,
    pairs: Vec<Vec<Path>>,
}

impl WeightedPaths {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Paths for one pair in hop-sequence order, `weight` always set.
    pub fn paths(&self, src: NodeId, dst: NodeId) -> &[Path] {
        &self.pairs[src * self.n + dst]
    }

    pub fn weight_sum(&self, src: NodeId, dst: NodeId) -> f64 {
        self.paths(src, dst).iter().filter_map(|p| p.weight).sum()
    }
}

pub fn extract_weighted_paths(t: &Topology, dist: &RoutingTreeDistribution) -> WeightedPaths {
    let n = t.node_count();
    let mut pairs = vec![Vec::new(); n * n];
    for s in 0..n {
        for d in 0..n {
            if s == d {
                continue;
            }
            let mut merged: BTreeMap<(Vec<NodeId>, Vec<LinkId>), (Path, f64)> = BTreeMap::new();
            for (tree, lambda) in &dist.trees {
                if let Some(p) = tree.route(t, s, d) {
                    merged.entry((p.nodes.clone(), p.links.clone())).or_insert_with(|| (p, 0.0)).1 += lambda;
                }
            }
            pairs[s * n + d] = merged
                .into_values()
                .map(|(p, w)| Path { weight: Some(w), ..p })
                .collect();
        }
    }
    WeightedPaths { n, pairs }
}
