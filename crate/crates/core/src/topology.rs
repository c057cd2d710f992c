//! Capacitated directed topologies: construction, JSON and GraphML readers,
//! validation and capacity statistics.
//!
//! Nodes carry dense ids `0..n`. A physical bidirectional cable is two
//! [`Link`]s, one per direction. Capacities are plain `f64` volumes per
//! timestep; the GraphML reader normalizes Topology Zoo link speeds to Mbps.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ParseError;

pub type NodeId = usize;
pub type LinkId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    pub capacity: f64,
}

/// Directed capacitated graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    adjacency: Vec<Vec<LinkId>>,
}

impl Topology {
    /// Builds a topology from node labels and `(src, dst, capacity)` triples.
    ///
    /// No invariants are enforced here beyond endpoint bounds; use
    /// [`validate_topology`] to inspect the result. Links with an endpoint
    /// outside `0..labels.len()` are kept but left out of the adjacency.
    pub fn new(labels: Vec<String>, links: Vec<(NodeId, NodeId, f64)>) -> Self {
        let nodes: Vec<Node> = labels
            .into_iter()
            .enumerate()
            .map(|(id, label)| Node { id, label })
            .collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let links: Vec<Link> = links
            .into_iter()
            .enumerate()
            .map(|(id, (src, dst, capacity))| {
                if src < adjacency.len() && dst < adjacency.len() {
                    adjacency[src].push(id);
                }
                Link { id, src, dst, capacity }
            })
            .collect();
        Topology { nodes, links, adjacency }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    /// Outgoing link ids of `node`, in link-id order.
    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.adjacency[node]
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.nodes[node].label
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.label == label)
    }

    /// Lowest-id link from `src` to `dst`, if any.
    pub fn find_link(&self, src: NodeId, dst: NodeId) -> Option<LinkId> {
        self.adjacency
            .get(src)?
            .iter()
            .copied()
            .find(|&l| self.links[l].dst == dst)
    }

    /// Nodes reachable from `src` following directed links.
    pub fn reachable_from(&self, src: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([src]);
        seen[src] = true;
        while let Some(u) = queue.pop_front() {
            for &l in &self.adjacency[u] {
                let v = self.links[l].dst;
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Serializes into the JSON topology format (all links directed).
    pub fn to_json(&self) -> String {
        let doc = JsonTopology {
            nodes: self.nodes.iter().map(|n| n.label.clone()).collect(),
            links: self
                .links
                .iter()
                .map(|l| JsonLink {
                    src: self.nodes[l.src].label.clone(),
                    dst: self.nodes[l.dst].label.clone(),
                    cap: l.capacity,
                    undirected: false,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("topology serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyFormat {
    Graphml,
    Json,
}

/// Options for the GraphML reader. Topology Zoo files disagree on where the
/// link speed lives and in which unit, hence the knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphmlOptions {
    /// Edge attribute holding the capacity value.
    pub capacity_attr: String,
    /// Edge attribute holding a unit prefix (`K`, `M`, `G`, `T`); values are
    /// normalized to the `M` unit when present.
    pub units_attr: Option<String>,
    /// Multiplier applied after unit normalization.
    pub unit_multiplier: f64,
    /// Capacity used for edges without the capacity attribute.
    pub default_capacity: Option<f64>,
}

impl Default for GraphmlOptions {
    fn default() -> Self {
        GraphmlOptions {
            capacity_attr: "LinkSpeed".to_string(),
            units_attr: Some("LinkSpeedUnits".to_string()),
            unit_multiplier: 1.0,
            default_capacity: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonTopology {
    nodes: Vec<String>,
    links: Vec<JsonLink>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonLink {
    src: String,
    dst: String,
    cap: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    undirected: bool,
}

pub fn parse_topology(
    source: &str,
    format: TopologyFormat,
    opts: &GraphmlOptions,
) -> Result<Topology, ParseError> {
    match format {
        TopologyFormat::Json => parse_json(source),
        TopologyFormat::Graphml => parse_graphml(source, opts),
    }
}

fn index_labels(labels: &[String]) -> Result<HashMap<&str, NodeId>, ParseError> {
    let mut index = HashMap::with_capacity(labels.len());
    for (id, label) in labels.iter().enumerate() {
        if index.insert(label.as_str(), id).is_some() {
            return Err(ParseError::DuplicateNode(label.clone()));
        }
    }
    Ok(index)
}

pub fn parse_json(source: &str) -> Result<Topology, ParseError> {
    let doc: JsonTopology = serde_json::from_str(source).map_err(|e| ParseError::Malformed {
        format: "json",
        message: e.to_string(),
    })?;
    let index = index_labels(&doc.nodes)?;
    let lookup = |label: &str| {
        index
            .get(label)
            .copied()
            .ok_or_else(|| ParseError::UnknownNode(label.to_string()))
    };
    let mut links = Vec::new();
    for (i, link) in doc.links.iter().enumerate() {
        let element = format!("link {i} ({}->{})", link.src, link.dst);
        let (src, dst) = (lookup(&link.src)?, lookup(&link.dst)?);
        check_link(&element, src, dst, &link.src, link.cap)?;
        links.push((src, dst, link.cap));
        if link.undirected {
            links.push((dst, src, link.cap));
        }
    }
    Ok(Topology::new(doc.nodes, links))
}

fn check_link(element: &str, src: NodeId, dst: NodeId, label: &str, cap: f64) -> Result<(), ParseError> {
    if src == dst {
        return Err(ParseError::SelfLoop { element: element.to_string(), node: label.to_string() });
    }
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(ParseError::NonPositiveCapacity { element: element.to_string(), capacity: cap });
    }
    Ok(())
}

fn unit_scale(prefix: &str) -> Option<f64> {
    match prefix.trim() {
        "" => Some(1e-6),
        "K" | "k" => Some(1e-3),
        "M" => Some(1.0),
        "G" => Some(1e3),
        "T" => Some(1e6),
        _ => None,
    }
}

/// Reads the node/edge subset of GraphML. Undirected edges (per the graph's
/// `edgedefault` or an edge-level `directed="false"`) expand into two links.
pub fn parse_graphml(source: &str, opts: &GraphmlOptions) -> Result<Topology, ParseError> {
    let malformed = |message: String| ParseError::Malformed { format: "graphml", message };
    let doc = roxmltree::Document::parse(source).map_err(|e| malformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "graphml" {
        return Err(malformed(format!("root element is <{}>", root.tag_name().name())));
    }

    // attr.name -> key id, per domain
    let mut node_keys = HashMap::new();
    let mut edge_keys = HashMap::new();
    for key in root.children().filter(|n| n.tag_name().name() == "key") {
        let (Some(id), Some(name)) = (key.attribute("id"), key.attribute("attr.name")) else {
            continue;
        };
        match key.attribute("for") {
            Some("node") => {
                node_keys.insert(name.to_string(), id.to_string());
            }
            Some("edge") => {
                edge_keys.insert(name.to_string(), id.to_string());
            }
            Some("all") => {
                node_keys.insert(name.to_string(), id.to_string());
                edge_keys.insert(name.to_string(), id.to_string());
            }
            _ => {}
        }
    }

    let graph = root
        .children()
        .find(|n| n.tag_name().name() == "graph")
        .ok_or_else(|| malformed("no <graph> element".to_string()))?;
    let default_directed = graph.attribute("edgedefault") == Some("directed");

    let data_of = |elem: roxmltree::Node, key: Option<&String>| -> Option<String> {
        let key = key?;
        elem.children()
            .filter(|c| c.tag_name().name() == "data")
            .find(|c| c.attribute("key") == Some(key.as_str()))
            .map(|c| c.text().unwrap_or("").trim().to_string())
    };

    let label_key = node_keys.get("label");
    let mut xml_ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels = Vec::new();
    for node in graph.children().filter(|n| n.tag_name().name() == "node") {
        let id = node
            .attribute("id")
            .ok_or_else(|| malformed("<node> without id".to_string()))?;
        if xml_ids.insert(id.to_string(), labels.len()).is_some() {
            return Err(ParseError::DuplicateNode(id.to_string()));
        }
        labels.push(data_of(node, label_key).unwrap_or_else(|| id.to_string()));
    }
    index_labels(&labels)?;

    let cap_key = edge_keys.get(&opts.capacity_attr);
    let units_key = opts.units_attr.as_ref().and_then(|a| edge_keys.get(a));
    let mut links = Vec::new();
    for (i, edge) in graph.children().filter(|n| n.tag_name().name() == "edge").enumerate() {
        let endpoint = |attr: &str| -> Result<NodeId, ParseError> {
            let id = edge
                .attribute(attr)
                .ok_or_else(|| malformed(format!("edge {i} without {attr}")))?;
            xml_ids.get(id).copied().ok_or_else(|| ParseError::UnknownNode(id.to_string()))
        };
        let (src, dst) = (endpoint("source")?, endpoint("target")?);
        let element = format!("edge {i} ({}->{})", labels[src], labels[dst]);
        let capacity = match data_of(edge, cap_key) {
            Some(raw) => {
                let value: f64 = raw
                    .parse()
                    .map_err(|_| malformed(format!("{element}: capacity `{raw}` is not a number")))?;
                let scale = match data_of(edge, units_key) {
                    Some(prefix) => unit_scale(&prefix)
                        .ok_or_else(|| malformed(format!("{element}: unknown unit `{prefix}`")))?,
                    None => 1.0,
                };
                value * scale * opts.unit_multiplier
            }
            None => opts.default_capacity.ok_or_else(|| ParseError::MissingCapacity {
                element: element.clone(),
                attr: opts.capacity_attr.clone(),
            })?,
        };
        check_link(&element, src, dst, &labels[src], capacity)?;
        let directed = match edge.attribute("directed") {
            Some("true") => true,
            Some("false") => false,
            _ => default_directed,
        };
        links.push((src, dst, capacity));
        if !directed {
            links.push((dst, src, capacity));
        }
    }
    Ok(Topology::new(labels, links))
}

/// A broken topology invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonPositiveCapacity { link: LinkId },
    SelfLoop { link: LinkId },
    DanglingEndpoint { link: LinkId, node: NodeId },
    NoPath { src: String, dst: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveCapacity { link } => write!(f, "non-positive capacity on link {link}"),
            Violation::SelfLoop { link } => write!(f, "self-loop on link {link}"),
            Violation::DanglingEndpoint { link, node } => {
                write!(f, "link {link} references missing node {node}")
            }
            Violation::NoPath { src, dst } => write!(f, "no path {src}→{dst}"),
        }
    }
}

pub fn validate_topology(t: &Topology) -> Vec<Violation> {
    let n = t.node_count();
    let mut out = Vec::new();
    for link in t.links() {
        for node in [link.src, link.dst] {
            if node >= n {
                out.push(Violation::DanglingEndpoint { link: link.id, node });
            }
        }
        if link.src == link.dst {
            out.push(Violation::SelfLoop { link: link.id });
        }
        if !(link.capacity > 0.0) {
            out.push(Violation::NonPositiveCapacity { link: link.id });
        }
    }
    for src in 0..n {
        let seen = t.reachable_from(src);
        for (dst, ok) in seen.iter().enumerate() {
            if !ok {
                out.push(Violation::NoPath {
                    src: t.label(src).to_string(),
                    dst: t.label(dst).to_string(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum HistogramError {
    #[error("topology has no links")]
    Empty,
    #[error("log base must exceed 1, got {0}")]
    Base(f64),
    #[error("link {0} has non-positive capacity")]
    NonPositive(LinkId),
}

/// Buckets `[min·b^k, min·b^(k+1))` covering all link capacities, empty
/// buckets included.
pub fn capacity_histogram(t: &Topology, log_base: f64) -> Result<Vec<(f64, usize)>, HistogramError> {
    if !(log_base > 1.0) {
        return Err(HistogramError::Base(log_base));
    }
    if t.links().is_empty() {
        return Err(HistogramError::Empty);
    }
    if let Some(l) = t.links().iter().find(|l| !(l.capacity > 0.0)) {
        return Err(HistogramError::NonPositive(l.id));
    }
    let min = t.links().iter().map(|l| l.capacity).fold(f64::INFINITY, f64::min);
    let bucket = |c: f64| ((c / min).ln() / log_base.ln() + 1e-9).floor() as usize;
    let top = t.links().iter().map(|l| bucket(l.capacity)).max().unwrap_or(0);
    let mut counts = vec![0usize; top + 1];
    for l in t.links() {
        counts[bucket(l.capacity)] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (min * log_base.powi(k as i32), c))
        .collect())
}

/// Uniform random simple directed graph: `links` distinct ordered pairs drawn
/// without replacement, capacities uniform in `capacity`. No connectivity
/// guarantee.
pub fn random_topology(nodes: usize, links: usize, capacity: (f64, f64), seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = nodes * nodes.saturating_sub(1);
    let links = links.min(pairs);
    let mut chosen: Vec<usize> = sample(&mut rng, pairs, links).into_vec();
    chosen.sort_unstable();
    let triples = chosen
        .into_iter()
        .map(|p| {
            let src = p / (nodes - 1);
            let mut dst = p % (nodes - 1);
            if dst >= src {
                dst += 1;
            }
            let cap = if capacity.1 > capacity.0 {
                rng.gen_range(capacity.0..=capacity.1)
            } else {
                capacity.0
            };
            (src, dst, cap)
        })
        .collect();
    Topology::new((0..nodes).map(|i| format!("n{i}")).collect(), triples)
}

/// The GÉANT 2009 topology from the Internet Topology Zoo, bundled with the crate.
pub const GEANT_GRAPHML: &str = include_str!("../data/Geant2009.graphml");

pub fn geant() -> Topology {
    parse_graphml(GEANT_GRAPHML, &GraphmlOptions::default()).expect("bundled GÉANT parses")
}
