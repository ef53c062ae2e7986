//! Traffic networks, path catalogs and link-count measurement systems.
//!
//! A [`Network`] is a directed graph of nodes and links. A [`PathTable`]
//! fixes the ordered catalog of OD pairs and their alternative paths, and with
//! it the column indexing of every matrix built from it. Measurement systems
//! come in two flavours: the static binary incidence matrix and the
//! time-stacked dynamic system in which vehicles are counted on a link some
//! integer number of periods after they depart.

mod decode;
mod enumerate;
mod incidence;
pub mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decode::{decode_allocation, decode_columns, DecodedAllocation, OdFlow};
pub use enumerate::{enumerate_paths, PathFilter};
pub use incidence::{
    build_dynamic_system, build_static_incidence, path_prefix_delay, ColLabel, MeasurementMode,
    MeasurementSystem, RowLabel,
};

pub type NodeId = u32;

/// Opaque link identifier, e.g. `l1_2` for the link from node 1 to node 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub String);

impl LinkId {
    pub fn new(id: impl Into<String>) -> Self {
        LinkId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LinkId {
    fn from(s: &str) -> Self {
        LinkId(s.to_owned())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("link {link} references undeclared node {node}")]
    DanglingEndpoint { link: LinkId, node: NodeId },
    #[error("duplicate link id {0}")]
    DuplicateLinkId(LinkId),
    #[error("link {0} is a self-loop")]
    SelfLoop(LinkId),
    #[error("link {0} has a negative or non-finite length")]
    InvalidLength(LinkId),
    #[error("path {path} is empty")]
    EmptyPath { path: String },
    #[error("path {path}: link {at} does not start where the previous link ends")]
    BrokenChain { path: String, at: usize },
    #[error("path {path} does not run from {origin} to {destination}")]
    WrongEndpoints {
        path: String,
        origin: NodeId,
        destination: NodeId,
    },
    #[error("path {path} visits node {node} twice")]
    RepeatedNode { path: String, node: NodeId },
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no path connects {origin} to {destination}")]
    NoPathExists { origin: NodeId, destination: NodeId },
    #[error("measured link {0} lies on no catalogued path")]
    UselessRow(LinkId),
    #[error("no measured links given")]
    NoMeasurements,
    #[error("no count times given")]
    EmptyWindow,
    #[error("link {link} is not on path {path}")]
    LinkNotOnPath { link: LinkId, path: String },
    #[error("allocation entry {0} is negative")]
    NegativeEntry(usize),
    #[error("allocation has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("path table is empty")]
    EmptyPathTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub tail: NodeId,
    pub head: NodeId,
    /// Length in miles.
    pub length: f64,
    /// Traversal time in whole measurement periods.
    pub travel_time: u32,
}

impl Link {
    pub fn new(
        id: impl Into<String>,
        tail: NodeId,
        head: NodeId,
        length: f64,
        travel_time: u32,
    ) -> Self {
        Link {
            id: LinkId::new(id),
            tail,
            head,
            length,
            travel_time,
        }
    }
}

/// A validated directed network. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Network {
    nodes: BTreeSet<NodeId>,
    links: Vec<Link>,
    coords: BTreeMap<NodeId, (f64, f64)>,
    index: HashMap<LinkId, usize>,
}

impl Network {
    /// Builds a network, checking that endpoints are declared, link ids are
    /// unique, and no link is a self-loop.
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        links: Vec<Link>,
    ) -> Result<Self, NetworkError> {
        Self::with_coords(nodes, links, BTreeMap::new())
    }

    pub fn with_coords(
        nodes: impl IntoIterator<Item = NodeId>,
        links: Vec<Link>,
        coords: BTreeMap<NodeId, (f64, f64)>,
    ) -> Result<Self, NetworkError> {
        let nodes: BTreeSet<NodeId> = nodes.into_iter().collect();
        let mut index = HashMap::with_capacity(links.len());
        for (i, link) in links.iter().enumerate() {
            if link.tail == link.head {
                return Err(NetworkError::SelfLoop(link.id.clone()));
            }
            for node in [link.tail, link.head] {
                if !nodes.contains(&node) {
                    return Err(NetworkError::DanglingEndpoint {
                        link: link.id.clone(),
                        node,
                    });
                }
            }
            if !(link.length >= 0.0 && link.length.is_finite()) {
                return Err(NetworkError::InvalidLength(link.id.clone()));
            }
            if index.insert(link.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateLinkId(link.id.clone()));
            }
        }
        for node in coords.keys() {
            if !nodes.contains(node) {
                return Err(NetworkError::UnknownNode(*node));
            }
        }
        Ok(Network {
            nodes,
            links,
            coords,
            index,
        })
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_ids(&self) -> Vec<LinkId> {
        self.links.iter().map(|l| l.id.clone()).collect()
    }

    pub fn link(&self, id: &LinkId) -> Option<&Link> {
        self.index.get(id).map(|&i| &self.links[i])
    }

    pub fn link_index(&self, id: &LinkId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn coords(&self) -> &BTreeMap<NodeId, (f64, f64)> {
        &self.coords
    }

    pub fn has_coords(&self) -> bool {
        self.nodes.iter().all(|n| self.coords.contains_key(n)) && !self.nodes.is_empty()
    }

    /// Outgoing link indices per node, in link order.
    pub(crate) fn adjacency(&self) -> BTreeMap<NodeId, Vec<usize>> {
        let mut adj: BTreeMap<NodeId, Vec<usize>> =
            self.nodes.iter().map(|&n| (n, Vec::new())).collect();
        for (i, l) in self.links.iter().enumerate() {
            adj.entry(l.tail).or_default().push(i);
        }
        adj
    }

    /// The network restricted to the links accepted by `keep`; all nodes are retained.
    pub fn subnetwork(&self, keep: impl Fn(&Link) -> bool) -> Network {
        let links: Vec<Link> = self.links.iter().filter(|l| keep(l)).cloned().collect();
        let index = links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i))
            .collect();
        Network {
            nodes: self.nodes.clone(),
            links,
            coords: self.coords.clone(),
            index,
        }
    }

    /// Checks contiguity, endpoints and simplicity of `path` against this network.
    pub fn validate_path(&self, path: &Path) -> Result<(), NetworkError> {
        let name = path.to_string();
        let (origin, destination) = path.od;
        for node in [origin, destination] {
            if !self.nodes.contains(&node) {
                return Err(NetworkError::UnknownNode(node));
            }
        }
        if path.links.is_empty() {
            return Err(NetworkError::EmptyPath { path: name });
        }
        let mut resolved = Vec::with_capacity(path.links.len());
        for id in &path.links {
            resolved.push(
                self.link(id)
                    .ok_or_else(|| NetworkError::UnknownLink(id.clone()))?,
            );
        }
        for (t, pair) in resolved.windows(2).enumerate() {
            if pair[0].head != pair[1].tail {
                return Err(NetworkError::BrokenChain {
                    path: name,
                    at: t + 1,
                });
            }
        }
        if resolved[0].tail != origin || resolved[resolved.len() - 1].head != destination {
            return Err(NetworkError::WrongEndpoints {
                path: name,
                origin,
                destination,
            });
        }
        let mut seen = BTreeSet::new();
        seen.insert(origin);
        for link in &resolved {
            if !seen.insert(link.head) {
                return Err(NetworkError::RepeatedNode {
                    path: name,
                    node: link.head,
                });
            }
        }
        Ok(())
    }

    /// Sum of link lengths along `path`.
    pub fn path_length(&self, path: &Path) -> Result<f64, NetworkError> {
        path.links.iter().try_fold(0.0, |acc, id| {
            self.link(id)
                .map(|l| acc + l.length)
                .ok_or_else(|| NetworkError::UnknownLink(id.clone()))
        })
    }
}

/// A route for one OD pair as an ordered sequence of links.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub od: (NodeId, NodeId),
    pub links: Vec<LinkId>,
}

impl Path {
    pub fn new(origin: NodeId, destination: NodeId, links: &[&str]) -> Self {
        Path {
            od: (origin, destination),
            links: links.iter().map(|&s| LinkId::from(s)).collect(),
        }
    }

    pub fn contains(&self, link: &LinkId) -> bool {
        self.links.contains(link)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.links.iter().map(LinkId::as_str).collect();
        write!(f, "{}->{}:[{}]", self.od.0, self.od.1, ids.join(","))
    }
}

/// Ordered catalog of OD pairs and their paths.
///
/// Path `n` is column `n` of every static matrix built from the table. The
/// order given at construction is kept as-is; [`PathTable::canonicalize`]
/// reorders into canonical form (OD index, link count, link-id sequence).
#[derive(Clone, Debug, PartialEq)]
pub struct PathTable {
    od_pairs: Vec<(NodeId, NodeId)>,
    paths: Vec<Path>,
    od_of_path: Vec<usize>,
}

impl PathTable {
    /// Validates every path against `net`. OD pairs are indexed in order of first appearance.
    pub fn new(net: &Network, paths: Vec<Path>) -> Result<Self, NetworkError> {
        let mut od_pairs = Vec::new();
        for p in &paths {
            if !od_pairs.contains(&p.od) {
                od_pairs.push(p.od);
            }
        }
        Self::with_od_pairs(net, od_pairs, paths)
    }

    /// Like [`PathTable::new`] but with an explicit OD ordering. Every listed pair
    /// must own at least one path and every path's OD must be listed.
    pub fn with_od_pairs(
        net: &Network,
        od_pairs: Vec<(NodeId, NodeId)>,
        paths: Vec<Path>,
    ) -> Result<Self, NetworkError> {
        if paths.is_empty() {
            return Err(NetworkError::EmptyPathTable);
        }
        let mut od_of_path = Vec::with_capacity(paths.len());
        for p in &paths {
            net.validate_path(p)?;
            let k =
                od_pairs
                    .iter()
                    .position(|od| *od == p.od)
                    .ok_or(NetworkError::NoPathExists {
                        origin: p.od.0,
                        destination: p.od.1,
                    })?;
            od_of_path.push(k);
        }
        for (k, &(origin, destination)) in od_pairs.iter().enumerate() {
            if !od_of_path.contains(&k) {
                return Err(NetworkError::NoPathExists {
                    origin,
                    destination,
                });
            }
        }
        Ok(PathTable {
            od_pairs,
            paths,
            od_of_path,
        })
    }

    pub fn od_pairs(&self) -> &[(NodeId, NodeId)] {
        &self.od_pairs
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn od_of_path(&self, n: usize) -> usize {
        self.od_of_path[n]
    }

    /// Number of OD pairs, K.
    pub fn num_od(&self) -> usize {
        self.od_pairs.len()
    }

    /// Number of paths, N.
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Path indices belonging to OD pair `k`, ascending.
    pub fn paths_of_od(&self, k: usize) -> Vec<usize> {
        (0..self.paths.len())
            .filter(|&n| self.od_of_path[n] == k)
            .collect()
    }

    /// Per-path lengths (the `v` vector of the VMT programs).
    pub fn path_lengths(&self, net: &Network) -> Result<Vec<f64>, NetworkError> {
        self.paths.iter().map(|p| net.path_length(p)).collect()
    }

    /// Reorders paths canonically; OD order is unchanged.
    pub fn canonicalize(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.paths.len()).collect();
        order.sort_by(|&a, &b| {
            canonical_key(self.od_of_path[a], &self.paths[a])
                .cmp(&canonical_key(self.od_of_path[b], &self.paths[b]))
        });
        self.paths = order.iter().map(|&i| self.paths[i].clone()).collect();
        self.od_of_path = order.iter().map(|&i| self.od_of_path[i]).collect();
        self
    }
}

pub(crate) fn canonical_key(od_index: usize, p: &Path) -> (usize, usize, &[LinkId]) {
    (od_index, p.links.len(), &p.links)
}
