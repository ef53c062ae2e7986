use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use super::{Network, NetworkError, NodeId, Path};

/// Plausibility bounds for [`enumerate_paths`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathFilter {
    pub max_links: usize,
    /// Maximum heading changes at interior nodes. Ignored (with a warning)
    /// when the network has no node coordinates.
    pub max_turns: Option<usize>,
    /// Maximum path length relative to the shortest path length.
    pub max_length_ratio: Option<f64>,
}

impl Default for PathFilter {
    fn default() -> Self {
        PathFilter {
            max_links: usize::MAX,
            max_turns: None,
            max_length_ratio: None,
        }
    }
}

/// All simple paths from `od.0` to `od.1` that satisfy `filter`, sorted by
/// link count and then link-id sequence.
///
/// An empty result means the pair is connected but every path was filtered
/// out; a disconnected pair is [`NetworkError::NoPathExists`].
pub fn enumerate_paths(
    net: &Network,
    od: (NodeId, NodeId),
    filter: &PathFilter,
) -> Result<Vec<Path>, NetworkError> {
    let (origin, destination) = od;
    for node in [origin, destination] {
        if !net.nodes().contains(&node) {
            return Err(NetworkError::UnknownNode(node));
        }
    }
    let adj = net.adjacency();
    if origin == destination || !reachable(net, &adj, origin, destination) {
        return Err(NetworkError::NoPathExists {
            origin,
            destination,
        });
    }

    let use_turns = match filter.max_turns {
        Some(_) if !net.has_coords() => {
            log::warn!("max_turns ignored: network has no node coordinates");
            false
        }
        Some(_) => true,
        None => false,
    };
    let length_cap = filter
        .max_length_ratio
        .map(|r| shortest_length(net, &adj, origin, destination) * r * (1.0 + 1e-12));

    let mut search = Search {
        net,
        adj: &adj,
        destination,
        filter,
        use_turns,
        length_cap,
        visited: vec![origin],
        stack: Vec::new(),
        found: Vec::new(),
    };
    search.extend(origin, 0.0, 0);

    let mut paths: Vec<Path> = search
        .found
        .into_iter()
        .map(|links| Path {
            od,
            links: links
                .into_iter()
                .map(|i| net.links()[i].id.clone())
                .collect(),
        })
        .collect();
    paths.sort_by(|a, b| (a.links.len(), &a.links).cmp(&(b.links.len(), &b.links)));
    Ok(paths)
}

struct Search<'a> {
    net: &'a Network,
    adj: &'a BTreeMap<NodeId, Vec<usize>>,
    destination: NodeId,
    filter: &'a PathFilter,
    use_turns: bool,
    length_cap: Option<f64>,
    visited: Vec<NodeId>,
    stack: Vec<usize>,
    found: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn extend(&mut self, node: NodeId, length: f64, turns: usize) {
        if node == self.destination {
            self.found.push(self.stack.clone());
            return;
        }
        if self.stack.len() >= self.filter.max_links {
            return;
        }
        for &li in &self.adj[&node] {
            let link = &self.net.links()[li];
            if self.visited.contains(&link.head) {
                continue;
            }
            let new_length = length + link.length;
            if self.length_cap.is_some_and(|cap| new_length > cap) {
                continue;
            }
            let mut new_turns = turns;
            if self.use_turns {
                if let Some(&prev) = self.stack.last() {
                    if self.is_turn(prev, li) {
                        new_turns += 1;
                    }
                }
                if new_turns > self.filter.max_turns.unwrap_or(usize::MAX) {
                    continue;
                }
            }
            self.visited.push(link.head);
            self.stack.push(li);
            self.extend(link.head, new_length, new_turns);
            self.stack.pop();
            self.visited.pop();
        }
    }

    fn is_turn(&self, from: usize, to: usize) -> bool {
        let h1 = heading(self.net, from);
        let h2 = heading(self.net, to);
        let mut diff = (h1 - h2).abs() % std::f64::consts::TAU;
        if diff > std::f64::consts::PI {
            diff = std::f64::consts::TAU - diff;
        }
        diff > 1e-9
    }
}

fn heading(net: &Network, link: usize) -> f64 {
    let l = &net.links()[link];
    let (x0, y0) = net.coords()[&l.tail];
    let (x1, y1) = net.coords()[&l.head];
    (y1 - y0).atan2(x1 - x0)
}

fn reachable(net: &Network, adj: &BTreeMap<NodeId, Vec<usize>>, from: NodeId, to: NodeId) -> bool {
    let mut seen = vec![from];
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        if n == to {
            return true;
        }
        for &li in &adj[&n] {
            let h = net.links()[li].head;
            if !seen.contains(&h) {
                seen.push(h);
                queue.push_back(h);
            }
        }
    }
    false
}

#[derive(PartialEq)]
struct Frontier(f64, NodeId);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over link lengths.
fn shortest_length(
    net: &Network,
    adj: &BTreeMap<NodeId, Vec<usize>>,
    from: NodeId,
    to: NodeId,
) -> f64 {
    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut heap = BinaryHeap::from([Frontier(0.0, from)]);
    dist.insert(from, 0.0);
    while let Some(Frontier(d, n)) = heap.pop() {
        if n == to {
            return d;
        }
        if d > dist[&n] {
            continue;
        }
        for &li in &adj[&n] {
            let link = &net.links()[li];
            let nd = d + link.length;
            if dist.get(&link.head).is_none_or(|&old| nd < old) {
                dist.insert(link.head, nd);
                heap.push(Frontier(nd, link.head));
            }
        }
    }
    f64::INFINITY
}

/// Ids of `paths` as plain strings, for compact comparisons in tests.
#[cfg(test)]
fn ids(paths: &[Path]) -> Vec<Vec<&str>> {
    paths
        .iter()
        .map(|p| p.links.iter().map(super::LinkId::as_str).collect())
        .collect()
}
