//! JSON network and path files.
//!
//! Network file:
//!
//! ```json
//! { "nodes": [1, 2, 3],
//!   "links": [{ "id": "l1_2", "tail": 1, "head": 2, "length": 1.0, "travel_time": 1 }],
//!   "coords": { "1": [0.0, 0.0] } }
//! ```
//!
//! Path file: an ordered list of `{ "od": [o, d], "links": ["l1_2", ...] }`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Link, LinkId, Network, NetworkError, NodeId, Path, PathTable};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid coordinate key {0:?}")]
    BadCoordKey(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: Vec<NodeId>,
    pub links: Vec<Link>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub coords: BTreeMap<String, [f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub od: [NodeId; 2],
    pub links: Vec<LinkId>,
}

impl NetworkFile {
    pub fn from_network(net: &Network) -> Self {
        NetworkFile {
            nodes: net.nodes().iter().copied().collect(),
            links: net.links().to_vec(),
            coords: net
                .coords()
                .iter()
                .map(|(n, &(x, y))| (n.to_string(), [x, y]))
                .collect(),
        }
    }

    pub fn into_network(self) -> Result<Network, FormatError> {
        let mut coords = BTreeMap::new();
        for (key, [x, y]) in self.coords {
            let node: NodeId = key
                .parse()
                .map_err(|_| FormatError::BadCoordKey(key.clone()))?;
            coords.insert(node, (x, y));
        }
        Ok(Network::with_coords(self.nodes, self.links, coords)?)
    }
}

pub fn parse_network(json: &str) -> Result<Network, FormatError> {
    serde_json::from_str::<NetworkFile>(json)?.into_network()
}

pub fn network_to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&NetworkFile::from_network(net)).expect("network serializes")
}

pub fn parse_paths(json: &str) -> Result<Vec<Path>, FormatError> {
    let entries: Vec<PathEntry> = serde_json::from_str(json)?;
    Ok(entries
        .into_iter()
        .map(|e| Path {
            od: (e.od[0], e.od[1]),
            links: e.links,
        })
        .collect())
}

pub fn parse_path_table(net: &Network, json: &str) -> Result<PathTable, FormatError> {
    Ok(PathTable::new(net, parse_paths(json)?)?)
}

pub fn paths_to_json(paths: &[Path]) -> String {
    let entries: Vec<PathEntry> = paths
        .iter()
        .map(|p| PathEntry {
            od: [p.od.0, p.od.1],
            links: p.links.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("paths serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::fig1;

    #[test]
    fn network_round_trip() {
        let mut coords = BTreeMap::new();
        coords.insert(1, (0.0, 0.0));
        coords.insert(2, (1.0, 0.0));
        coords.insert(3, (1.0, 1.0));
        let net = Network::with_coords([1, 2, 3], fig1().links().to_vec(), coords).unwrap();
        let back = parse_network(&network_to_json(&net)).unwrap();
        assert_eq!(back.links(), net.links());
        assert_eq!(back.coords(), net.coords());
    }

    #[test]
    fn path_file_round_trip() {
        let net = fig1();
        let paths = vec![
            Path::new(1, 3, &["l1_2", "l2_3"]),
            Path::new(1, 3, &["l1_3"]),
        ];
        let pt = parse_path_table(&net, &paths_to_json(&paths)).unwrap();
        assert_eq!(pt.paths(), &paths[..]);
    }

    #[test]
    fn invalid_inputs_surface_errors() {
        assert!(matches!(parse_network("{"), Err(FormatError::Json(_))));
        let bad =
            r#"{"nodes":[1],"links":[{"id":"a","tail":1,"head":1,"length":1,"travel_time":1}]}"#;
        assert!(matches!(
            parse_network(bad),
            Err(FormatError::Network(NetworkError::SelfLoop(_)))
        ));
        let bad_coord = r#"{"nodes":[1],"links":[],"coords":{"x":[0,0]}}"#;
        assert!(matches!(
            parse_network(bad_coord),
            Err(FormatError::BadCoordKey(_))
        ));
        let broken = r#"[{"od":[1,1],"links":["l1_2","l3_1"]}]"#;
        assert!(matches!(
            parse_path_table(&fig1(), broken),
            Err(FormatError::Network(NetworkError::BrokenChain { .. }))
        ));
    }
}
