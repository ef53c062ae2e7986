//! Built-in networks with their path tables.

use crate::network::{enumerate_paths, Link, Network, NodeId, Path, PathFilter, PathTable};

/// A network together with the paths that index its allocation vector.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub network: Network,
    pub paths: PathTable,
}

pub const FIXTURE_NAMES: [&str; 3] = ["fig1", "fig2", "nguyen"];

pub fn fixture(name: &str) -> Option<Fixture> {
    match name {
        "fig1" => Some(fig1()),
        "fig2" => Some(fig2()),
        "nguyen" | "nguyen-dupuis" => Some(nguyen_dupuis()),
        _ => None,
    }
}

fn link(tail: NodeId, head: NodeId) -> Link {
    Link::new(format!("l{tail}_{head}"), tail, head, 1.0, 1)
}

/// Three nodes, four links, seven paths.
pub fn fig1() -> Fixture {
    let network = Network::new(
        [1, 2, 3],
        vec![link(1, 2), link(1, 3), link(2, 3), link(3, 1)],
    )
    .unwrap();
    let paths = vec![
        Path::new(1, 2, &["l1_2"]),
        Path::new(1, 3, &["l1_2", "l2_3"]),
        Path::new(1, 3, &["l1_3"]),
        Path::new(2, 1, &["l2_3", "l3_1"]),
        Path::new(2, 3, &["l2_3"]),
        Path::new(3, 1, &["l3_1"]),
        Path::new(3, 2, &["l3_1", "l1_2"]),
    ];
    let paths = PathTable::new(&network, paths).unwrap();
    Fixture {
        name: "fig1",
        network,
        paths,
    }
}

/// Four nodes, ten links, three OD pairs (3-1, 3-2, 4-2) with fourteen paths.
pub fn fig2() -> Fixture {
    let links = [
        (1, 2),
        (1, 3),
        (2, 1),
        (2, 4),
        (3, 1),
        (3, 2),
        (3, 4),
        (4, 1),
        (4, 2),
        (4, 3),
    ];
    let network = Network::new(
        [1, 2, 3, 4],
        links.iter().map(|&(t, h)| link(t, h)).collect(),
    )
    .unwrap();
    let paths = vec![
        Path::new(3, 1, &["l3_1"]),
        Path::new(3, 1, &["l3_2", "l2_1"]),
        Path::new(3, 1, &["l3_2", "l2_4", "l4_1"]),
        Path::new(3, 1, &["l3_4", "l4_1"]),
        Path::new(3, 1, &["l3_4", "l4_2", "l2_1"]),
        Path::new(3, 2, &["l3_1", "l1_2"]),
        Path::new(3, 2, &["l3_2"]),
        Path::new(3, 2, &["l3_4", "l4_1", "l1_2"]),
        Path::new(3, 2, &["l3_4", "l4_2"]),
        Path::new(4, 2, &["l4_1", "l1_2"]),
        Path::new(4, 2, &["l4_1", "l1_3", "l3_2"]),
        Path::new(4, 2, &["l4_2"]),
        Path::new(4, 2, &["l4_3", "l3_1", "l1_2"]),
        Path::new(4, 2, &["l4_3", "l3_2"]),
    ];
    let paths = PathTable::new(&network, paths).unwrap();
    Fixture {
        name: "fig2",
        network,
        paths,
    }
}

/// Classic one-way links of the Nguyen-Dupuis network.
const ND_FORWARD: [(NodeId, NodeId); 19] = [
    (1, 5),
    (1, 12),
    (4, 5),
    (4, 9),
    (5, 6),
    (5, 9),
    (6, 7),
    (6, 10),
    (7, 8),
    (7, 11),
    (8, 2),
    (9, 10),
    (9, 13),
    (10, 11),
    (11, 2),
    (11, 3),
    (12, 6),
    (12, 8),
    (13, 3),
];

pub const ND_OD_PAIRS: [(NodeId, NodeId); 8] = [
    (1, 2),
    (1, 3),
    (2, 1),
    (2, 4),
    (3, 1),
    (3, 4),
    (4, 2),
    (4, 3),
];

/// Nguyen-Dupuis: 13 nodes, 38 links (each classic link in both directions), 8 OD pairs.
///
/// Paths for the classic pairs (1-2, 1-3, 4-2, 4-3) are all simple paths over
/// the one-way links; the reverse pairs use the reversed links. This gives 50 paths.
pub fn nguyen_dupuis() -> Fixture {
    let mut links: Vec<Link> = ND_FORWARD.iter().map(|&(t, h)| link(t, h)).collect();
    links.extend(ND_FORWARD.iter().map(|&(t, h)| link(h, t)));
    let network = Network::new(1..=13, links).unwrap();
    let forward = network.subnetwork(|l| ND_FORWARD.contains(&(l.tail, l.head)));
    let reverse = network.subnetwork(|l| ND_FORWARD.contains(&(l.head, l.tail)));

    let mut paths = Vec::new();
    for &od in &ND_OD_PAIRS {
        let sub = if [(1, 2), (1, 3), (4, 2), (4, 3)].contains(&od) {
            &forward
        } else {
            &reverse
        };
        let mut found = enumerate_paths(sub, od, &PathFilter::default()).unwrap();
        found.sort_by(|a, b| (a.links.len(), &a.links).cmp(&(b.links.len(), &b.links)));
        paths.extend(found);
    }
    let paths = PathTable::with_od_pairs(&network, ND_OD_PAIRS.to_vec(), paths).unwrap();
    Fixture {
        name: "nguyen",
        network,
        paths,
    }
}
