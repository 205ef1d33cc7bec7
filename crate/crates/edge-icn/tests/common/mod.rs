//! Shared test helpers: random topology generation and an independent
//! brute-force delivery oracle.
#![allow(dead_code)] // each test target uses its own subset

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::Rng;

use edge_icn::bloom::ForwardingId;
use edge_icn::topology::{Endpoint, NodeName, SwitchId, Topology, TopologySpec};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn bundled_scenarios() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .expect("scenario corpus directory")
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            (path.extension()? == "scn").then_some(path)
        })
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no bundled scenarios found");
    files
}

/// Random connected topology: a switch tree, optional extra edges to form
/// cycles, and nodes attached at random switches.
pub fn random_topology_spec(
    rng: &mut StdRng,
    max_switches: usize,
    max_nodes: usize,
    tree_only: bool,
) -> TopologySpec {
    let switch_id = |i: usize| SwitchId(format!("s{i:02}"));
    let n_switches = rng.gen_range(2..=max_switches);
    let mut spec = TopologySpec::default();
    for i in 0..n_switches {
        spec.switches.insert(switch_id(i));
    }
    for i in 1..n_switches {
        let parent = rng.gen_range(0..i);
        spec.core_links.insert((switch_id(parent), switch_id(i)));
    }
    if !tree_only {
        for _ in 0..rng.gen_range(0..=3) {
            let a = rng.gen_range(0..n_switches);
            let b = rng.gen_range(0..n_switches);
            if a != b {
                spec.core_links
                    .insert((switch_id(a.min(b)), switch_id(a.max(b))));
            }
        }
    }
    let n_nodes = rng.gen_range(2..=max_nodes);
    for i in 0..n_nodes {
        let sw = rng.gen_range(0..n_switches);
        spec.nodes
            .insert(NodeName(format!("n{i:02}")), switch_id(sw));
    }
    spec
}

/// Independent traversal oracle: starting from the origin's attachment
/// switch, follow exactly the links whose identifier is a bit-subset of
/// `fid`, spending one hop per switch, and collect the reached nodes.
///
/// States are (switch, remaining budget); a switch already seen with at
/// least this budget cannot contribute anything new.
pub fn oracle_delivery(
    topo: &Topology,
    origin: &NodeName,
    fid: &ForwardingId,
    hop_limit: u32,
) -> BTreeSet<NodeName> {
    let mut delivered = BTreeSet::new();
    let Some(uplink) = topo.uplink(origin) else {
        return delivered;
    };
    let start = match uplink.to {
        Endpoint::Switch(sw) => sw,
        Endpoint::Node(_) => unreachable!(),
    };
    let mut best: BTreeMap<SwitchId, u32> = BTreeMap::new();
    let mut stack = vec![(start, hop_limit)];
    while let Some((sw, budget)) = stack.pop() {
        if budget == 0 {
            continue;
        }
        if matches!(best.get(&sw), Some(&b) if b >= budget) {
            continue;
        }
        best.insert(sw.clone(), budget);
        for link in topo.outgoing_links(&sw) {
            let id = topo.link_id(link).unwrap();
            if !id.bits().subset_of(fid.bits()) {
                continue;
            }
            match &link.to {
                Endpoint::Node(node) => {
                    delivered.insert(node.clone());
                }
                Endpoint::Switch(next) => stack.push((next.clone(), budget - 1)),
            }
        }
    }
    delivered
}
