//! Resolution soundness against the data plane: whatever the controller
//! resolves, sending over the forward identifier reaches every resolved
//! target (extras are false positives and tolerated, misses are not).

mod common;

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use edge_icn::bloom::BloomParams;
use edge_icn::controller::{AnycastStrategy, Controller};
use edge_icn::data_plane::{install_all, simulate_delivery};
use edge_icn::topology::{LinkIdAssignment, NodeName, ALL_NODES};

use common::{oracle_delivery, random_topology_spec};

#[test]
fn resolved_forward_identifiers_reach_every_target() {
    let mut rng = StdRng::seed_from_u64(0x5e50);
    for round in 0..60u64 {
        let spec = random_topology_spec(&mut rng, 8, 6, false);
        let params = BloomParams::new(5, 7_000 + round).unwrap();
        let topo = spec.build(params, LinkIdAssignment::Keyed).unwrap();
        let switches = install_all(&topo);
        let nodes: Vec<NodeName> = topo.node_names().cloned().collect();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());

        // A random group alongside the implicit all-nodes one.
        let members: BTreeSet<NodeName> = nodes
            .iter()
            .filter(|_| rng.gen_bool(0.6))
            .cloned()
            .collect();
        if !members.is_empty() {
            ctrl.register_virtual(&topo, "grp", members).unwrap();
        }

        for requester in &nodes {
            for target in [ALL_NODES, "grp"] {
                let Ok(resolved) = ctrl.resolve(&topo, target, requester) else {
                    continue;
                };
                let outcome = simulate_delivery(
                    &topo,
                    &switches,
                    requester,
                    &resolved.resolution.forward,
                    64,
                );
                let delivered = outcome.delivered_set();
                assert!(
                    delivered.is_superset(&resolved.targets),
                    "round {round}: {requester} -> {target}: missing {:?}",
                    resolved.targets.difference(&delivered).collect::<Vec<_>>()
                );

                // The reverse identifier must carry any member's answer home.
                for member in resolved.targets.iter().filter(|m| *m != requester) {
                    let back = simulate_delivery(
                        &topo,
                        &switches,
                        member,
                        &resolved.resolution.reverse,
                        64,
                    );
                    assert!(
                        back.delivered_set().contains(requester),
                        "round {round}: no reverse path {member} -> {requester}"
                    );
                }
            }

            // Unicast resolutions, both directions.
            for target in &nodes {
                if target == requester {
                    continue;
                }
                let resolved = ctrl.resolve(&topo, &target.0, requester).unwrap();
                let outcome = simulate_delivery(
                    &topo,
                    &switches,
                    requester,
                    &resolved.resolution.forward,
                    64,
                );
                assert!(outcome.delivered_set().contains(target));
            }
        }
    }
}

#[test]
fn merged_reverse_paths_reach_every_pending_subscriber() {
    // Aggregation: the OR of up to 16 subscriber reverse paths delivers a
    // single response to all of them on tree topologies.
    let mut rng = StdRng::seed_from_u64(0xa99);
    for round in 0..150u64 {
        let mut spec = random_topology_spec(&mut rng, 10, 8, true);
        // Widen the subscriber pool beyond the attached nodes if needed.
        let mut extra = 0;
        while spec.nodes.len() < 17 && extra < 12 {
            let sw = spec
                .switches
                .iter()
                .nth(rng.gen_range(0..spec.switches.len()))
                .cloned();
            spec.nodes
                .insert(NodeName(format!("x{extra:02}")), sw.unwrap());
            extra += 1;
        }
        let params = BloomParams::new(5, 40_000 + round).unwrap();
        let topo = spec.build(params, LinkIdAssignment::Keyed).unwrap();
        let switches = install_all(&topo);
        let nodes: Vec<NodeName> = topo.node_names().cloned().collect();

        let provider = nodes[rng.gen_range(0..nodes.len())].clone();
        let n_subs = rng.gen_range(1..=16.min(nodes.len() - 1));
        let subscribers: Vec<NodeName> = nodes
            .iter()
            .filter(|n| **n != provider)
            .take(n_subs)
            .cloned()
            .collect();

        let mut merged = edge_icn::ForwardingId::ZERO;
        for sub in &subscribers {
            let path = topo.shortest_path(&provider, sub).unwrap();
            let fid = edge_icn::encode_path(path.iter().map(|r| topo.link_id(r).unwrap()));
            merged = edge_icn::merge(&merged, &fid);
        }

        let outcome = simulate_delivery(&topo, &switches, &provider, &merged, 64);
        let delivered = outcome.delivered_set();
        for sub in &subscribers {
            assert!(
                delivered.contains(sub),
                "round {round}: {sub} missed the response"
            );
        }

        // Cross-check against the independent oracle as well.
        assert_eq!(delivered, oracle_delivery(&topo, &provider, &merged, 64));
    }
}
