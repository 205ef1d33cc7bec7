//! Generator for the idealized evaluation topology: a star whose hub hosts
//! the controller (and rendezvous point), with every edge node at the end
//! of its own l-hop spoke. Node-to-center paths cost l, node-to-node paths
//! 2l, and a group advertisement spanning all N nodes costs 1 + l*N hops.
//!
//! Link identifiers are assigned from disjoint bit blocks so delivery is
//! exact: measured overhead equals the closed-form models precisely.

use crate::bloom::{BloomParams, FILTER_BITS};
use crate::engine::{ActionKind, ContentItem, Mode, RunConfig, ScheduledAction};
use crate::messages::ScopeId;
use crate::node::SelectPolicy;
use crate::topology::{LinkIdAssignment, NodeName, SwitchId, TopologySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConformantSetup {
    pub scopes: u64,
    pub advertisers: u64,
    pub subscribers: u64,
    pub l: u64,
}

pub const CONTENT_ITEM: &str = "item";

fn advertiser_name(i: u64) -> NodeName {
    NodeName(format!("a{i:03}"))
}

fn subscriber_name(i: u64) -> NodeName {
    NodeName(format!("u{i:03}"))
}

fn scope_name(j: u64) -> ScopeId {
    ScopeId(format!("s{j:04}"))
}

/// Builds the star and the workload: every scope advertised once by its
/// owner, then every subscriber requesting one item from every scope.
pub fn conformant_config(setup: &ConformantSetup, mode: Mode) -> RunConfig {
    assert!(setup.l >= 1, "l must be at least 1");
    let hub = SwitchId("hub".to_string());
    let mut spec = TopologySpec::default();
    spec.switches.insert(hub.clone());
    spec.controller = Some(hub.clone());

    let mut names: Vec<NodeName> = (0..setup.advertisers).map(advertiser_name).collect();
    names.extend((0..setup.subscribers).map(subscriber_name));

    for name in &names {
        // Spoke: node - w1 - ... - w(l-1) - hub.
        let mut prev = hub.clone();
        for j in (1..setup.l).rev() {
            let sw = SwitchId(format!("w-{}-{j}", name.0));
            spec.switches.insert(sw.clone());
            spec.core_links.insert((sw.clone(), prev.clone()));
            prev = sw;
        }
        spec.nodes.insert(name.clone(), prev);
    }

    // Disjoint link patterns need directed_links * k <= 256 bits.
    let directed_links = 2 * names.len() as u64 * setup.l;
    let k = match (FILTER_BITS as u64).checked_div(directed_links) {
        None => 5,
        Some(budget) => budget.clamp(1, 5) as u16,
    };

    let mut config = RunConfig::new(spec, mode);
    config.bloom = BloomParams::new(k, 0).unwrap();
    config.assignment = LinkIdAssignment::DisjointBlocks;
    config.l_param = setup.l;
    config.preseed_fids = true;
    config.deliver_to_requester = true;

    for j in 0..setup.scopes {
        let owner = advertiser_name(j % setup.advertisers.max(1));
        config.contents.push(ContentItem {
            node: owner,
            scope: scope_name(j),
            item: CONTENT_ITEM.to_string(),
            bytes: vec![0x42],
            at: None,
        });
    }

    if setup.advertisers > 0 {
        for j in 0..setup.scopes {
            config.actions.push(ScheduledAction {
                at: None,
                kind: ActionKind::Advertise {
                    node: advertiser_name(j % setup.advertisers),
                    scope: scope_name(j),
                    sender: None,
                },
            });
        }
        for u in 0..setup.subscribers {
            for j in 0..setup.scopes {
                config.actions.push(ScheduledAction {
                    at: None,
                    kind: ActionKind::Subscribe {
                        node: subscriber_name(u),
                        scope: scope_name(j),
                        item: CONTENT_ITEM.to_string(),
                        policy: SelectPolicy::FirstAdvertised,
                    },
                });
            }
        }
    }

    config
}
