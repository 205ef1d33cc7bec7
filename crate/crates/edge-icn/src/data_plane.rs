//! Simulated match-action switches.
//!
//! A switch holds one flow rule per outgoing directed link, matching the
//! link's bit pattern against the 256-bit address field with an arbitrary
//! bitmask. Packets of the resolution ether type have no matching rule and
//! are punted to the controller.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::bloom::{matches, ForwardingId, LinkId};
use crate::topology::{Endpoint, LinkRef, NodeName, SwitchId, Topology};

/// Ether type marking packets that carry a destination name and need
/// controller resolution.
pub const ETHER_TYPE_RESOLUTION: u16 = 0x88B5;

/// Ether type marking packets switched on the in-packet Bloom filter.
pub const ETHER_TYPE_BLOOM_ROUTED: u16 = 0x88B6;

pub const DEFAULT_HOP_LIMIT: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtherType {
    Resolution,
    BloomRouted,
}

impl EtherType {
    pub fn value(&self) -> u16 {
        match self {
            EtherType::Resolution => ETHER_TYPE_RESOLUTION,
            EtherType::BloomRouted => ETHER_TYPE_BLOOM_ROUTED,
        }
    }
}

/// Match-action rule: output on `out` when the link's pattern is a subset
/// of the packet's address field.
#[derive(Debug, Clone)]
pub struct FlowRule {
    pub match_bits: LinkId,
    pub out: LinkRef,
}

/// One switch's installed rule table. Immutable after installation.
#[derive(Debug, Clone)]
pub struct Switch {
    pub id: SwitchId,
    pub rules: Vec<FlowRule>,
}

/// Installs one rule per outgoing directed link of `switch`.
pub fn install_rules(topo: &Topology, switch: &SwitchId) -> Switch {
    let rules = topo
        .outgoing_links(switch)
        .iter()
        .map(|r| FlowRule {
            match_bits: topo.link_id(r).unwrap().clone(),
            out: r.clone(),
        })
        .collect();
    Switch {
        id: switch.clone(),
        rules,
    }
}

pub fn install_all(topo: &Topology) -> BTreeMap<SwitchId, Switch> {
    topo.switches()
        .iter()
        .map(|s| (s.clone(), install_rules(topo, s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwitchAction {
    Output(LinkRef),
    PuntToController,
    Drop,
}

/// Header fields a switch looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketHead {
    pub ether_type: EtherType,
    pub address_field: ForwardingId,
    pub hop_limit: u32,
}

/// Forwarding decision for one packet at one switch.
///
/// Resolution packets always punt. Bloom-routed packets go out on every
/// rule whose pattern is contained in the address field, excluding the
/// directed link the packet arrived on; with no matching rule the packet
/// is dropped.
pub fn forward(switch: &Switch, head: &PacketHead, arrival: Option<&LinkRef>) -> Vec<SwitchAction> {
    match head.ether_type {
        EtherType::Resolution => vec![SwitchAction::PuntToController],
        EtherType::BloomRouted => {
            if head.hop_limit == 0 {
                return vec![SwitchAction::Drop];
            }
            let outs: Vec<SwitchAction> = switch
                .rules
                .iter()
                .filter(|rule| Some(&rule.out) != arrival)
                .filter(|rule| matches(&rule.match_bits, &head.address_field))
                .map(|rule| SwitchAction::Output(rule.out.clone()))
                .collect();
            if outs.is_empty() {
                vec![SwitchAction::Drop]
            } else {
                outs
            }
        }
    }
}

/// What happened to one raw Bloom-routed injection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeliveryOutcome {
    /// Copies received per node.
    pub delivered: BTreeMap<NodeName, u32>,
    /// Link traversals, the injecting node's uplink included.
    pub hop_traversals: u64,
    /// Copies dropped at switches (no match, hop limit, or copy budget).
    pub drops: u64,
}

impl DeliveryOutcome {
    pub fn delivered_set(&self) -> BTreeSet<NodeName> {
        self.delivered.keys().cloned().collect()
    }
}

/// Injects one Bloom-routed packet from `origin` and follows it to
/// quiescence. Total copies are capped at `directed links * hop_limit`.
pub fn simulate_delivery(
    topo: &Topology,
    switches: &BTreeMap<SwitchId, Switch>,
    origin: &NodeName,
    fid: &ForwardingId,
    hop_limit: u32,
) -> DeliveryOutcome {
    let mut outcome = DeliveryOutcome::default();
    let copy_budget = topo.links().len() as u64 * hop_limit as u64;
    let mut copies: u64 = 0;

    struct Copy {
        at: Endpoint,
        arrival: LinkRef,
        hop_limit: u32,
    }

    let uplink = match topo.uplink(origin) {
        Some(l) => l,
        None => return outcome,
    };
    let mut queue = VecDeque::new();
    copies += 1;
    outcome.hop_traversals += 1;
    queue.push_back(Copy {
        at: uplink.to.clone(),
        arrival: uplink,
        hop_limit,
    });

    while let Some(copy) = queue.pop_front() {
        match &copy.at {
            Endpoint::Node(n) => {
                *outcome.delivered.entry(n.clone()).or_insert(0) += 1;
            }
            Endpoint::Switch(sw) => {
                let head = PacketHead {
                    ether_type: EtherType::BloomRouted,
                    address_field: *fid,
                    hop_limit: copy.hop_limit,
                };
                for action in forward(&switches[sw], &head, Some(&copy.arrival)) {
                    match action {
                        SwitchAction::Output(link) => {
                            if copies >= copy_budget {
                                outcome.drops += 1;
                                continue;
                            }
                            copies += 1;
                            outcome.hop_traversals += 1;
                            queue.push_back(Copy {
                                at: link.to.clone(),
                                arrival: link,
                                hop_limit: copy.hop_limit - 1,
                            });
                        }
                        SwitchAction::Drop => outcome.drops += 1,
                        SwitchAction::PuntToController => unreachable!(),
                    }
                }
            }
        }
    }
    outcome
}
