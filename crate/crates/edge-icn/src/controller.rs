//! Name resolution service: maps node, shared (anycast) and group names to
//! forwarding identifiers, using its knowledge of the topology.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::bloom::{encode_path, ForwardingId};
use crate::topology::{NodeName, Topology, ALL_NODES};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ResolveError {
    #[error("requester {0} is not a registered node")]
    UnknownRequester(String),

    #[error("unknown target name {0}")]
    UnknownTarget(String),

    #[error("group {0} has no members")]
    EmptyGroup(String),

    #[error("unknown group label {0}")]
    UnknownLabel(String),

    #[error("no node belongs to all requested groups")]
    EmptyIntersection,

    #[error("member {0} is not a registered node")]
    UnknownMember(String),
}

/// Selection policy when several nodes share one identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnycastStrategy {
    /// Fewest hops from the requester; ties go to the smallest name.
    #[default]
    NearestHopCount,
    /// Rotates through the candidates in name order.
    RoundRobin,
}

impl AnycastStrategy {
    pub fn parse(s: &str) -> Option<AnycastStrategy> {
        match s {
            "nearest-hop-count" => Some(AnycastStrategy::NearestHopCount),
            "round-robin" => Some(AnycastStrategy::RoundRobin),
            _ => None,
        }
    }
}

/// Forward and reverse forwarding identifiers for one resolved target.
/// `reverse` is all-zeros when there is nothing to respond to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub forward: ForwardingId,
    pub reverse: ForwardingId,
}

/// A resolution together with the concrete delivery set it encodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub resolution: Resolution,
    pub targets: BTreeSet<NodeName>,
}

/// The resolution half of the SDN controller. Holds the group registry and
/// anycast state; the topology itself is passed in per call.
#[derive(Debug, Clone)]
pub struct Controller {
    virtuals: BTreeMap<String, BTreeSet<NodeName>>,
    aliases: BTreeMap<String, BTreeSet<NodeName>>,
    strategy: AnycastStrategy,
    round_robin_next: BTreeMap<String, usize>,
    /// Whether a group resolution also delivers to the requesting member,
    /// via the reflection link at its attachment switch.
    deliver_to_requester: bool,
}

impl Controller {
    pub fn new(topo: &Topology, strategy: AnycastStrategy) -> Controller {
        Controller {
            virtuals: topo.vgroups().clone(),
            aliases: topo.aliases().clone(),
            strategy,
            round_robin_next: BTreeMap::new(),
            deliver_to_requester: true,
        }
    }

    pub fn set_deliver_to_requester(&mut self, value: bool) {
        self.deliver_to_requester = value;
    }

    pub fn strategy(&self) -> AnycastStrategy {
        self.strategy
    }

    /// Registers or replaces a group. Replaces the previous member set.
    pub fn register_virtual(
        &mut self,
        topo: &Topology,
        name: &str,
        members: BTreeSet<NodeName>,
    ) -> Result<(), ResolveError> {
        for m in &members {
            if !topo.contains_node(m) {
                return Err(ResolveError::UnknownMember(m.0.clone()));
            }
        }
        self.virtuals.insert(name.to_string(), members);
        Ok(())
    }

    fn group_members(&self, topo: &Topology, name: &str) -> Option<BTreeSet<NodeName>> {
        if name == ALL_NODES {
            return Some(topo.node_names().cloned().collect());
        }
        self.virtuals.get(name).cloned()
    }

    /// Resolves a concrete, shared, or group name into forwarding
    /// identifiers for the requester.
    pub fn resolve(
        &mut self,
        topo: &Topology,
        target: &str,
        requester: &NodeName,
    ) -> Result<Resolved, ResolveError> {
        if !topo.contains_node(requester) {
            return Err(ResolveError::UnknownRequester(requester.0.clone()));
        }
        if let Some(members) = self.group_members(topo, target) {
            if members.is_empty() {
                return Err(ResolveError::EmptyGroup(target.to_string()));
            }
            return Ok(self.resolve_group(topo, &members, requester));
        }
        let target_name = NodeName(target.to_string());
        if topo.contains_node(&target_name) {
            return Ok(self.resolve_unicast(topo, &target_name, requester));
        }
        if let Some(candidates) = self.aliases.get(target).cloned() {
            if candidates.is_empty() {
                return Err(ResolveError::EmptyGroup(target.to_string()));
            }
            let chosen = self.pick_anycast(topo, target, &candidates, requester);
            return Ok(self.resolve_unicast(topo, &chosen, requester));
        }
        Err(ResolveError::UnknownTarget(target.to_string()))
    }

    /// Resolves the intersection of several group labels into a multicast
    /// tree over exactly the nodes that belong to all of them.
    pub fn resolve_context(
        &mut self,
        topo: &Topology,
        labels: &BTreeSet<String>,
        requester: &NodeName,
    ) -> Result<Resolved, ResolveError> {
        if !topo.contains_node(requester) {
            return Err(ResolveError::UnknownRequester(requester.0.clone()));
        }
        let mut intersection: Option<BTreeSet<NodeName>> = None;
        for label in labels {
            let members = self
                .group_members(topo, label)
                .ok_or_else(|| ResolveError::UnknownLabel(label.clone()))?;
            intersection = Some(match intersection {
                None => members,
                Some(acc) => acc.intersection(&members).cloned().collect(),
            });
        }
        let members = intersection.unwrap_or_default();
        if members.is_empty() {
            return Err(ResolveError::EmptyIntersection);
        }
        Ok(self.resolve_group(topo, &members, requester))
    }

    fn pick_anycast(
        &mut self,
        topo: &Topology,
        target: &str,
        candidates: &BTreeSet<NodeName>,
        requester: &NodeName,
    ) -> NodeName {
        match self.strategy {
            AnycastStrategy::NearestHopCount => candidates
                .iter()
                .min_by_key(|c| (topo.node_distance(requester, c).unwrap_or(usize::MAX), *c))
                .cloned()
                .unwrap(),
            AnycastStrategy::RoundRobin => {
                let sorted: Vec<&NodeName> = candidates.iter().collect();
                let slot = self.round_robin_next.entry(target.to_string()).or_insert(0);
                let chosen = sorted[*slot % sorted.len()].clone();
                *slot += 1;
                chosen
            }
        }
    }

    fn resolve_unicast(
        &self,
        topo: &Topology,
        target: &NodeName,
        requester: &NodeName,
    ) -> Resolved {
        let forward = if target == requester {
            self_delivery(topo, requester)
        } else {
            encode_refs(topo, &topo.shortest_path(requester, target).unwrap())
        };
        let reverse = if target == requester {
            self_delivery(topo, requester)
        } else {
            encode_refs(topo, &topo.shortest_path(target, requester).unwrap())
        };
        Resolved {
            resolution: Resolution { forward, reverse },
            targets: BTreeSet::from([target.clone()]),
        }
    }

    /// Shortest-path multicast tree: the union of the per-member shortest
    /// paths. Delivery back to a requesting member uses the reflection link
    /// at its attachment switch. The reverse identifier encodes the union of
    /// the member-to-requester paths so any recipient can respond.
    fn resolve_group(
        &self,
        topo: &Topology,
        members: &BTreeSet<NodeName>,
        requester: &NodeName,
    ) -> Resolved {
        let mut targets: BTreeSet<NodeName> = members.clone();
        if !self.deliver_to_requester {
            targets.remove(requester);
        }

        let mut forward = ForwardingId::ZERO;
        for member in &targets {
            let fid = if member == requester {
                self_delivery(topo, requester)
            } else {
                encode_refs(topo, &topo.shortest_path(requester, member).unwrap())
            };
            forward = crate::bloom::merge(&forward, &fid);
        }

        let mut reverse = ForwardingId::ZERO;
        for member in &targets {
            if member == requester {
                continue;
            }
            let fid = encode_refs(topo, &topo.shortest_path(member, requester).unwrap());
            reverse = crate::bloom::merge(&reverse, &fid);
        }

        Resolved {
            resolution: Resolution { forward, reverse },
            targets,
        }
    }
}

/// Uplink plus downlink of the node: the packet reaches the attachment
/// switch and is reflected back down.
fn self_delivery(topo: &Topology, node: &NodeName) -> ForwardingId {
    let up = topo.uplink(node).unwrap();
    let down = topo.downlink(node).unwrap();
    encode_path([topo.link_id(&up).unwrap(), topo.link_id(&down).unwrap()])
}

fn encode_refs(topo: &Topology, refs: &[crate::topology::LinkRef]) -> ForwardingId {
    encode_path(refs.iter().map(|r| topo.link_id(r).unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::{matches, BloomParams};
    use crate::topology::{LinkIdAssignment, TopologySpec};

    fn star() -> Topology {
        // Symmetric: four nodes, one hop to the hub each.
        let text = "
switch hub
node a hub
node b hub
node c hub
node d hub
";
        TopologySpec::parse(text)
            .unwrap()
            .build(BloomParams::default(), LinkIdAssignment::Keyed)
            .unwrap()
    }

    fn chain() -> Topology {
        // a - s1 - s2 - s3 - b, with x sharing s2.
        let text = "
switch s1
switch s2
switch s3
link s1 s2
link s2 s3
node a s1
node b s3
node x s2
";
        TopologySpec::parse(text)
            .unwrap()
            .build(BloomParams::default(), LinkIdAssignment::Keyed)
            .unwrap()
    }

    fn n(s: &str) -> NodeName {
        NodeName(s.to_string())
    }

    #[test]
    fn forward_and_reverse_are_symmetric() {
        let topo = chain();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        let ab = ctrl.resolve(&topo, "b", &n("a")).unwrap();
        let ba = ctrl.resolve(&topo, "a", &n("b")).unwrap();
        assert_eq!(ab.resolution.forward, ba.resolution.reverse);
        assert_eq!(ab.resolution.reverse, ba.resolution.forward);
    }

    #[test]
    fn unknown_target_is_an_error() {
        let topo = star();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        assert_eq!(
            ctrl.resolve(&topo, "nope", &n("a")),
            Err(ResolveError::UnknownTarget("nope".to_string()))
        );
    }

    #[test]
    fn all_nodes_targets_every_member() {
        let topo = star();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        let r = ctrl.resolve(&topo, ALL_NODES, &n("a")).unwrap();
        let want: BTreeSet<NodeName> = ["a", "b", "c", "d"].iter().map(|s| n(s)).collect();
        assert_eq!(r.targets, want);
        // Every member's downlink is encoded.
        for m in &want {
            let down = topo.downlink(m).unwrap();
            assert!(matches(topo.link_id(&down).unwrap(), &r.resolution.forward));
        }
    }

    #[test]
    fn group_resolve_can_exclude_the_requester() {
        let topo = star();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        ctrl.set_deliver_to_requester(false);
        let r = ctrl.resolve(&topo, ALL_NODES, &n("a")).unwrap();
        assert!(!r.targets.contains(&n("a")));
        let down = topo.downlink(&n("a")).unwrap();
        assert!(!matches(
            topo.link_id(&down).unwrap(),
            &r.resolution.forward
        ));
    }

    #[test]
    fn nearest_hop_anycast_picks_the_closer_candidate() {
        // b is 4 hops from a, x is 3 hops (2 core + 2 vs 1 core + 2).
        let text = "
switch s1
switch s2
switch s3
link s1 s2
link s2 s3
node a s1
node b s3
node x s2
alias shared b
alias shared x
";
        let topo = TopologySpec::parse(text)
            .unwrap()
            .build(BloomParams::default(), LinkIdAssignment::Keyed)
            .unwrap();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::NearestHopCount);
        let r = ctrl.resolve(&topo, "shared", &n("a")).unwrap();
        assert_eq!(r.targets, BTreeSet::from([n("x")]));
    }

    #[test]
    fn round_robin_anycast_rotates() {
        let text = "
switch hub
node a hub
node b hub
node c hub
alias shared b
alias shared c
";
        let topo = TopologySpec::parse(text)
            .unwrap()
            .build(BloomParams::default(), LinkIdAssignment::Keyed)
            .unwrap();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::RoundRobin);
        let first = ctrl.resolve(&topo, "shared", &n("a")).unwrap();
        let second = ctrl.resolve(&topo, "shared", &n("a")).unwrap();
        let third = ctrl.resolve(&topo, "shared", &n("a")).unwrap();
        assert_eq!(first.targets, BTreeSet::from([n("b")]));
        assert_eq!(second.targets, BTreeSet::from([n("c")]));
        assert_eq!(third.targets, BTreeSet::from([n("b")]));
    }

    #[test]
    fn register_virtual_replaces_membership() {
        let topo = star();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        ctrl.register_virtual(&topo, "g", BTreeSet::from([n("b"), n("c")]))
            .unwrap();
        ctrl.register_virtual(&topo, "g", BTreeSet::from([n("d")]))
            .unwrap();
        let r = ctrl.resolve(&topo, "g", &n("a")).unwrap();
        assert_eq!(r.targets, BTreeSet::from([n("d")]));
    }

    #[test]
    fn register_virtual_rejects_unknown_member() {
        let topo = star();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        assert_eq!(
            ctrl.register_virtual(&topo, "g", BTreeSet::from([n("zz")])),
            Err(ResolveError::UnknownMember("zz".to_string()))
        );
    }

    #[test]
    fn context_resolution_intersects_groups() {
        let topo = star();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        ctrl.register_virtual(&topo, "west", BTreeSet::from([n("a"), n("b")]))
            .unwrap();
        ctrl.register_virtual(&topo, "building6", BTreeSet::from([n("b"), n("c")]))
            .unwrap();
        let labels = BTreeSet::from(["west".to_string(), "building6".to_string()]);
        let r = ctrl.resolve_context(&topo, &labels, &n("d")).unwrap();
        assert_eq!(r.targets, BTreeSet::from([n("b")]));
    }

    #[test]
    fn disjoint_groups_yield_empty_intersection_error() {
        let topo = star();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        ctrl.register_virtual(&topo, "g1", BTreeSet::from([n("a")]))
            .unwrap();
        ctrl.register_virtual(&topo, "g2", BTreeSet::from([n("b")]))
            .unwrap();
        let labels = BTreeSet::from(["g1".to_string(), "g2".to_string()]);
        assert_eq!(
            ctrl.resolve_context(&topo, &labels, &n("c")),
            Err(ResolveError::EmptyIntersection)
        );
    }

    #[test]
    fn context_of_all_nodes_matches_plain_resolve() {
        let topo = star();
        let mut ctrl = Controller::new(&topo, AnycastStrategy::default());
        let labels = BTreeSet::from([ALL_NODES.to_string()]);
        let via_context = ctrl.resolve_context(&topo, &labels, &n("a")).unwrap();
        let via_resolve = ctrl.resolve(&topo, ALL_NODES, &n("a")).unwrap();
        assert_eq!(via_context, via_resolve);
    }

    #[test]
    fn group_tree_is_no_larger_than_the_path_sum() {
        let topo = chain();
        let members: Vec<NodeName> = topo.node_names().cloned().collect();
        let requester = n("a");
        let mut union = BTreeSet::new();
        let mut sum = 0usize;
        for m in &members {
            if *m == requester {
                continue;
            }
            let path = topo.shortest_path(&requester, m).unwrap();
            sum += path.len();
            union.extend(path);
        }
        assert!(union.len() <= sum);
    }
}
