//! Network model: switches, edge nodes, directed links and their
//! identifiers, plus the line-oriented topology spec format.
//!
//! Every physical link is represented as two directed links with distinct
//! identifiers, so forward and reverse paths have distinct encodings.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::bloom::{new_link_id, Bits256, BloomParams, LinkId};

pub const MAX_NODE_NAME_BYTES: usize = 1024;

/// Reserved group name resolving to every registered edge node.
pub const ALL_NODES: &str = "all.nodes";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwitchId(pub String);

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeName(pub String);

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Switch(SwitchId),
    Node(NodeName),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Switch(s) => write!(f, "{s}"),
            Endpoint::Node(n) => write!(f, "{n}"),
        }
    }
}

/// One directed link.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkRef {
    pub from: Endpoint,
    pub to: Endpoint,
}

impl LinkRef {
    pub fn new(from: Endpoint, to: Endpoint) -> LinkRef {
        LinkRef { from, to }
    }

    /// Key string feeding the link identifier generator.
    pub fn key(&self) -> String {
        format!("{}>{}", self.from, self.to)
    }
}

impl fmt::Display for LinkRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("duplicate switch id {0}")]
    DuplicateSwitch(String),

    #[error("duplicate node name {0}")]
    DuplicateNode(String),

    #[error("node {node} attaches to unknown switch {switch}")]
    DanglingAttachment { node: String, switch: String },

    #[error("link references unknown switch {0}")]
    UnknownLinkEndpoint(String),

    #[error("link endpoints must differ, got {0} twice")]
    SelfLink(String),

    #[error("disconnected: switch {0} is unreachable")]
    Disconnected(String),

    #[error("node name must be 1..={MAX_NODE_NAME_BYTES} bytes")]
    BadNodeName,

    #[error("group {group} member {member} is not a registered node")]
    UnknownMember { group: String, member: String },

    #[error("name {0} is already taken")]
    AmbiguousName(String),

    #[error("the {ALL_NODES} group is implicit and cannot be redefined")]
    ReservedGroupName,

    #[error("links {0} and {1} were assigned identical bit patterns")]
    DuplicateLinkPattern(String, String),

    #[error("controller attachment switch {0} is unknown")]
    UnknownControllerSwitch(String),

    #[error("{0} directed links exceed the collision-free identifier space")]
    LinkSpaceExhausted(usize),

    #[error("bad link identifier parameters: {0}")]
    Bloom(#[from] crate::bloom::BloomError),
}

/// How directed links receive their bit patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkIdAssignment {
    /// Keyed pseudorandom positions; false positives possible and counted.
    #[default]
    Keyed,
    /// Sequential disjoint bit blocks; no false positives ever. Requires
    /// `directed links * k <= 256`.
    DisjointBlocks,
}

/// Parsed topology description, prior to identifier assignment.
#[derive(Debug, Clone, Default)]
pub struct TopologySpec {
    pub switches: BTreeSet<SwitchId>,
    pub core_links: BTreeSet<(SwitchId, SwitchId)>,
    pub nodes: BTreeMap<NodeName, SwitchId>,
    pub vgroups: BTreeMap<String, BTreeSet<NodeName>>,
    pub aliases: BTreeMap<String, BTreeSet<NodeName>>,
    pub controller: Option<SwitchId>,
}

impl TopologySpec {
    /// Parses the line-oriented topology format. Stanzas: `switch <id>`,
    /// `link <sw> <sw>`, `node <name> <sw>`, `vgroup <name> <m1,m2,...>`,
    /// `alias <name> <node>`, `controller <sw>`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<TopologySpec, ParseError> {
        let mut spec = TopologySpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match spec.apply_stanza(&tokens) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(ParseError {
                        line: line_no,
                        message: format!("unknown stanza `{}`", tokens[0]),
                    })
                }
                Err(message) => {
                    return Err(ParseError {
                        line: line_no,
                        message,
                    })
                }
            }
        }
        Ok(spec)
    }

    /// Applies one tokenized stanza if it is a topology stanza. Returns
    /// `Ok(false)` when the keyword belongs to some other format layer.
    pub fn apply_stanza(&mut self, tokens: &[&str]) -> Result<bool, String> {
        match tokens[0] {
            "switch" => {
                let id = expect_args(tokens, 1)?;
                let sw = SwitchId(id[0].to_string());
                if !self.switches.insert(sw.clone()) {
                    return Err(format!("duplicate switch id {sw}"));
                }
                Ok(true)
            }
            "link" => {
                let args = expect_args(tokens, 2)?;
                let a = SwitchId(args[0].to_string());
                let b = SwitchId(args[1].to_string());
                if a == b {
                    return Err(format!("link endpoints must differ, got {a} twice"));
                }
                for sw in [&a, &b] {
                    if !self.switches.contains(sw) {
                        return Err(format!("link references unknown switch {sw}"));
                    }
                }
                self.core_links.insert((a, b));
                Ok(true)
            }
            "node" => {
                let args = expect_args(tokens, 2)?;
                let name = NodeName(args[0].to_string());
                if name.0.is_empty() || name.0.len() > MAX_NODE_NAME_BYTES {
                    return Err("node name must be 1..=1024 bytes".to_string());
                }
                let sw = SwitchId(args[1].to_string());
                if !self.switches.contains(&sw) {
                    return Err(format!("node {name} attaches to unknown switch {sw}"));
                }
                if self.nodes.insert(name.clone(), sw).is_some() {
                    return Err(format!("duplicate node name {name}"));
                }
                Ok(true)
            }
            "vgroup" | "context-group" => {
                let args = expect_args(tokens, 2)?;
                let name = args[0].to_string();
                if name == ALL_NODES {
                    return Err(format!("the {ALL_NODES} group is implicit"));
                }
                let members = parse_member_list(args[1], &self.nodes)?;
                self.vgroups.insert(name, members);
                Ok(true)
            }
            "alias" => {
                let args = expect_args(tokens, 2)?;
                let name = args[0].to_string();
                let node = NodeName(args[1].to_string());
                if !self.nodes.contains_key(&node) {
                    return Err(format!("alias member {node} is not a registered node"));
                }
                self.aliases.entry(name).or_default().insert(node);
                Ok(true)
            }
            "controller" => {
                let args = expect_args(tokens, 1)?;
                let sw = SwitchId(args[0].to_string());
                if !self.switches.contains(&sw) {
                    return Err(format!("controller attachment switch {sw} is unknown"));
                }
                self.controller = Some(sw);
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    /// Assigns link identifiers and validates connectivity.
    pub fn build(
        &self,
        params: BloomParams,
        assignment: LinkIdAssignment,
    ) -> Result<Topology, TopologyError> {
        Topology::build(self, params, assignment)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn expect_args<'a>(tokens: &'a [&'a str], n: usize) -> Result<&'a [&'a str], String> {
    if tokens.len() != n + 1 {
        return Err(format!("`{}` takes {} argument(s)", tokens[0], n));
    }
    Ok(&tokens[1..])
}

fn parse_member_list(
    list: &str,
    nodes: &BTreeMap<NodeName, SwitchId>,
) -> Result<BTreeSet<NodeName>, String> {
    let mut members = BTreeSet::new();
    for part in list.split(',') {
        let name = NodeName(part.trim().to_string());
        if name.0.is_empty() {
            return Err("empty member name".to_string());
        }
        if !nodes.contains_key(&name) {
            return Err(format!("group member {name} is not a registered node"));
        }
        members.insert(name);
    }
    Ok(members)
}

/// Built network: validated graph with one identifier per directed link.
#[derive(Debug, Clone)]
pub struct Topology {
    switches: BTreeSet<SwitchId>,
    nodes: BTreeMap<NodeName, SwitchId>,
    links: BTreeMap<LinkRef, LinkId>,
    switch_neighbors: BTreeMap<SwitchId, BTreeSet<SwitchId>>,
    outgoing: BTreeMap<SwitchId, Vec<LinkRef>>,
    vgroups: BTreeMap<String, BTreeSet<NodeName>>,
    aliases: BTreeMap<String, BTreeSet<NodeName>>,
    controller_at: Option<SwitchId>,
    params: BloomParams,
}

impl Topology {
    fn build(
        spec: &TopologySpec,
        params: BloomParams,
        assignment: LinkIdAssignment,
    ) -> Result<Topology, TopologyError> {
        for (name, sw) in &spec.nodes {
            if name.0.is_empty() || name.0.len() > MAX_NODE_NAME_BYTES {
                return Err(TopologyError::BadNodeName);
            }
            if !spec.switches.contains(sw) {
                return Err(TopologyError::DanglingAttachment {
                    node: name.0.clone(),
                    switch: sw.0.clone(),
                });
            }
        }

        // Group and alias names must not shadow node names.
        for name in spec.vgroups.keys().chain(spec.aliases.keys()) {
            if spec.nodes.contains_key(&NodeName(name.clone())) {
                return Err(TopologyError::AmbiguousName(name.clone()));
            }
        }
        if spec.vgroups.contains_key(ALL_NODES) {
            return Err(TopologyError::ReservedGroupName);
        }
        for (group, members) in spec.vgroups.iter().chain(spec.aliases.iter()) {
            for member in members {
                if !spec.nodes.contains_key(member) {
                    return Err(TopologyError::UnknownMember {
                        group: group.clone(),
                        member: member.0.clone(),
                    });
                }
            }
        }

        let mut switch_neighbors: BTreeMap<SwitchId, BTreeSet<SwitchId>> = spec
            .switches
            .iter()
            .map(|s| (s.clone(), BTreeSet::new()))
            .collect();
        for (a, b) in &spec.core_links {
            for sw in [a, b] {
                if !spec.switches.contains(sw) {
                    return Err(TopologyError::UnknownLinkEndpoint(sw.0.clone()));
                }
            }
            if a == b {
                return Err(TopologyError::SelfLink(a.0.clone()));
            }
            switch_neighbors.get_mut(a).unwrap().insert(b.clone());
            switch_neighbors.get_mut(b).unwrap().insert(a.clone());
        }

        // Connectivity over the switch graph; empty and single-switch
        // topologies are trivially connected.
        if let Some(start) = spec.switches.iter().next().cloned() {
            let mut seen = BTreeSet::from([start.clone()]);
            let mut queue = VecDeque::from([start]);
            while let Some(sw) = queue.pop_front() {
                for next in &switch_neighbors[&sw] {
                    if seen.insert(next.clone()) {
                        queue.push_back(next.clone());
                    }
                }
            }
            if let Some(missing) = spec.switches.iter().find(|s| !seen.contains(*s)) {
                return Err(TopologyError::Disconnected(missing.0.clone()));
            }
        }

        // Every physical link yields two directed links; attachments too.
        let mut refs: Vec<LinkRef> = Vec::new();
        for (a, b) in &spec.core_links {
            refs.push(LinkRef::new(
                Endpoint::Switch(a.clone()),
                Endpoint::Switch(b.clone()),
            ));
            refs.push(LinkRef::new(
                Endpoint::Switch(b.clone()),
                Endpoint::Switch(a.clone()),
            ));
        }
        for (name, sw) in &spec.nodes {
            refs.push(LinkRef::new(
                Endpoint::Node(name.clone()),
                Endpoint::Switch(sw.clone()),
            ));
            refs.push(LinkRef::new(
                Endpoint::Switch(sw.clone()),
                Endpoint::Node(name.clone()),
            ));
        }
        refs.sort();
        refs.dedup();

        let mut links: BTreeMap<LinkRef, LinkId> = BTreeMap::new();
        match assignment {
            LinkIdAssignment::Keyed => {
                for r in &refs {
                    links.insert(r.clone(), new_link_id(&r.key(), &params)?);
                }
            }
            LinkIdAssignment::DisjointBlocks => {
                let k = params.hashes_per_link;
                if refs.len() * k as usize > crate::bloom::FILTER_BITS as usize {
                    return Err(TopologyError::LinkSpaceExhausted(refs.len()));
                }
                for (i, r) in refs.iter().enumerate() {
                    let base = i as u16 * k;
                    let positions: Vec<u16> = (base..base + k).collect();
                    links.insert(r.clone(), LinkId::from_positions(&positions));
                }
            }
        }

        let mut by_pattern: BTreeMap<Bits256, &LinkRef> = BTreeMap::new();
        for (r, id) in &links {
            if let Some(other) = by_pattern.insert(*id.bits(), r) {
                return Err(TopologyError::DuplicateLinkPattern(
                    other.to_string(),
                    r.to_string(),
                ));
            }
        }

        let mut outgoing: BTreeMap<SwitchId, Vec<LinkRef>> = spec
            .switches
            .iter()
            .map(|s| (s.clone(), Vec::new()))
            .collect();
        for r in links.keys() {
            if let Endpoint::Switch(sw) = &r.from {
                outgoing.get_mut(sw).unwrap().push(r.clone());
            }
        }

        let controller_at = match &spec.controller {
            Some(sw) => {
                if !spec.switches.contains(sw) {
                    return Err(TopologyError::UnknownControllerSwitch(sw.0.clone()));
                }
                Some(sw.clone())
            }
            None => spec.switches.iter().next().cloned(),
        };

        Ok(Topology {
            switches: spec.switches.clone(),
            nodes: spec.nodes.clone(),
            links,
            switch_neighbors,
            outgoing,
            vgroups: spec.vgroups.clone(),
            aliases: spec.aliases.clone(),
            controller_at,
            params,
        })
    }

    pub fn params(&self) -> &BloomParams {
        &self.params
    }

    pub fn switches(&self) -> &BTreeSet<SwitchId> {
        &self.switches
    }

    pub fn nodes(&self) -> &BTreeMap<NodeName, SwitchId> {
        &self.nodes
    }

    pub fn node_names(&self) -> impl Iterator<Item = &NodeName> {
        self.nodes.keys()
    }

    pub fn contains_node(&self, name: &NodeName) -> bool {
        self.nodes.contains_key(name)
    }

    pub fn attachment_switch(&self, name: &NodeName) -> Option<&SwitchId> {
        self.nodes.get(name)
    }

    pub fn vgroups(&self) -> &BTreeMap<String, BTreeSet<NodeName>> {
        &self.vgroups
    }

    pub fn aliases(&self) -> &BTreeMap<String, BTreeSet<NodeName>> {
        &self.aliases
    }

    /// The controller's attachment switch; the smallest switch id unless
    /// the spec names one. `None` only for an empty topology.
    pub fn controller_at(&self) -> Option<&SwitchId> {
        self.controller_at.as_ref()
    }

    pub fn links(&self) -> &BTreeMap<LinkRef, LinkId> {
        &self.links
    }

    pub fn link_id(&self, link: &LinkRef) -> Option<&LinkId> {
        self.links.get(link)
    }

    /// Directed links leaving `switch`, in deterministic order.
    pub fn outgoing_links(&self, switch: &SwitchId) -> &[LinkRef] {
        self.outgoing.get(switch).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The node's uplink (node to switch).
    pub fn uplink(&self, name: &NodeName) -> Option<LinkRef> {
        let sw = self.nodes.get(name)?;
        Some(LinkRef::new(
            Endpoint::Node(name.clone()),
            Endpoint::Switch(sw.clone()),
        ))
    }

    /// The node's downlink (switch to node).
    pub fn downlink(&self, name: &NodeName) -> Option<LinkRef> {
        let sw = self.nodes.get(name)?;
        Some(LinkRef::new(
            Endpoint::Switch(sw.clone()),
            Endpoint::Node(name.clone()),
        ))
    }

    /// Minimal-hop switch sequence from `a` to `b`, inclusive; ties broken
    /// by the lexicographically smallest switch id sequence.
    pub fn switch_path(&self, a: &SwitchId, b: &SwitchId) -> Option<Vec<SwitchId>> {
        if !self.switches.contains(a) || !self.switches.contains(b) {
            return None;
        }
        if a == b {
            return Some(vec![a.clone()]);
        }
        let mut paths: BTreeMap<SwitchId, Vec<SwitchId>> =
            BTreeMap::from([(a.clone(), vec![a.clone()])]);
        let mut frontier = vec![a.clone()];
        while !frontier.is_empty() {
            let mut next: BTreeMap<SwitchId, Vec<SwitchId>> = BTreeMap::new();
            for sw in &frontier {
                let base = paths[sw].clone();
                for neigh in &self.switch_neighbors[sw] {
                    if paths.contains_key(neigh) {
                        continue;
                    }
                    let mut candidate = base.clone();
                    candidate.push(neigh.clone());
                    match next.get(neigh) {
                        Some(existing) if *existing <= candidate => {}
                        _ => {
                            next.insert(neigh.clone(), candidate);
                        }
                    }
                }
            }
            if let Some(path) = next.get(b) {
                return Some(path.clone());
            }
            frontier = next.keys().cloned().collect();
            paths.extend(next);
        }
        None
    }

    /// Hop count between two switches (0 when equal).
    pub fn switch_distance(&self, a: &SwitchId, b: &SwitchId) -> Option<usize> {
        self.switch_path(a, b).map(|p| p.len() - 1)
    }

    /// Minimal-hop directed link sequence between two nodes, inclusive of
    /// both attachment links. `from == to` yields the empty path.
    pub fn shortest_path(&self, from: &NodeName, to: &NodeName) -> Option<Vec<LinkRef>> {
        let from_sw = self.nodes.get(from)?;
        let to_sw = self.nodes.get(to)?;
        if from == to {
            return Some(Vec::new());
        }
        let spine = self.switch_path(from_sw, to_sw)?;
        let mut path = Vec::with_capacity(spine.len() + 1);
        path.push(self.uplink(from).unwrap());
        for pair in spine.windows(2) {
            path.push(LinkRef::new(
                Endpoint::Switch(pair[0].clone()),
                Endpoint::Switch(pair[1].clone()),
            ));
        }
        path.push(self.downlink(to).unwrap());
        Some(path)
    }

    /// Hop distance between two nodes, attachment links included.
    pub fn node_distance(&self, from: &NodeName, to: &NodeName) -> Option<usize> {
        self.shortest_path(from, to).map(|p| p.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build_text(text: &str) -> Topology {
        TopologySpec::parse(text)
            .unwrap()
            .build(BloomParams::default(), LinkIdAssignment::Keyed)
            .unwrap()
    }

    const TWO_SWITCH: &str = "
switch s1
switch s2
link s1 s2
node n1 s1
node n2 s2
";

    #[test]
    fn two_switch_link_counts() {
        let topo = build_text(TWO_SWITCH);
        // 2 directed core links plus 4 directed attachment links.
        assert_eq!(topo.links().len(), 6);
        let core = topo
            .links()
            .keys()
            .filter(|r| matches!((&r.from, &r.to), (Endpoint::Switch(_), Endpoint::Switch(_))))
            .count();
        assert_eq!(core, 2);
    }

    #[test]
    fn isolated_switch_is_rejected() {
        let spec = TopologySpec::parse("switch s1\nswitch s2\nswitch s3\nlink s1 s2\n").unwrap();
        let err = spec
            .build(BloomParams::default(), LinkIdAssignment::Keyed)
            .unwrap_err();
        assert_eq!(err, TopologyError::Disconnected("s3".to_string()));
    }

    #[test]
    fn duplicate_node_is_rejected_at_parse() {
        let err = TopologySpec::parse("switch s1\nnode a s1\nnode a s1\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("duplicate node name"));
    }

    #[test]
    fn same_switch_nodes_use_two_attachment_links() {
        let topo = build_text("switch s1\nnode a s1\nnode b s1\n");
        let path = topo
            .shortest_path(&NodeName("a".into()), &NodeName("b".into()))
            .unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path[0], topo.uplink(&NodeName("a".into())).unwrap());
        assert_eq!(path[1], topo.downlink(&NodeName("b".into())).unwrap());
    }

    #[test]
    fn path_to_self_is_empty() {
        let topo = build_text(TWO_SWITCH);
        let n1 = NodeName("n1".into());
        assert_eq!(topo.shortest_path(&n1, &n1).unwrap(), Vec::<LinkRef>::new());
    }

    #[test]
    fn ring_distances_match_breadth_first_oracle() {
        // 4-switch ring with one node per switch.
        let text = "
switch r1
switch r2
switch r3
switch r4
link r1 r2
link r2 r3
link r3 r4
link r4 r1
node a r1
node b r2
node c r3
node d r4
";
        let topo = build_text(text);

        // Independent search: plain queue BFS over the undirected ring.
        let bfs = |a: &SwitchId, b: &SwitchId| -> usize {
            let mut dist = BTreeMap::from([(a.clone(), 0usize)]);
            let mut queue = VecDeque::from([a.clone()]);
            while let Some(sw) = queue.pop_front() {
                let d = dist[&sw];
                for next in &topo.switch_neighbors[&sw] {
                    if !dist.contains_key(next) {
                        dist.insert(next.clone(), d + 1);
                        queue.push_back(next.clone());
                    }
                }
            }
            dist[b]
        };

        for (x, y) in [("a", "b"), ("a", "c"), ("b", "d"), ("a", "d")] {
            let nx = NodeName(x.into());
            let ny = NodeName(y.into());
            let sx = topo.attachment_switch(&nx).unwrap().clone();
            let sy = topo.attachment_switch(&ny).unwrap().clone();
            assert_eq!(
                topo.node_distance(&nx, &ny).unwrap(),
                bfs(&sx, &sy) + 2,
                "{x}->{y}"
            );
        }
    }

    #[test]
    fn tie_break_prefers_smallest_switch_sequence() {
        // Two equal-length routes s1-s2-s4 and s1-s3-s4.
        let text = "
switch s1
switch s2
switch s3
switch s4
link s1 s2
link s1 s3
link s2 s4
link s3 s4
";
        let topo = build_text(text);
        let path = topo
            .switch_path(&SwitchId("s1".into()), &SwitchId("s4".into()))
            .unwrap();
        let ids: Vec<&str> = path.iter().map(|s| s.0.as_str()).collect();
        assert_eq!(ids, ["s1", "s2", "s4"]);
    }

    #[test]
    fn disjoint_blocks_assignment_never_overlaps() {
        let spec = TopologySpec::parse(TWO_SWITCH).unwrap();
        let topo = spec
            .build(BloomParams::default(), LinkIdAssignment::DisjointBlocks)
            .unwrap();
        let ids: Vec<_> = topo.links().values().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                assert!(a.bits().or(b.bits()).count_ones() == 10);
            }
        }
    }

    #[test]
    fn disjoint_blocks_space_check() {
        // 60 physical core links -> 120+ directed links, over 51-link budget.
        let mut text = String::new();
        for i in 0..61 {
            text.push_str(&format!("switch c{i:02}\n"));
        }
        for i in 0..60 {
            text.push_str(&format!("link c{i:02} c{:02}\n", i + 1));
        }
        let spec = TopologySpec::parse(&text).unwrap();
        let err = spec
            .build(BloomParams::default(), LinkIdAssignment::DisjointBlocks)
            .unwrap_err();
        assert!(matches!(err, TopologyError::LinkSpaceExhausted(_)));
    }

    #[test]
    fn unknown_stanza_reports_line_number() {
        let err = TopologySpec::parse("switch s1\nbogus x\n").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn controller_defaults_to_smallest_switch() {
        let topo = build_text(TWO_SWITCH);
        assert_eq!(topo.controller_at(), Some(&SwitchId("s1".into())));
        let spec = TopologySpec::parse("switch a\nswitch b\nlink a b\ncontroller b\n").unwrap();
        let topo = spec
            .build(BloomParams::default(), LinkIdAssignment::Keyed)
            .unwrap();
        assert_eq!(topo.controller_at(), Some(&SwitchId("b".into())));
    }

    #[test]
    fn empty_topology_is_valid() {
        let topo = build_text("");
        assert!(topo.switches().is_empty());
        assert!(topo.links().is_empty());
        assert_eq!(topo.controller_at(), None);
    }
}
