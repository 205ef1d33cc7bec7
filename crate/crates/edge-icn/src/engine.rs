//! Deterministic discrete-event engine driving controller, switches, edge
//! nodes and gateways. Counts per-hop traversals so protocol phases can be
//! compared, and hosts the centralized-rendezvous comparator mode.
//!
//! Time is measured in ticks (simulated milliseconds); every link traversal
//! takes one tick. Events execute in (tick, insertion order), so a run is
//! reproducible for a fixed scenario and seed.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use num_rational::Ratio;
use thiserror::Error;

use crate::bloom::{encode_path, BloomParams, ForwardingId};
use crate::coap::{CoapMethod, CoapRequest, CoapResponse, ContextHost};
use crate::controller::{AnycastStrategy, Controller, Resolution, ResolveError, Resolved};
use crate::data_plane::{
    forward, install_all, EtherType, PacketHead, Switch, SwitchAction, DEFAULT_HOP_LIMIT,
};
use crate::messages::{IcnKind, IcnMessage, ScopeId};
use crate::node::{
    EdgeNode, HandleOutcome, NodeEffect, PendingKey, PendingSide, SelectPolicy, Waiter,
};
use crate::topology::{
    Endpoint, LinkIdAssignment, LinkRef, NodeName, SwitchId, Topology, TopologySpec, ALL_NODES,
};

/// Gap between auto-scheduled scenario actions, large enough for the
/// traffic of one action to settle before the next fires.
pub const ACTION_SLOT_TICKS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    EdgeIcn,
    Point,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "edge-icn" => Some(Mode::EdgeIcn),
            "point" => Some(Mode::Point),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::EdgeIcn => "edge-icn",
            Mode::Point => "point",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("topology: {0}")]
    Topology(#[from] crate::topology::TopologyError),

    #[error("CoAP stanzas require edge-icn mode")]
    CoapInPointMode,

    #[error("path length parameter l must be at least 1")]
    ZeroL,
}

/// One scenario step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionKind {
    Advertise {
        node: NodeName,
        scope: ScopeId,
        sender: Option<String>,
    },
    Subscribe {
        node: NodeName,
        scope: ScopeId,
        item: String,
        policy: SelectPolicy,
    },
    CoapGet {
        node: NodeName,
        host: String,
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledAction {
    /// Explicit tick; auto-scheduled into successive slots when absent.
    pub at: Option<u64>,
    pub kind: ActionKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentItem {
    pub node: NodeName,
    pub scope: ScopeId,
    pub item: String,
    pub bytes: Vec<u8>,
    /// Availability tick; available from the start when absent.
    pub at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoapAttachment {
    pub node: NodeName,
    pub host: String,
    pub path: String,
}

/// Everything one simulation run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub topology: TopologySpec,
    pub bloom: BloomParams,
    pub assignment: LinkIdAssignment,
    pub hop_limit: u32,
    pub mode: Mode,
    /// Unit path length for overhead reporting.
    pub l_param: u64,
    /// Seed every node's cache with the all-nodes route, uncounted.
    pub preseed_fids: bool,
    /// Group resolutions also deliver to the requesting member.
    pub deliver_to_requester: bool,
    pub strategy: AnycastStrategy,
    pub contents: Vec<ContentItem>,
    pub coap_attachments: Vec<CoapAttachment>,
    pub actions: Vec<ScheduledAction>,
}

impl RunConfig {
    pub fn new(topology: TopologySpec, mode: Mode) -> RunConfig {
        RunConfig {
            topology,
            bloom: BloomParams::default(),
            assignment: LinkIdAssignment::Keyed,
            hop_limit: DEFAULT_HOP_LIMIT,
            mode,
            l_param: 1,
            preseed_fids: false,
            deliver_to_requester: true,
            strategy: AnycastStrategy::default(),
            contents: Vec::new(),
            coap_attachments: Vec::new(),
            actions: Vec::new(),
        }
    }
}

/// Monotone counters accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    /// Every link traversal, control-channel hops included.
    pub hop_traversals: u64,
    /// Traversals belonging to the name-resolution phase: advertisements
    /// plus first-contact resolution round trips.
    pub overhead_hops: u64,
    pub resolution_packets: u64,
    pub advertisements: u64,
    pub subscriptions: u64,
    pub responses: u64,
    pub duplicate_deliveries: u64,
    pub fp_deliveries: u64,
    /// Data-plane drops: no matching rule, hop limit, or copy budget.
    pub drops: u64,
    /// Messages discarded by nodes for unknown scopes.
    pub unknown_scope_drops: u64,
    pub coap_acks: u64,
    pub legacy_fallbacks: u64,
    /// Copies put onto links (one per data traversal).
    pub copies_spawned: u64,
    /// Copies consumed by nodes or the rendezvous point.
    pub copies_delivered: u64,
    /// Copies consumed by switches: forwarded on, dropped, or punted.
    pub copies_forwarded: u64,
    pub copies_dropped: u64,
    pub copies_punted: u64,
    /// Resolutions per (node, target name); each must stay at most 1.
    pub per_node_resolutions: BTreeMap<(String, String), u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HandleStatus {
    Pending,
    Done(HandleOutcome),
}

/// Record of one emitted packet, for delivery-set assertions.
#[derive(Debug, Clone)]
pub struct PacketRecord {
    pub uid: u64,
    pub label: String,
    pub origin: NodeName,
    pub intended: BTreeSet<NodeName>,
    pub delivered: BTreeMap<NodeName, u32>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: Mode,
    pub l_param: u64,
    pub counters: Counters,
    pub trace: Vec<String>,
    pub handles: BTreeMap<u64, HandleStatus>,
    pub coap_replies: Vec<(NodeName, CoapResponse)>,
    pub packets: Vec<PacketRecord>,
    pub errors: Vec<String>,
    pub scopes: u64,
    pub advertisers: u64,
    pub subscribers: u64,
    pub final_tick: u64,
    /// Final lookup-table contents per node: scope name to provider names
    /// in advertisement order.
    pub node_lookups: BTreeMap<NodeName, BTreeMap<String, Vec<String>>>,
}

impl RunReport {
    pub fn l_units(&self) -> Ratio<u64> {
        Ratio::new(self.counters.overhead_hops, self.l_param.max(1))
    }

    pub fn packet<'a>(&'a self, label_part: &str) -> Option<&'a PacketRecord> {
        self.packets.iter().find(|p| p.label.contains(label_part))
    }
}

/// Overhead in units of l: traversals of the resolution phase divided by
/// the unit path length.
pub fn measure_l_units(counters: &Counters, l: u64) -> Result<Ratio<u64>, RunError> {
    if l == 0 {
        return Err(RunError::ZeroL);
    }
    Ok(Ratio::new(counters.overhead_hops, l))
}

pub const COUNTERS_CSV_HEADER: &str = "mode,l,scopes,advertisers,subscribers,hop_traversals,\
l_units,resolution_packets,fp_deliveries,duplicate_deliveries,drops";

pub fn format_ratio(r: Ratio<u64>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Counters CSV: header line plus one row.
pub fn counters_csv(report: &RunReport) -> String {
    let c = &report.counters;
    format!(
        "{}\n{},{},{},{},{},{},{},{},{},{},{}\n",
        COUNTERS_CSV_HEADER,
        report.mode.as_str(),
        report.l_param,
        report.scopes,
        report.advertisers,
        report.subscribers,
        c.hop_traversals,
        format_ratio(report.l_units()),
        c.resolution_packets,
        c.fp_deliveries,
        c.duplicate_deliveries,
        c.drops + c.unknown_scope_drops,
    )
}

#[derive(Debug, Clone)]
enum Payload {
    Icn(IcnMessage),
    ResolveName {
        target: String,
    },
    PointAdvertise {
        scope: ScopeId,
        provider: NodeName,
    },
    PointRequest {
        scope: ScopeId,
        requester: NodeName,
        reverse: ForwardingId,
    },
    PointReply {
        scope: ScopeId,
        provider: NodeName,
        resolution: Resolution,
    },
}

impl Payload {
    fn label(&self) -> String {
        match self {
            Payload::Icn(m) => {
                let kind = match m.kind {
                    IcnKind::Advertisement => "advertisement",
                    IcnKind::Subscription => "subscription",
                    IcnKind::Response => "response",
                };
                match &m.item {
                    Some(item) => {
                        format!("{kind} scope={} item={} from={}", m.scope, item, m.sender)
                    }
                    None => format!("{kind} scope={} from={}", m.scope, m.sender),
                }
            }
            Payload::ResolveName { target } => format!("resolution target={target}"),
            Payload::PointAdvertise { scope, provider } => {
                format!("rv-advertise scope={scope} from={provider}")
            }
            Payload::PointRequest {
                scope, requester, ..
            } => {
                format!("rv-request scope={scope} from={requester}")
            }
            Payload::PointReply {
                scope, provider, ..
            } => {
                format!("rv-reply scope={scope} snap={provider}")
            }
        }
    }

    fn rv_bound(&self) -> bool {
        matches!(
            self,
            Payload::PointAdvertise { .. } | Payload::PointRequest { .. }
        )
    }
}

#[derive(Debug, Clone)]
struct Packet {
    uid: u64,
    ether_type: EtherType,
    fid: ForwardingId,
    hop_limit: u32,
    arrival: Option<LinkRef>,
    payload: Payload,
    overhead: bool,
}

#[derive(Debug)]
enum EvBody {
    Action(usize),
    SwitchArrive {
        sw: SwitchId,
        packet: Packet,
    },
    NodeArrive {
        node: NodeName,
        packet: Packet,
    },
    CtrlHandle {
        origin: NodeName,
        target: String,
        punt_sw: SwitchId,
    },
    CtrlDeliver {
        origin: NodeName,
        target: String,
        punt_sw: SwitchId,
        return_hops: u64,
        result: Result<Resolved, String>,
    },
    Timer {
        node: NodeName,
        key: PendingKey,
        side: PendingSide,
    },
    ContentOn {
        node: NodeName,
        scope: ScopeId,
        item: String,
        bytes: Vec<u8>,
    },
}

#[derive(Debug)]
struct Ev {
    tick: u64,
    seq: u64,
    body: EvBody,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.tick == other.tick && self.seq == other.seq
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.tick, self.seq).cmp(&(other.tick, other.seq))
    }
}

#[derive(Debug, Clone, Default)]
struct RendezvousState {
    /// Scope store: every advertisement lands here.
    scopes: BTreeMap<ScopeId, Vec<NodeName>>,
}

struct Sim {
    topo: Topology,
    switches: BTreeMap<SwitchId, Switch>,
    controller: Controller,
    nodes: BTreeMap<NodeName, EdgeNode>,
    mode: Mode,
    hop_limit: u32,
    now: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<Ev>>,
    counters: Counters,
    trace: Vec<String>,
    rv: RendezvousState,
    rv_switch: SwitchId,
    /// Preconfigured node-to-rendezvous routes (comparator mode).
    rv_routes: BTreeMap<NodeName, Resolution>,
    point_cache: BTreeMap<NodeName, BTreeMap<ScopeId, (NodeName, Resolution)>>,
    point_awaiting: BTreeMap<(NodeName, ScopeId), Vec<(String, Waiter)>>,
    handles: BTreeMap<u64, HandleStatus>,
    next_handle: u64,
    coap_replies: Vec<(NodeName, CoapResponse)>,
    packets: Vec<PacketRecord>,
    seen_deliveries: BTreeSet<(u64, NodeName)>,
    copy_budget: u64,
    copies_by_uid: BTreeMap<u64, u64>,
    next_uid: u64,
    errors: Vec<String>,
    actions: Vec<ScheduledAction>,
}

/// Runs one scenario to quiescence and reports counters, trace, and
/// per-packet delivery records.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunReport, RunError> {
    if cfg.mode == Mode::Point
        && cfg
            .actions
            .iter()
            .any(|a| matches!(a.kind, ActionKind::CoapGet { .. }))
    {
        return Err(RunError::CoapInPointMode);
    }

    let topo = cfg.topology.build(cfg.bloom, cfg.assignment)?;
    let switches = install_all(&topo);
    let mut controller = Controller::new(&topo, cfg.strategy);
    controller.set_deliver_to_requester(cfg.deliver_to_requester);

    let mut nodes: BTreeMap<NodeName, EdgeNode> = topo
        .node_names()
        .map(|n| (n.clone(), EdgeNode::new(n.clone())))
        .collect();

    // The rendezvous point sits at the controller's switch; its routes are
    // preconfigured infrastructure, never counted as resolutions.
    let rv_switch = topo
        .controller_at()
        .cloned()
        .unwrap_or_else(|| SwitchId("-".into()));
    let mut rv_routes = BTreeMap::new();
    if cfg.mode == Mode::Point {
        for name in topo.node_names() {
            rv_routes.insert(
                name.clone(),
                Resolution {
                    forward: fid_node_to_switch(&topo, name, &rv_switch),
                    reverse: fid_switch_to_node(&topo, &rv_switch, name),
                },
            );
        }
    }

    if cfg.mode == Mode::EdgeIcn && cfg.preseed_fids {
        for (name, node) in nodes.iter_mut() {
            if let Ok(resolved) = controller.resolve(&topo, ALL_NODES, name) {
                node.seed_fid(ALL_NODES, resolved);
            }
        }
    }

    for att in &cfg.coap_attachments {
        if let Some(node) = nodes.get_mut(&att.node) {
            node.attach_coap_resource(&att.host, &att.path);
        }
    }

    let copy_budget = topo.links().len() as u64 * cfg.hop_limit as u64;
    let mut sim = Sim {
        topo,
        switches,
        controller,
        nodes,
        mode: cfg.mode,
        hop_limit: cfg.hop_limit,
        now: 0,
        seq: 0,
        queue: BinaryHeap::new(),
        counters: Counters::default(),
        trace: Vec::new(),
        rv: RendezvousState::default(),
        rv_switch,
        rv_routes,
        point_cache: BTreeMap::new(),
        point_awaiting: BTreeMap::new(),
        handles: BTreeMap::new(),
        next_handle: 0,
        coap_replies: Vec::new(),
        packets: Vec::new(),
        seen_deliveries: BTreeSet::new(),
        copy_budget,
        copies_by_uid: BTreeMap::new(),
        next_uid: 0,
        errors: Vec::new(),
        actions: cfg.actions.clone(),
    };

    for item in &cfg.contents {
        match item.at {
            None => {
                if let Some(node) = sim.nodes.get_mut(&item.node) {
                    node.store
                        .insert(item.scope.clone(), item.item.clone(), item.bytes.clone());
                }
            }
            Some(at) => sim.schedule(
                at,
                EvBody::ContentOn {
                    node: item.node.clone(),
                    scope: item.scope.clone(),
                    item: item.item.clone(),
                    bytes: item.bytes.clone(),
                },
            ),
        }
    }

    for (i, action) in cfg.actions.iter().enumerate() {
        let tick = action.at.unwrap_or((i as u64 + 1) * ACTION_SLOT_TICKS);
        sim.schedule(tick, EvBody::Action(i));
    }

    sim.run();
    Ok(sim.into_report(cfg))
}

fn fid_node_to_switch(topo: &Topology, node: &NodeName, sw: &SwitchId) -> ForwardingId {
    let attach = topo.attachment_switch(node).unwrap();
    let mut refs = vec![topo.uplink(node).unwrap()];
    let spine = topo.switch_path(attach, sw).unwrap();
    for pair in spine.windows(2) {
        refs.push(LinkRef::new(
            Endpoint::Switch(pair[0].clone()),
            Endpoint::Switch(pair[1].clone()),
        ));
    }
    encode_path(refs.iter().map(|r| topo.link_id(r).unwrap()))
}

fn fid_switch_to_node(topo: &Topology, sw: &SwitchId, node: &NodeName) -> ForwardingId {
    let attach = topo.attachment_switch(node).unwrap();
    let mut refs = Vec::new();
    let spine = topo.switch_path(sw, attach).unwrap();
    for pair in spine.windows(2) {
        refs.push(LinkRef::new(
            Endpoint::Switch(pair[0].clone()),
            Endpoint::Switch(pair[1].clone()),
        ));
    }
    refs.push(topo.downlink(node).unwrap());
    encode_path(refs.iter().map(|r| topo.link_id(r).unwrap()))
}

impl Sim {
    fn schedule(&mut self, tick: u64, body: EvBody) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(Ev { tick, seq, body }));
    }

    fn run(&mut self) {
        while let Some(Reverse(ev)) = self.queue.pop() {
            debug_assert!(ev.tick >= self.now);
            self.now = ev.tick;
            match ev.body {
                EvBody::Action(idx) => self.run_action(idx),
                EvBody::SwitchArrive { sw, packet } => self.at_switch(sw, packet),
                EvBody::NodeArrive { node, packet } => self.at_node(node, packet),
                EvBody::CtrlHandle {
                    origin,
                    target,
                    punt_sw,
                } => self.ctrl_handle(origin, target, punt_sw),
                EvBody::CtrlDeliver {
                    origin,
                    target,
                    punt_sw,
                    return_hops,
                    result,
                } => self.ctrl_deliver(origin, target, punt_sw, return_hops, result),
                EvBody::Timer { node, key, side } => {
                    let mut fx = Vec::new();
                    let now = self.now;
                    if let Some(n) = self.nodes.get_mut(&node) {
                        n.on_timer(&key, side, now, &mut fx);
                    }
                    self.apply_effects(&node, fx);
                }
                EvBody::ContentOn {
                    node,
                    scope,
                    item,
                    bytes,
                } => {
                    let mut fx = Vec::new();
                    if let Some(n) = self.nodes.get_mut(&node) {
                        n.store.insert(scope.clone(), item.clone(), bytes);
                        let now = self.now;
                        n.on_content_available(&scope, &item, now, &mut fx);
                    }
                    self.apply_effects(&node, fx);
                }
            }
        }
    }

    fn run_action(&mut self, idx: usize) {
        let action = self.actions[idx].kind.clone();
        match (self.mode, action) {
            (
                Mode::EdgeIcn,
                ActionKind::Advertise {
                    node,
                    scope,
                    sender,
                },
            ) => {
                let mut fx = Vec::new();
                if let Some(n) = self.nodes.get_mut(&node) {
                    n.advertise(&scope, Vec::new(), sender, ALL_NODES, &mut fx);
                }
                self.apply_effects(&node, fx);
            }
            (
                Mode::EdgeIcn,
                ActionKind::Subscribe {
                    node,
                    scope,
                    item,
                    policy,
                },
            ) => {
                let handle = self.alloc_handle();
                let mut fx = Vec::new();
                let now = self.now;
                let result = match self.nodes.get_mut(&node) {
                    Some(n) => n.subscribe(
                        Waiter::Handle(handle),
                        &scope,
                        &item,
                        policy,
                        None,
                        now,
                        &mut fx,
                    ),
                    None => Ok(()),
                };
                if let Err(e) = result {
                    self.errors
                        .push(format!("subscribe {node} {scope} {item}: {e}"));
                    self.handles.insert(
                        handle,
                        HandleStatus::Done(HandleOutcome::Failed(e.to_string())),
                    );
                }
                self.apply_effects(&node, fx);
            }
            (Mode::EdgeIcn, ActionKind::CoapGet { node, host, path }) => {
                let mut fx = Vec::new();
                let now = self.now;
                let result = match self.nodes.get_mut(&node) {
                    Some(n) => {
                        let req = CoapRequest {
                            method: CoapMethod::Get,
                            uri_host: host.clone(),
                            uri_path: path.clone(),
                            message_id: n.next_message_id(),
                            confirmable: true,
                            observe: false,
                        };
                        n.on_coap_request(req, now, &mut fx)
                    }
                    None => Ok(()),
                };
                if let Err(e) = result {
                    self.errors
                        .push(format!("coap-get {node} {host} {path}: {e}"));
                }
                self.apply_effects(&node, fx);
            }
            (Mode::Point, ActionKind::Advertise { node, scope, .. }) => {
                if let Some(n) = self.nodes.get_mut(&node) {
                    n.mark_scope_known(&scope);
                }
                let Some(route) = self.rv_routes.get(&node).copied() else {
                    return;
                };
                self.counters.advertisements += 1;
                let packet = self.new_packet(
                    EtherType::BloomRouted,
                    route.forward,
                    Payload::PointAdvertise {
                        scope,
                        provider: node.clone(),
                    },
                    BTreeSet::new(),
                    true,
                );
                self.emit_from_node(&node, packet);
            }
            (
                Mode::Point,
                ActionKind::Subscribe {
                    node, scope, item, ..
                },
            ) => {
                let handle = self.alloc_handle();
                self.point_subscribe(node, scope, item, Waiter::Handle(handle));
            }
            (Mode::Point, ActionKind::CoapGet { .. }) => {
                unreachable!("rejected before the run starts")
            }
        }
    }

    fn alloc_handle(&mut self) -> u64 {
        let handle = self.next_handle;
        self.next_handle += 1;
        self.handles.insert(handle, HandleStatus::Pending);
        handle
    }

    fn point_subscribe(&mut self, node: NodeName, scope: ScopeId, item: String, waiter: Waiter) {
        if let Some((provider, route)) = self
            .point_cache
            .get(&node)
            .and_then(|m| m.get(&scope))
            .cloned()
        {
            self.point_send_subscription(&node, &provider, route, &scope, &item, waiter);
            return;
        }
        let key = (node.clone(), scope.clone());
        if let Some(queue) = self.point_awaiting.get_mut(&key) {
            queue.push((item, waiter));
            return;
        }
        let Some(route) = self.rv_routes.get(&node).copied() else {
            return;
        };
        self.point_awaiting.insert(key, vec![(item, waiter)]);
        self.counters.resolution_packets += 1;
        *self
            .counters
            .per_node_resolutions
            .entry((node.0.clone(), scope.0.clone()))
            .or_insert(0) += 1;
        let packet = self.new_packet(
            EtherType::BloomRouted,
            route.forward,
            Payload::PointRequest {
                scope,
                requester: node.clone(),
                reverse: route.reverse,
            },
            BTreeSet::new(),
            true,
        );
        self.emit_from_node(&node, packet);
    }

    fn point_send_subscription(
        &mut self,
        node: &NodeName,
        provider: &NodeName,
        resolution: Resolution,
        scope: &ScopeId,
        item: &str,
        waiter: Waiter,
    ) {
        let resolved = Resolved {
            resolution,
            targets: BTreeSet::from([provider.clone()]),
        };
        let mut fx = Vec::new();
        let now = self.now;
        if let Some(n) = self.nodes.get_mut(node) {
            n.subscribe_with_route(waiter, &resolved, scope, item, now, &mut fx);
        }
        self.apply_effects(node, fx);
    }

    fn apply_effects(&mut self, node: &NodeName, effects: Vec<NodeEffect>) {
        for effect in effects {
            match effect {
                NodeEffect::Resolve { target } => {
                    self.counters.resolution_packets += 1;
                    *self
                        .counters
                        .per_node_resolutions
                        .entry((node.0.clone(), target.clone()))
                        .or_insert(0) += 1;
                    let packet = self.new_packet(
                        EtherType::Resolution,
                        ForwardingId::ZERO,
                        Payload::ResolveName { target },
                        BTreeSet::new(),
                        true,
                    );
                    self.emit_from_node(node, packet);
                }
                NodeEffect::Send {
                    fid,
                    intended,
                    msg,
                    overhead,
                } => {
                    match msg.kind {
                        IcnKind::Advertisement => self.counters.advertisements += 1,
                        IcnKind::Subscription => self.counters.subscriptions += 1,
                        IcnKind::Response => self.counters.responses += 1,
                    }
                    let packet = self.new_packet(
                        EtherType::BloomRouted,
                        fid,
                        Payload::Icn(msg),
                        intended,
                        overhead,
                    );
                    self.emit_from_node(node, packet);
                }
                NodeEffect::StartTimer { key, side, at } => {
                    self.schedule(
                        at,
                        EvBody::Timer {
                            node: node.clone(),
                            key,
                            side,
                        },
                    );
                }
                NodeEffect::HandleDone { handle, outcome } => {
                    self.handles.insert(handle, HandleStatus::Done(outcome));
                }
                NodeEffect::CoapReply { response } => {
                    self.coap_replies.push((node.clone(), response));
                }
                NodeEffect::CoapAck => self.counters.coap_acks += 1,
                NodeEffect::LegacyFallback => self.counters.legacy_fallbacks += 1,
                NodeEffect::UnknownScopeDrop => self.counters.unknown_scope_drops += 1,
                NodeEffect::ResolutionFailed { target, reason } => {
                    self.errors
                        .push(format!("resolution of {target} at {node}: {reason}"));
                }
            }
        }
    }

    fn new_packet(
        &mut self,
        ether_type: EtherType,
        fid: ForwardingId,
        payload: Payload,
        intended: BTreeSet<NodeName>,
        overhead: bool,
    ) -> Packet {
        let uid = self.next_uid;
        self.next_uid += 1;
        self.packets.push(PacketRecord {
            uid,
            label: payload.label(),
            origin: NodeName(String::new()),
            intended,
            delivered: BTreeMap::new(),
        });
        Packet {
            uid,
            ether_type,
            fid,
            hop_limit: self.hop_limit,
            arrival: None,
            payload,
            overhead,
        }
    }

    fn count_traversal(&mut self, overhead: bool) {
        self.counters.hop_traversals += 1;
        if overhead {
            self.counters.overhead_hops += 1;
        }
    }

    fn count_control_hops(&mut self, hops: u64, overhead: bool) {
        self.counters.hop_traversals += hops;
        if overhead {
            self.counters.overhead_hops += hops;
        }
    }

    fn emit_from_node(&mut self, node: &NodeName, mut packet: Packet) {
        let Some(uplink) = self.topo.uplink(node) else {
            return;
        };
        self.packets[packet.uid as usize].origin = node.clone();
        self.count_traversal(packet.overhead);
        self.counters.copies_spawned += 1;
        *self.copies_by_uid.entry(packet.uid).or_insert(0) += 1;
        let sw = match &uplink.to {
            Endpoint::Switch(sw) => sw.clone(),
            Endpoint::Node(_) => unreachable!(),
        };
        packet.arrival = Some(uplink);
        let tick = self.now + 1;
        self.schedule(tick, EvBody::SwitchArrive { sw, packet });
    }

    /// Emission by an actor resident at a switch (the rendezvous point).
    fn emit_from_switch(&mut self, sw: &SwitchId, packet: Packet) {
        self.packets[packet.uid as usize].origin = NodeName(format!("@{sw}"));
        self.forward_at_inner(sw.clone(), packet, true);
    }

    fn trace_line(&mut self, sw: &SwitchId, et: EtherType, fid: &ForwardingId, action: &str) {
        self.trace.push(format!(
            "t={} sw={} et={:04x} fid={} action={}",
            self.now,
            sw,
            et.value(),
            fid.to_hex(),
            action
        ));
    }

    fn at_switch(&mut self, sw: SwitchId, packet: Packet) {
        // The rendezvous point consumes its own traffic at its switch.
        if self.mode == Mode::Point && sw == self.rv_switch && packet.payload.rv_bound() {
            self.counters.copies_delivered += 1;
            self.rv_consume(packet);
            return;
        }
        match packet.ether_type {
            EtherType::Resolution => {
                self.counters.copies_punted += 1;
                self.trace_line(&sw, EtherType::Resolution, &packet.fid, "punt");
                let Payload::ResolveName { target } = &packet.payload else {
                    return;
                };
                let origin = self.packets[packet.uid as usize].origin.clone();
                let ctrl = self.rv_switch.clone();
                let punt_hops = self.topo.switch_distance(&sw, &ctrl).unwrap_or(0) as u64;
                self.count_control_hops(punt_hops, packet.overhead);
                let tick = self.now + punt_hops;
                self.schedule(
                    tick,
                    EvBody::CtrlHandle {
                        origin,
                        target: target.clone(),
                        punt_sw: sw,
                    },
                );
            }
            EtherType::BloomRouted => self.forward_at(sw, packet),
        }
    }

    fn forward_at(&mut self, sw: SwitchId, packet: Packet) {
        self.forward_at_inner(sw, packet, false);
    }

    /// `origination` marks packets born at this switch (no arriving copy to
    /// account for).
    fn forward_at_inner(&mut self, sw: SwitchId, packet: Packet, origination: bool) {
        let head = PacketHead {
            ether_type: packet.ether_type,
            address_field: packet.fid,
            hop_limit: packet.hop_limit,
        };
        let actions = forward(&self.switches[&sw], &head, packet.arrival.as_ref());
        let mut spawned_any = false;
        for action in actions {
            match action {
                SwitchAction::Output(link) => {
                    let spawned = self.copies_by_uid.entry(packet.uid).or_insert(0);
                    if *spawned >= self.copy_budget {
                        self.counters.drops += 1;
                        self.trace_line(&sw, packet.ether_type, &packet.fid, "drop");
                        continue;
                    }
                    *spawned += 1;
                    spawned_any = true;
                    self.count_traversal(packet.overhead);
                    self.counters.copies_spawned += 1;
                    self.trace_line(&sw, packet.ether_type, &packet.fid, &format!("out:{link}"));
                    let mut copy = packet.clone();
                    copy.hop_limit = packet.hop_limit - 1;
                    copy.arrival = Some(link.clone());
                    let tick = self.now + 1;
                    match link.to {
                        Endpoint::Switch(next) => self.schedule(
                            tick,
                            EvBody::SwitchArrive {
                                sw: next,
                                packet: copy,
                            },
                        ),
                        Endpoint::Node(node) => {
                            self.schedule(tick, EvBody::NodeArrive { node, packet: copy })
                        }
                    }
                }
                SwitchAction::Drop => {
                    self.counters.drops += 1;
                    self.trace_line(&sw, packet.ether_type, &packet.fid, "drop");
                }
                SwitchAction::PuntToController => unreachable!(),
            }
        }
        // The arriving copy either went on as its outputs or ended here.
        if !origination {
            if spawned_any {
                self.counters.copies_forwarded += 1;
            } else {
                self.counters.copies_dropped += 1;
            }
        }
    }

    fn at_node(&mut self, node: NodeName, packet: Packet) {
        self.counters.copies_delivered += 1;
        let record = &mut self.packets[packet.uid as usize];
        *record.delivered.entry(node.clone()).or_insert(0) += 1;
        if !record.intended.contains(&node) {
            self.counters.fp_deliveries += 1;
        }
        if !self.seen_deliveries.insert((packet.uid, node.clone())) {
            self.counters.duplicate_deliveries += 1;
        }

        match packet.payload {
            Payload::Icn(msg) => {
                let mut fx = Vec::new();
                let now = self.now;
                if let Some(n) = self.nodes.get_mut(&node) {
                    match msg.kind {
                        IcnKind::Advertisement => n.on_advertisement(&msg),
                        IcnKind::Subscription => n.on_subscription(&msg, now, &mut fx),
                        IcnKind::Response => n.on_response(&msg, &mut fx),
                    }
                }
                self.apply_effects(&node, fx);
            }
            Payload::PointReply {
                scope,
                provider,
                resolution,
            } => {
                self.point_cache
                    .entry(node.clone())
                    .or_default()
                    .entry(scope.clone())
                    .or_insert((provider.clone(), resolution));
                let waiting = self
                    .point_awaiting
                    .remove(&(node.clone(), scope.clone()))
                    .unwrap_or_default();
                for (item, waiter) in waiting {
                    self.point_send_subscription(
                        &node, &provider, resolution, &scope, &item, waiter,
                    );
                }
            }
            // Stray deliveries (false positives) of control traffic.
            Payload::ResolveName { .. }
            | Payload::PointAdvertise { .. }
            | Payload::PointRequest { .. } => {}
        }
    }

    fn rv_consume(&mut self, packet: Packet) {
        match packet.payload {
            Payload::PointAdvertise { scope, provider } => {
                let providers = self.rv.scopes.entry(scope).or_default();
                if !providers.contains(&provider) {
                    providers.push(provider);
                }
            }
            Payload::PointRequest {
                scope,
                requester,
                reverse,
            } => {
                let Some(providers) = self.rv.scopes.get(&scope) else {
                    self.counters.unknown_scope_drops += 1;
                    return;
                };
                // Nearest provider, ties to the smallest name.
                let provider = providers
                    .iter()
                    .min_by_key(|p| {
                        (
                            self.topo.node_distance(&requester, p).unwrap_or(usize::MAX),
                            (*p).clone(),
                        )
                    })
                    .cloned()
                    .unwrap();
                let resolution = Resolution {
                    forward: encode_refs(
                        &self.topo,
                        &self.topo.shortest_path(&requester, &provider).unwrap(),
                    ),
                    reverse: encode_refs(
                        &self.topo,
                        &self.topo.shortest_path(&provider, &requester).unwrap(),
                    ),
                };
                let rv_switch = self.rv_switch.clone();
                let reply = self.new_packet(
                    EtherType::BloomRouted,
                    reverse,
                    Payload::PointReply {
                        scope,
                        provider,
                        resolution,
                    },
                    BTreeSet::from([requester]),
                    true,
                );
                self.emit_from_switch(&rv_switch, reply);
            }
            _ => {}
        }
    }

    fn ctrl_handle(&mut self, origin: NodeName, target: String, punt_sw: SwitchId) {
        let result = self.resolve_any(&target, &origin);
        let ctrl = self.rv_switch.clone();
        let return_hops = self.topo.switch_distance(&ctrl, &punt_sw).unwrap_or(0) as u64;
        let tick = self.now + return_hops;
        self.schedule(
            tick,
            EvBody::CtrlDeliver {
                origin,
                target,
                punt_sw,
                return_hops,
                result,
            },
        );
    }

    /// The controller's answer travels back to the punting switch and down
    /// the attachment link, mirroring the request's cost.
    fn ctrl_deliver(
        &mut self,
        origin: NodeName,
        target: String,
        punt_sw: SwitchId,
        return_hops: u64,
        result: Result<Resolved, String>,
    ) {
        self.count_control_hops(return_hops + 1, true);
        if let Some(downlink) = self.topo.downlink(&origin) {
            self.trace_line(
                &punt_sw.clone(),
                EtherType::Resolution,
                &ForwardingId::ZERO,
                &format!("out:{downlink}"),
            );
        }
        let mut fx = Vec::new();
        if let Some(n) = self.nodes.get_mut(&origin) {
            n.on_resolution(&target, result, &mut fx);
        }
        self.apply_effects(&origin, fx);
    }

    /// Name resolution with context-host fallback: a dotted `all.`-name that
    /// is not itself a registered group resolves to the intersection of the
    /// groups named by its remaining labels.
    fn resolve_any(&mut self, target: &str, requester: &NodeName) -> Result<Resolved, String> {
        match self.controller.resolve(&self.topo, target, requester) {
            Ok(resolved) => Ok(resolved),
            Err(ResolveError::UnknownTarget(_)) => match ContextHost::parse(target) {
                Ok(Some(ctx)) => {
                    let labels: BTreeSet<String> = ctx.groups().iter().cloned().collect();
                    self.controller
                        .resolve_context(&self.topo, &labels, requester)
                        .map_err(|e| e.to_string())
                }
                _ => Err(ResolveError::UnknownTarget(target.to_string()).to_string()),
            },
            Err(e) => Err(e.to_string()),
        }
    }

    fn into_report(self, cfg: &RunConfig) -> RunReport {
        let mut scopes = BTreeSet::new();
        let mut advertisers = BTreeSet::new();
        let mut subscribers = BTreeSet::new();
        for action in &cfg.actions {
            match &action.kind {
                ActionKind::Advertise { node, scope, .. } => {
                    scopes.insert(scope.clone());
                    advertisers.insert(node.clone());
                }
                ActionKind::Subscribe { node, .. } => {
                    subscribers.insert(node.clone());
                }
                ActionKind::CoapGet { node, .. } => {
                    subscribers.insert(node.clone());
                }
            }
        }
        debug_assert_eq!(
            self.counters.copies_spawned,
            self.counters.copies_delivered
                + self.counters.copies_forwarded
                + self.counters.copies_dropped
                + self.counters.copies_punted
        );
        let node_lookups = self
            .nodes
            .iter()
            .map(|(name, node)| {
                let table = node
                    .lookup
                    .entries()
                    .iter()
                    .map(|(scope, providers)| (scope.0.clone(), providers.clone()))
                    .collect();
                (name.clone(), table)
            })
            .collect();
        RunReport {
            mode: self.mode,
            l_param: cfg.l_param,
            counters: self.counters,
            trace: self.trace,
            handles: self.handles,
            coap_replies: self.coap_replies,
            packets: self.packets,
            errors: self.errors,
            scopes: scopes.len() as u64,
            advertisers: advertisers.len() as u64,
            subscribers: subscribers.len() as u64,
            final_tick: self.now,
            node_lookups,
        }
    }
}

fn encode_refs(topo: &Topology, refs: &[LinkRef]) -> ForwardingId {
    encode_path(refs.iter().map(|r| topo.link_id(r).unwrap()))
}
