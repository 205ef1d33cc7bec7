//! Edge node logic: scope advertisement, lookup tables, target selection,
//! subscription with reverse-path payloads, response handling, forwarding
//! identifier caching, and request aggregation.
//!
//! Handlers are pure state transitions that append [`NodeEffect`]s; the
//! event engine owns packet emission, timers and counters.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::bloom::{merge, ForwardingId};
use crate::coap::{map_host_to_scope, CoapRequest, CoapResponse, ContextHost};
use crate::controller::Resolved;
use crate::messages::{IcnKind, IcnMessage, ResponsePayload, ScopeId, SubscriptionPayload};
use crate::topology::NodeName;

/// Ticks are simulated milliseconds; a pending request fails after 5s.
pub const SUBSCRIBER_TIMEOUT_TICKS: u64 = 5000;

/// A serving node gives an unavailable resource half the subscriber window
/// before answering, so its 4.04 still reaches waiting clients.
pub const PROVIDER_TIMEOUT_TICKS: u64 = 2500;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NodeError {
    #[error("scope {0} not advertised")]
    ScopeNotAdvertised(String),

    #[error("bad request: {0}")]
    BadRequest(String),
}

/// Provider choice when several nodes advertised the same scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectPolicy {
    /// The node that advertised first.
    #[default]
    FirstAdvertised,
    /// Rotate through the candidates in advertisement order.
    RoundRobin,
}

impl SelectPolicy {
    pub fn parse(s: &str) -> Option<SelectPolicy> {
        match s {
            "first-advertised" => Some(SelectPolicy::FirstAdvertised),
            "round-robin" => Some(SelectPolicy::RoundRobin),
            _ => None,
        }
    }
}

/// Scope-to-provider table built from received advertisements. Candidates
/// keep advertisement order; insertion is idempotent.
#[derive(Debug, Clone, Default)]
pub struct LookupTable {
    entries: BTreeMap<ScopeId, Vec<String>>,
}

impl LookupTable {
    pub fn insert(&mut self, scope: &ScopeId, provider: &str) {
        let names = self.entries.entry(scope.clone()).or_default();
        if !names.iter().any(|n| n == provider) {
            names.push(provider.to_string());
        }
    }

    pub fn candidates(&self, scope: &ScopeId) -> Option<&[String]> {
        self.entries.get(scope).map(Vec::as_slice)
    }

    pub fn contains(&self, scope: &ScopeId) -> bool {
        self.entries.contains_key(scope)
    }

    pub fn entries(&self) -> &BTreeMap<ScopeId, Vec<String>> {
        &self.entries
    }
}

/// Per-node content store populated by scenario configuration.
#[derive(Debug, Clone, Default)]
pub struct ContentStore {
    items: BTreeMap<ScopeId, BTreeMap<String, Vec<u8>>>,
}

impl ContentStore {
    pub fn insert(&mut self, scope: ScopeId, item: String, bytes: Vec<u8>) {
        self.items.entry(scope).or_default().insert(item, bytes);
    }

    pub fn get(&self, scope: &ScopeId, item: &str) -> Option<&Vec<u8>> {
        self.items.get(scope).and_then(|m| m.get(item))
    }

    pub fn has_scope(&self, scope: &ScopeId) -> bool {
        self.items.contains_key(scope)
    }
}

/// Who is waiting for a pending request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Waiter {
    Handle(u64),
    CoapClient { message_id: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HandleOutcome {
    Completed(Vec<u8>),
    TimedOut,
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PendingSide {
    Outbound,
    Inbound,
}

pub type PendingKey = (ScopeId, String);

#[derive(Debug, Clone)]
struct PendingOut {
    waiters: Vec<Waiter>,
    deadline: u64,
}

#[derive(Debug, Clone)]
struct PendingIn {
    reverse: ForwardingId,
    subscribers: BTreeSet<NodeName>,
    deadline: u64,
    coap: bool,
    /// Repeating responses: survive each answer and re-fire on updates.
    observe: bool,
    answered: bool,
}

#[derive(Debug, Clone)]
enum DeferredSend {
    Advertisement {
        scope: ScopeId,
        sender: String,
        payload: Vec<u8>,
    },
    Subscription {
        scope: ScopeId,
        item: String,
        coap: Option<CoapRequest>,
    },
}

#[derive(Debug, Clone, Copy)]
struct PendArgs {
    coap: bool,
    observe: bool,
    answered: bool,
}

/// Side effects a handler asks the engine to perform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeEffect {
    /// Ask the controller for `target` (one resolution packet).
    Resolve {
        target: String,
    },
    /// Emit a Bloom-routed message. `intended` is the resolved delivery set,
    /// used to account false-positive deliveries. `overhead` marks traffic
    /// belonging to the name-resolution phase of the protocol.
    Send {
        fid: ForwardingId,
        intended: BTreeSet<NodeName>,
        msg: IcnMessage,
        overhead: bool,
    },
    StartTimer {
        key: PendingKey,
        side: PendingSide,
        at: u64,
    },
    HandleDone {
        handle: u64,
        outcome: HandleOutcome,
    },
    /// Local reply to an attached legacy client.
    CoapReply {
        response: CoapResponse,
    },
    /// Deferred-resource acknowledgement recorded.
    CoapAck,
    /// Request for a host not reachable through the lookup table.
    LegacyFallback,
    /// Subscription for a scope this node does not know.
    UnknownScopeDrop,
    /// A pending resolution came back with an error.
    ResolutionFailed {
        target: String,
        reason: String,
    },
}

/// One edge node's complete state.
#[derive(Debug, Clone)]
pub struct EdgeNode {
    pub name: NodeName,
    pub lookup: LookupTable,
    pub store: ContentStore,
    fid_cache: BTreeMap<String, Resolved>,
    known_scopes: BTreeSet<ScopeId>,
    pending_out: BTreeMap<PendingKey, PendingOut>,
    pending_in: BTreeMap<PendingKey, PendingIn>,
    awaiting_resolution: BTreeMap<String, Vec<DeferredSend>>,
    round_robin: BTreeMap<ScopeId, usize>,
    coap_attached: BTreeSet<(String, String)>,
    next_message_id: u16,
}

impl EdgeNode {
    pub fn new(name: NodeName) -> EdgeNode {
        EdgeNode {
            name,
            lookup: LookupTable::default(),
            store: ContentStore::default(),
            fid_cache: BTreeMap::new(),
            known_scopes: BTreeSet::new(),
            pending_out: BTreeMap::new(),
            pending_in: BTreeMap::new(),
            awaiting_resolution: BTreeMap::new(),
            round_robin: BTreeMap::new(),
            coap_attached: BTreeSet::new(),
            next_message_id: 0,
        }
    }

    pub fn next_message_id(&mut self) -> u16 {
        self.next_message_id = self.next_message_id.wrapping_add(1);
        self.next_message_id
    }

    pub fn seed_fid(&mut self, target: &str, resolved: Resolved) {
        self.fid_cache.entry(target.to_string()).or_insert(resolved);
    }

    pub fn cached_fid(&self, target: &str) -> Option<&Resolved> {
        self.fid_cache.get(target)
    }

    pub fn mark_scope_known(&mut self, scope: &ScopeId) {
        self.known_scopes.insert(scope.clone());
    }

    /// Attaches a CoAP resource. Content availability is tracked through the
    /// content store; attachment alone is enough to accept and hold requests.
    pub fn attach_coap_resource(&mut self, host: &str, path: &str) -> bool {
        self.known_scopes.insert(ScopeId(host.to_string()));
        self.coap_attached
            .insert((host.to_string(), path.to_string()))
    }

    /// Hosts this gateway has attached, each advertised once.
    pub fn attached_hosts(&self) -> BTreeSet<String> {
        self.coap_attached.iter().map(|(h, _)| h.clone()).collect()
    }

    fn knows_scope(&self, scope: &ScopeId) -> bool {
        self.known_scopes.contains(scope) || self.store.has_scope(scope)
    }

    /// Sends one advertisement for `scope` to `target` (normally the
    /// all-nodes group). `sender` may be a group name.
    pub fn advertise(
        &mut self,
        scope: &ScopeId,
        payload: Vec<u8>,
        sender: Option<String>,
        target: &str,
        out: &mut Vec<NodeEffect>,
    ) {
        self.known_scopes.insert(scope.clone());
        let sender = sender.unwrap_or_else(|| self.name.0.clone());
        self.request_send(
            target,
            DeferredSend::Advertisement {
                scope: scope.clone(),
                sender,
                payload,
            },
            out,
        );
    }

    /// Picks the provider for `scope` according to `policy`.
    pub fn select_target(
        &mut self,
        scope: &ScopeId,
        policy: SelectPolicy,
    ) -> Result<String, NodeError> {
        let candidates = self
            .lookup
            .candidates(scope)
            .ok_or_else(|| NodeError::ScopeNotAdvertised(scope.0.clone()))?;
        Ok(match policy {
            SelectPolicy::FirstAdvertised => candidates[0].clone(),
            SelectPolicy::RoundRobin => {
                let slot = self.round_robin.entry(scope.clone()).or_insert(0);
                let chosen = candidates[*slot % candidates.len()].clone();
                *slot += 1;
                chosen
            }
        })
    }

    /// Requests `item` from a provider of `scope`. Identical in-flight
    /// requests aggregate onto one upstream subscription.
    #[allow(clippy::too_many_arguments)]
    pub fn subscribe(
        &mut self,
        waiter: Waiter,
        scope: &ScopeId,
        item: &str,
        policy: SelectPolicy,
        coap: Option<CoapRequest>,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) -> Result<(), NodeError> {
        let key = (scope.clone(), item.to_string());
        if let Some(pending) = self.pending_out.get_mut(&key) {
            pending.waiters.push(waiter);
            return Ok(());
        }
        let target = self.select_target(scope, policy)?;
        self.start_subscription(waiter, &target, scope, item, coap, now, out);
        Ok(())
    }

    /// Like [`subscribe`](Self::subscribe) but addressed to an explicit
    /// target name, bypassing the lookup table. Used for group requests.
    #[allow(clippy::too_many_arguments)]
    pub fn subscribe_to_target(
        &mut self,
        waiter: Waiter,
        target: &str,
        scope: &ScopeId,
        item: &str,
        coap: Option<CoapRequest>,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) {
        let key = (scope.clone(), item.to_string());
        if let Some(pending) = self.pending_out.get_mut(&key) {
            pending.waiters.push(waiter);
            return;
        }
        self.start_subscription(waiter, target, scope, item, coap, now, out);
    }

    /// Sends a subscription over an externally supplied route, bypassing
    /// resolution entirely (the rendezvous comparator path).
    pub fn subscribe_with_route(
        &mut self,
        waiter: Waiter,
        resolved: &Resolved,
        scope: &ScopeId,
        item: &str,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) {
        let key = (scope.clone(), item.to_string());
        if let Some(pending) = self.pending_out.get_mut(&key) {
            pending.waiters.push(waiter);
            return;
        }
        self.open_pending_out(key, waiter, now, out);
        out.push(self.subscription_effect(resolved, scope, item, None));
    }

    #[allow(clippy::too_many_arguments)]
    fn start_subscription(
        &mut self,
        waiter: Waiter,
        target: &str,
        scope: &ScopeId,
        item: &str,
        coap: Option<CoapRequest>,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) {
        let key = (scope.clone(), item.to_string());
        self.open_pending_out(key, waiter, now, out);
        self.request_send(
            target,
            DeferredSend::Subscription {
                scope: scope.clone(),
                item: item.to_string(),
                coap,
            },
            out,
        );
    }

    fn open_pending_out(
        &mut self,
        key: PendingKey,
        waiter: Waiter,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) {
        let deadline = now + SUBSCRIBER_TIMEOUT_TICKS;
        self.pending_out.insert(
            key.clone(),
            PendingOut {
                waiters: vec![waiter],
                deadline,
            },
        );
        out.push(NodeEffect::StartTimer {
            key,
            side: PendingSide::Outbound,
            at: deadline,
        });
    }

    /// Routes a deferred send through the forwarding identifier cache; the
    /// controller is contacted at most once per target name.
    fn request_send(&mut self, target: &str, send: DeferredSend, out: &mut Vec<NodeEffect>) {
        if let Some(resolved) = self.fid_cache.get(target).cloned() {
            out.push(self.build_send(&resolved, send));
            return;
        }
        if let Some(queue) = self.awaiting_resolution.get_mut(target) {
            queue.push(send);
            return;
        }
        self.awaiting_resolution
            .insert(target.to_string(), vec![send]);
        out.push(NodeEffect::Resolve {
            target: target.to_string(),
        });
    }

    fn build_send(&mut self, resolved: &Resolved, send: DeferredSend) -> NodeEffect {
        match send {
            DeferredSend::Advertisement {
                scope,
                sender,
                payload,
            } => NodeEffect::Send {
                fid: resolved.resolution.forward,
                intended: resolved.targets.clone(),
                msg: IcnMessage {
                    kind: IcnKind::Advertisement,
                    scope,
                    item: None,
                    sender,
                    payload,
                },
                overhead: true,
            },
            DeferredSend::Subscription { scope, item, coap } => {
                self.subscription_effect(resolved, &scope, &item, coap)
            }
        }
    }

    fn subscription_effect(
        &mut self,
        resolved: &Resolved,
        scope: &ScopeId,
        item: &str,
        coap: Option<CoapRequest>,
    ) -> NodeEffect {
        let payload = SubscriptionPayload {
            reverse: resolved.resolution.reverse,
            coap,
        };
        NodeEffect::Send {
            fid: resolved.resolution.forward,
            intended: resolved.targets.clone(),
            msg: IcnMessage {
                kind: IcnKind::Subscription,
                scope: scope.clone(),
                item: Some(item.to_string()),
                sender: self.name.0.clone(),
                payload: payload.to_bytes(),
            },
            overhead: false,
        }
    }

    /// Resolution answer from the controller. The route is cached once and
    /// all sends queued behind it go out.
    pub fn on_resolution(
        &mut self,
        target: &str,
        result: Result<Resolved, String>,
        out: &mut Vec<NodeEffect>,
    ) {
        let queued = self.awaiting_resolution.remove(target).unwrap_or_default();
        match result {
            Ok(resolved) => {
                self.fid_cache
                    .entry(target.to_string())
                    .or_insert_with(|| resolved.clone());
                for send in queued {
                    let effect = self.build_send(&resolved, send);
                    out.push(effect);
                }
            }
            Err(reason) => {
                out.push(NodeEffect::ResolutionFailed {
                    target: target.to_string(),
                    reason: reason.clone(),
                });
                for send in queued {
                    if let DeferredSend::Subscription { scope, item, .. } = send {
                        let key = (scope, item);
                        if let Some(pending) = self.pending_out.remove(&key) {
                            for waiter in pending.waiters {
                                match waiter {
                                    Waiter::Handle(handle) => out.push(NodeEffect::HandleDone {
                                        handle,
                                        outcome: HandleOutcome::Failed(reason.clone()),
                                    }),
                                    Waiter::CoapClient { message_id } => {
                                        out.push(NodeEffect::CoapReply {
                                            response: CoapResponse {
                                                code: "5.02".to_string(),
                                                message_id,
                                                payload: Vec::new(),
                                            },
                                        })
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Advertisement delivery: the lookup table gains the sender with
    /// set-union semantics.
    pub fn on_advertisement(&mut self, msg: &IcnMessage) {
        self.lookup.insert(&msg.scope, &msg.sender);
    }

    /// Subscription delivery. Locally available items are answered over the
    /// payload's reverse path; known-scope misses pend and aggregate; unknown
    /// scopes are dropped and counted.
    pub fn on_subscription(&mut self, msg: &IcnMessage, now: u64, out: &mut Vec<NodeEffect>) {
        let Some(item) = msg.item.clone() else {
            out.push(NodeEffect::UnknownScopeDrop);
            return;
        };
        let Ok(payload) = SubscriptionPayload::from_bytes(&msg.payload) else {
            out.push(NodeEffect::UnknownScopeDrop);
            return;
        };
        let sender = NodeName(msg.sender.clone());
        if payload.coap.is_some() {
            self.on_coap_subscription(&msg.scope, &item, payload, sender, now, out);
            return;
        }
        if let Some(bytes) = self.store.get(&msg.scope, &item).cloned() {
            out.push(self.response_effect(
                payload.reverse,
                BTreeSet::from([sender]),
                &msg.scope,
                &item,
                ResponsePayload::plain(bytes),
            ));
        } else if self.knows_scope(&msg.scope) {
            self.pend_inbound(
                msg.scope.clone(),
                item,
                payload.reverse,
                sender,
                PendArgs {
                    coap: false,
                    observe: false,
                    answered: false,
                },
                now,
                out,
            );
        } else {
            out.push(NodeEffect::UnknownScopeDrop);
        }
    }

    /// Proxied CoAP request arriving over the network.
    ///
    /// Direct host requests match attached resources exactly; context-host
    /// requests (scope opening with `all.`) match by path across everything
    /// attached here, and only when the resource is already available.
    fn on_coap_subscription(
        &mut self,
        scope: &ScopeId,
        path: &str,
        payload: SubscriptionPayload,
        sender: NodeName,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) {
        let observe = payload.coap.as_ref().map(|r| r.observe).unwrap_or(false);
        let is_context = scope.0.starts_with("all.");
        if is_context {
            let found = self
                .coap_attached
                .iter()
                .find(|(h, p)| p == path && self.store.get(&ScopeId(h.clone()), path).is_some())
                .cloned();
            match found {
                Some((host, _)) => {
                    let bytes = self.store.get(&ScopeId(host), path).unwrap().clone();
                    out.push(self.response_effect(
                        payload.reverse,
                        BTreeSet::from([sender]),
                        scope,
                        path,
                        ResponsePayload::coap("2.05", bytes),
                    ));
                }
                None => out.push(NodeEffect::UnknownScopeDrop),
            }
            return;
        }

        let host = scope.0.clone();
        if self
            .coap_attached
            .contains(&(host.clone(), path.to_string()))
        {
            if let Some(bytes) = self.store.get(scope, path).cloned() {
                out.push(self.response_effect(
                    payload.reverse,
                    BTreeSet::from([sender.clone()]),
                    scope,
                    path,
                    ResponsePayload::coap("2.05", bytes),
                ));
                if observe {
                    self.pend_inbound(
                        scope.clone(),
                        path.to_string(),
                        payload.reverse,
                        sender,
                        PendArgs {
                            coap: true,
                            observe: true,
                            answered: true,
                        },
                        now,
                        out,
                    );
                }
            } else {
                // Accepted; answered when the resource becomes available.
                out.push(NodeEffect::CoapAck);
                self.pend_inbound(
                    scope.clone(),
                    path.to_string(),
                    payload.reverse,
                    sender,
                    PendArgs {
                        coap: true,
                        observe,
                        answered: false,
                    },
                    now,
                    out,
                );
            }
        } else if self.coap_attached.iter().any(|(h, _)| *h == host) {
            // Known host, unknown path: 4.04 if nothing appears in time.
            self.pend_inbound(
                scope.clone(),
                path.to_string(),
                payload.reverse,
                sender,
                PendArgs {
                    coap: true,
                    observe,
                    answered: false,
                },
                now,
                out,
            );
        } else {
            out.push(NodeEffect::UnknownScopeDrop);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn pend_inbound(
        &mut self,
        scope: ScopeId,
        item: String,
        reverse: ForwardingId,
        sender: NodeName,
        args: PendArgs,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) {
        let key = (scope, item);
        match self.pending_in.get_mut(&key) {
            Some(pending) => {
                pending.reverse = merge(&pending.reverse, &reverse);
                pending.subscribers.insert(sender);
                pending.observe |= args.observe;
            }
            None => {
                let deadline = now + PROVIDER_TIMEOUT_TICKS;
                self.pending_in.insert(
                    key.clone(),
                    PendingIn {
                        reverse,
                        subscribers: BTreeSet::from([sender]),
                        deadline,
                        coap: args.coap,
                        observe: args.observe,
                        answered: args.answered,
                    },
                );
                out.push(NodeEffect::StartTimer {
                    key,
                    side: PendingSide::Inbound,
                    at: deadline,
                });
            }
        }
    }

    fn response_effect(
        &mut self,
        reverse: ForwardingId,
        intended: BTreeSet<NodeName>,
        scope: &ScopeId,
        item: &str,
        payload: ResponsePayload,
    ) -> NodeEffect {
        NodeEffect::Send {
            fid: reverse,
            intended,
            msg: IcnMessage {
                kind: IcnKind::Response,
                scope: scope.clone(),
                item: Some(item.to_string()),
                sender: self.name.0.clone(),
                payload: payload.to_bytes(),
            },
            overhead: false,
        }
    }

    /// Response delivery: completes every waiter aggregated on the pending
    /// request. Late or unsolicited responses are ignored.
    pub fn on_response(&mut self, msg: &IcnMessage, out: &mut Vec<NodeEffect>) {
        let Some(item) = msg.item.clone() else { return };
        let key = (msg.scope.clone(), item);
        let Some(pending) = self.pending_out.remove(&key) else {
            return;
        };
        let payload = ResponsePayload::from_bytes(&msg.payload)
            .unwrap_or_else(|_| ResponsePayload::plain(Vec::new()));
        let code = payload.code.clone().unwrap_or_else(|| "2.05".to_string());
        for waiter in pending.waiters {
            match waiter {
                Waiter::Handle(handle) => {
                    let outcome = if code == "2.05" {
                        HandleOutcome::Completed(payload.body.clone())
                    } else {
                        HandleOutcome::Failed(code.clone())
                    };
                    out.push(NodeEffect::HandleDone { handle, outcome });
                }
                Waiter::CoapClient { message_id } => out.push(NodeEffect::CoapReply {
                    response: CoapResponse {
                        code: code.clone(),
                        message_id,
                        payload: payload.body.clone(),
                    },
                }),
            }
        }
    }

    /// New or updated content (scenario-fed or deferred CoAP resource). Any
    /// aggregated pending request for it is answered with a single multicast
    /// response; observing entries stay armed for the next update.
    pub fn on_content_available(
        &mut self,
        scope: &ScopeId,
        item: &str,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) {
        let key = (scope.clone(), item.to_string());
        let Some(pending) = self.pending_in.get_mut(&key) else {
            return;
        };
        let coap = pending.coap;
        let reverse = pending.reverse;
        let subscribers = pending.subscribers.clone();
        if pending.observe {
            pending.answered = true;
            pending.deadline = now + PROVIDER_TIMEOUT_TICKS;
            out.push(NodeEffect::StartTimer {
                key: key.clone(),
                side: PendingSide::Inbound,
                at: pending.deadline,
            });
        } else {
            self.pending_in.remove(&key);
        }
        let bytes = self.store.get(scope, item).cloned().unwrap_or_default();
        let payload = if coap {
            ResponsePayload::coap("2.05", bytes)
        } else {
            ResponsePayload::plain(bytes)
        };
        out.push(self.response_effect(reverse, subscribers, scope, item, payload));
    }

    /// Timer expiry for a pending key. Stale timers (the pending entry was
    /// satisfied or refreshed) are ignored.
    pub fn on_timer(
        &mut self,
        key: &PendingKey,
        side: PendingSide,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) {
        match side {
            PendingSide::Outbound => {
                let expired = matches!(self.pending_out.get(key), Some(p) if p.deadline <= now);
                if !expired {
                    return;
                }
                let pending = self.pending_out.remove(key).unwrap();
                for waiter in pending.waiters {
                    match waiter {
                        Waiter::Handle(handle) => out.push(NodeEffect::HandleDone {
                            handle,
                            outcome: HandleOutcome::TimedOut,
                        }),
                        Waiter::CoapClient { message_id } => out.push(NodeEffect::CoapReply {
                            response: CoapResponse {
                                code: "5.04".to_string(),
                                message_id,
                                payload: Vec::new(),
                            },
                        }),
                    }
                }
            }
            PendingSide::Inbound => {
                let expired = matches!(self.pending_in.get(key), Some(p) if p.deadline <= now);
                if !expired {
                    return;
                }
                let pending = self.pending_in.remove(key).unwrap();
                if pending.coap && !pending.answered {
                    out.push(self.response_effect(
                        pending.reverse,
                        pending.subscribers,
                        &key.0,
                        &key.1,
                        ResponsePayload::coap("4.04", Vec::new()),
                    ));
                }
            }
        }
    }

    /// Entry point for requests from attached legacy clients.
    ///
    /// A lookup hit proxies the request as a subscription; a context host is
    /// forwarded to the group intersection; anything else is handled as
    /// legacy traffic with a 5.02 stub reply, since no plain-IP world exists
    /// beyond the gateways here.
    pub fn on_coap_request(
        &mut self,
        req: CoapRequest,
        now: u64,
        out: &mut Vec<NodeEffect>,
    ) -> Result<(), NodeError> {
        let scope =
            map_host_to_scope(&req.uri_host).map_err(|e| NodeError::BadRequest(e.to_string()))?;
        let message_id = req.message_id;
        let path = req.uri_path.clone();

        if self.lookup.contains(&scope) {
            let waiter = Waiter::CoapClient { message_id };
            return self
                .subscribe(
                    waiter,
                    &scope,
                    &path,
                    SelectPolicy::FirstAdvertised,
                    Some(req),
                    now,
                    out,
                )
                .map(|_| ());
        }

        let context =
            ContextHost::parse(&scope.0).map_err(|e| NodeError::BadRequest(e.to_string()))?;
        if context.is_some() {
            let target = scope.0.clone();
            self.subscribe_to_target(
                Waiter::CoapClient { message_id },
                &target,
                &scope,
                &path,
                Some(req),
                now,
                out,
            );
            return Ok(());
        }

        out.push(NodeEffect::LegacyFallback);
        out.push(NodeEffect::CoapReply {
            response: CoapResponse {
                code: "5.02".to_string(),
                message_id,
                payload: Vec::new(),
            },
        });
        Ok(())
    }
}
