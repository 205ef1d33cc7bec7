//! Line-oriented scenario files: topology stanzas (inline or included),
//! run configuration, content placement, and the action script.
//!
//! Parsing is total: every rejected input names the offending line. Action
//! stanzas accept an optional trailing `@tick=<n>`; without it actions run
//! in file order, one settle slot apart.

use std::collections::BTreeSet;
use std::path::Path;

use crate::bloom::BloomParams;
use crate::controller::AnycastStrategy;
use crate::engine::{ActionKind, CoapAttachment, ContentItem, Mode, RunConfig, ScheduledAction};
use crate::messages::ScopeId;
use crate::node::SelectPolicy;
use crate::topology::{strip_comment, LinkIdAssignment, NodeName, ParseError, TopologySpec};

/// A parsed scenario: topology plus workload plus optional run settings.
/// `mode` and `seed` can be overridden at run time.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub topology: TopologySpec,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub bloom_k: u16,
    pub assignment: LinkIdAssignment,
    pub hop_limit: u32,
    pub l_param: u64,
    pub preseed_fids: bool,
    pub deliver_to_sender: bool,
    pub strategy: AnycastStrategy,
    pub contents: Vec<ContentItem>,
    pub coap_attachments: Vec<CoapAttachment>,
    pub actions: Vec<ScheduledAction>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            topology: TopologySpec::default(),
            mode: None,
            seed: None,
            bloom_k: BloomParams::default().hashes_per_link,
            assignment: LinkIdAssignment::Keyed,
            hop_limit: crate::data_plane::DEFAULT_HOP_LIMIT,
            l_param: 1,
            preseed_fids: false,
            deliver_to_sender: true,
            strategy: AnycastStrategy::default(),
            contents: Vec::new(),
            coap_attachments: Vec::new(),
            actions: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    /// Binds the scenario to a mode and seed, producing a runnable config.
    pub fn to_run_config(&self, mode: Mode, seed: u64) -> RunConfig {
        let mut run = RunConfig::new(self.topology.clone(), mode);
        run.bloom = BloomParams {
            seed,
            ..BloomParams::default()
        };
        run.bloom.hashes_per_link = self.bloom_k;
        run.assignment = self.assignment;
        run.hop_limit = self.hop_limit;
        run.l_param = self.l_param;
        run.preseed_fids = self.preseed_fids;
        run.deliver_to_requester = self.deliver_to_sender;
        run.strategy = self.strategy;
        run.contents = self.contents.clone();
        run.coap_attachments = self.coap_attachments.clone();
        run.actions = self.actions.clone();
        run
    }
}

/// Parses scenario text. `include_base` is the directory `topology <path>`
/// stanzas resolve against; without it they are rejected.
pub fn parse_scenario(
    text: &str,
    include_base: Option<&Path>,
) -> Result<ScenarioConfig, ParseError> {
    let mut cfg = ScenarioConfig::default();
    // Dedup so each gateway advertises one scope per distinct host.
    let mut advertised_hosts: BTreeSet<(NodeName, String)> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fail = |message: String| ParseError {
            line: line_no,
            message,
        };
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens: Vec<&str> = line.split_whitespace().collect();

        let mut at: Option<u64> = None;
        if let Some(last) = tokens.last() {
            if let Some(value) = last.strip_prefix("@tick=") {
                at = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| fail(format!("bad tick `{value}`")))?,
                );
                tokens.pop();
            }
        }

        match tokens[0] {
            "topology" => {
                let path = expect(&tokens, 1, line_no)?[0];
                let base = include_base
                    .ok_or_else(|| fail("no base directory for includes".to_string()))?;
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    fail(format!("cannot read topology file {}: {e}", full.display()))
                })?;
                let spec = TopologySpec::parse(&text)
                    .map_err(|e| fail(format!("in {}: {e}", full.display())))?;
                merge_topology(&mut cfg.topology, spec, line_no)?;
            }
            "mode" => {
                let arg = expect(&tokens, 1, line_no)?[0];
                cfg.mode =
                    Some(Mode::parse(arg).ok_or_else(|| fail(format!("unknown mode `{arg}`")))?);
            }
            "seed" => {
                let arg = expect(&tokens, 1, line_no)?[0];
                cfg.seed = Some(arg.parse().map_err(|_| fail(format!("bad seed `{arg}`")))?);
            }
            "bloom-k" => {
                let arg = expect(&tokens, 1, line_no)?[0];
                cfg.bloom_k = arg
                    .parse()
                    .map_err(|_| fail(format!("bad bloom-k `{arg}`")))?;
            }
            "hop-limit" => {
                let arg = expect(&tokens, 1, line_no)?[0];
                cfg.hop_limit = arg
                    .parse()
                    .map_err(|_| fail(format!("bad hop-limit `{arg}`")))?;
            }
            "l" => {
                let arg = expect(&tokens, 1, line_no)?[0];
                let l: u64 = arg.parse().map_err(|_| fail(format!("bad l `{arg}`")))?;
                if l == 0 {
                    return Err(fail("l must be at least 1".to_string()));
                }
                cfg.l_param = l;
            }
            "preseed-fids" => cfg.preseed_fids = parse_switch(&tokens, line_no)?,
            "deliver-to-sender" => cfg.deliver_to_sender = parse_switch(&tokens, line_no)?,
            "anycast" => {
                let arg = expect(&tokens, 1, line_no)?[0];
                cfg.strategy = AnycastStrategy::parse(arg)
                    .ok_or_else(|| fail(format!("unknown anycast strategy `{arg}`")))?;
            }
            "assignment" => {
                let arg = expect(&tokens, 1, line_no)?[0];
                cfg.assignment = match arg {
                    "keyed" => LinkIdAssignment::Keyed,
                    "disjoint" => LinkIdAssignment::DisjointBlocks,
                    _ => return Err(fail(format!("unknown assignment `{arg}`"))),
                };
            }
            "content" => {
                let args = expect(&tokens, 4, line_no)?;
                let node = known_node(&cfg.topology, args[0], line_no)?;
                cfg.contents.push(ContentItem {
                    node,
                    scope: ScopeId(args[1].to_string()),
                    item: args[2].to_string(),
                    bytes: parse_hex(args[3], line_no)?,
                    at,
                });
            }
            "advertise" => {
                if tokens.len() < 3 || tokens.len() > 4 {
                    return Err(fail("`advertise` takes node, scope, [sender]".to_string()));
                }
                let node = known_node(&cfg.topology, tokens[1], line_no)?;
                cfg.actions.push(ScheduledAction {
                    at,
                    kind: ActionKind::Advertise {
                        node,
                        scope: ScopeId(tokens[2].to_string()),
                        sender: tokens.get(3).map(|s| s.to_string()),
                    },
                });
            }
            "subscribe" => {
                if tokens.len() < 4 || tokens.len() > 5 {
                    return Err(fail(
                        "`subscribe` takes node, scope, item, [policy]".to_string(),
                    ));
                }
                let node = known_node(&cfg.topology, tokens[1], line_no)?;
                let policy = match tokens.get(4) {
                    None => SelectPolicy::default(),
                    Some(p) => SelectPolicy::parse(p)
                        .ok_or_else(|| fail(format!("unknown policy `{p}`")))?,
                };
                cfg.actions.push(ScheduledAction {
                    at,
                    kind: ActionKind::Subscribe {
                        node,
                        scope: ScopeId(tokens[2].to_string()),
                        item: tokens[3].to_string(),
                        policy,
                    },
                });
            }
            "coap-resource" => {
                let args = expect(&tokens, 4, line_no)?;
                let node = known_node(&cfg.topology, args[0], line_no)?;
                let host = args[1].to_lowercase();
                let path = args[2].to_string();
                cfg.coap_attachments.push(CoapAttachment {
                    node: node.clone(),
                    host: host.clone(),
                    path: path.clone(),
                });
                cfg.contents.push(ContentItem {
                    node: node.clone(),
                    scope: ScopeId(host.clone()),
                    item: path,
                    bytes: parse_hex(args[3], line_no)?,
                    at,
                });
                if advertised_hosts.insert((node.clone(), host.clone())) {
                    cfg.actions.push(ScheduledAction {
                        at: None,
                        kind: ActionKind::Advertise {
                            node,
                            scope: ScopeId(host),
                            sender: None,
                        },
                    });
                }
            }
            "coap-get" => {
                let args = expect(&tokens, 3, line_no)?;
                let node = known_node(&cfg.topology, args[0], line_no)?;
                cfg.actions.push(ScheduledAction {
                    at,
                    kind: ActionKind::CoapGet {
                        node,
                        host: args[1].to_string(),
                        path: args[2].to_string(),
                    },
                });
            }
            _ => match cfg.topology.apply_stanza(&tokens) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(fail(format!("unknown stanza `{}`", tokens[0])));
                }
                Err(message) => {
                    return Err(ParseError {
                        line: line_no,
                        message,
                    })
                }
            },
        }
    }
    Ok(cfg)
}

/// Reads and parses a scenario file; includes resolve against its directory.
pub fn parse_scenario_file(path: &Path) -> Result<ScenarioConfig, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|e| ParseError {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_scenario(&text, path.parent())
}

fn merge_topology(
    into: &mut TopologySpec,
    from: TopologySpec,
    line: usize,
) -> Result<(), ParseError> {
    for sw in &from.switches {
        if !into.switches.insert(sw.clone()) {
            return Err(ParseError {
                line,
                message: format!("duplicate switch id {sw}"),
            });
        }
    }
    into.core_links.extend(from.core_links);
    for (name, sw) in from.nodes {
        if into.nodes.insert(name.clone(), sw).is_some() {
            return Err(ParseError {
                line,
                message: format!("duplicate node name {name}"),
            });
        }
    }
    into.vgroups.extend(from.vgroups);
    into.aliases.extend(from.aliases);
    if from.controller.is_some() {
        into.controller = from.controller;
    }
    Ok(())
}

fn expect<'a>(tokens: &'a [&'a str], n: usize, line: usize) -> Result<&'a [&'a str], ParseError> {
    if tokens.len() != n + 1 {
        return Err(ParseError {
            line,
            message: format!("`{}` takes {} argument(s)", tokens[0], n),
        });
    }
    Ok(&tokens[1..])
}

fn parse_switch(tokens: &[&str], line: usize) -> Result<bool, ParseError> {
    let arg = expect(tokens, 1, line)?[0];
    match arg {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(ParseError {
            line,
            message: format!("expected on|off, got `{arg}`"),
        }),
    }
}

fn known_node(spec: &TopologySpec, name: &str, line: usize) -> Result<NodeName, ParseError> {
    let node = NodeName(name.to_string());
    if !spec.nodes.contains_key(&node) {
        return Err(ParseError {
            line,
            message: format!("unknown node `{name}`"),
        });
    }
    Ok(node)
}

/// Hex payload bytes; `-` stands for the empty payload.
fn parse_hex(s: &str, line: usize) -> Result<Vec<u8>, ParseError> {
    if s == "-" {
        return Ok(Vec::new());
    }
    if !s.len().is_multiple_of(2) {
        return Err(ParseError {
            line,
            message: format!("odd-length hex `{s}`"),
        });
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| ParseError {
                line,
                message: format!("bad hex `{s}`"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_a_valid_empty_config() {
        let cfg = parse_scenario("", None).unwrap();
        assert!(cfg.topology.switches.is_empty());
        assert!(cfg.actions.is_empty());
        assert!(cfg.mode.is_none());
    }

    #[test]
    fn unknown_node_reference_cites_the_line() {
        let text = "switch s1\nnode a s1\n\nadvertise ghost scope1\n";
        let err = parse_scenario(text, None).unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("unknown node `ghost`"));
    }

    #[test]
    fn full_scenario_parses() {
        let text = "
# demo
switch s1
switch s2
link s1 s2
node n1 s1
node n2 s2
controller s1
mode edge-icn
seed 7
l 2
content n2 scope1 item1 00ff
advertise n2 scope1
subscribe n1 scope1 item1 round-robin @tick=500
coap-resource n2 sensor.example /temp 2a
coap-get n1 sensor.example /temp
";
        let cfg = parse_scenario(text, None).unwrap();
        assert_eq!(cfg.mode, Some(Mode::EdgeIcn));
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.l_param, 2);
        assert_eq!(cfg.contents.len(), 2);
        assert_eq!(cfg.coap_attachments.len(), 1);
        // advertise + subscribe + auto host advertisement + coap-get.
        assert_eq!(cfg.actions.len(), 4);
        assert_eq!(cfg.contents[0].bytes, vec![0x00, 0xff]);
        match &cfg.actions[1] {
            ScheduledAction {
                at: Some(500),
                kind: ActionKind::Subscribe { policy, .. },
            } => {
                assert_eq!(*policy, SelectPolicy::RoundRobin);
            }
            other => panic!("unexpected action {other:?}"),
        }
    }

    #[test]
    fn run_settings_reach_the_run_config() {
        let text = "
switch s1
node a s1
bloom-k 7
hop-limit 16
preseed-fids on
deliver-to-sender off
anycast round-robin
assignment disjoint
";
        let cfg = parse_scenario(text, None).unwrap();
        let run = cfg.to_run_config(Mode::EdgeIcn, 42);
        assert_eq!(run.bloom.hashes_per_link, 7);
        assert_eq!(run.bloom.seed, 42);
        assert_eq!(run.hop_limit, 16);
        assert!(run.preseed_fids);
        assert!(!run.deliver_to_requester);
        assert_eq!(run.strategy, crate::controller::AnycastStrategy::RoundRobin);
        assert_eq!(run.assignment, LinkIdAssignment::DisjointBlocks);
    }

    #[test]
    fn missing_include_file_is_a_line_error() {
        let err =
            parse_scenario("topology nope.topo\n", Some(std::path::Path::new("/tmp"))).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("cannot read"));
    }

    #[test]
    fn coap_resource_advertises_each_host_once() {
        let text = "
switch s1
node n1 s1
coap-resource n1 sensor.example /a 01
coap-resource n1 sensor.example /b 02
coap-resource n1 other.example /a 03
";
        let cfg = parse_scenario(text, None).unwrap();
        let adverts = cfg
            .actions
            .iter()
            .filter(|a| matches!(a.kind, ActionKind::Advertise { .. }))
            .count();
        assert_eq!(adverts, 2);
    }

    #[test]
    fn bad_hex_and_bad_tick_are_line_errors() {
        let err = parse_scenario("switch s1\nnode a s1\ncontent a s i zz\n", None).unwrap_err();
        assert_eq!(err.line, 3);
        let err =
            parse_scenario("switch s1\nnode a s1\nadvertise a s @tick=x\n", None).unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn unknown_stanza_is_rejected() {
        let err = parse_scenario("warp core\n", None).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("unknown stanza"));
    }
}
