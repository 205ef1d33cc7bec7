//! Edge-deployed information-centric networking over a simulated SDN data
//! plane.
//!
//! Names are resolved to in-packet Bloom filters by a controller that knows
//! the topology; switches forward on arbitrary-bitmask matches against the
//! 256-bit address field. All content logic (scope advertisement, lookup
//! tables, subscription, replication, CoAP proxying) lives in the edge
//! nodes. A deterministic event engine drives the whole thing and measures
//! per-hop overhead, with a centralized-rendezvous comparator and matching
//! closed-form models.

pub mod analysis;
pub mod bloom;
pub mod coap;
pub mod conformant;
pub mod controller;
pub mod data_plane;
pub mod engine;
pub mod messages;
pub mod node;
pub mod scenario;
pub mod topology;

pub use bloom::{encode_path, matches, merge, new_link_id, theoretical_fp_rate};
pub use bloom::{BloomParams, ForwardingId, LinkId};
pub use controller::{AnycastStrategy, Controller, Resolution, Resolved};
pub use engine::{measure_l_units, run_scenario, Counters, Mode, RunConfig, RunReport};
pub use messages::{IcnKind, IcnMessage, ScopeId};
pub use node::{EdgeNode, LookupTable, SelectPolicy};
pub use scenario::{parse_scenario, parse_scenario_file, ScenarioConfig};
pub use topology::{LinkIdAssignment, NodeName, SwitchId, Topology, TopologySpec};
