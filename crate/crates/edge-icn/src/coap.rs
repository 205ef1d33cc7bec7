//! CoAP handling at edge nodes: URI-host to scope mapping and context-based
//! group hosts.
//!
//! CoAP is modeled at the level the gateway needs: methods, URI host and
//! path, message id and confirmable flag. There is no RFC 7252 wire
//! framing, retransmission, or token machinery.

use thiserror::Error;

use crate::messages::ScopeId;

/// Label that opens a context-based URI host, e.g. `all.west.building6`.
pub const CONTEXT_PREFIX: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoapMethod {
    Get,
    Post,
    Put,
    Delete,
}

impl CoapMethod {
    pub fn tag(&self) -> u8 {
        match self {
            CoapMethod::Get => 1,
            CoapMethod::Post => 2,
            CoapMethod::Put => 3,
            CoapMethod::Delete => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<CoapMethod> {
        match tag {
            1 => Some(CoapMethod::Get),
            2 => Some(CoapMethod::Post),
            3 => Some(CoapMethod::Put),
            4 => Some(CoapMethod::Delete),
            _ => None,
        }
    }
}

/// A request as it arrives from an attached legacy client.
///
/// `observe` asks the serving gateway for repeating responses: the pending
/// entry survives each answer and re-fires on every resource update until
/// it expires. Full RFC 7641 option semantics are out of scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoapRequest {
    pub method: CoapMethod,
    pub uri_host: String,
    pub uri_path: String,
    pub message_id: u16,
    pub confirmable: bool,
    pub observe: bool,
}

/// Response handed back to the attached client; `message_id` always echoes
/// the request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoapResponse {
    pub code: String,
    pub message_id: u16,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoapError {
    #[error("empty URI host")]
    EmptyHost,

    #[error("context host needs at least one group label after `{CONTEXT_PREFIX}`")]
    BareContextHost,
}

/// A dotted context host split into its labels. The first label is always
/// `all`; the remaining labels name node groups whose intersection is the
/// target set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextHost {
    pub labels: Vec<String>,
}

impl ContextHost {
    /// Parses `host` as a context host, or returns `None` when it is an
    /// ordinary host. A plain group name is not a context host, so callers
    /// should try the name registries first.
    pub fn parse(host: &str) -> Result<Option<ContextHost>, CoapError> {
        if host.is_empty() {
            return Err(CoapError::EmptyHost);
        }
        let labels: Vec<String> = host.split('.').map(str::to_string).collect();
        if labels[0] != CONTEXT_PREFIX {
            return Ok(None);
        }
        if labels.len() < 2 || labels[1..].iter().any(String::is_empty) {
            return Err(CoapError::BareContextHost);
        }
        Ok(Some(ContextHost { labels }))
    }

    /// The group labels after the leading `all`.
    pub fn groups(&self) -> &[String] {
        &self.labels[1..]
    }
}

/// Maps a URI host to its scope: the identity byte mapping, lowercased.
pub fn map_host_to_scope(uri_host: &str) -> Result<ScopeId, CoapError> {
    if uri_host.is_empty() {
        return Err(CoapError::EmptyHost);
    }
    Ok(ScopeId(uri_host.to_lowercase()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn host_maps_to_identical_scope() {
        assert_eq!(
            map_host_to_scope("sensor1.example").unwrap(),
            ScopeId("sensor1.example".into())
        );
    }

    #[test]
    fn host_mapping_folds_case() {
        assert_eq!(
            map_host_to_scope("Sensor1.EXAMPLE").unwrap(),
            ScopeId("sensor1.example".into())
        );
    }

    #[test]
    fn empty_host_is_rejected() {
        assert_eq!(map_host_to_scope(""), Err(CoapError::EmptyHost));
    }

    #[test]
    fn context_host_parsing() {
        let ctx = ContextHost::parse("all.west.building6").unwrap().unwrap();
        assert_eq!(ctx.groups(), ["west".to_string(), "building6".to_string()]);
        assert_eq!(ContextHost::parse("sensor1.example").unwrap(), None);
        assert_eq!(ContextHost::parse("all"), Err(CoapError::BareContextHost));
        assert_eq!(ContextHost::parse("all."), Err(CoapError::BareContextHost));
    }

    #[test]
    fn method_tags_round_trip() {
        for m in [
            CoapMethod::Get,
            CoapMethod::Post,
            CoapMethod::Put,
            CoapMethod::Delete,
        ] {
            assert_eq!(CoapMethod::from_tag(m.tag()), Some(m));
        }
        assert_eq!(CoapMethod::from_tag(0), None);
    }
}
