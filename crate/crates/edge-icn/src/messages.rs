//! Message bodies exchanged between edge nodes, the resolution service and
//! the rendezvous comparator, with byte encodings for the payload fields
//! that travel inside packets.

use std::fmt;

use thiserror::Error;

use crate::bloom::{Bits256, ForwardingId};
use crate::coap::CoapRequest;

/// Named grouping of information items, e.g. an IP address or URI host.
/// Compared byte-exact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScopeId(pub String);

impl fmt::Display for ScopeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcnKind {
    Advertisement,
    Subscription,
    Response,
}

/// Application message carried in Bloom-routed packets.
///
/// The sender of an advertisement may be a group name; subscriptions always
/// carry the concrete sender so responses can be attributed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcnMessage {
    pub kind: IcnKind,
    pub scope: ScopeId,
    pub item: Option<String>,
    pub sender: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("payload truncated")]
    Truncated,

    #[error("bad utf-8 in payload string")]
    BadString,

    #[error("unknown tag {0}")]
    UnknownTag(u8),
}

/// Subscription payload: the reverse forwarding identifier the responder
/// should use, plus any proxied legacy request headers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriptionPayload {
    pub reverse: ForwardingId,
    pub coap: Option<CoapRequest>,
}

impl SubscriptionPayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40);
        out.extend_from_slice(&self.reverse.bits().to_bytes());
        match &self.coap {
            None => out.push(0),
            Some(req) => {
                out.push(1);
                out.push(req.method.tag());
                out.push(u8::from(req.confirmable));
                out.push(u8::from(req.observe));
                out.extend_from_slice(&req.message_id.to_be_bytes());
                put_string(&mut out, &req.uri_host);
                put_string(&mut out, &req.uri_path);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SubscriptionPayload, CodecError> {
        if bytes.len() < 33 {
            return Err(CodecError::Truncated);
        }
        let fid_bytes: [u8; 32] = bytes[..32].try_into().unwrap();
        let reverse = ForwardingId::from_bits(Bits256::from_bytes(&fid_bytes));
        let mut rest = &bytes[32..];
        let has_coap = take_u8(&mut rest)?;
        let coap = match has_coap {
            0 => None,
            1 => {
                let method = crate::coap::CoapMethod::from_tag(take_u8(&mut rest)?)
                    .ok_or(CodecError::UnknownTag(255))?;
                let confirmable = take_u8(&mut rest)? != 0;
                let observe = take_u8(&mut rest)? != 0;
                let message_id = take_u16(&mut rest)?;
                let uri_host = take_string(&mut rest)?;
                let uri_path = take_string(&mut rest)?;
                Some(CoapRequest {
                    method,
                    uri_host,
                    uri_path,
                    message_id,
                    confirmable,
                    observe,
                })
            }
            tag => return Err(CodecError::UnknownTag(tag)),
        };
        Ok(SubscriptionPayload { reverse, coap })
    }
}

/// Response payload: content bytes plus a response code for proxied
/// legacy requests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponsePayload {
    pub code: Option<String>,
    pub body: Vec<u8>,
}

impl ResponsePayload {
    pub fn plain(body: Vec<u8>) -> ResponsePayload {
        ResponsePayload { code: None, body }
    }

    pub fn coap(code: &str, body: Vec<u8>) -> ResponsePayload {
        ResponsePayload {
            code: Some(code.to_string()),
            body,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.body.len() + 8);
        match &self.code {
            None => out.push(0),
            Some(code) => {
                out.push(1);
                put_string(&mut out, code);
            }
        }
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ResponsePayload, CodecError> {
        let mut rest = bytes;
        let code = match take_u8(&mut rest)? {
            0 => None,
            1 => Some(take_string(&mut rest)?),
            tag => return Err(CodecError::UnknownTag(tag)),
        };
        Ok(ResponsePayload {
            code,
            body: rest.to_vec(),
        })
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    let len = u16::try_from(s.len()).expect("string too long for payload");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn take_u8(rest: &mut &[u8]) -> Result<u8, CodecError> {
    let (&first, tail) = rest.split_first().ok_or(CodecError::Truncated)?;
    *rest = tail;
    Ok(first)
}

fn take_u16(rest: &mut &[u8]) -> Result<u16, CodecError> {
    if rest.len() < 2 {
        return Err(CodecError::Truncated);
    }
    let value = u16::from_be_bytes(rest[..2].try_into().unwrap());
    *rest = &rest[2..];
    Ok(value)
}

fn take_string(rest: &mut &[u8]) -> Result<String, CodecError> {
    let len = take_u16(rest)? as usize;
    if rest.len() < len {
        return Err(CodecError::Truncated);
    }
    let s = std::str::from_utf8(&rest[..len]).map_err(|_| CodecError::BadString)?;
    *rest = &rest[len..];
    Ok(s.to_string())
}
