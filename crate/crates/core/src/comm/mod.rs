//! Messages, the MOP/1 wire codec and TCP transport.

mod codec;
mod net;

use std::fmt;
use std::io;

use thiserror::Error;

use crate::value::ValueTree;

pub use codec::{
    decode_message, encode_message, read_frame, write_frame, DecodeError, EncodeError, HEADER_LEN,
    MAGIC, MAX_BODY_LEN,
};
pub use net::{
    listen, notify, solicit, Channel, Listener, Sender, TraceDir, TraceFn, DEFAULT_TIMEOUT,
};

/// Name reported for the protocol every port speaks.
pub const PROTOCOL_NAME: &str = "MOP/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub resource: String,
    pub operation: String,
    pub payload: ValueTree,
    pub fault: Option<String>,
}

impl Message {
    pub fn new(operation: impl Into<String>, payload: ValueTree) -> Self {
        Message {
            resource: "/".into(),
            operation: operation.into(),
            payload,
            fault: None,
        }
    }

    pub fn fault(operation: impl Into<String>, name: impl Into<String>, detail: ValueTree) -> Self {
        Message {
            fault: Some(name.into()),
            ..Message::new(operation, detail)
        }
    }
}

/// One `--trace` line: `DIR op=NAME [fault=NAME] bytes=N`.
pub fn trace_line(dir: TraceDir, msg: &Message, bytes: usize) -> String {
    match &msg.fault {
        Some(f) => format!("{dir} op={} fault={f} bytes={bytes}", msg.operation),
        None => format!("{dir} op={} bytes={bytes}", msg.operation),
    }
}

/// A `socket://host:port` address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub host: String,
    pub port: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid location `{location}`: {reason}")]
pub struct LocationError {
    pub location: String,
    pub reason: &'static str,
}

impl Location {
    pub fn parse(s: &str) -> Result<Location, LocationError> {
        let fail = |reason| LocationError {
            location: s.to_owned(),
            reason,
        };
        let rest = s
            .strip_prefix("socket://")
            .ok_or_else(|| fail("expected scheme `socket://`"))?;
        let rest = rest.strip_suffix('/').unwrap_or(rest);
        let (host, port) = rest.rsplit_once(':').ok_or_else(|| fail("missing port"))?;
        let host = host.trim_start_matches('[').trim_end_matches(']');
        if host.is_empty() {
            return Err(fail("missing host"));
        }
        let port = port.parse().map_err(|_| fail("port is not a number in 0..=65535"))?;
        Ok(Location {
            host: host.to_owned(),
            port,
        })
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.host.contains(':') {
            write!(f, "socket://[{}]:{}", self.host, self.port)
        } else {
            write!(f, "socket://{}:{}", self.host, self.port)
        }
    }
}

#[derive(Debug, Error)]
pub enum CommError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("cannot connect to {location}: {source}")]
    Connect { location: Location, source: io::Error },
    #[error("no reply from {location} within {millis} ms")]
    Timeout { location: Location, millis: u128 },
    #[error("cannot bind {location}: {source}")]
    Bind { location: Location, source: io::Error },
    #[error("connection closed before a reply arrived")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CommError {
    /// Fault name surfaced to programs.
    pub fn fault_name(&self) -> &'static str {
        match self {
            CommError::Encode(_) => "EncodeError",
            CommError::Decode(_) => "DecodeError",
            CommError::Connect { .. } => "ConnectError",
            CommError::Timeout { .. } => "TimeoutError",
            CommError::Bind { .. } => "BindError",
            CommError::Closed => "ChannelClosed",
            CommError::Io(_) => "IOError",
        }
    }
}
