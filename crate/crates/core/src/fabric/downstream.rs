//! Control channel from the fabric back toward edge nodes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    QueryResult,
    ConfigUpdate,
}

impl ControlKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlKind::QueryResult => "query_result",
            ControlKind::ConfigUpdate => "config_update",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Node(usize),
    Broadcast,
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::Node(n) => write!(f, "{n}"),
            Destination::Broadcast => f.write_str("*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlMessage {
    pub kind: ControlKind,
    /// Opaque serialized query result or config fragment.
    pub payload: String,
    pub destination: Destination,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("no edge node {0} registered")]
    UnknownDestination(usize),
    #[error("edge node {0} hung up")]
    Disconnected(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ack {
    pub delivered_to: Vec<usize>,
}

/// Per-destination FIFO delivery over bounded queues; a full inbox blocks the sender.
#[derive(Debug)]
pub struct DownstreamRouter {
    capacity: usize,
    inboxes: BTreeMap<usize, SyncSender<ControlMessage>>,
}

impl DownstreamRouter {
    pub fn new(capacity: usize) -> Self {
        DownstreamRouter {
            capacity: capacity.max(1),
            inboxes: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, node: usize) -> Receiver<ControlMessage> {
        let (tx, rx) = sync_channel(self.capacity);
        self.inboxes.insert(node, tx);
        rx
    }

    pub fn registered(&self) -> impl Iterator<Item = usize> + '_ {
        self.inboxes.keys().copied()
    }

    pub fn send_downstream(&self, msg: ControlMessage) -> Result<Ack, RoutingError> {
        let targets: Vec<usize> = match msg.destination {
            Destination::Node(n) if self.inboxes.contains_key(&n) => vec![n],
            Destination::Node(n) => return Err(RoutingError::UnknownDestination(n)),
            Destination::Broadcast => self.inboxes.keys().copied().collect(),
        };
        for &n in &targets {
            self.inboxes[&n].send(msg.clone()).map_err(|_| RoutingError::Disconnected(n))?;
        }
        Ok(Ack { delivered_to: targets })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed control frame: {0}")]
pub struct FrameError(pub String);

/// `<body length>\n<kind> <destination>\n<payload>`
pub fn encode_frame(msg: &ControlMessage) -> Vec<u8> {
    let body = format!("{} {}\n{}", msg.kind.as_str(), msg.destination, msg.payload);
    let mut out = format!("{}\n", body.len()).into_bytes();
    out.extend_from_slice(body.as_bytes());
    out
}

pub fn decode_frames(mut bytes: &[u8]) -> Result<Vec<ControlMessage>, FrameError> {
    let err = |m: &str| FrameError(m.to_string());
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| err("missing length line"))?;
        let len: usize = std::str::from_utf8(&bytes[..nl])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err("bad length"))?;
        let rest = &bytes[nl + 1..];
        if rest.len() < len {
            return Err(err("truncated body"));
        }
        let body = std::str::from_utf8(&rest[..len]).map_err(|_| err("body is not UTF-8"))?;
        let (head, payload) = body.split_once('\n').ok_or_else(|| err("missing header"))?;
        let (kind, dest) = head.split_once(' ').ok_or_else(|| err("bad header"))?;
        let kind = match kind {
            "query_result" => ControlKind::QueryResult,
            "config_update" => ControlKind::ConfigUpdate,
            _ => return Err(err("unknown kind")),
        };
        let destination = match dest {
            "*" => Destination::Broadcast,
            n => Destination::Node(n.parse().map_err(|_| err("bad destination"))?),
        };
        out.push(ControlMessage {
            kind,
            payload: payload.to_string(),
            destination,
        });
        bytes = &rest[len..];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(payload: &str, destination: Destination) -> ControlMessage {
        ControlMessage {
            kind: ControlKind::QueryResult,
            payload: payload.into(),
            destination,
        }
    }

    #[test]
    fn delivers_to_one_node() {
        let mut r = DownstreamRouter::new(4);
        let e1 = r.register(1);
        let e2 = r.register(2);
        let ack = r.send_downstream(msg("x", Destination::Node(1))).unwrap();
        assert_eq!(ack.delivered_to, vec![1]);
        assert_eq!(e1.try_iter().count(), 1);
        assert_eq!(e2.try_iter().count(), 0);
    }

    #[test]
    fn broadcast_fans_out() {
        let mut r = DownstreamRouter::new(4);
        let inboxes: Vec<_> = (0..3).map(|n| r.register(n)).collect();
        r.send_downstream(msg("x", Destination::Broadcast)).unwrap();
        for rx in inboxes {
            assert_eq!(rx.try_iter().count(), 1);
        }
    }

    #[test]
    fn fifo_per_destination() {
        let mut r = DownstreamRouter::new(4);
        let rx = r.register(0);
        r.send_downstream(msg("first", Destination::Node(0))).unwrap();
        r.send_downstream(msg("second", Destination::Node(0))).unwrap();
        let got: Vec<String> = rx.try_iter().map(|m| m.payload).collect();
        assert_eq!(got, vec!["first", "second"]);
    }

    #[test]
    fn unknown_destination() {
        let r = DownstreamRouter::new(1);
        assert_eq!(
            r.send_downstream(msg("x", Destination::Node(9))),
            Err(RoutingError::UnknownDestination(9))
        );
    }

    #[test]
    fn frames_round_trip() {
        let msgs = vec![
            msg("{\"a\":1}\nsecond line", Destination::Node(3)),
            ControlMessage {
                kind: ControlKind::ConfigUpdate,
                payload: "lateness_bound_s=10".into(),
                destination: Destination::Broadcast,
            },
        ];
        let bytes: Vec<u8> = msgs.iter().flat_map(encode_frame).collect();
        assert_eq!(decode_frames(&bytes).unwrap(), msgs);
        assert!(decode_frames(&bytes[..bytes.len() - 1]).is_err());
    }
}
