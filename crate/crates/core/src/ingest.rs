//! Reader for `lncli describegraph` JSON snapshots.
//!
//! Each listed edge yields up to two directed channels, one per side whose
//! policy is present and not disabled. Directed channels get ids
//! `2 * ordinal + side`, where `ordinal` counts edges that produced at least
//! one channel and `side` is 0 for node1→node2 and 1 for node2→node1.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Channel, ChannelId, GraphError, Network, NodeId};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed snapshot at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("edge {channel_id}: {field} = {value} is invalid ({reason})")]
    Validation { channel_id: String, field: &'static str, value: String, reason: &'static str },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("network cannot be written as a snapshot: {0}")]
    NotSnapshotShaped(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for IngestError {
    fn from(e: serde_json::Error) -> Self {
        IngestError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// lnd prints 64-bit integers as strings; older dumps and hand-written
/// fixtures use plain numbers.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Numeric {
    Int(i64),
    Unsigned(u64),
    Text(String),
}

impl Numeric {
    fn parse(&self) -> Option<i128> {
        match self {
            Numeric::Int(v) => Some(*v as i128),
            Numeric::Unsigned(v) => Some(*v as i128),
            Numeric::Text(s) => s.trim().parse().ok(),
        }
    }

    fn raw(&self) -> String {
        match self {
            Numeric::Int(v) => v.to_string(),
            Numeric::Unsigned(v) => v.to_string(),
            Numeric::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawGraph {
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    edges: Vec<RawEdge>,
}

#[derive(Debug, Deserialize)]
struct RawNode {
    pub_key: String,
}

#[derive(Debug, Deserialize)]
struct RawEdge {
    channel_id: Numeric,
    node1_pub: String,
    node2_pub: String,
    capacity: Numeric,
    #[serde(default)]
    node1_policy: Option<RawPolicy>,
    #[serde(default)]
    node2_policy: Option<RawPolicy>,
}

#[derive(Debug, Deserialize)]
struct RawPolicy {
    #[serde(default)]
    fee_base_msat: Option<Numeric>,
    #[serde(default)]
    fee_rate_milli_msat: Option<Numeric>,
    #[serde(default)]
    disabled: bool,
}

/// One side's routing policy as read from a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotEdgePolicy {
    pub fee_base_msat: u32,
    pub fee_rate_milli_msat: u32,
    pub disabled: bool,
    pub present: bool,
}

impl SnapshotEdgePolicy {
    fn emits_channel(&self) -> bool {
        self.present && !self.disabled
    }
}

fn validate_u32(channel_id: &Numeric, field: &'static str, value: Option<&Numeric>) -> Result<u32, IngestError> {
    let Some(value) = value else { return Ok(0) };
    let fail = |reason| IngestError::Validation { channel_id: channel_id.raw(), field, value: value.raw(), reason };
    let v = value.parse().ok_or_else(|| fail("not an integer"))?;
    if v < 0 {
        return Err(fail("negative"));
    }
    u32::try_from(v).map_err(|_| fail("exceeds 32 bits"))
}

fn policy(channel_id: &Numeric, raw: &Option<RawPolicy>) -> Result<SnapshotEdgePolicy, IngestError> {
    match raw {
        None => Ok(SnapshotEdgePolicy { fee_base_msat: 0, fee_rate_milli_msat: 0, disabled: false, present: false }),
        Some(p) => Ok(SnapshotEdgePolicy {
            fee_base_msat: validate_u32(channel_id, "fee_base_msat", p.fee_base_msat.as_ref())?,
            fee_rate_milli_msat: validate_u32(channel_id, "fee_rate_milli_msat", p.fee_rate_milli_msat.as_ref())?,
            disabled: p.disabled,
            present: true,
        }),
    }
}

/// Parses a snapshot document into a [`Network`].
pub fn parse_describegraph(bytes: &[u8]) -> Result<Network, IngestError> {
    let raw: RawGraph = serde_json::from_slice(bytes)?;
    let mut keys: Vec<String> = Vec::new();
    let mut index: HashMap<String, NodeId> = HashMap::new();
    let mut intern = |key: &str, keys: &mut Vec<String>| -> NodeId {
        *index.entry(key.to_string()).or_insert_with(|| {
            keys.push(key.to_string());
            NodeId(keys.len() as u32 - 1)
        })
    };
    for node in &raw.nodes {
        intern(&node.pub_key, &mut keys);
    }
    let mut channels = Vec::new();
    let mut ordinal: u64 = 0;
    for edge in &raw.edges {
        let capacity_sat = edge.capacity.parse().ok_or_else(|| IngestError::Validation {
            channel_id: edge.channel_id.raw(),
            field: "capacity",
            value: edge.capacity.raw(),
            reason: "not an integer",
        })?;
        let capacity = u64::try_from(capacity_sat).ok().and_then(|sat| sat.checked_mul(1000)).ok_or_else(|| {
            IngestError::Validation {
                channel_id: edge.channel_id.raw(),
                field: "capacity",
                value: edge.capacity.raw(),
                reason: "negative or out of range",
            }
        })?;
        let sides = [policy(&edge.channel_id, &edge.node1_policy)?, policy(&edge.channel_id, &edge.node2_policy)?];
        let n1 = intern(&edge.node1_pub, &mut keys);
        let n2 = intern(&edge.node2_pub, &mut keys);
        if !sides.iter().any(SnapshotEdgePolicy::emits_channel) {
            continue;
        }
        for (side, p) in sides.iter().enumerate() {
            if !p.emits_channel() {
                continue;
            }
            let (src, dst) = if side == 0 { (n1, n2) } else { (n2, n1) };
            channels.push(Channel {
                id: ChannelId(2 * ordinal + side as u64),
                src,
                dst,
                base_fee: p.fee_base_msat,
                proportional_rate: p.fee_rate_milli_msat,
                capacity,
            });
        }
        ordinal += 1;
    }
    Ok(Network::new(keys, channels)?)
}

#[derive(Serialize)]
struct OutGraph<'a> {
    nodes: Vec<OutNode<'a>>,
    edges: Vec<OutEdge<'a>>,
}

#[derive(Serialize)]
struct OutNode<'a> {
    pub_key: &'a str,
}

#[derive(Serialize)]
struct OutEdge<'a> {
    channel_id: String,
    node1_pub: &'a str,
    node2_pub: &'a str,
    capacity: String,
    node1_policy: Option<OutPolicy>,
    node2_policy: Option<OutPolicy>,
}

#[derive(Serialize)]
struct OutPolicy {
    fee_base_msat: String,
    fee_rate_milli_msat: String,
    disabled: bool,
}

/// Writes a network that follows the snapshot id scheme back out as a
/// snapshot document. Parsing the output reproduces the network exactly.
pub fn to_describegraph(network: &Network) -> Result<String, IngestError> {
    let shaped = |msg: String| IngestError::NotSnapshotShaped(msg);
    let mut edges: Vec<OutEdge> = Vec::new();
    let channels = network.channels();
    let mut i = 0;
    while i < channels.len() {
        let ordinal = channels[i].id.0 / 2;
        if ordinal != edges.len() as u64 {
            return Err(shaped(format!("channel {} breaks the dense ordinal sequence", channels[i].id)));
        }
        let mut sides: [Option<&Channel>; 2] = [None, None];
        while i < channels.len() && channels[i].id.0 / 2 == ordinal {
            sides[(channels[i].id.0 % 2) as usize] = Some(&channels[i]);
            i += 1;
        }
        let (n1, n2, capacity) = match sides {
            [Some(a), Some(b)] => {
                if a.src != b.dst || a.dst != b.src || a.capacity != b.capacity {
                    return Err(shaped(format!("channels {} and {} are not two sides of one edge", a.id, b.id)));
                }
                (a.src, a.dst, a.capacity)
            }
            [Some(a), None] => (a.src, a.dst, a.capacity),
            [None, Some(b)] => (b.dst, b.src, b.capacity),
            [None, None] => unreachable!(),
        };
        if capacity % 1000 != 0 {
            return Err(shaped(format!("capacity {capacity} msat is not a whole satoshi amount")));
        }
        let out_policy = |c: Option<&Channel>| {
            c.map(|c| OutPolicy {
                fee_base_msat: c.base_fee.to_string(),
                fee_rate_milli_msat: c.proportional_rate.to_string(),
                disabled: false,
            })
        };
        edges.push(OutEdge {
            channel_id: ordinal.to_string(),
            node1_pub: network.key(n1),
            node2_pub: network.key(n2),
            capacity: (capacity / 1000).to_string(),
            node1_policy: out_policy(sides[0]),
            node2_policy: out_policy(sides[1]),
        });
    }
    let nodes = network.nodes().map(|v| OutNode { pub_key: network.key(v) }).collect();
    Ok(serde_json::to_string_pretty(&OutGraph { nodes, edges }).expect("serializable"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(node1_disabled: bool) -> String {
        format!(
            r#"{{
  "nodes": [ {{"pub_key": "aa", "alias": "A"}}, {{"pub_key": "bb"}} ],
  "edges": [
    {{
      "channel_id": "659379322247708673",
      "chan_point": "x:0",
      "node1_pub": "aa",
      "node2_pub": "bb",
      "capacity": "100000",
      "node1_policy": {{"time_lock_delta": 40, "min_htlc": "1000", "fee_base_msat": "1000", "fee_rate_milli_msat": "1", "disabled": {node1_disabled}}},
      "node2_policy": {{"fee_base_msat": 0, "fee_rate_milli_msat": 250, "disabled": false}}
    }}
  ]
}}"#
        )
    }

    #[test]
    fn both_sides_enabled() {
        let net = parse_describegraph(fixture(false).as_bytes()).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.channel_count(), 2);
        let c = net.channel(ChannelId(0)).unwrap();
        assert_eq!((c.src, c.dst), (NodeId(0), NodeId(1)));
        assert_eq!(c.capacity, 100_000_000);
        assert_eq!(c.weight(1_000_000), 1001);
        assert_eq!(net.channel(ChannelId(1)).unwrap().weight(1_000_000), 250);
    }

    #[test]
    fn disabled_side_is_dropped() {
        let net = parse_describegraph(fixture(true).as_bytes()).unwrap();
        assert_eq!(net.channel_count(), 1);
        let c = &net.channels()[0];
        assert_eq!((c.src, c.dst), (NodeId(1), NodeId(0)));
    }

    #[test]
    fn missing_policies_and_unlisted_nodes() {
        let doc = r#"{"nodes": [{"pub_key": "a"}], "edges": [
            {"channel_id": 1, "node1_pub": "a", "node2_pub": "b", "capacity": 5, "node1_policy": null},
            {"channel_id": 2, "node1_pub": "c", "node2_pub": "a", "capacity": 7,
             "node2_policy": {"fee_base_msat": "3", "fee_rate_milli_msat": "0"}}
        ]}"#;
        let net = parse_describegraph(doc.as_bytes()).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.key(NodeId(1)), "b");
        assert_eq!(net.key(NodeId(2)), "c");
        assert_eq!(net.channel_count(), 1);
        let c = &net.channels()[0];
        // the first edge produced nothing, so this edge has ordinal 0
        assert_eq!(c.id, ChannelId(1));
        assert_eq!((c.src, c.dst, c.capacity), (NodeId(0), NodeId(2), 7000));
    }

    #[test]
    fn negative_fee_is_a_validation_error() {
        let doc = fixture(false).replace("\"fee_base_msat\": 0", "\"fee_base_msat\": -4");
        let err = parse_describegraph(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::Validation { field: "fee_base_msat", reason: "negative", .. }));
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = parse_describegraph(b"{\n  \"nodes\": [,]\n}").unwrap_err();
        match err {
            IngestError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_capacity_edges_are_kept() {
        let doc = fixture(false).replace("\"capacity\": \"100000\"", "\"capacity\": \"0\"");
        assert_eq!(parse_describegraph(doc.as_bytes()).unwrap().channel_count(), 2);
    }

    #[test]
    fn reserialized_snapshot_parses_identically() {
        let net = parse_describegraph(fixture(true).as_bytes()).unwrap();
        let text = to_describegraph(&net).unwrap();
        assert_eq!(parse_describegraph(text.as_bytes()).unwrap(), net);
    }
}
