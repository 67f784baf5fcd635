//! The offchain network model: nodes, directed channels with fee policies,
//! routes and hop neighborhoods.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Millisatoshi amount.
pub type Msat = u64;

/// Exact route or channel weight in millisatoshi.
///
/// Fee fields are 32 bit and amounts 64 bit, so a single channel weight stays
/// below 2^77 and any route below 2^109.
pub type Weight = u128;

const MILLION: u128 = 1_000_000;

/// Dense node index, `0..n` in construction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId(pub u64);

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed payment channel with its forwarding policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub id: ChannelId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Flat fee in msat.
    pub base_fee: u32,
    /// msat charged per 1,000,000 msat forwarded.
    pub proportional_rate: u32,
    pub capacity: Msat,
}

impl Channel {
    /// Fee charged for forwarding `amount`: `base_fee + floor(amount * rate / 10^6)`.
    #[inline]
    pub fn weight(&self, amount: Msat) -> Weight {
        channel_weight(self, amount)
    }
}

/// `base_fee + floor(amount * proportional_rate / 10^6)` in exact integer arithmetic.
#[inline]
pub fn channel_weight(channel: &Channel, amount: Msat) -> Weight {
    channel.base_fee as Weight + (amount as Weight * channel.proportional_rate as Weight) / MILLION
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate channel id {0}")]
    DuplicateChannel(ChannelId),
    #[error("channel {channel} references unknown node {node}")]
    DanglingEndpoint { channel: ChannelId, node: NodeId },
    #[error("channel {0} is a self-loop")]
    SelfLoop(ChannelId),
    #[error("duplicate node key {0:?}")]
    DuplicateNode(String),
    #[error("route is not a contiguous path from {source_node} to {target}")]
    InvalidRoute { source_node: NodeId, target: NodeId },
    #[error("unknown channel id {0}")]
    UnknownChannel(ChannelId),
}

/// Immutable directed multigraph of payment channels.
///
/// Channels are stored sorted by id, so channel index order and channel id
/// order coincide. Adjacency lists are sorted the same way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    keys: Vec<String>,
    channels: Vec<Channel>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network from node keys (assigned indices in input order) and
    /// channels referencing those indices.
    pub fn new(keys: Vec<String>, mut channels: Vec<Channel>) -> Result<Self, GraphError> {
        let n = keys.len();
        let mut seen = HashSet::with_capacity(n);
        for key in &keys {
            if !seen.insert(key.as_str()) {
                return Err(GraphError::DuplicateNode(key.clone()));
            }
        }
        for c in &channels {
            for node in [c.src, c.dst] {
                if node.index() >= n {
                    return Err(GraphError::DanglingEndpoint { channel: c.id, node });
                }
            }
            if c.src == c.dst {
                return Err(GraphError::SelfLoop(c.id));
            }
        }
        channels.sort_by_key(|c| c.id);
        if let Some(w) = channels.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(GraphError::DuplicateChannel(w[0].id));
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (idx, c) in channels.iter().enumerate() {
            out_adj[c.src.index()].push(idx);
            in_adj[c.dst.index()].push(idx);
        }
        Ok(Network { keys, channels, out_adj, in_adj })
    }

    /// Builds a network whose node keys are the decimal indices `0..n`.
    pub fn with_node_count(n: usize, channels: Vec<Channel>) -> Result<Self, GraphError> {
        Self::new((0..n).map(|i| i.to_string()).collect(), channels)
    }

    pub fn node_count(&self) -> usize {
        self.keys.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (0..self.keys.len() as u32).map(NodeId)
    }

    pub fn key(&self, node: NodeId) -> &str {
        &self.keys[node.index()]
    }

    pub fn node_by_key(&self, key: &str) -> Option<NodeId> {
        self.keys.iter().position(|k| k == key).map(|i| NodeId(i as u32))
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        node.index() < self.keys.len()
    }

    /// Channels in id order.
    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Channel at a dense index (index order equals id order).
    #[inline]
    pub fn channel_at(&self, idx: usize) -> &Channel {
        &self.channels[idx]
    }

    pub fn channel_index(&self, id: ChannelId) -> Option<usize> {
        self.channels.binary_search_by_key(&id, |c| c.id).ok()
    }

    pub fn channel(&self, id: ChannelId) -> Option<&Channel> {
        self.channel_index(id).map(|i| &self.channels[i])
    }

    /// Indices of outgoing channels of `node`, ascending.
    #[inline]
    pub fn outgoing(&self, node: NodeId) -> &[usize] {
        &self.out_adj[node.index()]
    }

    /// Indices of incoming channels of `node`, ascending.
    #[inline]
    pub fn incoming(&self, node: NodeId) -> &[usize] {
        &self.in_adj[node.index()]
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.out_adj[node.index()].len()
    }

    pub fn in_degree(&self, node: NodeId) -> usize {
        self.in_adj[node.index()].len()
    }

    /// Channel weights at `amount`, indexed like [`Network::channels`].
    pub fn weights_at(&self, amount: Msat) -> Vec<Weight> {
        self.channels.iter().map(|c| c.weight(amount)).collect()
    }
}

/// Which channels count as a hop when computing neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HopDirection {
    /// Follow outgoing channels only.
    #[default]
    Outgoing,
    /// Follow channels in either direction.
    Undirected,
}

/// Nodes other than `center` within `radius` hops of it.
pub fn neighborhood(network: &Network, center: NodeId, radius: usize) -> BTreeSet<NodeId> {
    neighborhood_with(network, center, radius, HopDirection::Outgoing)
}

pub fn neighborhood_with(
    network: &Network,
    center: NodeId,
    radius: usize,
    direction: HopDirection,
) -> BTreeSet<NodeId> {
    let n = network.node_count();
    let mut depth = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut found = BTreeSet::new();
    depth[center.index()] = 0;
    queue.push_back(center);
    while let Some(v) = queue.pop_front() {
        let d = depth[v.index()];
        if d == radius {
            continue;
        }
        let mut visit = |u: NodeId| {
            if depth[u.index()] == usize::MAX {
                depth[u.index()] = d + 1;
                found.insert(u);
                queue.push_back(u);
            }
        };
        for &c in network.outgoing(v) {
            visit(network.channel_at(c).dst);
        }
        if direction == HopDirection::Undirected {
            for &c in network.incoming(v) {
                visit(network.channel_at(c).src);
            }
        }
    }
    found
}

/// An ordered list of channels from `source` to `target` with its total fee
/// at the amount it was built for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    pub source: NodeId,
    pub target: NodeId,
    pub channels: Vec<ChannelId>,
    pub weight: Weight,
}

impl Route {
    /// Validates contiguity and computes the weight at `amount`.
    pub fn new(
        network: &Network,
        source: NodeId,
        target: NodeId,
        channels: Vec<ChannelId>,
        amount: Msat,
    ) -> Result<Self, GraphError> {
        for &id in &channels {
            if network.channel(id).is_none() {
                return Err(GraphError::UnknownChannel(id));
            }
        }
        if !validate_route(network, &channels, source, target) {
            return Err(GraphError::InvalidRoute { source_node: source, target });
        }
        let weight = channels.iter().map(|&id| network.channel(id).unwrap().weight(amount)).sum();
        Ok(Route { source, target, channels, weight })
    }

    /// The zero-hop route at `node`.
    pub fn empty(node: NodeId) -> Self {
        Route { source: node, target: node, channels: Vec::new(), weight: 0 }
    }

    /// Builds a route from channel indices that are already known to be contiguous.
    pub(crate) fn from_indices(
        network: &Network,
        source: NodeId,
        target: NodeId,
        indices: &[usize],
        weight: Weight,
    ) -> Self {
        Route { source, target, channels: indices.iter().map(|&i| network.channel_at(i).id).collect(), weight }
    }

    pub fn hop_count(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Every node on the route, source first.
    pub fn nodes(&self, network: &Network) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(self.channels.len() + 1);
        nodes.push(self.source);
        for &id in &self.channels {
            nodes.push(network.channel(id).expect("route channel in network").dst);
        }
        nodes
    }

    /// Nodes strictly between source and target.
    pub fn intermediates(&self, network: &Network) -> Vec<NodeId> {
        let nodes = self.nodes(network);
        if nodes.len() <= 2 {
            return Vec::new();
        }
        nodes[1..nodes.len() - 1].to_vec()
    }

    pub fn contains_node(&self, network: &Network, node: NodeId) -> bool {
        self.nodes(network).contains(&node)
    }

    /// True if no node repeats.
    pub fn is_loopless(&self, network: &Network) -> bool {
        let nodes = self.nodes(network);
        let mut seen = HashSet::with_capacity(nodes.len());
        nodes.into_iter().all(|v| seen.insert(v))
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(&self, other: &Route) -> Option<Route> {
        if self.target != other.source {
            return None;
        }
        let mut channels = self.channels.clone();
        channels.extend_from_slice(&other.channels);
        Some(Route { source: self.source, target: other.target, channels, weight: self.weight + other.weight })
    }

    /// Ordering key: weight first, then channel id sequence.
    pub fn sort_key(&self) -> (Weight, &[ChannelId]) {
        (self.weight, &self.channels)
    }
}

/// True iff `channels` form a contiguous walk from `source` to `target`.
/// The empty list is valid exactly when `source == target`.
pub fn validate_route(network: &Network, channels: &[ChannelId], source: NodeId, target: NodeId) -> bool {
    let mut at = source;
    for &id in channels {
        match network.channel(id) {
            Some(c) if c.src == at => at = c.dst,
            _ => return false,
        }
    }
    at == target
}

/// Sum of channel weights at `amount`.
pub fn route_weight(network: &Network, route: &Route, amount: Msat) -> Result<Weight, GraphError> {
    if !validate_route(network, &route.channels, route.source, route.target) {
        return Err(GraphError::InvalidRoute { source_node: route.source, target: route.target });
    }
    Ok(route.channels.iter().map(|&id| network.channel(id).unwrap().weight(amount)).sum())
}
