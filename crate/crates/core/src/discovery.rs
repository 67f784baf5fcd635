//! Route discovery: selfish trampoline nodes, partial (cache-only) nodes,
//! altruistic oracles, and the wallet strategy that queries them.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::availability::AvailabilityModel;
use crate::graph::{neighborhood_with, HopDirection, Network, NodeId, Route};
use crate::pathing::WeightedGraph;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum DiscoveryError {
    #[error("server fraction {0} outside [0, 1]")]
    Fraction(f64),
    #[error("asked for {requested} servers but the network has {available} nodes")]
    TooMany { requested: usize, available: usize },
    #[error("node {0} is not in the network")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerKind {
    /// Knows the topology, reveals only routes through itself.
    Trampoline,
    /// Knows only cached routes from itself to a few targets.
    Partial { cache: BTreeMap<NodeId, Route> },
    /// Returns the globally optimal route.
    Altruistic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerRole {
    pub node: NodeId,
    pub kind: ServerKind,
}

impl ServerRole {
    pub fn trampoline(node: NodeId) -> Self {
        ServerRole { node, kind: ServerKind::Trampoline }
    }

    pub fn altruistic(node: NodeId) -> Self {
        ServerRole { node, kind: ServerKind::Altruistic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ServerStrategy {
    /// `round(fraction · n)` nodes chosen uniformly at random.
    Fraction(f64),
    /// The `k` nodes of highest total degree, ties to the lower index.
    TopDegree(usize),
    Explicit(Vec<NodeId>),
}

/// Nodes ranked by a seeded random key. Taking prefixes of this ranking
/// gives nested uniform samples.
pub fn random_ranking(network: &Network, seed: u64) -> Vec<NodeId> {
    let mut nodes: Vec<NodeId> = network.nodes().collect();
    nodes.sort_by_key(|v| (seed::keyed(seed, v.0 as u64), *v));
    nodes
}

/// Chooses trampoline nodes. The returned roles are sorted by node.
pub fn assign_servers(
    network: &Network,
    strategy: &ServerStrategy,
    seed: u64,
) -> Result<Vec<ServerRole>, DiscoveryError> {
    let n = network.node_count();
    let mut nodes: Vec<NodeId> = match strategy {
        ServerStrategy::Fraction(f) => {
            if !(0.0..=1.0).contains(f) {
                return Err(DiscoveryError::Fraction(*f));
            }
            let count = (f * n as f64).round() as usize;
            random_ranking(network, seed).into_iter().take(count).collect()
        }
        ServerStrategy::TopDegree(k) => {
            if *k > n {
                return Err(DiscoveryError::TooMany { requested: *k, available: n });
            }
            let mut by_degree: Vec<NodeId> = network.nodes().collect();
            by_degree.sort_by_key(|&v| (std::cmp::Reverse(network.out_degree(v) + network.in_degree(v)), v));
            by_degree.truncate(*k);
            by_degree
        }
        ServerStrategy::Explicit(list) => {
            if let Some(&bad) = list.iter().find(|v| !network.contains_node(**v)) {
                return Err(DiscoveryError::UnknownNode(bad));
            }
            list.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
        }
    };
    nodes.sort();
    Ok(nodes.into_iter().map(ServerRole::trampoline).collect())
}

/// Builds partial nodes, each caching shortest routes to `cache_size` other
/// nodes chosen uniformly (unreachable picks are left out of the cache).
pub fn assign_partial_nodes(
    graph: &WeightedGraph<'_>,
    nodes: &[NodeId],
    cache_size: usize,
    seed: u64,
) -> Vec<ServerRole> {
    let network = graph.network();
    let n = network.node_count();
    nodes
        .iter()
        .map(|&pn| {
            let mut rng = seed::rng(seed::derive(seed, "partial-cache", &[pn.0 as u64]));
            let others = n.saturating_sub(1);
            let picks = sample(&mut rng, others, cache_size.min(others));
            let tree = graph.single_source(pn);
            let cache = picks
                .into_iter()
                .map(|i| NodeId(if i >= pn.index() { i + 1 } else { i } as u32))
                .filter_map(|t| tree.route(network, t).map(|r| (t, r)))
                .collect();
            ServerRole { node: pn, kind: ServerKind::Partial { cache } }
        })
        .collect()
}

fn node_sequence(network: &Network, route: &Route) -> Vec<NodeId> {
    route.nodes(network)
}

/// Joins `head` (ending at the server) with each tail and keeps the `k`
/// best loopless results.
fn join_legs(network: &Network, heads: &[Route], tails: &[Route], k: usize) -> Vec<Route> {
    let tail_nodes: Vec<HashSet<NodeId>> =
        tails.iter().map(|t| node_sequence(network, t).into_iter().skip(1).collect()).collect();
    let mut joined = Vec::new();
    for head in heads {
        let head_nodes = node_sequence(network, head);
        for (tail, after) in tails.iter().zip(&tail_nodes) {
            if head_nodes.iter().any(|v| after.contains(v)) {
                continue;
            }
            joined.push(head.concat(tail).expect("legs meet at the server"));
        }
    }
    joined.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    joined.truncate(k);
    joined
}

/// Up to `k` loopless routes from `s` to `t` through `tn`, combining the
/// `k` best legs on each side.
pub fn tn_answer(graph: &WeightedGraph<'_>, tn: NodeId, s: NodeId, t: NodeId, k: usize) -> Vec<Route> {
    let heads = graph.k_shortest(s, tn, k);
    if heads.is_empty() {
        return Vec::new();
    }
    let tails = graph.k_shortest(tn, t, k);
    join_legs(graph.network(), &heads, &tails, k)
}

/// A partial node answers only for cached targets: the best legs from `s`
/// to itself joined with its cached route.
pub fn pn_answer(graph: &WeightedGraph<'_>, pn: &ServerRole, s: NodeId, t: NodeId, k: usize) -> Vec<Route> {
    let ServerKind::Partial { cache } = &pn.kind else {
        return Vec::new();
    };
    let Some(cached) = cache.get(&t) else {
        return Vec::new();
    };
    let heads = graph.k_shortest(s, pn.node, k);
    join_legs(graph.network(), &heads, std::slice::from_ref(cached), k)
}

pub fn altruistic_answer(graph: &WeightedGraph<'_>, s: NodeId, t: NodeId) -> Option<Route> {
    graph.shortest_route(s, t)
}

/// The routes a server reveals for `(s, t)`, best first.
pub fn server_answer(graph: &WeightedGraph<'_>, server: &ServerRole, s: NodeId, t: NodeId, k: usize) -> Vec<Route> {
    match server.kind {
        ServerKind::Trampoline => tn_answer(graph, server.node, s, t, k),
        ServerKind::Partial { .. } => pn_answer(graph, server, s, t, k),
        ServerKind::Altruistic => altruistic_answer(graph, s, t).into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalletPolicy {
    /// Hop radius in which the wallet looks for servers.
    pub radius: usize,
    /// Query budget `q`.
    pub max_queries: usize,
    pub routes_per_server: usize,
    pub order_seed: u64,
    #[serde(default)]
    pub direction: HopDirection,
}

impl WalletPolicy {
    pub fn new(radius: usize, max_queries: usize) -> Self {
        WalletPolicy {
            radius,
            max_queries: max_queries.max(1),
            routes_per_server: 5,
            order_seed: 0,
            direction: HopDirection::Outgoing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscoveryMode {
    /// Query up to `q` servers, then take the cheapest available candidate.
    Efficiency,
    /// Query servers one at a time and stop at the first available candidate.
    Effectiveness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveryOutcome {
    pub route: Option<Route>,
    pub queries_issued: usize,
    /// Candidate routes received from servers.
    pub candidates_offered: usize,
    /// Candidate routes tested for availability.
    pub candidates_tried: usize,
    /// Servers in query order.
    pub queried: Vec<NodeId>,
    /// Third parties that learned of the payment (endpoints excluded).
    pub aware_nodes: BTreeSet<NodeId>,
    pub success: bool,
    /// No server was within the search radius.
    pub no_server: bool,
}

/// Indices into `servers` within the wallet's radius, in the wallet's query
/// order. The order depends on the source but never on the target.
pub fn server_order(network: &Network, servers: &[ServerRole], policy: &WalletPolicy, s: NodeId) -> Vec<usize> {
    let visible = neighborhood_with(network, s, policy.radius, policy.direction);
    let wallet_seed = seed::keyed(policy.order_seed, s.0 as u64);
    let mut eligible: Vec<(u64, NodeId, usize)> = servers
        .iter()
        .enumerate()
        .filter(|(_, r)| visible.contains(&r.node))
        .map(|(i, r)| (seed::keyed(wallet_seed, r.node.0 as u64), r.node, i))
        .collect();
    eligible.sort();
    eligible.into_iter().map(|(_, _, i)| i).collect()
}

/// Runs one discovery episode for a payment from `s` to `t`.
#[allow(clippy::too_many_arguments)]
pub fn discover_route(
    graph: &WeightedGraph<'_>,
    servers: &[ServerRole],
    policy: &WalletPolicy,
    s: NodeId,
    t: NodeId,
    availability: &AvailabilityModel,
    episode: u64,
    mode: DiscoveryMode,
) -> DiscoveryOutcome {
    let k = policy.routes_per_server.max(1);
    discover_route_with(graph, servers, policy, s, t, availability, episode, mode, &mut |server| {
        server_answer(graph, server, s, t, k)
    })
}

/// [`discover_route`] with server answers supplied by `answer`, which lets
/// callers memoize answers across episodes that share `(s, t)`.
#[allow(clippy::too_many_arguments)]
pub fn discover_route_with(
    graph: &WeightedGraph<'_>,
    servers: &[ServerRole],
    policy: &WalletPolicy,
    s: NodeId,
    t: NodeId,
    availability: &AvailabilityModel,
    episode: u64,
    mode: DiscoveryMode,
    answer: &mut dyn FnMut(&ServerRole) -> Vec<Route>,
) -> DiscoveryOutcome {
    let network = graph.network();
    let amount = graph.amount();
    let order = server_order(network, servers, policy, s);
    let mut outcome = DiscoveryOutcome {
        route: None,
        queries_issued: 0,
        candidates_offered: 0,
        candidates_tried: 0,
        queried: Vec::new(),
        aware_nodes: BTreeSet::new(),
        success: false,
        no_server: order.is_empty(),
    };
    let mut state = availability.episode(episode);
    let mut best: Option<Route> = None;

    'servers: for &idx in order.iter().take(policy.max_queries.max(1)) {
        let server = &servers[idx];
        outcome.queries_issued += 1;
        outcome.queried.push(server.node);
        let answers = answer(server);
        outcome.candidates_offered += answers.len();
        for route in answers {
            outcome.candidates_tried += 1;
            if !state.route_available(network, &route, amount) {
                continue;
            }
            match mode {
                DiscoveryMode::Effectiveness => {
                    best = Some(route);
                    break 'servers;
                }
                DiscoveryMode::Efficiency => {
                    if best.as_ref().is_none_or(|b| route.sort_key() < b.sort_key()) {
                        best = Some(route);
                    }
                }
            }
        }
    }

    outcome.aware_nodes.extend(outcome.queried.iter().copied());
    if let Some(route) = &best {
        outcome.aware_nodes.extend(route.intermediates(network));
    }
    outcome.aware_nodes.remove(&s);
    outcome.aware_nodes.remove(&t);
    outcome.success = best.is_some();
    outcome.route = best;
    outcome
}
