//! Synthetic and adversarial topologies, plus the plain edge-list format.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Channel, ChannelId, GraphError, Msat, Network, NodeId};

/// Capacity used by generators unless overridden (effectively unconstrained
/// at the default 10^6 msat payment).
pub const DEFAULT_CAPACITY: Msat = 1_000_000_000;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid generator parameters: {0}")]
    Parameters(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("edge list line {line}: {message}")]
    EdgeList { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn params(msg: impl Into<String>) -> TopologyError {
    TopologyError::Parameters(msg.into())
}

struct ChannelSink {
    channels: Vec<Channel>,
    capacity: Msat,
}

impl ChannelSink {
    fn new(capacity: Msat) -> Self {
        ChannelSink { channels: Vec::new(), capacity }
    }

    fn add(&mut self, src: usize, dst: usize, fee: u32) {
        let id = ChannelId(self.channels.len() as u64);
        self.channels.push(Channel {
            id,
            src: NodeId(src as u32),
            dst: NodeId(dst as u32),
            base_fee: fee,
            proportional_rate: 0,
            capacity: self.capacity,
        });
    }
}

/// Ring of `n` nodes; every node links to its successor and to one uniformly
/// chosen node that is neither itself nor its successor. All fees are 1.
pub fn gen_sparse_ring(n: usize, seed: u64) -> Result<Network, TopologyError> {
    gen_sparse_ring_with_capacity(n, seed, DEFAULT_CAPACITY)
}

pub fn gen_sparse_ring_with_capacity(n: usize, seed: u64, capacity: Msat) -> Result<Network, TopologyError> {
    if n < 3 {
        return Err(params(format!("ring needs at least 3 nodes, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sink = ChannelSink::new(capacity);
    for v in 0..n {
        let succ = (v + 1) % n;
        sink.add(v, succ, 1);
        let (lo, hi) = if v < succ { (v, succ) } else { (succ, v) };
        let mut other = rng.gen_range(0..n - 2);
        if other >= lo {
            other += 1;
        }
        if other >= hi {
            other += 1;
        }
        sink.add(v, other, 1);
    }
    Ok(Network::with_node_count(n, sink.channels)?)
}

/// Preferential attachment: an initial clique on `m_attach + 1` nodes, then
/// each arriving node links to `m_attach` distinct existing nodes chosen with
/// probability proportional to degree. Links are bidirectional with fee 1.
pub fn gen_scale_free(n: usize, m_attach: usize, seed: u64) -> Result<Network, TopologyError> {
    gen_scale_free_with_capacity(n, m_attach, seed, DEFAULT_CAPACITY)
}

pub fn gen_scale_free_with_capacity(
    n: usize,
    m_attach: usize,
    seed: u64,
    capacity: Msat,
) -> Result<Network, TopologyError> {
    if m_attach < 1 || n <= m_attach {
        return Err(params(format!("scale-free needs n > m_attach >= 1, got n={n} m_attach={m_attach}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links: Vec<(usize, usize)> = Vec::new();
    // every link contributes both endpoints, so sampling from this list is
    // sampling proportional to degree
    let mut endpoints: Vec<usize> = Vec::new();
    for a in 0..=m_attach {
        for b in a + 1..=m_attach {
            links.push((a, b));
            endpoints.extend([a, b]);
        }
    }
    for v in m_attach + 1..n {
        let mut chosen = BTreeSet::new();
        while chosen.len() < m_attach {
            chosen.insert(endpoints[rng.gen_range(0..endpoints.len())]);
        }
        for u in chosen {
            links.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut sink = ChannelSink::new(capacity);
    for (a, b) in links {
        sink.add(a, b, 1);
        sink.add(b, a, 1);
    }
    Ok(Network::with_node_count(n, sink.channels)?)
}

/// Complete directed graph with every fee equal to `fee`.
pub fn gen_clique(n: usize, fee: u32) -> Result<Network, TopologyError> {
    if n < 2 {
        return Err(params("clique needs at least 2 nodes"));
    }
    let mut sink = ChannelSink::new(DEFAULT_CAPACITY);
    for a in 0..n {
        for b in 0..n {
            if a != b {
                sink.add(a, b, fee);
            }
        }
    }
    Ok(Network::with_node_count(n, sink.channels)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversarialKind {
    /// Stretch blow-up: `q + 1` trampolines hiding a weight-1 route.
    Lemma1,
    /// Effectiveness: a clique whose first `m` offered routes are unavailable.
    Lemma2,
    /// Leakage: a star of `m` trampolines with sink targets.
    Lemma3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialSpec {
    pub kind: AdversarialKind,
    /// Query budget of the discovery algorithm under attack.
    pub q: usize,
    /// Adversarial magnitude.
    pub m: u64,
}

/// Picks the adversarial target once the wallet's server order is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetChooser {
    /// The outer node attached to the first trampoline missing from the
    /// first `budget` queries.
    UnqueriedTrampoline {
        links: Vec<(NodeId, NodeId)>,
        budget: usize,
    },
    /// The sink attached to the `rank`-th queried trampoline (1-based).
    NthQueried {
        links: Vec<(NodeId, NodeId)>,
        rank: usize,
    },
    Fixed(NodeId),
}

impl TargetChooser {
    /// `query_order` is the order in which the wallet would query servers.
    pub fn choose(&self, query_order: &[NodeId]) -> NodeId {
        match self {
            TargetChooser::UnqueriedTrampoline { links, budget } => {
                let asked = &query_order[..(*budget).min(query_order.len())];
                links
                    .iter()
                    .find(|(tn, _)| !asked.contains(tn))
                    .or(links.first())
                    .map(|&(_, outer)| outer)
                    .expect("at least one trampoline link")
            }
            TargetChooser::NthQueried { links, rank } => {
                let tn = query_order.get(rank.saturating_sub(1)).or(query_order.last());
                tn.and_then(|tn| links.iter().find(|(t, _)| t == tn))
                    .or(links.last())
                    .map(|&(_, sink)| sink)
                    .expect("at least one trampoline link")
            }
            TargetChooser::Fixed(t) => *t,
        }
    }
}

/// An adversarial construction together with its intended roles.
#[derive(Debug, Clone)]
pub struct GeneratedTopology {
    pub network: Network,
    pub source: NodeId,
    pub tn_set: Vec<NodeId>,
    /// Every node the chooser may return.
    pub targets: Vec<NodeId>,
    pub target_chooser: TargetChooser,
    /// Hop radius at which every trampoline is visible from the source.
    pub radius: usize,
    /// Number of leading candidates the construction makes unavailable.
    pub blocked_candidates: usize,
}

pub fn gen_adversarial(spec: AdversarialSpec) -> Result<GeneratedTopology, TopologyError> {
    if spec.q < 1 || spec.m < 1 {
        return Err(params(format!("adversarial spec needs q >= 1 and M >= 1, got {spec:?}")));
    }
    match spec.kind {
        AdversarialKind::Lemma1 => lemma1(spec.q, spec.m),
        AdversarialKind::Lemma2 => lemma2(spec.m),
        AdversarialKind::Lemma3 => lemma3(spec.m),
    }
}

fn lemma1(q: usize, m: u64) -> Result<GeneratedTopology, TopologyError> {
    let fee = u32::try_from(m).map_err(|_| params(format!("M={m} exceeds the 32-bit fee range")))?;
    let arms = q + 1;
    // s = 0, trampolines 1..=arms, outer nodes arms+1..=2*arms
    let tn = |i: usize| 1 + i;
    let outer = |i: usize| 1 + arms + i;
    let mut keys = vec!["s".to_string()];
    keys.extend((0..arms).map(|i| format!("tn{i}")));
    keys.extend((0..arms).map(|i| format!("outer{i}")));
    let mut sink = ChannelSink::new(DEFAULT_CAPACITY);
    for i in 0..arms {
        sink.add(0, tn(i), 0);
        sink.add(tn(i), outer(i), 1);
    }
    for i in 0..arms {
        for j in 0..arms {
            if i != j {
                sink.add(outer(i), outer(j), fee);
            }
        }
    }
    let network = Network::new(keys, sink.channels)?;
    let links: Vec<_> = (0..arms).map(|i| (NodeId(tn(i) as u32), NodeId(outer(i) as u32))).collect();
    Ok(GeneratedTopology {
        network,
        source: NodeId(0),
        tn_set: links.iter().map(|l| l.0).collect(),
        targets: links.iter().map(|l| l.1).collect(),
        target_chooser: TargetChooser::UnqueriedTrampoline { links, budget: q },
        radius: 1,
        blocked_candidates: 0,
    })
}

fn lemma2(m: u64) -> Result<GeneratedTopology, TopologyError> {
    if m < 2 {
        return Err(params(format!("Lemma2 needs a clique of M >= 2 nodes, got M={m}")));
    }
    let size = usize::try_from(m).map_err(|_| params("M too large"))?;
    // s = 0, clique 1..=size, t = size + 1
    let clique = |i: usize| 1 + i;
    let target = size + 1;
    let mut keys = vec!["s".to_string()];
    keys.extend((0..size).map(|i| format!("c{i}")));
    keys.push("t".to_string());
    let mut sink = ChannelSink::new(DEFAULT_CAPACITY);
    sink.add(0, clique(0), 1);
    for a in 0..size {
        for b in 0..size {
            if a != b {
                sink.add(clique(a), clique(b), 1);
            }
        }
    }
    sink.add(clique(size - 1), target, 1);
    let network = Network::new(keys, sink.channels)?;
    Ok(GeneratedTopology {
        network,
        source: NodeId(0),
        tn_set: (0..size).map(|i| NodeId(clique(i) as u32)).collect(),
        targets: vec![NodeId(target as u32)],
        target_chooser: TargetChooser::Fixed(NodeId(target as u32)),
        radius: 2,
        blocked_candidates: size,
    })
}

fn lemma3(m: u64) -> Result<GeneratedTopology, TopologyError> {
    let arms = usize::try_from(m).map_err(|_| params("M too large"))?;
    let tn = |i: usize| 1 + i;
    let sink_node = |i: usize| 1 + arms + i;
    let mut keys = vec!["s".to_string()];
    keys.extend((0..arms).map(|i| format!("tn{i}")));
    keys.extend((0..arms).map(|i| format!("sink{i}")));
    let mut sink = ChannelSink::new(DEFAULT_CAPACITY);
    for i in 0..arms {
        sink.add(0, tn(i), 1);
        sink.add(tn(i), sink_node(i), 1);
    }
    let network = Network::new(keys, sink.channels)?;
    let links: Vec<_> = (0..arms).map(|i| (NodeId(tn(i) as u32), NodeId(sink_node(i) as u32))).collect();
    Ok(GeneratedTopology {
        network,
        source: NodeId(0),
        tn_set: links.iter().map(|l| l.0).collect(),
        targets: links.iter().map(|l| l.1).collect(),
        target_chooser: TargetChooser::NthQueried { links, rank: arms },
        radius: 1,
        blocked_candidates: 0,
    })
}

/// Number of simple routes between two fixed nodes of an `m`-clique:
/// `Σ_{k=0}^{m-2} C(m-2, k) · k!`.
pub fn clique_route_count(m: u64) -> u128 {
    if m < 2 {
        return 0;
    }
    let free = (m - 2) as u128;
    // C(free, k) * k! = free! / (free - k)!
    let mut total = 0u128;
    let mut falling = 1u128;
    for k in 0..=free {
        if k > 0 {
            falling *= free - k + 1;
        }
        total += falling;
    }
    total
}

/// Writes one `src dst base_fee rate capacity` line per channel, in id order.
pub fn write_edge_list<W: Write>(network: &Network, mut out: W) -> io::Result<()> {
    for c in network.channels() {
        writeln!(out, "{} {} {} {} {}", c.src, c.dst, c.base_fee, c.proportional_rate, c.capacity)?;
    }
    Ok(())
}

/// Reads the edge-list format. Node count is one past the largest index;
/// channel ids follow line order. Blank lines and `#` comments are skipped.
pub fn read_edge_list<R: BufRead>(input: R) -> Result<Network, TopologyError> {
    let mut channels = Vec::new();
    let mut max_node = None::<u32>;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let err = |message: String| TopologyError::EdgeList { line: i + 1, message };
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let src: u32 = fields[0].parse().map_err(|e| err(format!("src: {e}")))?;
        let dst: u32 = fields[1].parse().map_err(|e| err(format!("dst: {e}")))?;
        let base_fee: u32 = fields[2].parse().map_err(|e| err(format!("base_fee: {e}")))?;
        let proportional_rate: u32 = fields[3].parse().map_err(|e| err(format!("rate: {e}")))?;
        let capacity: Msat = fields[4].parse().map_err(|e| err(format!("capacity: {e}")))?;
        max_node = Some(max_node.map_or(src.max(dst), |m| m.max(src).max(dst)));
        channels.push(Channel {
            id: ChannelId(channels.len() as u64),
            src: NodeId(src),
            dst: NodeId(dst),
            base_fee,
            proportional_rate,
            capacity,
        });
    }
    let n = max_node.map_or(0, |m| m as usize + 1);
    Ok(Network::with_node_count(n, channels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::neighborhood;

    #[test]
    fn ring_contract() {
        let net = gen_sparse_ring(1000, 7).unwrap();
        assert_eq!(net.node_count(), 1000);
        assert_eq!(net.channel_count(), 2000);
        for v in net.nodes() {
            assert_eq!(net.out_degree(v), 2);
            let succ = NodeId(((v.0 as usize + 1) % 1000) as u32);
            let dsts: Vec<_> = net.outgoing(v).iter().map(|&c| net.channel_at(c).dst).collect();
            assert!(dsts.contains(&succ));
            assert!(dsts.iter().all(|&d| d != v));
            assert_ne!(dsts[0], dsts[1]);
        }
        assert!(net.channels().iter().all(|c| c.weight(1_000_000) == 1));
    }

    #[test]
    fn tiny_ring() {
        let net = gen_sparse_ring(3, 0).unwrap();
        assert_eq!(net.channel_count(), 6);
        assert!(gen_sparse_ring(2, 0).is_err());
    }

    #[test]
    fn ring_neighborhood_grows_with_radius() {
        let net = gen_sparse_ring(50, 3).unwrap();
        for h in 0..10 {
            assert!(neighborhood(&net, NodeId(4), h).len() >= h);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_sparse_ring(100, 9).unwrap(), gen_sparse_ring(100, 9).unwrap());
        assert_ne!(gen_sparse_ring(100, 9).unwrap(), gen_sparse_ring(100, 10).unwrap());
        assert_eq!(gen_scale_free(60, 2, 9).unwrap(), gen_scale_free(60, 2, 9).unwrap());
    }

    #[test]
    fn scale_free_tree_case() {
        let net = gen_scale_free(10, 1, 1).unwrap();
        assert_eq!(net.channel_count(), 18);
        // connected: every node reaches all others over bidirectional links
        assert_eq!(neighborhood(&net, NodeId(0), 10).len(), 9);
        let degree_sum: usize = net.nodes().map(|v| net.out_degree(v)).sum();
        assert_eq!(degree_sum, 2 * 9);
        assert!(gen_scale_free(3, 3, 0).is_err());
        assert!(gen_scale_free(3, 0, 0).is_err());
    }

    #[test]
    fn scale_free_link_count() {
        let (n, m) = (40, 3);
        let net = gen_scale_free(n, m, 5).unwrap();
        let links = m * (m + 1) / 2 + (n - m - 1) * m;
        assert_eq!(net.channel_count(), 2 * links);
    }

    #[test]
    fn lemma1_shape() {
        let g = gen_adversarial(AdversarialSpec { kind: AdversarialKind::Lemma1, q: 2, m: 5 }).unwrap();
        assert_eq!(g.network.node_count(), 7);
        assert_eq!(g.tn_set.len(), 3);
        let order = [g.tn_set[2], g.tn_set[0], g.tn_set[1]];
        // tn1 is the one left out of the first two queries
        assert_eq!(g.target_chooser.choose(&order), g.targets[1]);
    }

    #[test]
    fn lemma3_chooser_picks_last_queried_sink() {
        let g = gen_adversarial(AdversarialSpec { kind: AdversarialKind::Lemma3, q: 6, m: 4 }).unwrap();
        let order: Vec<_> = g.tn_set.iter().rev().copied().collect();
        assert_eq!(g.target_chooser.choose(&order), g.targets[0]);
    }

    #[test]
    fn adversarial_parameter_errors() {
        let bad = AdversarialSpec { kind: AdversarialKind::Lemma2, q: 1, m: 1 };
        assert!(gen_adversarial(bad).is_err());
        let bad = AdversarialSpec { kind: AdversarialKind::Lemma1, q: 0, m: 3 };
        assert!(gen_adversarial(bad).is_err());
        let bad = AdversarialSpec { kind: AdversarialKind::Lemma1, q: 1, m: 1 << 40 };
        assert!(gen_adversarial(bad).is_err());
    }

    #[test]
    fn clique_route_counts() {
        assert_eq!(clique_route_count(2), 1);
        assert_eq!(clique_route_count(3), 2);
        assert_eq!(clique_route_count(4), 5);
        assert_eq!(clique_route_count(5), 16);
    }

    #[test]
    fn edge_list_round_trip() {
        let net = gen_sparse_ring(20, 4).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 40);
        assert_eq!(text.lines().next().unwrap(), "0 1 1 0 1000000000");
        assert_eq!(read_edge_list(&buf[..]).unwrap(), net);
    }

    #[test]
    fn edge_list_errors_carry_line() {
        let err = read_edge_list("0 1 1 0 5\n0 x 1 0 5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TopologyError::EdgeList { line: 2, .. }));
    }
}
