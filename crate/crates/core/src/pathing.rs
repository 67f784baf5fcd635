//! Shortest-path engines: all-pairs Floyd–Warshall, single-source Dijkstra,
//! hop-limited min-plus powers and loopless k-shortest routes (Yen).
//!
//! Ties between equal-weight routes are always broken by the lexicographic
//! order of their channel id sequences. Weight-0 channels are allowed.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet, VecDeque};

use rayon::prelude::*;

use crate::graph::{Msat, Network, NodeId, Route, Weight};

/// Marker for "unreachable" inside distance buffers.
pub const UNREACHABLE: Weight = Weight::MAX;

#[inline]
fn finite(w: Weight) -> Option<Weight> {
    (w != UNREACHABLE).then_some(w)
}

/// A network together with its channel weights at one payment amount.
#[derive(Debug, Clone)]
pub struct WeightedGraph<'a> {
    network: &'a Network,
    amount: Msat,
    weights: Vec<Weight>,
}

impl<'a> WeightedGraph<'a> {
    pub fn new(network: &'a Network, amount: Msat) -> Self {
        WeightedGraph { network, amount, weights: network.weights_at(amount) }
    }

    pub fn network(&self) -> &'a Network {
        self.network
    }

    pub fn amount(&self) -> Msat {
        self.amount
    }

    #[inline]
    pub fn weight(&self, channel_idx: usize) -> Weight {
        self.weights[channel_idx]
    }

    /// Distances from `source` to every node.
    pub fn distances_from(&self, source: NodeId) -> Vec<Weight> {
        let n = self.network.node_count();
        let mut dist = vec![UNREACHABLE; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source.index()] = 0;
        heap.push(Reverse((0, source.0)));
        while let Some(Reverse((d, v))) = heap.pop() {
            let v = NodeId(v);
            if done[v.index()] {
                continue;
            }
            done[v.index()] = true;
            for &c in self.network.outgoing(v) {
                let w = self.network.channel_at(c).dst;
                let nd = d + self.weights[c];
                if nd < dist[w.index()] {
                    dist[w.index()] = nd;
                    heap.push(Reverse((nd, w.0)));
                }
            }
        }
        dist
    }

    /// Distances from every node to `target`.
    pub fn distances_to(&self, target: NodeId) -> Vec<Weight> {
        let n = self.network.node_count();
        let mut dist = vec![UNREACHABLE; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[target.index()] = 0;
        heap.push(Reverse((0, target.0)));
        while let Some(Reverse((d, v))) = heap.pop() {
            let v = NodeId(v);
            if done[v.index()] {
                continue;
            }
            done[v.index()] = true;
            for &c in self.network.incoming(v) {
                let u = self.network.channel_at(c).src;
                let nd = d + self.weights[c];
                if nd < dist[u.index()] {
                    dist[u.index()] = nd;
                    heap.push(Reverse((nd, u.0)));
                }
            }
        }
        dist
    }

    /// The lexicographically smallest minimum-weight loopless route, as
    /// channel indices, avoiding banned nodes and channels. `to_target`
    /// holds unrestricted distances to `target` and guides an A* search.
    fn best_restricted(
        &self,
        source: NodeId,
        target: NodeId,
        to_target: &[Weight],
        banned_nodes: &[bool],
        banned_channels: &HashSet<usize>,
    ) -> Option<(Weight, Vec<usize>)> {
        if source == target {
            return Some((0, Vec::new()));
        }
        finite(to_target[source.index()])?;
        let n = self.network.node_count();
        let mut g = vec![UNREACHABLE; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        let mut best: Option<Weight> = None;
        g[source.index()] = 0;
        heap.push(Reverse((to_target[source.index()], source.0)));
        // settle every node whose estimate does not exceed the optimum, so
        // all optimal routes lie inside the settled set
        while let Some(Reverse((f, v))) = heap.pop() {
            let v = NodeId(v);
            if done[v.index()] {
                continue;
            }
            if best.is_some_and(|b| f > b) {
                break;
            }
            done[v.index()] = true;
            if v == target {
                best = Some(g[v.index()]);
                continue;
            }
            for &c in self.network.outgoing(v) {
                if banned_channels.contains(&c) {
                    continue;
                }
                let w = self.network.channel_at(c).dst;
                let rest = to_target[w.index()];
                if banned_nodes[w.index()] || rest == UNREACHABLE {
                    continue;
                }
                let ng = g[v.index()] + self.weights[c];
                if ng < g[w.index()] {
                    g[w.index()] = ng;
                    heap.push(Reverse((ng + rest, w.0)));
                }
            }
        }
        let best = best?;
        let tight = |c: usize| {
            let ch = self.network.channel_at(c);
            done[ch.src.index()]
                && done[ch.dst.index()]
                && !banned_channels.contains(&c)
                && g[ch.src.index()] + self.weights[c] == g[ch.dst.index()]
        };
        // nodes that reach the target over tight channels
        let mut useful = vec![false; n];
        useful[target.index()] = true;
        let mut queue = VecDeque::from([target]);
        while let Some(v) = queue.pop_front() {
            for &c in self.network.incoming(v) {
                let u = self.network.channel_at(c).src;
                if !useful[u.index()] && !banned_nodes[u.index()] && tight(c) {
                    useful[u.index()] = true;
                    queue.push_back(u);
                }
            }
        }
        let on_optimal = |c: usize| {
            let ch = self.network.channel_at(c);
            useful[ch.src.index()] && useful[ch.dst.index()] && tight(c)
        };
        let path = lex_tight_path(self.network, source, target, on_optimal, banned_nodes)?;
        Some((best, path))
    }

    /// Lowest-weight route from `source` to `target`, ties broken by channel ids.
    pub fn shortest_route(&self, source: NodeId, target: NodeId) -> Option<Route> {
        let banned = vec![false; self.network.node_count()];
        let to_target = self.distances_to(target);
        self.best_restricted(source, target, &to_target, &banned, &HashSet::new())
            .map(|(w, p)| Route::from_indices(self.network, source, target, &p, w))
    }

    pub fn single_source(&self, source: NodeId) -> ShortestPathTree {
        ShortestPathTree { source, amount: self.amount, dist: self.distances_from(source) }
    }

    /// Up to `k` loopless routes in increasing (weight, channel ids) order.
    pub fn k_shortest(&self, source: NodeId, target: NodeId, k: usize) -> Vec<Route> {
        self.k_shortest_raw(source, target, k)
            .into_iter()
            .map(|(w, p)| Route::from_indices(self.network, source, target, &p, w))
            .collect()
    }

    fn node_sequence(&self, source: NodeId, path: &[usize]) -> Vec<NodeId> {
        std::iter::once(source).chain(path.iter().map(|&c| self.network.channel_at(c).dst)).collect()
    }

    fn k_shortest_raw(&self, source: NodeId, target: NodeId, k: usize) -> Vec<(Weight, Vec<usize>)> {
        let n = self.network.node_count();
        if k == 0 {
            return Vec::new();
        }
        let no_nodes = vec![false; n];
        let to_target = self.distances_to(target);
        let Some(first) = self.best_restricted(source, target, &to_target, &no_nodes, &HashSet::new()) else {
            return Vec::new();
        };
        let mut accepted: Vec<(Weight, Vec<usize>)> = vec![first];
        let mut accepted_set: HashSet<Vec<usize>> = HashSet::from([accepted[0].1.clone()]);
        let mut candidates: BTreeSet<(Weight, Vec<usize>)> = BTreeSet::new();

        while accepted.len() < k {
            let (_, last) = accepted.last().unwrap().clone();
            let last_nodes = self.node_sequence(source, &last);
            let mut banned_nodes = vec![false; n];
            let mut root_weight: Weight = 0;
            for i in 0..last.len() {
                let spur = last_nodes[i];
                let root = &last[..i];
                let banned_channels: HashSet<usize> =
                    accepted.iter().filter(|(_, p)| p.len() > i && &p[..i] == root).map(|(_, p)| p[i]).collect();
                if let Some((spur_weight, spur_path)) =
                    self.best_restricted(spur, target, &to_target, &banned_nodes, &banned_channels)
                {
                    let mut path = root.to_vec();
                    path.extend(spur_path);
                    if !accepted_set.contains(&path) {
                        candidates.insert((root_weight + spur_weight, path));
                    }
                }
                banned_nodes[spur.index()] = true;
                root_weight += self.weights[last[i]];
            }
            match candidates.pop_first() {
                Some(best) => {
                    accepted_set.insert(best.1.clone());
                    accepted.push(best);
                }
                None => break,
            }
        }
        accepted
    }
}

/// Depth-first search over tight channels in channel-index order. The first
/// loopless path reaching `target` is the lexicographically smallest one.
fn lex_tight_path(
    network: &Network,
    source: NodeId,
    target: NodeId,
    tight: impl Fn(usize) -> bool,
    banned_nodes: &[bool],
) -> Option<Vec<usize>> {
    if source == target {
        return Some(Vec::new());
    }
    let mut on_path = vec![false; network.node_count()];
    let mut stack: Vec<(NodeId, usize)> = vec![(source, 0)];
    let mut path: Vec<usize> = Vec::new();
    on_path[source.index()] = true;
    while let Some((v, pos)) = stack.last_mut() {
        let out = network.outgoing(*v);
        if *pos >= out.len() {
            on_path[v.index()] = false;
            stack.pop();
            path.pop();
            continue;
        }
        let c = out[*pos];
        *pos += 1;
        if !tight(c) {
            continue;
        }
        let w = network.channel_at(c).dst;
        if banned_nodes[w.index()] || on_path[w.index()] {
            continue;
        }
        path.push(c);
        if w == target {
            return Some(path);
        }
        on_path[w.index()] = true;
        stack.push((w, 0));
    }
    None
}

/// Single-source distances with lazy route reconstruction.
#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    pub source: NodeId,
    amount: Msat,
    dist: Vec<Weight>,
}

impl ShortestPathTree {
    pub fn distance(&self, target: NodeId) -> Option<Weight> {
        finite(self.dist[target.index()])
    }

    pub fn distances(&self) -> impl Iterator<Item = Option<Weight>> + '_ {
        self.dist.iter().map(|&d| finite(d))
    }

    /// The lexicographically smallest shortest route to `target`.
    pub fn route(&self, network: &Network, target: NodeId) -> Option<Route> {
        let dt = self.distance(target)?;
        let tight = |c: usize| {
            let ch = network.channel_at(c);
            let du = self.dist[ch.src.index()];
            du != UNREACHABLE && du + ch.weight(self.amount) == self.dist[ch.dst.index()]
        };
        // nodes from which `target` is reachable over tight channels
        let n = network.node_count();
        let mut useful = vec![false; n];
        let mut queue = vec![target];
        useful[target.index()] = true;
        while let Some(v) = queue.pop() {
            for &c in network.incoming(v) {
                let u = network.channel_at(c).src;
                if !useful[u.index()] && tight(c) {
                    useful[u.index()] = true;
                    queue.push(u);
                }
            }
        }
        let not_useful: Vec<bool> = useful.iter().map(|u| !u).collect();
        let path = lex_tight_path(network, self.source, target, tight, &not_useful)?;
        Some(Route::from_indices(network, self.source, target, &path, dt))
    }
}

/// Dense all-pairs distance matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    amount: Msat,
    dist: Vec<Weight>,
}

impl DistanceMatrix {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: NodeId, to: NodeId) -> Option<Weight> {
        finite(self.dist[from.index() * self.n + to.index()])
    }

    pub fn row(&self, from: NodeId) -> impl Iterator<Item = Option<Weight>> + '_ {
        self.dist[from.index() * self.n..(from.index() + 1) * self.n].iter().map(|&d| finite(d))
    }

    /// The lexicographically smallest shortest route, rebuilt from the
    /// target's distance column.
    pub fn route(&self, network: &Network, source: NodeId, target: NodeId) -> Option<Route> {
        let total = self.get(source, target)?;
        let to_t = |v: NodeId| self.dist[v.index() * self.n + target.index()];
        let tight = |c: usize| {
            let ch = network.channel_at(c);
            let (du, dv) = (to_t(ch.src), to_t(ch.dst));
            du != UNREACHABLE && dv != UNREACHABLE && dv + ch.weight(self.amount) == du
        };
        let unreachable: Vec<bool> = network.nodes().map(|v| to_t(v) == UNREACHABLE).collect();
        let path = lex_tight_path(network, source, target, tight, &unreachable)?;
        Some(Route::from_indices(network, source, target, &path, total))
    }
}

/// One-hop matrix: minimum parallel channel weight, zero diagonal.
fn adjacency_matrix(network: &Network, amount: Msat) -> Vec<Weight> {
    let n = network.node_count();
    let mut m = vec![UNREACHABLE; n * n];
    for v in 0..n {
        m[v * n + v] = 0;
    }
    for c in network.channels() {
        let cell = &mut m[c.src.index() * n + c.dst.index()];
        *cell = (*cell).min(c.weight(amount));
    }
    m
}

/// Floyd–Warshall over the minimum-weight parallel channels.
pub fn all_pairs_shortest(network: &Network, amount: Msat) -> DistanceMatrix {
    let n = network.node_count();
    let mut dist = adjacency_matrix(network, amount);
    for k in 0..n {
        let via: Vec<Weight> = dist[k * n..(k + 1) * n].to_vec();
        dist.par_chunks_mut(n.max(1)).for_each(|row| {
            let dik = row[k];
            if dik == UNREACHABLE {
                return;
            }
            for (cell, &dkj) in row.iter_mut().zip(&via) {
                if dkj != UNREACHABLE && dik + dkj < *cell {
                    *cell = dik + dkj;
                }
            }
        });
    }
    DistanceMatrix { n, amount, dist }
}

pub fn shortest_path_single_source(network: &Network, source: NodeId, amount: Msat) -> ShortestPathTree {
    WeightedGraph::new(network, amount).single_source(source)
}

pub fn k_shortest_paths(network: &Network, source: NodeId, target: NodeId, k: usize, amount: Msat) -> Vec<Route> {
    WeightedGraph::new(network, amount).k_shortest(source, target, k)
}

/// Distance product `a ⊗ b` of two dense `n × n` matrices.
pub fn min_plus(a: &[Weight], b: &[Weight], n: usize) -> Vec<Weight> {
    let mut out = vec![UNREACHABLE; n * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == UNREACHABLE {
                continue;
            }
            for (cell, &bkj) in row.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                if bkj != UNREACHABLE && aik + bkj < *cell {
                    *cell = aik + bkj;
                }
            }
        }
    });
    out
}

/// `D^(h)` for `h = 1..=h_max`: minimum route weight using at most `h` channels.
#[derive(Debug, Clone)]
pub struct HopLimitedDistances {
    n: usize,
    levels: Vec<Vec<Weight>>,
}

impl HopLimitedDistances {
    pub fn max_hops(&self) -> usize {
        self.levels.len()
    }

    /// `D^(h)[from][to]`; `h` must be in `1..=max_hops()`.
    pub fn get(&self, hops: usize, from: NodeId, to: NodeId) -> Option<Weight> {
        finite(self.levels[hops - 1][from.index() * self.n + to.index()])
    }

    pub fn level(&self, hops: usize) -> &[Weight] {
        &self.levels[hops - 1]
    }
}

pub fn hop_limited_distances(network: &Network, h_max: usize, amount: Msat) -> HopLimitedDistances {
    assert!(h_max >= 1, "hop limit must be at least 1");
    let n = network.node_count();
    let one = adjacency_matrix(network, amount);
    let mut levels = Vec::with_capacity(h_max);
    levels.push(one.clone());
    for _ in 1..h_max {
        let next = min_plus(levels.last().unwrap(), &one, n);
        levels.push(next);
    }
    HopLimitedDistances { n, levels }
}

impl DistanceMatrix {
    /// Flattened row-major buffer, comparable with [`HopLimitedDistances::level`].
    pub fn raw(&self) -> &[Weight] {
        &self.dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Channel, ChannelId};

    fn ch(id: u64, src: u32, dst: u32, base: u32) -> Channel {
        Channel {
            id: ChannelId(id),
            src: NodeId(src),
            dst: NodeId(dst),
            base_fee: base,
            proportional_rate: 0,
            capacity: 1_000_000_000,
        }
    }

    #[test]
    fn single_channel() {
        let net = Network::with_node_count(2, vec![ch(0, 0, 1, 5)]).unwrap();
        let d = all_pairs_shortest(&net, 1);
        assert_eq!(d.get(NodeId(0), NodeId(1)), Some(5));
        assert_eq!(d.get(NodeId(1), NodeId(0)), None);
        assert_eq!(d.get(NodeId(1), NodeId(1)), Some(0));
    }

    #[test]
    fn triangle_prefers_two_hops() {
        let net = Network::with_node_count(3, vec![ch(0, 0, 1, 1), ch(1, 1, 2, 1), ch(2, 0, 2, 3)]).unwrap();
        let d = all_pairs_shortest(&net, 1);
        assert_eq!(d.get(NodeId(0), NodeId(2)), Some(2));
        let r = d.route(&net, NodeId(0), NodeId(2)).unwrap();
        assert_eq!(r.channels, vec![ChannelId(0), ChannelId(1)]);
    }

    #[test]
    fn chain_single_source() {
        let net = Network::with_node_count(4, vec![ch(0, 0, 1, 1), ch(1, 1, 2, 1)]).unwrap();
        let tree = shortest_path_single_source(&net, NodeId(0), 1);
        assert_eq!(tree.distance(NodeId(2)), Some(2));
        assert_eq!(tree.distance(NodeId(3)), None);
        assert!(tree.route(&net, NodeId(3)).is_none());
        assert_eq!(tree.route(&net, NodeId(2)).unwrap().hop_count(), 2);
    }

    #[test]
    fn parallel_channels_use_cheapest_then_lowest_id() {
        let net = Network::with_node_count(2, vec![ch(4, 0, 1, 3), ch(2, 0, 1, 3), ch(9, 0, 1, 7)]).unwrap();
        let g = WeightedGraph::new(&net, 1);
        let r = g.shortest_route(NodeId(0), NodeId(1)).unwrap();
        assert_eq!(r.channels, vec![ChannelId(2)]);
        let all = g.k_shortest(NodeId(0), NodeId(1), 5);
        let ids: Vec<_> = all.iter().map(|r| r.channels[0].0).collect();
        assert_eq!(ids, vec![2, 4, 9]);
    }

    #[test]
    fn hop_limited_chain() {
        let net = Network::with_node_count(3, vec![ch(0, 0, 1, 1), ch(1, 1, 2, 1)]).unwrap();
        let h = hop_limited_distances(&net, 2, 1);
        assert_eq!(h.get(1, NodeId(0), NodeId(2)), None);
        assert_eq!(h.get(2, NodeId(0), NodeId(2)), Some(2));
        assert_eq!(h.get(1, NodeId(0), NodeId(0)), Some(0));
    }

    #[test]
    fn k_shortest_small_example() {
        // s=0, a=1, b=2, t=3: s->a->t (1+1), s->t (3), s->b->t (2+1)
        let net = Network::with_node_count(
            4,
            vec![ch(0, 0, 1, 1), ch(1, 1, 3, 1), ch(2, 0, 3, 3), ch(3, 0, 2, 2), ch(4, 2, 3, 1)],
        )
        .unwrap();
        let routes = k_shortest_paths(&net, NodeId(0), NodeId(3), 3, 1);
        let weights: Vec<_> = routes.iter().map(|r| r.weight).collect();
        assert_eq!(weights, vec![2, 3, 3]);
        // equal weights ordered by channel ids: [2] < [3, 4]
        assert_eq!(routes[1].channels, vec![ChannelId(2)]);
        assert_eq!(k_shortest_paths(&net, NodeId(0), NodeId(3), 10, 1).len(), 3);
    }

    #[test]
    fn k_shortest_single_path_and_self() {
        let net = Network::with_node_count(2, vec![ch(0, 0, 1, 1)]).unwrap();
        assert_eq!(k_shortest_paths(&net, NodeId(0), NodeId(1), 4, 1).len(), 1);
        assert!(k_shortest_paths(&net, NodeId(1), NodeId(0), 4, 1).is_empty());
        let own = k_shortest_paths(&net, NodeId(0), NodeId(0), 4, 1);
        assert_eq!(own, vec![Route::empty(NodeId(0))]);
    }

    #[test]
    fn zero_weight_cycle_is_not_followed() {
        // 0 <-> 1 at weight 0, 1 -> 2 at weight 1
        let net = Network::with_node_count(3, vec![ch(0, 0, 1, 0), ch(1, 1, 0, 0), ch(2, 1, 2, 1)]).unwrap();
        let g = WeightedGraph::new(&net, 1);
        let r = g.shortest_route(NodeId(0), NodeId(2)).unwrap();
        assert_eq!(r.channels, vec![ChannelId(0), ChannelId(2)]);
        assert!(r.is_loopless(&net));
        assert_eq!(g.k_shortest(NodeId(0), NodeId(2), 3).len(), 1);
    }
}
