#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trampsim::{Channel, ChannelId, Network, NodeId, Weight};

/// Random directed multigraph with fees in `0..=max_fee` (zero allowed) and
/// occasional parallel channels. Channel ids are shuffled relative to
/// insertion so id order differs from construction order.
pub fn random_network(seed: u64, n: usize, channels: usize, max_fee: u32) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u64> = (0..channels as u64).map(|i| i * 3 + 1).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.gen_range(0..=i));
    }
    let list = ids
        .into_iter()
        .map(|id| {
            let src = rng.gen_range(0..n);
            let mut dst = rng.gen_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            Channel {
                id: ChannelId(id),
                src: NodeId(src as u32),
                dst: NodeId(dst as u32),
                base_fee: rng.gen_range(0..=max_fee),
                proportional_rate: rng.gen_range(0..=max_fee),
                capacity: 10_000_000,
            }
        })
        .collect();
    Network::with_node_count(n, list).unwrap()
}

/// Bellman-Ford distances from `source`; `None` when unreachable.
pub fn bellman_ford(net: &Network, source: NodeId, amount: u64) -> Vec<Option<Weight>> {
    let mut dist: Vec<Option<Weight>> = vec![None; net.node_count()];
    dist[source.index()] = Some(0);
    for _ in 0..net.node_count() {
        let mut changed = false;
        for c in net.channels() {
            if let Some(d) = dist[c.src.index()] {
                let nd = d + c.weight(amount);
                if dist[c.dst.index()].is_none_or(|old| nd < old) {
                    dist[c.dst.index()] = Some(nd);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Every loopless route from `s` to `t` as (weight, channel ids), sorted by
/// weight then id sequence.
pub fn all_simple_routes(net: &Network, s: NodeId, t: NodeId, amount: u64) -> Vec<(Weight, Vec<ChannelId>)> {
    #[allow(clippy::too_many_arguments)]
    fn go(
        net: &Network,
        at: NodeId,
        t: NodeId,
        amount: u64,
        seen: &mut Vec<bool>,
        path: &mut Vec<ChannelId>,
        weight: Weight,
        out: &mut Vec<(Weight, Vec<ChannelId>)>,
    ) {
        if at == t {
            out.push((weight, path.clone()));
            return;
        }
        for c in net.channels().iter().filter(|c| c.src == at) {
            if seen[c.dst.index()] {
                continue;
            }
            seen[c.dst.index()] = true;
            path.push(c.id);
            go(net, c.dst, t, amount, seen, path, weight + c.weight(amount), out);
            path.pop();
            seen[c.dst.index()] = false;
        }
    }
    let mut out = Vec::new();
    let mut seen = vec![false; net.node_count()];
    seen[s.index()] = true;
    go(net, s, t, amount, &mut seen, &mut Vec::new(), 0, &mut out);
    out.sort();
    out
}
