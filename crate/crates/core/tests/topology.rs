use std::collections::VecDeque;

use proptest::prelude::*;
use trampsim::graph::Network;
use trampsim::topology::{
    clique_route_count, gen_adversarial, gen_clique, gen_scale_free, gen_sparse_ring, read_edge_list, write_edge_list,
    AdversarialKind, AdversarialSpec,
};
use trampsim::NodeId;

fn connected(net: &Network) -> bool {
    let mut seen = vec![false; net.node_count()];
    let mut queue = VecDeque::from([NodeId(0)]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &c in net.outgoing(v) {
            let d = net.channel_at(c).dst;
            if !seen[d.index()] {
                seen[d.index()] = true;
                queue.push_back(d);
            }
        }
    }
    seen.into_iter().all(|x| x)
}

#[test]
fn scale_free_tree() {
    let net = gen_scale_free(10, 1, 4).unwrap();
    assert_eq!(net.channel_count(), 18);
    assert!(connected(&net));
}

#[test]
fn ring_shape() {
    let net = gen_sparse_ring(1000, 0).unwrap();
    assert_eq!(net.channel_count(), 2000);
    for v in net.nodes() {
        assert_eq!(net.out_degree(v), 2);
        let dsts: Vec<usize> = net.outgoing(v).iter().map(|&c| net.channel_at(c).dst.index()).collect();
        assert!(dsts.contains(&((v.index() + 1) % 1000)));
        assert!(!dsts.contains(&v.index()) && dsts[0] != dsts[1]);
    }
    assert!(net.channels().iter().all(|c| c.base_fee == 1 && c.proportional_rate == 0));
    let in_total: usize = net.nodes().map(|v| net.in_degree(v)).sum();
    assert_eq!(in_total, 2000);
    assert!(connected(&net));
}

#[test]
fn clique_shape() {
    let net = gen_clique(6, 3).unwrap();
    assert_eq!(net.channel_count(), 30);
    assert!(net.channels().iter().all(|c| c.base_fee == 3 && c.src != c.dst));
}

#[test]
fn lemma2_route_counts() {
    let known = [0u128, 0, 1, 2, 5, 16, 65, 326];
    for (m, &want) in known.iter().enumerate() {
        assert_eq!(clique_route_count(m as u64), want, "m={m}");
    }
    for m in 3..=7 {
        let g = gen_adversarial(AdversarialSpec { kind: AdversarialKind::Lemma2, q: 1, m }).unwrap();
        assert!(g.blocked_candidates as u64 == m);
        assert!(connected(&g.network));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prop_scale_free_degree_sum(n in 5usize..120, m in 1usize..4, seed in any::<u64>()) {
        prop_assume!(n > m + 1);
        let net = gen_scale_free(n, m, seed).unwrap();
        let edges = m * (m + 1) / 2 + (n - m - 1) * m;
        prop_assert_eq!(net.channel_count(), 2 * edges);
        let degree_sum: usize = net.nodes().map(|v| net.out_degree(v)).sum();
        prop_assert_eq!(degree_sum, 2 * edges);
        prop_assert!(connected(&net));
        prop_assert!(net.nodes().all(|v| net.out_degree(v) >= m));
    }

    #[test]
    fn prop_edge_list_round_trip(n in 3usize..60, seed in any::<u64>()) {
        let net = gen_scale_free(n, 2.min(n - 2), seed).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&net, &mut buf).unwrap();
        let back = read_edge_list(buf.as_slice()).unwrap();
        prop_assert_eq!(back.node_count(), net.node_count());
        prop_assert_eq!(back.channels(), net.channels());
    }
}

#[test]
fn edge_list_errors_carry_line_numbers() {
    let text = "# header\n0 1 1 0 100\n1 x 1 0 100\n";
    let err = read_edge_list(text.as_bytes()).unwrap_err().to_string();
    assert!(err.contains('3'), "{err}");
}
