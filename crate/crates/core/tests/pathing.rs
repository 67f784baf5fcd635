mod common;

use common::{all_simple_routes, bellman_ford, random_network};
use proptest::prelude::*;
use trampsim::graph::{neighborhood, route_weight, validate_route};
use trampsim::pathing::{all_pairs_shortest, hop_limited_distances, k_shortest_paths, shortest_path_single_source};
use trampsim::{Network, NodeId, DEFAULT_AMOUNT};

const AMOUNT: u64 = DEFAULT_AMOUNT;

fn check_all_pairs_against_oracles(net: &Network) {
    let apsp = all_pairs_shortest(net, AMOUNT);
    for s in net.nodes() {
        let tree = shortest_path_single_source(net, s, AMOUNT);
        let bf = bellman_ford(net, s, AMOUNT);
        for t in net.nodes() {
            assert_eq!(apsp.get(s, t), bf[t.index()], "all-pairs {s}->{t}");
            assert_eq!(tree.distance(t), bf[t.index()], "single-source {s}->{t}");
            match apsp.route(net, s, t) {
                Some(r) => {
                    assert!(validate_route(net, &r.channels, s, t));
                    assert_eq!(route_weight(net, &r, AMOUNT).unwrap(), bf[t.index()].unwrap());
                    assert_eq!(Some(&r), tree.route(net, t).as_ref());
                }
                None => assert!(bf[t.index()].is_none()),
            }
        }
    }
}

#[test]
fn all_pairs_matches_bellman_ford_on_seeded_graphs() {
    for seed in 0..20 {
        let n = 5 + (seed as usize * 7) % 60;
        check_all_pairs_against_oracles(&random_network(seed, n, n * 3, 20));
    }
}

#[test]
fn lemma_style_zero_weights_are_handled() {
    // dense zero-fee cycles
    for seed in 0..10 {
        check_all_pairs_against_oracles(&random_network(100 + seed, 12, 50, 1));
    }
}

#[test]
fn k_shortest_matches_enumeration() {
    for seed in 0..30 {
        let n = 3 + (seed as usize % 6);
        let net = random_network(1000 + seed, n, n * 3, 4);
        for s in net.nodes() {
            for t in net.nodes() {
                if s == t {
                    continue;
                }
                let all = all_simple_routes(&net, s, t, AMOUNT);
                for k in [1, 3, 8] {
                    let got: Vec<_> =
                        k_shortest_paths(&net, s, t, k, AMOUNT).into_iter().map(|r| (r.weight, r.channels)).collect();
                    let want: Vec<_> = all.iter().take(k).cloned().collect();
                    assert_eq!(got, want, "seed {seed} {s}->{t} k={k}");
                }
            }
        }
    }
}

#[test]
fn hop_limited_converges_to_all_pairs() {
    for seed in 0..5 {
        let n = 8 + seed as usize * 5;
        let net = random_network(2000 + seed, n, n * 2, 9);
        let apsp = all_pairs_shortest(&net, AMOUNT);
        let hops = hop_limited_distances(&net, n - 1, AMOUNT);
        for h in 1..n - 1 {
            assert!(hops.level(h + 1).iter().zip(hops.level(h)).all(|(a, b)| a <= b));
        }
        for s in net.nodes() {
            for t in net.nodes() {
                assert_eq!(hops.get(n - 1, s, t), apsp.get(s, t));
            }
        }
    }
}

#[test]
fn hop_limited_chain_example() {
    let net = common_chain();
    let hops = hop_limited_distances(&net, 2, AMOUNT);
    assert_eq!(hops.get(1, NodeId(0), NodeId(2)), None);
    assert_eq!(hops.get(2, NodeId(0), NodeId(2)), Some(2));
}

fn common_chain() -> Network {
    use trampsim::{Channel, ChannelId};
    let ch = |id, a, b| Channel {
        id: ChannelId(id),
        src: NodeId(a),
        dst: NodeId(b),
        base_fee: 1,
        proportional_rate: 0,
        capacity: 1,
    };
    Network::with_node_count(3, vec![ch(0, 0, 1), ch(1, 1, 2)]).unwrap()
}

#[test]
fn neighborhood_at_full_radius_counts_reachable_nodes() {
    for seed in 0..10 {
        let net = random_network(3000 + seed, 30, 45, 5);
        let apsp = all_pairs_shortest(&net, AMOUNT);
        for v in net.nodes() {
            let reachable = net.nodes().filter(|&u| u != v && apsp.get(v, u).is_some()).count();
            assert_eq!(neighborhood(&net, v, net.node_count() - 1).len(), reachable);
        }
    }
}

fn arb_network() -> impl Strategy<Value = Network> {
    (any::<u64>(), 2usize..9, 1usize..25, 0u32..6).prop_map(|(seed, n, m, fee)| random_network(seed, n, m, fee))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_k_shortest_sorted_loopless_and_exact(net in arb_network(), k in 1usize..6) {
        for s in net.nodes() {
            for t in net.nodes().filter(|&t| t != s) {
                let got = k_shortest_paths(&net, s, t, k, AMOUNT);
                let want: Vec<_> = all_simple_routes(&net, s, t, AMOUNT).into_iter().take(k).collect();
                prop_assert_eq!(got.len(), want.len());
                for (r, (w, ids)) in got.iter().zip(&want) {
                    prop_assert!(r.is_loopless(&net));
                    prop_assert!(validate_route(&net, &r.channels, s, t));
                    prop_assert_eq!(r.weight, *w);
                    prop_assert_eq!(&r.channels, ids);
                }
            }
        }
    }

    #[test]
    fn prop_triangle_inequality(net in arb_network()) {
        let d = all_pairs_shortest(&net, AMOUNT);
        for u in net.nodes() {
            prop_assert_eq!(d.get(u, u), Some(0));
            for v in net.nodes() {
                for w in net.nodes() {
                    if let (Some(a), Some(b)) = (d.get(u, v), d.get(v, w)) {
                        prop_assert!(d.get(u, w).is_some_and(|x| x <= a + b));
                    }
                }
            }
        }
    }

    #[test]
    fn prop_neighborhoods_are_nested(net in arb_network(), h in 0usize..6) {
        for v in net.nodes() {
            let inner = neighborhood(&net, v, h);
            prop_assert!(!inner.contains(&v));
            prop_assert!(inner.is_subset(&neighborhood(&net, v, h + 1)));
        }
    }
}
