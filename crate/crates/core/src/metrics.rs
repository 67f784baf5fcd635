//! Transaction workloads and the route discovery metrics: stretch, leak
//! rate and the analytic success bounds for scale-free networks.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::DiscoveryOutcome;
use crate::graph::{Network, NodeId, Route, Weight};
use crate::seed;

/// Nodes per activity group in the power-law workload.
pub const GROUP_SIZE: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("power-law workload needs at least {GROUP_SIZE} nodes, got {0}")]
    TooFewNodes(usize),
    #[error("workload needs at least two nodes")]
    Degenerate,
    #[error("success bound undefined for n = {0} (needs n >= 3)")]
    Domain(usize),
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadKind {
    AllPairs,
    PowerLawActivity,
}

/// Per-node transaction activity.
#[derive(Debug, Clone)]
pub struct Workload {
    pub kind: WorkloadKind,
    /// Activity weight of each node, indexed by node.
    pub activity: Vec<f64>,
    /// Group of each node (power-law only; all zero otherwise).
    pub group: Vec<usize>,
    sampler: WeightedIndex<f64>,
}

pub fn gen_workload(network: &Network, kind: WorkloadKind, seed: u64) -> Result<Workload, MetricsError> {
    let n = network.node_count();
    if n < 2 {
        return Err(MetricsError::Degenerate);
    }
    let (activity, group) = match kind {
        WorkloadKind::AllPairs => (vec![1.0; n], vec![0; n]),
        WorkloadKind::PowerLawActivity => {
            if n < GROUP_SIZE {
                return Err(MetricsError::TooFewNodes(n));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seed::rng(seed));
            let mut activity = vec![0.0; n];
            let mut group = vec![0; n];
            for (pos, &v) in order.iter().enumerate() {
                let g = pos / GROUP_SIZE;
                group[v] = g;
                activity[v] = 0.5f64.powi(g as i32);
            }
            (activity, group)
        }
    };
    let sampler = WeightedIndex::new(&activity).expect("positive activities");
    Ok(Workload { kind, activity, group, sampler })
}

impl Workload {
    pub fn node_count(&self) -> usize {
        self.activity.len()
    }

    /// Every ordered pair `(s, t)` with `s != t`, source-major.
    pub fn all_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> {
        let n = self.node_count() as u32;
        (0..n).flat_map(move |s| (0..n).filter(move |&t| t != s).map(move |t| (NodeId(s), NodeId(t))))
    }
}

/// Draws source and target independently by activity, rejecting `s == t`.
pub fn sample_pair<R: Rng + ?Sized>(workload: &Workload, rng: &mut R) -> (NodeId, NodeId) {
    loop {
        let s = workload.sampler.sample(rng);
        let t = workload.sampler.sample(rng);
        if s != t {
            return (NodeId(s as u32), NodeId(t as u32));
        }
    }
}

/// Found weight over optimal weight. A zero optimum gives 1 when the found
/// route is also free and infinity otherwise.
pub fn stretch(found: Weight, optimal: Weight) -> f64 {
    if optimal == 0 {
        return if found == 0 { 1.0 } else { f64::INFINITY };
    }
    found as f64 / optimal as f64
}

/// Aware third parties relative to the intermediates of the optimal route,
/// with the denominator floored at one.
pub fn leak_rate(network: &Network, outcome: &DiscoveryOutcome, optimal: Option<&Route>) -> f64 {
    let baseline = optimal.map_or(0, |r| r.intermediates(network).len());
    outcome.aware_nodes.len() as f64 / baseline.max(1) as f64
}

/// Lower bound on the success probability of querying the `q` highest-degree
/// nodes of a scale-free network:
/// `1 - (1 - p^(2 ln n / ln ln n))^(n (1 - 2^-q))`, natural logarithms.
pub fn scale_free_success_prob(n: usize, p: f64, q: u32) -> Result<f64, MetricsError> {
    if n < 3 {
        return Err(MetricsError::Domain(n));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(MetricsError::Probability(p));
    }
    let ln_n = (n as f64).ln();
    let path_len = 2.0 * ln_n / ln_n.ln();
    let per_route = p.powf(path_len);
    let routes = n as f64 * (1.0 - 0.5f64.powi(q as i32));
    // (1 - x)^m computed as exp(m · ln(1 - x))
    Ok(1.0 - (routes * (-per_route).ln_1p()).exp())
}

/// Chance that a top-`k` degree trampoline lies on the optimal route: `1 - 2^-k`.
pub fn tn_optimal_hit_prob(k: u32) -> f64 {
    1.0 - 0.5f64.powi(k as i32)
}

/// One emitted result row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub h: usize,
    pub q: usize,
    pub tn_fraction: f64,
    pub pn_fraction: f64,
    pub factor: Option<f64>,
    pub p: Option<f64>,
    pub trial: usize,
    pub pair_index: usize,
    pub source: NodeId,
    pub target: NodeId,
    pub optimal_weight: Option<Weight>,
    pub found_weight: Option<Weight>,
    pub stretch: Option<f64>,
    pub queries_issued: usize,
    pub candidates_offered: usize,
    pub candidates_tried: usize,
    pub leak_rate: f64,
    pub success: bool,
    pub no_server: bool,
}

/// Summary of a set of records.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aggregates {
    pub records: usize,
    /// Mean over records with a defined stretch.
    pub mean_stretch: Option<f64>,
    pub max_stretch: Option<f64>,
    pub success_rate: f64,
    pub mean_queries: f64,
    pub mean_leak_rate: f64,
    /// Fraction of records where no server offered any route.
    pub no_route_fraction: f64,
    /// Mean fee of successful routes.
    pub mean_fee: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn aggregate(records: &[MetricsRecord]) -> Aggregates {
    if records.is_empty() {
        return Aggregates::default();
    }
    let n = records.len() as f64;
    Aggregates {
        records: records.len(),
        mean_stretch: mean(records.iter().filter_map(|r| r.stretch)),
        max_stretch: records.iter().filter_map(|r| r.stretch).reduce(f64::max),
        success_rate: records.iter().filter(|r| r.success).count() as f64 / n,
        mean_queries: records.iter().map(|r| r.queries_issued as f64).sum::<f64>() / n,
        mean_leak_rate: records.iter().map(|r| r.leak_rate).sum::<f64>() / n,
        no_route_fraction: records.iter().filter(|r| r.candidates_offered == 0).count() as f64 / n,
        mean_fee: mean(records.iter().filter(|r| r.success).filter_map(|r| r.found_weight.map(|w| w as f64))),
    }
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or the inputs are shorter than two.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, my) = (mean(rx.iter().copied())?, mean(ry.iter().copied())?);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}
