//! Declarative experiment runner. A config names a topology, a server
//! population, a workload and sweep axes; running it yields one CSV table
//! with a row per discovery episode followed by per-point aggregates.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::availability::{AvailabilityError, AvailabilityKind, AvailabilityModel};
use crate::discovery::{
    assign_partial_nodes, assign_servers, discover_route_with, random_ranking, server_answer, DiscoveryError,
    DiscoveryMode, ServerKind, ServerRole, ServerStrategy, WalletPolicy,
};
use crate::graph::{neighborhood_with, Channel, HopDirection, Msat, Network, NodeId, Route};
use crate::ingest::{parse_describegraph, IngestError};
use crate::metrics::{
    aggregate, gen_workload, leak_rate, sample_pair, stretch, Aggregates, MetricsError, MetricsRecord, WorkloadKind,
};
use crate::pathing::WeightedGraph;
use crate::seed;
use crate::topology::{
    gen_adversarial, gen_scale_free_with_capacity, gen_sparse_ring_with_capacity, read_edge_list, AdversarialKind,
    AdversarialSpec, GeneratedTopology, TopologyError, DEFAULT_CAPACITY,
};

/// Largest network on which `pairs = all` is accepted.
pub const ALL_PAIRS_LIMIT: usize = 1500;

/// Cache size of partial nodes unless configured otherwise.
pub const DEFAULT_PN_CACHE: usize = 50;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Availability(#[from] AvailabilityError),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    NeighborhoodCdf,
    Efficiency,
    Effectiveness,
    FeeEffectiveness,
    PartialNodes,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::NeighborhoodCdf,
        Family::Efficiency,
        Family::Effectiveness,
        Family::FeeEffectiveness,
        Family::PartialNodes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::NeighborhoodCdf => "neighborhood-cdf",
            Family::Efficiency => "efficiency",
            Family::Effectiveness => "effectiveness",
            Family::FeeEffectiveness => "fee-effectiveness",
            Family::PartialNodes => "partial-nodes",
        }
    }

    fn mode(self) -> DiscoveryMode {
        match self {
            Family::Effectiveness => DiscoveryMode::Effectiveness,
            _ => DiscoveryMode::Efficiency,
        }
    }

    /// Candidates requested from each server when the config leaves it open.
    pub fn default_routes_per_server(self) -> usize {
        match self {
            Family::FeeEffectiveness => 10,
            _ => 5,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| config_err(format!("unknown family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TopologySource {
    Ring {
        n: usize,
    },
    ScaleFree {
        n: usize,
        m_attach: usize,
    },
    Adversarial {
        kind: AdversarialKind,
        m: u64,
    },
    /// A `describegraph` JSON snapshot.
    Snapshot(PathBuf),
    /// The plain edge-list format written by `gen`.
    EdgeList(PathBuf),
}

impl fmt::Display for TopologySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySource::Ring { n } => write!(f, "ring:{n}"),
            TopologySource::ScaleFree { n, m_attach } => write!(f, "scale-free:{n}:{m_attach}"),
            TopologySource::Adversarial { kind, m } => {
                let name = match kind {
                    AdversarialKind::Lemma1 => "lemma1",
                    AdversarialKind::Lemma2 => "lemma2",
                    AdversarialKind::Lemma3 => "lemma3",
                };
                write!(f, "{name}:{m}")
            }
            TopologySource::Snapshot(p) => write!(f, "snapshot:{}", p.display()),
            TopologySource::EdgeList(p) => write!(f, "edges:{}", p.display()),
        }
    }
}

impl FromStr for TopologySource {
    type Err = ExperimentError;

    /// Accepts `ring[:n]`, `scale-free[:n[:m]]`, `lemma{1,2,3}[:M]`,
    /// `snapshot:<path>` and `edges:<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let bad = || config_err(format!("cannot parse topology `{s}`"));
        let nums: Vec<&str> = if rest.is_empty() { Vec::new() } else { rest.split(':').collect() };
        let num = |i: usize, default: u64| -> Result<u64, ExperimentError> {
            nums.get(i).map_or(Ok(default), |v| v.parse().map_err(|_| bad()))
        };
        let adversarial = |kind| -> Result<TopologySource, ExperimentError> {
            if nums.len() > 1 {
                return Err(bad());
            }
            Ok(TopologySource::Adversarial { kind, m: num(0, 5)? })
        };
        match head {
            "ring" if nums.len() <= 1 => Ok(TopologySource::Ring { n: num(0, 1000)? as usize }),
            "scale-free" if nums.len() <= 2 => {
                Ok(TopologySource::ScaleFree { n: num(0, 500)? as usize, m_attach: num(1, 2)? as usize })
            }
            "lemma1" => adversarial(AdversarialKind::Lemma1),
            "lemma2" => adversarial(AdversarialKind::Lemma2),
            "lemma3" => adversarial(AdversarialKind::Lemma3),
            "snapshot" if !rest.is_empty() => Ok(TopologySource::Snapshot(PathBuf::from(rest))),
            "edges" if !rest.is_empty() => Ok(TopologySource::EdgeList(PathBuf::from(rest))),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ServerSelection {
    /// One sweep point per fraction; larger fractions contain smaller ones.
    Fractions(Vec<f64>),
    TopDegree(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSelection {
    All,
    Sample(usize),
}

impl fmt::Display for PairSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairSelection::All => f.write_str("all"),
            PairSelection::Sample(n) => write!(f, "sample:{n}"),
        }
    }
}

impl FromStr for PairSelection {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(PairSelection::All);
        }
        s.strip_prefix("sample:")
            .and_then(|n| n.parse().ok())
            .map(PairSelection::Sample)
            .ok_or_else(|| config_err(format!("cannot parse pair selection `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub topology: TopologySource,
    /// Overrides the capacity of every channel.
    pub capacity: Option<Msat>,
    pub servers: ServerSelection,
    /// Fractions of nodes acting as partial nodes, drawn from non-trampolines.
    pub pn_fractions: Vec<f64>,
    pub pn_cache: usize,
    pub workload: WorkloadKind,
    pub pairs: PairSelection,
    pub hs: Vec<usize>,
    /// Query budget; `None` queries every server in reach.
    pub q: Option<usize>,
    /// Uniform-liquidity factors. Mutually exclusive with `ps`.
    pub factors: Vec<f64>,
    /// Per-channel acceptance probabilities.
    pub ps: Vec<f64>,
    pub amount: Msat,
    pub trials: usize,
    pub seed: u64,
    /// Defaults to the family's value.
    pub routes_per_server: Option<usize>,
    pub direction: HopDirection,
}

impl ExperimentConfig {
    pub fn new(family: Family, topology: TopologySource) -> Self {
        ExperimentConfig {
            family,
            topology,
            capacity: None,
            servers: ServerSelection::Fractions(vec![0.1]),
            pn_fractions: match family {
                Family::PartialNodes => vec![0.0, 0.1],
                _ => vec![0.0],
            },
            pn_cache: DEFAULT_PN_CACHE,
            workload: WorkloadKind::AllPairs,
            pairs: PairSelection::Sample(500),
            hs: vec![3],
            q: None,
            factors: Vec::new(),
            ps: Vec::new(),
            amount: crate::DEFAULT_AMOUNT,
            trials: 1,
            seed: 0,
            routes_per_server: None,
            direction: HopDirection::Outgoing,
        }
    }

    pub fn routes_per_server(&self) -> usize {
        self.routes_per_server.unwrap_or_else(|| self.family.default_routes_per_server())
    }

    fn is_adversarial(&self) -> bool {
        matches!(self.topology, TopologySource::Adversarial { .. })
    }

    /// Checks everything that does not need the network.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.hs.is_empty() {
            return Err(config_err("the h list is empty"));
        }
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.amount == 0 {
            return Err(config_err("amount must be positive"));
        }
        if self.routes_per_server == Some(0) {
            return Err(config_err("routes per server must be at least 1"));
        }
        if self.q == Some(0) {
            return Err(config_err("q must be at least 1"));
        }
        if let ServerSelection::Fractions(fs) = &self.servers {
            if fs.is_empty() && !self.is_adversarial() {
                return Err(config_err("the tn-fraction list is empty"));
            }
            if let Some(f) = fs.iter().find(|f| !(0.0..=1.0).contains(*f)) {
                return Err(config_err(format!("tn fraction {f} outside [0, 1]")));
            }
        }
        if self.pn_fractions.is_empty() {
            return Err(config_err("the pn-fraction list is empty"));
        }
        if let Some(f) = self.pn_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(config_err(format!("pn fraction {f} outside [0, 1]")));
        }
        if !self.factors.is_empty() && !self.ps.is_empty() {
            return Err(config_err("give either factors or acceptance probabilities, not both"));
        }
        for &f in &self.factors {
            AvailabilityKind::uniform_liquidity(f)?;
        }
        for &p in &self.ps {
            AvailabilityKind::bernoulli(p)?;
        }
        if self.pairs == PairSelection::Sample(0) {
            return Err(config_err("sample size must be positive"));
        }
        if self.workload == WorkloadKind::PowerLawActivity && self.pairs == PairSelection::All {
            return Err(config_err("the power-law workload needs sampled pairs"));
        }
        if let TopologySource::Adversarial { kind: AdversarialKind::Lemma1, .. } = self.topology {
            if self.q.is_none() {
                return Err(config_err("lemma1 needs an explicit q"));
            }
        }
        Ok(())
    }
}

/// Which acceptance rule a sweep point uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AvailabilityPoint {
    Always,
    Factor(f64),
    Probability(f64),
    /// The first `n` candidates presented fail.
    Blocked(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h: usize,
    pub tn_fraction: f64,
    pub pn_fraction: f64,
    pub availability: AvailabilityPoint,
}

impl SweepPoint {
    fn factor(&self) -> Option<f64> {
        match self.availability {
            AvailabilityPoint::Factor(f) => Some(f),
            _ => None,
        }
    }

    fn p(&self) -> Option<f64> {
        match self.availability {
            AvailabilityPoint::Probability(p) => Some(p),
            _ => None,
        }
    }

    fn kind(&self) -> AvailabilityKind {
        match self.availability {
            AvailabilityPoint::Always => AvailabilityKind::AlwaysAvailable,
            AvailabilityPoint::Factor(f) => AvailabilityKind::uniform_liquidity(f).expect("validated"),
            AvailabilityPoint::Probability(p) => AvailabilityKind::bernoulli(p).expect("validated"),
            AvailabilityPoint::Blocked(n) => AvailabilityKind::blocked_first(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: SweepPoint,
    pub aggregates: Aggregates,
}

/// One node's neighborhood at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodRow {
    pub h: usize,
    pub tn_fraction: f64,
    pub trial: usize,
    pub node: NodeId,
    pub size: usize,
    pub fraction: f64,
    pub servers_in_reach: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub csv: String,
    /// Discovery rows, trial-major then point-major then by pair.
    pub records: Vec<MetricsRecord>,
    pub summaries: Vec<PointSummary>,
    pub neighborhoods: Vec<NeighborhoodRow>,
}

/// A loaded network together with its adversarial roles, if any.
pub struct Prepared {
    pub network: Network,
    pub adversarial: Option<GeneratedTopology>,
}

fn with_capacity(network: Network, capacity: Msat) -> Result<Network, ExperimentError> {
    let keys = network.nodes().map(|v| network.key(v).to_string()).collect();
    let channels: Vec<Channel> = network.channels().iter().map(|c| Channel { capacity, ..*c }).collect();
    Ok(Network::new(keys, channels).map_err(TopologyError::from)?)
}

fn read_path(path: &PathBuf) -> Result<Vec<u8>, ExperimentError> {
    std::fs::read(path).map_err(|source| ExperimentError::Read { path: path.clone(), source })
}

/// Builds or loads the configured topology.
pub fn prepare_topology(config: &ExperimentConfig) -> Result<Prepared, ExperimentError> {
    let topo_seed = seed::derive(config.seed, "topology", &[]);
    let capacity = config.capacity.unwrap_or(DEFAULT_CAPACITY);
    let (network, adversarial) = match &config.topology {
        TopologySource::Ring { n } => (gen_sparse_ring_with_capacity(*n, topo_seed, capacity)?, None),
        TopologySource::ScaleFree { n, m_attach } => {
            (gen_scale_free_with_capacity(*n, *m_attach, topo_seed, capacity)?, None)
        }
        TopologySource::Adversarial { kind, m } => {
            let g = gen_adversarial(AdversarialSpec { kind: *kind, q: config.q.unwrap_or(1), m: *m })?;
            let net = match config.capacity {
                Some(c) => with_capacity(g.network.clone(), c)?,
                None => g.network.clone(),
            };
            (net, Some(g))
        }
        TopologySource::Snapshot(path) => {
            let net = parse_describegraph(&read_path(path)?)?;
            (net, None)
        }
        TopologySource::EdgeList(path) => {
            let file = File::open(path).map_err(|source| ExperimentError::Read { path: path.clone(), source })?;
            (read_edge_list(BufReader::new(file))?, None)
        }
    };
    let network = match (&config.topology, config.capacity) {
        (TopologySource::Snapshot(_) | TopologySource::EdgeList(_), Some(c)) => with_capacity(network, c)?,
        _ => network,
    };
    Ok(Prepared { network, adversarial })
}

/// Validates `config`, builds the topology and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let prepared = prepare_topology(config)?;
    run_on(config, &prepared)
}

/// Runs the experiment on an already prepared topology.
pub fn run_on(config: &ExperimentConfig, prepared: &Prepared) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let network = &prepared.network;
    let n = network.node_count();
    if n < 2 {
        return Err(config_err("the network needs at least two nodes"));
    }
    if config.pairs == PairSelection::All && n > ALL_PAIRS_LIMIT && prepared.adversarial.is_none() {
        return Err(config_err(format!("pairs=all is limited to {ALL_PAIRS_LIMIT} nodes, network has {n}")));
    }
    if let ServerSelection::TopDegree(k) = config.servers {
        if k > n {
            return Err(config_err(format!("tn-top-k {k} exceeds the node count {n}")));
        }
    }
    let workload = gen_workload(network, config.workload, seed::derive(config.seed, "workload", &[]))?;
    let runner = Runner { config, network, adversarial: prepared.adversarial.as_ref(), workload };
    if config.family == Family::NeighborhoodCdf {
        runner.neighborhoods()
    } else {
        runner.discovery()
    }
}

struct Runner<'a> {
    config: &'a ExperimentConfig,
    network: &'a Network,
    adversarial: Option<&'a GeneratedTopology>,
    workload: crate::metrics::Workload,
}

/// A trampoline population and the partial-node populations layered on it.
struct ServerSet {
    tn_fraction: f64,
    /// Indexed like `config.pn_fractions`.
    with_partials: Vec<Vec<ServerRole>>,
}

impl<'a> Runner<'a> {
    fn n(&self) -> usize {
        self.network.node_count()
    }

    fn pairs(&self, trial: usize) -> Vec<(NodeId, NodeId)> {
        if let Some(adv) = self.adversarial {
            return adv.targets.iter().map(|&t| (adv.source, t)).collect();
        }
        match self.config.pairs {
            PairSelection::All => self.workload.all_pairs().collect(),
            PairSelection::Sample(count) => {
                let mut rng = seed::rng(seed::derive(self.config.seed, "pairs", &[trial as u64]));
                (0..count).map(|_| sample_pair(&self.workload, &mut rng)).collect()
            }
        }
    }

    fn trampolines(&self, trial: usize) -> Result<Vec<(f64, Vec<ServerRole>)>, ExperimentError> {
        let n = self.n() as f64;
        if let Some(adv) = self.adversarial {
            let roles = adv.tn_set.iter().map(|&v| ServerRole::trampoline(v)).collect::<Vec<_>>();
            return Ok(vec![(roles.len() as f64 / n, roles)]);
        }
        let seed = seed::derive(self.config.seed, "servers", &[trial as u64]);
        match &self.config.servers {
            ServerSelection::Fractions(fs) => {
                fs.iter().map(|&f| Ok((f, assign_servers(self.network, &ServerStrategy::Fraction(f), seed)?))).collect()
            }
            ServerSelection::TopDegree(k) => {
                let roles = assign_servers(self.network, &ServerStrategy::TopDegree(*k), seed)?;
                Ok(vec![(*k as f64 / n, roles)])
            }
        }
    }

    fn server_sets(&self, graph: &WeightedGraph<'_>, trial: usize) -> Result<Vec<ServerSet>, ExperimentError> {
        let ranking = random_ranking(self.network, seed::derive(self.config.seed, "partial", &[trial as u64]));
        let cache_seed = seed::derive(self.config.seed, "partial-cache", &[trial as u64]);
        let n = self.n();
        Ok(self
            .trampolines(trial)?
            .into_iter()
            .map(|(tn_fraction, tns)| {
                let with_partials = self
                    .config
                    .pn_fractions
                    .iter()
                    .map(|&f| {
                        let count = (f * n as f64).round() as usize;
                        let pn_nodes: Vec<NodeId> =
                            ranking.iter().copied().filter(|v| tns.iter().all(|r| r.node != *v)).take(count).collect();
                        let mut roles = tns.clone();
                        roles.extend(assign_partial_nodes(graph, &pn_nodes, self.config.pn_cache, cache_seed));
                        roles.sort_by_key(|r| r.node);
                        roles
                    })
                    .collect();
                ServerSet { tn_fraction, with_partials }
            })
            .collect())
    }

    fn availability_points(&self) -> Vec<AvailabilityPoint> {
        if !self.config.factors.is_empty() {
            return self.config.factors.iter().map(|&f| AvailabilityPoint::Factor(f)).collect();
        }
        if !self.config.ps.is_empty() {
            return self.config.ps.iter().map(|&p| AvailabilityPoint::Probability(p)).collect();
        }
        match self.adversarial {
            Some(adv) if adv.blocked_candidates > 0 => vec![AvailabilityPoint::Blocked(adv.blocked_candidates)],
            _ => vec![AvailabilityPoint::Always],
        }
    }

    fn max_queries(&self) -> usize {
        self.config.q.unwrap_or(usize::MAX)
    }

    fn discovery(&self) -> Result<ExperimentOutput, ExperimentError> {
        let config = self.config;
        let graph = WeightedGraph::new(self.network, config.amount);
        let avail_points = self.availability_points();
        let k = config.routes_per_server();
        let mode = config.family.mode();
        let mut records = Vec::new();
        let mut point_index: Vec<SweepPoint> = Vec::new();
        let mut by_point: Vec<Vec<MetricsRecord>> = Vec::new();

        for trial in 0..config.trials {
            let pairs = self.pairs(trial);
            let sets = self.server_sets(&graph, trial)?;
            let order_seed = seed::derive(config.seed, "ordering", &[trial as u64]);
            let avail_seed = seed::derive(config.seed, "availability", &[trial as u64]);

            // (point, servers) in emission order
            let mut points: Vec<(SweepPoint, &[ServerRole])> = Vec::new();
            for &h in &config.hs {
                for set in &sets {
                    for (pi, &pn_fraction) in config.pn_fractions.iter().enumerate() {
                        for &availability in &avail_points {
                            let point = SweepPoint { h, tn_fraction: set.tn_fraction, pn_fraction, availability };
                            points.push((point, &set.with_partials[pi]));
                        }
                    }
                }
            }
            if trial == 0 {
                point_index = points.iter().map(|(p, _)| *p).collect();
                by_point = vec![Vec::new(); points.len()];
            }

            let per_pair: Vec<Vec<MetricsRecord>> = pairs
                .par_iter()
                .enumerate()
                .map(|(pair_index, &(s, t))| {
                    let optimal = graph.shortest_route(s, t);
                    let mut memo: HashMap<(NodeId, bool), Vec<Route>> = HashMap::new();
                    points
                        .iter()
                        .map(|(point, servers)| {
                            let mut policy = WalletPolicy::new(point.h, self.max_queries());
                            policy.routes_per_server = k;
                            policy.order_seed = order_seed;
                            policy.direction = config.direction;
                            let availability = AvailabilityModel::new(point.kind(), avail_seed);
                            let mut answer = |server: &ServerRole| {
                                let key = (server.node, matches!(server.kind, ServerKind::Partial { .. }));
                                memo.entry(key)
                                    .or_insert_with(|| {
                                        let routes = server_answer(&graph, server, s, t, k);
                                        assert!(
                                            routes.iter().all(|r| server.kind == ServerKind::Altruistic
                                                || r.contains_node(self.network, server.node)),
                                            "server {} answered a route that avoids it",
                                            server.node
                                        );
                                        routes
                                    })
                                    .clone()
                            };
                            let outcome = discover_route_with(
                                &graph,
                                servers,
                                &policy,
                                s,
                                t,
                                &availability,
                                pair_index as u64,
                                mode,
                                &mut answer,
                            );
                            let optimal_weight = optimal.as_ref().map(|r| r.weight);
                            let found_weight = outcome.route.as_ref().map(|r| r.weight);
                            MetricsRecord {
                                h: point.h,
                                q: policy.max_queries,
                                tn_fraction: point.tn_fraction,
                                pn_fraction: point.pn_fraction,
                                factor: point.factor(),
                                p: point.p(),
                                trial,
                                pair_index,
                                source: s,
                                target: t,
                                optimal_weight,
                                found_weight,
                                stretch: found_weight.zip(optimal_weight).map(|(f, o)| stretch(f, o)),
                                queries_issued: outcome.queries_issued,
                                candidates_offered: outcome.candidates_offered,
                                candidates_tried: outcome.candidates_tried,
                                leak_rate: leak_rate(self.network, &outcome, optimal.as_ref()),
                                success: outcome.success,
                                no_server: outcome.no_server,
                            }
                        })
                        .collect()
                })
                .collect();

            for (pi, bucket) in by_point.iter_mut().enumerate() {
                let start = records.len();
                records.extend(per_pair.iter().map(|rows| rows[pi].clone()));
                bucket.extend_from_slice(&records[start..]);
            }
        }

        let summaries: Vec<PointSummary> = point_index
            .iter()
            .zip(&by_point)
            .map(|(point, rows)| PointSummary { point: *point, aggregates: aggregate(rows) })
            .collect();
        let csv = self.discovery_csv(&records, &summaries)?;
        Ok(ExperimentOutput { csv, records, summaries, neighborhoods: Vec::new() })
    }

    fn neighborhoods(&self) -> Result<ExperimentOutput, ExperimentError> {
        let config = self.config;
        let n = self.n();
        let mut rows = Vec::new();
        for trial in 0..config.trials {
            let centers: Vec<NodeId> = match (self.adversarial, config.pairs) {
                (Some(adv), _) => vec![adv.source],
                (None, PairSelection::All) => self.network.nodes().collect(),
                (None, PairSelection::Sample(count)) => {
                    let mut rng = seed::rng(seed::derive(config.seed, "pairs", &[trial as u64]));
                    (0..count).map(|_| sample_pair(&self.workload, &mut rng).0).collect()
                }
            };
            let tns = self.trampolines(trial)?;
            for &h in &config.hs {
                for (tn_fraction, roles) in &tns {
                    let batch: Vec<NeighborhoodRow> = centers
                        .par_iter()
                        .map(|&v| {
                            let reach = neighborhood_with(self.network, v, h, config.direction);
                            NeighborhoodRow {
                                h,
                                tn_fraction: *tn_fraction,
                                trial,
                                node: v,
                                size: reach.len(),
                                fraction: reach.len() as f64 / (n - 1) as f64,
                                servers_in_reach: roles.iter().filter(|r| reach.contains(&r.node)).count(),
                            }
                        })
                        .collect();
                    rows.extend(batch);
                }
            }
        }
        let csv = self.neighborhood_csv(&rows)?;
        Ok(ExperimentOutput { csv, records: Vec::new(), summaries: Vec::new(), neighborhoods: rows })
    }

    fn metadata(&self, rows: usize) -> String {
        let c = self.config;
        let sample_size = match (self.adversarial, c.pairs) {
            (Some(adv), _) => adv.targets.len(),
            (None, PairSelection::All) => self.n() * (self.n() - 1),
            (None, PairSelection::Sample(k)) => k,
        };
        let servers = match &c.servers {
            ServerSelection::Fractions(fs) => {
                format!("tn-fraction:{}", fs.iter().map(|f| fmt_float(*f)).collect::<Vec<_>>().join(";"))
            }
            ServerSelection::TopDegree(k) => format!("tn-top-k:{k}"),
        };
        let capacity = c.capacity.map_or_else(|| "default".to_string(), |v| v.to_string());
        format!(
            "# family={} topology={} nodes={} channels={} servers={} workload={} pairs={} sample_size={} trials={} \
             seed={} amount={} routes_per_server={} q={} capacity={} direction={} rows={}\n",
            c.family,
            c.topology,
            self.n(),
            self.network.channel_count(),
            servers,
            match c.workload {
                WorkloadKind::AllPairs => "all-pairs",
                WorkloadKind::PowerLawActivity => "power-law",
            },
            c.pairs,
            sample_size,
            c.trials,
            c.seed,
            c.amount,
            c.routes_per_server(),
            c.q.map_or_else(|| "inf".to_string(), |q| q.to_string()),
            capacity,
            match c.direction {
                HopDirection::Outgoing => "outgoing",
                HopDirection::Undirected => "undirected",
            },
            rows,
        )
    }

    fn discovery_csv(&self, records: &[MetricsRecord], summaries: &[PointSummary]) -> Result<String, ExperimentError> {
        let mut out = self.metadata(records.len() + summaries.len()).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(DISCOVERY_HEADER)?;
            for r in records {
                w.write_record(record_row(r))?;
            }
            for s in summaries {
                w.write_record(aggregate_row(s, self.max_queries()))?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }

    fn neighborhood_csv(&self, rows: &[NeighborhoodRow]) -> Result<String, ExperimentError> {
        // aggregate per (h, tn_fraction) over all trials, in first-seen order
        let mut keys: Vec<(usize, f64)> = Vec::new();
        let mut groups: Vec<Vec<&NeighborhoodRow>> = Vec::new();
        for r in rows {
            match keys.iter().position(|&(h, f)| h == r.h && f == r.tn_fraction) {
                Some(i) => groups[i].push(r),
                None => {
                    keys.push((r.h, r.tn_fraction));
                    groups.push(vec![r]);
                }
            }
        }
        let mut out = self.metadata(rows.len() + keys.len()).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(NEIGHBORHOOD_HEADER)?;
            for r in rows {
                w.write_record([
                    "record".to_string(),
                    r.h.to_string(),
                    fmt_float(r.tn_fraction),
                    r.trial.to_string(),
                    r.node.to_string(),
                    r.size.to_string(),
                    fmt_float(r.fraction),
                    r.servers_in_reach.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
            for ((h, f), group) in keys.iter().zip(&groups) {
                let count = group.len() as f64;
                let mean_fraction = group.iter().map(|r| r.fraction).sum::<f64>() / count;
                let with_server = group.iter().filter(|r| r.servers_in_reach > 0).count() as f64 / count;
                w.write_record([
                    "aggregate".to_string(),
                    h.to_string(),
                    fmt_float(*f),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    group.len().to_string(),
                    fmt_float(mean_fraction),
                    fmt_float(with_server),
                ])?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }
}

pub const DISCOVERY_HEADER: [&str; 28] = [
    "row",
    "h",
    "q",
    "tn_fraction",
    "pn_fraction",
    "factor",
    "p",
    "trial",
    "pair_index",
    "source",
    "target",
    "optimal_weight",
    "found_weight",
    "stretch",
    "queries_issued",
    "candidates_offered",
    "candidates_tried",
    "leak_rate",
    "success",
    "no_server",
    "records",
    "mean_stretch",
    "max_stretch",
    "success_rate",
    "mean_queries",
    "mean_leak_rate",
    "no_route_fraction",
    "mean_fee",
];

pub const NEIGHBORHOOD_HEADER: [&str; 11] = [
    "row",
    "h",
    "tn_fraction",
    "trial",
    "node",
    "neighborhood_size",
    "neighborhood_fraction",
    "servers_in_reach",
    "nodes",
    "mean_neighborhood_fraction",
    "with_server_fraction",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn opt_float(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_float)
}

fn fmt_q(q: usize) -> String {
    if q == usize::MAX {
        "inf".to_string()
    } else {
        q.to_string()
    }
}

fn record_row(r: &MetricsRecord) -> Vec<String> {
    let mut row = vec![
        "record".to_string(),
        r.h.to_string(),
        fmt_q(r.q),
        fmt_float(r.tn_fraction),
        fmt_float(r.pn_fraction),
        opt_float(r.factor),
        opt_float(r.p),
        r.trial.to_string(),
        r.pair_index.to_string(),
        r.source.to_string(),
        r.target.to_string(),
        opt(r.optimal_weight),
        opt(r.found_weight),
        opt_float(r.stretch),
        r.queries_issued.to_string(),
        r.candidates_offered.to_string(),
        r.candidates_tried.to_string(),
        fmt_float(r.leak_rate),
        r.success.to_string(),
        r.no_server.to_string(),
    ];
    row.resize(DISCOVERY_HEADER.len(), String::new());
    row
}

fn aggregate_row(s: &PointSummary, q: usize) -> Vec<String> {
    let p = &s.point;
    let a = &s.aggregates;
    let mut row = vec![
        "aggregate".to_string(),
        p.h.to_string(),
        fmt_q(q),
        fmt_float(p.tn_fraction),
        fmt_float(p.pn_fraction),
        opt_float(p.factor()),
        opt_float(p.p()),
    ];
    row.resize(20, String::new());
    row.extend([
        a.records.to_string(),
        opt_float(a.mean_stretch),
        opt_float(a.max_stretch),
        fmt_float(a.success_rate),
        fmt_float(a.mean_queries),
        fmt_float(a.mean_leak_rate),
        fmt_float(a.no_route_fraction),
        opt_float(a.mean_fee),
    ]);
    row
}

/// Formats with 12 significant digits, trailing zeros trimmed. Infinities
/// print as `inf` / `-inf`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
