use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use trampsim::experiment::{
    prepare_topology, run_experiment, ExperimentConfig, Family, PairSelection, ServerSelection, TopologySource,
};
use trampsim::graph::HopDirection;
use trampsim::lemmas::{self, Verdict};
use trampsim::metrics::WorkloadKind;
use trampsim::topology::write_edge_list;

#[derive(Parser)]
#[command(name = "trampsim", version, about = "Route discovery experiments on payment channel networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a topology as an edge list (`src dst base_fee rate capacity` per line).
    Gen(GenArgs),
    /// Neighborhood sizes per node and radius.
    NeighborhoodCdf(RunArgs),
    /// Stretch and leak rate of the cheapest route among queried servers.
    Efficiency(RunArgs),
    /// Queries until the first available route.
    Effectiveness(RunArgs),
    /// Fee of the cheapest available route when every server is asked.
    FeeEffectiveness(RunArgs),
    /// Stretch with and without partial nodes.
    PartialNodes(RunArgs),
    /// Check the worst-case constructions and analytic formulas.
    LemmaCheck,
}

#[derive(Args)]
struct GenArgs {
    /// ring[:n], scale-free[:n[:m]], lemma1[:M], lemma2[:M], lemma3[:M]
    #[arg(long, default_value = "ring")]
    topology: String,
    /// Query budget baked into the lemma1 construction.
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Channel capacity in msat.
    #[arg(long)]
    capacity: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorkloadArg {
    AllPairs,
    PowerLaw,
}

#[derive(Args)]
struct RunArgs {
    /// ring[:n], scale-free[:n[:m]], lemma1[:M], lemma2[:M], lemma3[:M],
    /// snapshot:<path> or edges:<path>
    #[arg(long, default_value = "ring")]
    topology: String,
    /// Trampoline fractions to sweep.
    #[arg(long, value_delimiter = ',', conflicts_with = "tn_top_k")]
    tn_fraction: Vec<f64>,
    /// Use the k highest-degree nodes as trampolines.
    #[arg(long)]
    tn_top_k: Option<usize>,
    /// Partial-node fractions to sweep.
    #[arg(long, value_delimiter = ',')]
    pn_fraction: Vec<f64>,
    /// Routes cached by each partial node.
    #[arg(long, default_value_t = 50)]
    pn_cache: usize,
    /// Neighborhood radii to sweep.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    h: Vec<usize>,
    /// Query budget; every server in reach when omitted.
    #[arg(long)]
    q: Option<usize>,
    /// Candidates requested per server (10 for fee-effectiveness, else 5).
    #[arg(long)]
    routes_per_tn: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    amount: u64,
    /// Uniform-liquidity factors to sweep.
    #[arg(long, value_delimiter = ',', conflicts_with = "p")]
    factor: Vec<f64>,
    /// Per-channel acceptance probabilities to sweep.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// all or sample:<N>
    #[arg(long, default_value = "sample:500")]
    pairs: String,
    #[arg(long, value_enum, default_value = "all-pairs")]
    workload: WorkloadArg,
    /// Override every channel's capacity (msat).
    #[arg(long)]
    capacity: Option<u64>,
    /// Count neighborhood hops in both directions.
    #[arg(long)]
    undirected: bool,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self, family: Family) -> Result<ExperimentConfig> {
        let topology: TopologySource = self.topology.parse()?;
        let mut c = ExperimentConfig::new(family, topology);
        c.servers = match self.tn_top_k {
            Some(k) => ServerSelection::TopDegree(k),
            None if self.tn_fraction.is_empty() => ServerSelection::Fractions(vec![0.1]),
            None => ServerSelection::Fractions(self.tn_fraction.clone()),
        };
        if !self.pn_fraction.is_empty() {
            c.pn_fractions = self.pn_fraction.clone();
        }
        c.pn_cache = self.pn_cache;
        c.hs = self.h.clone();
        c.q = self.q;
        c.routes_per_server = self.routes_per_tn;
        c.amount = self.amount;
        c.factors = self.factor.clone();
        c.ps = self.p.clone();
        c.trials = self.trials;
        c.seed = self.seed;
        c.pairs = self.pairs.parse::<PairSelection>()?;
        c.workload = match self.workload {
            WorkloadArg::AllPairs => WorkloadKind::AllPairs,
            WorkloadArg::PowerLaw => WorkloadKind::PowerLawActivity,
        };
        c.capacity = self.capacity;
        if self.undirected {
            c.direction = HopDirection::Undirected;
        }
        Ok(c)
    }
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(bytes).context("writing to stdout"),
    }
}

fn gen(args: &GenArgs) -> Result<()> {
    let topology: TopologySource = args.topology.parse()?;
    if matches!(topology, TopologySource::Snapshot(_) | TopologySource::EdgeList(_)) {
        bail!("gen builds synthetic topologies only");
    }
    let mut config = ExperimentConfig::new(Family::Efficiency, topology);
    config.seed = args.seed;
    config.capacity = args.capacity;
    config.q = Some(args.q);
    let prepared = prepare_topology(&config)?;
    let mut buf = Vec::new();
    if let Some(adv) = &prepared.adversarial {
        let list = |v: &[trampsim::NodeId]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        writeln!(buf, "# source={} trampolines={} targets={}", adv.source, list(&adv.tn_set), list(&adv.targets))?;
    }
    write_edge_list(&prepared.network, &mut buf)?;
    emit(args.out.as_ref(), &buf)
}

fn lemma_check() -> bool {
    let mut ok = true;
    for check in lemmas::report() {
        println!("{check}");
        ok &= check.verdict != Verdict::Fail;
    }
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => gen(args),
        Command::LemmaCheck => {
            return if lemma_check() { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
        Command::NeighborhoodCdf(a) => run(a, Family::NeighborhoodCdf),
        Command::Efficiency(a) => run(a, Family::Efficiency),
        Command::Effectiveness(a) => run(a, Family::Effectiveness),
        Command::FeeEffectiveness(a) => run(a, Family::FeeEffectiveness),
        Command::PartialNodes(a) => run(a, Family::PartialNodes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &RunArgs, family: Family) -> Result<()> {
    let config = args.config(family)?;
    let output = run_experiment(&config)?;
    emit(args.out.as_ref(), output.csv.as_bytes())
}
