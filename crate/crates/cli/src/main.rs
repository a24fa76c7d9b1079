use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cascade_core::coupling::{containment_stats, dominance_report};
use cascade_core::generate::{generate, GeneratorSpec, Uniform};
use cascade_core::imm::imm;
use cascade_core::io::{read_instance_file, write_instance};
use cascade_core::prob::gadget_probs;
use cascade_core::rr::build_collection;
use cascade_core::sim::estimate_sigma;
use cascade_core::stream::{stream, Purpose};
use cascade_core::{DirectedGraph, Instance, Model, NodeId};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "cascade", version, about = "IC / SIR / TSIR cascades, IC-vs-SIR comparison and RR-set seed selection")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance, or import a raw edge list, and write it to a file.
    Gen(GenArgs),
    /// Monte-Carlo spread estimate from forward cascades.
    Sim(SimArgs),
    /// Spread estimate from RR-set coverage.
    Estimate(EstimateArgs),
    /// IMM seed selection.
    Select(SelectArgs),
    /// IC vs matched SIR spread for one or more seed sets (SIR instance).
    Compare(CompareArgs),
    /// Coupled RR samples from a fixed root; counts containment violations.
    Couple(CoupleArgs),
    /// Hub infection probabilities of the two-layer gadget over a grid.
    GadgetScan(ScanArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Er,
    Star,
    Path,
    Fig1,
    Fig2,
    /// Raw edge list `src dst [prob]` with arbitrary node labels.
    Edges,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Ic,
    Sir,
    Tsir,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, value_enum, default_value = "sir")]
    model: ModelArg,
    /// Horizon for TSIR.
    #[arg(long = "horizon", short = 'T')]
    horizon: Option<u32>,
    /// Output instance file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node count (er).
    #[arg(long)]
    n: Option<usize>,
    /// Edge density over ordered pairs (er).
    #[arg(long)]
    density: Option<f64>,
    /// Leaves (star) or star leaves (fig2).
    #[arg(long)]
    leaves: Option<usize>,
    /// Path length in edges (path).
    #[arg(long)]
    length: Option<usize>,
    /// Gadget width (fig1, fig2).
    #[arg(long)]
    b: Option<usize>,
    /// Sinks behind the hub (fig1, fig2).
    #[arg(long)]
    n0: Option<usize>,
    /// Gadget copies sharing the seed (fig2).
    #[arg(long, default_value_t = 1)]
    copies: usize,
    /// Star edge probability (fig2).
    #[arg(long)]
    left_prob: Option<f64>,
    /// Edge probability: p under IC, beta under SIR/TSIR.
    #[arg(long, default_value_t = 0.1)]
    prob: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Raw edge list (edges).
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated node ids.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Seeds,
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_parser = parse_seeds)]
    seeds: Seeds,
    /// Number of RR sets.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct SelectArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    ell: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    /// One seed set per flag, e.g. `--seeds 0 --seeds 1,2`.
    #[arg(long, value_parser = parse_seeds, required = true)]
    seeds: Vec<Seeds>,
    #[arg(long, default_value_t = 100_000)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct CoupleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    root: NodeId,
    #[arg(long, default_value_t = 100_000)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct ScanArgs {
    /// Comma-separated gadget widths.
    #[arg(long, value_parser = parse_list_arg::<u64>, default_value = "2,4,8,16,32,64,128,256,512,1024")]
    b: List<u64>,
    #[arg(long, value_parser = parse_list_arg::<f64>, default_value = "0.01")]
    beta: List<f64>,
    #[arg(long, value_parser = parse_list_arg::<f64>, default_value = "0.1")]
    gamma: List<f64>,
    /// Use beta = b^-1.5 and gamma = b^-0.5 instead of the grids.
    #[arg(long)]
    scaled: bool,
    /// Also write the rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| format!("invalid value {t:?}")))
        .collect()
}

/// Comma-separated node ids.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct Seeds(Vec<NodeId>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    parse_list(s).map(Seeds)
}

/// Comma-separated list of values.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct List<T>(Vec<T>);

fn parse_list_arg<T: std::str::FromStr>(s: &str) -> Result<List<T>, String> {
    parse_list(s).map(List)
}

#[derive(Debug)]
enum Failure {
    /// Bad or missing flags; reported with usage text.
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Run = Result<Value, Failure>;

fn load(path: &Path) -> Result<Instance, Failure> {
    read_instance_file(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn model_of(arg: ModelArg, horizon: Option<u32>) -> Result<Model, Failure> {
    match (arg, horizon) {
        (ModelArg::Ic, _) => Ok(Model::Ic),
        (ModelArg::Sir, _) => Ok(Model::Sir),
        (ModelArg::Tsir, Some(t)) => Ok(Model::Tsir { horizon: t }),
        (ModelArg::Tsir, None) => Err(Failure::Usage("--model tsir needs --horizon".into())),
    }
}

fn need<T: Copy>(v: Option<T>, flag: &str, kind: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--kind {kind} needs --{flag}")))
}

/// Reads `src dst [prob]` lines; labels are remapped to dense ids in order of
/// first appearance.
fn import_edges(path: &Path, model: Model, default_prob: f64, gamma: f64) -> Result<(Instance, Vec<String>), Failure> {
    let file = fs::File::open(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let mut probs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tok: Vec<&str> = body.split_whitespace().collect();
        if tok.len() < 2 || tok.len() > 3 {
            return Err(Failure::Runtime(format!("{}:{}: expected `src dst [prob]`", path.display(), i + 1)));
        }
        let mut id = |label: &str| {
            *ids.entry(label.to_string()).or_insert_with(|| {
                labels.push(label.to_string());
                labels.len() as NodeId - 1
            })
        };
        let (u, v) = (id(tok[0]), id(tok[1]));
        let p = match tok.get(2) {
            Some(t) => t.parse().map_err(|_| Failure::Runtime(format!("{}:{}: bad probability {t:?}", path.display(), i + 1)))?,
            None => default_prob,
        };
        edges.push((u, v));
        probs.push(p);
    }
    let n = labels.len();
    let g = DirectedGraph::from_edges(n, &edges)?;
    let inst = match model {
        Model::Ic => Instance::ic(g, probs)?,
        Model::Sir => Instance::sir(g, probs, vec![gamma; n])?,
        Model::Tsir { horizon } => Instance::tsir(g, probs, vec![gamma; n], horizon)?,
    };
    Ok((inst, labels))
}

fn gen(a: &GenArgs) -> Run {
    let model = model_of(a.model, a.horizon)?;
    let params = Uniform { model, prob: a.prob, gamma: a.gamma };
    let kind = match a.kind {
        Kind::Er => "er",
        Kind::Star => "star",
        Kind::Path => "path",
        Kind::Fig1 => "fig1",
        Kind::Fig2 => "fig2",
        Kind::Edges => "edges",
    };
    let (inst, labels) = match a.kind {
        Kind::Edges => {
            let input = a.input.as_deref().ok_or_else(|| Failure::Usage("--kind edges needs --input".into()))?;
            let (inst, labels) = import_edges(input, model, a.prob, a.gamma)?;
            (inst, Some(labels))
        }
        _ => {
            let spec = match a.kind {
                Kind::Er => GeneratorSpec::ErdosRenyi { n: need(a.n, "n", kind)?, edge_density: need(a.density, "density", kind)?, params },
                Kind::Star => GeneratorSpec::Star { leaves: need(a.leaves, "leaves", kind)?, params },
                Kind::Path => GeneratorSpec::Path { length: need(a.length, "length", kind)?, params },
                Kind::Fig1 => GeneratorSpec::Fig1Gadget {
                    b: need(a.b, "b", kind)?,
                    n0: need(a.n0, "n0", kind)?,
                    beta: a.prob,
                    gamma: a.gamma,
                    model,
                },
                _ => GeneratorSpec::Fig2Gadget {
                    star_leaves: need(a.leaves, "leaves", kind)?,
                    gadget_copies: a.copies,
                    b: need(a.b, "b", kind)?,
                    n0: need(a.n0, "n0", kind)?,
                    beta: a.prob,
                    gamma: a.gamma,
                    left_edge_prob: need(a.left_prob, "left-prob", kind)?,
                    model,
                },
            };
            (generate(&spec, &mut stream(a.seed, Purpose::Generator, 0))?, None)
        }
    };
    let file = fs::File::create(&a.out).map_err(|e| Failure::Runtime(format!("{}: {e}", a.out.display())))?;
    write_instance(&inst, std::io::BufWriter::new(file))?;
    let mut out = json!({
        "path": a.out,
        "model": inst.model().name(),
        "nodes": inst.node_count(),
        "edges": inst.edge_count(),
    });
    if let Some(labels) = labels {
        out["labels"] = json!(labels);
    }
    Ok(out)
}

fn sim(a: &SimArgs) -> Run {
    let inst = load(&a.instance)?;
    Ok(json!(estimate_sigma(&inst, &a.seeds.0, a.runs, a.seed)?))
}

fn estimate(a: &EstimateArgs) -> Run {
    let inst = load(&a.instance)?;
    let seeds = inst.check_seeds(&a.seeds.0)?;
    let coll = build_collection(&inst, a.samples, a.seed)?;
    let n = inst.node_count() as f64;
    let f = coll.coverage_fraction(&seeds);
    Ok(json!({
        "mean": n * f,
        "stderr": n * (f * (1.0 - f) / a.samples as f64).sqrt(),
        "samples": a.samples,
        "coverage": f,
        "total_work": coll.total_work(),
    }))
}

fn select(a: &SelectArgs) -> Run {
    let inst = load(&a.instance)?;
    Ok(json!(imm(&inst, a.k, a.epsilon, a.ell, a.seed)?))
}

fn compare(a: &CompareArgs) -> Run {
    let inst = load(&a.instance)?;
    let sets: Vec<Vec<NodeId>> = a.seeds.iter().map(|s| s.0.clone()).collect();
    Ok(json!(dominance_report(&inst, &sets, a.runs, a.seed)?))
}

fn couple(a: &CoupleArgs) -> Run {
    let inst = load(&a.instance)?;
    Ok(json!(containment_stats(&inst, a.root, a.runs, a.seed)?))
}

#[derive(Serialize)]
struct ScanRow {
    b: u64,
    beta: f64,
    gamma: f64,
    p1: f64,
    p2: f64,
    ratio: f64,
}

fn gadget_scan(a: &ScanArgs) -> Run {
    let mut rows = Vec::new();
    for &b in &a.b.0 {
        let grid: Vec<(f64, f64)> = if a.scaled {
            vec![((b as f64).powf(-1.5), (b as f64).powf(-0.5))]
        } else {
            a.beta.0.iter().flat_map(|&x| a.gamma.0.iter().map(move |&y| (x, y))).collect()
        };
        for (beta, gamma) in grid {
            let (p1, p2) = gadget_probs(b, beta, gamma)?;
            rows.push(ScanRow { b, beta, gamma, p1, p2, ratio: p1 / p2 });
        }
    }
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_path(path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(json!({ "rows": rows }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let (name, params, seed, result) = match &cli.command {
        Command::Gen(a) => ("gen", json!(a), Some(a.seed), gen(a)),
        Command::Sim(a) => ("sim", json!(a), Some(a.seed), sim(a)),
        Command::Estimate(a) => ("estimate", json!(a), Some(a.seed), estimate(a)),
        Command::Select(a) => ("select", json!(a), Some(a.seed), select(a)),
        Command::Compare(a) => ("compare", json!(a), Some(a.seed), compare(a)),
        Command::Couple(a) => ("couple", json!(a), Some(a.seed), couple(a)),
        Command::GadgetScan(a) => ("gadget-scan", json!(a), None, gadget_scan(a)),
    };
    match result {
        Ok(result) => {
            let out = json!({
                "manifest": {
                    "command": name,
                    "params": params,
                    "seed": seed,
                    "version": env!("CARGO_PKG_VERSION"),
                    "duration_secs": start.elapsed().as_secs_f64(),
                },
                "result": result,
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("json values serialize"));
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            let cmd = Cli::command();
            let mut sub = cmd.find_subcommand(name).cloned().unwrap_or(cmd).bin_name(format!("cascade {name}"));
            sub.error(ErrorKind::MissingRequiredArgument, msg).exit()
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
