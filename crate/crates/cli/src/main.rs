use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use opinion_shift::dynamics::{integrate_transient, steady_state};
use opinion_shift::experiment::{run_experiment, write_csv, write_json, ExperimentSpec};
use opinion_shift::generate::generate_er;
use opinion_shift::graph::{
    families, gadget_graph, is_vertex_cover, load_edge_list, write_edge_list, LoadOptions, LeaderConfig, Model,
    Stubbornness, WeightedDigraph,
};
use opinion_shift::selector::{bound_search_with, brute_force, greedy_with, GreedyImpl, SelectionProblem};
use opinion_shift::single_leader::{Heuristic, SingleLeaderProblem, SingleLeaderSolver};
use opinion_shift::walks::{ResistanceKernel, WalkKernel};
use opinion_shift::Error;

#[derive(Parser)]
#[command(name = "opinion-shift", version, about = "Steady-state opinions and leader selection with two leader parties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random-walk analytics per node, and per pair with --pairs.
    Analyze(AnalyzeArgs),
    /// Best single party-1 leader against one party-0 leader.
    Single(SingleArgs),
    /// Choose up to k party-1 leaders so the average opinion approaches alpha.
    Select(SelectArgs),
    /// Steady state (and optionally the transient) for given leader sets.
    Simulate(SimulateArgs),
    /// Run a preset or JSON-described experiment.
    Experiment(ExperimentArgs),
    /// Print the star-plus-cubic gadget graph.
    Gadget(GadgetArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list with `u v [w]` lines.
    #[arg(long, conflicts_with = "er")]
    graph: Option<PathBuf>,
    /// Generate a connected Erdős–Rényi graph instead, as `N,P`.
    #[arg(long, value_parser = parse_er)]
    er: Option<(usize, f64)>,
    /// Mirror every edge of the edge list.
    #[arg(long)]
    undirected: bool,
    /// Keep the first weight of repeated edges instead of summing.
    #[arg(long)]
    dedupe: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_er(s: &str) -> Result<(usize, f64), String> {
    let (n, p) = s.split_once(',').ok_or("expected N,P")?;
    let n = n.trim().parse().map_err(|e| format!("bad N: {e}"))?;
    let p = p.trim().parse().map_err(|e| format!("bad P: {e}"))?;
    Ok((n, p))
}

impl GraphArgs {
    fn load(&self) -> anyhow::Result<WeightedDigraph> {
        match (&self.graph, self.er) {
            (Some(path), _) => {
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                Ok(load_edge_list(
                    BufReader::new(file),
                    LoadOptions {
                        undirected: self.undirected,
                        dedupe: self.dedupe,
                    },
                )?)
            }
            (None, Some((n, p))) => Ok(generate_er(n, p, self.seed, true)?),
            (None, None) => Err(Error::Validation("pass --graph or --er".into()).into()),
        }
    }
}

#[derive(Args)]
struct LeaderArgs {
    #[arg(long, default_value = "absolute")]
    model: Model,
    /// Party-0 leaders, comma separated labels.
    #[arg(long, value_delimiter = ',', required = true)]
    s0: Vec<String>,
    /// Uniform stubbornness for the influenced model.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Node pairs `u:v`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    #[arg(long, value_enum, default_value = "json")]
    out: Format,
}

#[derive(Args)]
struct SingleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    leaders: LeaderArgs,
    #[arg(long)]
    alpha: f64,
    /// optimal, ds, er, dsk or random
    #[arg(long, default_value = "optimal")]
    method: String,
    #[arg(long, value_delimiter = ',')]
    candidates: Vec<String>,
    #[arg(long, value_enum, default_value = "json")]
    out: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectMethod {
    BoundSearch,
    Greedy,
    BruteForce,
}

#[derive(Clone, Copy, ValueEnum)]
enum Implementation {
    Fast,
    Naive,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    leaders: LeaderArgs,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long, value_delimiter = ',')]
    candidates: Vec<String>,
    #[arg(long, value_enum, default_value = "bound-search")]
    method: SelectMethod,
    /// Greedy scoring: incremental updates or a solve per candidate.
    #[arg(long = "impl", value_enum, default_value = "fast")]
    implementation: Implementation,
    #[arg(long, value_enum, default_value = "json")]
    out: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    leaders: LeaderArgs,
    #[arg(long, value_delimiter = ',')]
    s1: Vec<String>,
    /// Write the RK4 trajectory as CSV here.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Initial follower opinion.
    #[arg(long, default_value_t = 0.5)]
    x0: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// approx-sweep, delta-sweep, single-heuristics or multi-heuristics
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// JSON experiment description.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "absolute")]
    model: Model,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the repetition count.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Write `<output>.csv` and `<output>.json` instead of printing.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    out: Format,
}

#[derive(Args)]
struct GadgetArgs {
    /// petersen or k4
    #[arg(long, default_value = "petersen")]
    cubic: String,
    #[arg(long, default_value_t = 3.0)]
    star_weight: f64,
    /// Party-1 leaders; the center is the single party-0 leader.
    #[arg(long, value_delimiter = ',')]
    s1: Vec<String>,
}

fn node_ids(g: &WeightedDigraph, labels: &[String]) -> Result<Vec<usize>, Error> {
    labels
        .iter()
        .map(|l| {
            g.node_id(l.trim())
                .ok_or_else(|| Error::Validation(format!("unknown node '{l}'")))
        })
        .collect()
}

fn label_list(g: &WeightedDigraph, ids: &[usize]) -> Vec<String> {
    ids.iter().map(|&v| g.label(v).to_string()).collect()
}

fn kappa_for(model: Model, n: usize, kappa: f64) -> Result<Option<Stubbornness>, Error> {
    match model {
        Model::Absolute => Ok(None),
        Model::Influenced => Stubbornness::uniform(n, kappa).map(Some),
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn print_csv<T: Serialize>(rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct NodeRow {
    node: String,
    out_degree: f64,
    stationary: f64,
    information_centrality: Option<f64>,
}

#[derive(Serialize)]
struct PairRow {
    u: String,
    v: String,
    hitting_time_uv: f64,
    hitting_time_vu: f64,
    commute_time: f64,
    domination_uv: f64,
    domination_vu: f64,
    effective_resistance: Option<f64>,
}

fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let g = args.graph.load()?;
    let k = WalkKernel::new(&g)?;
    let resistance = if g.is_undirected() {
        Some(ResistanceKernel::new(&g)?)
    } else {
        None
    };
    let nodes: Vec<NodeRow> = (0..g.node_count())
        .map(|v| NodeRow {
            node: g.label(v).to_string(),
            out_degree: g.out_degree(v),
            stationary: k.stationary()[v],
            information_centrality: resistance.as_ref().map(|r| r.information_centrality(v)),
        })
        .collect();
    let mut pairs = Vec::new();
    for spec in &args.pairs {
        let (u, v) = spec
            .split_once(':')
            .ok_or_else(|| Error::Validation(format!("pair '{spec}' is not u:v")))?;
        let ids = node_ids(&g, &[u.to_string(), v.to_string()])?;
        let (u, v) = (ids[0], ids[1]);
        pairs.push(PairRow {
            u: g.label(u).to_string(),
            v: g.label(v).to_string(),
            hitting_time_uv: k.hitting_time(u, v),
            hitting_time_vu: k.hitting_time(v, u),
            commute_time: k.commute_time(u, v),
            domination_uv: k.domination_score(u, v),
            domination_vu: k.domination_score(v, u),
            effective_resistance: resistance.as_ref().map(|r| r.effective_resistance(u, v)),
        });
    }
    match args.out {
        Format::Json => print_json(&serde_json::json!({ "nodes": nodes, "pairs": pairs })),
        Format::Csv if pairs.is_empty() => print_csv(&nodes),
        Format::Csv => print_csv(&pairs),
    }
}

#[derive(Serialize)]
struct SingleOutput {
    heuristic: &'static str,
    model: Model,
    s0: String,
    s1: String,
    alpha: f64,
    mu: f64,
    f: f64,
    numerator: f64,
    denominator: f64,
}

fn single(args: SingleArgs) -> anyhow::Result<()> {
    let g = args.graph.load()?;
    let s0 = node_ids(&g, &args.leaders.s0)?;
    if s0.len() != 1 {
        return Err(Error::Validation("single needs exactly one s0 leader".into()).into());
    }
    let candidates = if args.candidates.is_empty() {
        None
    } else {
        Some(node_ids(&g, &args.candidates)?)
    };
    let solver = SingleLeaderSolver::new(SingleLeaderProblem {
        graph: &g,
        s0: s0[0],
        alpha: args.alpha,
        model: args.leaders.model,
        kappa: kappa_for(args.leaders.model, g.node_count(), args.leaders.kappa)?,
        candidates,
    })?;
    let choice = solver.select(Heuristic::parse(&args.method, args.graph.seed)?)?;
    let out = SingleOutput {
        heuristic: choice.heuristic,
        model: args.leaders.model,
        s0: g.label(s0[0]).to_string(),
        s1: g.label(choice.s1).to_string(),
        alpha: args.alpha,
        mu: choice.report.mu,
        f: choice.report.f,
        numerator: choice.report.numerator,
        denominator: choice.report.denominator,
    };
    match args.out {
        Format::Json => print_json(&out),
        Format::Csv => print_csv(&[out]),
    }
}

#[derive(Serialize)]
struct SelectOutput {
    s1: Vec<String>,
    mu: f64,
    f: f64,
    alpha: f64,
    k: usize,
    delta: f64,
    trace: Vec<opinion_shift::selector::TraceEntry>,
}

#[derive(Serialize)]
struct SelectRow {
    s1: String,
    mu: f64,
    f: f64,
    alpha: f64,
    k: usize,
    delta: f64,
}

fn select(args: SelectArgs) -> anyhow::Result<()> {
    let g = args.graph.load()?;
    let s0 = node_ids(&g, &args.leaders.s0)?;
    let mut problem = match args.leaders.model {
        Model::Absolute => SelectionProblem::absolute(&g, s0, args.alpha, args.k),
        Model::Influenced => SelectionProblem::influenced(
            &g,
            s0,
            args.alpha,
            args.k,
            Stubbornness::uniform(g.node_count(), args.leaders.kappa)?,
        ),
    }
    .with_delta(args.delta);
    if !args.candidates.is_empty() {
        let mut q = node_ids(&g, &args.candidates)?;
        q.sort_unstable();
        q.dedup();
        problem = problem.with_candidates(q);
    }
    problem.validate()?;
    let imp = match args.implementation {
        Implementation::Fast => GreedyImpl::Fast,
        Implementation::Naive => GreedyImpl::Naive,
    };
    let (set, mu, trace) = match args.method {
        SelectMethod::BoundSearch => {
            let r = bound_search_with(&problem, imp)?;
            (r.s1, r.mu, r.trace)
        }
        SelectMethod::Greedy => {
            let r = greedy_with(&problem, args.alpha, imp)?;
            (r.set, r.mu, Vec::new())
        }
        SelectMethod::BruteForce => {
            let (set, mu) = brute_force(&problem)?;
            (set, mu, Vec::new())
        }
    };
    let out = SelectOutput {
        s1: label_list(&g, &set),
        mu,
        f: (mu - args.alpha).abs(),
        alpha: args.alpha,
        k: args.k,
        delta: args.delta,
        trace,
    };
    match args.out {
        Format::Json => print_json(&out),
        Format::Csv => print_csv(&[SelectRow {
            s1: out.s1.join(";"),
            mu: out.mu,
            f: out.f,
            alpha: out.alpha,
            k: out.k,
            delta: out.delta,
        }]),
    }
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let g = args.graph.load()?;
    let n = g.node_count();
    let s0 = node_ids(&g, &args.leaders.s0)?;
    let s1 = node_ids(&g, &args.s1)?;
    let cfg = match args.leaders.model {
        Model::Absolute => LeaderConfig::absolute(s0.clone(), s1.clone()),
        Model::Influenced => LeaderConfig::influenced(
            s0.clone(),
            s1.clone(),
            Stubbornness::uniform(n, args.leaders.kappa)?,
        ),
    };
    let ss = steady_state(&g, &cfg)?;
    if let Some(path) = &args.trajectory {
        let x0 = opinion_shift::numerics::DenseVector::from_element(n, args.x0);
        let traj = integrate_transient(&g, &cfg, &x0, args.horizon, args.step)?;
        write_trajectory(path, &g, &traj.times, &traj.states)?;
    }
    print_json(&SimulateOutput {
        model: cfg.model,
        s0: label_list(&g, &s0),
        s1: label_list(&g, &s1),
        mu: ss.mu,
        x_hat: (0..n).map(|v| (g.label(v).to_string(), ss.x_hat[v])).collect(),
    })
}

#[derive(Serialize)]
struct SimulateOutput {
    model: Model,
    s0: Vec<String>,
    s1: Vec<String>,
    mu: f64,
    /// `(label, opinion)` in node order
    x_hat: Vec<(String, f64)>,
}

fn write_trajectory(
    path: &Path,
    g: &WeightedDigraph,
    times: &[f64],
    states: &[opinion_shift::numerics::DenseVector],
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["t".to_string()];
    header.extend(g.labels().iter().cloned());
    w.write_record(&header)?;
    for (t, x) in times.iter().zip(states) {
        let mut record = vec![t.to_string()];
        record.extend(x.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let mut spec = match (&args.preset, &args.spec) {
        (Some(name), _) => ExperimentSpec::preset(name, args.model, args.seed)
            .ok_or_else(|| Error::Validation(format!("unknown preset '{name}'")))?,
        (None, Some(path)) => ExperimentSpec::from_json_file(&path.to_string_lossy())?,
        (None, None) => return Err(Error::Validation("pass --preset or --spec".into()).into()),
    };
    if let Some(r) = args.repetitions {
        spec.repetitions = r;
    }
    let output = run_experiment(&spec)?;
    match &args.output {
        Some(base) => {
            let csv_path = base.with_extension("csv");
            let json_path = base.with_extension("json");
            write_csv(&output.rows, File::create(&csv_path)?)?;
            write_json(&output, File::create(&json_path)?)?;
            eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
            Ok(())
        }
        None => match args.out {
            Format::Csv => Ok(write_csv(&output.rows, io::stdout().lock())?),
            Format::Json => {
                let mut out = io::stdout().lock();
                write_json(&output, &mut out)?;
                writeln!(out)?;
                Ok(())
            }
        },
    }
}

fn gadget(args: GadgetArgs) -> anyhow::Result<()> {
    let cubic = families::named_cubic(&args.cubic)
        .ok_or_else(|| Error::Validation(format!("unknown cubic graph '{}'", args.cubic)))?;
    let (g, center) = gadget_graph(&cubic, args.star_weight)?;
    let mut out = io::stdout().lock();
    out.write_all(write_edge_list(&g).as_bytes())?;
    if !args.s1.is_empty() {
        let s1 = node_ids(&g, &args.s1)?;
        let ss = steady_state(&g, &LeaderConfig::absolute(vec![center], s1.clone()))?;
        writeln!(out, "# mu = {}", ss.mu)?;
        writeln!(out, "# vertex_cover = {}", is_vertex_cover(&cubic, &s1))?;
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("OPINION_SHIFT_THREADS") {
        let threads: usize = value
            .parse()
            .map_err(|_| anyhow!(Error::Validation(format!("OPINION_SHIFT_THREADS='{value}' is not a count"))))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numeric() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Single(a) => single(a),
        Command::Select(a) => select(a),
        Command::Simulate(a) => simulate(a),
        Command::Experiment(a) => experiment(a),
        Command::Gadget(a) => gadget(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
