//! Reproducible experiment runs over generated or loaded graphs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{generate_er, indexed_seed, random_subset, rng, sub_seed};
use crate::graph::{families, gadget_graph, load_edge_list, LoadOptions, Model, Stubbornness, WeightedDigraph};
use crate::selector::{
    bound_search, greedy_fast, Evaluator, ExhaustiveTable, SelectionProblem, DEFAULT_BUDGET, DEFAULT_DELTA,
};
use crate::single_leader::{balance_absolute, balance_influenced, Heuristic, SingleLeaderProblem, SingleLeaderSolver};
use crate::walks::WalkKernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GraphSource {
    EdgeList {
        path: String,
        #[serde(default)]
        undirected: bool,
        #[serde(default)]
        dedupe: bool,
    },
    /// Connected `G(n, p)`, resampled per repetition.
    Er { n: usize, p: f64 },
    Gadget {
        cubic: String,
        #[serde(default = "default_star_weight")]
        star_weight: f64,
    },
}

fn default_star_weight() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LeaderSource {
    Explicit { nodes: Vec<String> },
    Random { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Multi-leader selection, one row per (α, k, δ, method).
    Selection,
    /// One leader per party, one row per (α, heuristic).
    SingleLeader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub graph: GraphSource,
    pub model: Model,
    pub s0: LeaderSource,
    pub alphas: Vec<f64>,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    pub methods: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_ks() -> Vec<usize> {
    vec![1]
}

fn default_deltas() -> Vec<f64> {
    vec![DEFAULT_DELTA]
}

fn default_kappa() -> f64 {
    1.0
}

fn default_reps() -> usize {
    1
}

/// Methods recognized for [`ExperimentKind::Selection`].
pub const SELECTION_METHODS: [&str; 5] = ["bound-search", "greedy", "brute-force", "pds", "random"];
/// Methods recognized for [`ExperimentKind::SingleLeader`].
pub const SINGLE_METHODS: [&str; 5] = ["optimal", "ds", "er", "dsk", "random"];

impl ExperimentSpec {
    /// Built-in setups; `model` picks the leader system.
    ///
    /// - `approx-sweep`: ER(30, 0.1), three random S0 leaders, k = 1..5,
    ///   bound search against brute force over 10 graphs.
    /// - `delta-sweep`: ER(50, 0.1), five S0 leaders, k = 4, δ from 0.25 to 1e-4.
    /// - `single-heuristics`: one leader per party on ER(100, 0.05).
    /// - `multi-heuristics`: bound search, PDS and random with |S0| = k = 10.
    pub fn preset(name: &str, model: Model, seed: u64) -> Option<Self> {
        let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let spec = match name {
            "approx-sweep" => Self {
                name: name.into(),
                kind: ExperimentKind::Selection,
                graph: GraphSource::Er { n: 30, p: 0.1 },
                model,
                s0: LeaderSource::Random { count: 3 },
                alphas: vec![0.25, 0.5, 0.75],
                ks: (1..=5).collect(),
                deltas: vec![1e-4],
                kappa: 1.0,
                repetitions: 10,
                methods: strings(&["bound-search", "brute-force"]),
                seed,
            },
            "delta-sweep" => Self {
                name: name.into(),
                kind: ExperimentKind::Selection,
                graph: GraphSource::Er { n: 50, p: 0.1 },
                model,
                s0: LeaderSource::Random { count: 5 },
                alphas: vec![0.2, 0.35, 0.5],
                ks: vec![4],
                deltas: vec![0.25, 0.1, 0.05, 0.01, 1e-3, 1e-4],
                kappa: 1.0,
                repetitions: 1,
                methods: strings(&["bound-search", "brute-force"]),
                seed,
            },
            "single-heuristics" => Self {
                name: name.into(),
                kind: ExperimentKind::SingleLeader,
                graph: GraphSource::Er { n: 100, p: 0.05 },
                model,
                s0: LeaderSource::Random { count: 1 },
                alphas: vec![0.25, 0.5, 0.75, 1.0],
                ks: vec![1],
                deltas: vec![DEFAULT_DELTA],
                kappa: 1.0,
                repetitions: 1,
                methods: strings(match model {
                    Model::Absolute => &["optimal", "ds", "er", "random"],
                    Model::Influenced => &["optimal", "dsk", "er", "random"],
                }),
                seed,
            },
            "multi-heuristics" => Self {
                name: name.into(),
                kind: ExperimentKind::Selection,
                graph: GraphSource::Er { n: 100, p: 0.05 },
                model,
                s0: LeaderSource::Random { count: 10 },
                alphas: vec![0.25, 0.5, 0.75, 1.0],
                ks: vec![10],
                deltas: vec![DEFAULT_DELTA],
                kappa: 1.0,
                repetitions: 1,
                methods: strings(&["bound-search", "pds", "random"]),
                seed,
            },
            _ => return None,
        };
        Some(spec)
    }

    pub fn from_json_file(path: &str) -> Result<Self> {
        let file = File::open(path)?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::validation(format!("experiment spec {path}: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let known: &[&str] = match self.kind {
            ExperimentKind::Selection => &SELECTION_METHODS,
            ExperimentKind::SingleLeader => &SINGLE_METHODS,
        };
        if let Some(m) = self.methods.iter().find(|m| !known.contains(&m.as_str())) {
            return Err(Error::validation(format!("unknown method '{m}' for this experiment kind")));
        }
        if self.methods.is_empty() || self.alphas.is_empty() || self.ks.is_empty() || self.deltas.is_empty() {
            return Err(Error::validation("methods, alphas, ks and deltas must be nonempty"));
        }
        if self.repetitions == 0 {
            return Err(Error::validation("need at least one repetition"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::validation("stubbornness must be positive"));
        }
        if self.kind == ExperimentKind::SingleLeader {
            let single = match &self.s0 {
                LeaderSource::Explicit { nodes } => nodes.len() == 1,
                LeaderSource::Random { count } => *count == 1,
            };
            if !single {
                return Err(Error::validation("single-leader experiments need exactly one S0 leader"));
            }
        }
        Ok(())
    }

    fn graph_for(&self, rep: usize) -> Result<WeightedDigraph> {
        match &self.graph {
            GraphSource::EdgeList { path, undirected, dedupe } => {
                let file = File::open(path)?;
                load_edge_list(
                    BufReader::new(file),
                    LoadOptions {
                        undirected: *undirected,
                        dedupe: *dedupe,
                    },
                )
            }
            GraphSource::Er { n, p } => generate_er(*n, *p, indexed_seed(sub_seed(self.seed, "graph"), rep as u64), true),
            GraphSource::Gadget { cubic, star_weight } => {
                let c = families::named_cubic(cubic)
                    .ok_or_else(|| Error::validation(format!("unknown cubic graph '{cubic}'")))?;
                Ok(gadget_graph(&c, *star_weight)?.0)
            }
        }
    }

    fn s0_for(&self, g: &WeightedDigraph, rep: usize) -> Result<Vec<usize>> {
        match &self.s0 {
            LeaderSource::Explicit { nodes } => nodes
                .iter()
                .map(|l| g.node_id(l).ok_or_else(|| Error::validation(format!("unknown node '{l}'"))))
                .collect(),
            LeaderSource::Random { count } => {
                if *count == 0 || *count >= g.node_count() {
                    return Err(Error::validation("random S0 size must be between 1 and n - 1"));
                }
                let all: Vec<usize> = (0..g.node_count()).collect();
                Ok(random_subset(&all, *count, indexed_seed(sub_seed(self.seed, "s0"), rep as u64)))
            }
        }
    }
}

/// One result line; `rep` is the repetition index or `mean` for aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub rep: String,
    pub alpha: f64,
    pub k: usize,
    pub delta: f64,
    pub method: String,
    pub mu: Option<f64>,
    pub f: Option<f64>,
    pub runtime_ms: f64,
    /// Chosen labels separated by `;`.
    pub s1: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub rows: Vec<ExperimentRow>,
}

struct Job {
    rep: usize,
    alpha: f64,
    k: usize,
    delta: f64,
    method_index: usize,
}

struct RepContext {
    graph: WeightedDigraph,
    s0: Vec<usize>,
    kernel: Option<WalkKernel>,
    table: Option<ExhaustiveTable>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let contexts: Vec<Result<RepContext>> = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| prepare(spec, rep))
        .collect();

    let mut jobs = Vec::new();
    for rep in 0..spec.repetitions {
        for &alpha in &spec.alphas {
            let ks: &[usize] = match spec.kind {
                ExperimentKind::Selection => &spec.ks,
                ExperimentKind::SingleLeader => &[1],
            };
            for &k in ks {
                for (di, &delta) in spec.deltas.iter().enumerate() {
                    for (method_index, m) in spec.methods.iter().enumerate() {
                        // only bound search depends on δ
                        if di > 0 && m != "bound-search" {
                            continue;
                        }
                        jobs.push(Job {
                            rep,
                            alpha,
                            k,
                            delta,
                            method_index,
                        });
                    }
                }
            }
        }
    }

    let mut rows: Vec<(usize, ExperimentRow)> = jobs
        .par_iter()
        .map(|job| {
            let method = &spec.methods[job.method_index];
            let started = Instant::now();
            let outcome = match &contexts[job.rep] {
                Ok(ctx) => run_job(spec, ctx, job, method),
                Err(e) => Err(Error::validation(format!("repetition setup failed: {e}"))),
            };
            let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
            let graph = contexts[job.rep].as_ref().ok().map(|c| &c.graph);
            let row = match outcome {
                Ok((set, mu)) => ExperimentRow {
                    rep: job.rep.to_string(),
                    alpha: job.alpha,
                    k: job.k,
                    delta: job.delta,
                    method: method.clone(),
                    mu: Some(mu),
                    f: Some((mu - job.alpha).abs()),
                    runtime_ms,
                    s1: labels(graph.expect("successful rows have a graph"), &set),
                    error: None,
                },
                Err(e) => ExperimentRow {
                    rep: job.rep.to_string(),
                    alpha: job.alpha,
                    k: job.k,
                    delta: job.delta,
                    method: method.clone(),
                    mu: None,
                    f: None,
                    runtime_ms,
                    s1: String::new(),
                    error: Some(e.to_string()),
                },
            };
            (job.rep * spec.methods.len() + job.method_index, row)
        })
        .collect();

    rows.sort_by(|(ia, a), (ib, b)| {
        (a.alpha, a.k, -a.delta)
            .partial_cmp(&(b.alpha, b.k, -b.delta))
            .expect("finite parameters")
            .then(ia.cmp(ib))
    });
    let mut rows: Vec<ExperimentRow> = rows.into_iter().map(|(_, r)| r).collect();
    let aggregates = aggregate(spec, &rows);
    rows.extend(aggregates);
    Ok(ExperimentOutput {
        spec: spec.clone(),
        rows,
    })
}

fn labels(g: &WeightedDigraph, set: &[usize]) -> String {
    set.iter().map(|&v| g.label(v)).collect::<Vec<_>>().join(";")
}

fn prepare(spec: &ExperimentSpec, rep: usize) -> Result<RepContext> {
    let graph = spec.graph_for(rep)?;
    let s0 = spec.s0_for(&graph, rep)?;
    let needs_kernel = spec.kind == ExperimentKind::SingleLeader || spec.methods.iter().any(|m| m == "pds");
    let kernel = if needs_kernel { Some(WalkKernel::new(&graph)?) } else { None };
    let table = if spec.kind == ExperimentKind::Selection && spec.methods.iter().any(|m| m == "brute-force") {
        let k_max = *spec.ks.iter().max().expect("ks is nonempty");
        let p = problem(spec, &graph, &s0, 0.5, 1, DEFAULT_DELTA);
        // over budget: leave it to the per-row error
        ExhaustiveTable::build(&p, k_max, DEFAULT_BUDGET).ok()
    } else {
        None
    };
    Ok(RepContext {
        graph,
        s0,
        kernel,
        table,
    })
}

fn problem<'g>(
    spec: &ExperimentSpec,
    g: &'g WeightedDigraph,
    s0: &[usize],
    alpha: f64,
    k: usize,
    delta: f64,
) -> SelectionProblem<'g> {
    let p = match spec.model {
        Model::Absolute => SelectionProblem::absolute(g, s0.to_vec(), alpha, k),
        Model::Influenced => SelectionProblem::influenced(
            g,
            s0.to_vec(),
            alpha,
            k,
            Stubbornness::uniform(g.node_count(), spec.kappa).expect("kappa validated"),
        ),
    };
    p.with_delta(delta)
}

fn run_job(spec: &ExperimentSpec, ctx: &RepContext, job: &Job, method: &str) -> Result<(Vec<usize>, f64)> {
    let heuristic_seed = indexed_seed(
        sub_seed(spec.seed, "heuristics"),
        (job.rep as u64) << 32 | (job.alpha * 1e6) as u64,
    );
    match spec.kind {
        ExperimentKind::SingleLeader => {
            let solver = SingleLeaderSolver::new(SingleLeaderProblem {
                graph: &ctx.graph,
                s0: ctx.s0[0],
                alpha: job.alpha,
                model: spec.model,
                kappa: Some(Stubbornness::uniform(ctx.graph.node_count(), spec.kappa)?),
                candidates: None,
            })?;
            let choice = solver.select(Heuristic::parse(method, heuristic_seed)?)?;
            Ok((vec![choice.s1], choice.report.mu))
        }
        ExperimentKind::Selection => {
            let p = problem(spec, &ctx.graph, &ctx.s0, job.alpha, job.k, job.delta);
            p.validate()?;
            match method {
                "bound-search" => {
                    let r = bound_search(&p)?;
                    Ok((r.s1, r.mu))
                }
                "greedy" => {
                    let out = greedy_fast(&p, job.alpha)?;
                    Ok((out.set, out.mu))
                }
                "brute-force" => match &ctx.table {
                    Some(t) => Ok(t.best(job.alpha, job.k)),
                    None => crate::selector::brute_force(&p),
                },
                "pds" => {
                    let set = pds(&p, ctx.kernel.as_ref().expect("kernel prepared for pds"))?;
                    let mu = p.mu(&set)?;
                    Ok((set, mu))
                }
                "random" => {
                    let mut set: Vec<usize> = p
                        .candidates
                        .choose_multiple(&mut rng(heuristic_seed), job.k)
                        .copied()
                        .collect();
                    set.sort_unstable();
                    let mu = Evaluator::new(&p).mu(&set)?;
                    Ok((set, mu))
                }
                other => Err(Error::validation(format!("unknown method '{other}'"))),
            }
        }
    }
}

/// Pairs each S0 leader, in id order, with the remaining candidate whose
/// single-leader balance against it is best; stops after `k` picks.
pub fn pds(problem: &SelectionProblem<'_>, kernel: &WalkKernel) -> Result<Vec<usize>> {
    let mut remaining = problem.candidates.clone();
    let mut chosen = Vec::new();
    let kappa = |v: usize| problem.kappa.as_ref().map_or(1.0, |k| k.get(v));
    for &s0 in &problem.s0 {
        if chosen.len() == problem.k || remaining.is_empty() {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in remaining.iter().enumerate() {
            let report = match problem.model {
                Model::Absolute => balance_absolute(kernel, s0, v, problem.alpha)?,
                Model::Influenced => balance_influenced(kernel, s0, v, kappa(s0), kappa(v), problem.alpha)?,
            };
            if best.is_none_or(|(_, f)| report.f < f) {
                best = Some((i, report.f));
            }
        }
        let (i, _) = best.expect("remaining is nonempty");
        chosen.push(remaining.remove(i));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

fn aggregate(spec: &ExperimentSpec, rows: &[ExperimentRow]) -> Vec<ExperimentRow> {
    let order = |m: &str| spec.methods.iter().position(|x| x == m).unwrap_or(usize::MAX);
    let mut groups: BTreeMap<(usize, usize, usize, usize), Vec<&ExperimentRow>> = BTreeMap::new();
    for r in rows {
        let ai = spec.alphas.iter().position(|&a| a == r.alpha).unwrap_or(0);
        let di = spec.deltas.iter().position(|&d| d == r.delta).unwrap_or(0);
        groups.entry((ai, r.k, di, order(&r.method))).or_default().push(r);
    }
    groups
        .into_values()
        .map(|group| {
            let ok: Vec<&&ExperimentRow> = group.iter().filter(|r| r.mu.is_some()).collect();
            let mean = |f: &dyn Fn(&ExperimentRow) -> f64| {
                if ok.is_empty() {
                    None
                } else {
                    Some(ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
                }
            };
            let first = group[0];
            ExperimentRow {
                rep: "mean".into(),
                alpha: first.alpha,
                k: first.k,
                delta: first.delta,
                method: first.method.clone(),
                mu: mean(&|r| r.mu.unwrap_or(0.0)),
                f: mean(&|r| r.f.unwrap_or(0.0)),
                runtime_ms: group.iter().map(|r| r.runtime_ms).sum::<f64>() / group.len() as f64,
                s1: String::new(),
                error: (ok.len() < group.len()).then(|| format!("{} of {} runs failed", group.len() - ok.len(), group.len())),
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(output: &ExperimentOutput, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, output).map_err(|e| Error::Io(e.into()))
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::validation(format!("csv: {other:?}")),
    }
}
