//! Weighted directed graphs, leader configurations and the leader-equivalent
//! graph constructions.
//!
//! An edge `(u, v)` means that `u` follows `v`: `v` pulls the opinion of `u`
//! toward its own. Undirected graphs are stored as bidirectional digraphs with
//! symmetric weights.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::BufRead;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod families;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Immutable weighted digraph over nodes `0..n`.
///
/// Parallel edges are merged by summing their weights and self-loops are
/// rejected at construction. External labels are kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<(usize, f64)>>,
    in_adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedDigraph {
    /// Builds a graph on `n` nodes labelled `"0".."n-1"`.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::with_labels(labels, edges)
    }

    /// Builds a graph whose edges are mirrored in both directions.
    pub fn from_undirected_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Self::from_edges(n, mirror(edges))
    }

    pub fn with_labels<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = labels.len();
        if n == 0 {
            return Err(Error::validation("graph must have at least one node"));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::validation(format!(
                    "edge ({}, {}) has non-positive weight {w}",
                    labels[u], labels[v]
                )));
            }
            if u == v {
                return Err(Error::SelfLoop {
                    label: labels[u].clone(),
                });
            }
            *merged.entry((u, v)).or_insert(0.0) += w;
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((source, target), weight)| {
                out_adj[source].push((target, weight));
                in_adj[target].push((source, weight));
                Edge {
                    source,
                    target,
                    weight,
                }
            })
            .collect();
        Ok(Self {
            labels,
            edges,
            out_adj,
            in_adj,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of stored directed edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    /// Internal id of an external label.
    pub fn node_id(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn out_neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.out_adj[v]
    }

    pub fn in_neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.in_adj[v]
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.out_adj[u]
            .iter()
            .find(|&&(t, _)| t == v)
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn out_degree(&self, v: usize) -> f64 {
        self.out_adj[v].iter().map(|&(_, w)| w).sum()
    }

    pub fn out_degrees(&self) -> Vec<f64> {
        (0..self.node_count()).map(|v| self.out_degree(v)).collect()
    }

    /// Total edge weight; for an undirected graph this is `2m` in weighted form.
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut a = DMatrix::zeros(n, n);
        for e in &self.edges {
            a[(e.source, e.target)] = e.weight;
        }
        a
    }

    /// Out-degree Laplacian `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut l = DMatrix::zeros(n, n);
        for e in &self.edges {
            l[(e.source, e.target)] -= e.weight;
            l[(e.source, e.source)] += e.weight;
        }
        l
    }

    /// True when every edge has a reverse edge of equal weight.
    pub fn is_undirected(&self) -> bool {
        self.edges.iter().all(|e| {
            let back = self.weight(e.target, e.source);
            (back - e.weight).abs() <= 1e-12 * e.weight.max(back)
        })
    }

    pub fn is_strongly_connected(&self) -> bool {
        is_strongly_connected(self)
    }

    /// Nodes reachable from `start` along out-edges, as a mask.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        bfs(start, &self.out_adj)
    }
}

fn mirror<I>(edges: I) -> Vec<(usize, usize, f64)>
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    edges
        .into_iter()
        .flat_map(|(u, v, w)| [(u, v, w), (v, u, w)])
        .collect()
}

fn bfs(start: usize, adj: &[Vec<(usize, f64)>]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Every node reaches every other node. Linear time: one forward and one
/// backward search from node 0.
pub fn is_strongly_connected(g: &WeightedDigraph) -> bool {
    let forward = bfs(0, &g.out_adj);
    let backward = bfs(0, &g.in_adj);
    forward.iter().chain(backward.iter()).all(|&s| s)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Mirror every edge.
    pub undirected: bool,
    /// Keep weight of the first occurrence for duplicate edges instead of
    /// summing them.
    pub dedupe: bool,
}

/// Reads a whitespace separated edge list: `u v [w]` per line, `#` comments.
pub fn load_edge_list<R: BufRead>(reader: R, opts: LoadOptions) -> Result<WeightedDigraph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();

    let mut intern = |tok: &str, labels: &mut Vec<String>| -> usize {
        *ids.entry(tok.to_string()).or_insert_with(|| {
            labels.push(tok.to_string());
            labels.len() - 1
        })
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 'u v [w]', found {} fields", fields.len()),
            });
        }
        let weight = match fields.get(2) {
            Some(tok) => tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid weight '{tok}'"),
            })?,
            None => 1.0,
        };
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::NonPositiveWeight {
                line: lineno,
                weight,
            });
        }
        if fields[0] == fields[1] {
            return Err(Error::SelfLoop {
                label: fields[0].to_string(),
            });
        }
        let u = intern(fields[0], &mut labels);
        let v = intern(fields[1], &mut labels);
        let pairs: &[(usize, usize)] = if opts.undirected {
            &[(u, v), (v, u)]
        } else {
            &[(u, v)]
        };
        for &(a, b) in pairs {
            if opts.dedupe && !seen.insert((a, b)) {
                continue;
            }
            edges.push((a, b, weight));
        }
    }
    if labels.is_empty() {
        return Err(Error::validation("edge list contains no edges"));
    }
    WeightedDigraph::with_labels(labels, edges)
}

pub fn parse_edge_list(text: &str, opts: LoadOptions) -> Result<WeightedDigraph> {
    load_edge_list(text.as_bytes(), opts)
}

/// Writes `u v w` lines using external labels.
pub fn write_edge_list(g: &WeightedDigraph) -> String {
    let mut out = String::new();
    for e in g.edges() {
        out.push_str(&format!(
            "{} {} {}\n",
            g.label(e.source),
            g.label(e.target),
            e.weight
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Leaders are pinned to their party value.
    Absolute,
    /// Leaders track an external reference with stubbornness `κ`.
    Influenced,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Absolute => "absolute",
            Model::Influenced => "influenced",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(Model::Absolute),
            "influenced" => Ok(Model::Influenced),
            other => Err(Error::validation(format!("unknown model '{other}'"))),
        }
    }
}

/// Per-node stubbornness `κ_v > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stubbornness(Vec<f64>);

impl Stubbornness {
    pub fn uniform(n: usize, kappa: f64) -> Result<Self> {
        Self::from_values(vec![kappa; n])
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::validation(format!(
                "stubbornness must be positive, got {bad}"
            )));
        }
        Ok(Self(values))
    }

    pub fn get(&self, v: usize) -> f64 {
        self.0[v]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Two disjoint leader sets and the system model they live in.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderConfig {
    pub s0: Vec<usize>,
    pub s1: Vec<usize>,
    pub model: Model,
    pub kappa: Option<Stubbornness>,
}

impl LeaderConfig {
    pub fn absolute(s0: Vec<usize>, s1: Vec<usize>) -> Self {
        Self {
            s0: normalized(s0),
            s1: normalized(s1),
            model: Model::Absolute,
            kappa: None,
        }
    }

    pub fn influenced(s0: Vec<usize>, s1: Vec<usize>, kappa: Stubbornness) -> Self {
        Self {
            s0: normalized(s0),
            s1: normalized(s1),
            model: Model::Influenced,
            kappa: Some(kappa),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.s0.is_empty() {
            return Err(Error::validation("leader set S0 must be nonempty"));
        }
        if let Some(&v) = self.s0.iter().chain(&self.s1).find(|&&v| v >= n) {
            return Err(Error::validation(format!("leader {v} is not a node")));
        }
        if let Some(v) = self.s1.iter().find(|v| self.s0.binary_search(v).is_ok()) {
            return Err(Error::validation(format!(
                "node {v} is in both S0 and S1"
            )));
        }
        if self.model == Model::Influenced {
            match &self.kappa {
                None => return Err(Error::validation("influenced model requires stubbornness")),
                Some(k) if k.len() != n => {
                    return Err(Error::validation(format!(
                        "stubbornness has {} entries for {n} nodes",
                        k.len()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Membership mask: 0 for S0, 1 for S1, `None` for followers.
    pub fn party_of(&self, n: usize) -> Vec<Option<u8>> {
        let mut party = vec![None; n];
        for &v in &self.s0 {
            party[v] = Some(0);
        }
        for &v in &self.s1 {
            party[v] = Some(1);
        }
        party
    }

    pub fn kappa_of(&self, v: usize) -> f64 {
        self.kappa.as_ref().map_or(1.0, |k| k.get(v))
    }
}

pub(crate) fn normalized(mut set: Vec<usize>) -> Vec<usize> {
    set.sort_unstable();
    set.dedup();
    set
}

/// Leader-equivalent graph: both parties reduced to one absolute leader each.
#[derive(Debug, Clone)]
pub struct EquivalentGraph {
    pub graph: WeightedDigraph,
    pub s0_id: usize,
    pub s1_id: usize,
    /// Original node -> node of `graph`.
    pub origin_map: Vec<usize>,
}

/// Contracts (absolute) or augments (influenced) the leader sets.
///
/// Absolute: followers keep their ids in order; every edge into S0 (S1) is
/// redirected to `s0'` (`s1'`) with summed weights. Leader out-edges are
/// contracted the same way so the result stays strongly connected; they do
/// not enter the follower dynamics.
///
/// Influenced: all original nodes are kept and two virtual leaders are
/// appended, joined to each party member `u` in both directions with weight
/// `κ_u`.
pub fn build_equivalent(g: &WeightedDigraph, cfg: &LeaderConfig) -> Result<EquivalentGraph> {
    let n = g.node_count();
    cfg.validate(n)?;
    if cfg.s1.is_empty() {
        return Err(Error::validation(
            "leader-equivalent graph needs a nonempty S1",
        ));
    }
    match cfg.model {
        Model::Absolute => contract(g, cfg),
        Model::Influenced => augment(g, cfg),
    }
}

fn contract(g: &WeightedDigraph, cfg: &LeaderConfig) -> Result<EquivalentGraph> {
    let n = g.node_count();
    let party = cfg.party_of(n);
    let followers: Vec<usize> = (0..n).filter(|&v| party[v].is_none()).collect();
    let f = followers.len();
    let (s0_id, s1_id) = (f, f + 1);
    let mut origin_map = vec![0; n];
    for (i, &v) in followers.iter().enumerate() {
        origin_map[v] = i;
    }
    for v in 0..n {
        match party[v] {
            Some(0) => origin_map[v] = s0_id,
            Some(_) => origin_map[v] = s1_id,
            None => {}
        }
    }
    let edges: Vec<(usize, usize, f64)> = g
        .edges()
        .iter()
        .map(|e| (origin_map[e.source], origin_map[e.target], e.weight))
        .filter(|&(u, v, _)| u != v)
        .collect();
    let mut labels: Vec<String> = followers.iter().map(|&v| g.label(v).to_string()).collect();
    labels.push("s0'".into());
    labels.push("s1'".into());
    Ok(EquivalentGraph {
        graph: WeightedDigraph::with_labels(labels, edges)?,
        s0_id,
        s1_id,
        origin_map,
    })
}

fn augment(g: &WeightedDigraph, cfg: &LeaderConfig) -> Result<EquivalentGraph> {
    let n = g.node_count();
    let (s0_id, s1_id) = (n, n + 1);
    let mut edges: Vec<(usize, usize, f64)> =
        g.edges().iter().map(|e| (e.source, e.target, e.weight)).collect();
    for (set, virt) in [(&cfg.s0, s0_id), (&cfg.s1, s1_id)] {
        for &u in set {
            let k = cfg.kappa_of(u);
            edges.push((u, virt, k));
            edges.push((virt, u, k));
        }
    }
    let mut labels = g.labels().to_vec();
    labels.push("s0'".into());
    labels.push("s1'".into());
    Ok(EquivalentGraph {
        graph: WeightedDigraph::with_labels(labels, edges)?,
        s0_id,
        s1_id,
        origin_map: (0..n).collect(),
    })
}

/// Star-plus-cubic gadget: a new center joined with weight `star_weight` to
/// every node of a connected 3-regular graph whose own edges get weight 1.
/// Returns the gadget and the id of the center, which is the last node.
pub fn gadget_graph(cubic: &WeightedDigraph, star_weight: f64) -> Result<(WeightedDigraph, usize)> {
    if !cubic.is_undirected() {
        return Err(Error::NotUndirected);
    }
    if let Some(v) = (0..cubic.node_count()).find(|&v| cubic.out_neighbors(v).len() != 3) {
        return Err(Error::validation(format!(
            "node '{}' has degree {}, gadget needs a 3-regular graph",
            cubic.label(v),
            cubic.out_neighbors(v).len()
        )));
    }
    if !cubic.is_strongly_connected() {
        return Err(Error::validation("gadget needs a connected cubic graph"));
    }
    if !(star_weight.is_finite() && star_weight > 0.0) {
        return Err(Error::validation("star weight must be positive"));
    }
    let center = cubic.node_count();
    let mut edges: Vec<(usize, usize, f64)> = cubic
        .edges()
        .iter()
        .map(|e| (e.source, e.target, 1.0))
        .collect();
    for v in 0..center {
        edges.push((center, v, star_weight));
        edges.push((v, center, star_weight));
    }
    let mut labels = cubic.labels().to_vec();
    labels.push("center".into());
    Ok((WeightedDigraph::with_labels(labels, edges)?, center))
}

/// True when every edge of the undirected graph `g` has an endpoint in `cover`.
pub fn is_vertex_cover(g: &WeightedDigraph, cover: &[usize]) -> bool {
    let mut inside = vec![false; g.node_count()];
    for &v in cover {
        inside[v] = true;
    }
    g.edges().iter().all(|e| inside[e.source] || inside[e.target])
}
