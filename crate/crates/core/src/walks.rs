//! Random-walk analytics on strongly connected digraphs.
//!
//! The walker at `u` moves along an out-edge `(u, v)` with probability
//! `w(u, v) / d_u`. The column-stochastic transition matrix is `W = Aᵀ D⁻¹`,
//! `π` is its stationary distribution, `𝓛 = Π (I − Wᵀ)` and
//! `𝓡 = (I − Wᵀ)† Π⁻¹`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generate::{indexed_seed, rng};
use crate::graph::{build_equivalent, LeaderConfig, Model, WeightedDigraph};
use crate::numerics::{pinv, solve, DenseMatrix, DenseVector};

/// Monte-Carlo trials are grouped in blocks with their own seed stream so the
/// estimate does not depend on the number of worker threads.
const MC_BLOCK: usize = 1024;

/// Stationary distribution of the walk, by solving `(I − W) π = 0` with the
/// last equation replaced by `1ᵀπ = 1`.
pub fn stationary(g: &WeightedDigraph) -> Result<DenseVector> {
    if !g.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    let w = transition_matrix(g);
    let n = g.node_count();
    let mut system = DMatrix::identity(n, n) - &w;
    for c in 0..n {
        system[(n - 1, c)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = solve(&system, &rhs)?;
    if pi.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Singular {
            context: "stationary distribution is not positive",
            condition: f64::INFINITY,
        });
    }
    Ok(pi)
}

/// `W = Aᵀ D⁻¹`; column `j` holds the exit probabilities of node `j`.
pub fn transition_matrix(g: &WeightedDigraph) -> DenseMatrix {
    let n = g.node_count();
    let mut w = DMatrix::zeros(n, n);
    for u in 0..n {
        let d = g.out_degree(u);
        for &(v, wt) in g.out_neighbors(u) {
            w[(v, u)] = wt / d;
        }
    }
    w
}

/// Precomputed walk matrices of a strongly connected graph.
#[derive(Debug, Clone)]
pub struct WalkKernel {
    degrees: DenseVector,
    transition: DenseMatrix,
    pi: DenseVector,
    script_l: DenseMatrix,
    script_l_pinv: DenseMatrix,
    script_r: DenseMatrix,
    undirected: bool,
}

impl WalkKernel {
    pub fn new(g: &WeightedDigraph) -> Result<Self> {
        let pi = stationary(g)?;
        let n = g.node_count();
        let transition = transition_matrix(g);
        let i_minus_wt = DMatrix::identity(n, n) - transition.transpose();
        let pi_diag = DMatrix::from_diagonal(&pi);
        let script_l = &pi_diag * &i_minus_wt;
        let script_l_pinv = pinv(&script_l);
        let inv_pi = DMatrix::from_diagonal(&pi.map(|p| 1.0 / p));
        let script_r = pinv(&i_minus_wt) * inv_pi;
        Ok(Self {
            degrees: DVector::from_vec(g.out_degrees()),
            transition,
            pi,
            script_l,
            script_l_pinv,
            script_r,
            undirected: g.is_undirected(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.pi.len()
    }

    pub fn transition(&self) -> &DenseMatrix {
        &self.transition
    }

    pub fn stationary(&self) -> &DenseVector {
        &self.pi
    }

    pub fn degrees(&self) -> &DenseVector {
        &self.degrees
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    /// `𝓛 = Π (I − Wᵀ)`
    pub fn script_l(&self) -> &DenseMatrix {
        &self.script_l
    }

    pub fn script_l_pinv(&self) -> &DenseMatrix {
        &self.script_l_pinv
    }

    /// `𝓡 = (I − Wᵀ)† Π⁻¹`
    pub fn script_r(&self) -> &DenseMatrix {
        &self.script_r
    }

    /// `q = D⁻¹ π`, spanning the left kernel of the Laplacian.
    pub fn degree_scaled_stationary(&self) -> DenseVector {
        self.pi.component_div(&self.degrees)
    }

    /// Expected number of steps for a walker started at `u` to first reach
    /// `v`: `b_{u,v}ᵀ 𝓡 (π − e_v)`. Zero when `u == v`.
    pub fn hitting_time(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let r = &self.script_r;
        let n = self.node_count();
        (0..n)
            .map(|j| {
                let target = self.pi[j] - if j == v { 1.0 } else { 0.0 };
                (r[(u, j)] - r[(v, j)]) * target
            })
            .sum()
    }

    /// `C_{u,v} = b_{u,v}ᵀ 𝓡 b_{u,v}`
    pub fn commute_time(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let r = &self.script_r;
        r[(u, u)] - r[(u, v)] - r[(v, u)] + r[(v, v)]
    }

    /// Domination score of `u` over `v`: `(𝓛†)_{vv} − (𝓛†)_{vu}`.
    pub fn domination_score(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let lp = &self.script_l_pinv;
        lp[(v, v)] - lp[(v, u)]
    }
}

/// Electrical quantities of a connected undirected graph.
#[derive(Debug, Clone)]
pub struct ResistanceKernel {
    l_pinv: DenseMatrix,
    trace: f64,
}

impl ResistanceKernel {
    pub fn new(g: &WeightedDigraph) -> Result<Self> {
        if !g.is_undirected() {
            return Err(Error::NotUndirected);
        }
        if !g.is_strongly_connected() {
            return Err(Error::validation("graph is not connected"));
        }
        let l_pinv = pinv(&g.laplacian());
        let trace = l_pinv.trace();
        Ok(Self { l_pinv, trace })
    }

    pub fn laplacian_pinv(&self) -> &DenseMatrix {
        &self.l_pinv
    }

    /// `R_{u,v} = (L†)_{vv} − 2 (L†)_{vu} + (L†)_{uu}`
    pub fn effective_resistance(&self, u: usize, v: usize) -> f64 {
        let p = &self.l_pinv;
        p[(v, v)] - 2.0 * p[(v, u)] + p[(u, u)]
    }

    /// `Σ_v R_{u,v} = n (L†)_{uu} + tr(L†)`
    pub fn resistance_sum(&self, u: usize) -> f64 {
        self.l_pinv.nrows() as f64 * self.l_pinv[(u, u)] + self.trace
    }

    /// `θ(u) = n / Σ_v R_{u,v}`
    pub fn information_centrality(&self, u: usize) -> f64 {
        self.l_pinv.nrows() as f64 / self.resistance_sum(u)
    }
}

pub fn effective_resistance(g: &WeightedDigraph, u: usize, v: usize) -> Result<f64> {
    Ok(ResistanceKernel::new(g)?.effective_resistance(u, v))
}

pub fn information_centrality(g: &WeightedDigraph, u: usize) -> Result<f64> {
    Ok(ResistanceKernel::new(g)?.information_centrality(u))
}

/// Cumulative out-weights for inverse-CDF sampling of the next step.
#[derive(Debug, Clone)]
struct WalkSampler {
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl WalkSampler {
    fn new(g: &WeightedDigraph) -> Self {
        let n = g.node_count();
        let mut targets = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for u in 0..n {
            let mut acc = 0.0;
            let (t, c): (Vec<usize>, Vec<f64>) = g
                .out_neighbors(u)
                .iter()
                .map(|&(v, w)| {
                    acc += w;
                    (v, acc)
                })
                .unzip();
            targets.push(t);
            cumulative.push(c);
        }
        Self {
            targets,
            cumulative,
        }
    }

    fn step<R: Rng>(&self, u: usize, rng: &mut R) -> usize {
        let cum = &self.cumulative[u];
        let total = *cum.last().expect("every node has an out-edge");
        let r = rng.gen::<f64>() * total;
        let i = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
        self.targets[u][i]
    }
}

/// Absorbing Markov chain with absorbing set `S0 ∪ S1`; transient states
/// move by `R = (D_FF)⁻¹ A_FS`, `Q = (D_FF)⁻¹ A_FF`.
#[derive(Debug, Clone)]
pub struct AbsorbingChain {
    graph: WeightedDigraph,
    party: Vec<Option<u8>>,
    sampler: WalkSampler,
}

impl AbsorbingChain {
    pub fn new(g: &WeightedDigraph, s0: &[usize], s1: &[usize]) -> Result<Self> {
        let n = g.node_count();
        if s0.is_empty() && s1.is_empty() {
            return Err(Error::validation("absorbing chain needs a nonempty absorbing set"));
        }
        let mut party = vec![None; n];
        for (set, tag) in [(s0, 0u8), (s1, 1u8)] {
            for &v in set {
                if v >= n {
                    return Err(Error::validation(format!("node {v} is out of range")));
                }
                if party[v].is_some() {
                    return Err(Error::validation(format!("node {v} is in both absorbing sets")));
                }
                party[v] = Some(tag);
            }
        }
        // every transient state must reach the absorbing set
        let mut reach = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&v| party[v].is_some()).collect();
        for &v in &stack {
            reach[v] = true;
        }
        while let Some(v) = stack.pop() {
            for &(u, _) in g.in_neighbors(v) {
                if !reach[u] {
                    reach[u] = true;
                    stack.push(u);
                }
            }
        }
        if let Some(v) = reach.iter().position(|&r| !r) {
            return Err(Error::validation(format!(
                "node '{}' cannot reach an absorbing state",
                g.label(v)
            )));
        }
        Ok(Self {
            graph: g.clone(),
            party,
            sampler: WalkSampler::new(g),
        })
    }

    /// Chain whose absorption probabilities are the steady-state opinions of
    /// `cfg`, together with the map from original nodes to chain states. For
    /// the influenced model the chain runs on the augmented graph.
    pub fn from_config(g: &WeightedDigraph, cfg: &LeaderConfig) -> Result<(Self, Vec<usize>)> {
        cfg.validate(g.node_count())?;
        match cfg.model {
            Model::Absolute => Ok((
                Self::new(g, &cfg.s0, &cfg.s1)?,
                (0..g.node_count()).collect(),
            )),
            Model::Influenced => {
                let eq = build_equivalent(g, cfg)?;
                let chain = Self::new(&eq.graph, &[eq.s0_id], &[eq.s1_id])?;
                Ok((chain, eq.origin_map))
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.party.len()
    }

    pub fn transient_states(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&v| self.party[v].is_none()).collect()
    }

    /// `(R, Q)` over the transient states (row order of
    /// [`transient_states`](Self::transient_states)); columns of `R` follow
    /// node order of the absorbing states.
    pub fn blocks(&self) -> (DenseMatrix, DenseMatrix, Vec<usize>, Vec<usize>) {
        let transient = self.transient_states();
        let absorbing: Vec<usize> = (0..self.node_count())
            .filter(|&v| self.party[v].is_some())
            .collect();
        let mut pos = vec![usize::MAX; self.node_count()];
        for (i, &v) in transient.iter().enumerate() {
            pos[v] = i;
        }
        for (i, &v) in absorbing.iter().enumerate() {
            pos[v] = i;
        }
        let mut r = DMatrix::zeros(transient.len(), absorbing.len());
        let mut q = DMatrix::zeros(transient.len(), transient.len());
        for (i, &u) in transient.iter().enumerate() {
            let d = self.graph.out_degree(u);
            for &(v, w) in self.graph.out_neighbors(u) {
                if self.party[v].is_some() {
                    r[(i, pos[v])] += w / d;
                } else {
                    q[(i, pos[v])] += w / d;
                }
            }
        }
        (r, q, transient, absorbing)
    }

    /// Probability of absorption in S1 from every state, by solving
    /// `(I − Q) y_F = R y_B`.
    pub fn escape_probabilities(&self) -> Result<DenseVector> {
        let (r, q, transient, absorbing) = self.blocks();
        let boundary = DVector::from_iterator(
            absorbing.len(),
            absorbing.iter().map(|&v| f64::from(self.party[v] == Some(1))),
        );
        let system = DMatrix::identity(transient.len(), transient.len()) - q;
        let interior = solve(&system, &(r * boundary))?;
        let mut y = DVector::zeros(self.node_count());
        for (i, &v) in transient.iter().enumerate() {
            y[v] = interior[i];
        }
        for &v in &absorbing {
            y[v] = f64::from(self.party[v] == Some(1));
        }
        Ok(y)
    }

    fn absorbs_in_s1<R: Rng>(&self, start: usize, rng: &mut R) -> bool {
        let mut v = start;
        loop {
            match self.party[v] {
                Some(p) => return p == 1,
                None => v = self.sampler.step(v, rng),
            }
        }
    }

    /// Monte-Carlo estimate of the probability that a walker from `v` hits S1
    /// before S0. Returns `(estimate, standard error)`; reproducible for a
    /// fixed `(seed, trials)`.
    pub fn escape_probability_mc(&self, v: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
        if trials == 0 {
            return Err(Error::validation("need at least one trial"));
        }
        if v >= self.node_count() {
            return Err(Error::validation(format!("node {v} is out of range")));
        }
        let blocks = trials.div_ceil(MC_BLOCK);
        let hits: usize = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = rng(indexed_seed(seed, b as u64));
                let count = MC_BLOCK.min(trials - b * MC_BLOCK);
                (0..count).filter(|_| self.absorbs_in_s1(v, &mut rng)).count()
            })
            .sum();
        let p = hits as f64 / trials as f64;
        Ok((p, (p * (1.0 - p) / trials as f64).sqrt()))
    }
}

/// Monte-Carlo estimate of the hitting time from `u` to `v`; returns
/// `(mean, standard error)`.
pub fn hitting_time_mc(
    g: &WeightedDigraph,
    u: usize,
    v: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !g.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    if trials < 2 {
        return Err(Error::validation("need at least two trials"));
    }
    let sampler = WalkSampler::new(g);
    let blocks = trials.div_ceil(MC_BLOCK);
    let (sum, sum_sq): (f64, f64) = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng(indexed_seed(seed, b as u64));
            let count = MC_BLOCK.min(trials - b * MC_BLOCK);
            let mut acc = (0.0, 0.0);
            for _ in 0..count {
                let mut x = u;
                let mut steps = 0u64;
                while x != v {
                    x = sampler.step(x, &mut rng);
                    steps += 1;
                }
                let s = steps as f64;
                acc.0 += s;
                acc.1 += s * s;
            }
            acc
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
