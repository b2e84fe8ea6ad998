//! Steady states of the two leader systems, the average opinion μ, and the
//! transient and participation models built on them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::generate::rng;
use crate::graph::{EquivalentGraph, LeaderConfig, Model, WeightedDigraph};
use crate::numerics::{pinv, select, solve, DenseMatrix, DenseVector};
use crate::walks::WalkKernel;

#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Opinion of every original node.
    pub x_hat: DenseVector,
    /// Mean of `x_hat` over all nodes, leaders included.
    pub mu: f64,
    pub config: LeaderConfig,
}

impl SteadyState {
    fn new(x_hat: DenseVector, config: LeaderConfig) -> Self {
        let mu = if x_hat.is_empty() { 0.0 } else { x_hat.mean() };
        Self { x_hat, mu, config }
    }

    pub fn model(&self) -> Model {
        self.config.model
    }

    /// `|μ − α|`
    pub fn deviation(&self, alpha: f64) -> f64 {
        (self.mu - alpha).abs()
    }
}

fn check_graph(g: &WeightedDigraph) -> Result<()> {
    if g.is_strongly_connected() {
        Ok(())
    } else {
        Err(Error::NotStronglyConnected)
    }
}

/// Absolute leaders: `x_F = (L_FF)⁻¹ A_{F,S1} 1`, leaders pinned to 0 and 1.
/// With `S1 = ∅` every follower ends at 0.
pub fn steady_state_absolute(g: &WeightedDigraph, s0: &[usize], s1: &[usize]) -> Result<SteadyState> {
    let cfg = LeaderConfig::absolute(s0.to_vec(), s1.to_vec());
    let n = g.node_count();
    cfg.validate(n)?;
    check_graph(g)?;
    let mut x = DVector::zeros(n);
    for &v in &cfg.s1 {
        x[v] = 1.0;
    }
    if cfg.s1.is_empty() {
        return Ok(SteadyState::new(x, cfg));
    }
    let party = cfg.party_of(n);
    let followers: Vec<usize> = (0..n).filter(|&v| party[v].is_none()).collect();
    if followers.is_empty() {
        return Ok(SteadyState::new(x, cfg));
    }
    let l_ff = select(&g.laplacian(), &followers, &followers);
    let rhs = DVector::from_iterator(
        followers.len(),
        followers.iter().map(|&v| {
            g.out_neighbors(v)
                .iter()
                .filter(|(t, _)| party[*t] == Some(1))
                .map(|(_, w)| w)
                .sum::<f64>()
        }),
    );
    let x_f = solve(&l_ff, &rhs)?;
    for (i, &v) in followers.iter().enumerate() {
        x[v] = x_f[i];
    }
    Ok(SteadyState::new(x, cfg))
}

/// Influenced leaders: `x = (L + E^S K)⁻¹ E^{S1} K 1`. With `S1 = ∅` the
/// opinion vector is zero.
pub fn steady_state_influenced(g: &WeightedDigraph, cfg: &LeaderConfig) -> Result<SteadyState> {
    if cfg.model != Model::Influenced {
        return Err(Error::validation("configuration is not an influenced-leader system"));
    }
    let n = g.node_count();
    cfg.validate(n)?;
    check_graph(g)?;
    if cfg.s1.is_empty() {
        return Ok(SteadyState::new(DVector::zeros(n), cfg.clone()));
    }
    let (system, rhs) = influenced_system(g, cfg);
    let x = solve(&system, &rhs)?;
    Ok(SteadyState::new(x, cfg.clone()))
}

fn influenced_system(g: &WeightedDigraph, cfg: &LeaderConfig) -> (DenseMatrix, DenseVector) {
    let mut system = g.laplacian();
    let mut rhs = DVector::zeros(g.node_count());
    for &v in cfg.s0.iter().chain(&cfg.s1) {
        system[(v, v)] += cfg.kappa_of(v);
    }
    for &v in &cfg.s1 {
        rhs[v] = cfg.kappa_of(v);
    }
    (system, rhs)
}

pub fn steady_state(g: &WeightedDigraph, cfg: &LeaderConfig) -> Result<SteadyState> {
    match cfg.model {
        Model::Absolute => steady_state_absolute(g, &cfg.s0, &cfg.s1),
        Model::Influenced => steady_state_influenced(g, cfg),
    }
}

/// Steady state on the leader-equivalent graph from the walk matrices:
/// `x_v = b_{v,s0'}ᵀ 𝓡 b_{s1',s0'} / b_{s1',s0'}ᵀ 𝓡 b_{s1',s0'}`.
/// Indexed by the nodes of `eq.graph`.
pub fn steady_state_walk_form(eq: &EquivalentGraph) -> Result<DenseVector> {
    let kernel = WalkKernel::new(&eq.graph)?;
    walk_ratio(kernel.script_r(), eq.s0_id, eq.s1_id)
}

/// Undirected form of the same formula with `L†` in place of `𝓡`.
pub fn steady_state_walk_form_undirected(eq: &EquivalentGraph) -> Result<DenseVector> {
    if !eq.graph.is_undirected() {
        return Err(Error::NotUndirected);
    }
    check_graph(&eq.graph)?;
    walk_ratio(&pinv(&eq.graph.laplacian()), eq.s0_id, eq.s1_id)
}

fn walk_ratio(r: &DenseMatrix, s0: usize, s1: usize) -> Result<DenseVector> {
    if s0 == s1 {
        return Err(Error::validation("virtual leaders coincide"));
    }
    let n = r.nrows();
    // 𝓡 b_{s1,s0}
    let rb = DVector::from_fn(n, |i, _| r[(i, s1)] - r[(i, s0)]);
    let denominator = rb[s1] - rb[s0];
    if !(denominator.abs() > 1e-14) {
        return Err(Error::Singular {
            context: "steady-state ratio",
            condition: f64::INFINITY,
        });
    }
    Ok(DVector::from_fn(n, |v, _| (rb[v] - rb[s0]) / denominator))
}

/// Walk-form steady state mapped back onto the original nodes.
pub fn walk_form_on_original(g: &WeightedDigraph, cfg: &LeaderConfig) -> Result<DenseVector> {
    let eq = crate::graph::build_equivalent(g, cfg)?;
    let x = steady_state_walk_form(&eq)?;
    Ok(DVector::from_iterator(
        g.node_count(),
        eq.origin_map.iter().map(|&i| x[i]),
    ))
}

/// `dx/dt = −M x + c` over all nodes; absolute leaders have zero rows.
fn linear_system(g: &WeightedDigraph, cfg: &LeaderConfig) -> (DenseMatrix, DenseVector) {
    match cfg.model {
        Model::Influenced => influenced_system(g, cfg),
        Model::Absolute => {
            let n = g.node_count();
            let mut m = g.laplacian();
            for &v in cfg.s0.iter().chain(&cfg.s1) {
                m.row_mut(v).fill(0.0);
            }
            (m, DVector::zeros(n))
        }
    }
}

/// Sampled trajectory of the transient dynamics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DenseVector>,
}

impl Trajectory {
    pub fn terminal(&self) -> &DenseVector {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Integrates the opinion dynamics from `x0` with the classical fixed-step
/// RK4 scheme. Absolute leaders are pinned to their party value whatever
/// `x0` says. Every step is recorded.
pub fn integrate_transient(
    g: &WeightedDigraph,
    cfg: &LeaderConfig,
    x0: &DenseVector,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    let n = g.node_count();
    cfg.validate(n)?;
    if x0.len() != n {
        return Err(Error::validation(format!("initial state has {} entries for {n} nodes", x0.len())));
    }
    if !(step > 0.0 && step.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::validation("step must be positive and horizon nonnegative"));
    }
    let (m, c) = linear_system(g, cfg);
    let mut x = x0.clone();
    if cfg.model == Model::Absolute {
        for &v in &cfg.s0 {
            x[v] = 0.0;
        }
        for &v in &cfg.s1 {
            x[v] = 1.0;
        }
    }
    let limit = 1e6 * (1.0 + x.amax());
    let f = |y: &DenseVector| &c - &m * y;
    let steps = (horizon / step).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x.clone());
    let mut t = 0.0;
    for _ in 0..steps {
        let h = step.min(horizon - t);
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
        if x.iter().any(|v| !v.is_finite() || v.abs() > limit) {
            return Err(Error::Divergence { time: t });
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

/// Slowest decay rate of the transient: the smallest real part among the
/// eigenvalues of the active block of the system matrix.
pub fn decay_rate(g: &WeightedDigraph, cfg: &LeaderConfig) -> Result<f64> {
    let n = g.node_count();
    cfg.validate(n)?;
    let (m, _) = linear_system(g, cfg);
    let active: Vec<usize> = match cfg.model {
        Model::Influenced => (0..n).collect(),
        Model::Absolute => {
            let party = cfg.party_of(n);
            (0..n).filter(|&v| party[v].is_none()).collect()
        }
    };
    if active.is_empty() {
        return Ok(f64::INFINITY);
    }
    let block: DMatrix<f64> = select(&m, &active, &active);
    Ok(block
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min))
}

/// One draw of the participation model: node `v` turns out with probability
/// `x̂_v`; returns the turnout fraction.
pub fn sample_participation(ss: &SteadyState, seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = ss.x_hat.len();
    if n == 0 {
        return 0.0;
    }
    let hits = ss.x_hat.iter().filter(|&&p| r.gen::<f64>() < p).count();
    hits as f64 / n as f64
}
