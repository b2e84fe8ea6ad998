//! Choosing party 1's leader set: the bound-constrained greedy routine, the
//! bound search around it, and the exhaustive oracle used to check both.

mod exhaustive;
mod fast;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{normalized, LeaderConfig, Model, Stubbornness, WeightedDigraph};
use crate::numerics::{select, solve, DenseMatrix, DenseVector};

pub use exhaustive::{
    approximation_band, brute_force, brute_force_with_budget, check_submodularity, cover_number_at_most,
    min_cover_number, subset_count, within_band, zeta, zeta_for, ExhaustiveTable, SubmodularityReport,
    DEFAULT_BUDGET,
};

pub const DEFAULT_DELTA: f64 = 1e-4;

/// Leader selection instance: pick `S1 ⊆ Q`, `|S1| ≤ k`, bringing μ close
/// to `alpha`.
#[derive(Debug, Clone)]
pub struct SelectionProblem<'g> {
    pub graph: &'g WeightedDigraph,
    pub s0: Vec<usize>,
    pub candidates: Vec<usize>,
    pub alpha: f64,
    pub k: usize,
    pub model: Model,
    pub kappa: Option<Stubbornness>,
    pub delta: f64,
}

impl<'g> SelectionProblem<'g> {
    /// Absolute-leader instance with candidates `V ∖ S0` and the default δ.
    pub fn absolute(graph: &'g WeightedDigraph, s0: Vec<usize>, alpha: f64, k: usize) -> Self {
        let s0 = normalized(s0);
        let candidates = (0..graph.node_count()).filter(|v| s0.binary_search(v).is_err()).collect();
        Self {
            graph,
            s0,
            candidates,
            alpha,
            k,
            model: Model::Absolute,
            kappa: None,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn influenced(
        graph: &'g WeightedDigraph,
        s0: Vec<usize>,
        alpha: f64,
        k: usize,
        kappa: Stubbornness,
    ) -> Self {
        Self {
            model: Model::Influenced,
            kappa: Some(kappa),
            ..Self::absolute(graph, s0, alpha, k)
        }
    }

    pub fn with_candidates(mut self, candidates: Vec<usize>) -> Self {
        self.candidates = normalized(candidates);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        self.config(Vec::new()).validate(n)?;
        if !self.graph.is_strongly_connected() {
            return Err(Error::NotStronglyConnected);
        }
        if self.candidates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("candidates must be distinct and sorted"));
        }
        if let Some(&v) = self.candidates.iter().find(|&&v| v >= n) {
            return Err(Error::validation(format!("candidate {v} is not a node")));
        }
        if let Some(&v) = self.candidates.iter().find(|v| self.s0.binary_search(v).is_ok()) {
            return Err(Error::validation(format!("candidate {v} is an S0 leader")));
        }
        if self.k == 0 || self.k > self.candidates.len() {
            return Err(Error::validation(format!(
                "k = {} must be between 1 and the {} candidates",
                self.k,
                self.candidates.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::validation(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::validation(format!("delta {} must be positive", self.delta)));
        }
        Ok(())
    }

    pub fn config(&self, s1: Vec<usize>) -> LeaderConfig {
        LeaderConfig {
            s0: self.s0.clone(),
            s1: normalized(s1),
            model: self.model,
            kappa: self.kappa.clone(),
        }
    }

    /// μ of `s1` by a fresh linear solve.
    pub fn mu(&self, s1: &[usize]) -> Result<f64> {
        Evaluator::new(self).mu(s1)
    }
}

/// Direct μ evaluation with the Laplacian built once.
#[derive(Debug, Clone)]
pub struct Evaluator {
    laplacian: DenseMatrix,
    is_s0: Vec<bool>,
    model: Model,
    kappa: Vec<f64>,
}

impl Evaluator {
    pub fn new(problem: &SelectionProblem<'_>) -> Self {
        let n = problem.node_count();
        let mut is_s0 = vec![false; n];
        for &v in &problem.s0 {
            is_s0[v] = true;
        }
        Self {
            laplacian: problem.graph.laplacian(),
            is_s0,
            model: problem.model,
            kappa: (0..n)
                .map(|v| problem.kappa.as_ref().map_or(1.0, |k| k.get(v)))
                .collect(),
        }
    }

    /// μ(S1); `s1` must avoid S0. μ(∅) = 0.
    pub fn mu(&self, s1: &[usize]) -> Result<f64> {
        let n = self.is_s0.len();
        if s1.is_empty() {
            return Ok(0.0);
        }
        let mut in_s1 = vec![false; n];
        for &v in s1 {
            in_s1[v] = true;
        }
        let total = match self.model {
            Model::Absolute => {
                let followers: Vec<usize> = (0..n).filter(|&v| !self.is_s0[v] && !in_s1[v]).collect();
                if followers.is_empty() {
                    s1.len() as f64
                } else {
                    let l_ff = select(&self.laplacian, &followers, &followers);
                    let rhs = DenseVector::from_iterator(
                        followers.len(),
                        followers
                            .iter()
                            .map(|&v| -s1.iter().map(|&j| self.laplacian[(v, j)]).sum::<f64>()),
                    );
                    s1.len() as f64 + solve(&l_ff, &rhs)?.sum()
                }
            }
            Model::Influenced => {
                let mut system = self.laplacian.clone();
                let mut rhs = DenseVector::zeros(n);
                for v in 0..n {
                    if self.is_s0[v] || in_s1[v] {
                        system[(v, v)] += self.kappa[v];
                    }
                    if in_s1[v] {
                        rhs[v] = self.kappa[v];
                    }
                }
                solve(&system, &rhs)?.sum()
            }
        };
        Ok(total / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GreedyImpl {
    /// Re-solves the steady state for every candidate.
    Naive,
    /// Incremental inverse updates.
    Fast,
}

/// Candidate scores `μ(P ∪ {u})` computed for one `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRound {
    pub members: Vec<usize>,
    pub candidates: Vec<usize>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    /// Chosen leaders, sorted.
    pub set: Vec<usize>,
    /// Chosen leaders in the order they were accepted.
    pub order: Vec<usize>,
    pub mu: f64,
    pub rounds: Vec<ScoreRound>,
}

pub(crate) trait Scorer {
    /// `μ(P ∪ {u})` for every `u` in `candidates`, in order.
    fn scores(&mut self, candidates: &[usize]) -> Result<Vec<f64>>;
    fn accept(&mut self, u: usize) -> Result<()>;
}

struct NaiveScorer {
    evaluator: Evaluator,
    members: Vec<usize>,
}

impl Scorer for NaiveScorer {
    fn scores(&mut self, candidates: &[usize]) -> Result<Vec<f64>> {
        candidates
            .par_iter()
            .map(|&u| {
                let mut set = self.members.clone();
                set.push(u);
                self.evaluator.mu(&set)
            })
            .collect()
    }

    fn accept(&mut self, u: usize) -> Result<()> {
        self.members.push(u);
        Ok(())
    }
}

/// Index of the largest score; earlier entries win unless beaten by more
/// than a relative `1e-12`, so round-off cannot reorder exact ties.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        let tol = 1e-12 * scores[best].abs().max(1.0);
        if scores[i] > scores[best] + tol {
            best = i;
        }
    }
    best
}

fn run_greedy<S: Scorer>(problem: &SelectionProblem<'_>, b_hat: f64, mut scorer: S) -> Result<GreedyOutcome> {
    let mut q = problem.candidates.clone();
    let mut order = Vec::new();
    let mut mu = 0.0;
    let mut rounds = Vec::new();
    let mut cached: Option<Vec<f64>> = None;
    while !q.is_empty() && order.len() < problem.k {
        let scores = match cached.take() {
            Some(s) => s,
            None => {
                let s = scorer.scores(&q)?;
                rounds.push(ScoreRound {
                    members: order.clone(),
                    candidates: q.clone(),
                    scores: s.clone(),
                });
                s
            }
        };
        let i = argmax(&scores);
        let (s, value) = (q[i], scores[i]);
        q.remove(i);
        if value <= b_hat {
            scorer.accept(s)?;
            order.push(s);
            mu = value;
        } else {
            // P is unchanged, so the other scores stay valid
            let mut rest = scores;
            rest.remove(i);
            cached = Some(rest);
        }
    }
    Ok(GreedyOutcome {
        set: normalized(order.clone()),
        order,
        mu,
        rounds,
    })
}

/// Greedy with a full steady-state solve per candidate.
pub fn greedy(problem: &SelectionProblem<'_>, b_hat: f64) -> Result<GreedyOutcome> {
    greedy_with(problem, b_hat, GreedyImpl::Naive)
}

/// Greedy with incremental inverse updates; same contract as [`greedy`].
pub fn greedy_fast(problem: &SelectionProblem<'_>, b_hat: f64) -> Result<GreedyOutcome> {
    greedy_with(problem, b_hat, GreedyImpl::Fast)
}

pub fn greedy_with(problem: &SelectionProblem<'_>, b_hat: f64, imp: GreedyImpl) -> Result<GreedyOutcome> {
    problem.validate()?;
    GreedyRunner::new(problem, imp)?.run(b_hat)
}

/// Holds the per-problem setup so repeated greedy calls share it.
enum GreedyRunner<'p, 'g> {
    Naive(&'p SelectionProblem<'g>, Evaluator),
    Fast(&'p SelectionProblem<'g>, fast::FastScorer),
}

impl<'p, 'g> GreedyRunner<'p, 'g> {
    fn new(problem: &'p SelectionProblem<'g>, imp: GreedyImpl) -> Result<Self> {
        Ok(match imp {
            GreedyImpl::Naive => GreedyRunner::Naive(problem, Evaluator::new(problem)),
            GreedyImpl::Fast => GreedyRunner::Fast(problem, fast::FastScorer::new(problem)?),
        })
    }

    fn run(&self, b_hat: f64) -> Result<GreedyOutcome> {
        match self {
            GreedyRunner::Naive(p, e) => run_greedy(
                p,
                b_hat,
                NaiveScorer {
                    evaluator: e.clone(),
                    members: Vec::new(),
                },
            ),
            GreedyRunner::Fast(p, s) => run_greedy(p, b_hat, s.clone()),
        }
    }
}

/// One greedy invocation inside the bound search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub b_hat: f64,
    pub mu: f64,
    /// Whether this call improved the best deviation.
    pub accepted: bool,
    /// Best deviation after this call.
    pub d_min: f64,
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub s1: Vec<usize>,
    pub mu: f64,
    pub f: f64,
    pub alpha: f64,
    pub k: usize,
    pub delta: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
}

/// Maximum number of greedy calls: `64 ⌈ln(1/δ)⌉`, at least 64.
pub fn greedy_call_cap(delta: f64) -> usize {
    let logs = (1.0 / delta).ln().ceil();
    if logs.is_finite() && logs > 1.0 {
        64 * logs as usize
    } else {
        64
    }
}

/// Bound search with the fast greedy routine.
pub fn bound_search(problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    bound_search_with(problem, GreedyImpl::Fast)
}

/// Binary search over the greedy upper bound `b̂` until
/// `b_max / b_min ≤ e^δ`, keeping the set with the smallest `|μ − α|`.
pub fn bound_search_with(problem: &SelectionProblem<'_>, imp: GreedyImpl) -> Result<SelectionResult> {
    problem.validate()?;
    let alpha = problem.alpha;
    let mut result = SelectionResult {
        s1: Vec::new(),
        mu: 0.0,
        f: alpha,
        alpha,
        k: problem.k,
        delta: problem.delta,
        trace: Vec::new(),
        iterations: 0,
    };
    // μ(∅) = 0 already hits α = 0, and the ratio test below needs α > 0
    if alpha == 0.0 {
        return Ok(result);
    }
    let runner = GreedyRunner::new(problem, imp)?;
    let cap = greedy_call_cap(problem.delta);
    let threshold = problem.delta.exp();
    let (mut b_min, mut b_max) = (alpha, 1.0f64);
    let mut b_hat = 1.0f64;
    let mut d_min = alpha;
    loop {
        if result.iterations == cap {
            return Err(Error::IterationCap {
                calls: cap,
                trace: result.trace,
            });
        }
        result.iterations += 1;
        let out = runner.run(b_hat)?;
        let d_hat = (out.mu - alpha).abs();
        let accepted = d_hat < d_min;
        if accepted {
            result.s1 = out.set.clone();
            result.mu = out.mu;
            d_min = d_hat;
        }
        result.trace.push(TraceEntry {
            b_hat,
            mu: out.mu,
            accepted,
            d_min,
            size: out.set.len(),
        });
        let mut halve = true;
        if out.mu > alpha {
            loop {
                let mid = (b_min + b_max) / 2.0;
                // stop once the interval no longer shrinks in floating point
                if !(out.mu <= mid) || mid == b_max {
                    break;
                }
                b_max = mid;
            }
        } else {
            b_min = b_hat;
            if alpha + d_hat < b_max {
                b_max = alpha + d_hat;
                b_hat = b_max;
                halve = false;
            }
        }
        if halve {
            b_hat = (b_min + b_max) / 2.0;
        }
        if !(b_max / b_min > threshold) {
            break;
        }
    }
    result.f = d_min;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::steady_state;
    use crate::generate::{generate_er, random_digraph, random_subset};
    use crate::graph::{families, gadget_graph};
    use proptest::prelude::*;

    fn er_problem(g: &WeightedDigraph, seed: u64, alpha: f64, k: usize, model: Model) -> SelectionProblem<'_> {
        let s0 = random_subset(&(0..g.node_count()).collect::<Vec<_>>(), 3, seed);
        match model {
            Model::Absolute => SelectionProblem::absolute(g, s0, alpha, k),
            Model::Influenced => {
                SelectionProblem::influenced(g, s0, alpha, k, Stubbornness::uniform(g.node_count(), 1.0).unwrap())
            }
        }
    }

    #[test]
    fn evaluator_matches_dynamics() {
        let g = random_digraph(9, 0.3, 5).unwrap();
        let kappa = Stubbornness::from_values((0..9).map(|i| 0.5 + 0.2 * i as f64).collect()).unwrap();
        for problem in [
            SelectionProblem::absolute(&g, vec![0, 4], 0.5, 2),
            SelectionProblem::influenced(&g, vec![0, 4], 0.5, 2, kappa),
        ] {
            for s1 in [vec![], vec![2], vec![1, 7, 8], vec![1, 2, 3, 5, 6, 7, 8]] {
                let direct = steady_state(&g, &problem.config(s1.clone())).unwrap().mu;
                assert!((problem.mu(&s1).unwrap() - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn validation() {
        let g = families::path(4);
        assert!(SelectionProblem::absolute(&g, vec![0], 0.5, 0).validate().is_err());
        assert!(SelectionProblem::absolute(&g, vec![0], 0.5, 4).validate().is_err());
        assert!(SelectionProblem::absolute(&g, vec![0], 1.5, 1).validate().is_err());
        assert!(SelectionProblem::absolute(&g, vec![0], 0.5, 1).with_delta(0.0).validate().is_err());
        assert!(SelectionProblem::absolute(&g, vec![0], 0.5, 1)
            .with_candidates(vec![0, 1])
            .validate()
            .is_err());
        assert!(SelectionProblem::absolute(&g, vec![], 0.5, 1).validate().is_err());
        assert!(SelectionProblem::absolute(&g, vec![0], 0.5, 3).validate().is_ok());
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[0.5, 0.5 + 1e-15, 0.2]), 0);
        assert_eq!(argmax(&[0.5, 0.6, 0.6]), 1);
    }

    #[test]
    fn unconstrained_greedy_is_plain_greedy() {
        let g = generate_er(15, 0.3, 2, true).unwrap();
        let p = er_problem(&g, 1, 1.0, 3, Model::Absolute);
        let out = greedy(&p, 1.0).unwrap();
        assert_eq!(out.set.len(), 3);
        // each accepted node is the best marginal choice at its step
        let mut members: Vec<usize> = Vec::new();
        for &s in &out.order {
            let best = p
                .candidates
                .iter()
                .filter(|v| !members.contains(v))
                .map(|&u| {
                    let mut t = members.clone();
                    t.push(u);
                    p.mu(&t).unwrap()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            members.push(s);
            assert!((p.mu(&members).unwrap() - best).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_bound_selects_nothing() {
        let g = generate_er(15, 0.3, 4, true).unwrap();
        let p = er_problem(&g, 2, 0.5, 3, Model::Absolute);
        for imp in [GreedyImpl::Naive, GreedyImpl::Fast] {
            let out = greedy_with(&p, 1e-6, imp).unwrap();
            assert!(out.set.is_empty());
            assert_eq!(out.mu, 0.0);
        }
    }

    #[test]
    fn greedy_respects_bound() {
        let g = generate_er(20, 0.2, 9, true).unwrap();
        for model in [Model::Absolute, Model::Influenced] {
            let p = er_problem(&g, 3, 0.4, 4, model);
            for b in [0.1, 0.2, 0.35, 0.6] {
                let out = greedy(&p, b).unwrap();
                assert!(out.mu <= b && out.set.len() <= 4);
                assert!((p.mu(&out.set).unwrap() - out.mu).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gadget_greedy_against_optimum() {
        let (g, center) = gadget_graph(&families::petersen(), 3.0).unwrap();
        let p = SelectionProblem::absolute(&g, vec![center], 1.0, 6);
        let out = greedy(&p, 1.0).unwrap();
        let (_, best) = brute_force(&p.clone().with_alpha(1.0)).unwrap();
        assert!(out.mu >= (1.0 - (-1.0f64).exp()) * best);
    }

    #[test]
    fn fast_matches_naive_scores() {
        for seed in 0..4 {
            let g = random_digraph(12, 0.25, seed).unwrap();
            let kappa = Stubbornness::from_values((0..12).map(|i| 0.4 + 0.15 * i as f64).collect()).unwrap();
            for p in [
                SelectionProblem::absolute(&g, vec![0, 5], 0.6, 4),
                SelectionProblem::influenced(&g, vec![0, 5], 0.6, 4, kappa.clone()),
            ] {
                let a = greedy(&p, 0.55).unwrap();
                let b = greedy_fast(&p, 0.55).unwrap();
                assert_eq!(a.order, b.order);
                assert_eq!(a.rounds.len(), b.rounds.len());
                for (ra, rb) in a.rounds.iter().zip(&b.rounds) {
                    assert_eq!(ra.candidates, rb.candidates);
                    for (x, y) in ra.scores.iter().zip(&rb.scores) {
                        assert!((x - y).abs() < 1e-8);
                    }
                }
                assert!((a.mu - b.mu).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bound_search_alpha_one_is_one_call() {
        let g = generate_er(15, 0.3, 7, true).unwrap();
        let p = er_problem(&g, 1, 1.0, 3, Model::Absolute);
        let r = bound_search(&p).unwrap();
        assert_eq!(r.iterations, 1);
        let out = greedy(&p, 1.0).unwrap();
        assert_eq!(r.s1, out.set);
    }

    #[test]
    fn bound_search_alpha_zero_is_empty() {
        let g = generate_er(15, 0.3, 7, true).unwrap();
        let r = bound_search(&er_problem(&g, 1, 0.0, 3, Model::Absolute)).unwrap();
        assert!(r.s1.is_empty() && r.mu == 0.0 && r.f == 0.0 && r.trace.is_empty());
    }

    #[test]
    fn bound_search_trace_and_determinism() {
        let g = generate_er(25, 0.15, 3, true).unwrap();
        for model in [Model::Absolute, Model::Influenced] {
            let p = er_problem(&g, 8, 0.37, 4, model);
            let a = bound_search(&p).unwrap();
            let b = bound_search(&p).unwrap();
            assert_eq!(a.s1, b.s1);
            assert_eq!(a.trace, b.trace);
            assert!(a.trace.windows(2).all(|w| w[1].d_min <= w[0].d_min));
            assert!(a.s1.len() <= 4);
            assert!((a.f - (a.mu - 0.37).abs()).abs() < 1e-15);
            let naive = bound_search_with(&p, GreedyImpl::Naive).unwrap();
            assert_eq!(naive.s1, a.s1);
        }
    }

    #[test]
    fn call_cap() {
        assert_eq!(greedy_call_cap(1e-4), 64 * 10);
        assert_eq!(greedy_call_cap(0.5), 64);
        assert_eq!(greedy_call_cap(2.0), 64);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn greedy_is_feasible(seed in 0u64..1000, b in 0.05f64..1.0, k in 1usize..5) {
            let g = random_digraph(10, 0.25, seed).unwrap();
            let p = SelectionProblem::absolute(&g, vec![0, 1], 0.5, k);
            let out = greedy_fast(&p, b).unwrap();
            prop_assert!(out.mu <= b);
            prop_assert!(out.set.len() <= k);
            prop_assert!(out.set.iter().all(|v| p.candidates.contains(v)));
        }
    }
}
