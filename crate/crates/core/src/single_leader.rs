//! One leader per party: closed-form balance of domination scores and the
//! single-leader selection heuristics.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generate::rng;
use crate::graph::{Model, Stubbornness, WeightedDigraph};
use crate::walks::{ResistanceKernel, WalkKernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceReport {
    pub s0: usize,
    pub s1: usize,
    /// `|(1−α) a0 − α a1|`
    pub numerator: f64,
    /// `a0 + a1`
    pub denominator: f64,
    pub mu: f64,
    pub f: f64,
}

impl BalanceReport {
    /// From the two weights `a0` (pull toward 1) and `a1` (pull toward 0);
    /// `μ = a0 / (a0 + a1)`.
    fn from_weights(s0: usize, s1: usize, a0: f64, a1: f64, alpha: f64) -> Self {
        let numerator = ((1.0 - alpha) * a0 - alpha * a1).abs();
        let denominator = a0 + a1;
        Self {
            s0,
            s1,
            numerator,
            denominator,
            mu: a0 / denominator,
            f: numerator / denominator,
        }
    }
}

fn check_pair(k: &WalkKernel, s0: usize, s1: usize, alpha: f64) -> Result<()> {
    let n = k.node_count();
    if s0 >= n || s1 >= n {
        return Err(Error::validation("leader is not a node"));
    }
    if s0 == s1 {
        return Err(Error::validation("s0 and s1 must differ"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::validation(format!("alpha {alpha} not in [0, 1]")));
    }
    Ok(())
}

/// Absolute leaders: `μ = D_{s1,s0} / (D_{s0,s1} + D_{s1,s0})`.
pub fn balance_absolute(k: &WalkKernel, s0: usize, s1: usize, alpha: f64) -> Result<BalanceReport> {
    check_pair(k, s0, s1, alpha)?;
    Ok(BalanceReport::from_weights(
        s0,
        s1,
        k.domination_score(s1, s0),
        k.domination_score(s0, s1),
        alpha,
    ))
}

/// Influenced leaders: the domination scores are offset by `d_s / (κ_s π_s)`.
pub fn balance_influenced(
    k: &WalkKernel,
    s0: usize,
    s1: usize,
    kappa0: f64,
    kappa1: f64,
    alpha: f64,
) -> Result<BalanceReport> {
    check_pair(k, s0, s1, alpha)?;
    if !(kappa0 > 0.0 && kappa1 > 0.0) {
        return Err(Error::validation("stubbornness must be positive"));
    }
    let (d, pi) = (k.degrees(), k.stationary());
    let a0 = d[s0] / (kappa0 * pi[s0]) + k.domination_score(s1, s0);
    let a1 = d[s1] / (kappa1 * pi[s1]) + k.domination_score(s0, s1);
    Ok(BalanceReport::from_weights(s0, s1, a0, a1, alpha))
}

/// `f` at `α = 1/2` on an undirected graph from information centrality and
/// effective resistance; `kappa = Some((κ0, κ1))` selects the influenced form.
pub fn centrality_balance(
    g: &WeightedDigraph,
    s0: usize,
    s1: usize,
    kappa: Option<(f64, f64)>,
) -> Result<f64> {
    let r = ResistanceKernel::new(g)?;
    if s0 == s1 || s0 >= g.node_count() || s1 >= g.node_count() {
        return Err(Error::validation("need two distinct leaders"));
    }
    let (inv0, inv1) = match kappa {
        Some((k0, k1)) if k0 > 0.0 && k1 > 0.0 => (1.0 / k0, 1.0 / k1),
        Some(_) => return Err(Error::validation("stubbornness must be positive")),
        None => (0.0, 0.0),
    };
    let numerator = 1.0 / r.information_centrality(s0) + inv0 - 1.0 / r.information_centrality(s1) - inv1;
    Ok(numerator.abs() / (2.0 * (r.effective_resistance(s0, s1) + inv0 + inv1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Minimizes `f` over all candidates.
    Optimal,
    /// Minimizes the absolute-model numerator.
    Ds,
    /// Maximizes the absolute-model denominator.
    Er,
    /// Minimizes the influenced-model numerator.
    Dsk,
    Random(u64),
}

impl Heuristic {
    pub fn name(&self) -> &'static str {
        match self {
            Heuristic::Optimal => "optimal",
            Heuristic::Ds => "ds",
            Heuristic::Er => "er",
            Heuristic::Dsk => "dsk",
            Heuristic::Random(_) => "random",
        }
    }

    /// Parses `optimal|ds|er|dsk|random`; `random` takes `seed`.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "optimal" => Ok(Heuristic::Optimal),
            "ds" => Ok(Heuristic::Ds),
            "er" => Ok(Heuristic::Er),
            "dsk" | "ds&k" => Ok(Heuristic::Dsk),
            "random" => Ok(Heuristic::Random(seed)),
            other => Err(Error::validation(format!("unknown heuristic '{other}'"))),
        }
    }
}

/// Choosing party 1's single leader against a fixed `s0`.
#[derive(Debug, Clone)]
pub struct SingleLeaderProblem<'g> {
    pub graph: &'g WeightedDigraph,
    pub s0: usize,
    pub alpha: f64,
    pub model: Model,
    /// Required for the influenced model.
    pub kappa: Option<Stubbornness>,
    /// Defaults to every node except `s0`.
    pub candidates: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleChoice {
    pub heuristic: &'static str,
    pub s1: usize,
    /// Balance under the problem's own model.
    pub report: BalanceReport,
}

/// Shared kernel for repeated single-leader queries on one graph.
pub struct SingleLeaderSolver<'g> {
    problem: SingleLeaderProblem<'g>,
    kernel: WalkKernel,
    candidates: Vec<usize>,
}

impl<'g> SingleLeaderSolver<'g> {
    pub fn new(problem: SingleLeaderProblem<'g>) -> Result<Self> {
        let n = problem.graph.node_count();
        if problem.s0 >= n {
            return Err(Error::validation("s0 is not a node"));
        }
        if problem.model == Model::Influenced {
            match &problem.kappa {
                Some(k) if k.len() == n => {}
                _ => return Err(Error::validation("influenced model requires stubbornness for every node")),
            }
        }
        let mut candidates = match &problem.candidates {
            Some(q) => q.clone(),
            None => (0..n).collect(),
        };
        candidates.sort_unstable();
        candidates.dedup();
        candidates.retain(|&v| v != problem.s0);
        if let Some(&v) = candidates.iter().find(|&&v| v >= n) {
            return Err(Error::validation(format!("candidate {v} is not a node")));
        }
        if candidates.is_empty() {
            return Err(Error::validation("no candidates for s1"));
        }
        let kernel = WalkKernel::new(problem.graph)?;
        Ok(Self {
            problem,
            kernel,
            candidates,
        })
    }

    pub fn kernel(&self) -> &WalkKernel {
        &self.kernel
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    fn kappa(&self, v: usize) -> f64 {
        self.problem.kappa.as_ref().map_or(1.0, |k| k.get(v))
    }

    fn absolute(&self, s1: usize) -> Result<BalanceReport> {
        balance_absolute(&self.kernel, self.problem.s0, s1, self.problem.alpha)
    }

    fn influenced(&self, s1: usize) -> Result<BalanceReport> {
        let s0 = self.problem.s0;
        balance_influenced(&self.kernel, s0, s1, self.kappa(s0), self.kappa(s1), self.problem.alpha)
    }

    /// Balance of `s1` under the problem's model.
    pub fn report(&self, s1: usize) -> Result<BalanceReport> {
        match self.problem.model {
            Model::Absolute => self.absolute(s1),
            Model::Influenced => self.influenced(s1),
        }
    }

    pub fn select(&self, heuristic: Heuristic) -> Result<SingleChoice> {
        let s1 = match heuristic {
            Heuristic::Random(seed) => *self
                .candidates
                .choose(&mut rng(seed))
                .expect("candidates are nonempty"),
            Heuristic::Optimal => self.argmin(|v| Ok(self.report(v)?.f))?,
            Heuristic::Ds => self.argmin(|v| Ok(self.absolute(v)?.numerator))?,
            Heuristic::Er => self.argmin(|v| Ok(-self.absolute(v)?.denominator))?,
            Heuristic::Dsk => self.argmin(|v| Ok(self.influenced(v)?.numerator))?,
        };
        Ok(SingleChoice {
            heuristic: heuristic.name(),
            s1,
            report: self.report(s1)?,
        })
    }

    /// Smallest score, ties to the smallest node id.
    fn argmin<F>(&self, score: F) -> Result<usize>
    where
        F: Fn(usize) -> Result<f64> + Sync,
    {
        let scores: Vec<f64> = self
            .candidates
            .par_iter()
            .map(|&v| score(v))
            .collect::<Result<_>>()?;
        let mut best = 0;
        for i in 1..scores.len() {
            if scores[i] < scores[best] {
                best = i;
            }
        }
        Ok(self.candidates[best])
    }
}

pub fn select_single(problem: SingleLeaderProblem<'_>, heuristic: Heuristic) -> Result<SingleChoice> {
    SingleLeaderSolver::new(problem)?.select(heuristic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::steady_state;
    use crate::generate::{generate_er, random_digraph, random_undirected};
    use crate::graph::{families, LeaderConfig};

    fn problem(g: &WeightedDigraph, s0: usize, alpha: f64, model: Model) -> SingleLeaderProblem<'_> {
        SingleLeaderProblem {
            graph: g,
            s0,
            alpha,
            model,
            kappa: match model {
                Model::Absolute => None,
                Model::Influenced => Some(Stubbornness::uniform(g.node_count(), 1.0).unwrap()),
            },
            candidates: None,
        }
    }

    #[test]
    fn path3_ends_balance() {
        let k = WalkKernel::new(&families::path(3)).unwrap();
        let r = balance_absolute(&k, 0, 2, 0.5).unwrap();
        assert!(r.f.abs() < 1e-12);
        assert!((r.mu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vertex_transitive_is_balanced() {
        let k = WalkKernel::new(&families::petersen()).unwrap();
        for s1 in 1..10 {
            assert!(balance_absolute(&k, 0, s1, 0.5).unwrap().f < 1e-10);
        }
    }

    #[test]
    fn formulas_match_steady_state() {
        for seed in 0..10 {
            let g = random_digraph(8, 0.3, seed).unwrap();
            let k = WalkKernel::new(&g).unwrap();
            let abs = balance_absolute(&k, 1, 6, 0.3).unwrap();
            let direct = steady_state(&g, &LeaderConfig::absolute(vec![1], vec![6])).unwrap();
            assert!((abs.mu - direct.mu).abs() < 1e-8);
            assert!((abs.f - (direct.mu - 0.3).abs()).abs() < 1e-8);

            let kappa = Stubbornness::from_values((0..8).map(|i| 0.5 + i as f64 / 4.0).collect()).unwrap();
            let inf = balance_influenced(&k, 1, 6, kappa.get(1), kappa.get(6), 0.3).unwrap();
            let direct = steady_state(&g, &LeaderConfig::influenced(vec![1], vec![6], kappa)).unwrap();
            assert!((inf.mu - direct.mu).abs() < 1e-8);
        }
    }

    #[test]
    fn influenced_two_cycle() {
        let k = WalkKernel::new(&families::directed_cycle(2)).unwrap();
        let r = balance_influenced(&k, 0, 1, 1.0, 1.0, 0.5).unwrap();
        assert!(r.f < 1e-12 && (r.mu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stiff_limit() {
        let g = random_digraph(8, 0.3, 3).unwrap();
        let k = WalkKernel::new(&g).unwrap();
        let a = balance_absolute(&k, 2, 5, 0.5).unwrap();
        let i = balance_influenced(&k, 2, 5, 1e6, 1e6, 0.5).unwrap();
        assert!((a.mu - i.mu).abs() < 1e-4);
    }

    #[test]
    fn same_leader_is_rejected() {
        let k = WalkKernel::new(&families::path(3)).unwrap();
        assert!(balance_absolute(&k, 1, 1, 0.5).is_err());
    }

    #[test]
    fn centrality_corollaries() {
        let g = families::path(3);
        let f = centrality_balance(&g, 0, 1, None).unwrap();
        let direct = steady_state(&g, &LeaderConfig::absolute(vec![0], vec![1])).unwrap();
        assert!(f > 0.0);
        assert!((f - (direct.mu - 0.5).abs()).abs() < 1e-10);
        assert!(centrality_balance(&families::petersen(), 0, 7, None).unwrap() < 1e-10);
        // equal stubbornness cancels in the numerator
        let a = centrality_balance(&g, 0, 2, Some((2.0, 2.0))).unwrap();
        assert!(a < 1e-10);

        for seed in 0..5 {
            let g = random_undirected(8, 0.3, seed).unwrap();
            let k = WalkKernel::new(&g).unwrap();
            let abs = balance_absolute(&k, 0, 5, 0.5).unwrap();
            assert!((centrality_balance(&g, 0, 5, None).unwrap() - abs.f).abs() < 1e-8);
            let inf = balance_influenced(&k, 0, 5, 0.8, 1.7, 0.5).unwrap();
            assert!((centrality_balance(&g, 0, 5, Some((0.8, 1.7))).unwrap() - inf.f).abs() < 1e-8);
        }
        assert!(centrality_balance(&families::directed_cycle(3), 0, 1, None).is_err());
    }

    #[test]
    fn optimal_on_path3() {
        let g = families::path(3);
        let choice = select_single(problem(&g, 0, 0.5, Model::Absolute), Heuristic::Optimal).unwrap();
        assert_eq!(choice.s1, 2);
        assert!(choice.report.f < 1e-12);
        let ds = select_single(problem(&g, 0, 0.5, Model::Absolute), Heuristic::Ds).unwrap();
        assert_eq!(ds.s1, 2);
    }

    #[test]
    fn optimal_dominates_heuristics() {
        for seed in 0..5 {
            let g = generate_er(10, 0.4, seed, true).unwrap();
            for model in [Model::Absolute, Model::Influenced] {
                for alpha in [0.25, 0.5, 0.75, 1.0] {
                    let solver = SingleLeaderSolver::new(problem(&g, 0, alpha, model)).unwrap();
                    let best = solver.select(Heuristic::Optimal).unwrap().report.f;
                    let exhaustive = solver
                        .candidates()
                        .iter()
                        .map(|&v| solver.report(v).unwrap().f)
                        .fold(f64::INFINITY, f64::min);
                    assert_eq!(best, exhaustive);
                    for h in [Heuristic::Ds, Heuristic::Er, Heuristic::Dsk, Heuristic::Random(seed)] {
                        assert!(best <= solver.select(h).unwrap().report.f);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_candidates() {
        let g = families::path(3);
        let mut p = problem(&g, 0, 0.5, Model::Absolute);
        p.candidates = Some(vec![0]);
        assert!(select_single(p, Heuristic::Optimal).is_err());
    }

    #[test]
    fn heuristic_names_round_trip() {
        for name in ["optimal", "ds", "er", "dsk", "random"] {
            assert_eq!(Heuristic::parse(name, 3).unwrap().name(), name);
        }
        assert!(Heuristic::parse("best", 0).is_err());
    }
}
