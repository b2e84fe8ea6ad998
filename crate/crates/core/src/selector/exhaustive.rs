//! Exhaustive search over candidate subsets, the minimum cover number and
//! the approximation band it feeds, and a randomized submodularity check.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Evaluator, SelectionProblem};
use crate::error::{Error, Result};
use crate::generate::rng;
use crate::graph::{Model, Stubbornness, WeightedDigraph};

/// Default cap on the number of subsets evaluated exhaustively.
pub const DEFAULT_BUDGET: u128 = 2_000_000;

const CHUNK: usize = 4096;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Number of subsets of an `m`-set with at most `k` elements.
pub fn subset_count(m: usize, k: usize) -> u128 {
    (0..=k.min(m)).fold(0u128, |acc, s| acc.saturating_add(binomial(m, s)))
}

/// Lexicographic `k`-combinations of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        match (0..k).rev().find(|&i| self.idx[i] < self.n - k + i) {
            Some(i) => {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
            }
            None => self.done = true,
        }
        Some(out)
    }
}

/// Visits the subsets of `q` of each size in `sizes`, by size and then
/// lexicographically, with their μ. Evaluation runs in parallel chunks but
/// `visit` sees subsets in order; returning `false` stops the scan.
fn scan<F>(evaluator: &Evaluator, q: &[usize], sizes: impl IntoIterator<Item = usize>, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize], f64) -> bool,
{
    for s in sizes {
        let mut combos = Combinations::new(q.len(), s);
        loop {
            let chunk: Vec<Vec<usize>> = combos
                .by_ref()
                .take(CHUNK)
                .map(|idx| idx.iter().map(|&i| q[i]).collect())
                .collect();
            if chunk.is_empty() {
                break;
            }
            let mus: Vec<f64> = chunk.par_iter().map(|set| evaluator.mu(set)).collect::<Result<_>>()?;
            for (set, mu) in chunk.iter().zip(mus) {
                if !visit(set, mu) {
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}

fn check_budget(required: u128, budget: u128) -> Result<()> {
    if required > budget {
        Err(Error::BudgetExceeded { required, budget })
    } else {
        Ok(())
    }
}

/// Exact minimizer of `|μ(P) − α|` over `P ⊆ Q`, `|P| ≤ k`, with the
/// default budget.
pub fn brute_force(problem: &SelectionProblem<'_>) -> Result<(Vec<usize>, f64)> {
    brute_force_with_budget(problem, DEFAULT_BUDGET)
}

/// Ties go to the first subset in (size, lexicographic) order.
pub fn brute_force_with_budget(problem: &SelectionProblem<'_>, budget: u128) -> Result<(Vec<usize>, f64)> {
    problem.validate()?;
    check_budget(subset_count(problem.candidates.len(), problem.k), budget)?;
    let mut best = (Vec::new(), 0.0, problem.alpha);
    scan(&Evaluator::new(problem), &problem.candidates, 1..=problem.k, |set, mu| {
        let d = (mu - problem.alpha).abs();
        if d < best.2 {
            best = (set.to_vec(), mu, d);
        }
        true
    })?;
    Ok((best.0, best.1))
}

/// `k_{μ,b} = min{|S| : S ⊆ Q, μ(S) ≥ b}`; `None` stands for infinity.
pub fn min_cover_number(problem: &SelectionProblem<'_>, b: f64) -> Result<Option<usize>> {
    if b <= 0.0 {
        return Ok(Some(0));
    }
    // μ is monotone, so the whole candidate set decides feasibility
    if problem.mu(&problem.candidates)? < b {
        return Ok(None);
    }
    cover_number_at_most(problem, b, problem.candidates.len())
}

/// `k_{μ,b}` if it is at most `cap`, otherwise `None`.
pub fn cover_number_at_most(problem: &SelectionProblem<'_>, b: f64, cap: usize) -> Result<Option<usize>> {
    if b <= 0.0 {
        return Ok(Some(0));
    }
    let cap = cap.min(problem.candidates.len());
    check_budget(subset_count(problem.candidates.len(), cap), DEFAULT_BUDGET)?;
    let mut found = None;
    scan(&Evaluator::new(problem), &problem.candidates, 1..=cap, |set, mu| {
        if mu >= b {
            found = Some(set.len());
            false
        } else {
            true
        }
    })?;
    Ok(found)
}

/// `ζ = max(1/e, 1/k_{μ,α})`, with `ζ = 1` for `k = 0`.
pub fn zeta(cover_number: Option<usize>) -> f64 {
    let inv_e = (-1.0f64).exp();
    match cover_number {
        None => inv_e,
        Some(0) => 1.0,
        Some(k) => inv_e.max(1.0 / k as f64),
    }
}

/// ζ for the problem's own α. Only `k_{μ,α} ≤ 2` moves ζ above `1/e`, so
/// the search stops at pairs.
pub fn zeta_for(problem: &SelectionProblem<'_>) -> Result<f64> {
    Ok(zeta(cover_number_at_most(problem, problem.alpha, 2)?))
}

/// `[(1−ζ) e^{−δ} μ*, (1−ζ)⁻¹ e^{δ} μ*]`
pub fn approximation_band(mu_star: f64, zeta: f64, delta: f64) -> (f64, f64) {
    let lo = (1.0 - zeta) * (-delta).exp() * mu_star;
    let hi = if zeta >= 1.0 {
        f64::INFINITY
    } else {
        delta.exp() * mu_star / (1.0 - zeta)
    };
    (lo, hi)
}

pub fn within_band(mu: f64, mu_star: f64, zeta: f64, delta: f64) -> bool {
    let (lo, hi) = approximation_band(mu_star, zeta, delta);
    lo <= mu && mu <= hi
}

/// μ of every subset of `Q` up to size `k_max`, for answering many
/// `(α, k)` queries from one enumeration.
#[derive(Debug, Clone)]
pub struct ExhaustiveTable {
    sets: Vec<Vec<usize>>,
    mus: Vec<f64>,
    /// `size_end[s]` is one past the last subset of size `s`.
    size_end: Vec<usize>,
}

impl ExhaustiveTable {
    pub fn build(problem: &SelectionProblem<'_>, k_max: usize, budget: u128) -> Result<Self> {
        let q = &problem.candidates;
        let k_max = k_max.min(q.len());
        check_budget(subset_count(q.len(), k_max), budget)?;
        let mut sets = vec![Vec::new()];
        let mut mus = vec![0.0];
        let mut size_end = vec![1];
        let evaluator = Evaluator::new(problem);
        for s in 1..=k_max {
            scan(&evaluator, q, [s], |set, mu| {
                sets.push(set.to_vec());
                mus.push(mu);
                true
            })?;
            size_end.push(sets.len());
        }
        Ok(Self { sets, mus, size_end })
    }

    pub fn k_max(&self) -> usize {
        self.size_end.len() - 1
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Same answer as [`brute_force`] for `k ≤ k_max`.
    pub fn best(&self, alpha: f64, k: usize) -> (Vec<usize>, f64) {
        let end = self.size_end[k.min(self.k_max())];
        let mut best = 0;
        for i in 1..end {
            if (self.mus[i] - alpha).abs() < (self.mus[best] - alpha).abs() {
                best = i;
            }
        }
        (self.sets[best].clone(), self.mus[best])
    }

    /// `k_{μ,b}` when it is at most `k_max`.
    pub fn cover_number(&self, b: f64) -> Option<usize> {
        self.mus.iter().position(|&mu| mu >= b).map(|i| self.sets[i].len())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SubmodularityReport {
    pub trials: usize,
    pub monotonicity_violations: usize,
    pub submodularity_violations: usize,
    /// Smallest slack seen in either inequality; negative means violated.
    pub worst_margin: f64,
}

/// Samples `S ⊆ T ⊆ Q` and `u ∈ Q ∖ T` with `Q = V ∖ S0`, and checks
/// `μ(T) ≥ μ(S)` and `μ(S ∪ {u}) − μ(S) ≥ μ(T ∪ {u}) − μ(T)` up to `1e-9`.
pub fn check_submodularity(
    g: &WeightedDigraph,
    s0: &[usize],
    model: Model,
    kappa: Option<Stubbornness>,
    trials: usize,
    seed: u64,
) -> Result<SubmodularityReport> {
    let n = g.node_count();
    let problem = SelectionProblem {
        model,
        kappa: match (model, kappa) {
            (Model::Influenced, None) => Some(Stubbornness::uniform(n, 1.0)?),
            (_, k) => k,
        },
        ..SelectionProblem::absolute(g, s0.to_vec(), 0.5, 1)
    };
    problem.validate()?;
    let evaluator = Evaluator::new(&problem);
    let q = &problem.candidates;
    if q.len() < 2 {
        return Err(Error::validation("need at least two candidates"));
    }
    let mut r = rng(seed);
    let mut report = SubmodularityReport {
        trials,
        worst_margin: f64::INFINITY,
        ..Default::default()
    };
    for _ in 0..trials {
        let u = q[r.gen_range(0..q.len())];
        let t: Vec<usize> = q.iter().copied().filter(|&v| v != u && r.gen_bool(0.5)).collect();
        let s: Vec<usize> = t.iter().copied().filter(|_| r.gen_bool(0.5)).collect();
        let with = |set: &[usize]| {
            let mut out = set.to_vec();
            out.push(u);
            out
        };
        let (mu_s, mu_t) = (evaluator.mu(&s)?, evaluator.mu(&t)?);
        let gain_s = evaluator.mu(&with(&s))? - mu_s;
        let gain_t = evaluator.mu(&with(&t))? - mu_t;
        let mono = mu_t - mu_s;
        let sub = gain_s - gain_t;
        if mono < -1e-9 {
            report.monotonicity_violations += 1;
        }
        if sub < -1e-9 {
            report.submodularity_violations += 1;
        }
        report.worst_margin = report.worst_margin.min(mono).min(sub);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_er, random_digraph};
    use crate::graph::{families, gadget_graph, is_vertex_cover};

    #[test]
    fn combinations_order() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
        assert_eq!(subset_count(27, 5), 1 + 27 + 351 + 2925 + 17550 + 80730);
    }

    #[test]
    fn path3_brute_force() {
        let g = families::path(3);
        let p = SelectionProblem::absolute(&g, vec![0], 0.5, 1);
        let (set, mu) = brute_force(&p).unwrap();
        assert_eq!(set, vec![2]);
        assert!((mu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gadget_k4_covers() {
        let (g, center) = gadget_graph(&families::complete(4), 3.0).unwrap();
        let p = SelectionProblem::absolute(&g, vec![center], 0.7, 3);
        let (set, mu) = brute_force(&p).unwrap();
        assert!((mu - 0.7).abs() < 1e-12);
        assert!(is_vertex_cover(&families::complete(4), &set));
    }

    #[test]
    fn budget_is_enforced() {
        let g = generate_er(30, 0.2, 1, true).unwrap();
        let p = SelectionProblem::absolute(&g, vec![0], 0.5, 10);
        assert!(matches!(brute_force(&p), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn brute_force_beats_bound_search() {
        for seed in 0..4 {
            let g = random_digraph(12, 0.25, seed).unwrap();
            for alpha in [0.2, 0.5, 0.8] {
                let p = SelectionProblem::absolute(&g, vec![0, 1], alpha, 3);
                let (_, mu) = brute_force(&p).unwrap();
                let r = super::super::bound_search(&p).unwrap();
                assert!((mu - alpha).abs() <= r.f + 1e-15);
            }
        }
    }

    #[test]
    fn table_matches_brute_force() {
        let g = random_digraph(11, 0.25, 8).unwrap();
        let p = SelectionProblem::absolute(&g, vec![3], 0.5, 4);
        let table = ExhaustiveTable::build(&p, 4, DEFAULT_BUDGET).unwrap();
        assert_eq!(table.len() as u128, subset_count(10, 4));
        for alpha in [0.1, 0.45, 0.9] {
            for k in 1..=4 {
                let q = p.clone().with_alpha(alpha).with_k(k);
                assert_eq!(table.best(alpha, k), brute_force(&q).unwrap());
            }
        }
        assert_eq!(table.cover_number(0.0), Some(0));
        assert_eq!(table.cover_number(0.45), min_cover_number(&p, 0.45).unwrap());
    }

    #[test]
    fn cover_numbers() {
        let g = families::path(5);
        let p = SelectionProblem::absolute(&g, vec![0], 0.5, 2);
        assert_eq!(min_cover_number(&p, 0.0).unwrap(), Some(0));
        assert_eq!(min_cover_number(&p, 0.9).unwrap(), None);
        // exhaustive oracle by hand over all subsets
        let mut expected = None;
        for mask in 1u32..16 {
            let set: Vec<usize> = (1..5).filter(|v| mask & (1 << (v - 1)) != 0).collect();
            if p.mu(&set).unwrap() >= 0.5 {
                let size = set.len();
                expected = Some(expected.map_or(size, |e: usize| e.min(size)));
            }
        }
        assert_eq!(min_cover_number(&p, 0.5).unwrap(), expected);
        assert_eq!(cover_number_at_most(&p, 0.5, 1).unwrap(), expected.filter(|&k| k <= 1));
    }

    #[test]
    fn zeta_values() {
        let inv_e = (-1.0f64).exp();
        assert_eq!(zeta(None), inv_e);
        assert_eq!(zeta(Some(0)), 1.0);
        assert_eq!(zeta(Some(1)), 1.0);
        assert_eq!(zeta(Some(2)), 0.5);
        assert_eq!(zeta(Some(5)), inv_e);
        let (lo, hi) = approximation_band(0.5, 0.5, 0.0);
        assert_eq!((lo, hi), (0.25, 1.0));
        assert!(within_band(0.3, 0.5, 0.5, 0.0));
        assert!(!within_band(0.2, 0.5, 0.5, 0.0));
    }

    #[test]
    fn submodularity_small() {
        let g = generate_er(12, 0.3, 5, true).unwrap();
        for model in [Model::Absolute, Model::Influenced] {
            let report = check_submodularity(&g, &[0, 1], model, None, 200, 3).unwrap();
            assert_eq!(report.monotonicity_violations, 0);
            assert_eq!(report.submodularity_violations, 0);
        }
    }
}
