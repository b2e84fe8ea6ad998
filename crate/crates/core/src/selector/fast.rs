//! Incremental candidate scoring.
//!
//! Absolute model: keep `M = (L_FF)⁻¹`, `x_F = M b` and the column sums of
//! `M`. Moving `u` from the followers to S1 deletes row and column `u`, and
//! the new follower sum follows from the `u`-th row and column alone. The
//! inverse itself is only downdated for the accepted node.
//!
//! Influenced model: keep `M = (L + E^S K)⁻¹`; adding `u` is a rank-1
//! update `κ_u e_u e_uᵀ`, scored in O(1) and applied by Sherman-Morrison.

use rayon::prelude::*;

use super::{Evaluator, Scorer, SelectionProblem};
use crate::error::Result;
use crate::graph::{Model, WeightedDigraph};
use crate::numerics::{block_remove_inverse, inverse, select, sherman_morrison_update, DenseMatrix, DenseVector};

const PIVOT_FLOOR: f64 = 1e-13;

#[derive(Clone)]
pub(crate) enum FastScorer {
    Absolute(AbsoluteState),
    Influenced(InfluencedState),
}

impl FastScorer {
    pub(crate) fn new(problem: &SelectionProblem<'_>) -> Result<Self> {
        Ok(match problem.model {
            Model::Absolute => FastScorer::Absolute(AbsoluteState::new(problem)?),
            Model::Influenced => FastScorer::Influenced(InfluencedState::new(problem)?),
        })
    }
}

impl Scorer for FastScorer {
    fn scores(&mut self, candidates: &[usize]) -> Result<Vec<f64>> {
        match self {
            FastScorer::Absolute(s) => s.scores(candidates),
            FastScorer::Influenced(s) => s.scores(candidates),
        }
    }

    fn accept(&mut self, u: usize) -> Result<()> {
        match self {
            FastScorer::Absolute(s) => s.accept(u),
            FastScorer::Influenced(s) => s.accept(u),
        }
    }
}

fn column_sums(m: &DenseMatrix) -> DenseVector {
    DenseVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

#[derive(Clone)]
pub(crate) struct AbsoluteState {
    graph: WeightedDigraph,
    evaluator: Evaluator,
    n: usize,
    members: Vec<usize>,
    followers: Vec<usize>,
    /// node -> position in `followers`
    pos: Vec<Option<usize>>,
    m: DenseMatrix,
    /// `A_{F,P} 1`
    b: DenseVector,
    x: DenseVector,
    x_sum: f64,
    col_sums: DenseVector,
}

impl AbsoluteState {
    fn new(problem: &SelectionProblem<'_>) -> Result<Self> {
        let n = problem.node_count();
        let mut pos = vec![None; n];
        let followers: Vec<usize> = (0..n).filter(|v| problem.s0.binary_search(v).is_err()).collect();
        for (i, &v) in followers.iter().enumerate() {
            pos[v] = Some(i);
        }
        let m = inverse(&select(&problem.graph.laplacian(), &followers, &followers))?;
        let f = followers.len();
        Ok(Self {
            graph: problem.graph.clone(),
            evaluator: Evaluator::new(problem),
            n,
            members: Vec::new(),
            col_sums: column_sums(&m),
            followers,
            pos,
            m,
            b: DenseVector::zeros(f),
            x: DenseVector::zeros(f),
            x_sum: 0.0,
        })
    }

    /// Follower-indexed in-weights `w(v, u)` from followers `v` into `u`.
    fn in_weights(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.graph
            .in_neighbors(u)
            .iter()
            .filter_map(|&(v, w)| self.pos[v].map(|i| (i, w)))
    }

    fn score(&self, u: usize) -> Result<f64> {
        let iu = self.pos[u].expect("candidate is a follower");
        let pivot = self.m[(iu, iu)];
        if !(pivot.abs() > PIVOT_FLOOR) {
            let mut set = self.members.clone();
            set.push(u);
            return self.evaluator.mu(&set);
        }
        let (mut row_c, mut sums_c) = (0.0, 0.0);
        for (i, w) in self.in_weights(u) {
            row_c += self.m[(iu, i)] * w;
            sums_c += self.col_sums[i] * w;
        }
        // y = M (b + c) with the u-entry of b + c dropped
        let y_u = self.x[iu] + row_c - pivot * self.b[iu];
        let y_sum = self.x_sum + sums_c - self.col_sums[iu] * self.b[iu];
        let follower_sum = y_sum - self.col_sums[iu] * y_u / pivot;
        Ok((self.members.len() as f64 + 1.0 + follower_sum) / self.n as f64)
    }

    fn scores(&self, candidates: &[usize]) -> Result<Vec<f64>> {
        candidates.par_iter().map(|&u| self.score(u)).collect()
    }

    fn accept(&mut self, u: usize) -> Result<()> {
        let iu = self.pos[u].expect("candidate is a follower");
        let mut b = self.b.clone();
        for (i, w) in self.in_weights(u).collect::<Vec<_>>() {
            b[i] += w;
        }
        let m = match block_remove_inverse(&self.m, iu) {
            Ok(m) if self.m[(iu, iu)].abs() > PIVOT_FLOOR => m,
            _ => {
                let rest: Vec<usize> = self.followers.iter().copied().filter(|&v| v != u).collect();
                inverse(&select(&self.graph.laplacian(), &rest, &rest))?
            }
        };
        self.b = b.remove_row(iu);
        self.followers.remove(iu);
        self.pos[u] = None;
        for (i, &v) in self.followers.iter().enumerate().skip(iu) {
            self.pos[v] = Some(i);
        }
        self.x = &m * &self.b;
        self.x_sum = self.x.sum();
        self.col_sums = column_sums(&m);
        self.m = m;
        self.members.push(u);
        Ok(())
    }
}

#[derive(Clone)]
pub(crate) struct InfluencedState {
    n: usize,
    kappa: Vec<f64>,
    m: DenseMatrix,
    /// `E^{P} K 1`
    z: DenseVector,
    x: DenseVector,
    x_sum: f64,
    col_sums: DenseVector,
}

impl InfluencedState {
    fn new(problem: &SelectionProblem<'_>) -> Result<Self> {
        let n = problem.node_count();
        let kappa: Vec<f64> = (0..n)
            .map(|v| problem.kappa.as_ref().map_or(1.0, |k| k.get(v)))
            .collect();
        let mut system = problem.graph.laplacian();
        for &v in &problem.s0 {
            system[(v, v)] += kappa[v];
        }
        let m = inverse(&system)?;
        Ok(Self {
            n,
            kappa,
            col_sums: column_sums(&m),
            m,
            z: DenseVector::zeros(n),
            x: DenseVector::zeros(n),
            x_sum: 0.0,
        })
    }

    fn score(&self, u: usize) -> f64 {
        let k = self.kappa[u];
        let gain = k * self.col_sums[u] * (1.0 - self.x[u]) / (1.0 + k * self.m[(u, u)]);
        (self.x_sum + gain) / self.n as f64
    }

    fn scores(&self, candidates: &[usize]) -> Result<Vec<f64>> {
        Ok(candidates.par_iter().map(|&u| self.score(u)).collect())
    }

    fn accept(&mut self, u: usize) -> Result<()> {
        let mut e = DenseVector::zeros(self.n);
        e[u] = 1.0;
        self.m = sherman_morrison_update(&self.m, &(&e * self.kappa[u]), &e)?;
        self.z[u] = self.kappa[u];
        self.x = &self.m * &self.z;
        self.x_sum = self.x.sum();
        self.col_sums = column_sums(&self.m);
        Ok(())
    }
}
