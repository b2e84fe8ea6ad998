//! Seeded random graph generators and seed sub-streams.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

pub type SeededRng = ChaCha8Rng;

const MAX_RESAMPLES: usize = 100;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for a named sub-stream (`"graph"`, `"s0"`, ...).
pub fn sub_seed(seed: u64, stream: &str) -> u64 {
    // FNV-1a over the name, then one splitmix64 round over the mix.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(seed ^ h)
}

/// Seed for the `index`-th member of a family of streams.
pub fn indexed_seed(seed: u64, index: u64) -> u64 {
    splitmix(seed.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Undirected Erdős–Rényi `G(n, p)` with unit weights. With
/// `require_connected`, resamples (same stream) up to 100 times.
pub fn generate_er(n: usize, p: f64, seed: u64, require_connected: bool) -> Result<WeightedDigraph> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!("edge probability {p} not in (0, 1]")));
    }
    if n == 0 {
        return Err(Error::validation("graph must have at least one node"));
    }
    let mut rng = rng(seed);
    for _ in 0..MAX_RESAMPLES {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < p {
                    edges.push((u, v, 1.0));
                }
            }
        }
        let g = WeightedDigraph::from_undirected_edges(n, edges)?;
        if !require_connected || g.is_strongly_connected() {
            return Ok(g);
        }
    }
    Err(Error::ConnectivityNotAchieved {
        attempts: MAX_RESAMPLES,
    })
}

/// Strongly connected weighted digraph: a random Hamiltonian cycle plus
/// independent arcs with probability `p`; weights uniform in `[0.5, 2)`.
pub fn random_digraph(n: usize, p: f64, seed: u64) -> Result<WeightedDigraph> {
    if n < 2 {
        return Err(Error::validation("random digraph needs at least two nodes"));
    }
    let mut rng = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((order[i], order[(i + 1) % n], rng.gen_range(0.5..2.0)));
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen::<f64>() < p {
                edges.push((u, v, rng.gen_range(0.5..2.0)));
            }
        }
    }
    WeightedDigraph::from_edges(n, edges)
}

/// Connected weighted undirected graph: random spanning tree plus extra
/// edges with probability `p`; weights uniform in `[0.5, 2)`.
pub fn random_undirected(n: usize, p: f64, seed: u64) -> Result<WeightedDigraph> {
    if n < 2 {
        return Err(Error::validation("random graph needs at least two nodes"));
    }
    let mut rng = rng(seed);
    let mut edges = Vec::new();
    let mut present = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        present.insert((u, v));
        edges.push((u, v, rng.gen_range(0.5..2.0)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if !present.contains(&(u, v)) && rng.gen::<f64>() < p {
                edges.push((u, v, rng.gen_range(0.5..2.0)));
            }
        }
    }
    WeightedDigraph::from_undirected_edges(n, edges)
}

/// `count` distinct nodes out of `pool`, sorted.
pub fn random_subset(pool: &[usize], count: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng(seed);
    let mut picked: Vec<usize> = pool.choose_multiple(&mut rng, count.min(pool.len())).copied().collect();
    picked.sort_unstable();
    picked
}
