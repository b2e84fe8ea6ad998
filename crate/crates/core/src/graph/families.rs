//! Small named graphs, all unit weight.

use super::WeightedDigraph;

fn build(n: usize, undirected: &[(usize, usize)]) -> WeightedDigraph {
    WeightedDigraph::from_undirected_edges(n, undirected.iter().map(|&(u, v)| (u, v, 1.0)))
        .expect("named graph is valid")
}

/// Undirected path `0 - 1 - ... - (n-1)`.
pub fn path(n: usize) -> WeightedDigraph {
    let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
    build(n, &edges)
}

/// Undirected cycle on `n >= 3` nodes.
pub fn cycle(n: usize) -> WeightedDigraph {
    let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    build(n, &edges)
}

/// Directed cycle `0 -> 1 -> ... -> 0`; for `n = 2` this is the 2-cycle.
pub fn directed_cycle(n: usize) -> WeightedDigraph {
    WeightedDigraph::from_edges(n, (0..n).map(|v| (v, (v + 1) % n, 1.0)))
        .expect("directed cycle is valid")
}

pub fn complete(n: usize) -> WeightedDigraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    build(n, &edges)
}

/// Star with center 0 and `leaves` leaves.
pub fn star(leaves: usize) -> WeightedDigraph {
    let edges: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
    build(leaves + 1, &edges)
}

/// The Petersen graph: outer 5-cycle `0..5`, inner pentagram `5..10`.
pub fn petersen() -> WeightedDigraph {
    let mut edges = Vec::new();
    for i in 0..5 {
        edges.push((i, (i + 1) % 5));
        edges.push((i, i + 5));
        edges.push((5 + i, 5 + (i + 2) % 5));
    }
    build(10, &edges)
}

/// Looks up a cubic graph by name (`petersen`, `k4`).
pub fn named_cubic(name: &str) -> Option<WeightedDigraph> {
    match name {
        "petersen" => Some(petersen()),
        "k4" => Some(complete(4)),
        _ => None,
    }
}
