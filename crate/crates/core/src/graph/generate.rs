use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Erdős–Rényi G(n, p): every pair kept independently with probability `p`.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} is not a probability")));
    }
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Ok(Graph::build(n, edges))
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a clique on `m + 1` nodes; each later node attaches to `m`
/// distinct existing nodes chosen with probability proportional to degree.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || m >= n {
        return Err(Error::param("m", format!("need 1 <= m < n, got m={m}, n={n}")));
    }
    let mut rng = seeded(seed);
    let mut edges = Vec::with_capacity(m * (m + 1) / 2 + (n - m - 1) * m);
    // Every edge endpoint once: uniform draws from here are degree-weighted.
    let mut endpoints: Vec<NodeId> = Vec::with_capacity(2 * edges.capacity());
    for u in 0..=m {
        for v in u + 1..=m {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }

    let mut chosen: Vec<NodeId> = Vec::with_capacity(m);
    for new in m + 1..n {
        chosen.clear();
        while chosen.len() < m {
            let target = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&target) {
                chosen.push(target);
            }
        }
        chosen.sort_unstable();
        for &t in &chosen {
            edges.push((t, new));
            endpoints.extend([t, new]);
        }
    }
    Ok(Graph::build(n, edges))
}

/// Deterministic Apollonian network after `generations` rounds of face
/// subdivision, starting from a triangle on nodes 0, 1, 2.
///
/// Nodes are numbered in insertion order, so any prefix `0..k` induces a
/// connected subgraph.
pub fn generate_apollonian(generations: u32) -> Graph {
    let mut edges = vec![(0, 1), (0, 2), (1, 2)];
    let mut faces: Vec<[NodeId; 3]> = vec![[0, 1, 2]];
    let mut next = 3;
    for _ in 0..generations {
        let mut subdivided = Vec::with_capacity(faces.len() * 3);
        for [a, b, c] in faces {
            let x = next;
            next += 1;
            edges.extend([(a, x), (b, x), (c, x)]);
            subdivided.extend([[a, b, x], [a, c, x], [b, c, x]]);
        }
        faces = subdivided;
    }
    Graph::build(next, edges)
}

/// Uniform random labeled tree on `n` nodes (Prüfer sequence decoding).
pub fn generate_random_tree(n: usize, seed: u64) -> Result<Graph> {
    match n {
        0 => Err(Error::param("n", "must be at least 1")),
        1 => Ok(Graph::empty(1)),
        2 => Ok(Graph::build(2, vec![(0, 1)])),
        _ => {
            let mut rng = seeded(seed);
            let code: Vec<NodeId> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
            let mut degree = vec![1usize; n];
            for &c in &code {
                degree[c] += 1;
            }
            let mut leaves: BinaryHeap<Reverse<NodeId>> = (0..n).filter(|&u| degree[u] == 1).map(Reverse).collect();
            let mut edges = Vec::with_capacity(n - 1);
            for &c in &code {
                let Reverse(leaf) = leaves.pop().expect("prufer invariant");
                edges.push((leaf.min(c), leaf.max(c)));
                degree[c] -= 1;
                if degree[c] == 1 {
                    leaves.push(Reverse(c));
                }
            }
            let Reverse(a) = leaves.pop().expect("prufer invariant");
            let Reverse(b) = leaves.pop().expect("prufer invariant");
            edges.push((a, b));
            Ok(Graph::build(n, edges))
        }
    }
}

/// Path 0-1-...-(n-1).
pub fn path_graph(n: usize) -> Graph {
    Graph::build(n, (1..n).map(|v| (v - 1, v)).collect())
}

/// Star with center 0 and leaves `1..=leaves`.
pub fn star_graph(leaves: usize) -> Graph {
    Graph::build(leaves + 1, (1..=leaves).map(|v| (0, v)).collect())
}

/// Cycle 0-1-...-(n-1)-0, `n >= 3`.
pub fn cycle_graph(n: usize) -> Graph {
    let mut edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
    edges.push((0, n - 1));
    Graph::build(n, edges)
}

pub fn complete_graph(n: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    Graph::build(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_well_formed(g: &Graph) {
        for u in 0..g.node_count() {
            let nbrs = g.neighbors(u);
            assert!(nbrs.windows(2).all(|w| w[0] < w[1]), "sorted, no duplicates");
            for &v in nbrs {
                assert_ne!(u, v);
                assert!(g.neighbors(v).contains(&u), "symmetric");
            }
        }
    }

    #[test]
    fn er_extremes() {
        let g = generate_er(5, 0.0, 1).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (5, 0));
        let g = generate_er(4, 1.0, 1).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert!(generate_er(4, 1.5, 1).is_err());
        assert!(generate_er(0, 0.5, 1).is_err());
    }

    #[test]
    fn er_mean_edge_count() {
        // Binomial(4950, 0.02): mean 99, sd sqrt(4950 * 0.02 * 0.98).
        let seeds = 1000;
        let total: usize = (0..seeds).map(|s| generate_er(100, 0.02, s).unwrap().edge_count()).sum();
        let mean = total as f64 / seeds as f64;
        let se = (4950.0 * 0.02 * 0.98f64).sqrt() / (seeds as f64).sqrt();
        assert!((mean - 99.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn ba_counts() {
        let g = generate_ba(3, 2, 9).unwrap();
        assert_eq!(g, complete_graph(3));
        let g = generate_ba(50, 2, 7).unwrap();
        assert_eq!(g.edge_count(), 97);
        assert_well_formed(&g);
        assert!(g.is_connected());
        assert!(generate_ba(5, 0, 1).is_err());
        assert!(generate_ba(5, 5, 1).is_err());
    }

    #[test]
    fn ba_heavy_tail() {
        let mut heavy = 0;
        for seed in 0..100 {
            let g = generate_ba(1000, 2, seed).unwrap();
            let mut deg: Vec<usize> = (0..1000).map(|u| g.degree(u)).collect();
            deg.sort_unstable();
            let median = deg[500];
            if *deg.last().unwrap() >= 5 * median {
                heavy += 1;
            }
        }
        assert!(heavy >= 90, "{heavy}/100 seeds heavy-tailed");
    }

    #[test]
    fn apollonian_counts() {
        assert_eq!(generate_apollonian(0).edge_count(), 3);
        let g1 = generate_apollonian(1);
        assert_eq!((g1.node_count(), g1.edge_count()), (4, 6));
        let g2 = generate_apollonian(2);
        assert_eq!((g2.node_count(), g2.edge_count()), (7, 15));
        for g in 0..=6u32 {
            let graph = generate_apollonian(g);
            assert_eq!(graph.node_count(), (3usize.pow(g) + 5) / 2);
            assert_eq!(graph.edge_count(), (3usize.pow(g + 1) + 3) / 2);
            assert_well_formed(&graph);
        }
    }

    #[test]
    fn apollonian_prefix_is_connected() {
        let g = generate_apollonian(5);
        let prefix: Vec<NodeId> = (0..100).collect();
        let (sub, _) = g.induced_subgraph(&prefix);
        assert!(sub.is_connected());
    }

    #[test]
    fn random_tree_is_tree() {
        for n in 1..40 {
            let g = generate_random_tree(n, n as u64).unwrap();
            assert!(g.is_tree(), "n={n}");
            assert_well_formed(&g);
        }
    }

    #[test]
    fn generators_are_seed_deterministic() {
        assert_eq!(generate_er(60, 0.1, 3).unwrap(), generate_er(60, 0.1, 3).unwrap());
        assert_eq!(generate_ba(60, 3, 3).unwrap(), generate_ba(60, 3, 3).unwrap());
        assert_eq!(generate_random_tree(60, 3).unwrap(), generate_random_tree(60, 3).unwrap());
        assert_ne!(generate_er(60, 0.1, 3).unwrap(), generate_er(60, 0.1, 4).unwrap());
    }
}
