//! Undirected graphs with dense node ids, network generators, and BFS trees.
//!
//! Adjacency is stored in compressed sparse row form with every neighbor
//! list sorted ascending, so neighbor iteration order is deterministic and
//! edge lookups are a binary search.

mod generate;
mod io;
mod tree;

use std::collections::VecDeque;

pub use generate::{
    complete_graph, cycle_graph, generate_apollonian, generate_ba, generate_er, generate_random_tree, path_graph,
    star_graph,
};
pub use tree::{bfs_tree, Path, Tree};

use crate::error::{Error, Result};

/// Dense node index in `[0, node_count)`.
pub type NodeId = usize;

/// Index into [`Graph::edges`].
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    /// Each edge once, as `(min, max)`, in insertion order.
    edges: Vec<(NodeId, NodeId)>,
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    target_edges: Vec<EdgeId>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates, and out-of-range ids.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut normalized = Vec::new();
        for (u, v) in edges {
            for w in [u, v] {
                if w >= node_count {
                    return Err(Error::NodeOutOfRange { node: w, node_count });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            normalized.push((u.min(v), u.max(v)));
        }

        let mut seen = normalized.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].0, w[0].1));
        }

        Ok(Self::build(node_count, normalized))
    }

    /// Edgeless graph on `node_count` nodes.
    pub fn empty(node_count: usize) -> Self {
        Self::build(node_count, Vec::new())
    }

    fn build(node_count: usize, edges: Vec<(NodeId, NodeId)>) -> Self {
        let mut degree = vec![0usize; node_count];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }

        let mut slots: Vec<(NodeId, EdgeId)> = vec![(0, 0); offsets[node_count]];
        let mut fill = offsets.clone();
        for (id, &(u, v)) in edges.iter().enumerate() {
            slots[fill[u]] = (v, id);
            fill[u] += 1;
            slots[fill[v]] = (u, id);
            fill[v] += 1;
        }
        for u in 0..node_count {
            slots[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        let (targets, target_edges) = slots.into_iter().unzip();

        Self { node_count, edges, offsets, targets, target_edges }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Sorted neighbors of `u`. Panics if `u` is out of range.
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    /// `(neighbor, edge id)` pairs for `u`, sorted by neighbor.
    pub fn incident(&self, u: NodeId) -> impl Iterator<Item = (NodeId, EdgeId)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.targets[range.clone()].iter().copied().zip(self.target_edges[range].iter().copied())
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn edge_id(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        if u >= self.node_count || v >= self.node_count {
            return None;
        }
        let nbrs = self.neighbors(u);
        nbrs.binary_search(&v).ok().map(|i| self.target_edges[self.offsets[u] + i])
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edge_id(u, v).is_some()
    }

    pub fn check_node(&self, u: NodeId) -> Result<()> {
        if u < self.node_count {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node: u, node_count: self.node_count })
        }
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn hop_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Connected-component label per node, labels numbered by smallest member.
    pub fn component_labels(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.node_count];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.node_count {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.node_count > 0 && self.component_labels().iter().all(|&c| c == 0)
    }

    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.edges.len() + 1 == self.node_count
    }

    /// Subgraph induced by `nodes`, relabeled densely in the given order.
    /// Returns the subgraph and the new-to-old id map.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> (Graph, Vec<NodeId>) {
        let mut new_id = vec![usize::MAX; self.node_count];
        for (i, &u) in nodes.iter().enumerate() {
            new_id[u] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| new_id[u] != usize::MAX && new_id[v] != usize::MAX)
            .map(|&(u, v)| {
                let (a, b) = (new_id[u], new_id[v]);
                (a.min(b), a.max(b))
            })
            .collect();
        (Graph::build(nodes.len(), edges), nodes.to_vec())
    }

    /// The largest connected component (ties: the one holding the smallest id),
    /// relabeled in ascending order of original id.
    pub fn largest_component(&self) -> (Graph, Vec<NodeId>) {
        let labels = self.component_labels();
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; count];
        for &c in &labels {
            sizes[c] += 1;
        }
        let best = (0..count).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap_or(0);
        let nodes: Vec<NodeId> = (0..self.node_count).filter(|&u| labels[u] == best).collect();
        self.induced_subgraph(&nodes)
    }
}
