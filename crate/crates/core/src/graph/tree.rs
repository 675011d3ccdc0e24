use std::collections::VecDeque;

use super::{Graph, NodeId};
use crate::error::{Error, Result};

/// A rooted tree over a dense id space.
///
/// The id space may be larger than the tree itself: a BFS tree of a
/// disconnected graph only spans the root's component, and nodes outside it
/// are reported by [`Tree::contains`] as absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    graph: Graph,
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    depth: Vec<Option<usize>>,
    members: usize,
    /// Preorder entry index; `u32::MAX` outside the tree.
    enter: Vec<u32>,
    /// One past the last preorder index of the subtree.
    exit: Vec<u32>,
    preorder: Vec<PreorderSlot>,
}

/// A tree node seen from its preorder position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PreorderSlot {
    pub node: u32,
    /// Preorder position of the parent; the root points at itself.
    pub parent: u32,
    /// One past the last position of the node's subtree.
    pub end: u32,
}

impl Tree {
    /// Validates `graph` as a tree (connected, `N - 1` edges) and roots it at 0.
    pub fn from_graph(graph: Graph) -> Result<Self> {
        if graph.node_count() == 0 {
            return Err(Error::NotATree("graph has no nodes".into()));
        }
        if graph.edge_count() + 1 != graph.node_count() {
            return Err(Error::NotATree(format!("{} nodes but {} edges", graph.node_count(), graph.edge_count())));
        }
        if !graph.is_connected() {
            return Err(Error::NotATree("graph is disconnected".into()));
        }
        Ok(Self::rooted(graph, 0))
    }

    /// Same tree, re-rooted at `root`.
    pub fn rerooted(&self, root: NodeId) -> Result<Self> {
        if !self.contains(root) {
            return Err(Error::NodeNotInTree(root));
        }
        Ok(Self::rooted(self.graph.clone(), root))
    }

    /// Roots the component of `root` in an acyclic `graph`.
    fn rooted(graph: Graph, root: NodeId) -> Self {
        let n = graph.node_count();
        let mut parent = vec![None; n];
        let mut depth = vec![None; n];
        let mut queue = VecDeque::from([root]);
        depth[root] = Some(0);
        let mut members = 0;
        while let Some(u) = queue.pop_front() {
            members += 1;
            let du = depth[u].unwrap();
            for &v in graph.neighbors(u) {
                if depth[v].is_none() {
                    depth[v] = Some(du + 1);
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        let mut enter = vec![u32::MAX; n];
        let mut exit = vec![u32::MAX; n];
        let mut preorder: Vec<PreorderSlot> = Vec::with_capacity(members);
        let mut clock = 0u32;
        let mut stack = vec![(root, false)];
        while let Some((u, done)) = stack.pop() {
            if done {
                exit[u] = clock;
                preorder[enter[u] as usize].end = clock;
                continue;
            }
            enter[u] = clock;
            preorder.push(PreorderSlot {
                node: u as u32,
                parent: parent[u].map_or(clock, |p| enter[p]),
                end: clock + 1,
            });
            clock += 1;
            stack.push((u, true));
            for &v in graph.neighbors(u) {
                if parent[v] == Some(u) {
                    stack.push((v, false));
                }
            }
        }
        Self { graph, root, parent, depth, members, enter, exit, preorder }
    }

    /// Tree edges only, over the full id space.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of nodes spanned by the tree.
    pub fn len(&self) -> usize {
        self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members == 0
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.depth.get(u).is_some_and(|d| d.is_some())
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.parent.get(u).copied().flatten()
    }

    pub fn parents(&self) -> &[Option<NodeId>] {
        &self.parent
    }

    pub fn depth(&self, u: NodeId) -> Option<usize> {
        self.depth.get(u).copied().flatten()
    }

    /// Whether `u` lies in the subtree hanging from `top` (rooted at
    /// [`Tree::root`]); every node is in its own subtree.
    pub fn in_subtree(&self, u: NodeId, top: NodeId) -> bool {
        self.contains(u) && self.contains(top) && self.enter[top] <= self.enter[u] && self.enter[u] < self.exit[top]
    }

    /// Preorder entry index and subtree end, for batch subtree tests.
    pub(crate) fn preorder_span(&self, u: NodeId) -> (u32, u32) {
        (self.enter[u], self.exit[u])
    }

    /// Tree nodes in preorder.
    pub(crate) fn preorder(&self) -> &[PreorderSlot] {
        &self.preorder
    }

    fn checked_depth(&self, u: NodeId) -> Result<usize> {
        self.depth(u).ok_or(Error::NodeNotInTree(u))
    }

    pub fn lca(&self, u: NodeId, v: NodeId) -> Result<NodeId> {
        let (mut a, mut b) = (u, v);
        let (mut da, mut db) = (self.checked_depth(a)?, self.checked_depth(b)?);
        while da > db {
            a = self.parent[a].unwrap();
            da -= 1;
        }
        while db > da {
            b = self.parent[b].unwrap();
            db -= 1;
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        Ok(a)
    }

    /// Number of edges on the unique `u`–`v` path.
    pub fn path_len(&self, u: NodeId, v: NodeId) -> Result<usize> {
        let w = self.lca(u, v)?;
        Ok(self.depth[u].unwrap() + self.depth[v].unwrap() - 2 * self.depth[w].unwrap())
    }

    pub fn path(&self, u: NodeId, v: NodeId) -> Result<Path> {
        let w = self.lca(u, v)?;
        let mut nodes = Vec::new();
        let mut a = u;
        while a != w {
            nodes.push(a);
            a = self.parent[a].unwrap();
        }
        nodes.push(w);
        let mut tail = Vec::new();
        let mut b = v;
        while b != w {
            tail.push(b);
            b = self.parent[b].unwrap();
        }
        nodes.extend(tail.into_iter().rev());
        Ok(Path { nodes })
    }

    /// Edges shared by the paths `anchor`→`x` and `anchor`→`y`.
    ///
    /// In a tree both paths leave `anchor` together and split once, so the
    /// overlap is `(|P(a,x)| + |P(a,y)| - |P(x,y)|) / 2`.
    pub fn path_overlap(&self, anchor: NodeId, x: NodeId, y: NodeId) -> Result<usize> {
        let ax = self.path_len(anchor, x)?;
        let ay = self.path_len(anchor, y)?;
        let xy = self.path_len(x, y)?;
        Ok((ax + ay - xy) / 2)
    }
}

/// Simple path given by its node sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    nodes: Vec<NodeId>,
}

impl Path {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Edge count.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Consecutive node pairs, in walk order.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Shortest-hop spanning tree of `root`'s component.
///
/// When a node has several neighbors one level closer to the root, the one
/// with the smallest index becomes its parent.
pub fn bfs_tree(g: &Graph, root: NodeId) -> Result<Tree> {
    g.check_node(root)?;
    let dist = g.hop_distances(root);
    let mut edges = Vec::new();
    for v in 0..g.node_count() {
        let Some(dv) = dist[v] else { continue };
        if dv == 0 {
            continue;
        }
        let parent =
            g.neighbors(v).iter().copied().find(|&w| dist[w] == Some(dv - 1)).expect("BFS layer has a predecessor");
        edges.push((parent.min(v), parent.max(v)));
    }
    Ok(Tree::rooted(Graph::build(g.node_count(), edges), root))
}
