//! Observer placement strategies.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::seeded;

/// Sorted set of distinct observer nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObserverSet(Vec<NodeId>);

impl ObserverSet {
    /// Validates ids against `g`; sorts and rejects duplicates.
    pub fn new(g: &Graph, mut nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::param("observers", "need at least one observer"));
        }
        for &u in &nodes {
            g.check_node(u)?;
        }
        nodes.sort_unstable();
        if let Some(w) = nodes.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::param("observers", format!("node {} listed twice", w[0])));
        }
        Ok(Self(nodes))
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.0.binary_search(&u).is_ok()
    }

    /// Membership mask over `0..node_count`.
    pub fn mask(&self, node_count: usize) -> Vec<bool> {
        let mut mask = vec![false; node_count];
        for &u in &self.0 {
            mask[u] = true;
        }
        mask
    }
}

fn check_k(g: &Graph, k: usize) -> Result<()> {
    if k == 0 || k > g.node_count() {
        return Err(Error::param("k", format!("need 1 <= k <= {}, got {k}", g.node_count())));
    }
    Ok(())
}

/// The `k` highest-degree nodes; equal degrees go to the smaller index.
pub fn place_high_degree(g: &Graph, k: usize) -> Result<ObserverSet> {
    check_k(g, k)?;
    let mut order: Vec<NodeId> = (0..g.node_count()).collect();
    order.sort_by_key(|&u| (std::cmp::Reverse(g.degree(u)), u));
    order.truncate(k);
    order.sort_unstable();
    Ok(ObserverSet(order))
}

/// `k` nodes drawn uniformly without replacement.
pub fn place_random(g: &Graph, k: usize, seed: u64) -> Result<ObserverSet> {
    check_k(g, k)?;
    let mut rng = seeded(seed);
    let mut nodes = index::sample(&mut rng, g.node_count(), k).into_vec();
    nodes.sort_unstable();
    Ok(ObserverSet(nodes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    HighDegree,
    Random,
}

impl Placement {
    pub fn place(self, g: &Graph, k: usize, seed: u64) -> Result<ObserverSet> {
        match self {
            Placement::HighDegree => place_high_degree(g, k),
            Placement::Random => place_random(g, k, seed),
        }
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree" | "high-degree" | "high_degree" => Ok(Placement::HighDegree),
            "random" => Ok(Placement::Random),
            other => Err(Error::param("placement", format!("unknown strategy `{other}` (expected degree|random)"))),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::HighDegree => "degree",
            Placement::Random => "random",
        })
    }
}
