//! Edge-list text format.
//!
//! One `u v` pair per line, 0-based ids, whitespace separated, each
//! undirected edge listed once. `#` starts a comment. A `# nodes: N` comment
//! fixes the node count so trailing isolated nodes survive a round trip;
//! without it the count is one past the largest id.

use std::fmt::Write as _;

use super::{Graph, NodeId};
use crate::error::{Error, Result};

const NODES_DIRECTIVE: &str = "nodes:";

impl Graph {
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut declared: Option<(usize, usize)> = None;
        let mut edges: Vec<(NodeId, NodeId, usize)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let (content, comment) = match raw.find('#') {
                Some(pos) => (&raw[..pos], Some(&raw[pos + 1..])),
                None => (raw, None),
            };
            if let Some(rest) = comment.and_then(|c| c.trim().strip_prefix(NODES_DIRECTIVE)) {
                let n = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse { line, message: format!("bad node count `{}`", rest.trim()) })?;
                declared = Some((n, line));
            }

            let mut fields = content.split_whitespace();
            let Some(first) = fields.next() else { continue };
            let second = fields.next().ok_or_else(|| Error::Parse { line, message: "expected two node ids".into() })?;
            if fields.next().is_some() {
                return Err(Error::Parse { line, message: "expected exactly two node ids".into() });
            }
            let parse_id = |s: &str| {
                s.parse::<NodeId>().map_err(|_| Error::Parse { line, message: format!("`{s}` is not a node id") })
            };
            edges.push((parse_id(first)?, parse_id(second)?, line));
        }

        let inferred = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
        let node_count = match declared {
            Some((n, line)) if n < inferred => {
                return Err(Error::Parse {
                    line,
                    message: format!("declared {n} nodes but ids reach {}", inferred - 1),
                })
            }
            Some((n, _)) => n,
            None => inferred,
        };

        let mut seen = std::collections::HashMap::new();
        for &(u, v, line) in &edges {
            if u == v {
                return Err(Error::Parse { line, message: format!("self-loop on node {u}") });
            }
            if let Some(first) = seen.insert((u.min(v), u.max(v)), line) {
                return Err(Error::Parse { line, message: format!("duplicate edge {u}-{v} (first on line {first})") });
            }
        }

        Graph::from_edges(node_count, edges.into_iter().map(|(u, v, _)| (u, v)))
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# {NODES_DIRECTIVE} {}\n", self.node_count());
        for &(u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }
}
