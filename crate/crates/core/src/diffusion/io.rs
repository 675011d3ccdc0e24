//! CSV forms of observations (`observer,from_node,time`) and trace dumps
//! (`node,arrival_time,parent`). Lines starting with `#` are metadata and
//! are skipped on read.

use std::fmt::Write as _;

use super::{DiffusionTrace, Observation, ObservationRecord};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::placement::ObserverSet;

pub const OBSERVATION_HEADER: &str = "observer,from_node,time";
pub const TRACE_HEADER: &str = "node,arrival_time,parent";

/// Rounds to 9 significant digits and prints the shortest decimal that
/// reads back as that rounded value (`4.0`, `0.333333333`).
pub fn format_time(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x:?}");
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded:?}")
}

impl Observation {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(OBSERVATION_HEADER);
        out.push('\n');
        for r in self.records() {
            writeln!(out, "{},{},{}", r.observer, r.from_node, format_time(r.time)).unwrap();
        }
        out
    }

    /// Parses an observation CSV and checks every record against `g`:
    /// ids in range and `from_node` adjacent to `observer`.
    pub fn parse_csv(text: &str, g: &Graph, deployed: Option<&ObserverSet>) -> Result<Observation> {
        let mut records = Vec::new();
        let mut header_seen = false;
        let mut first_line = std::collections::HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            if !header_seen {
                if content.replace(' ', "") != OBSERVATION_HEADER {
                    return Err(Error::Parse { line, message: format!("expected header `{OBSERVATION_HEADER}`") });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = content.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse { line, message: format!("expected 3 fields, found {}", fields.len()) });
            }
            let id = |s: &str| -> Result<NodeId> {
                let u = s
                    .parse::<NodeId>()
                    .map_err(|_| Error::Parse { line, message: format!("`{s}` is not a node id") })?;
                g.check_node(u).map_err(|e| Error::Parse { line, message: e.to_string() })?;
                Ok(u)
            };
            let observer = id(fields[0])?;
            let from_node = id(fields[1])?;
            let time = fields[2]
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("`{}` is not a finite time", fields[2]) })?;
            if !g.has_edge(observer, from_node) {
                return Err(Error::Parse {
                    line,
                    message: format!("{from_node} is not a neighbor of observer {observer}"),
                });
            }
            if let Some(prev) = first_line.insert(observer, line) {
                return Err(Error::Parse {
                    line,
                    message: format!("observer {observer} already reported on line {prev}"),
                });
            }
            records.push(ObservationRecord { observer, from_node, time });
        }
        if !header_seen {
            return Err(Error::Parse { line: 1, message: format!("missing header `{OBSERVATION_HEADER}`") });
        }
        Observation::new(records, deployed)
    }
}

impl DiffusionTrace {
    /// Unreached nodes get an empty time; the source an empty parent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for (u, (t, p)) in self.arrival_time.iter().zip(&self.arrival_parent).enumerate() {
            let t = t.map(format_time).unwrap_or_default();
            let p = p.map(|p| p.to_string()).unwrap_or_default();
            writeln!(out, "{u},{t},{p}").unwrap();
        }
        out
    }
}
