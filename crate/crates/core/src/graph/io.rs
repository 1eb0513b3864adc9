//! Plain-text graph format:
//!
//! ```text
//! # comment
//! NODE <id> <x> <y> <z> <w> <Rv>
//! EDGE <i> <j> [cost]
//! ```
//!
//! A missing edge cost defaults to the Euclidean distance between the node
//! positions; callers with a planner can refine it via
//! [`PatrollingGraph::update_edge_costs`].

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spatial::Point;

use super::{Edge, Node, NodeId, PatrollingGraph};

pub fn parse_graph(text: &str, source: &str) -> Result<PatrollingGraph> {
    let mut nodes = Vec::new();
    let mut raw_edges: Vec<(NodeId, NodeId, Option<f64>, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(source, lineno, format!("bad number `{s}`")))
        };
        let id = |s: &str| -> Result<NodeId> {
            s.parse::<u32>()
                .map(NodeId)
                .map_err(|_| Error::parse(source, lineno, format!("bad node id `{s}`")))
        };
        match fields[0] {
            "NODE" => {
                if !(5..=7).contains(&fields.len()) {
                    return Err(Error::parse(
                        source,
                        lineno,
                        "expected NODE <id> <x> <y> <z> [w] [Rv]",
                    ));
                }
                let mut node = Node::new(
                    id(fields[1])?.0,
                    Point::new(num(fields[2])?, num(fields[3])?, num(fields[4])?),
                );
                if let Some(w) = fields.get(5) {
                    node.priority = num(w)?;
                }
                if let Some(r) = fields.get(6) {
                    node.visit_radius = num(r)?;
                }
                nodes.push(node);
            }
            "EDGE" => {
                if !(3..=4).contains(&fields.len()) {
                    return Err(Error::parse(source, lineno, "expected EDGE <i> <j> [cost]"));
                }
                let cost = fields.get(3).map(|c| num(c)).transpose()?;
                raw_edges.push((id(fields[1])?, id(fields[2])?, cost, lineno));
            }
            other => {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("unknown record `{other}`"),
                ))
            }
        }
    }
    let position = |id: NodeId| nodes.iter().find(|n| n.id == id).map(|n| n.position);
    let mut edges = Vec::with_capacity(raw_edges.len());
    for (a, b, cost, lineno) in raw_edges {
        let pa = position(a).ok_or_else(|| Error::parse(source, lineno, format!("unknown node {a}")))?;
        let pb = position(b).ok_or_else(|| Error::parse(source, lineno, format!("unknown node {b}")))?;
        edges.push(Edge {
            a,
            b,
            travel_cost: cost.unwrap_or_else(|| (pa - pb).norm()),
        });
    }
    PatrollingGraph::new(nodes, edges)
}

pub fn write_graph(graph: &PatrollingGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# patrolling graph: {} nodes, {} edges", graph.len(), graph.edges().len());
    for n in graph.nodes() {
        let _ = writeln!(
            out,
            "NODE {} {} {} {} {} {}",
            n.id, n.position.x, n.position.y, n.position.z, n.priority, n.visit_radius
        );
    }
    for e in graph.edges() {
        let _ = writeln!(out, "EDGE {} {} {}", e.a, e.b, e.travel_cost);
    }
    out
}
