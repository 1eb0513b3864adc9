//! The patrolling graph: regions of interest joined by traversable edges.

mod build;
mod idleness;
mod io;

use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::Point;

pub use build::{
    build_from_trajectories, build_from_waypoints, check_edge, EdgeCheck, Pose,
    TrajectoryGraphParams, WaypointGraphParams,
};
pub use idleness::{
    graph_average_idleness, instantaneous_idleness, window_idleness_stats, IdlenessSample,
    NodeIdlenessRecord, WindowStats,
};
pub use io::{parse_graph, write_graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Point,
    pub priority: f64,
    pub visit_radius: f64,
}

impl Node {
    pub fn new(id: u32, position: Point) -> Self {
        Node {
            id: NodeId(id),
            position,
            priority: 1.0,
            visit_radius: 0.5,
        }
    }

    /// True when `p` lies inside the node's region of interest.
    pub fn contains(&self, p: &Point) -> bool {
        (p - self.position).norm() <= self.visit_radius
    }
}

/// Undirected edge. Stored once; lookups are symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub travel_cost: f64,
}

#[derive(Debug, Clone)]
pub struct PatrollingGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl PatrollingGraph {
    /// Build and validate a connected graph.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        let g = Self::new_allow_disconnected(nodes, edges)?;
        if g.nodes.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let components = g.components();
        if components.len() > 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(g)
    }

    pub(crate) fn new_allow_disconnected(mut nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate node id {}", n.id)));
            }
            if !(n.priority > 0.0) || !n.priority.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "node {} priority must be > 0",
                    n.id
                )));
            }
            if !(n.visit_radius > 0.0) || !n.visit_radius.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "node {} visit radius must be > 0",
                    n.id
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut seen = BTreeSet::new();
        let mut kept = Vec::with_capacity(edges.len());
        for e in edges {
            if e.a == e.b {
                return Err(Error::InvalidGraph(format!("self loop on node {}", e.a)));
            }
            if !(e.travel_cost > 0.0) || !e.travel_cost.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge {}-{} cost must be > 0",
                    e.a, e.b
                )));
            }
            let ia = *index.get(&e.a).ok_or(Error::UnknownNode(e.a))?;
            let ib = *index.get(&e.b).ok_or(Error::UnknownNode(e.b))?;
            let key = (e.a.min(e.b), e.a.max(e.b));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {}-{}",
                    key.0, key.1
                )));
            }
            adjacency[ia].push((ib, e.travel_cost));
            adjacency[ib].push((ia, e.travel_cost));
            kept.push(e);
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(j, _)| j);
        }
        Ok(PatrollingGraph {
            nodes,
            edges: kept,
            index,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes sorted by id. Positions in this slice are the node indices used
    /// by idleness vectors.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node_by_id(&self, id: NodeId) -> Result<&Node> {
        self.index_of(id)
            .map(|i| &self.nodes[i])
            .ok_or(Error::UnknownNode(id))
    }

    /// Neighbour indices with edge costs, sorted by index.
    pub fn neighbors(&self, index: usize) -> &[(usize, f64)] {
        &self.adjacency[index]
    }

    pub fn edge_cost(&self, a: NodeId, b: NodeId) -> Option<f64> {
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        self.adjacency[ia]
            .iter()
            .find(|&&(j, _)| j == ib)
            .map(|&(_, c)| c)
    }

    /// Replace edge costs, e.g. with planned path lengths. `cost` returning
    /// `None` keeps the current value.
    pub fn update_edge_costs(&mut self, mut cost: impl FnMut(&Node, &Node) -> Option<f64>) {
        for e in &mut self.edges {
            let ia = self.index[&e.a];
            let ib = self.index[&e.b];
            if let Some(c) = cost(&self.nodes[ia], &self.nodes[ib]) {
                if c > 0.0 && c.is_finite() {
                    e.travel_cost = c;
                }
            }
        }
        for adj in &mut self.adjacency {
            adj.clear();
        }
        for e in &self.edges {
            let ia = self.index[&e.a];
            let ib = self.index[&e.b];
            self.adjacency[ia].push((ib, e.travel_cost));
            self.adjacency[ib].push((ia, e.travel_cost));
        }
        for adj in &mut self.adjacency {
            adj.sort_by_key(|&(j, _)| j);
        }
    }

    /// Connected components as sorted id lists, ordered by smallest id.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut comp = vec![usize::MAX; self.nodes.len()];
        let mut out = Vec::new();
        for start in 0..self.nodes.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            let c = out.len();
            let mut members = Vec::new();
            let mut queue = VecDeque::from([start]);
            comp[start] = c;
            while let Some(i) = queue.pop_front() {
                members.push(self.nodes[i].id);
                for &(j, _) in &self.adjacency[i] {
                    if comp[j] == usize::MAX {
                        comp[j] = c;
                        queue.push_back(j);
                    }
                }
            }
            members.sort();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        !self.nodes.is_empty() && self.components().len() == 1
    }

    /// All nodes reachable within `depth` edges of `id`, excluding `id`.
    pub fn neighbors_at_depth(&self, id: NodeId, depth: usize) -> Result<BTreeSet<NodeId>> {
        let start = self.index_of(id).ok_or(Error::UnknownNode(id))?;
        Ok(self
            .indices_within_depth(start, depth)
            .into_iter()
            .map(|i| self.nodes[i].id)
            .collect())
    }

    pub(crate) fn indices_within_depth(&self, start: usize, depth: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.nodes.len()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut out = Vec::new();
        while let Some(i) = queue.pop_front() {
            if dist[i] >= depth {
                continue;
            }
            for &(j, _) in &self.adjacency[i] {
                if dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    out.push(j);
                    queue.push_back(j);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Single-source shortest travel costs over edge costs (Dijkstra).
    pub fn travel_costs_from(&self, start: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        dist[start] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((OrdF64(0.0), start)));
        while let Some(Reverse((OrdF64(d), i))) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for &(j, c) in &self.adjacency[i] {
                let nd = d + c;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Reverse((OrdF64(nd), j)));
                }
            }
        }
        dist
    }

    /// Index of the node closest to `p`; ties resolve to the lowest index.
    pub fn nearest_node(&self, p: &Point) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.position - p).norm_squared();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn path_graph(n: u32, spacing: f64) -> PatrollingGraph {
        let nodes = (0..n)
            .map(|i| Node::new(i, Point::new(i as f64 * spacing, 0.0, 0.0)))
            .collect();
        let edges = (1..n)
            .map(|i| Edge {
                a: NodeId(i - 1),
                b: NodeId(i),
                travel_cost: spacing,
            })
            .collect();
        PatrollingGraph::new(nodes, edges).unwrap()
    }

    pub(crate) fn star_graph(leaves: u32) -> PatrollingGraph {
        let mut nodes = vec![Node::new(0, Point::origin())];
        let mut edges = Vec::new();
        for i in 1..=leaves {
            let a = i as f64;
            nodes.push(Node::new(i, Point::new(a.cos() * 3.0, a.sin() * 3.0, 0.0)));
            edges.push(Edge {
                a: NodeId(0),
                b: NodeId(i),
                travel_cost: 3.0,
            });
        }
        PatrollingGraph::new(nodes, edges).unwrap()
    }

    fn ids(v: &[u32]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn depth_queries() {
        let star = star_graph(4);
        assert_eq!(star.neighbors_at_depth(NodeId(0), 1).unwrap(), ids(&[1, 2, 3, 4]));

        let path = path_graph(5, 2.0);
        assert_eq!(path.neighbors_at_depth(NodeId(0), 2).unwrap(), ids(&[1, 2]));
        assert_eq!(path.neighbors_at_depth(NodeId(0), 10).unwrap(), ids(&[1, 2, 3, 4]));
        assert!(matches!(
            path.neighbors_at_depth(NodeId(42), 1),
            Err(Error::UnknownNode(NodeId(42)))
        ));
    }

    #[test]
    fn rejects_bad_graphs() {
        let n = |i| Node::new(i, Point::new(i as f64, 0.0, 0.0));
        let e = |a, b| Edge {
            a: NodeId(a),
            b: NodeId(b),
            travel_cost: 1.0,
        };
        assert!(matches!(
            PatrollingGraph::new(vec![n(0), n(1), n(2)], vec![e(0, 1)]),
            Err(Error::Disconnected { components }) if components.len() == 2
        ));
        assert!(PatrollingGraph::new(vec![n(0), n(0)], vec![]).is_err());
        assert!(PatrollingGraph::new(vec![n(0), n(1)], vec![e(0, 0)]).is_err());
        assert!(PatrollingGraph::new(vec![n(0), n(1)], vec![e(0, 7)]).is_err());
        assert!(PatrollingGraph::new(vec![n(0), n(1)], vec![e(0, 1), e(1, 0)]).is_err());
        let mut bad = n(1);
        bad.priority = 0.0;
        assert!(PatrollingGraph::new(vec![n(0), bad], vec![e(0, 1)]).is_err());
        assert!(matches!(PatrollingGraph::new(vec![], vec![]), Err(Error::EmptyGraph)));
    }

    #[test]
    fn symmetric_edges_and_dijkstra() {
        let g = path_graph(4, 1.5);
        assert_eq!(g.edge_cost(NodeId(1), NodeId(2)), Some(1.5));
        assert_eq!(g.edge_cost(NodeId(2), NodeId(1)), Some(1.5));
        assert_eq!(g.edge_cost(NodeId(0), NodeId(2)), None);
        assert_eq!(g.travel_costs_from(0), vec![0.0, 1.5, 3.0, 4.5]);
    }
}
