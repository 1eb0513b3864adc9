//! Per-robot distributed state: idleness estimates and the team model.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{NodeId, PatrollingGraph};
use crate::network::{Message, Payload, RobotId};
use crate::planner::Path;

/// A robot's estimate of every node's idleness, stored as last-visit times.
#[derive(Debug, Clone, PartialEq)]
pub struct IdlenessVector {
    pub owner: RobotId,
    last_visit: Vec<f64>,
    priority: Vec<f64>,
}

impl IdlenessVector {
    /// Every node starts with zero idleness at `t0`.
    pub fn new(owner: RobotId, graph: &PatrollingGraph, t0: f64) -> Self {
        IdlenessVector {
            owner,
            last_visit: vec![t0; graph.len()],
            priority: graph.nodes().iter().map(|n| n.priority).collect(),
        }
    }

    /// Build from explicit last-visit times with unit priorities.
    pub fn from_last_visits(owner: RobotId, last_visit: Vec<f64>) -> Self {
        let priority = vec![1.0; last_visit.len()];
        IdlenessVector {
            owner,
            last_visit,
            priority,
        }
    }

    pub fn len(&self) -> usize {
        self.last_visit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_visit.is_empty()
    }

    pub fn last_visits(&self) -> &[f64] {
        &self.last_visit
    }

    /// Estimated idleness of node index `k` at `t`, clamped at zero.
    pub fn idleness(&self, k: usize, t: f64) -> f64 {
        (self.priority[k] * (t - self.last_visit[k])).max(0.0)
    }

    pub fn visit(&mut self, k: usize, t: f64) {
        if t > self.last_visit[k] {
            self.last_visit[k] = t;
        }
    }

    /// Merge received last-visit times (elementwise max).
    pub fn merge(&mut self, received: &[f64]) -> Result<()> {
        if received.len() != self.last_visit.len() {
            return Err(Error::LengthMismatch {
                expected: self.last_visit.len(),
                actual: received.len(),
            });
        }
        for (mine, theirs) in self.last_visit.iter_mut().zip(received) {
            if *theirs > *mine {
                *mine = *theirs;
            }
        }
        Ok(())
    }
}

/// Elementwise minimum of idleness, keeping the local owner.
pub fn synchronize_idleness(local: &IdlenessVector, received: &IdlenessVector) -> Result<IdlenessVector> {
    let mut out = local.clone();
    out.merge(&received.last_visit)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeamModelEntry {
    pub robot: RobotId,
    pub goal: Option<NodeId>,
    pub path: Option<Arc<Path>>,
    /// Travel cost; infinite for a goal that is planned but not yet costed.
    pub cost: Option<f64>,
    /// Start of the sender's current path stream (see [`Payload::Path`]).
    pub path_since: Option<f64>,
    pub timestamp: f64,
}

impl TeamModelEntry {
    fn empty(robot: RobotId) -> Self {
        TeamModelEntry {
            robot,
            goal: None,
            path: None,
            cost: None,
            path_since: None,
            timestamp: f64::NEG_INFINITY,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.goal.is_none() && self.path.is_none()
    }

    fn reset(&mut self) {
        self.goal = None;
        self.path = None;
        self.cost = None;
        self.path_since = None;
    }
}

/// What a teammate is believed to be doing, one entry per robot.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamModel {
    pub owner: RobotId,
    entries: Vec<TeamModelEntry>,
}

impl TeamModel {
    pub fn new(owner: RobotId, robots: usize) -> Self {
        TeamModel {
            owner,
            entries: (0..robots as RobotId).map(TeamModelEntry::empty).collect(),
        }
    }

    pub fn entries(&self) -> &[TeamModelEntry] {
        &self.entries
    }

    pub fn entry(&self, robot: RobotId) -> Option<&TeamModelEntry> {
        self.entries.get(robot as usize)
    }

    /// Teammate entries (the owner's own slot is skipped).
    pub fn teammates(&self) -> impl Iterator<Item = &TeamModelEntry> {
        let owner = self.owner;
        self.entries.iter().filter(move |e| e.robot != owner)
    }

    fn entry_mut(&mut self, robot: RobotId) -> Option<&mut TeamModelEntry> {
        self.entries.get_mut(robot as usize)
    }
}

/// Side effects of [`apply_message`] the caller may need to act on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Applied {
    /// A teammate path changed, so the traversable map is stale.
    pub map_dirty: bool,
    pub ignored: bool,
}

/// Apply one received message.
pub fn apply_message(
    model: &mut TeamModel,
    idleness: &mut IdlenessVector,
    graph: &PatrollingGraph,
    msg: &Message,
    t: f64,
) -> Result<Applied> {
    if msg.sender == model.owner {
        return Err(Error::Invariant(format!("robot {} received its own message", msg.sender)));
    }
    let owner = model.owner;
    let node_index = |n: NodeId| {
        let k = graph.index_of(n);
        if k.is_none() {
            log::warn!("robot {owner}: dropping {} about unknown node {n}", msg.kind().as_str());
        }
        k
    };
    let ignored = Applied {
        ignored: true,
        ..Applied::default()
    };
    // Idleness payloads are not team-model state and skip the stale guard.
    if let Payload::Idleness(v) = &msg.payload {
        idleness.merge(v)?;
        return Ok(Applied::default());
    }
    let stale = match model.entry(msg.sender) {
        None => {
            log::warn!("robot {}: message from unknown robot {}", model.owner, msg.sender);
            return Ok(ignored);
        }
        Some(e) => msg.timestamp < e.timestamp,
    };
    if stale {
        return Ok(ignored);
    }
    let mut out = Applied::default();
    let entry = model.entry_mut(msg.sender).expect("checked above");
    match &msg.payload {
        Payload::Reached(n) => {
            let Some(k) = node_index(*n) else { return Ok(ignored) };
            idleness.visit(k, t);
            out.map_dirty = entry.path.is_some();
            entry.reset();
        }
        Payload::Visited(n) => {
            let Some(k) = node_index(*n) else { return Ok(ignored) };
            idleness.visit(k, t);
            return Ok(out);
        }
        Payload::Planned(n) => {
            if node_index(*n).is_none() {
                return Ok(ignored);
            }
            entry.goal = Some(*n);
            entry.cost = Some(f64::INFINITY);
        }
        Payload::Selected { node, cost } => {
            if node_index(*node).is_none() {
                return Ok(ignored);
            }
            entry.goal = Some(*node);
            entry.cost = Some(*cost);
        }
        Payload::Path { path, cost, since } => {
            entry.path = Some(Arc::clone(path));
            entry.path_since = *since;
            if entry.goal.is_some() {
                entry.cost = Some(*cost);
            }
            out.map_dirty = true;
        }
        Payload::Aborted(_) => {
            out.map_dirty = entry.path.is_some();
            entry.reset();
        }
        Payload::Idleness(_) => unreachable!("handled above"),
    }
    entry.timestamp = msg.timestamp;
    Ok(out)
}

/// Reset every entry older than `t_exp` (strictly). Returns whether a path
/// was dropped.
pub fn expire_entries(model: &mut TeamModel, t: f64, t_exp: f64) -> bool {
    let mut dropped_path = false;
    for e in model.entries.iter_mut() {
        if !e.is_empty() && (t - e.timestamp) > t_exp {
            dropped_path |= e.path.is_some();
            e.reset();
        }
    }
    dropped_path
}

/// Node conflict of the owner for `goal`: the first teammate (by id) that
/// wins the goal against the owner's `cost`. Planned goals cost infinity.
pub fn detect_node_conflict(self_id: RobotId, goal: NodeId, cost: f64, model: &TeamModel) -> Option<RobotId> {
    model
        .teammates()
        .filter(|e| e.robot != self_id && e.goal == Some(goal))
        .find(|e| {
            let c = e.cost.unwrap_or(f64::INFINITY);
            cost > c || (cost == c && self_id > e.robot)
        })
        .map(|e| e.robot)
}
