//! Topological decision making: goal selection, conflict handling and the
//! randomised escape from repeated failures.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{NodeId, PatrollingGraph};
use crate::knowledge::{apply_message, detect_node_conflict, expire_entries, IdlenessVector, TeamModel};
use crate::network::{Message, Payload, RobotId};
use crate::params::Params;
use crate::planner::{Path, PlannerCommand, PlannerStatus};
use crate::spatial::Point;
use crate::terrain::{future_trail, FutureTrail};

/// Distance to the node centre at which a goal counts as reached. Robots
/// drive through the region of interest to its centre.
pub const ARRIVAL_TOLERANCE: f64 = 1e-3;

/// Coordination variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Topological and metric coordination.
    Cc,
    /// Topological coordination only; teammate trails are ignored.
    Cwmc,
    /// Metric coordination only; no node conflicts, no shared idleness.
    Nocc,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Cc, Strategy::Cwmc, Strategy::Nocc];

    pub fn uses_trails(&self) -> bool {
        !matches!(self, Strategy::Cwmc)
    }

    pub fn topological(&self) -> bool {
        !matches!(self, Strategy::Nocc)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Cc => "cc",
            Strategy::Cwmc => "cwmc",
            Strategy::Nocc => "nocc",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "cc" => Ok(Strategy::Cc),
            "cwmc" => Ok(Strategy::Cwmc),
            "nocc" => Ok(Strategy::Nocc),
            _ => Err(Error::InvalidParameter {
                name: "strategy".into(),
                reason: format!("`{s}` is not one of cc, cwmc, nocc"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub goal_reached: bool,
    pub node_conflict: bool,
    pub goal_visited: bool,
    pub path_planning_failure: bool,
    pub critical_path_planning_failure: bool,
    pub critical_node_conflict: bool,
    pub node_visited: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub robot: RobotId,
    pub goal: Option<NodeId>,
    pub flags: Flags,
    pub failure_since: Option<f64>,
    pub conflict_since: Option<f64>,
    /// Start of the current run of successful plans.
    pub success_since: Option<f64>,
    /// Start of the current conflict-free period.
    pub calm_since: Option<f64>,
    /// Node and robot behind the active conflict.
    pub contended: Option<(NodeId, RobotId)>,
    /// Graph index of the node the robot last stood on.
    pub current: usize,
    /// Node index whose visit ball currently contains the robot.
    pub inside: Option<usize>,
    /// Consecutive critical replans.
    pub escalation: u32,
    pub goal_selected_at: f64,
    pub last_idleness_broadcast: f64,
    pub last_selected_broadcast: f64,
    /// Travel cost advertised for the goal.
    pub cost: f64,
}

impl AgentState {
    pub fn new(robot: RobotId, current: usize) -> Self {
        AgentState {
            robot,
            goal: None,
            flags: Flags::default(),
            failure_since: None,
            conflict_since: None,
            success_since: None,
            calm_since: None,
            contended: None,
            current,
            inside: None,
            escalation: 0,
            goal_selected_at: 0.0,
            last_idleness_broadcast: f64::NEG_INFINITY,
            last_selected_broadcast: f64::NEG_INFINITY,
            cost: 0.0,
        }
    }
}

/// Depth-1 neighbours of `current`, minus `contended`.
pub fn build_search_set(graph: &PatrollingGraph, current: NodeId, contended: Option<NodeId>) -> Result<BTreeSet<NodeId>> {
    let mut set = graph.neighbors_at_depth(current, 1)?;
    if let Some(c) = contended {
        set.remove(&c);
    }
    Ok(set)
}

/// Candidate with the highest estimated idleness; ties go to the lowest id.
pub fn compute_next_best_node(
    candidates: &BTreeSet<NodeId>,
    graph: &PatrollingGraph,
    idleness: &IdlenessVector,
    t: f64,
) -> Result<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for &n in candidates {
        let k = graph.index_of(n).ok_or(Error::UnknownNode(n))?;
        let v = idleness.idleness(k, t);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((n, v));
        }
    }
    best.map(|(n, _)| n).ok_or(Error::EmptyInput("candidate set"))
}

/// Uniform draw among the nodes within `escalation` hops of `current`, or
/// among all other nodes once `escalation >= d_full`. `exclude` is removed
/// unless it is the only option.
pub fn compute_random_node(
    graph: &PatrollingGraph,
    current: NodeId,
    escalation: u32,
    d_full: u32,
    exclude: Option<NodeId>,
    rng: &mut ChaCha8Rng,
) -> Result<NodeId> {
    let pool: BTreeSet<NodeId> = if escalation >= d_full {
        graph.nodes().iter().map(|n| n.id).filter(|&n| n != current).collect()
    } else {
        graph.neighbors_at_depth(current, escalation.max(1) as usize)?
    };
    let mut candidates: Vec<NodeId> = pool.iter().copied().filter(|&n| Some(n) != exclude).collect();
    if candidates.is_empty() {
        candidates = pool.into_iter().collect();
    }
    candidates.choose(rng).copied().ok_or(Error::EmptyInput("random candidate set"))
}

/// What the agent asks of the world after one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentActions {
    pub broadcasts: Vec<Payload>,
    pub commands: Vec<PlannerCommand>,
}

/// Timing parameters of the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub t_pcr: f64,
    pub t_ncr: f64,
    pub t_idln: f64,
    pub t_exp: f64,
    pub d_full: u32,
    /// Minimum spacing of repeated `Selected` broadcasts; 0 sends every tick.
    pub t_sel: f64,
}

impl From<&Params> for AgentParams {
    fn from(p: &Params) -> Self {
        AgentParams {
            t_pcr: p.t_pcr,
            t_ncr: p.t_ncr,
            t_idln: p.t_idln,
            t_exp: p.t_exp,
            d_full: p.d_full,
            t_sel: p.t_sel,
        }
    }
}

/// A patrolling robot's decision maker and its local knowledge.
#[derive(Debug)]
pub struct Agent {
    pub state: AgentState,
    pub idleness: IdlenessVector,
    pub team: TeamModel,
    pub strategy: Strategy,
    pub params: AgentParams,
    graph: Arc<PatrollingGraph>,
    rng: ChaCha8Rng,
    /// Graph travel costs from each source index, filled lazily.
    dijkstra: Vec<Option<Vec<f64>>>,
}

impl Agent {
    pub fn new(
        robot: RobotId,
        robots: usize,
        graph: Arc<PatrollingGraph>,
        position: &Point,
        strategy: Strategy,
        params: AgentParams,
        rng: ChaCha8Rng,
        t0: f64,
    ) -> Self {
        let current = graph.nearest_node(position).unwrap_or(0);
        Agent {
            state: AgentState::new(robot, current),
            idleness: IdlenessVector::new(robot, &graph, t0),
            team: TeamModel::new(robot, robots),
            strategy,
            params,
            dijkstra: vec![None; graph.len()],
            graph,
            rng,
        }
    }

    pub fn graph(&self) -> &PatrollingGraph {
        &self.graph
    }

    pub fn id(&self) -> RobotId {
        self.state.robot
    }

    /// Apply received messages. Without topological coordination only paths
    /// are read. Returns whether a teammate path changed.
    pub fn receive(&mut self, messages: &[Message], t: f64) -> Result<bool> {
        let mut dirty = false;
        for m in messages {
            if !self.strategy.topological() && !matches!(m.payload, Payload::Path { .. }) {
                continue;
            }
            dirty |= apply_message(&mut self.team, &mut self.idleness, &self.graph, m, t)?.map_dirty;
        }
        dirty |= expire_entries(&mut self.team, t, self.params.t_exp);
        Ok(dirty)
    }

    fn goal_index(&self) -> Option<usize> {
        self.state.goal.and_then(|g| self.graph.index_of(g))
    }

    /// Refresh every flag from the planner status and the robot position.
    /// Returns the visited broadcasts for non-goal nodes entered en route.
    pub fn update(&mut self, t: f64, pose: &Point, status: Option<&PlannerStatus>) -> Vec<Payload> {
        let mut out = Vec::new();
        let st = &mut self.state;
        let mut f = Flags::default();

        // Visits of nodes along the way.
        let inside = self.graph.nodes().iter().position(|n| n.contains(pose));
        if inside != st.inside {
            if let Some(k) = inside {
                self.idleness.visit(k, t);
                st.current = k;
                if Some(k) != st.goal.and_then(|g| self.graph.index_of(g)) {
                    f.node_visited = true;
                    out.push(Payload::Visited(self.graph.node(k).id));
                } else {
                    // Our own arrival is not a teammate visit.
                    st.goal_selected_at = t;
                }
            }
            st.inside = inside;
        }

        let goal_k = st.goal.and_then(|g| self.graph.index_of(g));
        if let Some(gk) = goal_k {
            f.goal_reached = matches!(status, Some(PlannerStatus::Reached));
            // Someone else zeroed the goal since it was selected.
            f.goal_visited = !f.goal_reached && self.idleness.last_visits()[gk] > st.goal_selected_at;
        }

        match status {
            Some(PlannerStatus::Failure) => {
                f.path_planning_failure = true;
                st.success_since = None;
                let since = *st.failure_since.get_or_insert(t);
                f.critical_path_planning_failure = t - since > self.params.t_pcr;
            }
            Some(PlannerStatus::Success { cost, .. }) => {
                st.cost = *cost;
                let since = *st.success_since.get_or_insert(t);
                if t - since >= self.params.t_pcr {
                    st.failure_since = None;
                }
            }
            _ => {}
        }

        if self.strategy.topological() {
            if let Some(goal) = st.goal.filter(|_| !f.goal_reached) {
                if let Some(rival) = detect_node_conflict(st.robot, goal, st.cost, &self.team) {
                    f.node_conflict = true;
                    st.contended = Some((goal, rival));
                    st.calm_since = None;
                    let since = *st.conflict_since.get_or_insert(t);
                    f.critical_node_conflict = t - since > self.params.t_ncr;
                }
            }
            if !f.node_conflict {
                let calm = *st.calm_since.get_or_insert(t);
                if t - calm >= self.params.t_ncr {
                    st.conflict_since = None;
                }
            }
        }

        if f.goal_reached {
            if let Some(gk) = goal_k {
                self.idleness.visit(gk, t);
                st.current = gk;
            }
            st.failure_since = None;
            st.conflict_since = None;
        }
        st.flags = f;
        out
    }

    /// Choose the next goal per the current flags.
    pub fn plan_next_goal(&mut self, t: f64) -> Result<NodeId> {
        let st = &mut self.state;
        let current = self.graph.node(st.current).id;
        let contended = if st.flags.node_conflict { st.contended.map(|(n, _)| n) } else { None };
        let critical = st.flags.critical_path_planning_failure || st.flags.critical_node_conflict;
        let goal = if critical {
            st.escalation += 1;
            compute_random_node(&self.graph, current, st.escalation, self.params.d_full, contended, &mut self.rng)?
        } else {
            st.escalation = 0;
            let set = build_search_set(&self.graph, current, contended)?;
            match compute_next_best_node(&set, &self.graph, &self.idleness, t) {
                Ok(n) => n,
                Err(_) => compute_random_node(&self.graph, current, 1, self.params.d_full, contended, &mut self.rng)?,
            }
        };
        Ok(goal)
    }

    fn estimate_cost(&mut self, pose: &Point, goal: NodeId) -> f64 {
        let cur = self.state.current;
        let table = self.dijkstra[cur].get_or_insert_with(|| self.graph.travel_costs_from(cur));
        let k = self.graph.index_of(goal).expect("goal in graph");
        (pose - self.graph.node(cur).position).norm() + table[k]
    }

    fn select(&mut self, t: f64, pose: &Point, out: &mut AgentActions) -> Result<()> {
        let goal = self.plan_next_goal(t)?;
        self.state.goal = Some(goal);
        self.state.goal_selected_at = t;
        self.state.cost = self.estimate_cost(pose, goal);
        self.state.success_since = None;
        let node = self.graph.node_by_id(goal)?;
        out.broadcasts.push(Payload::Planned(goal));
        self.state.last_selected_broadcast = f64::NEG_INFINITY;
        out.commands.push(PlannerCommand::Go {
            goal: node.position,
            tolerance: ARRIVAL_TOLERANCE,
        });
        Ok(())
    }

    /// One pass of the patrolling loop. `visited` are the broadcasts returned
    /// by [`Agent::update`] this tick.
    pub fn step(&mut self, t: f64, pose: &Point, visited: Vec<Payload>) -> Result<AgentActions> {
        let mut out = AgentActions {
            broadcasts: visited,
            commands: Vec::new(),
        };
        let f = self.state.flags;
        let topo = self.strategy.topological();
        match self.state.goal {
            None => self.select(t, pose, &mut out)?,
            Some(goal) if f.goal_reached => {
                out.broadcasts.push(Payload::Reached(goal));
                self.select(t, pose, &mut out)?;
            }
            Some(goal) if f.path_planning_failure || (topo && (f.node_conflict || f.goal_visited)) => {
                out.commands.push(PlannerCommand::Abort);
                out.broadcasts.push(Payload::Aborted(goal));
                self.select(t, pose, &mut out)?;
            }
            Some(goal) => {
                if t - self.state.last_selected_broadcast >= self.params.t_sel - 1e-9 {
                    self.state.last_selected_broadcast = t;
                    out.broadcasts.push(Payload::Selected {
                        node: goal,
                        cost: self.state.cost,
                    });
                }
            }
        }
        if topo && t - self.state.last_idleness_broadcast >= self.params.t_idln - 1e-9 {
            self.state.last_idleness_broadcast = t;
            out.broadcasts.push(Payload::Idleness(Arc::new(self.idleness.last_visits().to_vec())));
        }
        debug_assert!(self.goal_index().is_some());
        Ok(out)
    }

    /// Trails of the teammates this robot must keep away from.
    pub fn trails(&self, own_since: Option<f64>, params: &Params) -> Vec<FutureTrail> {
        if !self.strategy.uses_trails() {
            return Vec::new();
        }
        teammate_trails(&self.team, self.id(), own_since, params)
    }
}

/// Shared paths of the teammates that have precedence over `me`: a robot
/// yields to every teammate whose current path stream started earlier (ties
/// by id). Robots standing still have no stream and yield to everyone moving.
pub fn precedent_paths(team: &TeamModel, me: RobotId, own_since: Option<f64>) -> Vec<(RobotId, Arc<Path>)> {
    let key = |since: Option<f64>, id: RobotId| (since.unwrap_or(f64::INFINITY), id);
    let mine = key(own_since, me);
    team.teammates()
        .filter_map(|e| {
            let path = e.path.as_ref()?;
            let k = key(e.path_since, e.robot);
            if k.0 > mine.0 || (k.0 == mine.0 && k.1 >= mine.1) || path.waypoints().is_empty() {
                return None;
            }
            Some((e.robot, Arc::clone(path)))
        })
        .collect()
}

/// Trails of the teammates with precedence over `me`.
pub fn teammate_trails(team: &TeamModel, me: RobotId, own_since: Option<f64>, params: &Params) -> Vec<FutureTrail> {
    precedent_paths(team, me, own_since)
        .into_iter()
        .map(|(j, path)| {
            let wp = path.waypoints();
            future_trail(j, wp[0], Some(&wp[1..]), params.r_c, params.r_b)
        })
        .collect()
}
