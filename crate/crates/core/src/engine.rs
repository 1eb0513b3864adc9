//! Deterministic discrete-time simulation of a robot team.
//!
//! Each tick runs, in order: motion, ground-truth visits, message delivery,
//! agents, planners, metrics. Robots are always processed by increasing id.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{precedent_paths, teammate_trails, Agent, AgentParams, Strategy};
use crate::error::{Error, Result};
use crate::graph::{window_idleness_stats, IdlenessSample, Node, NodeId, PatrollingGraph};
use crate::knowledge::{apply_message, expire_entries, IdlenessVector, TeamModel};
use crate::network::{LinkModel, Message, Network, Payload, RobotId};
use crate::params::Params;
use crate::planner::{Path, PathPlanner, PlannerCommand, PlannerOutput, PlannerParams, PlannerStatus};
use crate::spatial::Point;
use crate::terrain::{FutureTrail, TerrainMap, Traversability};

/// Points sampled on the outline of a sensed teammate.
const BODY_RING: usize = 16;

/// What the robots do.
#[derive(Debug, Clone)]
pub enum Mission {
    /// Patrol the graph with the full agent.
    Patrol(Arc<PatrollingGraph>),
    /// Planner only: robot `i` cycles through `cycles[i]` forever.
    Shuttle(Vec<Vec<Point>>),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub map: Arc<TerrainMap>,
    pub mission: Mission,
    pub robots: Vec<Point>,
    pub strategy: Strategy,
    pub duration: f64,
    pub tick: f64,
    pub seed: u64,
    pub link_prob: f64,
    pub link_delay: f64,
    pub params: Params,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.tick > 0.0) || !self.tick.is_finite() {
            return bad(format!("tick must be > 0, got {}", self.tick));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be >= 0, got {}", self.duration));
        }
        if self.robots.is_empty() {
            return bad("no robots".into());
        }
        self.params.validate()?;
        for i in 0..self.robots.len() {
            for j in i + 1..self.robots.len() {
                let d = (self.robots[i] - self.robots[j]).norm();
                if d <= self.params.d_s {
                    return bad(format!("robots {i} and {j} start {d:.3} m apart, within D_s"));
                }
            }
        }
        match &self.mission {
            Mission::Patrol(g) if g.is_empty() => return Err(Error::EmptyGraph),
            Mission::Shuttle(c) if c.len() != self.robots.len() || c.iter().any(|w| w.is_empty()) => {
                return bad("shuttle mode needs one non-empty waypoint cycle per robot".into())
            }
            _ => {}
        }
        LinkModel::uniform(self.robots.len(), self.link_prob, self.link_delay)?;
        Ok(())
    }

    fn graph(&self) -> Option<&Arc<PatrollingGraph>> {
        match &self.mission {
            Mission::Patrol(g) => Some(g),
            Mission::Shuttle(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Visit,
    Interference,
    AvgIdl,
    StdIdl,
    MaxIdl,
    Deadlock,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Visit => "visit",
            EventKind::Interference => "interference",
            EventKind::AvgIdl => "avg_idl",
            EventKind::StdIdl => "std_idl",
            EventKind::MaxIdl => "max_idl",
            EventKind::Deadlock => "deadlock",
        }
    }
}

/// Who an event concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Nobody,
    Robot(RobotId),
    Pair(RobotId, RobotId),
}

impl std::fmt::Display for Subject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subject::Nobody => Ok(()),
            Subject::Robot(r) => write!(f, "{r}"),
            Subject::Pair(a, b) => write!(f, "{a}-{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub node: Option<NodeId>,
    pub kind: EventKind,
    pub subject: Subject,
    pub value: f64,
}

/// Everything recorded during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRecord {
    pub events: Vec<Event>,
    /// Ground-truth idleness of every node, one series per node.
    pub node_samples: Vec<Vec<IdlenessSample>>,
    /// Graph idleness (mean over nodes).
    pub graph_samples: Vec<IdlenessSample>,
    pub deadlocked: bool,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "t,node,event,robot,value";

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.events.len() * 32);
        s.push_str(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.events {
            let node = e.node.map(|n| n.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{:.3},{},{},{},{:.6}", e.t, node, e.kind.as_str(), e.subject, e.value);
        }
        s
    }

    fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn interferences(&self) -> usize {
        self.count(EventKind::Interference)
    }

    pub fn visits(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Visit)
    }

    /// Graph-level windowed statistic of `kind` over time.
    pub fn graph_series(&self, kind: EventKind) -> Vec<(f64, f64)> {
        self.events
            .iter()
            .filter(|e| e.kind == kind && e.node.is_none())
            .map(|e| (e.t, e.value))
            .collect()
    }

    pub fn summary(&self) -> Summary {
        let avg = self.graph_series(EventKind::AvgIdl);
        let max = self.graph_series(EventKind::MaxIdl);
        Summary {
            final_idleness: avg.last().map(|v| v.1),
            mean_avg_idleness: (!avg.is_empty()).then(|| avg.iter().map(|v| v.1).sum::<f64>() / avg.len() as f64),
            max_idleness: max.iter().map(|v| v.1).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))),
            interferences: self.interferences(),
            visits: self.count(EventKind::Visit),
            deadlock: self.deadlocked,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Last windowed average graph idleness.
    pub final_idleness: Option<f64>,
    /// Mean of the windowed average graph idleness over the run.
    pub mean_avg_idleness: Option<f64>,
    pub max_idleness: Option<f64>,
    pub interferences: usize,
    pub visits: usize,
    pub deadlock: bool,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        writeln!(f, "final_avg_idleness_s: {}", opt(self.final_idleness))?;
        writeln!(f, "mean_avg_idleness_s: {}", opt(self.mean_avg_idleness))?;
        writeln!(f, "max_idleness_s: {}", opt(self.max_idleness))?;
        writeln!(f, "interferences: {}", self.interferences)?;
        writeln!(f, "visits: {}", self.visits)?;
        write!(f, "deadlock: {}", self.deadlock)
    }
}

/// True iff every robot with a pending goal stayed within `eps_d` of its
/// current position over the trailing `window`. Histories must cover the
/// whole window; an empty selection is never a deadlock.
pub fn detect_deadlock(histories: &[&VecDeque<(f64, Point)>], pending: &[bool], t: f64, window: f64, eps_d: f64) -> bool {
    let mut any = false;
    for (h, &p) in histories.iter().zip(pending) {
        if !p {
            continue;
        }
        let Some(&(t0, _)) = h.front() else { return false };
        if t0 > t - window + 1e-9 {
            return false;
        }
        let now = h.back().expect("non-empty").1;
        let excursion = h
            .iter()
            .filter(|(s, _)| *s >= t - window - 1e-9)
            .map(|(_, q)| (q - now).norm())
            .fold(0.0, f64::max);
        if excursion >= eps_d {
            return false;
        }
        any = true;
    }
    any
}

/// Move from `pos` along `path` by at most `step`. The first waypoint is the
/// start projection and is skipped unless it is the whole path.
pub fn advance_along(pos: &Point, path: &Path, step: f64) -> Point {
    let mut p = *pos;
    let mut left = step;
    let skip = usize::from(path.waypoints().len() > 1);
    for wp in path.waypoints().iter().skip(skip) {
        let d = (wp - p).norm();
        if d <= left {
            p = *wp;
            left -= d;
        } else {
            return p + (wp - p) * (left / d);
        }
    }
    p
}

/// Outline points of a robot body of radius `r_b` centred at `c`.
pub fn body_ring(c: &Point, r_b: f64) -> impl Iterator<Item = Point> + '_ {
    (0..BODY_RING).map(move |k| {
        let a = std::f64::consts::TAU * k as f64 / BODY_RING as f64;
        Point::new(c.x + r_b * a.cos(), c.y + r_b * a.sin(), c.z)
    })
}

#[derive(Debug)]
enum Brain {
    Patrol(Box<Agent>),
    Shuttle { cycle: Vec<Point>, next: usize, team: TeamModel },
}

#[derive(Debug)]
pub struct Robot {
    pub id: RobotId,
    pub position: Point,
    pub planner: PathPlanner,
    brain: Brain,
    status: Option<PlannerStatus>,
    /// Goals reached so far.
    pub arrivals: u64,
    history: VecDeque<(f64, Point)>,
}

impl Robot {
    pub fn agent(&self) -> Option<&Agent> {
        match &self.brain {
            Brain::Patrol(a) => Some(a),
            Brain::Shuttle { .. } => None,
        }
    }

    fn team(&self) -> &TeamModel {
        match &self.brain {
            Brain::Patrol(a) => &a.team,
            Brain::Shuttle { team, .. } => team,
        }
    }
}

/// A running simulation.
#[derive(Debug)]
pub struct Engine {
    pub scenario: Scenario,
    pub robots: Vec<Robot>,
    network: Network,
    traversability: Traversability,
    tick: u64,
    last_visit: Vec<f64>,
    inside: Vec<Vec<bool>>,
    /// Recording slot in which each pair last interfered.
    interfering: Vec<Vec<Option<u64>>>,
    deadlocked_now: bool,
    /// Stand-in graph for message handling in shuttle mode.
    placeholder: PatrollingGraph,
    pub metrics: MetricsRecord,
}

fn every(hz: f64, dt: f64) -> u64 {
    ((1.0 / (hz * dt)).round() as u64).max(1)
}

impl Engine {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let n = scenario.robots.len();
        let p = &scenario.params;
        let link = LinkModel::uniform(n, scenario.link_prob, scenario.link_delay)?;
        let mut net_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        net_rng.set_stream(0);
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(scenario.seed);
            r.set_stream(s);
            r
        };
        let mut robots = Vec::with_capacity(n);
        for (i, pos) in scenario.robots.iter().enumerate() {
            let id = i as RobotId;
            let brain = match &scenario.mission {
                Mission::Patrol(g) => Brain::Patrol(Box::new(Agent::new(
                    id,
                    n,
                    Arc::clone(g),
                    pos,
                    scenario.strategy,
                    AgentParams::from(p),
                    stream(1 + 2 * i as u64),
                    0.0,
                ))),
                Mission::Shuttle(c) => Brain::Shuttle {
                    cycle: c[i].clone(),
                    next: 0,
                    team: TeamModel::new(id, n),
                },
            };
            robots.push(Robot {
                id,
                position: *pos,
                planner: PathPlanner::new(PlannerParams::from(p), stream(2 + 2 * i as u64)),
                brain,
                status: None,
                arrivals: 0,
                history: VecDeque::new(),
            });
        }
        let nodes = scenario.graph().map_or(0, |g| g.len());
        let mut metrics = MetricsRecord::default();
        metrics.node_samples = vec![Vec::new(); nodes];
        Ok(Engine {
            traversability: Traversability::new(Arc::clone(&scenario.map), p),
            network: Network::new(link, net_rng),
            tick: 0,
            last_visit: vec![0.0; nodes],
            inside: vec![vec![false; nodes]; n],
            interfering: vec![vec![None; n]; n],
            deadlocked_now: false,
            placeholder: PatrollingGraph::new(vec![Node::new(0, Point::origin())], Vec::new())?,
            robots,
            scenario,
            metrics,
        })
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.scenario.tick
    }

    pub fn messages_sent(&self) -> u64 {
        self.network.sent
    }

    /// Run to the scenario duration and return the metrics.
    pub fn run(mut self) -> Result<MetricsRecord> {
        let steps = (self.scenario.duration / self.scenario.tick + 1e-9).floor() as u64;
        while self.tick < steps {
            self.step()?;
        }
        Ok(self.metrics)
    }

    /// Advance one tick.
    pub fn step(&mut self) -> Result<()> {
        self.tick += 1;
        let t = self.time();
        let dt = self.scenario.tick;
        self.move_robots(dt)?;
        self.record_visits(t);
        self.think(t)?;
        self.plan(t)?;
        self.sample(t);
        Ok(())
    }

    fn move_robots(&mut self, dt: f64) -> Result<()> {
        let p = &self.scenario.params;
        let reach = p.v_max * dt;
        for i in 0..self.robots.len() {
            let Some(path) = self.robots[i].planner.local_path() else { continue };
            let from = self.robots[i].position;
            let to = advance_along(&from, path, reach);
            // Never close in on a teammate that is already too near.
            let blocked = self.robots.iter().enumerate().any(|(j, r)| {
                let d = (to - r.position).norm();
                j != i && d < 2.0 * p.r_b && d < (from - r.position).norm()
            });
            if blocked {
                continue;
            }
            if (to - from).norm() > reach + 1e-9 {
                return Err(Error::Invariant(format!("robot {i} moved {} m in one tick", (to - from).norm())));
            }
            self.robots[i].position = to;
            if let Some(s) = self.robots[i].planner.check_arrival(&to) {
                self.robots[i].status = Some(s);
            }
        }
        Ok(())
    }

    fn record_visits(&mut self, t: f64) {
        let Some(g) = self.scenario.graph().cloned() else { return };
        for r in &self.robots {
            for (k, node) in g.nodes().iter().enumerate() {
                let now = node.contains(&r.position);
                if now && !self.inside[r.id as usize][k] {
                    self.metrics.events.push(Event {
                        t,
                        node: Some(node.id),
                        kind: EventKind::Visit,
                        subject: Subject::Robot(r.id),
                        value: node.priority * (t - self.last_visit[k]),
                    });
                    self.last_visit[k] = t;
                }
                self.inside[r.id as usize][k] = now;
            }
        }
    }

    /// Deliver messages and step the decision layer of every robot.
    fn think(&mut self, t: f64) -> Result<()> {
        let n = self.robots.len();
        let mut inbox: Vec<Vec<Message>> = vec![Vec::new(); n];
        for (to, m) in self.network.drain(t) {
            inbox[to as usize].push(m);
        }
        let t_exp = self.scenario.params.t_exp;
        let mut outbox: Vec<Message> = Vec::new();
        for (r, msgs) in self.robots.iter_mut().zip(inbox) {
            let status = r.status.take();
            r.arrivals += u64::from(status == Some(PlannerStatus::Reached));
            match &mut r.brain {
                Brain::Patrol(agent) => {
                    agent.receive(&msgs, t)?;
                    let visited = agent.update(t, &r.position, status.as_ref());
                    let actions = agent.step(t, &r.position, visited)?;
                    for c in actions.commands {
                        r.planner.command(c, t);
                    }
                    outbox.extend(actions.broadcasts.into_iter().map(|p| Message::new(r.id, t, p)));
                }
                Brain::Shuttle { cycle, next, team } => {
                    // Shuttles only read teammate paths, which touch neither
                    // the graph nor the idleness vector.
                    let mut scratch = IdlenessVector::from_last_visits(r.id, vec![0.0]);
                    for m in msgs.iter().filter(|m| matches!(m.payload, Payload::Path { .. })) {
                        apply_message(team, &mut scratch, &self.placeholder, m, t)?;
                    }
                    expire_entries(team, t, t_exp);
                    let go = match status {
                        Some(PlannerStatus::Reached) => {
                            *next = (*next + 1) % cycle.len();
                            true
                        }
                        Some(PlannerStatus::Failure) => true,
                        _ => !r.planner.is_active(),
                    };
                    if go {
                        r.planner.command(
                            PlannerCommand::Go {
                                goal: cycle[*next],
                                tolerance: self.scenario.params.r_v,
                            },
                            t,
                        );
                    }
                }
            }
        }
        for m in outbox {
            self.network.broadcast(m, t);
        }
        Ok(())
    }

    fn plan(&mut self, t: f64) -> Result<()> {
        let p = &self.scenario.params;
        let positions: Vec<Point> = self.robots.iter().map(|r| r.position).collect();
        let mut outbox = Vec::new();
        for r in self.robots.iter_mut() {
            if !r.planner.is_active() {
                continue;
            }
            let trails = if self.scenario.strategy.uses_trails() {
                teammate_trails(r.team(), r.id, r.planner.since(), p)
            } else {
                Vec::new()
            };
            let bodies: Vec<Point> = positions
                .iter()
                .enumerate()
                .filter(|&(j, q)| j != r.id as usize && (q - r.position).norm() <= p.sense_range)
                .flat_map(|(_, q)| body_ring(q, p.r_b).collect::<Vec<_>>())
                .collect();
            let target = r.planner.target();
            let out = match self.traversability.build(&trails, &r.position, &bodies) {
                Ok(map) => {
                    let mut out = r.planner.step(t, &r.position, &map);
                    // Blocked by sensed teammates: share the way it would take
                    // so teammates that must yield know where to clear.
                    let blocked = out.broadcast.as_ref().is_some_and(|b| b.0.is_degenerate());
                    if let (true, true, Some((goal, tol))) = (blocked, self.scenario.strategy.uses_trails(), target) {
                        if let Ok(open) = self.traversability.build(&trails, &r.position, &[]) {
                            if let Some(path) = r.planner.intent(&r.position, &goal, tol, &open) {
                                let cost = path.length();
                                out.broadcast = Some((path, cost, None));
                            }
                        }
                    }
                    // Standing in the way of a teammate with precedence: get
                    // the body out of its trail rather than wait in it.
                    let gap = self.traversability.exclusion();
                    let margin = gap + p.r_b;
                    let near: Vec<&FutureTrail> = trails.iter().filter(|tr| tr.intersects_ball(&r.position, p.r_t)).collect();
                    let clear = |q: &Point| near.iter().all(|tr| tr.distance(q) > margin);
                    if !clear(&r.position) {
                        // Prefer a spot off the whole way of those teammates
                        // so the robot is not chased along their route.
                        let ways = precedent_paths(r.team(), r.id, r.planner.since());
                        let aside = |q: &Point| clear(q) && ways.iter().all(|(_, w)| w.distance_to(q) > margin);
                        let reach = p.r_c + 2.0 * margin;
                        if !r.planner.evade(&r.position, &map, reach, gap, aside) {
                            r.planner.evade(&r.position, &map, reach, gap, clear);
                        }
                    }
                    out
                }
                Err(Error::EmptyTraversableMap) => {
                    // Fully enclosed: give up this goal and stay put.
                    r.planner.command(PlannerCommand::Abort, t);
                    PlannerOutput {
                        status: Some(PlannerStatus::Failure),
                        broadcast: Some((Arc::new(Path::new(vec![r.position])), 0.0, None)),
                    }
                }
                Err(e) => return Err(e),
            };
            if let Some((path, cost, since)) = out.broadcast {
                outbox.push(Message::new(r.id, t, Payload::Path { path, cost, since }));
            }
            r.status = out.status;
        }
        for m in outbox {
            self.network.broadcast(m, t);
        }
        Ok(())
    }

    fn sample(&mut self, t: f64) {
        let p = self.scenario.params.clone();
        let dt = self.scenario.tick;
        let k = self.tick;
        if k.is_multiple_of(every(p.interference_hz, dt)) {
            let slot = (t * p.record_hz + 1e-9).floor() as u64;
            for i in 0..self.robots.len() {
                for j in i + 1..self.robots.len() {
                    let d = (self.robots[i].position - self.robots[j].position).norm();
                    if d < p.d_s && self.interfering[i][j] != Some(slot) {
                        self.interfering[i][j] = Some(slot);
                        self.metrics.events.push(Event {
                            t,
                            node: None,
                            kind: EventKind::Interference,
                            subject: Subject::Pair(i as RobotId, j as RobotId),
                            value: d,
                        });
                    }
                }
            }
        }
        if k.is_multiple_of(every(1.0, dt)) {
            for r in self.robots.iter_mut() {
                r.history.push_back((t, r.position));
                while r.history.front().is_some_and(|(s, _)| *s < t - p.deadlock_window - 1e-9) {
                    r.history.pop_front();
                }
            }
            let hs: Vec<_> = self.robots.iter().map(|r| &r.history).collect();
            let pending = vec![true; hs.len()];
            let now = detect_deadlock(&hs, &pending, t, p.deadlock_window, p.eps_d);
            if now && !self.deadlocked_now {
                self.metrics.deadlocked = true;
                self.metrics.events.push(Event {
                    t,
                    node: None,
                    kind: EventKind::Deadlock,
                    subject: Subject::Nobody,
                    value: 1.0,
                });
            }
            self.deadlocked_now = now;
        }
        if k.is_multiple_of(every(p.record_hz, dt)) {
            self.record_idleness(t, &p);
        }
    }

    fn record_idleness(&mut self, t: f64, p: &Params) {
        let Some(g) = self.scenario.graph().cloned() else { return };
        let mut total = 0.0;
        for (k, node) in g.nodes().iter().enumerate() {
            let value = node.priority * (t - self.last_visit[k]);
            total += value;
            self.metrics.node_samples[k].push(IdlenessSample { t, value });
        }
        self.metrics.graph_samples.push(IdlenessSample {
            t,
            value: total / g.len() as f64,
        });
        let start = t - p.delta;
        let series = g
            .nodes()
            .iter()
            .map(|n| Some(n.id))
            .zip(self.metrics.node_samples.iter())
            .chain(std::iter::once((None, &self.metrics.graph_samples)));
        let mut events = Vec::new();
        for (node, samples) in series {
            if let Ok(s) = window_idleness_stats(samples, start, t) {
                for (kind, value) in [(EventKind::AvgIdl, s.avg), (EventKind::StdIdl, s.std), (EventKind::MaxIdl, s.max)] {
                    events.push(Event {
                        t,
                        node,
                        kind,
                        subject: Subject::Nobody,
                        value,
                    });
                }
            }
        }
        self.metrics.events.extend(events);
    }
}

/// Build and run `scenario`.
pub fn run(scenario: Scenario) -> Result<MetricsRecord> {
    Engine::new(scenario)?.run()
}
