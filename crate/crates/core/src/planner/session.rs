use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::network::TIME_SLACK;
use crate::spatial::Point;
use crate::terrain::TraversableMap;

use super::search::{densify, escape_point, line_of_sight, local_replan, shortcut, windowed_search};
use super::{Path, PlannerParams};

/// Distance to the end of the global path that counts as arrival. The
/// search ends at the map point nearest the goal, which may lie outside a
/// tight goal tolerance.
const ARRIVED: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlannerCommand {
    Go { goal: Point, tolerance: f64 },
    Abort,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlannerStatus {
    Success { path: Arc<Path>, cost: f64 },
    Failure,
    Reached,
}

/// What one planner tick produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlannerOutput {
    pub status: Option<PlannerStatus>,
    /// Path to share with the team: the path, its length and the start of
    /// the current path stream (`None` for a robot standing still).
    pub broadcast: Option<(Arc<Path>, f64, Option<f64>)>,
}

#[derive(Debug, Clone)]
enum Phase {
    Initial { attempts: u32, next_try: f64 },
    Following { global: Arc<Path>, progress: usize },
}

#[derive(Debug, Clone)]
struct Session {
    goal: Point,
    tolerance: f64,
    phase: Phase,
}

/// One robot's planning loop: initial attempts separated by `t_wait`, then a
/// local replan every tick until the goal is reached, an attempt fails, or
/// the agent aborts.
#[derive(Debug)]
pub struct PathPlanner {
    pub params: PlannerParams,
    rng: ChaCha8Rng,
    session: Option<Session>,
    local: Option<Arc<Path>>,
    last_cost: Option<f64>,
    since: Option<f64>,
    attempts_used: u32,
}

impl PathPlanner {
    pub fn new(params: PlannerParams, rng: ChaCha8Rng) -> Self {
        PathPlanner {
            params,
            rng,
            session: None,
            local: None,
            last_cost: None,
            since: None,
            attempts_used: 0,
        }
    }

    pub fn command(&mut self, cmd: PlannerCommand, t: f64) {
        match cmd {
            PlannerCommand::Go { goal, tolerance } => {
                self.session = Some(Session {
                    goal,
                    tolerance,
                    phase: Phase::Initial {
                        attempts: 0,
                        next_try: t,
                    },
                });
                self.local = None;
            }
            PlannerCommand::Abort => {
                self.session = None;
                self.local = None;
            }
        }
    }

    pub fn is_active(&self) -> bool {
        self.session.is_some()
    }

    pub fn goal(&self) -> Option<Point> {
        self.session.as_ref().map(|s| s.goal)
    }

    /// The path the robot is currently following.
    pub fn local_path(&self) -> Option<&Arc<Path>> {
        self.local.as_ref()
    }

    /// Length of the latest successful plan to the goal.
    pub fn last_cost(&self) -> Option<f64> {
        self.last_cost
    }

    /// Start of the current uninterrupted stream of successful plans.
    pub fn since(&self) -> Option<f64> {
        self.since
    }

    /// Initial attempts spent on the last session that left the initial phase
    /// or failed.
    pub fn attempts_used(&self) -> u32 {
        self.attempts_used
    }

    /// Goal and tolerance of the running session.
    pub fn target(&self) -> Option<(Point, f64)> {
        self.session.as_ref().map(|s| (s.goal, s.tolerance))
    }

    /// The path the robot would take on `map`, without following it. Lets a
    /// blocked robot tell the team where it wants to go.
    pub fn intent(&mut self, pose: &Point, goal: &Point, tolerance: f64, map: &TraversableMap) -> Option<Arc<Path>> {
        let (r, _) = windowed_search(
            pose,
            goal,
            tolerance,
            map,
            self.params.window_attempts,
            &self.params,
            &mut self.rng,
        )?;
        Some(Arc::new(shortcut(&r.path, map)))
    }

    /// Without a path to follow, head straight for the nearest traversable
    /// point within `reach` accepted by `keep`. Returns whether an escape was
    /// found.
    pub fn evade(
        &mut self,
        pose: &Point,
        map: &TraversableMap,
        reach: f64,
        wall_gap: f64,
        keep: impl Fn(&Point) -> bool,
    ) -> bool {
        if self.local.is_some() {
            return false;
        }
        match escape_point(pose, map, reach, wall_gap, keep) {
            Some(q) => {
                self.local = Some(Arc::new(Path::new(vec![*pose, q])));
                true
            }
            None => false,
        }
    }

    /// End the session if the robot has arrived: within tolerance of the goal
    /// or at the end of the global path.
    pub fn check_arrival(&mut self, pose: &Point) -> Option<PlannerStatus> {
        let s = self.session.as_ref()?;
        let at_end = match &s.phase {
            Phase::Following { global, .. } => global.last().is_some_and(|g| (g - pose).norm() <= ARRIVED),
            Phase::Initial { .. } => false,
        };
        if (pose - s.goal).norm() <= s.tolerance || at_end {
            self.session = None;
            self.local = None;
            return Some(PlannerStatus::Reached);
        }
        None
    }

    pub fn step(&mut self, t: f64, pose: &Point, map: &TraversableMap) -> PlannerOutput {
        if let Some(status) = self.check_arrival(pose) {
            return PlannerOutput {
                status: Some(status),
                broadcast: None,
            };
        }
        let Some(mut s) = self.session.take() else {
            return PlannerOutput::default();
        };
        
        match &mut s.phase {
            Phase::Initial { attempts, next_try } => {
                if t + TIME_SLACK < *next_try {
                    self.session = Some(s);
                    return PlannerOutput::default();
                }
                *attempts += 1;
                let n = *attempts;
                let found = windowed_search(
                    pose,
                    &s.goal,
                    s.tolerance,
                    map,
                    self.params.window_attempts,
                    &self.params,
                    &mut self.rng,
                );
                match found {
                    Some((r, _)) => {
                        self.attempts_used = n;
                        let global = Arc::new(densify(&shortcut(&r.path, map), self.params.max_step));
                        s.phase = Phase::Following {
                            global: Arc::clone(&global),
                            progress: 0,
                        };
                        let out = self.follow(t, pose, &mut s, map);
                        if matches!(out.status, Some(PlannerStatus::Success { .. })) {
                            self.session = Some(s);
                        }
                        out
                    }
                    None if n >= self.params.l_max => {
                        self.attempts_used = n;
                        self.fail(pose, true)
                    }
                    None => {
                        *next_try = t + self.params.t_wait;
                        self.session = Some(s);
                        self.fail(pose, false)
                    }
                }
            }
            Phase::Following { .. } => {
                let out = self.follow(t, pose, &mut s, map);
                if matches!(out.status, Some(PlannerStatus::Success { .. })) {
                    self.session = Some(s);
                }
                out
            }
        }
    }

    /// Stop in place and tell the team. `terminal` ends the session.
    fn fail(&mut self, pose: &Point, terminal: bool) -> PlannerOutput {
        self.local = None;
        self.since = None;
        PlannerOutput {
            status: terminal.then_some(PlannerStatus::Failure),
            broadcast: Some((Arc::new(Path::new(vec![*pose])), 0.0, None)),
        }
    }

    fn follow(&mut self, t: f64, pose: &Point, s: &mut Session, map: &TraversableMap) -> PlannerOutput {
        let Phase::Following { global, progress } = &mut s.phase else {
            unreachable!("follow outside the following phase")
        };
        advance_progress(pose, global, progress);
        let mut plan = local_replan(pose, global, *progress, map, &self.params, &mut self.rng);
        if plan.is_none() {
            // The local window is blocked; look for another way to the goal.
            if let Some((r, _)) = windowed_search(
                pose,
                &s.goal,
                s.tolerance,
                map,
                self.params.window_attempts,
                &self.params,
                &mut self.rng,
            ) {
                *global = Arc::new(densify(&shortcut(&r.path, map), self.params.max_step));
                *progress = 0;
                plan = local_replan(pose, global, 0, map, &self.params, &mut self.rng);
            }
        }
        let Some(plan) = plan else {
            return self.fail(pose, true);
        };
        let g = global.waypoints();
        // Intermediate targets are met loosely; finish on the target itself
        // when it is in sight so consecutive plans agree.
        let mut pts = plan.result.path.waypoints().to_vec();
        let target = g[plan.target];
        if let Some(end) = pts.last().copied() {
            if end != target && line_of_sight(&end, &target, map) {
                pts.push(target);
            }
        }
        let local = shortcut(&Path::new(pts), map);
        let mut shared = local.waypoints().to_vec();
        if plan.target + 1 < g.len() {
            shared.extend_from_slice(&g[plan.target + 1..]);
        }
        let shared = Path::new(shared);
        let cost = shared.length();
        let local = Arc::new(local);
        self.local = Some(Arc::clone(&local));
        self.last_cost = Some(cost);
        let since = *self.since.get_or_insert(t);
        PlannerOutput {
            status: Some(PlannerStatus::Success { path: local, cost }),
            broadcast: Some((Arc::new(shared), cost, Some(since))),
        }
    }
}

/// Move `progress` to the global waypoint nearest the robot, never backwards.
fn advance_progress(pose: &Point, global: &Path, progress: &mut usize) {
    let wp = global.waypoints();
    while *progress + 1 < wp.len() && (wp[*progress + 1] - pose).norm() <= (wp[*progress] - pose).norm() {
        *progress += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::terrain::{future_trail, Label, TerrainMap, Traversability};
    use rand::SeedableRng;

    fn setup() -> Traversability {
        let mut pts = Vec::new();
        for i in 0..41 {
            for j in 0..41 {
                pts.push((Point::new(i as f64 * 0.25, j as f64 * 0.25, 0.0), Label::Terrain));
            }
        }
        Traversability::new(Arc::new(TerrainMap::from_labeled(pts).unwrap()), &Params::default())
    }

    fn planner() -> PathPlanner {
        PathPlanner::new(PlannerParams::default(), ChaCha8Rng::seed_from_u64(2))
    }

    #[test]
    fn open_map_success_then_reached() {
        let tr = setup();
        let m = tr.build(&[], &Point::origin(), &[]).unwrap();
        let mut p = planner();
        let goal = Point::new(8.0, 5.0, 0.0);
        p.command(PlannerCommand::Go { goal, tolerance: 0.5 }, 0.0);
        let out = p.step(0.0, &Point::new(1.0, 1.0, 0.0), &m);
        assert!(matches!(out.status, Some(PlannerStatus::Success { .. })));
        assert_eq!(p.attempts_used(), 1);
        let (shared, cost, since) = out.broadcast.unwrap();
        assert_eq!(since, Some(0.0));
        assert!((shared.length() - cost).abs() < 1e-9);
        let out = p.step(0.1, &Point::new(1.1, 1.0, 0.0), &m);
        assert!(matches!(out.status, Some(PlannerStatus::Success { .. })));
        assert_eq!(out.broadcast.unwrap().2, Some(0.0));
        let out = p.step(0.2, &Point::new(7.8, 5.0, 0.0), &m);
        assert_eq!(out.status, Some(PlannerStatus::Reached));
        assert!(!p.is_active());
    }

    #[test]
    fn blocked_then_cleared_succeeds_on_third_attempt() {
        let tr = setup();
        let goal = Point::new(8.0, 8.0, 0.0);
        let me = Point::new(7.0, 8.0, 0.0);
        let blocked = tr.build(&[future_trail(1, goal, None, 1.5, 0.47)], &me, &[]).unwrap();
        let open = tr.build(&[], &me, &[]).unwrap();
        let mut p = planner();
        p.command(PlannerCommand::Go { goal, tolerance: 0.5 }, 0.0);
        let start = Point::new(2.0, 2.0, 0.0);
        let mut t = 0.0;
        let mut found_at = None;
        for tick in 0..40 {
            // The blocking teammate leaves at 0.7 s.
            let m = if t < 0.7 { &blocked } else { &open };
            let out = p.step(t, &start, m);
            if let Some(PlannerStatus::Success { .. }) = out.status {
                found_at = Some(tick);
                break;
            }
            assert_eq!(out.status, None);
            t += 0.1;
        }
        assert!(found_at.is_some());
        assert_eq!(p.attempts_used(), 3);
    }

    #[test]
    fn blocked_for_all_attempts_fails() {
        let tr = setup();
        let goal = Point::new(8.0, 8.0, 0.0);
        let blocked = tr
            .build(&[future_trail(1, goal, None, 1.5, 0.47)], &Point::new(7.0, 8.0, 0.0), &[])
            .unwrap();
        let mut p = planner();
        p.command(PlannerCommand::Go { goal, tolerance: 0.5 }, 0.0);
        let mut failures = 0;
        let mut t = 0.0;
        while t < 5.0 {
            let out = p.step(t, &Point::new(2.0, 2.0, 0.0), &blocked);
            if out.broadcast.is_some() {
                assert!(out.broadcast.as_ref().unwrap().0.is_degenerate());
                failures += 1;
            }
            if out.status == Some(PlannerStatus::Failure) {
                break;
            }
            t += 0.1;
        }
        assert_eq!(failures, 5);
        assert_eq!(p.attempts_used(), 5);
        assert!(!p.is_active());
        assert!((t - 2.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn abort_stops_immediately() {
        let tr = setup();
        let m = tr.build(&[], &Point::origin(), &[]).unwrap();
        let mut p = planner();
        p.command(PlannerCommand::Go { goal: Point::new(8.0, 8.0, 0.0), tolerance: 0.5 }, 0.0);
        p.command(PlannerCommand::Abort, 0.0);
        assert_eq!(p.step(0.0, &Point::new(1.0, 1.0, 0.0), &m), PlannerOutput::default());
    }

    #[test]
    fn intent_does_not_start_a_session() {
        let tr = setup();
        let m = tr.build(&[], &Point::origin(), &[]).unwrap();
        let mut pl = planner();
        let goal = Point::new(8.0, 6.0, 0.0);
        let path = pl.intent(&Point::new(1.0, 1.0, 0.0), &goal, 0.3, &m).unwrap();
        assert!((path.last().unwrap() - goal).norm() <= 0.3);
        assert!(!pl.is_active());
        assert!(pl.local_path().is_none());
    }

    #[test]
    fn evade_only_without_a_path() {
        let tr = setup();
        let params = Params::default();
        let pose = Point::new(5.0, 5.0, 0.0);
        let trail = future_trail(1, pose, None, params.r_c, params.r_b);
        let m = tr.build(&[trail], &pose, &[]).unwrap();
        let mut pl = planner();
        assert!(pl.evade(&pose, &m, 3.0, 0.0, |_| true));
        let wp = pl.local_path().unwrap().waypoints().to_vec();
        assert_eq!(wp[0], pose);
        assert!((wp[1] - pose).norm() > params.r_b + params.exclusion());
        assert!(!pl.evade(&pose, &m, 3.0, 0.0, |_| true), "already moving");
    }
}
