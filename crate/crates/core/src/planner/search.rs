use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::graph::OrdF64;
use crate::spatial::Point;
use crate::terrain::TraversableMap;

use super::{mixed_step_cost, Path, PlannerParams};

/// Box around a segment: `axis` runs from the start to the goal, `u` is the
/// horizontal cross axis and `w` completes the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    origin: Point,
    axis: Vector3<f64>,
    u: Vector3<f64>,
    w: Vector3<f64>,
    length: f64,
    pad: f64,
    half_u: f64,
    half_w: f64,
}

impl OrientedBox {
    pub fn around_segment(a: &Point, b: &Point, half_u: f64, half_w: f64, pad: f64) -> Self {
        let d = b - a;
        let length = d.norm();
        let axis = if length > 1e-12 { d / length } else { Vector3::x() };
        let mut u = axis.cross(&Vector3::z());
        if u.norm() < 1e-9 {
            u = axis.cross(&Vector3::x());
        }
        let u = u.normalize();
        let w = axis.cross(&u);
        OrientedBox {
            origin: *a,
            axis,
            u,
            w,
            length,
            pad,
            half_u,
            half_w,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        let d = p - self.origin;
        let s = d.dot(&self.axis);
        s >= -self.pad && s <= self.length + self.pad && d.dot(&self.u).abs() <= self.half_u && d.dot(&self.w).abs() <= self.half_w
    }
}

/// Search restriction over the traversable map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    All,
    Box(OrientedBox),
    Ball { center: Point, radius: f64 },
}

impl Region {
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Region::All => true,
            Region::Box(b) => b.contains(p),
            Region::Ball { center, radius } => (p - center).norm() <= *radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub path: Path,
    /// Map indices of the waypoints.
    pub indices: Vec<usize>,
    /// Accumulated mixed cost.
    pub cost: f64,
    pub expansions: usize,
}

struct SearchNode {
    point: usize,
    parent: Option<usize>,
    g: f64,
}

/// Randomised best-first search over the traversable map.
///
/// Each expansion looks at the traversable points within the safety radius
/// `min(clearance, max_step)` of the node, samples up to `children` of them
/// without replacement with probability inversely proportional to their
/// cost (always keeping the goal projection when it is among them), and
/// queues them by accumulated mixed cost, ties by insertion order. The goal
/// is reached within `tolerance` of `goal` or at its projection.
pub fn randomized_astar(
    start: &Point,
    goal: &Point,
    tolerance: f64,
    map: &TraversableMap,
    region: &Region,
    params: &PlannerParams,
    rng: &mut ChaCha8Rng,
) -> Option<SearchResult> {
    let pts = map.map().points();
    let snap = 2.0 * params.r_b;
    let (s, _) = map.nearest(start, snap, |i| region.contains(&pts[i]))?;
    let (g_proj, _) = map.nearest(goal, snap, |i| region.contains(&pts[i]))?;
    let is_goal = |i: usize| i == g_proj || (pts[i] - goal).norm() <= tolerance;
    let budget = (params.budget_factor * (map.len() as f64).sqrt()).ceil() as usize;
    let bounds = map.bounds();

    let mut nodes = vec![SearchNode {
        point: s,
        parent: None,
        g: 0.0,
    }];
    let mut best: HashMap<usize, f64> = HashMap::from([(s, 0.0)]);
    let mut closed: HashSet<usize> = HashSet::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    open.push(Reverse((OrdF64(0.0), seq, 0usize)));
    let mut expansions = 0;
    let mut near: Vec<usize> = Vec::new();

    while let Some(Reverse((_, _, id))) = open.pop() {
        let (p, g) = (nodes[id].point, nodes[id].g);
        if !closed.insert(p) {
            continue;
        }
        if is_goal(p) {
            return Some(reconstruct(&nodes, id, pts, expansions));
        }
        if expansions >= budget {
            return None;
        }
        expansions += 1;

        let delta = map.clearance(p).min(params.max_step);
        near.clear();
        map.map().index().for_each_within(&pts[p], delta, |i, _| {
            if i != p && map.contains(i) && !closed.contains(&i) && region.contains(&pts[i]) {
                near.push(i);
            }
        });
        near.sort_unstable();
        let mut chosen: Vec<usize> = near
            .choose_multiple_weighted(rng, params.children, |&i| 1.0 / map.cost(i))
            .map(|it| it.copied().collect())
            .unwrap_or_default();
        if near.binary_search(&g_proj).is_ok() && !chosen.contains(&g_proj) {
            chosen.push(g_proj);
        }
        for c in chosen {
            let step = mixed_step_cost(&pts[p], &pts[c], goal, map.cost(c), bounds, &params.weights, 1.0);
            let gc = g + step;
            if best.get(&c).is_none_or(|&b| gc < b) {
                best.insert(c, gc);
                nodes.push(SearchNode {
                    point: c,
                    parent: Some(id),
                    g: gc,
                });
                seq += 1;
                open.push(Reverse((OrdF64(gc), seq, nodes.len() - 1)));
            }
        }
    }
    None
}

fn reconstruct(nodes: &[SearchNode], mut id: usize, pts: &[Point], expansions: usize) -> SearchResult {
    let cost = nodes[id].g;
    let mut indices = vec![nodes[id].point];
    while let Some(parent) = nodes[id].parent {
        id = parent;
        indices.push(nodes[id].point);
    }
    indices.reverse();
    SearchResult {
        path: Path::new(indices.iter().map(|&i| pts[i]).collect()),
        indices,
        cost,
        expansions,
    }
}

/// Search inside growing boxes around the start-goal segment; the last of
/// `max_attempts` uses the whole map. Returns the result and the 1-based
/// attempt that produced it.
pub fn windowed_search(
    start: &Point,
    goal: &Point,
    tolerance: f64,
    map: &TraversableMap,
    max_attempts: usize,
    params: &PlannerParams,
    rng: &mut ChaCha8Rng,
) -> Option<(SearchResult, usize)> {
    let max_attempts = max_attempts.max(1);
    for attempt in 1..=max_attempts {
        let region = if attempt == max_attempts {
            Region::All
        } else {
            let half = 2.0 * params.r_b * 2f64.powi(attempt as i32 - 1);
            Region::Box(OrientedBox::around_segment(start, goal, half, half, 1.0))
        };
        if let Some(r) = randomized_astar(start, goal, tolerance, map, &region, params, rng) {
            return Some((r, attempt));
        }
    }
    None
}

/// Sample spacing of the visibility test, m.
pub const SIGHT_STEP: f64 = 0.1;

/// True when every sample of segment `a`-`b` has a traversable nearest map
/// point, i.e. the segment stays inside the traversable map.
pub fn line_of_sight(a: &Point, b: &Point, map: &TraversableMap) -> bool {
    let n = ((b - a).norm() / SIGHT_STEP).ceil().max(1.0) as usize;
    (0..=n).all(|k| {
        let p = a + (b - a) * (k as f64 / n as f64);
        map.map().index().nearest(&p).is_some_and(|(i, _)| map.contains(i))
    })
}

/// Nearest traversable point within `reach` accepted by `keep` that the
/// robot can drive to in a straight line keeping more than `wall_gap` from
/// every wall. Used to step out of a region the map excludes, so the segment
/// may cross such regions.
pub fn escape_point(
    pose: &Point,
    map: &TraversableMap,
    reach: f64,
    wall_gap: f64,
    keep: impl Fn(&Point) -> bool,
) -> Option<Point> {
    let pts = map.map().points();
    let mut near: Vec<(f64, usize)> = Vec::new();
    map.map().index().for_each_within(pose, reach, |i, d2| {
        if map.contains(i) {
            near.push((d2, i));
        }
    });
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    near.into_iter().map(|(_, i)| pts[i]).filter(|q| keep(q)).find(|q| {
        let n = ((q - pose).norm() / SIGHT_STEP).ceil().max(1.0) as usize;
        (0..=n).all(|k| map.map().wall_clearance(&(pose + (q - pose) * (k as f64 / n as f64))) > wall_gap)
    })
}

/// Greedy string pulling: from each kept waypoint jump to the farthest one
/// still in sight. Endpoints are preserved.
pub fn shortcut(path: &Path, map: &TraversableMap) -> Path {
    let wp = path.waypoints();
    if wp.len() < 3 {
        return path.clone();
    }
    let mut out = vec![wp[0]];
    let mut i = 0;
    while i + 1 < wp.len() {
        let j = (i + 2..wp.len())
            .rev()
            .find(|&j| line_of_sight(&wp[i], &wp[j], map))
            .unwrap_or(i + 1);
        out.push(wp[j]);
        i = j;
    }
    Path::new(out)
}

/// Insert evenly spaced points so that no segment is longer than `step`.
pub fn densify(path: &Path, step: f64) -> Path {
    let wp = path.waypoints();
    let mut out = Vec::with_capacity(wp.len());
    for w in wp.windows(2) {
        let n = ((w[1] - w[0]).norm() / step).ceil().max(1.0) as usize;
        out.extend((0..n).map(|k| w[0] + (w[1] - w[0]) * (k as f64 / n as f64)));
    }
    out.extend(wp.last());
    Path::new(out)
}

/// Local plan towards the global path.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPlan {
    pub result: SearchResult,
    /// Index of the global waypoint used as the local target.
    pub target: usize,
}

/// First global waypoint at or after `progress` lying at least `r_l` from
/// `pose`; the last waypoint when none does.
pub fn local_target(pose: &Point, global: &Path, progress: usize, r_l: f64) -> usize {
    let wp = global.waypoints();
    (progress.min(wp.len() - 1)..wp.len())
        .find(|&k| (wp[k] - pose).norm() >= r_l)
        .unwrap_or(wp.len() - 1)
}

/// Plan from `pose` to the local target on the global path, searching only
/// the points within `2 r_l` of the robot.
pub fn local_replan(
    pose: &Point,
    global: &Path,
    progress: usize,
    map: &TraversableMap,
    params: &PlannerParams,
    rng: &mut ChaCha8Rng,
) -> Option<LocalPlan> {
    if global.waypoints().is_empty() {
        return None;
    }
    let target = local_target(pose, global, progress, params.r_l);
    // The global path already ends inside the goal tolerance, so its last
    // waypoint is matched exactly; a loose match there could stop short.
    let is_end = target + 1 == global.waypoints().len();
    let tol = if is_end { 0.0 } else { params.max_step };
    let region = Region::Ball {
        center: *pose,
        radius: 2.0 * params.r_l,
    };
    randomized_astar(pose, &global.waypoints()[target], tol, map, &region, params, rng)
        .map(|result| LocalPlan { result, target })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::terrain::{future_trail, Label, TerrainMap, Traversability};
    use rand::SeedableRng;
    use std::sync::Arc;

    pub(crate) fn flat(n: usize, step: f64) -> Arc<TerrainMap> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push((Point::new(i as f64 * step, j as f64 * step, 0.0), Label::Terrain));
            }
        }
        Arc::new(TerrainMap::from_labeled(pts).unwrap())
    }

    fn tmap(map: &Arc<TerrainMap>) -> TraversableMap {
        Traversability::new(Arc::clone(map), &Params::default())
            .build(&[], &Point::origin(), &[])
            .unwrap()
    }

    fn check_path(r: &SearchResult, m: &TraversableMap, params: &PlannerParams) {
        for w in r.indices.windows(2) {
            assert!(m.contains(w[0]) && m.contains(w[1]));
            let delta = m.clearance(w[0]).min(params.max_step);
            assert!((m.map().point(w[1]) - m.map().point(w[0])).norm() <= delta + 1e-12);
        }
        let recomputed: f64 = r.path.waypoints().windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        assert!((recomputed - r.path.length()).abs() < 1e-9);
    }

    #[test]
    fn trivial_when_start_is_goal() {
        let map = flat(10, 0.5);
        let m = tmap(&map);
        let params = PlannerParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = Point::new(2.0, 2.0, 0.0);
        let r = randomized_astar(&p, &Point::new(2.1, 2.0, 0.0), 0.5, &m, &Region::All, &params, &mut rng).unwrap();
        assert_eq!(r.path.waypoints().len(), 1);
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn open_map_paths_are_short_and_valid() {
        let map = flat(41, 0.5);
        let m = tmap(&map);
        let params = PlannerParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (Point::new(3.0, 3.0, 0.0), Point::new(17.0, 12.0, 0.0));
        let r = randomized_astar(&a, &b, 0.5, &m, &Region::All, &params, &mut rng).unwrap();
        check_path(&r, &m, &params);
        assert!(r.path.length() <= 1.5 * (b - a).norm());
        // Reported cost is the accumulated mixed cost of the returned path.
        let mut acc = 0.0;
        for w in r.indices.windows(2) {
            let (p, q) = (map.point(w[0]), map.point(w[1]));
            acc += mixed_step_cost(p, q, &b, m.cost(w[1]), m.bounds(), &params.weights, 1.0);
        }
        assert!((acc - r.cost).abs() <= 1e-9 * acc);
    }

    #[test]
    fn goal_in_repelling_region_fails() {
        let map = flat(21, 0.5);
        let params = Params::default();
        let trail = future_trail(1, Point::new(8.0, 8.0, 0.0), None, 1.5, 0.47);
        let m = Traversability::new(Arc::clone(&map), &params)
            .build(&[trail], &Point::new(7.0, 8.0, 0.0), &[])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = randomized_astar(
            &Point::new(2.0, 2.0, 0.0),
            &Point::new(8.0, 8.0, 0.0),
            0.5,
            &m,
            &Region::All,
            &PlannerParams::default(),
            &mut rng,
        );
        assert!(r.is_none());
    }

    #[test]
    fn box_contains() {
        let b = OrientedBox::around_segment(&Point::origin(), &Point::new(4.0, 0.0, 0.0), 1.0, 1.0, 0.5);
        assert!(b.contains(&Point::new(2.0, 0.9, 0.0)));
        assert!(b.contains(&Point::new(-0.5, 0.0, 0.0)));
        assert!(!b.contains(&Point::new(2.0, 1.1, 0.0)));
        assert!(!b.contains(&Point::new(4.6, 0.0, 0.0)));
        assert!(!b.contains(&Point::new(2.0, 0.0, 1.5)));
    }

    #[test]
    fn straight_corridor_first_attempt() {
        let map = flat(21, 0.25);
        let m = tmap(&map);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (r, attempt) = windowed_search(
            &Point::new(0.5, 2.5, 0.0),
            &Point::new(4.5, 2.5, 0.0),
            0.5,
            &m,
            4,
            &PlannerParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(attempt, 1);
        let b = OrientedBox::around_segment(&Point::new(0.5, 2.5, 0.0), &Point::new(4.5, 2.5, 0.0), 0.94, 0.94, 1.0);
        assert!(r.path.waypoints().iter().all(|p| b.contains(p)));
    }

    #[test]
    fn shortcut_straightens_open_paths() {
        let map = flat(21, 0.25);
        let m = tmap(&map);
        let zig = Path::new(vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(0.5, 0.25, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(1.5, 0.5, 0.0),
            Point::new(2.0, 0.0, 0.0),
        ]);
        let s = shortcut(&zig, &m);
        assert_eq!(s.waypoints(), &[Point::new(0.0, 0.0, 0.0), Point::new(2.0, 0.0, 0.0)]);
        assert!(line_of_sight(&Point::new(0.0, 0.0, 0.0), &Point::new(5.0, 5.0, 0.0), &m));
        let d = densify(&s, 0.5);
        assert_eq!(d.waypoints().len(), 5);
        assert!((d.length() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn local_target_selection() {
        let global = Path::new((0..20).map(|i| Point::new(i as f64 * 0.5, 0.0, 0.0)).collect());
        assert_eq!(local_target(&Point::origin(), &global, 0, 2.0), 4);
        assert_eq!(local_target(&Point::new(8.5, 0.0, 0.0), &global, 17, 2.0), 19);
        assert_eq!(local_target(&Point::new(8.5, 0.0, 0.0), &global, 10, 2.0), 10);
    }

    #[test]
    fn local_plan_tracks_unobstructed_global_path() {
        let map = flat(41, 0.25);
        let m = tmap(&map);
        let params = PlannerParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let global = Path::new((0..30).map(|i| Point::new(1.0 + i as f64 * 0.25, 5.0, 0.0)).collect());
        let pose = Point::new(1.0, 5.0, 0.0);
        let lp = local_replan(&pose, &global, 0, &m, &params, &mut rng).unwrap();
        assert_eq!(lp.target, 8);
        for p in lp.result.path.waypoints() {
            assert!((p.y - 5.0).abs() <= params.r_b, "{p}");
        }
    }

    #[test]
    fn escape_leaves_the_excluded_region() {
        // Wall column at x = 4 across the whole map.
        let mut pts = Vec::new();
        for i in 0..25 {
            for j in 0..21 {
                let label = if i == 16 { Label::Wall } else { Label::Terrain };
                pts.push((Point::new(i as f64 * 0.25, j as f64 * 0.25, 0.0), label));
            }
        }
        let map = Arc::new(TerrainMap::from_labeled(pts).unwrap());
        let params = Params::default();
        let pose = Point::new(2.5, 2.5, 0.0);
        let trail = future_trail(1, pose, None, params.r_c, params.r_b);
        let m = Traversability::new(map, &params).build(&[trail], &pose, &[]).unwrap();
        let limit = params.r_b + params.exclusion();

        let q = escape_point(&pose, &m, 3.0, 0.3, |_| true).unwrap();
        let d = (q - pose).norm();
        assert!(d > limit && d < 1.2, "{q} at {d}");
        let left = escape_point(&pose, &m, 3.0, 0.3, |q| q.x < 2.0).unwrap();
        assert!(left.x < 2.0);
        assert_eq!(escape_point(&pose, &m, 1.0, 0.3, |_| true), None);
        // Beyond the wall only; the straight segment would graze it.
        assert_eq!(escape_point(&pose, &m, 5.0, 0.3, |q| q.x > 4.0), None);
    }
}
