//! Graph construction from user waypoints or from recorded trajectories.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spatial::{KdTree, Point};
use crate::terrain::TerrainMap;

use super::{Edge, Node, NodeId, PatrollingGraph};

#[derive(Debug, Clone)]
pub struct WaypointGraphParams {
    pub d_max: f64,
    pub alpha_max: f64,
    /// Robot bounding radius. The collision segment is lifted to robot-centre
    /// height (`r_b` above the endpoints) and any map point closer than
    /// `r_b / 2` to it counts as an intersection.
    pub r_b: f64,
    /// Sampling step along the segment.
    pub voxel_size: f64,
    pub priority: f64,
    pub visit_radius: f64,
}

impl Default for WaypointGraphParams {
    fn default() -> Self {
        WaypointGraphParams {
            d_max: 5.0,
            alpha_max: 30f64.to_radians(),
            r_b: 0.47,
            voxel_size: 0.25,
            priority: 1.0,
            visit_radius: 0.5,
        }
    }
}

/// Outcome of the four edge conditions for one waypoint pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCheck {
    pub distance_ok: bool,
    pub segment_clear: bool,
    pub elevation_ok: bool,
    /// Length of the traversable path, when one exists.
    pub path_length: Option<f64>,
}

impl EdgeCheck {
    pub fn accepted(&self) -> bool {
        self.distance_ok && self.segment_clear && self.elevation_ok && self.path_length.is_some()
    }
}

/// Evaluate the edge conditions between `a` and `b`. The path probe is only
/// consulted when the cheap geometric checks pass.
pub fn check_edge(
    a: &Point,
    b: &Point,
    map: &TerrainMap,
    probe: &mut dyn FnMut(&Point, &Point) -> Option<f64>,
    params: &WaypointGraphParams,
) -> EdgeCheck {
    let d = (b - a).norm();
    let distance_ok = d <= params.d_max;
    let horizontal = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
    let elevation = (b.z - a.z).abs().atan2(horizontal);
    let elevation_ok = elevation <= params.alpha_max;
    let segment_clear = distance_ok && segment_clear(a, b, map.index(), params);
    let path_length = if distance_ok && elevation_ok && segment_clear {
        probe(a, b)
    } else {
        None
    };
    EdgeCheck {
        distance_ok,
        segment_clear,
        elevation_ok,
        path_length,
    }
}

fn segment_clear(a: &Point, b: &Point, index: &KdTree, params: &WaypointGraphParams) -> bool {
    let lift = nalgebra::Vector3::new(0.0, 0.0, params.r_b);
    let (a, b) = (a + lift, b + lift);
    let len = (b - a).norm();
    let steps = (len / params.voxel_size).ceil().max(1.0) as usize;
    let radius = params.r_b / 2.0;
    (0..=steps).all(|k| {
        let p = a + (b - a) * (k as f64 / steps as f64);
        index.count_within(&p, radius) == 0
    })
}

/// Connect every waypoint pair that satisfies all edge conditions. Waypoints
/// left without edges are dropped; node ids are the waypoint indices.
pub fn build_from_waypoints(
    points: &[Point],
    map: &TerrainMap,
    mut probe: impl FnMut(&Point, &Point) -> Option<f64>,
    params: &WaypointGraphParams,
) -> Result<PatrollingGraph> {
    if points.is_empty() {
        return Err(Error::EmptyInput("waypoints"));
    }
    if !(params.d_max > 0.0) {
        return Err(Error::InvalidParameter {
            name: "d_max".into(),
            reason: "must be > 0".into(),
        });
    }
    let mut edges = Vec::new();
    let mut degree = vec![0usize; points.len()];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let check = check_edge(&points[i], &points[j], map, &mut probe, params);
            if let Some(len) = check.path_length.filter(|_| check.accepted()) {
                let euclid = (points[j] - points[i]).norm();
                edges.push(Edge {
                    a: NodeId(i as u32),
                    b: NodeId(j as u32),
                    travel_cost: if len > 0.0 { len } else { euclid.max(f64::MIN_POSITIVE) },
                });
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    let nodes: Vec<Node> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| degree[i] > 0)
        .map(|(i, p)| Node {
            id: NodeId(i as u32),
            position: *p,
            priority: params.priority,
            visit_radius: params.visit_radius,
        })
        .collect();
    if nodes.is_empty() {
        return Err(Error::EmptyGraph);
    }
    PatrollingGraph::new(nodes, edges)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Point,
    pub yaw: f64,
}

impl Pose {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Pose {
            position: Point::new(x, y, z),
            yaw: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryGraphParams {
    pub sample_step: f64,
    pub voxel_size: f64,
    /// Radius of the fixed-radius search that finds the initial components.
    /// Defaults to `2 * voxel_size`.
    pub initial_radius: Option<f64>,
    pub growth: f64,
    pub max_iterations: usize,
    pub priority: f64,
    pub visit_radius: f64,
}

impl TrajectoryGraphParams {
    pub fn new(sample_step: f64, voxel_size: f64) -> Self {
        TrajectoryGraphParams {
            sample_step,
            voxel_size,
            initial_radius: None,
            growth: 1.5,
            max_iterations: 20,
            priority: 1.0,
            visit_radius: 0.5,
        }
    }
}

const RADIUS_SLACK: f64 = 1e-9;

/// Build a graph from a history of robot trajectories.
///
/// Poses are resampled at `sample_step` arc-length spacing, orientation is
/// dropped, points are voxel-filtered (one centroid per voxel) and linked by
/// a fixed-radius search. Remaining components are joined through their
/// closest pairs while the search radius grows geometrically.
pub fn build_from_trajectories(
    trajectories: &[Vec<Pose>],
    params: &TrajectoryGraphParams,
) -> Result<PatrollingGraph> {
    if trajectories.is_empty() || trajectories.iter().any(|t| t.is_empty()) {
        return Err(Error::EmptyInput("trajectories"));
    }
    if !(params.sample_step > 0.0) || !(params.voxel_size > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sample_step/voxel_size".into(),
            reason: "must be > 0".into(),
        });
    }

    let mut samples = Vec::new();
    for traj in trajectories {
        resample(traj, params.sample_step, &mut samples);
    }

    let mut voxels: BTreeMap<(i64, i64, i64), (nalgebra::Vector3<f64>, usize)> = BTreeMap::new();
    for p in &samples {
        let key = (
            (p.x / params.voxel_size).floor() as i64,
            (p.y / params.voxel_size).floor() as i64,
            (p.z / params.voxel_size).floor() as i64,
        );
        let e = voxels.entry(key).or_insert((nalgebra::Vector3::zeros(), 0));
        e.0 += p.coords;
        e.1 += 1;
    }
    let positions: Vec<Point> = voxels
        .values()
        .map(|(sum, n)| Point::from(sum / *n as f64))
        .collect();
    let tree = KdTree::new(positions.clone());

    let mut uf = UnionFind::new(positions.len());
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let r0 = params.initial_radius.unwrap_or(2.0 * params.voxel_size);
    for (i, p) in positions.iter().enumerate() {
        for j in tree.within(p, r0 + RADIUS_SLACK) {
            if j > i {
                edges.push((i, j));
                uf.union(i, j);
            }
        }
    }

    let mut radius = r0;
    let mut iterations = 0;
    while uf.count > 1 {
        // Closest cross-component pair for every component pair within radius.
        let mut best: BTreeMap<(usize, usize), (f64, usize, usize)> = BTreeMap::new();
        for (i, p) in positions.iter().enumerate() {
            let ci = uf.find(i);
            tree.for_each_within(p, radius + RADIUS_SLACK, |j, d2| {
                if j <= i {
                    return;
                }
                let cj = uf.find_const(j);
                if ci == cj {
                    return;
                }
                let key = (ci.min(cj), ci.max(cj));
                let cand = (d2, i, j);
                let e = best.entry(key).or_insert(cand);
                if (cand.0, cand.1, cand.2) < (e.0, e.1, e.2) {
                    *e = cand;
                }
            });
        }
        let mut merged = false;
        let mut pairs: Vec<_> = best.into_values().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        for (_, i, j) in pairs {
            if uf.union(i, j) {
                edges.push((i, j));
                merged = true;
            }
        }
        if !merged {
            iterations += 1;
            if iterations > params.max_iterations {
                break;
            }
            radius *= params.growth;
        }
    }

    let nodes: Vec<Node> = positions
        .iter()
        .enumerate()
        .map(|(i, p)| Node {
            id: NodeId(i as u32),
            position: *p,
            priority: params.priority,
            visit_radius: params.visit_radius,
        })
        .collect();
    let edges = edges
        .into_iter()
        .map(|(i, j)| Edge {
            a: NodeId(i as u32),
            b: NodeId(j as u32),
            travel_cost: (positions[i] - positions[j]).norm().max(f64::MIN_POSITIVE),
        })
        .collect();
    PatrollingGraph::new(nodes, edges)
}

fn resample(traj: &[Pose], step: f64, out: &mut Vec<Point>) {
    out.push(traj[0].position);
    let mut next = step;
    let mut travelled = 0.0;
    for w in traj.windows(2) {
        let (a, b) = (w[0].position, w[1].position);
        let seg = (b - a).norm();
        if seg == 0.0 {
            continue;
        }
        while next <= travelled + seg + 1e-12 {
            let f = ((next - travelled) / seg).clamp(0.0, 1.0);
            out.push(a + (b - a) * f);
            next += step;
        }
        travelled += seg;
    }
}

struct UnionFind {
    parent: Vec<usize>,
    count: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            count: n,
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn find_const(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        self.count -= 1;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{Label, TerrainMap};

    fn flat_map(half: f64, spacing: f64) -> TerrainMap {
        let n = (2.0 * half / spacing).round() as i64;
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                pts.push((
                    Point::new(-half + i as f64 * spacing, -half + j as f64 * spacing, 0.0),
                    Label::Terrain,
                ));
            }
        }
        TerrainMap::from_labeled(pts).unwrap()
    }

    fn always(a: &Point, b: &Point) -> Option<f64> {
        Some((b - a).norm())
    }

    #[test]
    fn flat_pair_within_d_max_is_connected() {
        let map = flat_map(5.0, 0.25);
        let pts = [Point::new(0.0, 0.0, 0.0), Point::new(3.0, 0.0, 0.0)];
        let g = build_from_waypoints(&pts, &map, always, &WaypointGraphParams::default()).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn steep_pair_is_rejected() {
        let map = flat_map(5.0, 0.25);
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(3.0, 0.0, 2.0);
        let c = check_edge(&a, &b, &map, &mut always, &WaypointGraphParams::default());
        assert!(c.distance_ok);
        assert!(!c.elevation_ok);
        assert!(!c.accepted());
        assert!((2f64.atan2(3.0).to_degrees() - 33.69).abs() < 0.01);
    }

    #[test]
    fn far_pair_is_rejected() {
        let map = flat_map(5.0, 0.25);
        let pts = [Point::new(-3.0, 0.0, 0.0), Point::new(3.0, 0.0, 0.0)];
        assert!(matches!(
            build_from_waypoints(&pts, &map, always, &WaypointGraphParams::default()),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn wall_blocks_segment_and_isolated_points_drop() {
        let mut pts: Vec<(Point, Label)> = flat_map(5.0, 0.25)
            .points()
            .iter()
            .map(|p| (*p, Label::Terrain))
            .collect();
        for k in 0..20 {
            for h in 0..6 {
                pts.push((Point::new(1.5, -2.5 + k as f64 * 0.25, h as f64 * 0.25), Label::Wall));
            }
        }
        let map = TerrainMap::from_labeled(pts).unwrap();
        let wps = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(0.0, 2.0, 0.0),
            Point::new(3.0, 0.0, 0.0),
        ];
        let c = check_edge(&wps[0], &wps[2], &map, &mut always, &WaypointGraphParams::default());
        assert!(!c.segment_clear);
        // Point 2 only reaches the others through the wall; it is dropped.
        let g = build_from_waypoints(&wps, &map, always, &WaypointGraphParams::default()).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.index_of(NodeId(2)).is_none());
    }

    #[test]
    fn disconnected_groups_are_reported() {
        let map = flat_map(10.0, 0.5);
        let wps = [
            Point::new(-8.0, 0.0, 0.0),
            Point::new(-6.0, 0.0, 0.0),
            Point::new(6.0, 0.0, 0.0),
            Point::new(8.0, 0.0, 0.0),
        ];
        match build_from_waypoints(&wps, &map, always, &WaypointGraphParams::default()) {
            Err(Error::Disconnected { components }) => {
                assert_eq!(components, vec![vec![NodeId(0), NodeId(1)], vec![NodeId(2), NodeId(3)]]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn probe_failure_removes_edge() {
        let map = flat_map(5.0, 0.25);
        let pts = [Point::new(0.0, 0.0, 0.0), Point::new(3.0, 0.0, 0.0)];
        let r = build_from_waypoints(&pts, &map, |_, _| None, &WaypointGraphParams::default());
        assert!(r.is_err());
    }

    fn line(y: f64, len: f64, step: f64) -> Vec<Pose> {
        let n = (len / step).round() as usize;
        (0..=n).map(|k| Pose::at(k as f64 * step, y, 0.0)).collect()
    }

    #[test]
    fn straight_trajectory_gives_path_graph() {
        let g = build_from_trajectories(&[line(0.0, 10.0, 0.1)], &TrajectoryGraphParams::new(1.0, 0.5)).unwrap();
        assert!((8..=12).contains(&g.len()), "{} nodes", g.len());
        assert!(g.is_connected());
        let max_degree = (0..g.len()).map(|i| g.neighbors(i).len()).max().unwrap();
        assert!(max_degree <= 2);
    }

    #[test]
    fn stationary_pose_gives_single_node() {
        let g = build_from_trajectories(&[vec![Pose::at(1.0, 2.0, 0.0)]], &TrajectoryGraphParams::new(1.0, 0.5)).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn parallel_trajectories_get_linked() {
        let mut p = TrajectoryGraphParams::new(0.5, 0.25);
        p.initial_radius = Some(0.5);
        let g = build_from_trajectories(&[line(0.0, 5.0, 0.1), line(1.0, 5.0, 0.1)], &p).unwrap();
        assert!(g.is_connected());
        let cross = g
            .edges()
            .iter()
            .filter(|e| {
                let a = g.node_by_id(e.a).unwrap().position.y;
                let b = g.node_by_id(e.b).unwrap().position.y;
                a != b
            })
            .count();
        assert_eq!(cross, 1);
    }

    #[test]
    fn empty_trajectory_input() {
        let p = TrajectoryGraphParams::new(1.0, 0.5);
        assert!(matches!(build_from_trajectories(&[], &p), Err(Error::EmptyInput(_))));
        assert!(matches!(build_from_trajectories(&[vec![]], &p), Err(Error::EmptyInput(_))));
    }
}
