//! Synthetic worlds and the JSON scenario file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::Strategy;
use crate::engine::{Mission, Scenario};
use crate::error::{Error, Result};
use crate::graph::{parse_graph, write_graph, Edge, Node, NodeId, PatrollingGraph};
use crate::params::Params;
use crate::spatial::Point;
use crate::terrain::{parse_map, write_map, Label, SegmentParams, TerrainMap};

/// Grid spacing of generated maps, m.
pub const GRID: f64 = 0.25;
/// Thickness of the wall band around free space, m.
pub const WALL_BAND: f64 = 0.5;

/// A straight passage of half-width `half` between two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Point,
    pub b: Point,
    pub half: f64,
}

impl Capsule {
    pub fn new(a: [f64; 2], b: [f64; 2], width: f64) -> Self {
        Capsule {
            a: Point::new(a[0], a[1], 0.0),
            b: Point::new(b[0], b[1], 0.0),
            half: width / 2.0,
        }
    }

    fn distance(&self, p: &Point) -> f64 {
        let ab = self.b - self.a;
        let s = ((p - self.a).dot(&ab) / ab.norm_squared().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
        (p - (self.a + ab * s)).norm()
    }
}

/// Flat world made of the union of `capsules`, sampled on a grid and fenced
/// by a band of wall points.
pub fn capsule_world(capsules: &[Capsule]) -> Result<TerrainMap> {
    if capsules.is_empty() {
        return Err(Error::EmptyInput("capsules"));
    }
    let reach = capsules.iter().map(|c| c.half).fold(0.0, f64::max) + WALL_BAND;
    let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX, 0.0), Point::new(f64::MIN, f64::MIN, 0.0));
    for c in capsules {
        for p in [c.a, c.b] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
    }
    let cell = |v: f64| (v / GRID).round() as i64;
    let mut points = Vec::new();
    for i in cell(lo.x - reach)..=cell(hi.x + reach) {
        for j in cell(lo.y - reach)..=cell(hi.y + reach) {
            let p = Point::new(i as f64 * GRID, j as f64 * GRID, 0.0);
            let d = capsules.iter().map(|c| c.distance(&p) - c.half).fold(f64::INFINITY, f64::min);
            if d <= 1e-9 {
                points.push((p, Label::Terrain));
            } else if d <= WALL_BAND + 1e-9 {
                points.push((p, Label::Wall));
            }
        }
    }
    TerrainMap::from_labeled(points)
}

fn graph_of(points: &[[f64; 2]], edges: &[(u32, u32)], params: &Params) -> Result<PatrollingGraph> {
    let nodes = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut n = Node::new(i as u32, Point::new(p[0], p[1], 0.0));
            n.visit_radius = params.r_v;
            n.priority = params.w;
            n
        })
        .collect::<Vec<_>>();
    let edges = edges
        .iter()
        .map(|&(a, b)| Edge {
            a: NodeId(a),
            b: NodeId(b),
            travel_cost: (nodes[a as usize].position - nodes[b as usize].position).norm(),
        })
        .collect();
    PatrollingGraph::new(nodes, edges)
}

fn base(map: TerrainMap, mission: Mission, robots: Vec<Point>, strategy: Strategy, seed: u64) -> Scenario {
    Scenario {
        map: Arc::new(map),
        mission,
        robots,
        strategy,
        duration: 600.0,
        tick: 0.1,
        seed,
        link_prob: 1.0,
        link_delay: 0.0,
        params: Params::default(),
    }
}

/// One robot going back and forth between two nodes `length` apart.
pub fn two_node(length: f64, strategy: Strategy, seed: u64) -> Result<Scenario> {
    let map = capsule_world(&[Capsule::new([0.0, 0.0], [length, 0.0], 3.0)])?;
    let params = Params::default();
    let g = graph_of(&[[0.0, 0.0], [length, 0.0]], &[(0, 1)], &params)?;
    Ok(base(map, Mission::Patrol(Arc::new(g)), vec![Point::origin()], strategy, seed))
}

/// A "+" of two 3 m wide passages with 6 m arms; nodes at the centre and at
/// 3 m and 6 m along each arm. Two robots start at opposite arm ends.
pub fn crossroad(strategy: Strategy, seed: u64) -> Result<Scenario> {
    let arm = 6.0;
    let map = capsule_world(&[
        Capsule::new([-arm, 0.0], [arm, 0.0], 3.0),
        Capsule::new([0.0, -arm], [0.0, arm], 3.0),
    ])?;
    let mut pts = vec![[0.0, 0.0]];
    let mut edges = Vec::new();
    for d in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
        let inner = pts.len() as u32;
        pts.push([3.0 * d[0], 3.0 * d[1]]);
        pts.push([arm * d[0], arm * d[1]]);
        edges.push((0, inner));
        edges.push((inner, inner + 1));
    }
    let params = Params::default();
    let g = graph_of(&pts, &edges, &params)?;
    let robots = vec![Point::new(-arm, 0.0, 0.0), Point::new(arm, 0.0, 0.0)];
    let mut s = base(map, Mission::Patrol(Arc::new(g)), robots, strategy, seed);
    s.duration = 1800.0;
    Ok(s)
}

/// Three straight passages crossing at the origin at 0, 60 and 120 degrees.
/// Robot `i` shuttles between the two ends of passage `i`, so every trip
/// crosses the junction.
pub fn three_ways(strategy: Strategy, seed: u64) -> Result<Scenario> {
    three_ways_with(strategy, seed, THREE_WAYS_WIDTH, THREE_WAYS_REACH)
}

pub const THREE_WAYS_WIDTH: f64 = 1.6;
pub const THREE_WAYS_REACH: f64 = 4.0;

pub fn three_ways_with(strategy: Strategy, seed: u64, width: f64, reach: f64) -> Result<Scenario> {
    let ends: Vec<(Point, Point)> = [0.0f64, 60.0, 120.0]
        .iter()
        .map(|a| {
            let (s, c) = a.to_radians().sin_cos();
            (Point::new(-reach * c, -reach * s, 0.0), Point::new(reach * c, reach * s, 0.0))
        })
        .collect();
    // Passages run 1 m past the shuttle ends.
    let caps: Vec<Capsule> = ends
        .iter()
        .map(|(a, b)| {
            let u = (b - a).normalize();
            Capsule {
                a: a - u,
                b: b + u,
                half: width / 2.0,
            }
        })
        .collect();
    let map = capsule_world(&caps)?;
    let snap = |p: &Point| Point::new((p.x / GRID).round() * GRID, (p.y / GRID).round() * GRID, 0.0);
    // Alternate start sides so no two robots begin near each other.
    let robots: Vec<Point> = ends.iter().enumerate().map(|(i, e)| snap(if i % 2 == 0 { &e.0 } else { &e.1 })).collect();
    let cycles = ends
        .iter()
        .zip(&robots)
        .map(|(e, r)| {
            let (far, near) = if snap(&e.0) == *r { (e.1, e.0) } else { (e.0, e.1) };
            vec![snap(&far), snap(&near)]
        })
        .collect();
    Ok(base(map, Mission::Shuttle(cycles), robots, strategy, seed))
}

/// A straight corridor with `nodes` nodes spaced `spacing` apart and two
/// robots at its ends.
pub fn corridor(nodes: usize, spacing: f64, strategy: Strategy, seed: u64) -> Result<Scenario> {
    if nodes < 2 {
        return Err(Error::InvalidScenario("a corridor needs at least two nodes".into()));
    }
    let len = spacing * (nodes - 1) as f64;
    let map = capsule_world(&[Capsule::new([0.0, 0.0], [len, 0.0], 3.0)])?;
    let pts: Vec<[f64; 2]> = (0..nodes).map(|i| [i as f64 * spacing, 0.0]).collect();
    let edges: Vec<(u32, u32)> = (1..nodes as u32).map(|i| (i - 1, i)).collect();
    let g = graph_of(&pts, &edges, &Params::default())?;
    let robots = vec![Point::origin(), Point::new(len, 0.0, 0.0)];
    Ok(base(map, Mission::Patrol(Arc::new(g)), robots, strategy, seed))
}

/// On-disk scenario. Relative paths resolve against the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub map: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    pub robots: Vec<[f64; 3]>,
    pub strategy: Strategy,
    pub duration_s: f64,
    pub tick_s: f64,
    pub seed: u64,
    pub link_prob: f64,
    pub link_delay_s: f64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Waypoint cycles for planner-only runs, one per robot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<Vec<[f64; 3]>>>,
}

fn read(path: &FsPath) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &FsPath, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pt(p: &[f64; 3]) -> Point {
    Point::new(p[0], p[1], p[2])
}

fn arr(p: &Point) -> [f64; 3] {
    [p.x, p.y, p.z]
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        serde_json::from_str(&read(path)?).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }

    /// Read the referenced files and build the runnable scenario.
    pub fn resolve(&self, dir: &FsPath) -> Result<Scenario> {
        let mut params = Params::default();
        for (k, v) in &self.params {
            params.set(k, *v)?;
        }
        params.validate()?;
        let map_path = dir.join(&self.map);
        let seg = SegmentParams::default();
        let map = parse_map(&read(&map_path)?, &map_path.display().to_string(), &seg)?;
        let mission = match (&self.graph, &self.cycles) {
            (Some(g), None) => {
                let gp = dir.join(g);
                let graph = parse_graph(&read(&gp)?, &gp.display().to_string())?;
                if !graph.is_connected() {
                    return Err(Error::Disconnected {
                        components: graph.components(),
                    });
                }
                Mission::Patrol(Arc::new(graph))
            }
            (None, Some(c)) => Mission::Shuttle(c.iter().map(|w| w.iter().map(pt).collect()).collect()),
            _ => {
                return Err(Error::InvalidScenario(
                    "exactly one of `graph` and `cycles` must be given".into(),
                ))
            }
        };
        let s = Scenario {
            map: Arc::new(map),
            mission,
            robots: self.robots.iter().map(pt).collect(),
            strategy: self.strategy,
            duration: self.duration_s,
            tick: self.tick_s,
            seed: self.seed,
            link_prob: self.link_prob,
            link_delay: self.link_delay_s,
            params,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load_scenario(path: impl AsRef<FsPath>) -> Result<Scenario> {
        let path = path.as_ref();
        let dir = path.parent().unwrap_or(FsPath::new("."));
        Self::load(path)?.resolve(dir)
    }
}

/// Write `scenario` as `<name>.json` plus its map and graph files into `dir`.
/// Only parameters that differ from the defaults are stored.
pub fn save_scenario(scenario: &Scenario, dir: &FsPath, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let map_file = format!("{name}.map");
    write(&dir.join(&map_file), &write_map(&scenario.map))?;
    let (graph, cycles) = match &scenario.mission {
        Mission::Patrol(g) => {
            let f = format!("{name}.graph");
            write(&dir.join(&f), &write_graph(g))?;
            (Some(PathBuf::from(f)), None)
        }
        Mission::Shuttle(c) => (None, Some(c.iter().map(|w| w.iter().map(arr).collect()).collect())),
    };
    let defaults = Params::default();
    let params = crate::params::SYMBOLS
        .iter()
        .filter_map(|s| {
            let v = scenario.params.get(s)?;
            (defaults.get(s) != Some(v)).then(|| (s.to_string(), v))
        })
        .collect();
    let file = ScenarioFile {
        map: map_file.into(),
        graph,
        robots: scenario.robots.iter().map(arr).collect(),
        strategy: scenario.strategy,
        duration_s: scenario.duration,
        tick_s: scenario.tick,
        seed: scenario.seed,
        link_prob: scenario.link_prob,
        link_delay_s: scenario.link_delay,
        params,
        cycles,
    };
    let path = dir.join(format!("{name}.json"));
    write(&path, &serde_json::to_string_pretty(&file)?)?;
    Ok(path)
}
