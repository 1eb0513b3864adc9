//! Command-line front end: `run`, `compare` and `build-graph`.
//!
//! Exit codes: 0 ok, 2 input error, 3 disconnected graph, 4 invariant
//! violation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::Strategy;
use crate::engine::{run as run_engine, MetricsRecord, Scenario, Summary};
use crate::error::{Error, Result};
use crate::graph::{
    build_from_trajectories, build_from_waypoints, write_graph, PatrollingGraph, Pose, TrajectoryGraphParams,
    WaypointGraphParams,
};
use crate::params::{Params, SYMBOLS};
use crate::planner::{windowed_search, PlannerParams};
use crate::scenarios::ScenarioFile;
use crate::spatial::Point;
use crate::terrain::{parse_map, SegmentParams, Traversability};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DISCONNECTED: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "patrol3d", version, about = "Multi-robot patrolling on 3D terrain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its metrics.
    Run(RunArgs),
    /// Run a scenario under every strategy across several seeds.
    Compare(CompareArgs),
    /// Build a patrolling graph from waypoints or trajectories.
    BuildGraph(BuildGraphArgs),
}

/// Overrides shared by `run` and `compare`.
#[derive(Debug, Args)]
pub struct Overrides {
    /// Scenario file (JSON).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Simulated duration, s.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Simulation step, s.
    #[arg(long)]
    pub tick: Option<f64>,
    /// Parameter override `KEY=VAL`, by symbol name. Repeatable.
    #[arg(long = "param", value_name = "KEY=VAL")]
    pub params: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "patrol3d-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Seeds as a list (`1,4,9`) or a half-open range (`0..5`).
    #[arg(long, default_value = "0..5")]
    pub seeds: String,
}

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    /// Terrain map; required with `--waypoints`.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Waypoint file, one `x y z` per line.
    #[arg(long, conflicts_with = "trajectories", required_unless_present = "trajectories")]
    pub waypoints: Option<PathBuf>,
    /// Trajectory file, `x y z [yaw]` per line, trajectories separated by blank lines.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Resampling step of the trajectory builder, m.
    #[arg(long, default_value_t = 0.5)]
    pub sample_step: f64,
    /// Voxel size of the trajectory builder, m.
    #[arg(long, default_value_t = 1.0)]
    pub voxel: f64,
    /// Seed of the planner probe.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "param", value_name = "KEY=VAL")]
    pub params: Vec<String>,
    #[arg(long, default_value = "patrol3d-out")]
    pub out: PathBuf,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Disconnected { .. } | Error::EmptyGraph => EXIT_DISCONNECTED,
        Error::Invariant(_) | Error::ClockRegression { .. } => EXIT_INVARIANT,
        _ => EXIT_INPUT,
    }
}

/// Parse `1,4,9` or `a..b`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidParameter {
        name: "seeds".into(),
        reason: format!("`{s}` is neither a list nor a range a..b"),
    };
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn load(o: &Overrides) -> Result<Scenario> {
    let mut s = ScenarioFile::load_scenario(&o.scenario)?;
    for kv in &o.params {
        s.params.apply_override(kv)?;
    }
    if let Some(d) = o.duration {
        s.duration = d;
    }
    if let Some(t) = o.tick {
        s.tick = t;
    }
    s.validate()?;
    Ok(s)
}

fn write(path: &FsPath, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &FsPath) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Every parameter as `KEY=VAL`, in symbol order.
pub fn params_line(p: &Params) -> String {
    SYMBOLS
        .iter()
        .filter_map(|s| p.get(s).map(|v| format!("{s}={v}")))
        .collect::<Vec<_>>()
        .join(" ")
}

fn header(s: &Scenario, source: &FsPath) -> String {
    format!(
        "scenario: {}\nstrategy: {}\nseed: {}\nrobots: {}\nduration_s: {}\ntick_s: {}\nlink: p={} delay={}s\nparams: {}\n",
        source.display(),
        s.strategy,
        s.seed,
        s.robots.len(),
        s.duration,
        s.tick,
        s.link_prob,
        s.link_delay,
        params_line(&s.params)
    )
}

pub fn cmd_run(args: &RunArgs) -> Result<Summary> {
    let mut s = load(&args.common)?;
    if let Some(st) = args.strategy {
        s.strategy = st;
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    let head = header(&s, &args.common.scenario);
    let m = run_engine(s)?;
    let summary = m.summary();
    let out = &args.common.out;
    create_dir(out)?;
    write(&out.join("metrics.csv"), &m.to_csv())?;
    let text = format!("{head}{summary}\n");
    write(&out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(summary)
}

/// One row of the comparison: a strategy over the seed list.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub strategy: Strategy,
    pub cells: Vec<(u64, Summary)>,
}

impl CompareRow {
    fn mean(&self, f: impl Fn(&Summary) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self.cells.iter().filter_map(|(_, s)| f(s)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_avg_idleness(&self) -> Option<f64> {
        self.mean(|s| s.mean_avg_idleness)
    }

    pub fn max_idleness(&self) -> Option<f64> {
        self.cells.iter().filter_map(|(_, s)| s.max_idleness).fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    pub fn interferences(&self) -> usize {
        self.cells.iter().map(|(_, s)| s.interferences).sum()
    }

    pub fn deadlocks(&self) -> usize {
        self.cells.iter().filter(|(_, s)| s.deadlock).count()
    }
}

/// Run every (strategy, seed) cell, in parallel, results in input order.
pub fn compare(base: &Scenario, seeds: &[u64]) -> Result<Vec<CompareRow>> {
    let cells: Vec<(Strategy, u64)> = Strategy::ALL.iter().flat_map(|&st| seeds.iter().map(move |&s| (st, s))).collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len()).max(1);
    let mut results: Vec<Option<Result<MetricsRecord>>> = (0..cells.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = results.chunks_mut(cells.len().div_ceil(workers)).zip(cells.chunks(cells.len().div_ceil(workers))).collect();
        for (slots, jobs) in chunks {
            scope.spawn(move || {
                for (slot, &(strategy, seed)) in slots.iter_mut().zip(jobs) {
                    let mut s = base.clone();
                    s.strategy = strategy;
                    s.seed = seed;
                    *slot = Some(run_engine(s));
                }
            });
        }
    });
    let mut rows: Vec<CompareRow> = Strategy::ALL.iter().map(|&strategy| CompareRow { strategy, cells: Vec::new() }).collect();
    for ((strategy, seed), r) in cells.into_iter().zip(results) {
        let m = r.expect("every cell runs")?;
        let row = rows.iter_mut().find(|row| row.strategy == strategy).expect("known strategy");
        row.cells.push((seed, m.summary()));
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.3}"))
}

/// Per-cell CSV of a comparison.
pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("strategy,seed,mean_avg_idleness,max_idleness,interferences,deadlock\n");
    for row in rows {
        for (seed, c) in &row.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                row.strategy,
                seed,
                c.mean_avg_idleness.map_or(String::new(), |v| format!("{v:.6}")),
                c.max_idleness.map_or(String::new(), |v| format!("{v:.6}")),
                c.interferences,
                c.deadlock
            );
        }
    }
    s
}

/// One line per strategy.
pub fn compare_table(rows: &[CompareRow]) -> String {
    let mut s = format!(
        "{:<8} {:>14} {:>14} {:>14} {:>10}\n",
        "strategy", "avg_idleness", "max_idleness", "interferences", "deadlocks"
    );
    for row in rows {
        let _ = writeln!(
            s,
            "{:<8} {:>14} {:>14} {:>14} {:>7}/{}",
            row.strategy.as_str(),
            opt(row.mean_avg_idleness()),
            opt(row.max_idleness()),
            row.interferences(),
            row.deadlocks(),
            row.cells.len()
        );
    }
    s
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<CompareRow>> {
    let base = load(&args.common)?;
    let seeds = parse_seeds(&args.seeds)?;
    let rows = compare(&base, &seeds)?;
    let out = &args.common.out;
    create_dir(out)?;
    write(&out.join("compare.csv"), &compare_csv(&rows))?;
    let seeds_line = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let text = format!(
        "{}seeds: {seeds_line}\n\n{}",
        header(&base, &args.common.scenario).lines().filter(|l| !l.starts_with("strategy") && !l.starts_with("seed")).fold(String::new(), |a, l| a + l + "\n"),
        compare_table(&rows)
    );
    write(&out.join("compare.txt"), &text)?;
    print!("{text}");
    Ok(rows)
}

fn read(path: &FsPath) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn numbers(line: &str, source: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
            file: source.into(),
            line: lineno,
            reason: format!("bad number `{f}`"),
        }))
        .collect()
}

/// `x y z` per line; `#` starts a comment.
pub fn parse_waypoints(text: &str, source: &str) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match numbers(line, source, i + 1)?[..] {
            [x, y, z] => out.push(Point::new(x, y, z)),
            _ => return Err(Error::Parse { file: source.into(), line: i + 1, reason: "expected `x y z`".into() }),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("waypoints"));
    }
    Ok(out)
}

/// `x y z [yaw]` per line; blank lines separate trajectories.
pub fn parse_trajectories(text: &str, source: &str) -> Result<Vec<Vec<Pose>>> {
    let mut out: Vec<Vec<Pose>> = vec![Vec::new()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if raw.trim().is_empty() {
            if !out.last().is_some_and(Vec::is_empty) {
                out.push(Vec::new());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let pose = match numbers(line, source, i + 1)?[..] {
            [x, y, z] => Pose::at(x, y, z),
            [x, y, z, yaw] => Pose { position: Point::new(x, y, z), yaw },
            _ => return Err(Error::Parse { file: source.into(), line: i + 1, reason: "expected `x y z [yaw]`".into() }),
        };
        out.last_mut().expect("never empty").push(pose);
    }
    out.retain(|t| !t.is_empty());
    if out.is_empty() {
        return Err(Error::EmptyInput("trajectories"));
    }
    Ok(out)
}

/// Human-readable connectivity report.
pub fn connectivity_report(g: &PatrollingGraph) -> String {
    let comps = g.components();
    let mut s = format!("nodes: {}\nedges: {}\ncomponents: {}\n", g.len(), g.edges().len(), comps.len());
    if comps.len() > 1 {
        for (k, c) in comps.iter().enumerate() {
            let ids = c.iter().map(|n| n.0.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(s, "  component {k}: {ids}");
        }
    }
    s
}

pub fn cmd_build_graph(args: &BuildGraphArgs) -> Result<PatrollingGraph> {
    let mut params = Params::default();
    for kv in &args.params {
        params.apply_override(kv)?;
    }
    params.validate()?;
    let graph = if let Some(wp) = &args.waypoints {
        let map_path = args.map.as_ref().ok_or_else(|| Error::InvalidScenario("--waypoints needs --map".into()))?;
        let map = Arc::new(parse_map(&read(map_path)?, &map_path.display().to_string(), &SegmentParams::default())?);
        let points = parse_waypoints(&read(wp)?, &wp.display().to_string())?;
        let trav = Traversability::new(Arc::clone(&map), &params);
        let open = trav.build(&[], &points[0], &[])?;
        let planner = PlannerParams::from(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let probe = |a: &Point, b: &Point| {
            windowed_search(a, b, params.r_v, &open, planner.window_attempts, &planner, &mut rng).map(|(r, _)| r.path.length())
        };
        let wparams = WaypointGraphParams {
            d_max: params.d_max,
            alpha_max: params.alpha_max,
            r_b: params.r_b,
            priority: params.w,
            visit_radius: params.r_v,
            ..WaypointGraphParams::default()
        };
        match build_from_waypoints(&points, &map, probe, &wparams) {
            // Every waypoint is isolated: report each as its own component.
            Err(Error::EmptyGraph) => {
                return Err(Error::Disconnected {
                    components: (0..points.len() as u32).map(|i| vec![crate::graph::NodeId(i)]).collect(),
                })
            }
            r => r?,
        }
    } else {
        let tp = args.trajectories.as_ref().expect("clap requires one input");
        let trajectories = parse_trajectories(&read(tp)?, &tp.display().to_string())?;
        let mut p = TrajectoryGraphParams::new(args.sample_step, args.voxel);
        p.priority = params.w;
        p.visit_radius = params.r_v;
        build_from_trajectories(&trajectories, &p)?
    };
    create_dir(&args.out)?;
    write(&args.out.join("graph.graph"), &write_graph(&graph))?;
    print!("{}", connectivity_report(&graph));
    Ok(graph)
}

/// Parse `args`, run the command and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a).map(drop),
        Command::Compare(a) => cmd_compare(a).map(drop),
        Command::BuildGraph(a) => cmd_build_graph(a).map(drop),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("0..5").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_seeds("1, 4,9").unwrap(), vec![1, 4, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a,b").is_err());
    }

    #[test]
    fn waypoint_file() {
        let w = parse_waypoints("# header\n0 0 0\n1.5 2 0.25 # tail\n\n", "w").unwrap();
        assert_eq!(w, vec![Point::origin(), Point::new(1.5, 2.0, 0.25)]);
        assert!(matches!(parse_waypoints("1 2\n", "w"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_waypoints("# nothing\n", "w").is_err());
    }

    #[test]
    fn trajectory_file() {
        let t = parse_trajectories("0 0 0\n1 0 0 1.57\n\n\n# second\n5 5 0\n", "t").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].len(), 2);
        assert_eq!(t[0][1].yaw, 1.57);
        assert_eq!(t[1][0].position, Point::new(5.0, 5.0, 0.0));
        assert!(parse_trajectories("0 0 0 0 0\n", "t").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::EmptyGraph), EXIT_DISCONNECTED);
        assert_eq!(exit_code(&Error::Disconnected { components: vec![] }), EXIT_DISCONNECTED);
        assert_eq!(exit_code(&Error::Invariant("x".into())), EXIT_INVARIANT);
        assert_eq!(exit_code(&Error::UnknownParameter("x".into())), EXIT_INPUT);
        assert_eq!(main_with(["patrol3d", "run"]), EXIT_INPUT);
        assert_eq!(main_with(["patrol3d", "--help"]), EXIT_OK);
    }

    #[test]
    fn params_line_lists_every_symbol() {
        let mut p = Params::default();
        p.set("D_s", 1.5).unwrap();
        let line = params_line(&p);
        assert!(line.contains("D_s=1.5"));
        // `exclusion` is unset by default and omitted.
        assert_eq!(line.split(' ').count(), SYMBOLS.len() - 1);
    }
}
