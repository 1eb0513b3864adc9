//! Build patrolling graphs with both builders.
//!
//! Waypoints are linked when a straight segment is short, not too steep,
//! collision free and confirmed by a planner probe. Trajectories are
//! resampled, voxel filtered and linked by a growing radius search.

use std::sync::Arc;

use patrol3d::graph::{build_from_trajectories, build_from_waypoints, Pose, TrajectoryGraphParams, WaypointGraphParams};
use patrol3d::params::Params;
use patrol3d::planner::{windowed_search, PlannerParams};
use patrol3d::scenarios::{capsule_world, Capsule};
use patrol3d::spatial::Point;
use patrol3d::terrain::Traversability;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> patrol3d::Result<()> {
    // A T junction.
    let map = Arc::new(capsule_world(&[
        Capsule::new([-6.0, 0.0], [6.0, 0.0], 2.0),
        Capsule::new([0.0, 0.0], [0.0, 6.0], 2.0),
    ])?);
    let params = Params::default();
    let open = Traversability::new(Arc::clone(&map), &params).build(&[], &Point::origin(), &[])?;
    let pp = PlannerParams::from(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let probe = |a: &Point, b: &Point| {
        windowed_search(a, b, params.r_v, &open, pp.window_attempts, &pp, &mut rng).map(|(r, _)| r.path.length())
    };
    let waypoints: Vec<Point> = [[-6.0, 0.0], [-3.0, 0.0], [0.0, 0.0], [3.0, 0.0], [6.0, 0.0], [0.0, 3.0], [0.0, 6.0]]
        .iter()
        .map(|p| Point::new(p[0], p[1], 0.0))
        .collect();
    let g = build_from_waypoints(&waypoints, &map, probe, &WaypointGraphParams::default())?;
    println!("waypoint graph: {} nodes, {} edges, connected {}", g.len(), g.edges().len(), g.is_connected());
    for e in g.edges() {
        println!("  {} - {}  {:.2} m", e.a, e.b, e.travel_cost);
    }

    // Two recorded drives that cross at the origin.
    let east: Vec<Pose> = (0..=24).map(|k| Pose::at(-6.0 + k as f64 * 0.5, 0.05, 0.0)).collect();
    let north: Vec<Pose> = (0..=12).map(|k| Pose::at(0.1, k as f64 * 0.5, 0.0)).collect();
    let g = build_from_trajectories(&[east, north], &TrajectoryGraphParams::new(0.5, 1.0))?;
    println!("trajectory graph: {} nodes, {} edges, connected {}", g.len(), g.edges().len(), g.is_connected());
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
