//! Drive one robot through an L-shaped corridor with the path planner.
//!
//! The planner does an initial windowed search, then replans a short local
//! path every tick while the robot moves along it.

use std::sync::Arc;

use patrol3d::engine::advance_along;
use patrol3d::params::Params;
use patrol3d::planner::{PathPlanner, PlannerCommand, PlannerParams, PlannerStatus};
use patrol3d::scenarios::{capsule_world, Capsule};
use patrol3d::spatial::Point;
use patrol3d::terrain::Traversability;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> patrol3d::Result<()> {
    let map = Arc::new(capsule_world(&[
        Capsule::new([0.0, 0.0], [8.0, 0.0], 2.0),
        Capsule::new([8.0, 0.0], [8.0, 6.0], 2.0),
    ])?);
    let params = Params::default();
    let trav = Traversability::new(Arc::clone(&map), &params);
    let mut planner = PathPlanner::new(PlannerParams::from(&params), ChaCha8Rng::seed_from_u64(3));

    let goal = Point::new(8.0, 6.0, 0.0);
    let mut pos = Point::origin();
    let dt = 0.1;
    planner.command(PlannerCommand::Go { goal, tolerance: params.r_v }, 0.0);

    let mut t = 0.0;
    let mut travelled = 0.0;
    while t < 300.0 {
        let map_now = trav.build(&[], &pos, &[])?;
        let out = planner.step(t, &pos, &map_now);
        if t == 0.0 {
            if let Some((path, cost, _)) = &out.broadcast {
                println!("global path: {} waypoints, {cost:.2} m", path.waypoints().len());
            }
        }
        match out.status {
            Some(PlannerStatus::Failure) => {
                println!("planning failed at t={t:.1}");
                return Ok(());
            }
            Some(PlannerStatus::Reached) => break,
            _ => {}
        }
        if let Some(local) = planner.local_path() {
            let next = advance_along(&pos, local, params.v_max * dt);
            travelled += (next - pos).norm();
            pos = next;
        }
        t += dt;
        if planner.check_arrival(&pos).is_some() {
            break;
        }
    }
    println!("arrived at {pos} after {t:.1} s, {travelled:.2} m driven");
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
