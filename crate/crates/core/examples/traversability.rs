//! Label a raw point cloud and build the multi-robot traversable map.
//!
//! The cloud is a 6 x 6 m floor with a 1 m wall and a 10 cm kerb. A teammate
//! trail near the robot removes part of the floor from the robot's map.

use std::sync::Arc;

use patrol3d::params::Params;
use patrol3d::spatial::Point;
use patrol3d::terrain::{future_trail, Label, SegmentParams, TerrainMap, Traversability};

fn cloud() -> Vec<Point> {
    let g = 0.1;
    let mut pts = Vec::new();
    for i in 0..=60 {
        for j in 0..=60 {
            let (x, y) = (i as f64 * g, j as f64 * g);
            pts.push(Point::new(x, y, 0.0));
        }
    }
    // Kerb: a dense vertical face 10 cm high along y = 4.5.
    for i in 0..=20 {
        for k in 1..=5 {
            pts.push(Point::new(1.0 + i as f64 * 0.05, 4.5, k as f64 * 0.02));
        }
    }
    // Wall along x = 4, from y = 0 to 3.
    for j in 0..=30 {
        for k in 1..=10 {
            pts.push(Point::new(4.0, j as f64 * g, k as f64 * g));
        }
    }
    pts
}

pub fn run_example() -> patrol3d::Result<()> {
    let map = Arc::new(TerrainMap::from_points(cloud(), &SegmentParams::default())?);
    let count = |l: Label| map.labels().iter().filter(|&&x| x == l).count();
    println!(
        "{} points: terrain {}, ramp {}, surmountable {}, wall {}",
        map.len(),
        count(Label::Terrain),
        count(Label::Ramp),
        count(Label::SurmountableObstacle),
        count(Label::Wall)
    );

    let params = Params::default();
    let trav = Traversability::new(Arc::clone(&map), &params);
    let me = Point::new(2.0, 2.0, 0.0);
    let alone = trav.build(&[], &me, &[])?;

    // Teammate 1 at (3, 3.5) heading west.
    let path = [Point::new(1.0, 3.5, 0.0)];
    let trail = future_trail(1, Point::new(3.0, 3.5, 0.0), Some(&path), params.r_c, params.r_b);
    let shared = trav.build(std::slice::from_ref(&trail), &me, &[])?;
    // The same trail seen from far away is ignored.
    let far = trav.build(&[trail], &Point::new(5.5, 0.5, 0.0), &[])?;

    let (lo, hi) = alone.bounds();
    println!("traversable alone: {} points, cost in [{lo:.3}, {hi:.3}]", alone.len());
    println!("with teammate trail: {} points", shared.len());
    println!("trail out of range: {} points", far.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
