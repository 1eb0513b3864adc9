//! Three robots shuttle through a shared junction.
//!
//! Planning against walls only, they meet in the middle and stall. With the
//! teammates' future trails in the traversable map they take turns.

use patrol3d::agent::Strategy;
use patrol3d::engine::Engine;
use patrol3d::scenarios::three_ways;

pub fn run_example() -> patrol3d::Result<()> {
    let seeds: Vec<u64> = match std::env::args().nth(1) {
        Some(n) => (0..n.parse().unwrap_or(3)).collect(),
        None => vec![0, 1, 2],
    };
    for strategy in [Strategy::Cwmc, Strategy::Cc] {
        for &seed in &seeds {
            let mut e = Engine::new(three_ways(strategy, seed)?)?;
            let mut stuck_at = None;
            while e.time() < 600.0 - 1e-9 {
                e.step()?;
                if stuck_at.is_none() && e.metrics.deadlocked {
                    stuck_at = Some(e.time());
                }
            }
            let trips: Vec<u64> = e.robots.iter().map(|r| r.arrivals).collect();
            match stuck_at {
                Some(t) => println!("{strategy:>5} seed {seed}: deadlock at {t:.0} s, trips {trips:?}"),
                None => println!("{strategy:>5} seed {seed}: no deadlock, trips {trips:?}"),
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
