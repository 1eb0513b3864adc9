//! Patrol a corridor with two robots and print the run summary.
//!
//! Pass an output path to also write the metrics CSV.

use patrol3d::agent::Strategy;
use patrol3d::engine::run;
use patrol3d::scenarios::corridor;

pub fn run_example() -> patrol3d::Result<()> {
    let mut scenario = corridor(5, 3.0, Strategy::Cc, 7)?;
    scenario.duration = 300.0;
    let metrics = run(scenario)?;
    println!("{}", metrics.summary());
    for e in metrics.visits().take(6) {
        let node = e.node.map_or("-".into(), |n| n.to_string());
        println!("visit t={:>6.1} node {node} by robot {} idleness {:.1}", e.t, e.subject, e.value);
    }
    if let Some(out) = std::env::args().nth(1) {
        std::fs::write(&out, metrics.to_csv()).map_err(|e| patrol3d::Error::io(&out, e))?;
        println!("wrote {out}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
