//! Write the built-in scenarios as files the CLI can run.
//!
//! `cargo run --example export_scenarios -- DIR` (default `scenarios`).

use std::path::PathBuf;

use patrol3d::agent::Strategy;
use patrol3d::scenarios::{corridor, crossroad, save_scenario, three_ways, two_node, ScenarioFile};

pub fn export(dir: &std::path::Path) -> patrol3d::Result<Vec<PathBuf>> {
    let mut corridor = corridor(5, 3.0, Strategy::Cc, 7)?;
    corridor.duration = 900.0;
    let written = vec![
        save_scenario(&corridor, dir, "corridor")?,
        save_scenario(&crossroad(Strategy::Cc, 0)?, dir, "crossroad")?,
        save_scenario(&three_ways(Strategy::Cc, 0)?, dir, "three_ways")?,
        save_scenario(&two_node(4.0, Strategy::Cc, 0)?, dir, "two_node")?,
    ];
    // Everything written must load back.
    for p in &written {
        ScenarioFile::load_scenario(p)?;
    }
    Ok(written)
}

pub fn run_example() -> patrol3d::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    for p in export(&dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
