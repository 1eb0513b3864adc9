//! CC, CwMC and NoCC on the crossroad, three seeds each.

use patrol3d::agent::Strategy;
use patrol3d::cli::{compare, compare_table};
use patrol3d::scenarios::crossroad;

pub fn run_example() -> patrol3d::Result<()> {
    let mut base = crossroad(Strategy::Cc, 0)?;
    base.duration = 900.0;
    let rows = compare(&base, &[0, 1, 2])?;
    print!("{}", compare_table(&rows));
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
