//! Two robots with different views of the node idleness merge them.
//!
//! Idleness is kept as last-visit times, so merging is an elementwise max and
//! the order in which updates arrive does not matter.

use patrol3d::knowledge::{synchronize_idleness, IdlenessVector};

pub fn run_example() -> patrol3d::Result<()> {
    // Robot 0 saw nodes 0 and 2 recently, robot 1 saw node 1.
    let a = IdlenessVector::from_last_visits(0, vec![40.0, 5.0, 38.0, 0.0]);
    let b = IdlenessVector::from_last_visits(1, vec![12.0, 41.0, 20.0, 0.0]);

    let ab = synchronize_idleness(&a, &b)?;
    let ba = synchronize_idleness(&b, &a)?;
    assert_eq!(ab.last_visits(), ba.last_visits());

    let t = 45.0;
    println!("node  robot0  robot1  merged   (idleness at t={t})");
    for k in 0..ab.len() {
        println!("{k:>4} {:>7.1} {:>7.1} {:>7.1}", a.idleness(k, t), b.idleness(k, t), ab.idleness(k, t));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
