//! Whole-team runs through the public API.

use patrol3d::agent::Strategy;
use patrol3d::engine::{run, Engine};
use patrol3d::scenarios::{corridor, crossroad, save_scenario, three_ways, ScenarioFile};

#[test]
fn scenario_files_run_like_the_in_memory_scenario() {
    let mut s = crossroad(Strategy::Cc, 3).unwrap();
    s.duration = 200.0;
    s.link_prob = 0.6;
    let dir = tempfile::tempdir().unwrap();
    let path = save_scenario(&s, dir.path(), "x").unwrap();
    let loaded = ScenarioFile::load_scenario(&path).unwrap();
    assert_eq!(run(s).unwrap().to_csv(), run(loaded).unwrap().to_csv());
}

#[test]
fn seeds_matter_on_a_lossy_link() {
    let csv = |seed| {
        let mut s = corridor(5, 3.0, Strategy::Cc, seed).unwrap();
        s.duration = 300.0;
        s.link_prob = 0.5;
        s.link_delay = 0.3;
        run(s).unwrap().to_csv()
    };
    assert_ne!(csv(1), csv(2));
}

#[test]
fn lossy_team_still_covers_the_corridor() {
    let mut s = corridor(5, 3.0, Strategy::Cc, 4).unwrap();
    s.duration = 600.0;
    s.link_prob = 0.3;
    let m = run(s).unwrap();
    let mut seen: Vec<_> = m.visits().filter_map(|e| e.node).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 5);
    assert!(!m.deadlocked);
}

#[test]
fn trails_keep_the_junction_moving() {
    let mut e = Engine::new(three_ways(Strategy::Cc, 0).unwrap()).unwrap();
    while e.time() < 300.0 {
        e.step().unwrap();
    }
    assert!(!e.metrics.deadlocked);
    assert!(e.robots.iter().all(|r| r.arrivals >= 3), "{:?}", e.robots.iter().map(|r| r.arrivals).collect::<Vec<_>>());
}
