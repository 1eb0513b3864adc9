//! Node conflicts: two robots pick the same goal and exactly one yields.

use patrol3d::graph::{Edge, Node, NodeId, PatrollingGraph};
use patrol3d::knowledge::{apply_message, detect_node_conflict, IdlenessVector, TeamModel};
use patrol3d::network::{Message, Payload};
use patrol3d::spatial::Point;

pub fn run_example() -> patrol3d::Result<()> {
    let graph = PatrollingGraph::new(
        vec![Node::new(0, Point::origin()), Node::new(1, Point::new(6.0, 0.0, 0.0))],
        vec![Edge {
            a: NodeId(0),
            b: NodeId(1),
            travel_cost: 6.0,
        }],
    )?;
    let goal = NodeId(1);

    // Each robot's view of the other after one `Selected` message.
    let view = |owner: u32, other: u32, cost: f64| -> patrol3d::Result<TeamModel> {
        let mut model = TeamModel::new(owner, 2);
        let mut idl = IdlenessVector::new(owner, &graph, 0.0);
        let msg = Message::new(other, 1.0, Payload::Selected { node: goal, cost });
        apply_message(&mut model, &mut idl, &graph, &msg, 1.0)?;
        Ok(model)
    };

    for (c0, c1) in [(4.0, 6.5), (6.5, 4.0), (5.0, 5.0)] {
        let r0 = detect_node_conflict(0, goal, c0, &view(0, 1, c1)?);
        let r1 = detect_node_conflict(1, goal, c1, &view(1, 0, c0)?);
        let loser = match (r0, r1) {
            (Some(_), None) => 0,
            (None, Some(_)) => 1,
            _ => unreachable!("exactly one side yields"),
        };
        println!("costs {c0} vs {c1}: robot {loser} yields goal {goal}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
