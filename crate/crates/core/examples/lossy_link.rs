//! Lossy broadcast medium: each receiver gets a message with probability p.

use patrol3d::graph::NodeId;
use patrol3d::network::{LinkModel, Message, Network, Payload};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> patrol3d::Result<()> {
    for p in [1.0, 0.8, 0.5, 0.2] {
        let link = LinkModel::uniform(4, p, 0.5)?;
        let mut net = Network::new(link, ChaCha8Rng::seed_from_u64(7));
        for k in 0..1000 {
            let t = k as f64 * 0.1;
            net.broadcast(Message::new(k % 4, t, Payload::Visited(NodeId(0))), t);
        }
        // Everything sent by t=99.9 is due by t=100.4.
        let arrived = net.drain(101.0).len();
        println!(
            "p={p:.1}: {} sent, {} delivered ({:.3} per receiver), {arrived} drained",
            net.sent,
            net.delivered,
            net.delivered as f64 / (3.0 * net.sent as f64)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> patrol3d::Result<()> {
    run_example()
}
