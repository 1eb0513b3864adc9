//! Simulated lossy broadcast medium.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{NodeId, OrdF64};
use crate::planner::Path;

pub type RobotId = u32;

/// Slack used when comparing delivery times against the clock, so that
/// `t + delay` computed in floating point is drained on the intended tick.
pub const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Reached(NodeId),
    Visited(NodeId),
    Planned(NodeId),
    Selected { node: NodeId, cost: f64 },
    /// `since` is the time the sender started its current uninterrupted
    /// stream of paths; `None` marks a robot that is not moving on a plan.
    Path { path: Arc<Path>, cost: f64, since: Option<f64> },
    Aborted(NodeId),
    /// Last-visit times of every node, in graph index order.
    Idleness(Arc<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Reached,
    Visited,
    Planned,
    Selected,
    Path,
    Aborted,
    Idleness,
}

impl MessageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::Reached => "reached",
            MessageKind::Visited => "visited",
            MessageKind::Planned => "planned",
            MessageKind::Selected => "selected",
            MessageKind::Path => "path",
            MessageKind::Aborted => "aborted",
            MessageKind::Idleness => "idleness",
        }
    }
}

impl FromStr for MessageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "reached" => MessageKind::Reached,
            "visited" => MessageKind::Visited,
            "planned" => MessageKind::Planned,
            "selected" => MessageKind::Selected,
            "path" => MessageKind::Path,
            "aborted" => MessageKind::Aborted,
            "idleness" => MessageKind::Idleness,
            other => return Err(Error::UnknownMessageKind(other.into())),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: RobotId,
    pub timestamp: f64,
    pub payload: Payload,
}

impl Message {
    pub fn new(sender: RobotId, timestamp: f64, payload: Payload) -> Self {
        Message {
            sender,
            timestamp,
            payload,
        }
    }

    pub fn kind(&self) -> MessageKind {
        match self.payload {
            Payload::Reached(_) => MessageKind::Reached,
            Payload::Visited(_) => MessageKind::Visited,
            Payload::Planned(_) => MessageKind::Planned,
            Payload::Selected { .. } => MessageKind::Selected,
            Payload::Path { .. } => MessageKind::Path,
            Payload::Aborted(_) => MessageKind::Aborted,
            Payload::Idleness(_) => MessageKind::Idleness,
        }
    }

    pub fn node(&self) -> Option<NodeId> {
        match self.payload {
            Payload::Reached(n) | Payload::Visited(n) | Payload::Planned(n) | Payload::Aborted(n) => Some(n),
            Payload::Selected { node, .. } => Some(node),
            _ => None,
        }
    }
}

/// Tab-separated `t sender kind node cost`; path and idleness payloads are
/// summarised by their length in the node column.
impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (node, cost) = match &self.payload {
            Payload::Selected { node, cost } => (node.to_string(), cost.to_string()),
            Payload::Planned(n) => (n.to_string(), "inf".into()),
            Payload::Path { path, cost, .. } => (format!("len={}", path.waypoints().len()), cost.to_string()),
            Payload::Idleness(v) => (format!("len={}", v.len()), "-".into()),
            _ => (self.node().map_or("-".into(), |n| n.to_string()), "-".into()),
        };
        write!(f, "{}\t{}\t{}\t{}\t{}", self.timestamp, self.sender, self.kind().as_str(), node, cost)
    }
}

/// Delivery probabilities between robots and the fixed delivery delay.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    prob: Vec<Vec<f64>>,
    pub delay: f64,
}

impl LinkModel {
    pub fn uniform(robots: usize, p: f64, delay: f64) -> Result<Self> {
        Self::new(vec![vec![p; robots]; robots], delay)
    }

    pub fn new(prob: Vec<Vec<f64>>, delay: f64) -> Result<Self> {
        let m = prob.len();
        let bad = |reason: String| Error::InvalidParameter {
            name: "link_prob".into(),
            reason,
        };
        for (i, row) in prob.iter().enumerate() {
            if row.len() != m {
                return Err(bad(format!("row {i} has {} entries, expected {m}", row.len())));
            }
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad(format!("P[{i}][{j}] = {p} outside [0, 1]")));
                }
                if i != j && p != prob[j][i] {
                    return Err(bad(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        if !(delay >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "link_delay_s".into(),
                reason: "must be >= 0".into(),
            });
        }
        Ok(LinkModel { prob, delay })
    }

    pub fn robots(&self) -> usize {
        self.prob.len()
    }

    pub fn prob(&self, i: RobotId, j: RobotId) -> f64 {
        self.prob[i as usize][j as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InFlight {
    pub deliver_at: f64,
    pub receiver: RobotId,
    pub message: Message,
}

/// Messages in transit ordered by delivery time, then enqueue order.
#[derive(Debug, Default)]
pub struct InFlightQueue {
    heap: BinaryHeap<Reverse<(OrdF64, u64)>>,
    slots: std::collections::HashMap<u64, InFlight>,
    seq: u64,
}

impl InFlightQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn push(&mut self, deliver_at: f64, receiver: RobotId, message: Message) {
        let id = self.seq;
        self.seq += 1;
        self.heap.push(Reverse((OrdF64(deliver_at), id)));
        self.slots.insert(
            id,
            InFlight {
                deliver_at,
                receiver,
                message,
            },
        );
    }

    /// Remove and return every entry due at or before `t`.
    pub fn drain(&mut self, t: f64) -> Vec<(RobotId, Message)> {
        let mut out = Vec::new();
        while let Some(Reverse((at, id))) = self.heap.peek().copied() {
            if at.0 > t + TIME_SLACK {
                break;
            }
            self.heap.pop();
            let e = self.slots.remove(&id).expect("queued entry");
            out.push((e.receiver, e.message));
        }
        out
    }
}

/// One independent Bernoulli draw per potential receiver; returns the number
/// of enqueued deliveries.
pub fn broadcast(link: &LinkModel, queue: &mut InFlightQueue, msg: Message, t: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut delivered = 0;
    for j in 0..link.robots() as RobotId {
        if j == msg.sender {
            continue;
        }
        if rng.gen_bool(link.prob(msg.sender, j)) {
            queue.push(t + link.delay, j, msg.clone());
            delivered += 1;
        }
    }
    delivered
}

/// The medium: link model, queue, its own random stream and counters.
#[derive(Debug)]
pub struct Network {
    pub link: LinkModel,
    pub queue: InFlightQueue,
    rng: ChaCha8Rng,
    pub sent: u64,
    pub delivered: u64,
}

impl Network {
    pub fn new(link: LinkModel, rng: ChaCha8Rng) -> Self {
        Network {
            link,
            queue: InFlightQueue::new(),
            rng,
            sent: 0,
            delivered: 0,
        }
    }

    pub fn broadcast(&mut self, msg: Message, t: f64) -> usize {
        let n = broadcast(&self.link, &mut self.queue, msg, t, &mut self.rng);
        self.sent += 1;
        self.delivered += n as u64;
        n
    }

    pub fn drain(&mut self, t: f64) -> Vec<(RobotId, Message)> {
        self.queue.drain(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn m(sender: RobotId, n: u32) -> Message {
        Message::new(sender, 0.0, Payload::Visited(NodeId(n)))
    }

    #[test]
    fn lossless_and_silent_links() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = InFlightQueue::new();
        assert_eq!(broadcast(&LinkModel::uniform(3, 1.0, 0.2).unwrap(), &mut q, m(0, 1), 0.0, &mut rng), 2);
        assert_eq!(q.len(), 2);
        let mut q = InFlightQueue::new();
        assert_eq!(broadcast(&LinkModel::uniform(3, 0.0, 0.2).unwrap(), &mut q, m(0, 1), 0.0, &mut rng), 0);
        assert!(q.is_empty());
    }

    #[test]
    fn bernoulli_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let link = LinkModel::uniform(2, 0.5, 0.2).unwrap();
        let mut q = InFlightQueue::new();
        let n: usize = (0..10_000).map(|_| broadcast(&link, &mut q, m(0, 0), 0.0, &mut rng)).sum();
        let frac = n as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }

    #[test]
    fn drain_order() {
        let mut q = InFlightQueue::new();
        assert!(q.drain(10.0).is_empty());
        q.push(10.1, 0, m(1, 1));
        q.push(9.9, 0, m(1, 2));
        let out = q.drain(10.0);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1.node(), Some(NodeId(2)));
        q.push(10.1, 2, m(1, 3));
        q.push(10.1, 1, m(1, 4));
        let out: Vec<_> = q.drain(10.1).into_iter().map(|(r, msg)| (r, msg.node().unwrap().0)).collect();
        assert_eq!(out, vec![(0, 1), (2, 3), (1, 4)]);
    }

    #[test]
    fn zero_delay_is_synchronous() {
        let mut net = Network::new(LinkModel::uniform(4, 1.0, 0.0).unwrap(), ChaCha8Rng::seed_from_u64(0));
        net.broadcast(m(2, 5), 3.0);
        let got: Vec<RobotId> = net.drain(3.0).into_iter().map(|(r, _)| r).collect();
        assert_eq!(got, vec![0, 1, 3]);
    }

    #[test]
    fn link_validation_and_kinds() {
        assert!(LinkModel::new(vec![vec![1.0, 0.5], vec![0.4, 1.0]], 0.2).is_err());
        assert!(LinkModel::uniform(2, 1.5, 0.2).is_err());
        assert!(LinkModel::uniform(2, 1.0, -1.0).is_err());
        for k in ["reached", "visited", "planned", "selected", "path", "aborted", "idleness"] {
            assert_eq!(k.parse::<MessageKind>().unwrap().as_str(), k);
        }
        assert!(matches!("hello".parse::<MessageKind>(), Err(Error::UnknownMessageKind(_))));
        let line = Message::new(3, 1.5, Payload::Selected { node: NodeId(4), cost: 2.5 }).to_string();
        assert_eq!(line, "1.5\t3\tselected\t4\t2.5");
    }

    #[test]
    fn seeded_determinism() {
        let run = |seed| {
            let mut net = Network::new(LinkModel::uniform(5, 0.3, 0.2).unwrap(), ChaCha8Rng::seed_from_u64(seed));
            (0..200).map(|k| net.broadcast(m((k % 5) as u32, 0), k as f64)).collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
    }
}
