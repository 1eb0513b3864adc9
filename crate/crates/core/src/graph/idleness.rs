use crate::error::{Error, Result};

use super::{NodeId, PatrollingGraph};

/// Last visit of one node, the state behind its instantaneous idleness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeIdlenessRecord {
    pub node_id: NodeId,
    pub last_visit_time: f64,
    pub priority: f64,
}

impl NodeIdlenessRecord {
    pub fn new(node_id: NodeId, priority: f64, t0: f64) -> Self {
        NodeIdlenessRecord {
            node_id,
            last_visit_time: t0,
            priority,
        }
    }

    pub fn visit(&mut self, t: f64) {
        if t > self.last_visit_time {
            self.last_visit_time = t;
        }
    }
}

/// `w * (t - t_l)`. Errors on clock regression.
pub fn instantaneous_idleness(record: &NodeIdlenessRecord, t: f64) -> Result<f64> {
    if t < record.last_visit_time {
        return Err(Error::ClockRegression {
            t,
            last_visit: record.last_visit_time,
        });
    }
    Ok(record.priority * (t - record.last_visit_time))
}

/// Mean of the per-node average idleness values.
pub fn graph_average_idleness(graph: &PatrollingGraph, per_node_averages: &[f64]) -> Result<f64> {
    if per_node_averages.len() != graph.len() {
        return Err(Error::LengthMismatch {
            expected: graph.len(),
            actual: per_node_averages.len(),
        });
    }
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(per_node_averages.iter().sum::<f64>() / graph.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdlenessSample {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub avg: f64,
    pub std: f64,
    pub max: f64,
}

/// Average, standard deviation and maximum of uniformly sampled idleness
/// over `[start, end]`.
///
/// With a uniform sampling period the left Riemann sums of the window
/// integrals reduce to sample means, so the period cancels out.
pub fn window_idleness_stats(samples: &[IdlenessSample], start: f64, end: f64) -> Result<WindowStats> {
    let inside = samples.iter().filter(|s| s.t >= start && s.t <= end);
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    for s in inside.clone() {
        n += 1;
        sum += s.value;
        max = max.max(s.value);
    }
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    let avg = sum / n as f64;
    let var = inside.map(|s| (s.value - avg) * (s.value - avg)).sum::<f64>() / n as f64;
    Ok(WindowStats {
        avg,
        std: var.sqrt(),
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::path_graph;
    use proptest::prelude::*;

    fn rec(w: f64, tl: f64) -> NodeIdlenessRecord {
        NodeIdlenessRecord {
            node_id: NodeId(0),
            last_visit_time: tl,
            priority: w,
        }
    }

    #[test]
    fn instantaneous() {
        assert_eq!(instantaneous_idleness(&rec(1.0, 10.0), 25.0).unwrap(), 15.0);
        assert_eq!(instantaneous_idleness(&rec(1.0, 25.0), 25.0).unwrap(), 0.0);
        assert_eq!(instantaneous_idleness(&rec(2.0, 10.0), 25.0).unwrap(), 30.0);
        assert!(matches!(
            instantaneous_idleness(&rec(1.0, 10.0), 9.0),
            Err(Error::ClockRegression { .. })
        ));
    }

    #[test]
    fn zeroing_then_linear_growth() {
        let mut r = NodeIdlenessRecord::new(NodeId(3), 1.5, 0.0);
        r.visit(40.0);
        assert_eq!(instantaneous_idleness(&r, 40.0).unwrap(), 0.0);
        for k in 1..10 {
            let t = 40.0 + k as f64;
            assert_eq!(instantaneous_idleness(&r, t).unwrap(), 1.5 * k as f64);
        }
        r.visit(30.0);
        assert_eq!(r.last_visit_time, 40.0);
    }

    #[test]
    fn graph_average() {
        assert_eq!(graph_average_idleness(&path_graph(3, 1.0), &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(
            graph_average_idleness(&path_graph(3, 1.0), &[10.0, 20.0, 30.0]).unwrap(),
            20.0
        );
        assert_eq!(graph_average_idleness(&path_graph(1, 1.0), &[7.5]).unwrap(), 7.5);
        assert!(matches!(
            graph_average_idleness(&path_graph(3, 1.0), &[1.0]),
            Err(Error::LengthMismatch { expected: 3, actual: 1 })
        ));
    }

    fn samples(values: &[f64]) -> Vec<IdlenessSample> {
        values
            .iter()
            .enumerate()
            .map(|(k, &v)| IdlenessSample { t: k as f64 * 5.0, value: v })
            .collect()
    }

    #[test]
    fn window_stats_examples() {
        let s = window_idleness_stats(&samples(&[5.0; 8]), 0.0, 35.0).unwrap();
        assert_eq!((s.avg, s.std, s.max), (5.0, 0.0, 5.0));

        // Independent recomputation of the discrete sums for {0, 1, 2, 3, 4}.
        let values = [0.0, 1.0, 2.0, 3.0, 4.0];
        let mean = (0.0 + 1.0 + 2.0 + 3.0 + 4.0) / 5.0;
        let var = ((0.0f64 - mean).powi(2)
            + (1.0f64 - mean).powi(2)
            + (2.0f64 - mean).powi(2)
            + (3.0f64 - mean).powi(2)
            + (4.0f64 - mean).powi(2))
            / 5.0;
        let s = window_idleness_stats(&samples(&values), 0.0, 20.0).unwrap();
        assert_eq!(s.avg, 2.0);
        assert_eq!(s.std, var.sqrt());
        assert_eq!(s.std, 2f64.sqrt());
        assert_eq!(s.max, 4.0);

        let s = window_idleness_stats(&samples(&[3.0]), 0.0, 0.0).unwrap();
        assert_eq!((s.avg, s.std, s.max), (3.0, 0.0, 3.0));

        assert!(matches!(
            window_idleness_stats(&samples(&[1.0, 2.0]), 100.0, 200.0),
            Err(Error::EmptyWindow)
        ));
    }

    #[test]
    fn window_excludes_outside_samples() {
        let s = window_idleness_stats(&samples(&[100.0, 1.0, 3.0, 100.0]), 5.0, 10.0).unwrap();
        assert_eq!((s.avg, s.max), (2.0, 3.0));
    }

    proptest! {
        #[test]
        fn window_stats_match_brute_force(
            values in prop::collection::vec(0.0f64..1000.0, 1..100),
            lo in 0usize..50,
            width in 0usize..60,
        ) {
            let s = samples(&values);
            let hi = (lo + width).min(values.len().saturating_sub(1));
            prop_assume!(lo < values.len());
            let got = window_idleness_stats(&s, lo as f64 * 5.0, hi as f64 * 5.0).unwrap();
            let slice = &values[lo..=hi];
            let n = slice.len() as f64;
            let mut sum = 0.0;
            for v in slice { sum += v; }
            let avg = sum / n;
            let mut sq = 0.0;
            for v in slice { sq += (v - avg) * (v - avg); }
            let max = slice.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(got.avg, avg);
            prop_assert_eq!(got.std, (sq / n).sqrt());
            prop_assert_eq!(got.max, max);
        }

        #[test]
        fn average_is_order_invariant(mut v in prop::collection::vec(0.0f64..1e4, 1..40), seed in any::<u64>()) {
            let g = path_graph(v.len() as u32, 1.0);
            let a = graph_average_idleness(&g, &v).unwrap();
            // deterministic shuffle
            let mut s = seed;
            for i in (1..v.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                v.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = graph_average_idleness(&g, &v).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
