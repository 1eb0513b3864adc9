//! Metric planning on the traversable map.

mod search;
mod session;

use crate::params::Params;
use crate::spatial::Point;

pub use search::{
    escape_point,
    densify, line_of_sight, local_replan, randomized_astar, shortcut, windowed_search, LocalPlan, OrientedBox, Region,
    SearchResult,
};
pub use session::{PathPlanner, PlannerCommand, PlannerOutput, PlannerStatus};

/// Polyline of map points with its Euclidean length.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    waypoints: Vec<Point>,
    length: f64,
}

impl Path {
    pub fn new(waypoints: Vec<Point>) -> Self {
        let length = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Path { waypoints, length }
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// A single-point path: the robot stays where it is.
    /// Distance from `p` to the polyline.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let wp = &self.waypoints;
        if wp.len() == 1 {
            return (wp[0] - p).norm();
        }
        wp.windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let len2 = d.norm_squared();
                let s = if len2 > 0.0 { ((p - w[0]).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (w[0] + d * s - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_degenerate(&self) -> bool {
        self.waypoints.len() < 2
    }

    pub fn first(&self) -> Option<&Point> {
        self.waypoints.first()
    }

    pub fn last(&self) -> Option<&Point> {
        self.waypoints.last()
    }

    /// Length of the tail starting at waypoint `from`.
    pub fn remaining_length(&self, from: usize) -> f64 {
        self.waypoints[from.min(self.waypoints.len())..]
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

/// Weights of the mixed step cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub lambda_z: f64,
    pub lambda_t: f64,
    pub epsilon: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            lambda_z: 2.0,
            lambda_t: 1.0,
            epsilon: 1e-6,
        }
    }
}

/// `omega_1 = lambda_t (trav - min) / (max - min + epsilon) + 1`.
pub fn normalized_traversability(trav: f64, bounds: (f64, f64), w: &CostWeights) -> f64 {
    w.lambda_t * (trav - bounds.0) / (bounds.1 - bounds.0 + w.epsilon) + 1.0
}

/// Cost of stepping from `from` to `to` while heading for `goal`:
/// `(d + h + lambda_z |dz|) * omega_1 * omega_2`.
pub fn mixed_step_cost(
    from: &Point,
    to: &Point,
    goal: &Point,
    trav_to: f64,
    bounds: (f64, f64),
    w: &CostWeights,
    omega2: f64,
) -> f64 {
    let d = (to - from).norm();
    let h = (goal - to).norm();
    let dz = (to.z - from.z).abs();
    (d + h + w.lambda_z * dz) * normalized_traversability(trav_to, bounds, w) * omega2
}

/// Planner configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerParams {
    pub r_b: f64,
    pub max_step: f64,
    pub children: usize,
    pub budget_factor: f64,
    pub weights: CostWeights,
    pub r_l: f64,
    pub l_max: u32,
    pub t_wait: f64,
    /// Attempts of the windowed search, the last one on the full map.
    pub window_attempts: usize,
}

impl From<&Params> for PlannerParams {
    fn from(p: &Params) -> Self {
        PlannerParams {
            r_b: p.r_b,
            max_step: p.max_step,
            children: p.children,
            budget_factor: p.budget_factor,
            weights: CostWeights {
                lambda_z: p.lambda_z,
                lambda_t: p.lambda_t,
                epsilon: p.epsilon,
            },
            r_l: p.r_l,
            l_max: p.l_max,
            t_wait: p.t_wait,
            window_attempts: 4,
        }
    }
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams::from(&Params::default())
    }
}
