use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::spatial::Point;

use super::features::{density_from_count, median_density, roughness_of};
use super::{FutureTrail, Label, TerrainMap};

/// Per-label base weight `w_L`. Walls have none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelWeights {
    pub terrain: f64,
    pub ramp: f64,
    pub surmountable: f64,
}

impl Default for LabelWeights {
    fn default() -> Self {
        LabelWeights {
            terrain: 1.0,
            ramp: 1.5,
            surmountable: 2.0,
        }
    }
}

impl LabelWeights {
    pub fn weight(&self, label: Label) -> Option<f64> {
        match label {
            Label::Wall => None,
            Label::Terrain => Some(self.terrain),
            Label::Ramp => Some(self.ramp),
            Label::SurmountableObstacle => Some(self.surmountable),
        }
    }
}

/// `max(0, (D_s - gamma) / D_s)`.
pub fn clearance_penalty(gamma: f64, d_s: f64) -> f64 {
    ((d_s - gamma) / d_s).max(0.0)
}

/// Clearance of `p` from walls, `dynamic` obstacle points and the teammate
/// trails that reach into `B(self_pos, r_t)`. Brute force over trails.
pub fn multi_robot_clearance(
    p: &Point,
    map: &TerrainMap,
    dynamic: &[Point],
    trails: &[FutureTrail],
    self_pos: &Point,
    r_t: f64,
) -> f64 {
    let mut gamma = map.wall_clearance(p);
    for q in dynamic {
        gamma = gamma.min((p - q).norm());
    }
    for t in trails.iter().filter(|t| t.intersects_ball(self_pos, r_t)) {
        gamma = gamma.min(t.distance(p));
    }
    gamma
}

/// Static traversability terms of one map, computed once and shared by every
/// planner working on that map.
#[derive(Debug)]
pub struct Traversability {
    map: Arc<TerrainMap>,
    d_s: f64,
    exclusion: f64,
    r_t: f64,
    n_ref: f64,
    static_clearance: Vec<f64>,
    /// `w_L (1 + w_Dn) (1 + w_Rg)`; NaN for walls.
    static_factor: Vec<f64>,
}

impl Traversability {
    pub fn new(map: Arc<TerrainMap>, params: &Params) -> Self {
        Self::with_weights(map, params, LabelWeights::default())
    }

    pub fn with_weights(map: Arc<TerrainMap>, params: &Params, weights: LabelWeights) -> Self {
        let eps = params.eps;
        let n_ref = median_density(&map, eps);
        let mut static_clearance = Vec::with_capacity(map.len());
        let mut static_factor = Vec::with_capacity(map.len());
        for (i, p) in map.points().iter().enumerate() {
            static_clearance.push(map.wall_clearance(p));
            match weights.weight(map.label(i)) {
                None => static_factor.push(f64::NAN),
                Some(w_l) => {
                    let near = map.index().within(p, eps);
                    let w_dn = density_from_count(near.len() - 1, n_ref);
                    let w_rg = roughness_of(near.iter().map(|&j| map.point(j)), eps);
                    static_factor.push(w_l * (1.0 + w_dn) * (1.0 + w_rg));
                }
            }
        }
        Traversability {
            map,
            d_s: params.d_s,
            exclusion: params.exclusion(),
            r_t: params.r_t,
            n_ref,
            static_clearance,
            static_factor,
        }
    }

    pub fn map(&self) -> &Arc<TerrainMap> {
        &self.map
    }

    pub fn exclusion(&self) -> f64 {
        self.exclusion
    }

    /// Median neighbour count used as the density reference.
    pub fn reference_density(&self) -> f64 {
        self.n_ref
    }

    pub fn static_clearance(&self, i: usize) -> f64 {
        self.static_clearance[i]
    }

    /// Traversability cost of map point `i` for a given clearance. `None` for walls.
    pub fn cost_at(&self, i: usize, clearance: f64) -> Option<f64> {
        let f = self.static_factor[i];
        (!f.is_nan()).then(|| f * (1.0 + clearance_penalty(clearance, self.d_s)))
    }

    /// Build the multi-robot traversable map for a robot at `self_pos`.
    ///
    /// `trails` are teammate trails; those not reaching `B(self_pos, R_t)`
    /// are ignored. `dynamic` are recently sensed obstacle points that are not
    /// part of the map.
    pub fn build(&self, trails: &[FutureTrail], self_pos: &Point, dynamic: &[Point]) -> Result<TraversableMap> {
        let mut clearance = self.static_clearance.clone();
        // Points farther than this from every extra obstacle keep a zero
        // penalty and an unchanged membership, so they need no update.
        let reach = self.d_s.max(self.exclusion);
        let index = self.map.index();
        for q in dynamic {
            index.for_each_within(q, reach, |i, d2| {
                let d = d2.sqrt();
                if d < clearance[i] {
                    clearance[i] = d;
                }
            });
        }
        for t in trails.iter().filter(|t| t.intersects_ball(self_pos, self.r_t)) {
            for c in &t.centers {
                index.for_each_within(c, t.radius + reach, |i, _| {
                    let d = ((self.map.point(i) - c).norm() - t.radius).max(0.0);
                    if d < clearance[i] {
                        clearance[i] = d;
                    }
                });
            }
        }
        let mut cost = vec![f64::INFINITY; clearance.len()];
        let mut count = 0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..clearance.len() {
            if clearance[i] <= self.exclusion {
                continue;
            }
            if let Some(c) = self.cost_at(i, clearance[i]) {
                cost[i] = c;
                count += 1;
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
        if count == 0 {
            return Err(Error::EmptyTraversableMap);
        }
        Ok(TraversableMap {
            map: Arc::clone(&self.map),
            clearance,
            cost,
            count,
            bounds: (lo, hi),
            generation: 0,
        })
    }
}

/// Build a traversable map from scratch. Convenience wrapper over
/// [`Traversability`] for one-off use.
pub fn build_traversable_map(
    map: &Arc<TerrainMap>,
    trails: &[FutureTrail],
    self_pos: &Point,
    params: &Params,
) -> Result<TraversableMap> {
    Traversability::new(Arc::clone(map), params).build(trails, self_pos, &[])
}

/// The subset of map points a robot may stand on, with their costs.
#[derive(Debug, Clone)]
pub struct TraversableMap {
    map: Arc<TerrainMap>,
    clearance: Vec<f64>,
    cost: Vec<f64>,
    count: usize,
    bounds: (f64, f64),
    generation: u64,
}

impl TraversableMap {
    pub fn map(&self) -> &Arc<TerrainMap> {
        &self.map
    }

    pub fn contains(&self, i: usize) -> bool {
        self.cost[i].is_finite()
    }

    /// Number of traversable points.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Map indices of the traversable points, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cost.len()).filter(|&i| self.contains(i))
    }

    pub fn cost(&self, i: usize) -> f64 {
        self.cost[i]
    }

    pub fn clearance(&self, i: usize) -> f64 {
        self.clearance[i]
    }

    /// Minimum and maximum cost over the traversable points.
    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn with_generation(mut self, generation: u64) -> Self {
        self.generation = generation;
        self
    }

    /// Nearest traversable point within `max_dist` accepted by `keep`.
    pub fn nearest(&self, p: &Point, max_dist: f64, keep: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        self.map
            .index()
            .nearest_filtered(p, max_dist, |i| self.contains(i) && keep(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::future_trail;

    /// 1 m wide corridor along x, walls on both sides, 0.1 m spacing.
    fn corridor() -> Arc<TerrainMap> {
        let mut pts = Vec::new();
        for i in 0..60 {
            let x = i as f64 * 0.1;
            for j in -5..=5 {
                let y = j as f64 * 0.1;
                pts.push((Point::new(x, y, 0.0), Label::Terrain));
            }
            for y in [-1.2, 1.2] {
                pts.push((Point::new(x, y, 0.2), Label::Wall));
            }
        }
        Arc::new(TerrainMap::from_labeled(pts).unwrap())
    }

    fn brute_member(map: &TerrainMap, trails: &[FutureTrail], self_pos: &Point, params: &Params) -> Vec<bool> {
        (0..map.len())
            .map(|i| {
                if map.label(i) == Label::Wall {
                    return false;
                }
                let p = map.point(i);
                let mut g = f64::INFINITY;
                for (j, q) in map.points().iter().enumerate() {
                    if map.label(j) == Label::Wall {
                        g = g.min((p - q).norm());
                    }
                }
                for t in trails {
                    if t.centers.iter().any(|c| (c - self_pos).norm() <= params.r_t + t.radius) {
                        for c in &t.centers {
                            g = g.min(((p - c).norm() - t.radius).max(0.0));
                        }
                    }
                }
                g > params.exclusion()
            })
            .collect()
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(clearance_penalty(f64::INFINITY, 1.2), 0.0);
        assert_eq!(clearance_penalty(0.0, 1.2), 1.0);
        assert_eq!(clearance_penalty(0.6, 1.2), 0.5);
        assert_eq!(clearance_penalty(3.0, 1.2), 0.0);
    }

    #[test]
    fn clearance_examples() {
        let map = corridor();
        let p = Point::new(3.0, 0.0, 0.0);
        let alone = multi_robot_clearance(&p, &map, &[], &[], &p, 1.5);
        assert!((alone - (1.2f64.powi(2) + 0.04).sqrt()).abs() < 1e-9);
        let t = future_trail(1, p, None, 1.5, 0.47);
        assert_eq!(multi_robot_clearance(&p, &map, &[], std::slice::from_ref(&t), &p, 1.5), 0.0);
        let far = Point::new(0.0, 0.0, 0.0);
        assert_eq!(multi_robot_clearance(&far, &map, &[], &[t], &Point::new(0.5, 0.0, 0.0), 1.5), alone);
    }

    #[test]
    fn no_teammates_keeps_clear_non_walls() {
        let map = corridor();
        let params = Params::default();
        let tm = build_traversable_map(&map, &[], &Point::new(1.0, 0.0, 0.0), &params).unwrap();
        let expect = brute_member(&map, &[], &Point::origin(), &params);
        for i in 0..map.len() {
            assert_eq!(tm.contains(i), expect[i], "{i}");
            if tm.contains(i) {
                assert!(tm.cost(i) >= 1.0);
            }
        }
        assert!(tm.indices().all(|i| map.label(i) != Label::Wall));
    }

    #[test]
    fn trail_across_corridor_repels() {
        let map = corridor();
        let params = Params::default();
        let me = Point::new(1.0, 0.0, 0.0);
        let mate = Point::new(2.0, -0.5, 0.0);
        let path = [Point::new(2.0, 0.5, 0.0)];
        let t = future_trail(1, mate, Some(&path), params.r_c, params.r_b);
        let tm = build_traversable_map(&map, std::slice::from_ref(&t), &me, &params).unwrap();
        let expect = brute_member(&map, std::slice::from_ref(&t), &me, &params);
        for i in 0..map.len() {
            assert_eq!(tm.contains(i), expect[i]);
        }
        // Nothing traversable across the corridor at x = 2.
        assert!(tm.indices().all(|i| (map.point(i).x - 2.0).abs() > 0.6));

        // Far from the robot the trail has no effect.
        let far = build_traversable_map(&map, &[t], &Point::new(5.9, 0.0, 0.0), &params).unwrap();
        let alone = build_traversable_map(&map, &[], &Point::new(5.9, 0.0, 0.0), &params).unwrap();
        assert_eq!(far.indices().collect::<Vec<_>>(), alone.indices().collect::<Vec<_>>());
    }

    #[test]
    fn trail_order_does_not_matter() {
        let map = corridor();
        let params = Params::default();
        let me = Point::new(3.0, 0.0, 0.0);
        let a = future_trail(1, Point::new(2.5, 0.4, 0.0), None, 1.5, 0.47);
        let b = future_trail(2, Point::new(3.5, -0.4, 0.0), Some(&[Point::new(4.5, -0.4, 0.0)]), 1.5, 0.47);
        let ab = build_traversable_map(&map, &[a.clone(), b.clone()], &me, &params).unwrap();
        let ba = build_traversable_map(&map, &[b, a], &me, &params).unwrap();
        for i in 0..map.len() {
            assert_eq!(ab.cost(i).to_bits(), ba.cost(i).to_bits());
        }
    }

    #[test]
    fn enclosed_robot_errors() {
        let map = corridor();
        let mut params = Params::default();
        params.d_s = 10.0;
        params.r_t = 10.0;
        assert!(matches!(
            build_traversable_map(&map, &[], &Point::origin(), &params),
            Err(Error::EmptyTraversableMap)
        ));
    }
}
