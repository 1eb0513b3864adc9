//! Static 3D kd-tree for fixed-radius and nearest-neighbour queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

pub type Point = Point3<f64>;

const LEAF_SIZE: usize = 8;

/// Implicit kd-tree over a point set. Indices returned by queries refer to the
/// order of the points passed to [`KdTree::new`].
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    order: Vec<usize>,
}

impl KdTree {
    pub fn new(points: Vec<Point>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(&points, &mut order, 0);
        KdTree { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    /// Indices of all points within `radius` of `center` (inclusive), sorted ascending.
    pub fn within(&self, center: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(center, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Number of points within `radius` of `center`.
    pub fn count_within(&self, center: &Point, radius: f64) -> usize {
        let mut n = 0;
        self.for_each_within(center, radius, |_, _| n += 1);
        n
    }

    /// Visit every point within `radius` with its squared distance. Visiting
    /// order is deterministic but unspecified.
    pub fn for_each_within(&self, center: &Point, radius: f64, mut f: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        self.within_rec(0, self.order.len(), 0, center, r2, &mut f);
    }

    fn within_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        c: &Point,
        r2: f64,
        f: &mut impl FnMut(usize, f64),
    ) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                let d2 = (self.points[i] - c).norm_squared();
                if d2 <= r2 {
                    f(i, d2);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = depth % 3;
        let pi = self.order[mid];
        let p = &self.points[pi];
        let d2 = (p - c).norm_squared();
        if d2 <= r2 {
            f(pi, d2);
        }
        let diff = c[axis] - p[axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.within_rec(near.0, near.1, depth + 1, c, r2, f);
        if diff * diff <= r2 {
            self.within_rec(far.0, far.1, depth + 1, c, r2, f);
        }
    }

    /// Nearest point and its distance. Ties resolve to the lowest index.
    pub fn nearest(&self, center: &Point) -> Option<(usize, f64)> {
        self.nearest_filtered(center, f64::INFINITY, |_| true)
    }

    /// Nearest point accepted by `keep` within `max_dist`.
    pub fn nearest_filtered(
        &self,
        center: &Point,
        max_dist: f64,
        keep: impl Fn(usize) -> bool,
    ) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_d2 = if max_dist.is_finite() {
            max_dist * max_dist
        } else {
            f64::INFINITY
        };
        self.nearest_rec(0, self.order.len(), 0, center, &keep, &mut best, &mut best_d2);
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    #[allow(clippy::too_many_arguments)]
    fn nearest_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        c: &Point,
        keep: &impl Fn(usize) -> bool,
        best: &mut Option<(usize, f64)>,
        best_d2: &mut f64,
    ) {
        let consider = |i: usize, best: &mut Option<(usize, f64)>, best_d2: &mut f64| {
            let d2 = (self.points[i] - c).norm_squared();
            let better = match best {
                None => d2 <= *best_d2,
                Some((bi, bd2)) => d2 < *bd2 || (d2 == *bd2 && i < *bi),
            };
            if better && keep(i) {
                *best = Some((i, d2));
                *best_d2 = d2;
            }
        };
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                consider(i, best, best_d2);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = depth % 3;
        let pi = self.order[mid];
        consider(pi, best, best_d2);
        let diff = c[axis] - self.points[pi][axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(near.0, near.1, depth + 1, c, keep, best, best_d2);
        if diff * diff <= *best_d2 {
            self.nearest_rec(far.0, far.1, depth + 1, c, keep, best, best_d2);
        }
    }

    /// The `k` nearest points sorted by (distance, index).
    pub fn k_nearest(&self, center: &Point, k: usize) -> Vec<(usize, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, self.order.len(), 0, center, k, &mut heap);
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|c| (c.i, c.d2.sqrt())).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn knn_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        c: &Point,
        k: usize,
        heap: &mut BinaryHeap<Cand>,
    ) {
        let push = |i: usize, heap: &mut BinaryHeap<Cand>| {
            let cand = Cand {
                d2: (self.points[i] - c).norm_squared(),
                i,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().unwrap() {
                heap.pop();
                heap.push(cand);
            }
        };
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                push(i, heap);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = depth % 3;
        let pi = self.order[mid];
        push(pi, heap);
        let diff = c[axis] - self.points[pi][axis];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, depth + 1, c, k, heap);
        if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
            self.knn_rec(far.0, far.1, depth + 1, c, k, heap);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    d2: f64,
    i: usize,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.i.cmp(&other.i))
    }
}

fn build(points: &[Point], order: &mut [usize], depth: usize) {
    if order.len() <= LEAF_SIZE {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .total_cmp(&points[b][axis])
            .then(a.cmp(&b))
    });
    let (left, rest) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut rest[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_within(points: &[Point], c: &Point, r: f64) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| (points[i] - c).norm_squared() <= r * r)
            .collect()
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::new(vec![]);
        assert!(t.nearest(&Point::origin()).is_none());
        assert!(t.within(&Point::origin(), 10.0).is_empty());
        assert!(t.k_nearest(&Point::origin(), 3).is_empty());
    }

    #[test]
    fn nearest_on_grid() {
        let pts: Vec<Point> = (0..10)
            .flat_map(|i| (0..10).map(move |j| Point::new(i as f64, j as f64, 0.0)))
            .collect();
        let t = KdTree::new(pts.clone());
        let (i, d) = t.nearest(&Point::new(3.2, 6.9, 0.0)).unwrap();
        assert_eq!(pts[i], Point::new(3.0, 7.0, 0.0));
        assert!((d - (0.04f64 + 0.01).sqrt()).abs() < 1e-12);
        let boundary = t.within(&Point::new(5.0, 5.0, 0.0), 1.0);
        assert_eq!(boundary.len(), 5);
    }

    proptest! {
        #[test]
        fn queries_match_brute_force(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -1.0f64..1.0), 1..200),
            q in (-6.0f64..6.0, -6.0f64..6.0, -1.5f64..1.5),
            r in 0.0f64..4.0,
            k in 1usize..12,
        ) {
            let pts: Vec<Point> = raw.iter().map(|&(x, y, z)| Point::new(x, y, z)).collect();
            let t = KdTree::new(pts.clone());
            let c = Point::new(q.0, q.1, q.2);
            prop_assert_eq!(t.within(&c, r), brute_within(&pts, &c, r));
            prop_assert_eq!(t.count_within(&c, r), brute_within(&pts, &c, r).len());

            let mut all: Vec<(usize, f64)> =
                (0..pts.len()).map(|i| (i, (pts[i] - c).norm())).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let (ni, nd) = t.nearest(&c).unwrap();
            prop_assert_eq!(ni, all[0].0);
            prop_assert!((nd - all[0].1).abs() < 1e-12);
            let knn: Vec<usize> = t.k_nearest(&c, k).into_iter().map(|x| x.0).collect();
            let expect: Vec<usize> = all.iter().take(k).map(|x| x.0).collect();
            prop_assert_eq!(knn, expect);
        }
    }
}
