use nalgebra::{Matrix3, SymmetricEigen, Unit, Vector3};

use crate::spatial::Point;

use super::TerrainMap;

/// `w_L (1 + w_Cl) (1 + w_Dn) (1 + w_Rg)`.
pub fn traversability_cost(w_l: f64, w_cl: f64, w_dn: f64, w_rg: f64) -> f64 {
    w_l * (1.0 + w_cl) * (1.0 + w_dn) * (1.0 + w_rg)
}

/// Least-squares plane through `points`: centroid and unit normal (the
/// eigenvector of the smallest covariance eigenvalue, oriented towards +z).
/// `None` for an empty slice.
pub fn fit_plane<'a>(points: impl IntoIterator<Item = &'a Point> + Clone) -> Option<(Point, Unit<Vector3<f64>>)> {
    let mut n = 0usize;
    let mut sum = Vector3::zeros();
    for p in points.clone() {
        sum += p.coords;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let c = sum / n as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n as f64);
    let mut k = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    let mut normal: Vector3<f64> = eig.eigenvectors.column(k).into();
    if normal.z < 0.0 {
        normal = -normal;
    }
    Some((Point::from(c), Unit::new_normalize(normal)))
}

fn neighbors(map: &TerrainMap, p: &Point, eps: f64) -> Vec<usize> {
    map.index().within(p, eps)
}

/// Median count of other map points within `eps` of each map point.
pub fn median_density(map: &TerrainMap, eps: f64) -> f64 {
    let mut counts: Vec<usize> = map
        .points()
        .iter()
        .map(|p| map.index().count_within(p, eps).saturating_sub(1))
        .collect();
    if counts.is_empty() {
        return 0.0;
    }
    counts.sort_unstable();
    let m = counts.len();
    if m % 2 == 1 {
        counts[m / 2] as f64
    } else {
        (counts[m / 2 - 1] + counts[m / 2]) as f64 / 2.0
    }
}

/// `max(0, 1 - n_eps / n_ref)`. `n_eps` counts the map points within `eps`
/// of `p`, excluding a map point located exactly at `p`.
pub fn density_weight(map: &TerrainMap, p: &Point, eps: f64, n_ref: f64) -> f64 {
    let mut n = 0usize;
    map.index().for_each_within(p, eps, |_, d2| {
        if d2 > 0.0 {
            n += 1;
        }
    });
    density_from_count(n, n_ref)
}

pub(crate) fn density_from_count(n: usize, n_ref: f64) -> f64 {
    if n_ref <= 0.0 {
        return 0.0;
    }
    (1.0 - n as f64 / n_ref).max(0.0)
}

/// Mean absolute plane distance of the neighbours lying farther than one
/// standard deviation of the residuals from the fitted plane, divided by
/// `eps` and capped at 1. Fewer than three neighbours yields 1.
pub fn roughness_weight(map: &TerrainMap, p: &Point, eps: f64) -> f64 {
    let idx = neighbors(map, p, eps);
    roughness_of(idx.iter().map(|&i| map.point(i)), eps)
}

pub(crate) fn roughness_of<'a>(pts: impl Iterator<Item = &'a Point> + Clone, eps: f64) -> f64 {
    if pts.clone().count() < 3 {
        return 1.0;
    }
    let (c, n) = fit_plane(pts.clone()).expect("non-empty");
    let residuals: Vec<f64> = pts.map(|q| (q - c).dot(&n)).collect();
    let sigma = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let mut sum = 0.0;
    let mut k = 0usize;
    for r in &residuals {
        if r.abs() > sigma {
            sum += r.abs();
            k += 1;
        }
    }
    if k == 0 {
        return 0.0;
    }
    (sum / k as f64 / eps).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::Label;

    fn grid(n: usize, step: f64, z: impl Fn(f64, f64) -> f64) -> Vec<Point> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 * step, j as f64 * step);
                v.push(Point::new(x, y, z(x, y)));
            }
        }
        v
    }

    fn map_of(points: Vec<Point>) -> TerrainMap {
        TerrainMap::from_labeled(points.into_iter().map(|p| (p, Label::Terrain)).collect()).unwrap()
    }

    #[test]
    fn cost_examples() {
        assert_eq!(traversability_cost(1.0, 0.0, 0.0, 0.0), 1.0);
        assert_eq!(traversability_cost(2.0, 1.0, 1.0, 1.0), 16.0);
        assert_eq!(traversability_cost(1.5, 0.5, 0.0, 0.0), 2.25);
    }

    #[test]
    fn cost_monotone_and_proportional() {
        let base = traversability_cost(1.0, 0.2, 0.3, 0.4);
        assert!(traversability_cost(1.0, 0.3, 0.3, 0.4) >= base);
        assert!(traversability_cost(1.0, 0.2, 0.5, 0.4) >= base);
        assert!(traversability_cost(1.0, 0.2, 0.3, 0.9) >= base);
        assert!((traversability_cost(3.0, 0.2, 0.3, 0.4) - 3.0 * base).abs() < 1e-12);
    }

    #[test]
    fn density_examples() {
        assert_eq!(density_from_count(12, 10.0), 0.0);
        assert_eq!(density_from_count(0, 10.0), 1.0);
        assert_eq!(density_from_count(5, 10.0), 0.5);

        let m = map_of(grid(10, 0.1, |_, _| 0.0));
        let n_ref = median_density(&m, 0.15);
        // Interior points of a 0.1 m grid have 8 neighbours within 0.15 m.
        assert_eq!(n_ref, 8.0);
        assert_eq!(density_weight(&m, &Point::new(0.5, 0.5, 0.0), 0.15, n_ref), 0.0);
        // A corner has 3 neighbours.
        let corner = density_weight(&m, &Point::new(0.0, 0.0, 0.0), 0.15, n_ref);
        assert!((corner - (1.0 - 3.0 / 8.0)).abs() < 1e-12);
        assert_eq!(density_weight(&m, &Point::new(50.0, 0.0, 0.0), 0.15, n_ref), 1.0);
    }

    #[test]
    fn plane_fit_recovers_incline_normal() {
        let slope = 30f64.to_radians().tan();
        let pts = grid(6, 0.2, |x, _| x * slope);
        let (_, n) = fit_plane(pts.iter()).unwrap();
        // Analytic normal of z = x tan(30 deg).
        let expect = Vector3::new(-slope, 0.0, 1.0).normalize();
        assert!((n.into_inner() - expect).norm() < 1e-9);
    }

    #[test]
    fn roughness_examples() {
        let flat = map_of(grid(7, 0.1, |_, _| 2.0));
        assert_eq!(roughness_weight(&flat, &Point::new(0.3, 0.3, 2.0), 0.3), 0.0);
        let lone = map_of(vec![Point::origin(), Point::new(5.0, 0.0, 0.0)]);
        assert_eq!(roughness_weight(&lone, &Point::origin(), 0.3), 1.0);
    }

    #[test]
    fn roughness_matches_hand_computed_residuals() {
        // Four plane points z=0 spread symmetrically and two spikes at +/-h
        // above the origin.
        // The fitted plane stays z=0 by symmetry, so the residuals are
        // {0,0,0,0,h,-h}, sigma = h/sqrt(3) and the outliers are the spikes.
        let h = 0.06;
        let pts = vec![
            Point::new(0.1, 0.0, 0.0),
            Point::new(-0.1, 0.0, 0.0),
            Point::new(0.0, 0.1, 0.0),
            Point::new(0.0, -0.1, 0.0),
            Point::new(0.0, 0.0, h),
            Point::new(0.0, 0.0, -h),
        ];
        let m = map_of(pts);
        let eps = 0.3;
        let w = roughness_weight(&m, &Point::origin(), eps);
        let sigma = (2.0 * h * h / 6.0f64).sqrt();
        assert!(h > sigma);
        assert!((w - h / eps).abs() < 1e-9, "{w}");
    }
}
