use crate::error::{Error, Result};
use crate::spatial::{KdTree, Point};

use super::features::fit_plane;
use super::Label;

#[derive(Debug, Clone)]
pub struct SegmentParams {
    /// Neighbours used for the normal estimate (including the point itself).
    pub k_nn: usize,
    /// Normals tilted more than this from vertical are walls, rad.
    pub wall_angle: f64,
    /// Normals tilted more than this (and not walls) are ramps, rad.
    pub ramp_angle: f64,
    /// Steep clusters no higher than this above the local ground are
    /// surmountable, m.
    pub step_height: f64,
    /// Radius of the local ground fit and of the steep cluster, m.
    pub local_radius: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            k_nn: 10,
            wall_angle: 60f64.to_radians(),
            ramp_angle: 20f64.to_radians(),
            step_height: 0.15,
            local_radius: 0.5,
        }
    }
}

/// Label a point cloud from k-NN plane-fit normals.
///
/// Steep points sitting no more than `step_height` above a plane fitted to
/// the surrounding terrain points, with no steep neighbour higher than that,
/// become surmountable obstacles.
pub fn segment(points: &[Point], params: &SegmentParams) -> Result<Vec<Label>> {
    if params.k_nn < 3 || points.len() < params.k_nn {
        return Err(Error::NotEnoughPoints {
            needed: params.k_nn.max(3),
            available: points.len(),
        });
    }
    let tree = KdTree::new(points.to_vec());
    let mut labels: Vec<Label> = points
        .iter()
        .map(|p| {
            let nn = tree.k_nearest(p, params.k_nn);
            let (_, n) = fit_plane(nn.iter().map(|&(i, _)| tree.point(i))).expect("k_nn >= 3");
            let tilt = n.z.abs().min(1.0).acos();
            if tilt > params.wall_angle {
                Label::Wall
            } else if tilt > params.ramp_angle {
                Label::Ramp
            } else {
                Label::Terrain
            }
        })
        .collect();

    let mut surmountable = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if labels[i] != Label::Wall {
            continue;
        }
        let near = tree.within(p, params.local_radius);
        let ground: Vec<&Point> = near
            .iter()
            .filter(|&&j| labels[j] == Label::Terrain)
            .map(|&j| tree.point(j))
            .collect();
        if ground.len() < 3 {
            continue;
        }
        let (c, n) = fit_plane(ground.iter().copied()).expect("non-empty");
        let low = near
            .iter()
            .filter(|&&j| labels[j] == Label::Wall)
            .all(|&j| (tree.point(j) - c).dot(&n) <= params.step_height);
        if low {
            surmountable.push(i);
        }
    }
    for i in surmountable {
        labels[i] = Label::SurmountableObstacle;
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize, step: f64, f: impl Fn(f64, f64) -> Point) -> Vec<Point> {
        let mut v = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                v.push(f(i as f64 * step, j as f64 * step));
            }
        }
        v
    }

    #[test]
    fn flat_plane_is_terrain() {
        let pts = grid(10, 10, 0.1, |x, y| Point::new(x, y, 0.0));
        let labels = segment(&pts, &SegmentParams::default()).unwrap();
        assert!(labels.iter().all(|l| *l == Label::Terrain));
    }

    #[test]
    fn vertical_plane_is_wall() {
        let pts = grid(10, 10, 0.1, |x, z| Point::new(x, 0.0, z));
        let labels = segment(&pts, &SegmentParams::default()).unwrap();
        assert!(labels.iter().all(|l| *l == Label::Wall));
    }

    #[test]
    fn thirty_degree_incline_is_ramp() {
        let slope = 30f64.to_radians().tan();
        let pts = grid(10, 10, 0.1, |x, y| Point::new(x, y, x * slope));
        let labels = segment(&pts, &SegmentParams::default()).unwrap();
        assert!(labels.iter().all(|l| *l == Label::Ramp));
    }

    #[test]
    fn low_step_is_surmountable_and_tall_wall_is_not() {
        let mut pts = grid(20, 20, 0.1, |x, y| Point::new(x, y, 0.0));
        // A 0.1 m curb face along x = 1.05 and a 1 m wall face along x = 0.25.
        for j in 0..20 {
            let y = j as f64 * 0.1;
            for k in 0..3 {
                pts.push(Point::new(1.05, y, 0.05 * k as f64 + 0.02));
            }
            for k in 0..11 {
                pts.push(Point::new(0.25, y, 0.1 * k as f64 + 0.02));
            }
        }
        let labels = segment(&pts, &SegmentParams::default()).unwrap();
        let at = |x: f64, z_min: f64| {
            pts.iter()
                .zip(&labels)
                .filter(|(p, _)| (p.x - x).abs() < 1e-9 && p.z > z_min && p.y > 0.5 && p.y < 1.5)
                .map(|(_, l)| *l)
                .collect::<Vec<_>>()
        };
        assert!(at(1.05, 0.0).iter().all(|l| *l == Label::SurmountableObstacle), "{:?}", at(1.05, 0.0));
        // The foot of the wall blends into the ground fit.
        assert!(at(0.25, 0.1).iter().all(|l| *l == Label::Wall), "{:?}", at(0.25, 0.1));
    }

    #[test]
    fn too_few_points() {
        let pts = vec![Point::origin(); 4];
        assert!(matches!(
            segment(&pts, &SegmentParams::default()),
            Err(Error::NotEnoughPoints { needed: 10, available: 4 })
        ));
    }
}
