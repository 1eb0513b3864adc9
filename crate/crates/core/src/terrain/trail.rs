use crate::spatial::Point;

/// Region a robot is about to sweep: balls of radius `radius` centred along
/// the first part of its path. The first centre is the robot position.
#[derive(Debug, Clone, PartialEq)]
pub struct FutureTrail {
    pub robot: u32,
    pub centers: Vec<Point>,
    pub radius: f64,
}

impl FutureTrail {
    pub fn position(&self) -> &Point {
        &self.centers[0]
    }

    /// Distance from `p` to the surface of the nearest ball, 0 inside.
    pub fn distance(&self, p: &Point) -> f64 {
        self.centers
            .iter()
            .map(|c| ((p - c).norm() - self.radius).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether any ball of the trail intersects `B(center, r)`.
    pub fn intersects_ball(&self, center: &Point, r: f64) -> bool {
        self.centers.iter().any(|c| (c - center).norm() <= r + self.radius)
    }
}

/// Sample `path` every `r_b / 2` starting at `position` and stop at the first
/// sample leaving `B(position, r_c)`. Without a path the trail is the single
/// ball around the robot.
pub fn future_trail(robot: u32, position: Point, path: Option<&[Point]>, r_c: f64, r_b: f64) -> FutureTrail {
    let mut centers = vec![position];
    let step = r_b / 2.0;
    if let Some(path) = path {
        let mut prev = position;
        let mut carried = 0.0;
        let mut cropped = false;
        'walk: for q in path {
            let seg = q - prev;
            let len = seg.norm();
            if len <= 0.0 {
                continue;
            }
            let mut s = step - carried;
            while s <= len {
                let c = prev + seg * (s / len);
                if (c - position).norm() > r_c {
                    cropped = true;
                    break 'walk;
                }
                centers.push(c);
                s += step;
            }
            carried = len - (s - step);
            prev = *q;
        }
        // Close the trail on the final waypoint when the crop was never hit.
        if let Some(last) = path.last() {
            let tail = centers[centers.len() - 1];
            if !cropped && (last - position).norm() <= r_c && (last - tail).norm() > 1e-9 {
                centers.push(*last);
            }
        }
    }
    FutureTrail {
        robot,
        centers,
        radius: r_b,
    }
}
