//! Labelled point-cloud terrain and multi-robot traversability.
//!
//! A [`TerrainMap`] is immutable after load. [`Traversability`] caches the
//! per-point static terms (label weight, density, roughness, wall clearance)
//! once per map; each replan then only patches the points near teammate
//! trails and sensed robots when building a [`TraversableMap`].

mod features;
mod io;
mod segment;
mod traversable;
mod trail;

use crate::error::{Error, Result};
use crate::spatial::{KdTree, Point};

pub use features::{
    density_weight, fit_plane, median_density, roughness_weight, traversability_cost,
};
pub use io::{parse_map, write_map};
pub use segment::{segment, SegmentParams};
pub use traversable::{
    build_traversable_map, clearance_penalty, multi_robot_clearance, LabelWeights,
    Traversability, TraversableMap,
};
pub use trail::{future_trail, FutureTrail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Wall,
    Terrain,
    SurmountableObstacle,
    Ramp,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Wall => "wall",
            Label::Terrain => "terrain",
            Label::SurmountableObstacle => "surmountable_obstacle",
            Label::Ramp => "ramp",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "wall" => Some(Label::Wall),
            "terrain" => Some(Label::Terrain),
            "surmountable_obstacle" | "surmountable" | "obstacle" => {
                Some(Label::SurmountableObstacle)
            }
            "ramp" | "stairs" => Some(Label::Ramp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TerrainMap {
    labels: Vec<Label>,
    index: KdTree,
    walls: KdTree,
}

impl TerrainMap {
    pub fn from_labeled(points: Vec<(Point, Label)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("terrain map"));
        }
        let (pts, labels): (Vec<Point>, Vec<Label>) = points.into_iter().unzip();
        let walls = pts
            .iter()
            .zip(&labels)
            .filter(|(_, l)| **l == Label::Wall)
            .map(|(p, _)| *p)
            .collect();
        Ok(TerrainMap {
            labels,
            index: KdTree::new(pts),
            walls: KdTree::new(walls),
        })
    }

    /// Label an unlabelled cloud with [`segment`].
    pub fn from_points(points: Vec<Point>, params: &SegmentParams) -> Result<Self> {
        let labels = segment(&points, params)?;
        Self::from_labeled(points.into_iter().zip(labels).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        self.index.points()
    }

    pub fn point(&self, i: usize) -> &Point {
        self.index.point(i)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn index(&self) -> &KdTree {
        &self.index
    }

    /// Spatial index over the wall-labelled points only.
    pub fn walls(&self) -> &KdTree {
        &self.walls
    }

    /// Distance to the nearest wall point (infinite without walls).
    pub fn wall_clearance(&self, p: &Point) -> f64 {
        self.walls.nearest(p).map_or(f64::INFINITY, |(_, d)| d)
    }
}
