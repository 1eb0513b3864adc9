//! Plain-text map format: one point per line, `x y z [label]`. Points
//! without a label are classified with [`segment`](super::segment).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spatial::Point;

use super::{segment, Label, SegmentParams, TerrainMap};

pub fn parse_map(text: &str, source: &str, seg: &SegmentParams) -> Result<TerrainMap> {
    let mut points = Vec::new();
    let mut labels: Vec<Option<Label>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&f.len()) {
            return Err(Error::parse(source, lineno + 1, "expected `x y z [label]`"));
        }
        let mut xyz = [0.0; 3];
        for k in 0..3 {
            xyz[k] = f[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(source, lineno + 1, format!("bad number `{}`", f[k])))?;
        }
        points.push(Point::new(xyz[0], xyz[1], xyz[2]));
        labels.push(match f.get(3) {
            None => None,
            Some(s) => Some(
                Label::parse(s)
                    .ok_or_else(|| Error::parse(source, lineno + 1, format!("unknown label `{s}`")))?,
            ),
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyInput("terrain map"));
    }
    if labels.iter().any(Option::is_none) {
        let computed = segment(&points, seg)?;
        for (l, c) in labels.iter_mut().zip(computed) {
            l.get_or_insert(c);
        }
    }
    TerrainMap::from_labeled(points.into_iter().zip(labels.into_iter().flatten()).collect())
}

pub fn write_map(map: &TerrainMap) -> String {
    let mut out = String::with_capacity(map.len() * 32);
    for (p, l) in map.points().iter().zip(map.labels()) {
        let _ = writeln!(out, "{} {} {} {}", p.x, p.y, p.z, l.as_str());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_labeled() {
        let text = "0 0 0 terrain\n1 0 0 ramp # slope\n\n0 1 0.5 wall\n2 2 0 surmountable_obstacle\n";
        let m = parse_map(text, "m", &SegmentParams::default()).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.label(2), Label::Wall);
        let again = parse_map(&write_map(&m), "m2", &SegmentParams::default()).unwrap();
        assert_eq!(again.points(), m.points());
        assert_eq!(again.labels(), m.labels());
    }

    #[test]
    fn unlabeled_points_are_segmented() {
        let mut text = String::new();
        for i in 0..5 {
            for j in 0..5 {
                let _ = writeln!(text, "{} {} 0", i as f64 * 0.1, j as f64 * 0.1);
            }
        }
        text.push_str("9 9 9 wall\n");
        let m = parse_map(&text, "m", &SegmentParams::default()).unwrap();
        assert_eq!(m.label(0), Label::Terrain);
        assert_eq!(m.label(25), Label::Wall);
    }

    #[test]
    fn errors() {
        let seg = SegmentParams::default();
        assert!(matches!(parse_map("1 2\n", "m", &seg), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_map("1 2 3 lava\n", "m", &seg), Err(Error::Parse { .. })));
        assert!(matches!(parse_map("# nothing\n", "m", &seg), Err(Error::EmptyInput(_))));
    }
}
