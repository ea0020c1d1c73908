use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// One point per line, three whitespace-separated numbers. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 values, found {}", fields.len())));
        }
        let mut p = [0.0; 3];
        for (c, f) in p.iter_mut().zip(&fields) {
            *c = f
                .parse::<f64>()
                .map_err(|_| parse_err(format!("`{f}` is not a number")))?;
            if !c.is_finite() {
                return Err(parse_err(format!("non-finite value `{f}`")));
            }
        }
        points.push(p);
    }
    PointCloud::new(points)
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_xyz(&fs::read_to_string(path)?)
}

/// Nine significant digits per coordinate.
pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for p in cloud.points() {
        out.push_str(&format!("{:.8e} {:.8e} {:.8e}\n", p[0], p[1], p[2]));
    }
    out
}

pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    fs::write(path, format_xyz(cloud))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_simple_file() {
        let c = parse_xyz("0 0 0\n1 2 3\n").unwrap();
        assert_eq!(c.points(), &[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]);
        let c = parse_xyz("# header\n\n  1 2 3  \n").unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn reports_line_numbers() {
        match parse_xyz("a b c\n") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_xyz("0 0 0\n# c\n1 2\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_xyz("1 nan 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_xyz("").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(pts in proptest::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..40)) {
            let cloud = PointCloud::new(pts).unwrap();
            let back = parse_xyz(&format_xyz(&cloud)).unwrap();
            for (a, b) in cloud.points().iter().zip(back.points()) {
                for k in 0..3 {
                    prop_assert!((a[k] - b[k]).abs() <= 1e-9);
                }
            }
        }
    }
}
