use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;

/// Parses an OFF mesh. Polygons are fan-triangulated; zero-area triangles
/// are dropped and counted in the second return value.
pub fn parse_off(text: &str) -> Result<(TriangleMesh, usize)> {
    // (1-based line number, tokens) of every non-empty, non-comment line
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
    });

    let (hline, mut header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing OFF header".into(),
    })?;
    if header.first() != Some(&"OFF") {
        return Err(Error::Parse {
            line: hline,
            msg: "missing OFF header".into(),
        });
    }
    header.remove(0);
    let (cline, counts) = if header.is_empty() {
        lines.next().ok_or(Error::Parse {
            line: hline,
            msg: "missing vertex/face counts".into(),
        })?
    } else {
        (hline, header)
    };
    let num = |line: usize, tok: &str| -> Result<usize> {
        tok.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("`{tok}` is not a count"),
        })
    };
    if counts.len() < 2 {
        return Err(Error::Parse {
            line: cline,
            msg: "expected vertex and face counts".into(),
        });
    }
    let nv = num(cline, counts[0])?;
    let nf = num(cline, counts[1])?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, tok) = lines.next().ok_or(Error::Parse {
            line: cline,
            msg: format!("expected {nv} vertices"),
        })?;
        if tok.len() < 3 {
            return Err(Error::Parse {
                line,
                msg: "vertex needs 3 coordinates".into(),
            });
        }
        let mut p = [0.0; 3];
        for (c, t) in p.iter_mut().zip(&tok) {
            *c = t.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("`{t}` is not a number"),
            })?;
        }
        vertices.push(p);
    }

    let mut faces = Vec::with_capacity(nf);
    for f in 0..nf {
        let (line, tok) = lines.next().ok_or(Error::Parse {
            line: cline,
            msg: format!("expected {nf} faces"),
        })?;
        let n = num(line, tok[0])?;
        if n < 3 || tok.len() < n + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("face {f} has a malformed vertex list"),
            });
        }
        let idx = tok[1..=n]
            .iter()
            .map(|t| num(line, t))
            .collect::<Result<Vec<_>>>()?;
        if let Some(&bad) = idx.iter().find(|&&v| v >= nv) {
            return Err(Error::Parse {
                line,
                msg: format!("face {f} references vertex {bad} but only {nv} exist"),
            });
        }
        for t in 1..n - 1 {
            faces.push([idx[0], idx[t], idx[t + 1]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn read_off(path: impl AsRef<Path>) -> Result<(TriangleMesh, usize)> {
    parse_off(&fs::read_to_string(path)?)
}

pub fn write_off(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let mut out = format!("OFF\n{} {} 0\n", mesh.vertices().len(), mesh.faces().len());
    for v in mesh.vertices() {
        out.push_str(&format!("{:.8e} {:.8e} {:.8e}\n", v[0], v[1], v[2]));
    }
    for f in mesh.faces() {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_triangle() {
        let (m, dropped) = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn quad_is_fanned() {
        let text = "OFF\n# square\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let (m, _) = parse_off(text).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn counts_on_header_line_and_degenerates() {
        let text = "OFF 4 2 0\n0 0 0\n1 0 0\n0 1 0\n2 0 0\n3 0 1 2\n3 0 1 3\n";
        let (m, dropped) = parse_off(text).unwrap();
        assert_eq!((m.faces().len(), dropped), (1, 1));
    }

    #[test]
    fn errors() {
        assert!(parse_off("3 1 0\n").is_err());
        let err = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n").unwrap_err();
        assert!(err.to_string().contains("face 0"), "{err}");
        assert!(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n").is_err());
    }
}
