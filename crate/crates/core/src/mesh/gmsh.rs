//! Reader for Gmsh ASCII 2.2 tetrahedral meshes (coordinates in mm).

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde_json::Value;

use super::{ElementKind, Mesh};
use crate::error::{Error, Result};

/// Parse `{"tag": sigma}` where sigma is a number (isotropic) or 9 row-major entries.
pub fn parse_conductivity_map(json: &str) -> Result<HashMap<i32, Matrix3<f64>>> {
    let v: Value = serde_json::from_str(json)?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Config("conductivity map must be a JSON object".into()))?;
    let mut out = HashMap::new();
    for (k, val) in obj {
        let tag: i32 = k
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("region tag {k:?} is not an integer")))?;
        let s = match val {
            Value::Number(n) => Matrix3::identity() * n.as_f64().unwrap_or(f64::NAN),
            Value::Array(a) if a.len() == 9 => {
                let xs: Vec<f64> = a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect();
                Matrix3::from_row_slice(&xs)
            }
            _ => {
                return Err(Error::Config(format!(
                    "conductivity for tag {tag} must be a number or 9 numbers"
                )))
            }
        };
        super::check_conductivity(&s)?;
        out.insert(tag, s);
    }
    Ok(out)
}

pub fn load_gmsh_ascii(path: impl AsRef<Path>, conductivity: &HashMap<i32, Matrix3<f64>>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_gmsh_ascii(&text, conductivity)
}

// element types of dimension < 3 that may accompany the volume mesh
const LOWER_DIM: [u32; 8] = [1, 2, 3, 8, 9, 10, 15, 16];
const TET4: u32 = 4;

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.it.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }

    fn expect(&mut self) -> Result<&'a str> {
        let line = self.line;
        self.next().ok_or(Error::Parse {
            line,
            msg: "unexpected end of file".into(),
        })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }
}

fn num<T: std::str::FromStr>(lines: &Lines, tok: Option<&str>) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| lines.err("malformed number"))
}

pub fn read_gmsh_ascii(text: &str, conductivity: &HashMap<i32, Matrix3<f64>>) -> Result<Mesh> {
    let mut lines = Lines {
        it: text.lines().enumerate(),
        line: 0,
    };
    let mut nodes: Vec<Vector3<f64>> = Vec::new();
    let mut node_index: HashMap<usize, usize> = HashMap::new();
    let mut raw_elements: Vec<(usize, [usize; 4], i32)> = Vec::new();
    let mut saw_format = false;
    while let Some(l) = lines.next() {
        match l {
            "$MeshFormat" => {
                let v = lines.expect()?;
                let mut t = v.split_whitespace();
                let version: String = num(&lines, t.next())?;
                let file_type: u32 = num(&lines, t.next())?;
                if !version.starts_with("2.") || file_type != 0 {
                    return Err(lines.err(format!("unsupported format {v:?}; need ASCII 2.2")));
                }
                saw_format = true;
                if lines.expect()? != "$EndMeshFormat" {
                    return Err(lines.err("expected $EndMeshFormat"));
                }
            }
            "$Nodes" => {
                let count = lines.expect()?;
                let n: usize = num(&lines, Some(count))?;
                nodes.reserve(n);
                for _ in 0..n {
                    let l = lines.expect()?;
                    let mut t = l.split_whitespace();
                    let id: usize = num(&lines, t.next())?;
                    let x: f64 = num(&lines, t.next())?;
                    let y: f64 = num(&lines, t.next())?;
                    let z: f64 = num(&lines, t.next())?;
                    node_index.insert(id, nodes.len());
                    nodes.push(Vector3::new(x, y, z) * 1e-3);
                }
                if lines.expect()? != "$EndNodes" {
                    return Err(lines.err("expected $EndNodes"));
                }
            }
            "$Elements" => {
                let count = lines.expect()?;
                let n: usize = num(&lines, Some(count))?;
                for _ in 0..n {
                    let l = lines.expect()?;
                    let mut t = l.split_whitespace();
                    let id: usize = num(&lines, t.next())?;
                    let ty: u32 = num(&lines, t.next())?;
                    let ntags: usize = num(&lines, t.next())?;
                    let tags: Vec<i32> = (0..ntags)
                        .map(|_| num(&lines, t.next()))
                        .collect::<Result<_>>()?;
                    if LOWER_DIM.contains(&ty) {
                        continue;
                    }
                    if ty != TET4 {
                        return Err(Error::UnsupportedElement(ty));
                    }
                    let tag = *tags
                        .first()
                        .ok_or_else(|| lines.err(format!("element {id} has no physical tag")))?;
                    let mut v = [0usize; 4];
                    for slot in &mut v {
                        *slot = num(&lines, t.next())?;
                    }
                    raw_elements.push((id, v, tag));
                }
                if lines.expect()? != "$EndElements" {
                    return Err(lines.err("expected $EndElements"));
                }
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                // skip unknown sections such as $PhysicalNames
                let end = format!("$End{}", &s[1..]);
                loop {
                    if lines.expect()? == end {
                        break;
                    }
                }
            }
            _ => return Err(lines.err(format!("unexpected line {l:?}"))),
        }
    }
    if !saw_format {
        return Err(Error::Parse {
            line: 1,
            msg: "missing $MeshFormat".into(),
        });
    }
    let mut conn = Vec::with_capacity(raw_elements.len() * 4);
    let mut sigma = Vec::with_capacity(raw_elements.len());
    let mut labels = Vec::with_capacity(raw_elements.len());
    for (e, (_, v, tag)) in raw_elements.iter().enumerate() {
        for &node in v {
            let idx = node_index.get(&node).ok_or(Error::VertexIndexOutOfRange {
                element: e,
                vertex: node,
                count: nodes.len(),
            })?;
            conn.push(*idx);
        }
        sigma.push(*conductivity.get(tag).ok_or(Error::UnknownRegion(*tag))?);
        labels.push(*tag);
    }
    Mesh::new(nodes, conn, ElementKind::Tet, sigma, labels)
}

/// Gmsh ASCII 2.2 text of a tetrahedral mesh, coordinates in mm, labels as physical tags.
pub fn write_gmsh_ascii(mesh: &Mesh) -> Result<String> {
    use std::fmt::Write;
    if mesh.kind() != ElementKind::Tet {
        return Err(Error::WrongElementKind { expected: "tetrahedral" });
    }
    let mut out = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(out, "{}", mesh.num_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let q = p * 1e3;
        let _ = writeln!(out, "{} {:?} {:?} {:?}", i + 1, q.x, q.y, q.z);
    }
    out.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(out, "{}", mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let v = mesh.element(e);
        let tag = mesh.label(e);
        let _ = writeln!(out, "{} {TET4} 2 {tag} {tag} {} {} {} {}", e + 1, v[0] + 1, v[1] + 1, v[2] + 1, v[3] + 1);
    }
    out.push_str("$EndElements\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TET: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n$Elements\n2\n1 2 2 1 1 1 2 3\n2 4 2 1 1 1 2 3 4\n$EndElements\n";

    fn unit_map() -> HashMap<i32, Matrix3<f64>> {
        parse_conductivity_map(r#"{"1": 0.33}"#).unwrap()
    }

    #[test]
    fn write_then_read() {
        let m = super::super::split_hex_to_tet(&super::super::tests::cube_grid(2)).unwrap();
        let text = write_gmsh_ascii(&m).unwrap();
        let back = read_gmsh_ascii(&text, &unit_map()).unwrap();
        assert_eq!(back.num_elements(), m.num_elements());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(write_gmsh_ascii(&super::super::tests::cube_grid(1)).is_err());
    }

    #[test]
    fn minimal_file() {
        let m = read_gmsh_ascii(ONE_TET, &unit_map()).unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.label(0), 1);
        assert!((m.vertices()[1].x - 1e-3).abs() < 1e-18);
        assert!((m.volume(0) - 1e-9 / 6.0).abs() < 1e-22);
    }

    #[test]
    fn bad_node_reference() {
        let text = ONE_TET.replace("2 4 2 1 1 1 2 3 4", "2 4 2 1 1 1 2 3 999");
        assert!(matches!(
            read_gmsh_ascii(&text, &unit_map()),
            Err(Error::VertexIndexOutOfRange { vertex: 999, count: 4, .. })
        ));
    }

    #[test]
    fn unknown_tag_and_type() {
        let text = ONE_TET.replace("2 4 2 1 1 1 2 3 4", "2 4 2 7 7 1 2 3 4");
        assert!(matches!(read_gmsh_ascii(&text, &unit_map()), Err(Error::UnknownRegion(7))));
        let text = ONE_TET.replace("2 4 2 1 1 1 2 3 4", "2 5 2 1 1 1 2 3 4 1 2 3 4");
        assert!(matches!(read_gmsh_ascii(&text, &unit_map()), Err(Error::UnsupportedElement(5))));
    }

    #[test]
    fn inverted_tet_rejected() {
        let text = ONE_TET.replace("2 4 2 1 1 1 2 3 4", "2 4 2 1 1 1 3 2 4");
        assert!(matches!(read_gmsh_ascii(&text, &unit_map()), Err(Error::DegenerateElement(0))));
    }

    #[test]
    fn tensor_conductivity() {
        let m = parse_conductivity_map(r#"{"3": [1,0,0, 0,2,0, 0,0,3], "4": 0.1}"#).unwrap();
        assert_eq!(m[&3][(2, 2)], 3.0);
        assert!(parse_conductivity_map(r#"{"x": 1}"#).is_err());
        assert!(parse_conductivity_map(r#"{"1": -1}"#).is_err());
    }
}
