//! STL (ASCII and binary) and OBJ triangle meshes.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;
use twin_core::geometry::{MeshError, TriMesh};

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported mesh extension `{0}` (expected .stl or .obj)")]
    UnsupportedFormat(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("binary STL is truncated")]
    Truncated,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub fn read_mesh(path: &Path) -> Result<TriMesh, MeshIoError> {
    let bytes = fs::read(path)?;
    match extension(path).as_str() {
        "stl" => parse_stl(&bytes),
        "obj" => parse_obj(&String::from_utf8_lossy(&bytes)),
        other => Err(MeshIoError::UnsupportedFormat(other.to_string())),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Binary if the size matches the triangle count in the header, ASCII
/// otherwise.
pub fn parse_stl(bytes: &[u8]) -> Result<TriMesh, MeshIoError> {
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if bytes.len() == 84 + 50 * n {
            return parse_binary_stl(bytes, n);
        }
    }
    if bytes.starts_with(b"solid") {
        return parse_ascii_stl(&String::from_utf8_lossy(bytes));
    }
    Err(MeshIoError::Truncated)
}

fn parse_binary_stl(bytes: &[u8], n: usize) -> Result<TriMesh, MeshIoError> {
    let mut welder = Welder::default();
    for t in 0..n {
        let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
        let mut corners = [[0.0; 3]; 3];
        for (k, corner) in corners.iter_mut().enumerate() {
            for (c, slot) in corner.iter_mut().enumerate() {
                let o = 12 + 12 * k + 4 * c;
                *slot = f64::from(f32::from_le_bytes([
                    rec[o],
                    rec[o + 1],
                    rec[o + 2],
                    rec[o + 3],
                ]));
            }
        }
        welder.triangle(corners);
    }
    welder.finish()
}

fn parse_ascii_stl(text: &str) -> Result<TriMesh, MeshIoError> {
    let mut welder = Welder::default();
    let mut pending = Vec::with_capacity(3);
    for (i, line) in text.lines().enumerate() {
        let mut words = line.split_whitespace();
        if words.next() != Some("vertex") {
            continue;
        }
        let v = parse_xyz(words, i + 1)?;
        pending.push(v);
        if pending.len() == 3 {
            welder.triangle([pending[0], pending[1], pending[2]]);
            pending.clear();
        }
    }
    if !pending.is_empty() {
        return Err(MeshIoError::Parse {
            line: text.lines().count(),
            message: "facet with fewer than three vertices".into(),
        });
    }
    welder.finish()
}

fn parse_xyz<'a>(
    mut words: impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<[f64; 3], MeshIoError> {
    let mut v = [0.0; 3];
    for slot in &mut v {
        *slot = words
            .next()
            .and_then(|w| w.parse().ok())
            .ok_or_else(|| MeshIoError::Parse {
                line,
                message: "expected three numbers".into(),
            })?;
    }
    Ok(v)
}

/// `v` and `f` records; polygons are fan-triangulated, other records are
/// ignored.
pub fn parse_obj(text: &str) -> Result<TriMesh, MeshIoError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => vertices.push(parse_xyz(words, i + 1)?),
            Some("f") => {
                let mut idx = Vec::new();
                for w in words {
                    let first = w.split('/').next().unwrap_or("");
                    let raw: i64 = first.parse().map_err(|_| MeshIoError::Parse {
                        line: i + 1,
                        message: format!("bad face index `{w}`"),
                    })?;
                    let resolved = if raw < 0 {
                        vertices.len() as i64 + raw
                    } else {
                        raw - 1
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(MeshIoError::Parse {
                            line: i + 1,
                            message: format!("face index {raw} out of range"),
                        });
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(MeshIoError::Parse {
                        line: i + 1,
                        message: "face with fewer than three vertices".into(),
                    });
                }
                for k in 1..idx.len() - 1 {
                    let t = [idx[0], idx[k], idx[k + 1]];
                    if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                        triangles.push(t);
                    }
                }
            }
            _ => {}
        }
    }
    Ok(TriMesh::new(vertices, triangles)?)
}

/// Merges bit-identical corner positions into shared vertices.
#[derive(Default)]
struct Welder {
    index: HashMap<[u64; 3], u32>,
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
}

impl Welder {
    fn triangle(&mut self, corners: [[f64; 3]; 3]) {
        let t = corners.map(|p| {
            let key = p.map(|c| (c + 0.0).to_bits());
            *self.index.entry(key).or_insert_with(|| {
                self.vertices.push(p);
                (self.vertices.len() - 1) as u32
            })
        });
        if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
            self.triangles.push(t);
        }
    }

    fn finish(self) -> Result<TriMesh, MeshIoError> {
        Ok(TriMesh::new(self.vertices, self.triangles)?)
    }
}

pub fn stl_bytes(m: &TriMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * m.triangle_count());
    let mut header = [0u8; 80];
    header[..11].copy_from_slice(b"twin export");
    out.extend_from_slice(&header);
    out.extend_from_slice(&(m.triangle_count() as u32).to_le_bytes());
    for t in 0..m.triangle_count() {
        let [a, b, c] = m.corners(t);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let n = if len > 0.0 {
            n.map(|x| x / len)
        } else {
            [0.0; 3]
        };
        for p in [n, a, b, c] {
            for x in p {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

pub fn obj_text(m: &TriMesh) -> String {
    let mut s = String::new();
    for v in m.vertices() {
        s.push_str(&format!("v {} {} {}\n", v[0], v[1], v[2]));
    }
    for t in m.triangles() {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    s
}

pub fn write_mesh(path: &Path, m: &TriMesh) -> Result<(), MeshIoError> {
    match extension(path).as_str() {
        "stl" => fs::write(path, stl_bytes(m))?,
        "obj" => fs::write(path, obj_text(m))?,
        other => return Err(MeshIoError::UnsupportedFormat(other.to_string())),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_stl_round_trip_welds_vertices() {
        let cube = TriMesh::unit_cube();
        let back = parse_stl(&stl_bytes(&cube)).unwrap();
        assert_eq!(back.triangle_count(), 12);
        assert_eq!(back.vertex_count(), 8);
    }

    #[test]
    fn ascii_stl() {
        let text = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n";
        let m = parse_stl(text.as_bytes()).unwrap();
        assert_eq!((m.vertex_count(), m.triangle_count()), (3, 1));
    }

    #[test]
    fn obj_quads_are_fanned() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }
}
